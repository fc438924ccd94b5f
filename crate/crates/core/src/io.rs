//! Plain-text formats for tensors, TT checkpoints, observations and series.
//!
//! * Dense tensor: a header line `K I_1 ... I_K`, then one value per line in
//!   row-major order.
//! * TT checkpoint: a line `K`, then for each core a line `I R_left R_right`
//!   followed by its `I * R_left * R_right` values, one per line.
//! * Observations: CSV with header `i_1,...,i_K,y` and 0-based indices.
//! * Time series: one numeric column, optional header.
//!
//! Parse errors report 1-based line numbers.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Result, TtError};
use crate::observation::ObservationSet;
use crate::tensor::{DenseTensor, Shape};
use crate::tt::{Core, TtTensor};

fn parse_err(line: u64, message: impl Into<String>) -> TtError {
    TtError::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with their 1-based numbers.
struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    number: u64,
}

impl<R: Read> Lines<R> {
    fn new(r: R) -> Self {
        Self {
            inner: BufReader::new(r).lines(),
            number: 0,
        }
    }

    fn next_line(&mut self, what: &str) -> Result<(u64, String)> {
        loop {
            self.number += 1;
            match self.inner.next() {
                None => return Err(parse_err(self.number, format!("unexpected end of input, expected {what}"))),
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok((self.number, line));
                    }
                }
            }
        }
    }

    fn usizes(&mut self, what: &str) -> Result<(u64, Vec<usize>)> {
        let (n, line) = self.next_line(what)?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| parse_err(n, format!("{what}: {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((n, vals))
    }

    fn value(&mut self) -> Result<f64> {
        let (n, line) = self.next_line("a value")?;
        let v = line
            .trim()
            .parse::<f64>()
            .map_err(|e| parse_err(n, format!("{:?}: {e}", line.trim())))?;
        if !v.is_finite() {
            return Err(parse_err(n, "non-finite value"));
        }
        Ok(v)
    }

    fn expect_end(&mut self) -> Result<()> {
        for line in self.inner.by_ref() {
            self.number += 1;
            if !line?.trim().is_empty() {
                return Err(parse_err(self.number, "trailing data"));
            }
        }
        Ok(())
    }
}

pub fn read_dense<R: Read>(r: R) -> Result<DenseTensor> {
    let mut lines = Lines::new(r);
    let (n, header) = lines.usizes("header `K I_1 ... I_K`")?;
    let (&k, dims) = header.split_first().ok_or_else(|| parse_err(n, "empty header"))?;
    if dims.len() != k {
        return Err(parse_err(n, format!("order {k} but {} mode sizes", dims.len())));
    }
    let shape = Shape::new(dims.to_vec()).map_err(|e| parse_err(n, e.to_string()))?;
    let values = (0..shape.numel()).map(|_| lines.value()).collect::<Result<Vec<_>>>()?;
    lines.expect_end()?;
    DenseTensor::new(shape, values)
}

pub fn write_dense<W: Write>(mut w: W, x: &DenseTensor) -> Result<()> {
    let dims = x.shape().dims();
    write!(w, "{}", dims.len())?;
    for d in dims {
        write!(w, " {d}")?;
    }
    writeln!(w)?;
    for v in x.values() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn read_tt<R: Read>(r: R) -> Result<TtTensor> {
    let mut lines = Lines::new(r);
    let (n, head) = lines.usizes("core count")?;
    let &[k] = head.as_slice() else {
        return Err(parse_err(n, "expected a single core count"));
    };
    let mut cores = Vec::with_capacity(k);
    for _ in 0..k {
        let (n, dims) = lines.usizes("core header `I R_left R_right`")?;
        let &[i, rl, rr] = dims.as_slice() else {
            return Err(parse_err(n, "core header needs three integers"));
        };
        let len = i
            .checked_mul(rl)
            .and_then(|v| v.checked_mul(rr))
            .ok_or_else(|| parse_err(n, "core size overflows"))?;
        let data = (0..len).map(|_| lines.value()).collect::<Result<Vec<_>>>()?;
        cores.push(Core::new(i, rl, rr, data).map_err(|e| parse_err(n, e.to_string()))?);
    }
    lines.expect_end()?;
    TtTensor::new(cores)
}

pub fn write_tt<W: Write>(mut w: W, tt: &TtTensor) -> Result<()> {
    writeln!(w, "{}", tt.order())?;
    for core in tt.cores() {
        writeln!(w, "{} {} {}", core.dim(), core.rank_left(), core.rank_right())?;
        for v in core.data() {
            writeln!(w, "{v:e}")?;
        }
    }
    Ok(())
}

fn csv_line(pos: Option<&csv::Position>) -> u64 {
    pos.map_or(0, |p| p.line())
}

fn csv_err(e: csv::Error) -> TtError {
    let line = csv_line(e.position());
    parse_err(line, e.to_string())
}

/// Observations over `shape`; the header must have `K + 1` columns.
pub fn read_observations<R: Read>(r: R, shape: &Shape) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let k = shape.order();
    if header.len() != k + 1 {
        return Err(parse_err(1, format!("header has {} columns, expected {}", header.len(), k + 1)));
    }
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = csv_line(rec.position());
        let index = rec
            .iter()
            .take(k)
            .map(|t| t.parse::<usize>().map_err(|e| parse_err(line, format!("index {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        shape.check_index(&index).map_err(|e| parse_err(line, e.to_string()))?;
        let y: f64 = rec[k]
            .parse()
            .map_err(|e| parse_err(line, format!("value {:?}: {e}", &rec[k])))?;
        if !y.is_finite() {
            return Err(parse_err(line, "non-finite value"));
        }
        indices.push(index);
        values.push(y);
    }
    if indices.is_empty() {
        return Err(parse_err(2, "no observations"));
    }
    ObservationSet::new(shape.clone(), indices, values)
}

pub fn write_observations<W: Write>(w: W, obs: &ObservationSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let k = obs.shape().order();
    let mut header: Vec<String> = (1..=k).map(|m| format!("i_{m}")).collect();
    header.push("y".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for (idx, y) in obs.indices().iter().zip(obs.values()) {
        let mut rec: Vec<String> = idx.iter().map(usize::to_string).collect();
        rec.push(format!("{y:e}"));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One numeric column. A non-numeric first row is treated as a header.
pub fn read_series<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = csv_line(rec.position());
        if rec.len() != 1 {
            return Err(parse_err(line, format!("expected one column, found {}", rec.len())));
        }
        match rec[0].parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(parse_err(line, "non-finite value")),
            Err(_) if row == 0 => {}
            Err(e) => return Err(parse_err(line, format!("{:?}: {e}", &rec[0]))),
        }
    }
    if out.is_empty() {
        return Err(parse_err(1, "empty series"));
    }
    Ok(out)
}
