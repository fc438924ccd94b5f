//! Monte Carlo checks of the sampling routines against their laws.

use ttrals::observation::{lambda_floor, observe, sample_mask};
use ttrals::projection::{project_dense, sample_projection};
use ttrals::rng::derive_seed;
use ttrals::{DenseTensor, Shape};

#[test]
fn mask_cells_are_equally_likely() {
    let shape = Shape::new(vec![4, 4]).unwrap();
    let trials = 10_000;
    let mut hits = [0usize; 16];
    for seed in 0..trials {
        let mask = sample_mask(&shape, 8, seed).unwrap();
        let mut seen = [false; 16];
        for idx in &mask {
            let lin = shape.linear_index(idx);
            assert!(!seen[lin], "duplicate index");
            seen[lin] = true;
            hits[lin] += 1;
        }
    }
    for h in hits {
        let frac = h as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.03, "{frac}");
    }
}

#[test]
fn noise_has_requested_moments() {
    let shape = Shape::new(vec![100, 100]).unwrap();
    let zero = DenseTensor::zeros(shape.clone());
    let mask = sample_mask(&shape, 10_000, 1).unwrap();
    let obs = observe(&zero, mask, 0.1, 2).unwrap();
    let n = obs.len() as f64;
    let mean = obs.values().iter().sum::<f64>() / n;
    let var = obs.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    // Standard errors: 0.1/100 for the mean, about 0.01 * sqrt(2/n) for the variance.
    assert!(mean.abs() <= 4.0 * 0.001, "{mean}");
    assert!((var - 0.01).abs() <= 4.0 * 0.01 * (2.0 / n).sqrt(), "{var}");
}

#[test]
fn lambda_floor_tracks_gaussian_maximum() {
    let shape = Shape::new(vec![50, 50]).unwrap();
    let zero = DenseTensor::zeros(shape.clone());
    let n = 1000;
    let sigma = 0.1;
    let reference = sigma * (2.0 * (n as f64).ln()).sqrt() / n as f64;
    let mut total = 0.0;
    for seed in 0..50 {
        let mask = sample_mask(&shape, n, seed).unwrap();
        let obs = observe(&zero, mask, sigma, derive_seed(seed, 9)).unwrap();
        let floor = lambda_floor(obs.values(), obs.indices(), &shape).unwrap();
        assert!(floor > 0.3 * reference && floor < 3.0 * reference, "{floor} vs {reference}");
        total += floor;
    }
    let mean = total / 50.0;
    assert!((mean / reference - 1.0).abs() < 0.25, "{mean} vs {reference}");
}

/// `E ||P_k(X)||_F² = ||X||_F²`: every projection entry has second moment
/// `1/d`, so each side is an isometry in expectation.
#[test]
fn projection_preserves_energy_in_expectation() {
    let shape = Shape::new(vec![3, 4, 5]).unwrap();
    let values: Vec<f64> = (0..60).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let x = DenseTensor::new(shape.clone(), values).unwrap();
    let energy = x.norm().powi(2);
    for k in 1..3 {
        let trials = 4000;
        let samples: Vec<f64> = (0..trials)
            .map(|t| project_dense(&sample_projection(&shape, k, 4, 4, 3.0, t).unwrap(), &x).unwrap().norm_squared())
            .collect();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0)).sqrt();
        let se = sd / (trials as f64).sqrt();
        assert!((mean - energy).abs() <= 4.0 * se, "split {k}: {mean} vs {energy} (se {se})");
    }
}
