use nalgebra::DVector;
use proptest::prelude::*;
use ttrals::observation::{adjoint_mask, apply_mask, sample_mask};
use ttrals::projection::{project_dense, project_tt, sample_projection};
use ttrals::proximal::{numerical_rank, prox_schatten, schatten1, schatten_tt_norm};
use ttrals::rals::{build_gamma, build_gamma_columnwise, build_omega};
use ttrals::{random_tt, DenseTensor, Matrix, Shape, TtTensor};

/// Random shape with `K` in `2..=max_order`, mode sizes in `1..=max_dim`, and
/// TT ranks in `1..=max_rank`.
fn tt_case(max_order: usize, max_dim: usize, max_rank: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>, u64)> {
    (2..=max_order).prop_flat_map(move |k| {
        (
            prop::collection::vec(1..=max_dim, k),
            prop::collection::vec(1..=max_rank, k - 1),
            any::<u64>(),
        )
    })
}

fn build((dims, ranks, seed): &(Vec<usize>, Vec<usize>, u64)) -> TtTensor {
    random_tt(&Shape::new(dims.clone()).unwrap(), ranks, *seed).unwrap()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn rel_close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1e-300) || (a - b).norm() <= 1e-15
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn elements_match_dense(case in tt_case(5, 6, 4)) {
        let tt = build(&case);
        let dense = tt.to_dense().unwrap();
        let mut idx = vec![0; tt.order()];
        for lin in 0..dense.values().len() {
            tt.shape().unravel(lin, &mut idx);
            prop_assert!((tt.element(&idx).unwrap() - dense.values()[lin]).abs() <= 1e-10);
        }
    }

    #[test]
    fn fold_inverts_unfold(case in tt_case(4, 4, 3)) {
        let dense = build(&case).to_dense().unwrap();
        for k in 1..dense.shape().order() {
            let back = DenseTensor::fold(&dense.unfold(k).unwrap(), k, dense.shape()).unwrap();
            prop_assert_eq!(&back, &dense);
        }
    }

    #[test]
    fn unfolding_rank_is_bounded_by_tt_rank(case in tt_case(5, 5, 3)) {
        let tt = build(&case);
        let dense = tt.to_dense().unwrap();
        for (k, &r) in (1..tt.order()).zip(&tt.ranks()) {
            prop_assert!(numerical_rank(&dense.unfold(k).unwrap(), 1e-8).unwrap() <= r);
        }
    }

    #[test]
    fn interfaces_factor_each_unfolding(case in tt_case(5, 4, 3)) {
        let tt = build(&case);
        let dense = tt.to_dense().unwrap();
        for k in 1..tt.order() {
            let product = tt.left_interface(k).unwrap() * tt.right_interface(k - 1).unwrap();
            prop_assert!(rel_close(&product, &dense.unfold(k).unwrap(), 1e-10));
        }
    }

    #[test]
    fn projection_of_tt_matches_dense(case in tt_case(5, 5, 4), d1 in 1usize..6, d2 in 1usize..6, s in 1.5f64..6.0) {
        let tt = build(&case);
        let dense = tt.to_dense().unwrap();
        for k in 1..tt.order() {
            let p = sample_projection(tt.shape(), k, d1, d2, s, case.2 ^ k as u64).unwrap();
            prop_assert!(rel_close(&project_tt(&p, &tt).unwrap(), &project_dense(&p, &dense).unwrap(), 1e-9));
        }
    }

    #[test]
    fn omega_and_gamma_are_linear_maps_of_each_core(case in tt_case(5, 4, 3)) {
        let tt = build(&case);
        let shape = tt.shape().clone();
        let n = shape.numel().min(12);
        let mask = sample_mask(&shape, n, case.2).unwrap();
        let masked = apply_mask(&tt, &mask).unwrap();
        for k in 0..tt.order() {
            let g = DVector::from_column_slice(tt.core(k).data());
            let omega = build_omega(&tt, k, &mask).unwrap();
            let fitted = &omega * &g;
            for (a, b) in fitted.iter().zip(&masked) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
            for split in 1..tt.order() {
                let p = sample_projection(&shape, split, 3, 2, 2.0, case.2.wrapping_add(split as u64)).unwrap();
                let gamma = build_gamma(&tt, k, &p).unwrap();
                prop_assert!(rel_close(&gamma, &build_gamma_columnwise(&tt, k, &p).unwrap(), 1e-9));
                let sketch = project_tt(&p, &tt).unwrap();
                let v = &gamma * &g;
                let expect = Matrix::from_row_slice(p.d1(), p.d2(), v.as_slice());
                prop_assert!(rel_close(&expect, &sketch, 1e-9));
            }
        }
    }

    #[test]
    fn projection_is_linear(case in tt_case(4, 4, 2), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let x = build(&case).to_dense().unwrap();
        let y = build(&(case.0.clone(), case.1.clone(), case.2.wrapping_add(1))).to_dense().unwrap();
        let combo: Vec<f64> = x.values().iter().zip(y.values()).map(|(u, v)| a * u + b * v).collect();
        let z = DenseTensor::new(x.shape().clone(), combo).unwrap();
        for k in 1..x.shape().order() {
            let p = sample_projection(x.shape(), k, 3, 3, 2.0, case.2).unwrap();
            let lhs = project_dense(&p, &z).unwrap();
            let rhs = project_dense(&p, &x).unwrap() * a + project_dense(&p, &y).unwrap() * b;
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn adjoint_identity(case in tt_case(4, 5, 2), seed in any::<u64>()) {
        let x = build(&case).to_dense().unwrap();
        let shape = x.shape().clone();
        let n = (shape.numel() / 2).max(1);
        let mask = sample_mask(&shape, n, seed).unwrap();
        let v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.37 + seed as f64 * 1e-20).sin()).collect();
        let lhs: f64 = apply_mask(&x, &mask).unwrap().iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs = x.inner(&adjoint_mask(&v, &mask, &shape).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn prox_is_nonexpansive(a in matrix(3, 4), b in matrix(3, 4), t in 0.0f64..3.0) {
        let pa = prox_schatten(&a, t).unwrap();
        let pb = prox_schatten(&b, t).unwrap();
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-10);
    }

    #[test]
    fn schatten_norms_are_norms(a in matrix(4, 3), b in matrix(4, 3), c in -3.0f64..3.0) {
        let (na, nb) = (schatten1(&a).unwrap(), schatten1(&b).unwrap());
        prop_assert!(schatten1(&(&a + &b)).unwrap() <= na + nb + 1e-10);
        prop_assert!((schatten1(&(&a * c)).unwrap() - c.abs() * na).abs() <= 1e-10 * (1.0 + na));
        prop_assert!(na + 1e-12 >= a.norm());
    }

    #[test]
    fn schatten_tt_norm_is_a_norm(case in tt_case(4, 4, 3), c in -3.0f64..3.0) {
        let x = build(&case).to_dense().unwrap();
        let y = build(&(case.0.clone(), case.1.clone(), case.2.wrapping_add(7))).to_dense().unwrap();
        let sum = DenseTensor::new(x.shape().clone(), x.values().iter().zip(y.values()).map(|(u, v)| u + v).collect()).unwrap();
        let scaled = DenseTensor::new(x.shape().clone(), x.values().iter().map(|u| c * u).collect()).unwrap();
        let (nx, ny) = (schatten_tt_norm(&x).unwrap(), schatten_tt_norm(&y).unwrap());
        prop_assert!(schatten_tt_norm(&sum).unwrap() <= nx + ny + 1e-10);
        prop_assert!((schatten_tt_norm(&scaled).unwrap() - c.abs() * nx).abs() <= 1e-10 * (1.0 + nx));
    }
}
