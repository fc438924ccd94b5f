use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use ttrals::{RalsConfig, SolverConfig, Sparsity, Tensor};
use ttrals_cli::markov::{complete_markov, fit_markov, MarkovSpec, MarkovTensor};
use ttrals_cli::SolverChoice;

const B: usize = 6;

/// Order-2 kernel `P(w | h1, h2) = a A(w) + (1 - a) C(w)` with
/// `a = u(h1) v(h2)`; its order-3 tensor has TT ranks at most (2, 2).
struct Kernel {
    u: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl Kernel {
    fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = |rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..B).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let a = law(&mut rng);
        let c = law(&mut rng);
        let u = (0..B).map(|_| rng.random_range(0.1..1.0)).collect();
        let v = (0..B).map(|_| rng.random_range(0.1..1.0)).collect();
        Self { u, v, a, c }
    }

    fn prob(&self, h1: usize, h2: usize, w: usize) -> f64 {
        let mix = self.u[h1] * self.v[h2];
        mix * self.a[w] + (1.0 - mix) * self.c[w]
    }

    fn simulate(&self, len: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = vec![0, 1];
        while s.len() < len {
            let (h1, h2) = (s[s.len() - 2], s[s.len() - 1]);
            let row: Vec<f64> = (0..B).map(|w| self.prob(h1, h2, w)).collect();
            s.push(WeightedIndex::new(&row).unwrap().sample(&mut rng));
        }
        s
    }
}

fn spec(observed: usize, seed: u64) -> MarkovSpec {
    MarkovSpec {
        bins: B,
        orders: vec![3],
        observed,
        lambdas: vec![1e-4],
        split: 0.8,
        seed,
        visited_only: false,
        solver: SolverChoice::Both,
        admm: SolverConfig { max_iter: 2000, ..Default::default() },
        rals: RalsConfig {
            solver: SolverConfig { seed, ..Default::default() },
            d1: B,
            d2: B,
            sparsity: Sparsity::Fixed(3.0),
            // 65 cells cannot pin the ~40 parameters of a rank-(2, 2) fit;
            // the kernel is dominated by its rank-1 part.
            max_rank: 1,
            restarts: 3,
            ..Default::default()
        },
    }
}

fn rmse_to_kernel<T: Tensor + ?Sized>(x: &T, kernel: &Kernel) -> f64 {
    let mut sum = 0.0;
    for h1 in 0..B {
        for h2 in 0..B {
            for w in 0..B {
                let d = x.element(&[h1, h2, w]) - kernel.prob(h1, h2, w);
                sum += d * d;
            }
        }
    }
    (sum / (B * B * B) as f64).sqrt()
}

#[test]
fn empirical_tensor_tracks_kernel() {
    let kernel = Kernel::random(11);
    let t = MarkovTensor::from_symbols(&kernel.simulate(400_000, 12), B, 3).unwrap();
    assert_eq!(t.visited(), B * B);
    assert!(rmse_to_kernel(&t, &kernel) < 0.01);
}

#[test]
fn order_two_chain_is_recovered_from_thirty_percent_of_cells() {
    let kernel = Kernel::random(11);
    let t = MarkovTensor::from_symbols(&kernel.simulate(400_000, 12), B, 3).unwrap();
    let n = (0.3 * (B * B * B) as f64).ceil() as usize;
    for admm in [true, false] {
        let spec = spec(n, 5);
        let fit = fit_markov(&spec, &t, admm, spec.lambdas[0], spec.seed).unwrap();
        let e = rmse_to_kernel(fit.estimate.as_ref(), &kernel);
        assert!(e <= 0.05, "admm={admm}: rmse to kernel {e}");
    }
}

#[test]
fn test_equal_to_train_leaves_only_the_fit_residual() {
    let kernel = Kernel::random(3);
    let t = MarkovTensor::from_symbols(&kernel.simulate(100_000, 4), B, 3).unwrap();
    assert_eq!(t.visited(), B * B);
    let spec = spec(B * B * B, 9);
    for admm in [true, false] {
        let row = complete_markov(&spec, &t, &t, admm, spec.lambdas[0], spec.seed);
        let (e, r) = (row.error.unwrap(), row.train_rmse.unwrap());
        assert!((e - r).abs() <= 1e-12, "{}: {e} vs {r}", row.solver);
    }
}

