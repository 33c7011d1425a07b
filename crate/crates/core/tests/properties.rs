use proptest::prelude::*;

use stochconc::bounds::{chebyshev_interval, BoundParams, Rates};
use stochconc::ensemble::nearest_rank;
use stochconc::generate::{gaussian_matrix, plant_system};
use stochconc::mtx::{parse_matrix_market, to_matrix_market};
use stochconc::rng::SeededStream;
use stochconc::solvers::{rk_step, run_trajectory, RowSampler};
use stochconc::{Method, Problem, Sampling, VarianceForm};

fn params(mu: f64, eta: f64) -> BoundParams {
    let rates = Rates {
        r: mu,
        eta,
        rho: mu,
        alpha: 1.0,
        r_deficit: 1.0 - mu,
        eta_deficit: 1.0 - eta,
        contractive: mu < 1.0,
    };
    BoundParams::from_rates(&rates, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rk_step_satisfies_chosen_row(m in 2usize..8, n in 1usize..5, seed in 0u64..1000, i in 0usize..8) {
        let a = gaussian_matrix(m, n, 1.0, seed).unwrap();
        let i = i % m;
        let b = SeededStream::new(seed).normal_vec(m, 1.0);
        let x = rk_step(&vec![0.0; n], &a, &b, i).unwrap();
        let residual: f64 = a.row(i).iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - b[i];
        prop_assert!(residual.abs() <= 1e-9 * (1.0 + b[i].abs()));
    }

    #[test]
    fn rk_error_never_increases(m in 3usize..12, n in 1usize..4, seed in 0u64..1000) {
        prop_assume!(m >= n);
        let a = gaussian_matrix(m, n, 1.0, seed).unwrap();
        let Ok(sys) = plant_system(&a, seed + 1) else { return Ok(()) };
        let tr = run_trajectory(Problem::Linear(&sys), Method::Rk, &vec![0.0; n], 30, Sampling::NormSquared, seed).unwrap();
        let floor = 1e-12 * tr.error_sq[0];
        prop_assert!(tr.error_sq.windows(2).all(|w| w[1] <= w[0] + floor));
    }

    #[test]
    fn sampler_never_picks_zero_weight(weights in proptest::collection::vec(0.0f64..3.0, 1..10), seed in 0u64..1000) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let total: f64 = weights.iter().sum();
        let sampler = RowSampler::new(weights.iter().map(|w| w / total).collect()).unwrap();
        let mut rng = SeededStream::new(seed);
        for _ in 0..200 {
            let i = sampler.sample_index(&mut rng);
            prop_assert!(i < weights.len());
            prop_assert!(weights[i] > 0.0);
        }
    }

    #[test]
    fn matrix_market_round_trip_is_exact(m in 1usize..6, n in 1usize..6, seed in 0u64..1000) {
        let a = gaussian_matrix(m, n, 3.0, seed).unwrap();
        let back = parse_matrix_market(&to_matrix_market(&a), std::path::Path::new("x.mtx")).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn safe_interval_contains_paper_interval(mu in 0.01f64..1.0, frac in 0.0f64..1.0, k in 1usize..200, eps in 0.01f64..1.0) {
        let p = params(mu, mu * frac);
        let safe = chebyshev_interval(&p, k, eps, VarianceForm::Safe).unwrap();
        let paper = chebyshev_interval(&p, k, eps, VarianceForm::Paper).unwrap();
        prop_assert!(safe >= paper);
    }

    #[test]
    fn nearest_rank_is_monotone(mut xs in proptest::collection::vec(-1e3f64..1e3, 1..50), l1 in 0.01f64..0.99, l2 in 0.01f64..0.99) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(nearest_rank(&xs, lo) <= nearest_rank(&xs, hi));
    }
}
