use proptest::prelude::*;
use torus_ot_core::bounds::{BoundReport, ReportMeta, Verdict};
use torus_ot_core::density::{cosine_mixture_density, quantize, sample, uniform_density, CosineMode, DiscreteMeasure};
use torus_ot_core::kernel::{bump_kernel, kde_field, Bandwidth, KdeMethod};
use torus_ot_core::ot::{entropic_wasserstein, exact_wasserstein};
use torus_ot_core::rate::fit_rate;
use torus_ot_core::rng::{rng_from_seed, uniform01};
use torus_ot_core::spectral::{
    apply_multiplier, forward_transform, inverse_transform, riesz_surrogate_norm, sobolev_neg_norm_exact_p2, symbol_a,
};
use torus_ot_core::torus::{Grid, GridField, TorusPoint};

fn random_field(grid: Grid, seed: u64, mean_zero: bool) -> GridField {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..grid.len()).map(|_| 2.0 * uniform01(&mut rng) - 1.0).collect();
    if mean_zero {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    }
    GridField::new(grid, v).unwrap()
}

fn random_measure(seed: u64, d: usize, k: usize) -> DiscreteMeasure {
    let mut rng = rng_from_seed(seed);
    let atoms = (0..k)
        .map(|_| TorusPoint::wrap(&(0..d).map(|_| uniform01(&mut rng)).collect::<Vec<_>>()).unwrap())
        .collect();
    let weights = (0..k).map(|_| 0.05 + uniform01(&mut rng)).collect();
    DiscreteMeasure::normalized(atoms, weights).unwrap()
}

fn grid_params() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, prop::sample::select(vec![8usize, 16, 32]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_roundtrip_and_parseval((d, n) in grid_params(), seed in any::<u64>()) {
        let grid = Grid::new(d, n).unwrap();
        let field = random_field(grid, seed, false);
        let spec = forward_transform(&field);
        let back = inverse_transform(&spec).unwrap();
        prop_assert!(back.max_abs_diff(&field) < 1e-10);
        let lhs = field.values().iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
        let rhs = spec.energy();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs);
    }

    #[test]
    fn multiplier_is_linear((d, n) in grid_params(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = Grid::new(d, n).unwrap();
        let (x, y) = (random_field(grid, seed, false), random_field(grid, seed ^ 1, false));
        let s = symbol_a();
        let combo = apply_multiplier(&forward_transform(&x.scale(a).add(&y.scale(b)).unwrap()), &s);
        let sx = apply_multiplier(&forward_transform(&x), &s);
        let sy = apply_multiplier(&forward_transform(&y), &s);
        for ((c, u), v) in combo.coeffs().iter().zip(sx.coeffs()).zip(sy.coeffs()) {
            prop_assert!((c - (u * a + v * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_sandwich((d, n) in grid_params(), seed in any::<u64>()) {
        let field = random_field(Grid::new(d, n).unwrap(), seed, true);
        let exact = sobolev_neg_norm_exact_p2(&field).unwrap();
        let surrogate = riesz_surrogate_norm(&field, 2.0).unwrap();
        let pi2 = 2.0 * std::f64::consts::PI;
        prop_assert!(surrogate / exact >= pi2 / (d as f64).sqrt() - 1e-9);
        prop_assert!(surrogate / exact <= pi2 + 1e-9);
    }

    #[test]
    fn kde_paths_agree(d in 1usize..=2, seed in any::<u64>(), n in 1usize..40, nh in 8.0f64..16.0) {
        let grid = Grid::new(d, if d == 1 { 128 } else { 32 }).unwrap();
        let h = Bandwidth::new(nh / grid.points_per_axis() as f64).unwrap();
        let s = sample(&uniform_density(d).unwrap(), n, seed).unwrap();
        let k = bump_kernel(d).unwrap();
        let direct = kde_field(&s, &k, h, &grid, KdeMethod::Direct).unwrap();
        let spectral = kde_field(&s, &k, h, &grid, KdeMethod::Spectral).unwrap();
        prop_assert!(direct.min() >= 0.0);
        prop_assert!(spectral.min() >= -1e-3);
        prop_assert!(direct.max_abs_diff(&spectral) < 1e-3);
    }

    #[test]
    fn samples_respect_density_bounds(seed in any::<u64>(), alpha in 0.0f64..0.95, m in 1i64..6) {
        let f = cosine_mixture_density(2, vec![CosineMode::new(vec![m, -1], alpha, 0.3)]).unwrap();
        let s = sample(&f, 64, seed).unwrap();
        for x in s.points() {
            let v = f.eval(x).unwrap();
            prop_assert!(v >= f.f_min() - 1e-12 && v <= f.f_max() + 1e-12);
        }
        let q = quantize(&uniform_density(2).unwrap(), &Grid::new(2, 8).unwrap()).unwrap();
        prop_assert!(q.weights().iter().all(|&w| w == 1.0 / 64.0));
    }

    #[test]
    fn exact_plans_are_feasible_vertices(seed in any::<u64>(), d in 1usize..=3, m in 1usize..12, n in 1usize..12) {
        let (a, b) = (random_measure(seed, d, m), random_measure(seed ^ 7, d, n));
        let r = exact_wasserstein(&a, &b, 2.0).unwrap();
        let plan = r.plan.unwrap();
        prop_assert!(plan.marginal_error(&a, &b) < 1e-9);
        prop_assert!(plan.entries.len() < m + n);
        prop_assert!((r.wasserstein - r.cost_p.sqrt()).abs() < 1e-12);
        let w1 = exact_wasserstein(&a, &b, 1.0).unwrap().wasserstein;
        prop_assert!(w1 <= r.wasserstein + 1e-12);
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), v0 in -2.0f64..2.0, v1 in -2.0f64..2.0) {
        let (a, b) = (random_measure(seed, 2, 6), random_measure(seed ^ 3, 2, 5));
        let shift = |x: &DiscreteMeasure| {
            DiscreteMeasure::new(x.atoms().iter().map(|p| p.shifted(&[v0, v1]).unwrap()).collect(), x.weights().to_vec()).unwrap()
        };
        let w = exact_wasserstein(&a, &b, 2.0).unwrap().wasserstein;
        let ws = exact_wasserstein(&shift(&a), &shift(&b), 2.0).unwrap().wasserstein;
        prop_assert!((w - ws).abs() < 1e-9);
    }

    #[test]
    fn entropic_is_an_upper_bound(seed in any::<u64>(), eps in prop::sample::select(vec![0.1, 0.01, 0.001])) {
        let (a, b) = (random_measure(seed, 2, 6), random_measure(seed ^ 5, 2, 7));
        let exact = exact_wasserstein(&a, &b, 2.0).unwrap().cost_p;
        let ent = entropic_wasserstein(&a, &b, 2.0, eps, 100_000).unwrap();
        prop_assert!(ent.cost_p >= exact - 1e-12);
        prop_assert!(ent.plan.unwrap().marginal_error(&a, &b) < 1e-9);
    }

    #[test]
    fn verdict_matches_rule(lhs in 0.0f64..2.0, rhs in 0.0f64..2.0, slack in 0.0f64..0.5) {
        let r = BoundReport::new("p", "", lhs, rhs, slack, ReportMeta::default()).unwrap();
        prop_assert_eq!(r.is_violated(), lhs > rhs + slack);
        prop_assert_eq!(r.verdict == Verdict::Holds, lhs <= rhs);
    }

    #[test]
    fn power_laws_are_recovered(c in 0.01f64..100.0, e in -2.0f64..2.0, k in 2usize..8) {
        let pts: Vec<(f64, f64)> = (0..k).map(|i| {
            let n = 16.0 * 2f64.powi(i as i32);
            (n, c * n.powf(e))
        }).collect();
        let fit = fit_rate(&pts).unwrap();
        prop_assert!((fit.slope - e).abs() < 1e-12);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-9 || e == 0.0);
    }
}
