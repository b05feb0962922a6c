use proptest::prelude::*;

use robustcgd::data::{split_indices, ColMatrix, Dataset, SplitSpec};
use robustcgd::datagen::{corrupt_dataset, CorruptionSpec};
use robustcgd::grad::{geometric_median, geometric_median_objective, DEFAULT_GM_MAX_ITER, DEFAULT_GM_TOL};
use robustcgd::rng::rng_from_seed;
use robustcgd::robust::{estimate_ch, estimate_mom, estimate_tm, median, quickselect, DEFAULT_MAX_ITER};
use robustcgd::solver::{cgd_fit, soft_threshold, Sampling, SolverConfig, StepSize};
use robustcgd::{EstimatorSpec, Loss};

fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, min..max)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

proptest! {
    #[test]
    fn quickselect_agrees_with_sort(mut v in sample(1, 60), k in 0usize..60) {
        let k = k % v.len();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(quickselect(&mut v, k).unwrap(), sorted[k]);
    }

    #[test]
    fn mom_is_affine_equivariant(v in sample(1, 80), k in 1usize..20, shift in -50.0..50.0f64, scale in 0.1..10.0f64, seed: u64) {
        let k = k.min(v.len());
        let base = estimate_mom(&v, k, &mut rng_from_seed(seed)).unwrap();
        let moved: Vec<f64> = v.iter().map(|x| scale * x + shift).collect();
        let got = estimate_mom(&moved, k, &mut rng_from_seed(seed)).unwrap();
        prop_assert!(close(got, scale * base + shift, 1e-10), "{} vs {}", got, scale * base + shift);
        let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
        let neg = estimate_mom(&flipped, k, &mut rng_from_seed(seed)).unwrap();
        prop_assert!(close(neg, -base, 1e-10));
    }

    #[test]
    fn tm_is_affine_equivariant(v in sample(1, 80), eps in 0.0..0.49f64, shift in -50.0..50.0f64, scale in -10.0..10.0f64) {
        let base = estimate_tm(&v, eps).unwrap();
        let moved: Vec<f64> = v.iter().map(|x| scale * x + shift).collect();
        let got = estimate_tm(&moved, eps).unwrap();
        prop_assert!(close(got, scale * base + shift, 1e-10), "{} vs {}", got, scale * base + shift);
    }

    #[test]
    fn ch_is_translation_equivariant(v in sample(2, 80), shift in -50.0..50.0f64, delta in 0.001..0.5f64) {
        let spread = bounds(&v).1 - bounds(&v).0;
        let base = estimate_ch(&v, delta, DEFAULT_MAX_ITER, 1e-12).unwrap();
        let moved: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let got = estimate_ch(&moved, delta, DEFAULT_MAX_ITER, 1e-12).unwrap();
        prop_assert!((got.value - base.value - shift).abs() <= 1e-6 * (1.0 + spread + shift.abs()));
        prop_assert!(close(got.scale, base.scale, 1e-6));
    }

    #[test]
    fn estimators_stay_in_sample_range(v in sample(1, 80), k in 1usize..20, eps in 0.0..0.49f64, seed: u64) {
        let (lo, hi) = bounds(&v);
        let mut ws = robustcgd::Workspace::new();
        let specs = [
            EstimatorSpec::Erm,
            EstimatorSpec::Mom { blocks: k.min(v.len()) },
            EstimatorSpec::Tm { trim: eps },
            EstimatorSpec::ch(0.01),
        ];
        for spec in specs {
            let mut buf = v.clone();
            let est = spec.estimate(&mut buf, &mut ws, &mut rng_from_seed(seed)).unwrap();
            prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9, "{:?} gave {} outside [{}, {}]", spec, est, lo, hi);
        }
    }

    /// Fewer than K/2 outliers leave a majority of clean blocks.
    #[test]
    fn mom_resists_fewer_than_half_the_blocks(
        clean in prop::collection::vec(-1.0..1.0f64, 40..120),
        k in 3usize..30,
        frac in 0.0..1.0f64,
        outlier in prop_oneof![Just(1e12), Just(-1e12), -1e6..1e6f64],
        seed: u64,
    ) {
        let n_out = (((k - 1) / 2) as f64 * frac) as usize;
        let mut v = clean.clone();
        for (i, x) in v.iter_mut().take(n_out).enumerate() {
            *x = outlier * (1 + i) as f64;
        }
        let (lo, hi) = bounds(&clean[n_out..]);
        let est = estimate_mom(&v, k, &mut rng_from_seed(seed)).unwrap();
        prop_assert!(est >= lo && est <= hi, "{} outside [{}, {}] with {} outliers", est, lo, hi, n_out);
    }

    /// At most `⌊εn⌋` outliers on either side are clipped to inlier order statistics.
    #[test]
    fn tm_resists_up_to_the_trim_level(
        clean in prop::collection::vec(-1.0..1.0f64, 40..120),
        eps in 0.01..0.45f64,
        frac in 0.0..1.0f64,
        sign in prop_oneof![Just(1.0), Just(-1.0)],
        seed: u64,
    ) {
        let n = clean.len();
        let n_out = ((eps * n as f64).floor() * frac) as usize;
        let mut v = clean.clone();
        let mut rng = rng_from_seed(seed);
        for (i, x) in v.iter_mut().take(n_out).enumerate() {
            use rand::Rng as _;
            *x = sign * 1e9 * (1.0 + rng.random::<f64>()) * (i + 1) as f64;
        }
        let (lo, hi) = bounds(&clean[n_out..]);
        let est = estimate_tm(&v, eps).unwrap();
        prop_assert!(est >= lo - 1e-12 && est <= hi + 1e-12, "{} outside [{}, {}]", est, lo, hi);
    }

    #[test]
    fn soft_threshold_shrinks(x in -100.0..100.0f64, y in -100.0..100.0f64, eps in 0.0..10.0f64) {
        let t = soft_threshold(x, eps);
        prop_assert!(t.abs() <= x.abs());
        prop_assert!(t == 0.0 || t.signum() == x.signum());
        prop_assert!((t - soft_threshold(y, eps)).abs() <= (x - y).abs() + 1e-12);
        prop_assert!((t.abs() - (x.abs() - eps).max(0.0)).abs() <= 1e-12);
    }

    #[test]
    fn median_is_order_invariant(v in sample(1, 50), seed: u64) {
        let mut shuffled = v.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng_from_seed(seed));
        prop_assert_eq!(median(&v).unwrap(), median(&shuffled).unwrap());
    }

    #[test]
    fn split_is_a_partition(n in 3usize..500, seed: u64) {
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let idx = match split_indices(n, &spec) {
            Ok(i) => i,
            Err(_) => return Ok(()),
        };
        let mut all: Vec<usize> = idx.train.iter().chain(&idx.val).chain(&idx.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn geometric_median_objective_never_increases(
        points in (1usize..5).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), 1..25)),
    ) {
        let gm = geometric_median(&points, DEFAULT_GM_TOL, DEFAULT_GM_MAX_ITER).unwrap();
        for w in gm.objectives.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
        let f = geometric_median_objective(&points, &gm.point);
        for p in &points {
            prop_assert!(f <= geometric_median_objective(&points, p) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn corruption_replaces_exactly_the_reported_rows(n in 10usize..200, d in 1usize..5, rate in 0.0..0.49f64, seed: u64) {
        let mut rng = rng_from_seed(seed ^ 1);
        use rand::Rng as _;
        let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ds = Dataset::regression(ColMatrix::from_columns(n, cols).unwrap(), y).unwrap();
        let c = corrupt_dataset(&ds, &CorruptionSpec::new(rate, seed)).unwrap();
        prop_assert_eq!(c.outliers.len(), (rate * n as f64).floor() as usize);
        prop_assert!(c.outliers.windows(2).all(|w| w[0] < w[1]));
        for i in 0..n {
            if c.outliers.binary_search(&i).is_err() {
                prop_assert_eq!(c.dataset.features.row(i), ds.features.row(i));
                prop_assert_eq!(c.dataset.labels[i], ds.labels[i]);
            }
        }
    }

    /// Exact coordinate minimization of a least-squares objective.
    #[test]
    fn erm_cgd_decreases_least_squares(n in 5usize..60, d in 1usize..6, seed: u64, cyclic: bool) {
        let mut rng = rng_from_seed(seed);
        use rand::Rng as _;
        let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let steps: Vec<f64> = cols.iter().map(|c| n as f64 / c.iter().map(|x| x * x).sum::<f64>()).collect();
        let x = ColMatrix::from_columns(n, cols).unwrap();
        let config = SolverConfig {
            sampling: if cyclic { Sampling::Cyclic } else { Sampling::Uniform },
            max_cycles: 20,
            step_size: StepSize::Fixed { steps },
            seed,
            record_objective: true,
            ..SolverConfig::default()
        };
        let fit = cgd_fit(&x, &y, Loss::Square, &config).unwrap();
        let obj: Vec<f64> = fit.record.cycles.iter().filter_map(|c| c.objective).collect();
        prop_assert!(obj.len() >= 2);
        for w in obj.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0]), "{} -> {}", w[0], w[1]);
        }
    }
}
