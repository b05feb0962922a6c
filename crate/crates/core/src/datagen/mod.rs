//! Synthetic regression problems with heavy tails and outliers, and corruption
//! of existing datasets.

mod corrupt;
mod sim;

pub use corrupt::{corrupt_dataset, CorruptionSpec, Corrupted, Mechanism};
pub use sim::{
    default_sigma, default_theta_star, largest_eigenvalue, oracle_excess_risk, simulate, student_t, Noise, OracleInfo,
    Setting, SimSpec, STUDENT_DF,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColMatrix, ColumnKind, ColumnMeta, Dataset, Task};
    use crate::rng::rng_from_seed;
    use nalgebra::{DMatrix, DVector};

    fn ols(ds: &Dataset) -> Vec<f64> {
        let (n, d) = (ds.n_samples(), ds.n_features());
        let x = DMatrix::from_fn(n, d, |i, j| ds.features.get(i, j));
        let y = DVector::from_column_slice(&ds.labels);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * y;
        xtx.cholesky().unwrap().solve(&xty).iter().copied().collect()
    }

    #[test]
    fn noiseless_setting_a_recovers_theta_star() {
        let mut spec = SimSpec::new(Setting::A, 200, 5, 3);
        spec.noise = Some(Noise::Gaussian { sigma: 0.0 });
        let (ds, info) = simulate(&spec).unwrap();
        for (a, b) in ols(&ds).iter().zip(&info.theta_star) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(info.outliers.is_empty());
    }

    #[test]
    fn setting_c_outliers() {
        let (ds, info) = simulate(&SimSpec::new(Setting::C, 1000, 5, 1)).unwrap();
        assert_eq!(info.outliers.len(), 10);
        let lambda = largest_eigenvalue(&info.sigma).unwrap();
        assert!((lambda - 10.0).abs() < 1e-9);
        let inliers: Vec<usize> = (0..1000).filter(|i| !info.outliers.contains(i)).collect();
        let y_max = inliers.iter().map(|&i| ds.labels[i].abs()).fold(0.0, f64::max);
        for &i in &info.outliers {
            assert!(ds.features.row(i).iter().all(|&v| v == lambda));
            assert_eq!(ds.labels[i], 2.0 * y_max);
        }
    }

    #[test]
    fn other_outlier_settings() {
        for setting in [Setting::D, Setting::E, Setting::F] {
            let (ds, info) = simulate(&SimSpec::new(setting, 500, 5, 8)).unwrap();
            assert_eq!(info.outliers.len(), 5);
            for &i in &info.outliers {
                let norm = ds.features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                match setting {
                    Setting::E => assert!(ds.labels[i] == 0.0 || ds.labels[i] == 1.0),
                    Setting::F => assert!((norm - 100.0).abs() < 1e-9),
                    _ => assert!((norm - 10.0 * 5f64.sqrt()).abs() < 1e-9),
                }
            }
        }
    }

    #[test]
    fn settings_share_inlier_features() {
        let (a, _) = simulate(&SimSpec::new(Setting::A, 300, 3, 5)).unwrap();
        let (b, _) = simulate(&SimSpec::new(Setting::B, 300, 3, 5)).unwrap();
        assert_eq!(a.features, b.features);
        assert_ne!(a.labels, b.labels);
        let (again, _) = simulate(&SimSpec::new(Setting::B, 300, 3, 5)).unwrap();
        assert_eq!(again, b);
    }

    #[test]
    fn student_noise_quantiles() {
        // t(2.1): P(T ≤ 1) = 0.790835, P(T ≤ 3) = 0.955005 (quadrature of the density)
        let mut rng = rng_from_seed(17);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| student_t(STUDENT_DF, &mut rng)).collect();
        let cdf = |t: f64| draws.iter().filter(|&&v| v <= t).count() as f64 / n as f64;
        assert!((cdf(0.0) - 0.5).abs() < 0.005);
        assert!((cdf(1.0) - 0.790_835).abs() < 0.005, "{}", cdf(1.0));
        assert!((cdf(3.0) - 0.955_005).abs() < 0.004, "{}", cdf(3.0));
        assert!((Noise::StudentT { nu: 2.1, scale: 1.0 }.variance().unwrap() - 21.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SimSpec::new(Setting::A, 10, 2, 0);
        spec.sigma = Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(simulate(&spec).is_err());
        let mut spec = SimSpec::new(Setting::C, 10, 2, 0);
        spec.noise = Some(Noise::Gaussian { sigma: 1.0 });
        assert!(simulate(&spec).is_err());
        assert!("g".parse::<Setting>().is_err());
        assert_eq!("C".parse::<Setting>().unwrap(), Setting::C);
    }

    #[test]
    fn excess_risk_examples() {
        let info = OracleInfo {
            setting: Setting::A,
            sigma: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            theta_star: vec![0.0, 0.0],
            noise_variance: Some(1.0),
            outliers: vec![],
        };
        assert_eq!(oracle_excess_risk(&info, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(oracle_excess_risk(&info, &[1.0, 1.0]).unwrap(), 1.5);
        let id = OracleInfo { sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]], ..info };
        assert_eq!(oracle_excess_risk(&id, &[1.0, 0.0]).unwrap(), 0.5);
    }

    fn mixed_dataset(n: usize) -> Dataset {
        let mut rng = rng_from_seed(2);
        let (sim, _) = simulate(&SimSpec::new(Setting::A, n, 2, 4)).unwrap();
        let cat: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
        let mut cols = vec![sim.features.col(0).to_vec(), sim.features.col(1).to_vec(), cat];
        cols[0][0] += student_t(3.0, &mut rng);
        let x = ColMatrix::from_columns(n, cols).unwrap();
        Dataset::regression(x, sim.labels)
            .unwrap()
            .with_columns(vec![
                ColumnMeta::continuous("a"),
                ColumnMeta::continuous("b"),
                ColumnMeta {
                    name: "c".into(),
                    kind: ColumnKind::Categorical { modalities: vec!["x".into(), "y".into(), "z".into()] },
                },
            ])
            .unwrap()
    }

    #[test]
    fn corruption_counts() {
        let ds = mixed_dataset(100);
        let c = corrupt_dataset(&ds, &CorruptionSpec::new(0.0, 1)).unwrap();
        assert_eq!(c.dataset, ds);
        assert!(c.outliers.is_empty());
        let c = corrupt_dataset(&ds, &CorruptionSpec::new(0.1, 1)).unwrap();
        assert_eq!(c.outliers.len(), 10);
        let changed: Vec<usize> =
            (0..100).filter(|&i| ds.features.row(i) != c.dataset.features.row(i) || ds.labels[i] != c.dataset.labels[i]).collect();
        assert_eq!(changed, c.outliers);
        assert_eq!(c.dataset, corrupt_dataset(&ds, &CorruptionSpec::new(0.1, 1)).unwrap().dataset);
        for &i in &c.outliers {
            let v = c.dataset.features.get(i, 2);
            assert!(v == 0.0 || v == 1.0 || v == 2.0);
        }
    }

    #[test]
    fn sphere_mechanism_stays_within_five_sigma() {
        let ds = mixed_dataset(2500);
        let spec = CorruptionSpec { rate: 0.4, seed: 9, mechanism: Mechanism::Sphere };
        let c = corrupt_dataset(&ds, &spec).unwrap();
        assert_eq!(c.outliers.len(), 1000);
        let stat = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt())
        };
        let cols = [stat(ds.features.col(0)), stat(ds.features.col(1)), stat(&ds.labels)];
        for &i in &c.outliers {
            let vals = [c.dataset.features.get(i, 0), c.dataset.features.get(i, 1), c.dataset.labels[i]];
            for (v, (m, s)) in vals.iter().zip(cols) {
                assert!((v - m).abs() <= 5.0 * s + 1e-12);
            }
        }
    }

    #[test]
    fn classification_labels_stay_in_domain() {
        let x = ColMatrix::from_col_major(40, 1, (0..40).map(|i| i as f64).collect()).unwrap();
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ds = Dataset::new(x, y, Task::Binary).unwrap();
        let c = corrupt_dataset(&ds, &CorruptionSpec::new(0.25, 3)).unwrap();
        assert_eq!(c.outliers.len(), 10);
        assert!(c.dataset.labels.iter().all(|&v| v == 1.0 || v == -1.0));
    }
}
