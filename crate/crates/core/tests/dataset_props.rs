use fem_surrogate_core::dataset::{scale_fit, split, DataScaler, DatasetError, Scaler};
use fem_surrogate_core::{FrequencyGrid, ResponseSample, ScaleScheme};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_samples(grid: &FrequencyGrid, width: usize) -> Vec<ResponseSample> {
    grid.values()
        .iter()
        .map(|&f| {
            ResponseSample::new(
                f,
                (1..=width).map(|k| 1e-4 * k as f64 / (1.0 + f)).collect(),
            )
        })
        .collect()
}

#[test]
fn default_grids_split_differently_per_seed() {
    for grid in [
        FrequencyGrid::uniform(0.1, 10.0, 200).unwrap(),
        FrequencyGrid::uniform(1.0, 200.0, 400).unwrap(),
    ] {
        let samples = grid_samples(&grid, 1);
        let a = split(&samples, 0.2, 1).unwrap();
        let b = split(&samples, 0.2, 2).unwrap();
        assert_ne!(a.test_indices, b.test_indices);
        assert_eq!(a.test.len(), (0.2 * grid.len() as f64).round() as usize);
    }
}

#[test]
fn scaler_depends_on_train_only() {
    let samples = grid_samples(&FrequencyGrid::uniform(1.0, 200.0, 400).unwrap(), 3);
    let parts = split(&samples, 0.2, 42).unwrap();
    for scheme in [ScaleScheme::LinearMinMax, ScaleScheme::log10_floored()] {
        let fitted = DataScaler::fit(&parts.train, scheme).unwrap();
        let mut poisoned = parts.clone();
        for s in &mut poisoned.test {
            s.freq_hz *= 10.0;
            for v in &mut s.outputs {
                *v *= 1e3;
            }
        }
        assert_eq!(DataScaler::fit(&poisoned.train, scheme).unwrap(), fitted);
        assert_ne!(DataScaler::fit(&samples, scheme).unwrap(), fitted);
    }
}

#[test]
fn log_round_trip_over_decades() {
    let values: Vec<f64> = (0..=50)
        .map(|k| 10f64.powf(-7.0 + 0.1 * k as f64))
        .collect();
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let s = Scaler::fit(&rows, ScaleScheme::Log10 { floor: None }).unwrap();
    for v in values {
        let back = s.invert(&s.apply(&[v]).unwrap()).unwrap()[0];
        assert!(((back - v) / v).abs() < 1e-12);
    }
}

#[test]
fn log_without_floor_rejects_zero() {
    let train = vec![
        ResponseSample::new(1.0, vec![0.0]),
        ResponseSample::new(2.0, vec![1.0]),
    ];
    assert!(matches!(
        scale_fit(&train, ScaleScheme::Log10 { floor: None }),
        Err(DatasetError::NonPositiveForLog { .. })
    ));
    assert!(scale_fit(&train, ScaleScheme::log10_floored()).is_ok());
}

fn samples_strategy() -> impl Strategy<Value = Vec<ResponseSample>> {
    (5usize..120, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| ResponseSample::new(i as f64 * 0.5, vec![rng.gen_range(1e-9..1.0)]))
            .collect()
    })
}

proptest! {
    #[test]
    fn split_partitions_the_input(samples in samples_strategy(), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let n = samples.len();
        let expected = (frac * n as f64).round() as usize;
        match split(&samples, frac, seed) {
            Ok(parts) => {
                prop_assert_eq!(parts.test.len(), expected);
                prop_assert_eq!(parts.train.len() + parts.test.len(), n);
                let mut all: Vec<f64> = parts.train.iter().chain(&parts.test).map(|s| s.freq_hz).collect();
                all.sort_by(f64::total_cmp);
                prop_assert_eq!(all, samples.iter().map(|s| s.freq_hz).collect::<Vec<_>>());
                prop_assert!(parts.train.iter().all(|s| !parts.test.contains(s)));
                prop_assert_eq!(split(&samples, frac, seed).unwrap(), parts);
            }
            Err(DatasetError::TooFewSamples { .. }) => prop_assert!(expected == 0 || expected == n),
            Err(e) => prop_assert!(false, "{e:?}"),
        }
    }

    #[test]
    fn scaling_round_trips(samples in samples_strategy(), log in any::<bool>()) {
        let scheme = if log { ScaleScheme::log10_floored() } else { ScaleScheme::LinearMinMax };
        let scaler = DataScaler::fit(&samples, scheme).unwrap();
        let back = scaler.invert(&scaler.apply(&samples).unwrap()).unwrap();
        for (a, b) in samples.iter().zip(&back) {
            prop_assert!((a.freq_hz - b.freq_hz).abs() <= 1e-12 * a.freq_hz.abs().max(1e-300) + 1e-15);
            for (x, y) in a.outputs.iter().zip(&b.outputs) {
                prop_assert!(((x - y) / x).abs() < 1e-12);
            }
        }
    }
}
