use grcca::data::sample_covariance;
use grcca::sim::{generate, generate_replicate, run_experiment, ExperimentGrid, SimMethod, SimulationConfig};
use grcca::{center_columns, DataMatrix};
use nalgebra::DMatrix;

/// Covariance of `[Y | X]` implied by the generative model, written out
/// entry by entry.
fn implied_covariance(c: &SimulationConfig) -> DMatrix<f64> {
    let size = c.p / c.groups;
    let d = c.q + c.p;
    DMatrix::from_fn(d, d, |i, j| {
        let (yi, yj) = (i < c.q, j < c.q);
        match (yi, yj) {
            (true, true) => f64::from(i == j),
            (true, false) | (false, true) => c.sigma_xy * c.sigma_xy,
            (false, false) => {
                let (a, b) = (i - c.q, j - c.q);
                f64::from(a / size == b / size) + if a == b { c.sigma_x * c.sigma_x } else { 0.0 }
            }
        }
    })
}

#[test]
fn sample_moments_match_model() {
    let config = SimulationConfig {
        n: 100_000,
        p: 12,
        q: 3,
        groups: 4,
        sigma_x: 0.7,
        sigma_xy: 0.4,
        seed: 11,
        replicates: 1,
        n_test: None,
    };
    let (x, y) = generate(&config).unwrap();
    let joint = DMatrix::from_fn(config.n, config.q + config.p, |i, j| {
        if j < config.q {
            y.values()[(i, j)]
        } else {
            x.values()[(i, j - config.q)]
        }
    });
    let joint = center_columns(&DataMatrix::with_prefix(joint, "v").unwrap());
    let sample = sample_covariance(&joint, &joint).unwrap().into_matrix();
    let err = (sample - implied_covariance(&config)).amax();
    assert!(err < 0.02, "largest moment error {err}");
}

#[test]
fn replicates_regenerate_independently_and_test_size_follows_config() {
    let config = SimulationConfig {
        n_test: Some(25),
        ..SimulationConfig::default()
    };
    let ((xtr, ytr), (xte, yte)) = generate_replicate(&config, 17).unwrap();
    assert_eq!((xtr.nrows(), ytr.nrows()), (10, 10));
    assert_eq!((xte.nrows(), yte.nrows()), (25, 25));
    let again = generate_replicate(&config, 17).unwrap();
    assert_eq!(again.0 .0.values(), xtr.values());
    let other = generate_replicate(&config, 18).unwrap();
    assert_ne!(other.0 .0.values(), xtr.values());
}

#[test]
fn experiment_is_identical_across_thread_counts() {
    let config = SimulationConfig {
        replicates: 24,
        seed: 3,
        ..SimulationConfig::default()
    };
    let grid = ExperimentGrid {
        lambda1: vec![0.01, 1.0, 100.0],
        mu1: vec![0.1, 1.0],
        lambda2: 0.0,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&config, &SimMethod::ALL, &grid).unwrap())
    };
    let (one, four) = (run(1), run(4));
    let csv = |t: &grcca::sim::ExperimentTable| {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(csv(&one), csv(&four));
    assert!(one.rows.iter().all(|r| r.failure.is_none()));
}
