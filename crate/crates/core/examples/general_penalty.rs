//! CCA with an arbitrary positive semi-definite penalty: here a graph
//! Laplacian that rewards smooth coefficients along a chain of features.

use grcca::{center_columns, fit_direct, general_fit, DataMatrix, PenaltySpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn main() -> grcca::Result<()> {
    let (n, p, q) = (25, 60, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let signal: Vec<f64> = (0..n).map(|_| noise(&mut rng)).collect();
    // Features load smoothly on a shared signal.
    let x = DMatrix::from_fn(n, p, |i, j| {
        let w = (std::f64::consts::PI * j as f64 / p as f64).sin();
        w * signal[i] + noise(&mut rng)
    });
    let y = DMatrix::from_fn(n, q, |i, _| signal[i] + noise(&mut rng));
    let x = center_columns(&DataMatrix::with_prefix(x, "x")?);
    let y = center_columns(&DataMatrix::with_prefix(y, "y")?);

    // Chain Laplacian plus a small ridge.
    let mut k = DMatrix::<f64>::identity(p, p) * 0.01;
    for j in 0..p - 1 {
        k[(j, j)] += 1.0;
        k[(j + 1, j + 1)] += 1.0;
        k[(j, j + 1)] -= 1.0;
        k[(j + 1, j)] -= 1.0;
    }
    let ky = PenaltySpec::Ridge { lambda: 0.0 };
    let fit = general_fit(&x, &y, &(k.clone() * 5.0), &ky, 1)?;
    let direct = fit_direct(&x, &y, &PenaltySpec::General { matrix: k * 5.0 }, &ky, 1)?;
    println!("route: {:?}", fit.method());
    println!("rho = {:.10} (direct {:.10})", fit.correlations()[0], direct.correlations()[0]);

    let alpha = fit.alpha().column(0);
    let roughness: f64 = (0..p - 1).map(|j| (alpha[j + 1] - alpha[j]).powi(2)).sum();
    println!("sum of squared neighbour differences: {roughness:.3e}");
    for j in (0..p).step_by(6) {
        println!("  alpha[{j:>2}] = {:+.4}", alpha[j]);
    }
    Ok(())
}
