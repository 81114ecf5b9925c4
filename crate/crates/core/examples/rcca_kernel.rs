//! Ridge CCA on a wide matrix (p >> n) through the kernel trick, checked
//! against the covariance-space solution on a problem small enough for both.

use grcca::{center_columns, fit_direct, rcca_kernel_fit, DataMatrix, PenaltySpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random(n: usize, m: usize, prefix: &str, rng: &mut ChaCha8Rng) -> DataMatrix {
    let v = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng));
    center_columns(&DataMatrix::with_prefix(v, prefix).unwrap())
}

fn main() -> grcca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, p, q) = (30, 400, 4);
    let x = random(n, p, "x", &mut rng);
    let y = random(n, q, "y", &mut rng);
    let ky = PenaltySpec::Ridge { lambda: 0.0 };

    let kernel = rcca_kernel_fit(&x, &y, 1.0, &ky, 2)?;
    let direct = fit_direct(&x, &y, &PenaltySpec::Ridge { lambda: 1.0 }, &ky, 2)?;

    println!("route: {:?}", kernel.method());
    println!("largest square matrix formed: {}", kernel.peak_square_dim());
    for (a, b) in kernel.correlations().iter().zip(direct.correlations()) {
        println!("kernel {a:.12}  direct {b:.12}");
    }
    let diff = (kernel.alpha() - direct.alpha()).amax();
    println!("max |alpha_kernel - alpha_direct| = {diff:.2e}");

    // Wide enough that a p x p covariance would not fit comfortably.
    let wide = random(n, 20_000, "v", &mut rng);
    let fit = rcca_kernel_fit(&wide, &y, 10.0, &ky, 1)?;
    println!(
        "p = {}: correlation {:.4}, peak square dim {}",
        wide.ncols(),
        fit.correlations()[0],
        fit.peak_square_dim()
    );
    Ok(())
}
