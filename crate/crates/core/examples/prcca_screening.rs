//! Partial ridge CCA: features with a large one-sample effect size are
//! left unpenalized, everything else is shrunk.

use grcca::data::select_by_effect_size;
use grcca::{center_columns, cohens_d, fit_cca, load_csv, FitOptions, PenaltySpec};

fn main() -> grcca::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let x = load_csv(format!("{dir}/demo_x.csv"), true)?;
    let y = load_csv(format!("{dir}/demo_y.csv"), true)?;

    // Effect sizes use the raw, uncentered data.
    let d = cohens_d(&x);
    let keep = select_by_effect_size(&d, 0.5);
    println!("unpenalized features (d > 0.5):");
    for &i in &keep {
        println!("  {:<8} d = {:.3}", x.column_names()[i], d[i]);
    }

    let (xc, yc) = (center_columns(&x), center_columns(&y));
    let ky = PenaltySpec::Ridge { lambda: 0.0 };
    for lambda in [0.1, 1.0, 10.0, 100.0] {
        let kx = PenaltySpec::partial_from_unpenalized(lambda, &keep, x.ncols());
        let fit = fit_cca(&xc, &yc, &kx, &ky, FitOptions::default())?;
        let alpha = fit.alpha().column(0);
        let free: f64 = keep.iter().map(|&i| alpha[i].abs()).sum::<f64>() / keep.len() as f64;
        let rest: f64 = (0..x.ncols())
            .filter(|i| !keep.contains(i))
            .map(|i| alpha[i].abs())
            .sum::<f64>()
            / (x.ncols() - keep.len()) as f64;
        println!(
            "lambda1 = {lambda:>5}: rho = {:.4}  mean |alpha| unpenalized {free:.4}, penalized {rest:.4}",
            fit.correlations()[0]
        );
    }
    Ok(())
}
