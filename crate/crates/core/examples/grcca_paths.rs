//! Group-regularized CCA coefficient paths. Large lambda1 pulls every
//! coefficient to its group mean; large mu1 pulls the group means to zero.

use grcca::reduce::write_path_csv;
use grcca::{
    center_columns, coefficient_path, load_csv, load_group_map, FitOptions, PathAxis,
    PenaltyFamily, PenaltySpec,
};

fn main() -> grcca::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let x = center_columns(&load_csv(format!("{dir}/demo_x.csv"), true)?);
    let y = center_columns(&load_csv(format!("{dir}/demo_y.csv"), true)?);
    let groups = load_group_map(format!("{dir}/demo_groups.csv"), x.column_names())?;
    let family = PenaltyFamily::Group {
        groups: groups.clone(),
    };
    let ky = PenaltySpec::Ridge { lambda: 0.0 };
    let grid: Vec<f64> = (-2..=6).map(|e| 10f64.powi(e)).collect();

    let path = coefficient_path(&x, &y, &family, &ky, PathAxis::Lambda, &grid, 1.0, FitOptions::default())?;
    println!("{:>9}  {:>10}  {:>10}", "lambda1", "within sd", "rho");
    for point in &path {
        let Ok(fit) = &point.fit else { continue };
        let alpha: Vec<f64> = fit.alpha().column(0).iter().copied().collect();
        let means = groups.group_means(&alpha);
        let within = (alpha
            .iter()
            .enumerate()
            .map(|(i, a)| (a - means[groups.group_of(i)]).powi(2))
            .sum::<f64>()
            / alpha.len() as f64)
            .sqrt();
        println!("{:>9.0e}  {within:>10.2e}  {:>10.4}", point.lambda, fit.correlations()[0]);
    }

    let path = coefficient_path(&x, &y, &family, &ky, PathAxis::Mu, &grid, 10.0, FitOptions::default())?;
    println!("\n{:>9}  group means", "mu1");
    for point in &path {
        let Ok(fit) = &point.fit else { continue };
        let alpha: Vec<f64> = fit.alpha().column(0).iter().copied().collect();
        let means: Vec<String> = groups.group_means(&alpha).iter().map(|m| format!("{m:+.3}")).collect();
        println!("{:>9.0e}  {}", point.mu, means.join(" "));
    }

    write_path_csv(&path, Some(&groups), std::io::sink())?;
    Ok(())
}
