//! Tuning lambda1 and mu1 by 10-fold cross-validation, then estimating
//! out-of-sample performance with nested cross-validation.

use grcca::cv::{cross_validate, log10_grid, nested_cross_validate, Grid, MethodSpec};
use grcca::{load_csv, load_group_map};

fn main() -> grcca::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let x = load_csv(format!("{dir}/demo_x.csv"), true)?;
    let y = load_csv(format!("{dir}/demo_y.csv"), true)?;
    let groups = load_group_map(format!("{dir}/demo_groups.csv"), x.column_names())?;

    let rcca = MethodSpec::rcca();
    let grcca = MethodSpec::grcca(groups);
    let grid = Grid::new(log10_grid(-3, 5), log10_grid(-2, 2), vec![0.0], vec![])?;
    let ridge_grid = Grid::lambda1(log10_grid(-3, 5))?;

    let cv = cross_validate(&x, &y, &grcca, &grid, 10, 1, None)?;
    println!(
        "grcca best: lambda1 = {}, mu1 = {}, validation r = {:.3}",
        cv.best_point.lambda1, cv.best_point.mu1, cv.best_score
    );
    let cv = cross_validate(&x, &y, &rcca, &ridge_grid, 10, 1, None)?;
    println!("rcca best:  lambda1 = {}, validation r = {:.3}", cv.best_point.lambda1, cv.best_score);

    for (name, method, grid) in [("rcca", &rcca, &ridge_grid), ("grcca", &grcca, &grid)] {
        let ncv = nested_cross_validate(&x, &y, method, grid, 5, 5, 3, None)?;
        println!(
            "{name:<6} nested: inner {:.3} ± {:.3}, test {:.3} ± {:.3}",
            ncv.mean_inner, ncv.se_inner, ncv.mean_test, ncv.se_test
        );
    }
    Ok(())
}
