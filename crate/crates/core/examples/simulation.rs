//! Train/test comparison of RCCA, PRCCA and GRCCA on group-structured
//! synthetic data.
//!
//! cargo run --release --example simulation -- [replicates] [sigma_xy]

use grcca::sim::{run_experiment, ExperimentGrid, SimMethod, SimulationConfig};

fn main() -> grcca::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map_or(200, |a| a.parse().expect("replicates"));
    let sigma_xy = args.next().map_or(0.5, |a| a.parse().expect("sigma_xy"));
    let config = SimulationConfig {
        sigma_xy,
        replicates,
        seed: 2024,
        ..SimulationConfig::default()
    };
    let table = run_experiment(&config, &SimMethod::ALL, &ExperimentGrid::default())?;

    println!("{:<10} {:>9} {:>7} {:>10} {:>10}", "method", "lambda1", "mu1", "train", "test");
    for method in SimMethod::ALL {
        let mu = (method == SimMethod::Grcca).then_some(1.0);
        if let Some(best) = table.best_point(method, mu) {
            println!(
                "{:<10} {:>9.0e} {:>7} {:>10.3} {:>6.3}±{:.3}",
                method.name(),
                best.lambda1,
                best.mu1,
                best.mean_train,
                best.mean_test,
                best.se_test
            );
        }
    }

    let test = table.compare_best((SimMethod::Grcca, Some(1.0)), (SimMethod::Rcca, None))?;
    println!(
        "\ngrcca(mu1=1) - rcca at best lambda1: {:+.4} (t = {:.2}, p = {:.2e}, {} pairs)",
        test.mean_difference, test.t_statistic, test.p_value, test.pairs
    );
    Ok(())
}
