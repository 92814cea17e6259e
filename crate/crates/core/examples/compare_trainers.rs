//! All five trainers on the same synthetic series and network, with the
//! convergence summary: final network MSE and the round at which the
//! cumulative error first comes within 10% of its final value.

use dlstm::data::PartitionScheme;
use dlstm::harness::{run_experiment, Algorithm, DataSpec, ExperimentConfig, GraphSpec, MetricsLog};
use dlstm::lstm::PoolingMode;

fn rounds_to_settle(log: &MetricsLog) -> Option<usize> {
    let last = log.final_round()?;
    let final_mse = log.network_cumulative_mse(last)?;
    (1..=last).find(|&t| log.network_cumulative_mse(t).is_some_and(|m| m <= 1.1 * final_mse))
}

fn main() -> dlstm::Result<()> {
    let base = ExperimentConfig {
        algorithm: Algorithm::Sgd,
        n: 2,
        p: 2,
        pooling: PoolingMode::Mean,
        nodes: 4,
        graph: GraphSpec::Ring,
        particles: 80,
        steps: 3,
        q0: 4e-4,
        r: 0.01,
        mu: 0.1,
        seed: 1,
        rounds: 500,
        data: DataSpec::Window {
            len: 2002,
            a1: 0.9,
            a2: -0.2,
            noise_sd: 0.01,
            seed: None,
        },
        partition: PartitionScheme::RoundRobin,
        workers: 4,
    };

    println!(
        "{} rounds x {} nodes on an order-two autoregressive series\n",
        base.rounds, base.nodes
    );
    println!("{:<6} {:>18} {:>22}", "algo", "final network MSE", "rounds to within 10%");
    for algorithm in [
        Algorithm::Sgd,
        Algorithm::Ekf,
        Algorithm::Pf,
        Algorithm::Dekf,
        Algorithm::Dpf,
    ] {
        let mut cfg = base.clone();
        cfg.algorithm = algorithm;
        let log = run_experiment(&cfg)?;
        let last = log.final_round().unwrap();
        let final_mse = log.network_cumulative_mse(last).unwrap();
        let settle = rounds_to_settle(&log)
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into());
        println!("{algorithm:<6} {final_mse:>18.6e} {settle:>22}");
    }
    Ok(())
}
