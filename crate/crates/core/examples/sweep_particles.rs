//! Accuracy/cost trade-off of the distributed particle filter: sweep the
//! particle count and the walk length, reporting final MSE and wall-clock
//! seconds per combination.

use dlstm::data::PartitionScheme;
use dlstm::harness::{sweep, Algorithm, DataSpec, ExperimentConfig, GraphSpec, SweepParam};
use dlstm::lstm::PoolingMode;

fn main() -> dlstm::Result<()> {
    let base = ExperimentConfig {
        algorithm: Algorithm::Dpf,
        n: 2,
        p: 2,
        pooling: PoolingMode::Mean,
        nodes: 4,
        graph: GraphSpec::Ring,
        particles: 80,
        steps: 3,
        q0: 1e-4,
        r: 0.01,
        mu: 0.1,
        seed: 2,
        rounds: 300,
        data: DataSpec::Window {
            len: 1500,
            a1: 0.9,
            a2: -0.2,
            noise_sd: 0.01,
            seed: None,
        },
        partition: PartitionScheme::RoundRobin,
        workers: 4,
    };

    println!("sweeping particles per node at s = {}:", base.steps);
    println!("{:>10} {:>18} {:>12}", "N(k)", "final network MSE", "seconds");
    for run in sweep(&base, SweepParam::Particles, &[25, 50, 100, 200, 400])? {
        let final_mse = run
            .log
            .network_cumulative_mse(run.log.final_round().unwrap())
            .unwrap();
        println!("{:>10} {final_mse:>18.6e} {:>12.3}", run.value, run.wall_seconds);
    }

    println!("\nsweeping walk steps at N(k) = {}:", base.particles);
    println!("{:>10} {:>18} {:>12}", "s", "final network MSE", "seconds");
    for run in sweep(&base, SweepParam::Steps, &[1, 2, 3, 5, 8])? {
        let final_mse = run
            .log
            .network_cumulative_mse(run.log.final_round().unwrap())
            .unwrap();
        println!("{:>10} {final_mse:>18.6e} {:>12.3}", run.value, run.wall_seconds);
    }
    Ok(())
}
