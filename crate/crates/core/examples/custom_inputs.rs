//! Training from user-supplied files: a JSONL dataset and a graph
//! description with an explicit walk matrix. Both files are written to a
//! temp directory first so the example is self-contained.

use std::fs;

use dlstm::data::{save_jsonl, synth_varlen, PartitionScheme};
use dlstm::harness::{emit_csv, run_experiment, Algorithm, DataSpec, ExperimentConfig, GraphSpec};
use dlstm::lstm::{LstmParams, PoolingMode};
use dlstm::rng::{substream, STREAM_INIT};

fn main() -> dlstm::Result<()> {
    let dir = std::env::temp_dir().join("dlstm_custom_inputs");
    fs::create_dir_all(&dir)?;

    // A teacher-generated variable-length dataset, persisted as JSONL:
    // {"seq": [[f64, ...] x m], "label": f64} per line.
    let mut teacher_rng = substream(31, STREAM_INIT, 0, 0);
    let teacher = LstmParams::random_uniform(2, 2, 0.5, &mut teacher_rng);
    let dataset = synth_varlen(8, 900, 2, 4, &teacher, 0.1)?;
    let data_path = dir.join("sentences.jsonl");
    save_jsonl(&dataset, &data_path)?;
    println!("wrote {} items to {}", dataset.len(), data_path.display());

    // Three nodes on a line, with a lazier-than-default walk matrix
    // (self-loops keep particles in place half the time).
    let graph_path = dir.join("line3.graph");
    fs::write(
        &graph_path,
        "# line 0-1-2 with an explicit walk matrix\n\
         3\n\
         1\n\
         0 2\n\
         1\n\
         0.5 0.5 0.0\n\
         0.25 0.5 0.25\n\
         0.0 0.5 0.5\n",
    )?;
    println!("wrote graph to {}", graph_path.display());

    let cfg = ExperimentConfig {
        algorithm: Algorithm::Dpf,
        n: 2,
        p: 2,
        pooling: PoolingMode::Mean,
        nodes: 3,
        graph: GraphSpec::File(graph_path),
        particles: 60,
        steps: 4,
        q0: 6.25e-4,
        r: 0.01,
        mu: 0.1,
        seed: 4,
        rounds: 300,
        data: DataSpec::File(data_path),
        partition: PartitionScheme::RoundRobin,
        workers: 2,
    };
    let log = run_experiment(&cfg)?;
    let final_mse = log.network_cumulative_mse(log.final_round().unwrap()).unwrap();
    println!("\nfinal network cumulative MSE over the line: {final_mse:.6e}");

    let csv_path = dir.join("metrics.csv");
    emit_csv(&log, &csv_path)?;
    println!("metrics written to {}", csv_path.display());
    Ok(())
}
