//! Distributed EKF on a four-node ring: every node absorbs its neighbors'
//! labels, combines neighborhood posteriors with Metropolis weights, and
//! runs its own time update.

use dlstm::data::{partition, synth_window_series, PartitionScheme};
use dlstm::distributed::dekf_round;
use dlstm::filters::EkfState;
use dlstm::graph::{metropolis_weights, Graph};
use dlstm::lstm::{pack, LstmParams, PoolingMode};
use dlstm::rng::{substream, STREAM_INIT};
use dlstm::state_space::{AugmentedState, NoiseSpec, StateSpace};
use nalgebra::DVector;

fn main() -> dlstm::Result<()> {
    let g = Graph::ring(4)?;
    let weights = metropolis_weights(&g);
    println!("ring of {} nodes, {} edges", g.node_count(), g.edge_count());
    println!("metropolis combination weights:");
    for k in 0..4 {
        let row: Vec<String> = (0..4).map(|l| format!("{:.3}", weights.get(k, l))).collect();
        println!("  node {k}: [{}]", row.join(", "));
    }

    let ss = StateSpace::new(2, 2, PoolingMode::Mean);
    let noise = NoiseSpec::isotropic(ss.dim(), 4e-4, 0.01)?;
    let data = synth_window_series(3, 2002, 0.9, -0.2, 0.01)?;
    let streams = partition(&data, 4, PartitionScheme::RoundRobin)?;

    let mut states: Vec<EkfState> = (0..4)
        .map(|node| {
            let mut rng = substream(13, STREAM_INIT, node as u64, 0);
            let theta = pack(&LstmParams::random_uniform(2, 2, 0.1, &mut rng));
            let a = AugmentedState::from_parts(DVector::zeros(2), DVector::zeros(2), theta)
                .expect("consistent blocks");
            EkfState::isotropic(a, 4e-4)
        })
        .collect();

    let rounds = streams.min_len();
    let mut cumulative = vec![0.0f64; 4];
    for t in 0..rounds {
        let items: Vec<_> = (0..4).map(|node| streams.stream(node)[t].clone()).collect();
        for (node, state) in states.iter().enumerate() {
            let predicted = ss.measurement(&state.a)?;
            let err = (items[node].label - predicted).powi(2);
            cumulative[node] += (err - cumulative[node]) / (t + 1) as f64;
        }
        states = dekf_round(&states, &items, &g, &weights, &ss, &noise)?;
        if (t + 1) % 100 == 0 {
            let network = cumulative.iter().sum::<f64>() / 4.0;
            println!("t = {:3}: network cumulative MSE = {network:.6e}", t + 1);
        }
    }

    println!("\nper-node final cumulative MSE:");
    for (node, mse) in cumulative.iter().enumerate() {
        println!("  node {node}: {mse:.6e}");
    }
    Ok(())
}
