//! Markov-chain distributed particle filter on the four-node ring.
//!
//! Per round, every node proposes its resident particles through its own
//! sequence, then the whole population random-walks the ring for `s` steps,
//! multiplying in each visited node's label likelihood raised to
//! `2|E| / (s * deg)`. Estimates are read wherever particles land.

use dlstm::data::{partition, synth_window_series, PartitionScheme};
use dlstm::distributed::{mcdpf_exponent, mcdpf_round};
use dlstm::filters::init_particles;
use dlstm::graph::Graph;
use dlstm::lstm::PoolingMode;
use dlstm::rng::{substream, STREAM_INIT, STREAM_ROUND, STREAM_WALK};
use dlstm::state_space::{NoiseSpec, StateSpace};
use rand_chacha::ChaCha12Rng;

fn main() -> dlstm::Result<()> {
    let g = Graph::ring(4)?;
    let s = 3usize;
    println!("ring of 4, walk matrix rows: 1/2 to each true neighbor");
    for node in 0..4 {
        println!(
            "  node {node}: degree {}, per-visit exponent {:.4}",
            g.degree(node),
            mcdpf_exponent(&g, node, s)?
        );
    }

    let ss = StateSpace::new(2, 2, PoolingMode::Mean);
    let noise = NoiseSpec::isotropic(ss.dim(), 4e-4, 0.01)?;
    let data = synth_window_series(3, 2002, 0.9, -0.2, 0.01)?;
    let streams = partition(&data, 4, PartitionScheme::RoundRobin)?;

    let per_node = 80usize;
    let seed = 21u64;
    let mut sets: Vec<_> = (0..4)
        .map(|node| {
            let mut rng = substream(seed, STREAM_INIT, node as u64, 0);
            init_particles(&ss, per_node, node, 0.1, &mut rng)
        })
        .collect();

    let rounds = streams.min_len();
    let mut cumulative = vec![0.0f64; 4];
    for t in 1..=rounds {
        let items: Vec<_> = (0..4).map(|node| streams.stream(node)[t - 1].clone()).collect();
        let mut rngs: Vec<ChaCha12Rng> = (0..4)
            .map(|node| substream(seed, STREAM_ROUND, node as u64, t as u64))
            .collect();
        let mut walk_rng = substream(seed, STREAM_WALK, 0, t as u64);
        let out = mcdpf_round(
            std::mem::take(&mut sets),
            &items,
            &g,
            s,
            &ss,
            &noise,
            &mut rngs,
            &mut walk_rng,
        )?;
        sets = out.nodes;
        for node in 0..4 {
            let predicted = *out.predictions[node].as_ref().expect("ring keeps nodes populated");
            let err = (items[node].label - predicted).powi(2);
            cumulative[node] += (err - cumulative[node]) / t as f64;
        }
        if t % 100 == 0 {
            let network = cumulative.iter().sum::<f64>() / 4.0;
            let counts: Vec<usize> = sets.iter().map(Vec::len).collect();
            println!("t = {t:3}: network cumulative MSE = {network:.6e}, residents = {counts:?}");
        }
    }

    println!("\nper-node final cumulative MSE:");
    for (node, mse) in cumulative.iter().enumerate() {
        println!("  node {node}: {mse:.6e}");
    }
    Ok(())
}
