//! Single-node particle filter training: a cloud of augmented-state samples
//! is proposed through each incoming sequence, reweighted by the label
//! likelihood, and systematically resampled.

use dlstm::data::synth_window_series;
use dlstm::filters::{ess, init_particles, pf_round};
use dlstm::lstm::PoolingMode;
use dlstm::rng::{substream, STREAM_INIT, STREAM_ROUND};
use dlstm::state_space::{NoiseSpec, StateSpace};

fn main() -> dlstm::Result<()> {
    let ss = StateSpace::new(2, 2, PoolingMode::Mean);
    let noise = NoiseSpec::isotropic(ss.dim(), 4e-4, 0.01)?;
    let data = synth_window_series(3, 1002, 0.9, -0.2, 0.01)?;

    let count = 80;
    let mut init_rng = substream(9, STREAM_INIT, 0, 0);
    let mut particles = init_particles(&ss, count, 0, 0.1, &mut init_rng);
    println!("{count} particles over a {}-dimensional state", ss.dim());

    let mut cumulative = 0.0;
    for (t, item) in data.items().iter().enumerate() {
        let mut rng = substream(9, STREAM_ROUND, 0, (t + 1) as u64);
        let round = pf_round(&mut particles, item, &ss, &noise, &mut rng)?;
        let err = (item.label - round.prediction).powi(2);
        cumulative += (err - cumulative) / (t + 1) as f64;
        if (t + 1) % 200 == 0 {
            println!(
                "t = {:4}: cumulative MSE = {cumulative:.6e}, post-resample ESS = {:.1}",
                t + 1,
                ess(&particles)
            );
        }
    }
    println!("\nfinal cumulative MSE: {cumulative:.6e}");
    Ok(())
}
