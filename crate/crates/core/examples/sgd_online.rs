//! Online gradient baseline: one node learns an autoregressive series by
//! descending the exact squared-error gradient after each prediction.

use dlstm::data::synth_window_series;
use dlstm::lstm::{LstmParams, PoolingMode};
use dlstm::rng::{substream, STREAM_INIT};
use dlstm::sgd::{sgd_step, SgdState};

fn main() -> dlstm::Result<()> {
    let data = synth_window_series(3, 1002, 0.9, -0.2, 0.01)?;
    println!("series items: {}", data.len());

    let mut rng = substream(5, STREAM_INIT, 0, 0);
    let params = LstmParams::random_uniform(2, 2, 0.1, &mut rng);
    let mut state = SgdState::new(params, 0.1)?;

    let mut cumulative = 0.0;
    for (t, item) in data.items().iter().enumerate() {
        let predicted = sgd_step(&mut state, &item.x, item.label, PoolingMode::Mean)?;
        let err = (item.label - predicted).powi(2);
        cumulative += (err - cumulative) / (t + 1) as f64;
        if (t + 1) % 200 == 0 {
            println!("t = {:4}: cumulative MSE = {cumulative:.6e}", t + 1);
        }
    }
    println!("\nfinal cumulative MSE: {cumulative:.6e}");
    Ok(())
}
