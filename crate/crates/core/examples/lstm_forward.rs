//! The LSTM regressor by hand: one cell step, a full sequence with each
//! pooling mode, the linear readout, and the flat parameter layout.

use dlstm::lstm::{
    lstm_cell_step, pack, predict, run_sequence, theta_len, unpack, CellState, LstmParams,
    PoolingMode,
};
use dlstm::rng::{substream, STREAM_INIT};
use nalgebra::{DMatrix, DVector};

fn main() -> dlstm::Result<()> {
    let (n, p) = (3, 2);
    let mut rng = substream(1, STREAM_INIT, 0, 0);
    let params = LstmParams::random_uniform(n, p, 0.4, &mut rng);

    println!("hidden width n = {n}, input width p = {p}");
    println!("flat parameter count: {}", theta_len(n, p));

    // One cell step from the zero state.
    let x = DVector::from_vec(vec![0.8, -0.3]);
    let step = lstm_cell_step(&params, &x, &CellState::zeros(n))?;
    println!("\nsingle step on column {:?}:", x.as_slice());
    println!("  y = {:?}", step.y.as_slice());
    println!("  c = {:?}", step.c.as_slice());

    // A four-column sequence under each pooling mode.
    let seq = DMatrix::from_fn(p, 4, |r, c| ((r + 2 * c) as f64 * 0.37).sin() * 0.9);
    println!("\nfour-column sequence, pooled outputs:");
    for mode in [PoolingMode::Mean, PoolingMode::Max, PoolingMode::Last] {
        let (pooled, _) = run_sequence(&params, &seq, mode)?;
        let estimate = predict(&params.readout, &pooled)?;
        println!("  {mode:<5} pooled = {:>24?}  readout = {estimate:+.6}", pooled.as_slice());
    }

    // The flat layout round-trips exactly.
    let flat = pack(&params);
    let back = unpack(&flat, n, p)?;
    assert_eq!(back, params);
    println!("\npack -> unpack round trip: exact ({} coefficients)", flat.len());
    Ok(())
}
