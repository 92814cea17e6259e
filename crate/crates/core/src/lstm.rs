//! LSTM forward computation over one variable-length sequence: gated cell
//! recursion, output pooling, linear readout, and the flat parameter layout
//! shared by every trainer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Flat parameter count for hidden width `n` and input width `p`:
/// four gates of `n x p` input weights, `n x n` recurrent weights and `n`
/// biases, plus the `n` readout coefficients.
pub fn theta_len(n: usize, p: usize) -> usize {
    4 * n * (n + p) + 5 * n
}

/// Output pooling applied to the per-column LSTM outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    /// Componentwise mean over all columns.
    Mean,
    /// Componentwise maximum over all columns.
    Max,
    /// Output of the final column.
    Last,
}

impl std::str::FromStr for PoolingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolingMode::Mean),
            "max" => Ok(PoolingMode::Max),
            "last" => Ok(PoolingMode::Last),
            other => Err(Error::Config(format!("unknown pooling mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolingMode::Mean => "mean",
            PoolingMode::Max => "max",
            PoolingMode::Last => "last",
        })
    }
}

/// All trainable coefficients of one LSTM regressor.
///
/// Input weights are `n x p`, recurrent weights `n x n`, biases length `n`,
/// and `readout` holds the regression coefficients applied to the pooled
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    n: usize,
    p: usize,
    pub readout: DVector<f64>,
    pub w_z: DMatrix<f64>,
    pub r_z: DMatrix<f64>,
    pub b_z: DVector<f64>,
    pub w_i: DMatrix<f64>,
    pub r_i: DMatrix<f64>,
    pub b_i: DVector<f64>,
    pub w_f: DMatrix<f64>,
    pub r_f: DMatrix<f64>,
    pub b_f: DVector<f64>,
    pub w_o: DMatrix<f64>,
    pub r_o: DMatrix<f64>,
    pub b_o: DVector<f64>,
}

impl LstmParams {
    pub fn zeros(n: usize, p: usize) -> Self {
        LstmParams {
            n,
            p,
            readout: DVector::zeros(n),
            w_z: DMatrix::zeros(n, p),
            r_z: DMatrix::zeros(n, n),
            b_z: DVector::zeros(n),
            w_i: DMatrix::zeros(n, p),
            r_i: DMatrix::zeros(n, n),
            b_i: DVector::zeros(n),
            w_f: DMatrix::zeros(n, p),
            r_f: DMatrix::zeros(n, n),
            b_f: DVector::zeros(n),
            w_o: DMatrix::zeros(n, p),
            r_o: DMatrix::zeros(n, n),
            b_o: DVector::zeros(n),
        }
    }

    /// Every coefficient drawn i.i.d. from U(-bound, bound), in flat-layout
    /// order so the draw sequence is reproducible.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, p: usize, bound: f64, rng: &mut R) -> Self {
        let flat = DVector::from_fn(theta_len(n, p), |_, _| rng.gen_range(-bound..bound));
        unpack(&flat, n, p).expect("freshly drawn vector has the right length")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn theta_len(&self) -> usize {
        theta_len(self.n, self.p)
    }
}

/// Hidden state of the cell recursion: unit output `y` and unit memory `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub y: DVector<f64>,
    pub c: DVector<f64>,
}

impl CellState {
    pub fn zeros(n: usize) -> Self {
        CellState {
            y: DVector::zeros(n),
            c: DVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.y.iter().all(|v| v.is_finite()) && self.c.iter().all(|v| v.is_finite())
    }
}

/// One labeled input: a `p x m` matrix whose columns are the sequence
/// elements, plus a scalar label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub x: DMatrix<f64>,
    pub label: f64,
}

impl LabeledSequence {
    pub fn new(x: DMatrix<f64>, label: f64) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::EmptySequence);
        }
        if !label.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labeled sequence"));
        }
        Ok(LabeledSequence { x, label })
    }

    /// Columns-of-vectors constructor used by the dataset loaders.
    pub fn from_columns(columns: &[Vec<f64>], label: f64) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptySequence);
        }
        let p = columns[0].len();
        if columns.iter().any(|c| c.len() != p) {
            return Err(Error::DimensionMismatch {
                context: "sequence columns",
                expected: p,
                got: columns.iter().map(Vec::len).find(|&l| l != p).unwrap_or(p),
            });
        }
        let x = DMatrix::from_fn(p, columns.len(), |r, c| columns[c][r]);
        LabeledSequence::new(x, label)
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

/// Logistic sigmoid, branched so large |x| cannot overflow `exp`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gate(w: &DMatrix<f64>, x: &DVector<f64>, r: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut pre = w * x;
    pre += r * y;
    pre += b;
    pre
}

/// Advance the cell by one column: input/forget/output gating around the
/// tanh-squashed candidate, then the gated memory readout.
pub fn lstm_cell_step(params: &LstmParams, x: &DVector<f64>, prev: &CellState) -> Result<CellState> {
    let n = params.n;
    if x.len() != params.p {
        return Err(Error::DimensionMismatch {
            context: "lstm input column",
            expected: params.p,
            got: x.len(),
        });
    }
    if prev.y.len() != n || prev.c.len() != n {
        return Err(Error::DimensionMismatch {
            context: "lstm cell state",
            expected: n,
            got: prev.y.len().max(prev.c.len()),
        });
    }
    if !prev.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm cell step input"));
    }

    let i = gate(&params.w_i, x, &params.r_i, &prev.y, &params.b_i).map(sigmoid);
    let f = gate(&params.w_f, x, &params.r_f, &prev.y, &params.b_f).map(sigmoid);
    let z = gate(&params.w_z, x, &params.r_z, &prev.y, &params.b_z).map(f64::tanh);
    let o = gate(&params.w_o, x, &params.r_o, &prev.y, &params.b_o).map(sigmoid);

    let c = i.component_mul(&z) + f.component_mul(&prev.c);
    let y = o.component_mul(&c.map(f64::tanh));
    Ok(CellState { y, c })
}

pub(crate) fn pool_outputs(mode: PoolingMode, outputs: &[DVector<f64>]) -> DVector<f64> {
    debug_assert!(!outputs.is_empty());
    match mode {
        PoolingMode::Mean => {
            let mut acc = outputs[0].clone();
            for y in &outputs[1..] {
                acc += y;
            }
            acc / outputs.len() as f64
        }
        PoolingMode::Max => {
            let mut acc = outputs[0].clone();
            for y in &outputs[1..] {
                acc.zip_apply(y, |a, b| {
                    if b > *a {
                        *a = b;
                    }
                });
            }
            acc
        }
        PoolingMode::Last => outputs[outputs.len() - 1].clone(),
    }
}

/// Run the cell over every column of `x` starting from `init`, returning the
/// pooled output and the final cell state.
pub fn run_sequence_from(
    params: &LstmParams,
    x: &DMatrix<f64>,
    mode: PoolingMode,
    init: &CellState,
) -> Result<(DVector<f64>, CellState)> {
    if x.ncols() == 0 {
        return Err(Error::EmptySequence);
    }
    if x.nrows() != params.p {
        return Err(Error::DimensionMismatch {
            context: "sequence feature dimension",
            expected: params.p,
            got: x.nrows(),
        });
    }
    let mut state = init.clone();
    let mut outputs = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        state = lstm_cell_step(params, &col.into_owned(), &state)?;
        outputs.push(state.y.clone());
    }
    Ok((pool_outputs(mode, &outputs), state))
}

/// `run_sequence_from` with the conventional all-zeros initial state.
pub fn run_sequence(
    params: &LstmParams,
    x: &DMatrix<f64>,
    mode: PoolingMode,
) -> Result<(DVector<f64>, CellState)> {
    run_sequence_from(params, x, mode, &CellState::zeros(params.n))
}

/// Linear readout of the pooled output.
pub fn predict(readout: &DVector<f64>, pooled: &DVector<f64>) -> Result<f64> {
    if readout.len() != pooled.len() {
        return Err(Error::DimensionMismatch {
            context: "readout",
            expected: readout.len(),
            got: pooled.len(),
        });
    }
    Ok(readout.dot(pooled))
}

/// Serialize to the flat layout: readout first, then `W, R, b` for the z, i,
/// f, o gates in that order, matrices column-major. Every trainer, Jacobian
/// and test indexes parameters through this layout.
pub fn pack(params: &LstmParams) -> DVector<f64> {
    let mut flat = Vec::with_capacity(params.theta_len());
    flat.extend_from_slice(params.readout.as_slice());
    for (w, r, b) in [
        (&params.w_z, &params.r_z, &params.b_z),
        (&params.w_i, &params.r_i, &params.b_i),
        (&params.w_f, &params.r_f, &params.b_f),
        (&params.w_o, &params.r_o, &params.b_o),
    ] {
        flat.extend_from_slice(w.as_slice());
        flat.extend_from_slice(r.as_slice());
        flat.extend_from_slice(b.as_slice());
    }
    DVector::from_vec(flat)
}

/// Inverse of [`pack`] for the given dimensions.
pub fn unpack(theta: &DVector<f64>, n: usize, p: usize) -> Result<LstmParams> {
    let expected = theta_len(n, p);
    if theta.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "flat parameter vector",
            expected,
            got: theta.len(),
        });
    }
    let data = theta.as_slice();
    let mut at = 0usize;
    let mut take = |count: usize| {
        let slice = &data[at..at + count];
        at += count;
        slice.to_vec()
    };

    let readout = DVector::from_vec(take(n));
    let mut gates = Vec::with_capacity(4);
    for _ in 0..4 {
        let w = DMatrix::from_vec(n, p, take(n * p));
        let r = DMatrix::from_vec(n, n, take(n * n));
        let b = DVector::from_vec(take(n));
        gates.push((w, r, b));
    }
    let (w_o, r_o, b_o) = gates.pop().unwrap();
    let (w_f, r_f, b_f) = gates.pop().unwrap();
    let (w_i, r_i, b_i) = gates.pop().unwrap();
    let (w_z, r_z, b_z) = gates.pop().unwrap();

    Ok(LstmParams {
        n,
        p,
        readout,
        w_z,
        r_z,
        b_z,
        w_i,
        r_i,
        b_i,
        w_f,
        r_f,
        b_f,
        w_o,
        r_o,
        b_o,
    })
}
