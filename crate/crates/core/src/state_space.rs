//! Nonlinear state-space embedding of the LSTM regressor.
//!
//! The hidden state is the augmented vector `a = [c; y; theta]`: the carried
//! cell memory, the carried pooled output, and the flat parameter vector.
//! Training then becomes state estimation: the transition map runs the cell
//! recursion over the incoming sequence (parameters held fixed), and the
//! measurement map is the linear readout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lstm::{run_sequence_from, theta_len, unpack, CellState, PoolingMode};

/// The augmented hidden state `[c; y; theta]`, stored flat so filters can
/// treat it as a single vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    data: DVector<f64>,
    n: usize,
}

impl AugmentedState {
    pub fn zeros(n: usize, p: usize) -> Self {
        AugmentedState {
            data: DVector::zeros(2 * n + theta_len(n, p)),
            n,
        }
    }

    pub fn from_parts(c: DVector<f64>, y: DVector<f64>, theta: DVector<f64>) -> Result<Self> {
        let n = c.len();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "augmented state pooled-output block",
                expected: n,
                got: y.len(),
            });
        }
        let mut data = DVector::zeros(2 * n + theta.len());
        data.rows_mut(0, n).copy_from(&c);
        data.rows_mut(n, n).copy_from(&y);
        data.rows_mut(2 * n, theta.len()).copy_from(&theta);
        Ok(AugmentedState { data, n })
    }

    pub fn from_vector(data: DVector<f64>, n: usize) -> Result<Self> {
        if data.len() < 2 * n {
            return Err(Error::DimensionMismatch {
                context: "augmented state vector",
                expected: 2 * n,
                got: data.len(),
            });
        }
        Ok(AugmentedState { data, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn theta_len(&self) -> usize {
        self.data.len() - 2 * self.n
    }

    pub fn c_bar(&self) -> DVector<f64> {
        self.data.rows(0, self.n).into_owned()
    }

    pub fn y_bar(&self) -> DVector<f64> {
        self.data.rows(self.n, self.n).into_owned()
    }

    pub fn theta(&self) -> DVector<f64> {
        self.data.rows(2 * self.n, self.theta_len()).into_owned()
    }

    /// The readout coefficients: the leading block of theta in the flat
    /// layout.
    pub fn readout(&self) -> DVector<f64> {
        self.data.rows(2 * self.n, self.n).into_owned()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn vector_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Process-noise covariance for the augmented state plus the scalar
/// measurement-noise variance.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    q: DMatrix<f64>,
    q_factor: DMatrix<f64>,
    r: f64,
}

impl NoiseSpec {
    /// Validates that `q` is symmetric positive semidefinite (by factoring
    /// it) and that `r` is a positive variance.
    pub fn new(q: DMatrix<f64>, r: f64) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch {
                context: "process-noise covariance",
                expected: q.nrows(),
                got: q.ncols(),
            });
        }
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NotPsd);
        }
        let q = (&q + q.transpose()) * 0.5;
        let q_factor = psd_cholesky(&q)?;
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonPositiveNoise(r));
        }
        Ok(NoiseSpec { q, q_factor, r })
    }

    /// `Q = q0 * I` with measurement variance `r`.
    pub fn isotropic(dim: usize, q0: f64, r: f64) -> Result<Self> {
        if q0 < 0.0 || !q0.is_finite() {
            return Err(Error::NotPsd);
        }
        NoiseSpec::new(DMatrix::identity(dim, dim) * q0, r)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Lower-triangular factor `L` with `L L^T = Q`.
    pub fn q_factor(&self) -> &DMatrix<f64> {
        &self.q_factor
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

/// Cholesky-style factorization that tolerates semidefinite input: zero
/// pivots are accepted when the remaining column is consistent with PSD.
fn psd_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let scale = a.diagonal().amax();
    let pivot_tol = scale * 1e-13;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -pivot_tol {
            return Err(Error::NotPsd);
        }
        if d <= pivot_tol {
            // Zero pivot: PSD requires the rest of this column to vanish.
            let thresh = (scale * pivot_tol).sqrt().max(1e-300) * 4.0 + 1e-300;
            for i in j + 1..n {
                let mut res = a[(i, j)];
                for k in 0..j {
                    res -= l[(i, k)] * l[(j, k)];
                }
                if res.abs() > thresh {
                    return Err(Error::NotPsd);
                }
            }
            continue;
        }
        let s = d.sqrt();
        l[(j, j)] = s;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / s;
        }
    }
    Ok(l)
}

/// Dimensions and pooling mode shared by all maps over the augmented state.
#[derive(Debug, Clone, Copy)]
pub struct StateSpace {
    n: usize,
    p: usize,
    pooling: PoolingMode,
}

impl StateSpace {
    pub fn new(n: usize, p: usize, pooling: PoolingMode) -> Self {
        StateSpace { n, p, pooling }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn pooling(&self) -> PoolingMode {
        self.pooling
    }

    pub fn theta_len(&self) -> usize {
        theta_len(self.n, self.p)
    }

    /// Length of the augmented state vector.
    pub fn dim(&self) -> usize {
        2 * self.n + self.theta_len()
    }

    pub fn zero_state(&self) -> AugmentedState {
        AugmentedState::zeros(self.n, self.p)
    }

    fn check_state(&self, a: &AugmentedState, context: &'static str) -> Result<()> {
        if a.len() != self.dim() || a.n() != self.n {
            return Err(Error::DimensionMismatch {
                context: "augmented state",
                expected: self.dim(),
                got: a.len(),
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite(context));
        }
        Ok(())
    }

    /// Noise-free transition: run the cell recursion over the columns of `x`
    /// starting from the carried `(c, y)` blocks. The new state carries the
    /// final unit memory, the pooled output, and the unchanged parameters.
    pub fn transition(&self, a: &AugmentedState, x: &DMatrix<f64>) -> Result<AugmentedState> {
        self.check_state(a, "transition input")?;
        let theta = a.theta();
        let params = unpack(&theta, self.n, self.p)?;
        let init = CellState {
            y: a.y_bar(),
            c: a.c_bar(),
        };
        let (pooled, last) = run_sequence_from(&params, x, self.pooling, &init)?;
        AugmentedState::from_parts(last.c, pooled, theta)
    }

    /// Noise-free measurement: readout coefficients (inside theta) applied
    /// to the pooled-output block.
    pub fn measurement(&self, a: &AugmentedState) -> Result<f64> {
        self.check_state(a, "measurement input")?;
        Ok(a.readout().dot(&a.y_bar()))
    }

    /// Gradient of the measurement with respect to the augmented state:
    /// the readout on the pooled-output block, the pooled output on the
    /// readout block, zero elsewhere.
    pub fn measurement_jacobian(&self, a: &AugmentedState) -> Result<DVector<f64>> {
        self.check_state(a, "measurement jacobian input")?;
        let n = self.n;
        let mut h = DVector::zeros(self.dim());
        h.rows_mut(n, n).copy_from(&a.readout());
        h.rows_mut(2 * n, n).copy_from(&a.y_bar());
        Ok(h)
    }

    /// Transition Jacobian with the default differencing step.
    pub fn transition_jacobian(&self, a: &AugmentedState, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.transition_jacobian_with_step(a, x, 1e-6)
    }

    /// Central finite differences over every coordinate for the carried
    /// `(c, y)` rows; the parameter rows are the exact `[0 0 I]` block of
    /// the static update. Step per coordinate: `h0 * max(1, |a_i|)`.
    pub fn transition_jacobian_with_step(
        &self,
        a: &AugmentedState,
        x: &DMatrix<f64>,
        h0: f64,
    ) -> Result<DMatrix<f64>> {
        self.check_state(a, "transition jacobian input")?;
        let dim = self.dim();
        let n = self.n;
        let mut f = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let h = h0 * a.vector()[i].abs().max(1.0);
            let mut plus = a.clone();
            plus.vector_mut()[i] += h;
            let mut minus = a.clone();
            minus.vector_mut()[i] -= h;
            let fp = self.transition(&plus, x)?;
            let fm = self.transition(&minus, x)?;
            let inv = 1.0 / (2.0 * h);
            for row in 0..2 * n {
                f[(row, i)] = (fp.vector()[row] - fm.vector()[row]) * inv;
            }
        }
        for i in 0..self.theta_len() {
            f[(2 * n + i, 2 * n + i)] = 1.0;
        }
        Ok(f)
    }
}
