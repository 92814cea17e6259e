//! Online training of LSTM regressors over a network of communicating
//! nodes.
//!
//! Each node receives a stream of variable-length labeled sequences and
//! fits the shared LSTM regression parameters online. Training is state
//! estimation: the cell memory, pooled output and flat parameter vector
//! form one augmented state, estimated per node by gradient descent, an
//! extended Kalman filter, or a particle filter — either in isolation or
//! cooperating over the graph (DEKF with Metropolis combination, or the
//! Markov-chain distributed particle filter whose particles random-walk
//! the network).
//!
//! The `examples/` directory has one runnable program per capability; the
//! `dlstm` binary drives full experiments from a config file.
//!
//! ```
//! use dlstm::harness::{run_experiment, Algorithm, DataSpec, ExperimentConfig, GraphSpec};
//! use dlstm::data::PartitionScheme;
//! use dlstm::lstm::PoolingMode;
//!
//! let cfg = ExperimentConfig {
//!     algorithm: Algorithm::Dpf,
//!     n: 2,
//!     p: 2,
//!     pooling: PoolingMode::Mean,
//!     nodes: 4,
//!     graph: GraphSpec::Ring,
//!     particles: 40,
//!     steps: 3,
//!     q0: 4e-4,
//!     r: 0.01,
//!     mu: 0.1,
//!     seed: 7,
//!     rounds: 20,
//!     data: DataSpec::Window { len: 200, a1: 0.9, a2: -0.2, noise_sd: 0.01, seed: None },
//!     partition: PartitionScheme::RoundRobin,
//!     workers: 1,
//! };
//! let log = run_experiment(&cfg).unwrap();
//! assert_eq!(log.rows().len(), 20 * 4);
//! ```

pub mod data;
pub mod distributed;
pub mod error;
pub mod filters;
pub mod graph;
pub mod harness;
pub mod lstm;
pub mod rng;
pub mod sgd;
pub mod state_space;

pub use error::{Error, Result};
