//! Distributed trainers over the node graph: the diffusion-style DEKF round
//! with Metropolis combination, and the Markov-chain distributed particle
//! filter in which particles random-walk the graph and absorb each visited
//! node's likelihood with a degree-scaled exponent.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{
    ekf_time_update, gaussian_loglik, normalize_log_weights, pf_estimate, pf_propose, pf_round,
    scalar_measurement_update, systematic_resample, EkfState, Particle,
};
use crate::graph::{CombinationWeights, Graph};
use crate::lstm::LabeledSequence;
use crate::state_space::{AugmentedState, NoiseSpec, StateSpace};

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// One synchronized DEKF round.
///
/// Incoming states are each node's current prediction. Every node first
/// absorbs the labels of its whole neighborhood through repeated
/// scalar-innovation updates (innovations measured against the node's own
/// predicted readout), the intermediate states are then convexly combined
/// with the Metropolis weights, and finally each node runs its time update
/// on its own incoming sequence, linearized at the combined posterior.
pub fn dekf_round(
    states: &[EkfState],
    observations: &[LabeledSequence],
    g: &Graph,
    weights: &CombinationWeights,
    ss: &StateSpace,
    noise: &NoiseSpec,
) -> Result<Vec<EkfState>> {
    let k = g.node_count();
    if states.len() != k || observations.len() != k {
        return Err(Error::DimensionMismatch {
            context: "dekf round inputs",
            expected: k,
            got: states.len().min(observations.len()),
        });
    }

    let mut jacobians = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(k);
    for state in states {
        jacobians.push(ss.measurement_jacobian(&state.a)?);
        predictions.push(ss.measurement(&state.a)?);
    }

    // Local neighborhood updates, independent per node.
    let locals: Vec<Result<(DVector<f64>, nalgebra::DMatrix<f64>)>> = (0..k)
        .into_par_iter()
        .map(|node| {
            let mut phi = states[node].a.vector().clone();
            let mut cov = states[node].sigma.clone();
            for &l in g.neighbors(node) {
                scalar_measurement_update(
                    &mut phi,
                    &mut cov,
                    &jacobians[l],
                    predictions[node],
                    observations[l].label,
                    noise.r(),
                )
                .map_err(|e| match e {
                    Error::InnovationVariance { value } => Error::DekfInnovationVariance {
                        node,
                        neighbor: l,
                        value,
                    },
                    other => other,
                })?;
            }
            Ok((phi, cov))
        })
        .collect();
    let locals = first_error(locals)?;

    // Metropolis combination of the neighborhood posteriors; covariances
    // stay local.
    let dim = ss.dim();
    let combined: Vec<DVector<f64>> = (0..k)
        .map(|node| {
            let mut acc = DVector::zeros(dim);
            for &l in g.neighbors(node) {
                acc += &locals[l].0 * weights.get(node, l);
            }
            acc
        })
        .collect();

    let updated: Vec<Result<EkfState>> = combined
        .into_par_iter()
        .zip(locals.into_par_iter())
        .enumerate()
        .map(|(node, (a, (_, cov)))| {
            let posterior = EkfState {
                a: AugmentedState::from_vector(a, ss.n())?,
                sigma: cov,
            };
            ekf_time_update(&posterior, ss, &observations[node].x, noise)
                .map_err(|e| e.at_round(0, node))
        })
        .collect();
    first_error(updated)
}

/// Per-particle visit counts over one `s`-step walk.
#[derive(Debug, Clone)]
pub struct VisitRecord {
    counts: Vec<Vec<u32>>,
}

impl VisitRecord {
    pub fn new(particles: usize, nodes: usize) -> Self {
        VisitRecord {
            counts: vec![vec![0; nodes]; particles],
        }
    }

    fn record(&mut self, particle: usize, node: usize) {
        self.counts[particle][node] += 1;
    }

    /// Visits of `particle` to `node`.
    pub fn visits(&self, particle: usize, node: usize) -> u32 {
        self.counts[particle][node]
    }

    /// Total steps recorded for `particle`.
    pub fn steps(&self, particle: usize) -> u32 {
        self.counts[particle].iter().sum()
    }

    pub fn particle_count(&self) -> usize {
        self.counts.len()
    }
}

/// Move every particle one step of the random walk and record the visit at
/// its new home.
pub fn move_particles<R: Rng + ?Sized>(
    g: &Graph,
    particles: &mut [Particle],
    visits: &mut VisitRecord,
    rng: &mut R,
) {
    let walk = g.walk();
    let k = g.node_count();
    for (idx, particle) in particles.iter_mut().enumerate() {
        let u: f64 = rng.gen();
        let row = particle.home;
        let mut acc = 0.0;
        let mut next = row;
        for col in 0..k {
            let w = walk[(row, col)];
            if w <= 0.0 {
                continue;
            }
            acc += w;
            next = col;
            if u < acc {
                break;
            }
        }
        particle.home = next;
        visits.record(idx, next);
    }
}

/// Likelihood exponent a particle applies at each visit to `node` during an
/// `s`-step walk: `2 |E| / (s * deg(node))`. Under the walk's stationary
/// occupancy `deg / 2|E|` the expected total exponent per node is one, which
/// is what makes the walk-accumulated weight consistent with the single-node
/// weight recursion.
pub fn mcdpf_exponent(g: &Graph, node: usize, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::Config("markov step count must be at least 1".into()));
    }
    let degree = g.degree(node);
    if degree == 0 {
        return Err(Error::IsolatedNode(node));
    }
    Ok(2.0 * g.edge_count() as f64 / (s as f64 * degree as f64))
}

/// Output of one MCDPF round. Per-node predictions and estimates are
/// individual results: a node drained of particles yields an error for that
/// round while the rest of the network proceeds.
#[derive(Debug)]
pub struct McdpfRound {
    pub nodes: Vec<Vec<Particle>>,
    pub predictions: Vec<Result<f64>>,
    pub estimates: Vec<Result<AugmentedState>>,
    pub visits: Option<VisitRecord>,
}

/// One synchronized MCDPF round.
///
/// Each node proposes its resident particles through its own sequence, all
/// weights reset, and the whole population then walks the graph for `s`
/// steps, multiplying in the local likelihood (raised to the degree-scaled
/// exponent) at every visit. Wherever particles land, they are resampled
/// back to an equally weighted resident set and the node reads off its
/// estimate.
///
/// A single-node graph degenerates to the plain particle-filter round: no
/// walk and a unit exponent.
pub fn mcdpf_round<R: Rng + Send>(
    node_sets: Vec<Vec<Particle>>,
    observations: &[LabeledSequence],
    g: &Graph,
    s: usize,
    ss: &StateSpace,
    noise: &NoiseSpec,
    node_rngs: &mut [R],
    walk_rng: &mut R,
) -> Result<McdpfRound> {
    let k = g.node_count();
    if node_sets.len() != k || observations.len() != k || node_rngs.len() != k {
        return Err(Error::DimensionMismatch {
            context: "mcdpf round inputs",
            expected: k,
            got: node_sets.len().min(observations.len()).min(node_rngs.len()),
        });
    }

    if k == 1 {
        let mut set = node_sets.into_iter().next().unwrap();
        if set.is_empty() {
            return Ok(McdpfRound {
                nodes: vec![set],
                predictions: vec![Err(Error::EmptyNode(0))],
                estimates: vec![Err(Error::EmptyNode(0))],
                visits: None,
            });
        }
        let round = pf_round(&mut set, &observations[0], ss, noise, &mut node_rngs[0])?;
        return Ok(McdpfRound {
            nodes: vec![set],
            predictions: vec![Ok(round.prediction)],
            estimates: vec![Ok(round.estimate)],
            visits: None,
        });
    }

    let exponents = (0..k)
        .map(|j| mcdpf_exponent(g, j, s))
        .collect::<Result<Vec<f64>>>()?;

    // Propose at the home node and cache each particle's readout prediction;
    // states do not change during the walk, so the cache stays valid.
    struct Proposed {
        set: Vec<Particle>,
        forecasts: Vec<f64>,
        prediction: Result<f64>,
    }
    let proposed: Vec<Result<Proposed>> = node_sets
        .into_par_iter()
        .zip(node_rngs.par_iter_mut())
        .enumerate()
        .map(|(node, (mut set, rng))| {
            if set.is_empty() {
                return Ok(Proposed {
                    set,
                    forecasts: Vec::new(),
                    prediction: Err(Error::EmptyNode(node)),
                });
            }
            pf_propose(&mut set, ss, &observations[node].x, noise, rng)?;
            let mut forecasts = Vec::with_capacity(set.len());
            for p in &set {
                forecasts.push(ss.measurement(&p.state)?);
            }
            let mean = forecasts.iter().sum::<f64>() / forecasts.len() as f64;
            Ok(Proposed {
                set,
                forecasts,
                prediction: Ok(mean),
            })
        })
        .collect();
    let proposed = first_error(proposed)?;

    let mut predictions = Vec::with_capacity(k);
    let mut population: Vec<Particle> = Vec::new();
    let mut forecasts: Vec<f64> = Vec::new();
    for node in proposed {
        predictions.push(node.prediction);
        for (mut p, f) in node.set.into_iter().zip(node.forecasts) {
            p.logw = 0.0;
            population.push(p);
            forecasts.push(f);
        }
    }
    let total = population.len();

    let mut visits = VisitRecord::new(total, k);
    for _ in 0..s {
        move_particles(g, &mut population, &mut visits, walk_rng);
        for (particle, &forecast) in population.iter_mut().zip(&forecasts) {
            let here = particle.home;
            particle.logw +=
                exponents[here] * gaussian_loglik(observations[here].label, forecast, noise.r());
        }
    }

    // Regroup by final home; migration only relabels particles, so the
    // population size is conserved here.
    let mut grouped: Vec<Vec<Particle>> = (0..k).map(|_| Vec::new()).collect();
    for p in population {
        grouped[p.home].push(p);
    }
    debug_assert_eq!(grouped.iter().map(Vec::len).sum::<usize>(), total);

    let finalized: Vec<(Vec<Particle>, Result<AugmentedState>)> = grouped
        .into_par_iter()
        .zip(node_rngs.par_iter_mut())
        .enumerate()
        .map(|(node, (mut set, rng))| {
            if set.is_empty() {
                return (set, Err(Error::EmptyNode(node)));
            }
            let estimate = (|| {
                normalize_log_weights(&mut set)?;
                set = systematic_resample(&set, rng)?;
                pf_estimate(&set)
            })();
            (set, estimate)
        })
        .collect();

    let mut nodes = Vec::with_capacity(k);
    let mut estimates = Vec::with_capacity(k);
    for (set, estimate) in finalized {
        nodes.push(set);
        estimates.push(estimate);
    }

    Ok(McdpfRound {
        nodes,
        predictions,
        estimates,
        visits: Some(visits),
    })
}
