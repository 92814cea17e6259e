//! Particle filter over the augmented state with log-domain weights and
//! systematic resampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lstm::LabeledSequence;
use crate::state_space::{AugmentedState, NoiseSpec, StateSpace};

/// One weighted sample of the augmented state. `home` is the node the
/// particle currently resides at in the distributed setting.
#[derive(Debug, Clone)]
pub struct Particle {
    pub state: AugmentedState,
    pub logw: f64,
    pub home: usize,
}

/// Gaussian log-density of `x` under mean `mean` and variance `var`.
pub fn gaussian_loglik(x: f64, mean: f64, var: f64) -> f64 {
    let diff = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var)
}

/// Fresh particle set for one node: zero carried state, parameters drawn
/// i.i.d. uniform from (-bound, bound), uniform weights.
pub fn init_particles<R: Rng + ?Sized>(
    ss: &StateSpace,
    count: usize,
    home: usize,
    bound: f64,
    rng: &mut R,
) -> Vec<Particle> {
    let logw = -(count as f64).ln();
    (0..count)
        .map(|_| {
            let theta = DVector::from_fn(ss.theta_len(), |_, _| rng.gen_range(-bound..bound));
            let state = AugmentedState::from_parts(
                DVector::zeros(ss.n()),
                DVector::zeros(ss.n()),
                theta,
            )
            .expect("blocks agree by construction");
            Particle {
                state,
                logw,
                home,
            }
        })
        .collect()
}

fn sample_process_noise<R: Rng + ?Sized>(noise: &NoiseSpec, rng: &mut R) -> DVector<f64> {
    let dim = noise.dim();
    let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    noise.q_factor() * z
}

/// Advance every particle through the transition map and add process noise
/// drawn from the caller's stream. Weights are untouched: with the
/// transition prior as proposal, the proposal density cancels against the
/// prior in the weight recursion.
pub fn pf_propose<R: Rng + ?Sized>(
    particles: &mut [Particle],
    ss: &StateSpace,
    x: &DMatrix<f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<()> {
    for particle in particles.iter_mut() {
        let mut next = ss.transition(&particle.state, x)?;
        *next.vector_mut() += sample_process_noise(noise, rng);
        particle.state = next;
    }
    Ok(())
}

/// Rescale log-weights so the plain weights sum to one.
pub fn normalize_log_weights(particles: &mut [Particle]) -> Result<()> {
    if particles.is_empty() {
        return Err(Error::EmptyParticleSet);
    }
    let max = particles
        .iter()
        .map(|p| p.logw)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateLikelihood);
    }
    let sum: f64 = particles.iter().map(|p| (p.logw - max).exp()).sum();
    let log_total = max + sum.ln();
    for p in particles.iter_mut() {
        p.logw -= log_total;
    }
    Ok(())
}

/// Multiply each weight by the Gaussian likelihood of the label under the
/// particle's own prediction, then normalize.
pub fn pf_weight_update(particles: &mut [Particle], ss: &StateSpace, d: f64, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveNoise(r));
    }
    for p in particles.iter_mut() {
        let predicted = ss.measurement(&p.state)?;
        p.logw += gaussian_loglik(d, predicted, r);
    }
    normalize_log_weights(particles)
}

fn check_normalized(particles: &[Particle]) -> Result<()> {
    if particles.is_empty() {
        return Err(Error::EmptyParticleSet);
    }
    let sum: f64 = particles.iter().map(|p| p.logw.exp()).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::UnnormalizedWeights { sum });
    }
    Ok(())
}

/// Systematic resampling: one uniform offset, selection at the stratified
/// points `u + i/N` of the cumulative weights. Returns an equally weighted
/// set of the same size; homes are carried with the copies.
pub fn systematic_resample<R: Rng + ?Sized>(
    particles: &[Particle],
    rng: &mut R,
) -> Result<Vec<Particle>> {
    check_normalized(particles)?;
    let count = particles.len();
    let step = 1.0 / count as f64;
    let offset = rng.gen_range(0.0..step);
    let logw = -(count as f64).ln();

    let mut out = Vec::with_capacity(count);
    let mut idx = 0usize;
    let mut cumulative = particles[0].logw.exp();
    for k in 0..count {
        let target = offset + k as f64 * step;
        while cumulative < target && idx + 1 < count {
            idx += 1;
            cumulative += particles[idx].logw.exp();
        }
        let mut copy = particles[idx].clone();
        copy.logw = logw;
        out.push(copy);
    }
    Ok(out)
}

/// Weighted mean of the particle set.
pub fn pf_estimate(particles: &[Particle]) -> Result<AugmentedState> {
    check_normalized(particles)?;
    let mut acc = DVector::zeros(particles[0].state.len());
    for p in particles {
        acc += p.state.vector() * p.logw.exp();
    }
    AugmentedState::from_vector(acc, particles[0].state.n())
}

/// Effective sample size `1 / sum(w^2)` of a normalized set.
pub fn ess(particles: &[Particle]) -> f64 {
    let sum_sq: f64 = particles.iter().map(|p| p.logw.exp().powi(2)).sum();
    1.0 / sum_sq
}

/// Outcome of one full single-node round.
#[derive(Debug, Clone)]
pub struct PfRound {
    /// Mean one-step-ahead prediction of the label, taken over the proposed
    /// particles before the label is used.
    pub prediction: f64,
    /// Post-resampling state estimate.
    pub estimate: AugmentedState,
}

/// One online round at a single node: propose with the incoming sequence,
/// predict, weight against the label, resample, estimate.
pub fn pf_round<R: Rng + ?Sized>(
    particles: &mut Vec<Particle>,
    item: &LabeledSequence,
    ss: &StateSpace,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<PfRound> {
    if particles.is_empty() {
        return Err(Error::EmptyParticleSet);
    }
    pf_propose(particles, ss, &item.x, noise, rng)?;
    let mut prediction = 0.0;
    for p in particles.iter() {
        prediction += ss.measurement(&p.state)?;
    }
    prediction /= particles.len() as f64;
    pf_weight_update(particles, ss, item.label, noise.r())?;
    *particles = systematic_resample(particles, rng)?;
    let estimate = pf_estimate(particles)?;
    Ok(PfRound {
        prediction,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::PoolingMode;
    use crate::rng::{substream, STREAM_INIT, STREAM_ROUND};

    fn space() -> StateSpace {
        StateSpace::new(2, 2, PoolingMode::Mean)
    }

    fn uniform_set(ss: &StateSpace, count: usize, seed: u64) -> Vec<Particle> {
        let mut rng = substream(seed, STREAM_INIT, 0, 0);
        init_particles(ss, count, 0, 0.1, &mut rng)
    }

    fn set_weights(particles: &mut [Particle], weights: &[f64]) {
        for (p, &w) in particles.iter_mut().zip(weights) {
            p.logw = w.ln();
        }
    }

    #[test]
    fn propose_without_noise_is_the_transition() {
        let ss = space();
        let noise = NoiseSpec::isotropic(ss.dim(), 0.0, 0.01).unwrap();
        let mut particles = uniform_set(&ss, 8, 3);
        let expected: Vec<_> = particles
            .iter()
            .map(|p| {
                ss.transition(&p.state, &DMatrix::from_column_slice(2, 1, &[0.3, -0.7]))
                    .unwrap()
            })
            .collect();
        let x = DMatrix::from_column_slice(2, 1, &[0.3, -0.7]);
        let mut rng = substream(4, STREAM_ROUND, 0, 0);
        pf_propose(&mut particles, &ss, &x, &noise, &mut rng).unwrap();
        for (p, e) in particles.iter().zip(&expected) {
            assert_eq!(p.state.vector(), e.vector());
        }
    }

    #[test]
    fn process_noise_moments_match_q() {
        // Non-diagonal PSD covariance in three dimensions.
        let l = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.2, 0.4, 0.0, -0.1, 0.3, 0.6]);
        let q = &l * l.transpose();
        let noise = NoiseSpec::new(q.clone(), 1.0).unwrap();
        let draws = 100_000usize;
        let mut rng = substream(99, STREAM_ROUND, 1, 1);

        let mut mean = DVector::zeros(3);
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            let g = sample_process_noise(&noise, &mut rng);
            mean += &g;
            samples.push(g);
        }
        mean /= draws as f64;
        for i in 0..3 {
            let sd = q[(i, i)].sqrt();
            let bound = 3.0 * sd / (draws as f64).sqrt();
            assert!(
                mean[i].abs() < bound,
                "coordinate {i} mean {} exceeds {bound}",
                mean[i]
            );
        }

        let mut cov = DMatrix::zeros(3, 3);
        for g in &samples {
            let centered = g - &mean;
            cov += &centered * centered.transpose();
        }
        cov /= (draws - 1) as f64;
        let rel = (&cov - &q).norm() / q.norm();
        assert!(rel < 0.05, "covariance relative error {rel}");
    }

    #[test]
    fn identical_particles_get_uniform_weights() {
        let ss = space();
        let mut particles = uniform_set(&ss, 5, 7);
        let template = particles[0].state.clone();
        for p in particles.iter_mut() {
            p.state = template.clone();
            p.logw = -(5.0f64).ln();
        }
        pf_weight_update(&mut particles, &ss, 0.4, 0.01).unwrap();
        for p in &particles {
            assert!((p.logw.exp() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_ratio_matches_gaussian_density_ratio() {
        let ss = space();
        // Two particles whose predictions are 0 and 1: with d = 0 and r = 1
        // the weight ratio is exp(1/2).
        let mut particles = uniform_set(&ss, 2, 11);
        for (i, p) in particles.iter_mut().enumerate() {
            let v = p.state.vector_mut();
            v.fill(0.0);
            v[ss.n()] = 1.0; // y_1 = 1
            v[2 * ss.n()] = i as f64; // readout_1: prediction 0 or 1
            p.logw = -(2.0f64).ln();
        }
        pf_weight_update(&mut particles, &ss, 0.0, 1.0).unwrap();
        let ratio = particles[0].logw.exp() / particles[1].logw.exp();
        assert!((ratio - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_after_updates() {
        let ss = space();
        let noise = NoiseSpec::isotropic(ss.dim(), 4e-4, 0.01).unwrap();
        let mut particles = uniform_set(&ss, 32, 13);
        let mut rng = substream(14, STREAM_ROUND, 0, 0);
        for t in 0..10 {
            let x = DMatrix::from_fn(2, 1, |_, _| rng.gen_range(-1.0..1.0));
            pf_propose(&mut particles, &ss, &x, &noise, &mut rng).unwrap();
            pf_weight_update(&mut particles, &ss, rng.gen_range(-0.5..0.5), noise.r()).unwrap();
            let sum: f64 = particles.iter().map(|p| p.logw.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "round {t}: sum {sum}");
            assert!(particles.iter().all(|p| p.logw.is_finite()));
        }
    }

    #[test]
    fn degenerate_likelihood_is_an_error() {
        let ss = space();
        let mut particles = uniform_set(&ss, 4, 17);
        // Absurd label: the squared residual overflows and every log-weight
        // hits negative infinity.
        let result = pf_weight_update(&mut particles, &ss, 1e200, 1e-6);
        assert!(matches!(result, Err(Error::DegenerateLikelihood)));
    }

    #[test]
    fn resample_degenerate_weight_takes_all_copies() {
        let ss = space();
        let mut particles = uniform_set(&ss, 6, 19);
        let mut weights = vec![0.0; 6];
        weights[2] = 1.0;
        set_weights(&mut particles, &weights);
        // log(0) = -inf is fine here; normalize is not called on this path.
        let marker = particles[2].state.vector()[0];
        let mut rng = substream(20, STREAM_ROUND, 0, 0);
        let resampled = systematic_resample(&particles, &mut rng).unwrap();
        assert_eq!(resampled.len(), 6);
        for p in &resampled {
            assert_eq!(p.state.vector()[0], marker);
            assert!((p.logw.exp() - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_uniform_weights_selects_each_exactly_once() {
        let ss = space();
        let mut particles = uniform_set(&ss, 8, 23);
        set_weights(&mut particles, &[0.125; 8]);
        let mut rng = substream(24, STREAM_ROUND, 0, 0);
        let resampled = systematic_resample(&particles, &mut rng).unwrap();
        let mut originals: Vec<f64> = particles.iter().map(|p| p.state.vector()[10]).collect();
        let mut copies: Vec<f64> = resampled.iter().map(|p| p.state.vector()[10]).collect();
        originals.sort_by(f64::total_cmp);
        copies.sort_by(f64::total_cmp);
        assert_eq!(originals, copies);
    }

    #[test]
    fn resample_rejects_unnormalized_weights() {
        let ss = space();
        let mut particles = uniform_set(&ss, 4, 29);
        set_weights(&mut particles, &[0.5, 0.5, 0.5, 0.5]);
        let mut rng = substream(30, STREAM_ROUND, 0, 0);
        assert!(matches!(
            systematic_resample(&particles, &mut rng),
            Err(Error::UnnormalizedWeights { .. })
        ));
    }

    #[test]
    fn resample_copy_counts_match_expected_frequencies() {
        let ss = space();
        for weights in [[0.5, 0.3, 0.2], [0.97, 0.02, 0.01]] {
            let mut particles = uniform_set(&ss, 3, 31);
            for (i, p) in particles.iter_mut().enumerate() {
                p.state.vector_mut()[0] = i as f64; // identify copies
            }
            set_weights(&mut particles, &weights);
            let trials = 10_000usize;
            let mut counts = [0usize; 3];
            let mut sq = [0.0f64; 3];
            let mut rng = substream(32, STREAM_ROUND, 0, 0);
            for _ in 0..trials {
                let resampled = systematic_resample(&particles, &mut rng).unwrap();
                let mut c = [0usize; 3];
                for p in &resampled {
                    c[p.state.vector()[0] as usize] += 1;
                }
                for i in 0..3 {
                    counts[i] += c[i];
                    sq[i] += (c[i] * c[i]) as f64;
                }
            }
            for i in 0..3 {
                let mean = counts[i] as f64 / trials as f64;
                let expected = 3.0 * weights[i];
                let var = sq[i] / trials as f64 - mean * mean;
                let se = (var / trials as f64).sqrt().max(1e-12);
                assert!(
                    (mean - expected).abs() <= 3.0 * se + 1e-9,
                    "weight {} mean {mean} expected {expected} se {se}",
                    weights[i]
                );
            }
        }
    }

    #[test]
    fn resample_preserves_weighted_mean_in_expectation() {
        let ss = space();
        let mut particles = uniform_set(&ss, 12, 37);
        let raw: Vec<f64> = (0..12).map(|i| 1.0 + (i as f64 % 5.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        set_weights(&mut particles, &weights);
        let target = pf_estimate(&particles).unwrap();

        let mut rng = substream(38, STREAM_ROUND, 0, 0);
        let trials = 2_000usize;
        let mut acc = DVector::zeros(ss.dim());
        for _ in 0..trials {
            let resampled = systematic_resample(&particles, &mut rng).unwrap();
            acc += pf_estimate(&resampled).unwrap().into_vector();
        }
        acc /= trials as f64;
        let rel = (acc - target.vector()).norm() / target.vector().norm();
        assert!(rel < 0.05, "relative drift {rel}");
    }

    #[test]
    fn estimate_of_identical_particles_is_that_state() {
        let ss = space();
        let mut particles = uniform_set(&ss, 4, 41);
        let template = particles[0].state.clone();
        for p in particles.iter_mut() {
            p.state = template.clone();
            p.logw = -(4.0f64).ln();
        }
        let est = pf_estimate(&particles).unwrap();
        assert!((est.vector() - template.vector()).amax() < 1e-12);
    }

    #[test]
    fn estimate_midpoint_and_brute_force_oracle() {
        let ss = space();
        let mut particles = uniform_set(&ss, 2, 43);
        particles[0].state.vector_mut().fill(0.0);
        particles[1].state.vector_mut().fill(2.0);
        set_weights(&mut particles, &[0.5, 0.5]);
        let est = pf_estimate(&particles).unwrap();
        assert!((est.vector() - DVector::from_element(ss.dim(), 1.0)).amax() < 1e-15);

        // Brute-force oracle with reversed summation order.
        let mut particles = uniform_set(&ss, 17, 47);
        let raw: Vec<f64> = (1..=17).map(|i| i as f64).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        set_weights(&mut particles, &weights);
        let est = pf_estimate(&particles).unwrap();
        for coord in 0..ss.dim() {
            let mut acc = 0.0;
            for p in particles.iter().rev() {
                acc += p.logw.exp() * p.state.vector()[coord];
            }
            assert!((est.vector()[coord] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_after_resample_is_the_plain_mean() {
        let ss = space();
        let mut particles = uniform_set(&ss, 9, 53);
        let raw: Vec<f64> = (0..9).map(|i| (i + 1) as f64).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        set_weights(&mut particles, &weights);
        let mut rng = substream(54, STREAM_ROUND, 0, 0);
        let resampled = systematic_resample(&particles, &mut rng).unwrap();
        let est = pf_estimate(&resampled).unwrap();
        let mut mean = DVector::zeros(ss.dim());
        for p in &resampled {
            mean += p.state.vector();
        }
        mean /= resampled.len() as f64;
        assert!((est.vector() - mean).amax() < 1e-12);
    }

    #[test]
    fn ess_cases() {
        let ss = space();
        let mut particles = uniform_set(&ss, 4, 59);
        set_weights(&mut particles, &[0.25; 4]);
        assert!((ess(&particles) - 4.0).abs() < 1e-12);

        let mut particles = uniform_set(&ss, 3, 60);
        set_weights(&mut particles, &[1.0, 0.0, 0.0]);
        assert!((ess(&particles) - 1.0).abs() < 1e-9);

        let mut particles = uniform_set(&ss, 3, 61);
        set_weights(&mut particles, &[0.5, 0.25, 0.25]);
        assert!((ess(&particles) - 1.0 / 0.375).abs() < 1e-12);
    }

    #[test]
    fn empty_set_is_an_error() {
        let mut empty: Vec<Particle> = Vec::new();
        assert!(matches!(
            normalize_log_weights(&mut empty),
            Err(Error::EmptyParticleSet)
        ));
        assert!(matches!(pf_estimate(&empty), Err(Error::EmptyParticleSet)));
    }
}
