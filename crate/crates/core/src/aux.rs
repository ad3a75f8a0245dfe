//! Unscented auxiliary-particle CPHD (U-ACPHD) and PHD (U-APHD) filters.
//!
//! Each step samples `(measurement, parent)` auxiliary pairs from proposals
//! built with unscented-transform potentials, draws detected children from
//! the UT posterior of the chosen parent, draws undetected children from the
//! extended transition, and weights both sets by importance sampling. The
//! birth process is the source point `S`, always the last parent.

use log::{debug, warn};
use nalgebra::{Matrix5, Vector5};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cphd::{
    predict_cardinality, update_cardinality, upsilon_set, CardinalityDist, ClutterCardinality, UpsilonInputs,
    UpsilonSet, DEFAULT_N_MAX,
};
use crate::error::{Error, Result};
use crate::models::{wrap_angle, Measurement, Models, SensorModel, TargetState};
use crate::smc::{effective_clutter_density, StepOutput, TrackingFilter};
use crate::unscented::{
    predicted_potential, ut_time_update, AugmentedParticle, ParticleKind, UtGain, UtParams, UtPrediction,
    DEFAULT_SIGMA_B,
};

/// Proposal densities below this zero the tuple's weight.
pub const PROPOSAL_DENSITY_FLOOR: f64 = 1e-300;

/// Diagonal loading applied to covariances that fail a Cholesky factorization.
pub const COV_REGULARIZATION: f64 = 1e-9;

/// Potentials are skipped for measurements this many noise standard
/// deviations outside the spread of a parent's measurement sigma points.
const POTENTIAL_GATE_SIGMAS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticleOrigin {
    Detected { meas: usize },
    Undetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxParticle {
    pub state: TargetState,
    pub weight: f64,
    pub cov: Matrix5<f64>,
    pub origin: ParticleOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxFilterState {
    pub particles: Vec<AuxParticle>,
    /// `None` for the PHD variant.
    pub card: Option<CardinalityDist>,
    /// Number of detected tuples whose parent was the source point in the
    /// most recent step.
    pub birth_pick_count: usize,
}

impl AuxFilterState {
    /// No targets; the cardinality is a point mass at zero when tracked.
    pub fn birth_only(with_cardinality: bool, n_max: usize) -> Self {
        Self {
            particles: Vec::new(),
            card: with_cardinality.then(|| CardinalityDist::delta(0, n_max)),
            birth_pick_count: 0,
        }
    }

    pub fn expected_count(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalKind {
    /// UT potentials for `(p, parent)` and the UT posterior for the child.
    Unscented,
    /// Uniform `p`, parent proportional to prior weight, child from the
    /// extended transition.
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionEval {
    /// `N(child; x_pred, P_pred)` from the parent's UT time update.
    Marginal,
    /// Gaussian of the least-squares noise coordinates of the step.
    Projected,
}

/// How the predicted potential of the birth source is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourcePotential {
    /// Weighted likelihoods at the predicted sigma states, as for particles.
    SigmaPoints,
    /// `p_D N(z; y_pred, P_yy)` from the same unscented prediction. The
    /// sigma-point sum cannot resolve a birth spread much wider than the
    /// measurement noise.
    Innovation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxConfig {
    pub n_detected: usize,
    pub n_undetected: usize,
    pub ut: UtParams,
    pub sigma_b: f64,
    pub threshold: f64,
    pub n_max: usize,
    pub proposal: ProposalKind,
    pub transition_eval: TransitionEval,
    pub source_potential: SourcePotential,
}

impl Default for AuxConfig {
    fn default() -> Self {
        Self {
            n_detected: 2500,
            n_undetected: 500,
            ut: UtParams::default(),
            sigma_b: DEFAULT_SIGMA_B,
            threshold: 0.5,
            n_max: DEFAULT_N_MAX,
            proposal: ProposalKind::Unscented,
            transition_eval: TransitionEval::Marginal,
            source_potential: SourcePotential::Innovation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recursion {
    Cphd,
    Phd,
}

/// Gaussian with a cached Cholesky factor.
#[derive(Debug, Clone)]
struct Gaussian5 {
    mean: Vector5<f64>,
    chol: Matrix5<f64>,
    ln_norm: f64,
}

impl Gaussian5 {
    fn new(mean: Vector5<f64>, cov: &Matrix5<f64>) -> Result<Self> {
        let sym = (cov + cov.transpose()) * 0.5;
        let mut load = 0.0;
        for _ in 0..12 {
            if let Some(c) = (sym + Matrix5::identity() * load).cholesky() {
                let l = c.l();
                let ln_det: f64 = l.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                return Ok(Self {
                    mean,
                    chol: l,
                    ln_norm: -2.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * ln_det,
                });
            }
            load = if load == 0.0 { COV_REGULARIZATION } else { load * 10.0 };
        }
        Err(Error::InvalidParameter("covariance cannot be regularized".into()))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector5<f64> {
        let n = Vector5::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        self.mean + self.chol * n
    }

    fn ln_pdf(&self, x: &Vector5<f64>) -> f64 {
        let u = self
            .chol
            .solve_lower_triangular(&(x - self.mean))
            .expect("cholesky factor is nonsingular");
        self.ln_norm - 0.5 * u.norm_squared()
    }
}

/// The previous particles plus the source point, with their UT predictions.
#[derive(Debug, Clone)]
pub struct ParentSet {
    pub states: Vec<TargetState>,
    /// Extended prior intensity `D^a`: particle weights, then `b[1]`.
    pub prior: Vec<f64>,
    /// Extended survival `p_S^a`: `p_S` for particles, 1 for the source.
    pub survival: Vec<f64>,
    pub preds: Vec<UtPrediction>,
    pub source_potential: SourcePotential,
}

impl ParentSet {
    pub fn predict(particles: &[AuxParticle], models: &Models, config: &AuxConfig) -> Result<Self> {
        let mut preds: Vec<UtPrediction> = particles
            .par_iter()
            .map(|p| {
                let aug = AugmentedParticle::persistent(&p.state, &p.cov, &models.motion, &models.sensor);
                ut_time_update(&aug, &config.ut, &models.motion)
            })
            .collect::<Result<_>>()?;
        let source = AugmentedParticle::birth(&models.birth, config.sigma_b, &models.sensor);
        preds.push(ut_time_update(&source, &config.ut, &models.motion)?);

        let mut states: Vec<TargetState> = particles.iter().map(|p| p.state).collect();
        states.push(*models.birth.mean());
        let mut prior: Vec<f64> = particles.iter().map(|p| p.weight).collect();
        prior.push(models.birth.mass());
        let mut survival = vec![models.motion.p_s; particles.len()];
        survival.push(1.0);
        Ok(Self {
            states,
            prior,
            survival,
            preds,
            source_potential: config.source_potential,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn source_index(&self) -> usize {
        self.states.len() - 1
    }

    /// `sum_i p_S^a(x_i) D^a(x_i)`, the predicted target count.
    pub fn predicted_mass(&self) -> f64 {
        self.prior.iter().zip(&self.survival).map(|(w, s)| w * s).sum()
    }
}

/// Predicted potentials: `detected[i][p]` for parent `i` and measurement `p`,
/// and the missed-detection potential `undetected[i]`.
#[derive(Debug, Clone)]
pub struct Potentials {
    pub detected: Vec<Vec<f64>>,
    pub undetected: Vec<f64>,
}

fn potential_row(pred: &UtPrediction, z: &[Measurement], models: &Models) -> Vec<f64> {
    let sensor = &models.sensor;
    let center = &pred.sigma_meas_clean[0];
    let (mut dr, mut dt) = (0.0f64, 0.0f64);
    for m in &pred.sigma_meas_clean {
        dr = dr.max((m.r - center.r).abs());
        dt = dt.max(wrap_angle(m.theta - center.theta).abs());
    }
    let r_gate = dr + POTENTIAL_GATE_SIGMAS * sensor.sigma_r;
    let t_gate = dt + POTENTIAL_GATE_SIGMAS * sensor.sigma_theta;
    z.iter()
        .map(|zp| {
            if (zp.r - center.r).abs() > r_gate || wrap_angle(zp.theta - center.theta).abs() > t_gate {
                0.0
            } else {
                predicted_potential(pred, zp, sensor, &models.motion)
            }
        })
        .collect()
}

pub fn compute_potentials(parents: &ParentSet, z: &[Measurement], models: &Models) -> Potentials {
    let detected = parents
        .preds
        .par_iter()
        .map(|pred| match (pred.kind, parents.source_potential) {
            (ParticleKind::Birth, SourcePotential::Innovation) => match pred.gain() {
                Ok(g) => z.iter().map(|zp| models.sensor.p_d * g.innovation_density(zp)).collect(),
                Err(_) => potential_row(pred, z, models),
            },
            _ => potential_row(pred, z, models),
        })
        .collect();
    let q_d = models.sensor.q_d();
    let undetected = parents
        .preds
        .iter()
        .map(|pred| match pred.kind {
            ParticleKind::Persistent => q_d * models.motion.p_s,
            ParticleKind::Birth => q_d,
        })
        .collect();
    Potentials { detected, undetected }
}

/// `D_hat[p_D L_{z_p}] = sum_i V_hat[i][p] w_i + V_hat[S][p] b[1]`. The
/// potential matrix has one more row than `weights`, the source last.
pub fn predicted_linear_functionals(potentials: &[Vec<f64>], weights: &[f64], b_mass: f64) -> Vec<f64> {
    assert_eq!(potentials.len(), weights.len() + 1);
    let n_meas = potentials.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; n_meas];
    for (row, w) in potentials.iter().zip(weights.iter().chain(std::iter::once(&b_mass))) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * w;
        }
    }
    out
}

/// Categorical distribution over a sparse support.
#[derive(Debug, Clone)]
pub struct SparseCategorical {
    pub support: Vec<usize>,
    pub probs: Vec<f64>,
    cum: Vec<f64>,
}

impl SparseCategorical {
    /// `None` when every mass is zero.
    pub fn new(masses: impl IntoIterator<Item = (usize, f64)>) -> Option<Self> {
        let (support, masses): (Vec<usize>, Vec<f64>) = masses.into_iter().filter(|(_, m)| *m > 0.0).unzip();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mut acc = 0.0;
        let cum = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Some(Self { support, probs, cum })
    }

    /// Returns `(index, probability)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u = rng.random::<f64>() * self.cum[self.cum.len() - 1];
        let k = self.cum.partition_point(|c| *c <= u).min(self.cum.len() - 1);
        (self.support[k], self.probs[k])
    }

    pub fn prob_of(&self, index: usize) -> f64 {
        self.support
            .iter()
            .position(|s| *s == index)
            .map_or(0.0, |k| self.probs[k])
    }
}

/// Joint proposal over `(p, parent)`: `q(p)` and `q(parent | p)`.
#[derive(Debug, Clone)]
pub struct DetectedProposal {
    pub meas: SparseCategorical,
    pub parent_given_meas: Vec<Option<SparseCategorical>>,
}

impl DetectedProposal {
    pub fn joint_prob(&self, p: usize, parent: usize) -> f64 {
        self.meas.prob_of(p) * self.parent_given_meas[p].as_ref().map_or(0.0, |c| c.prob_of(parent))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, f64, f64) {
        let (p, qp) = self.meas.sample(rng);
        let (i, qi) = self.parent_given_meas[p]
            .as_ref()
            .expect("sampled measurement has parent mass")
            .sample(rng);
        (p, i, qp, qi)
    }
}

/// `q(p) ∝ meas_factor[p] * sum_i D^a_i V_hat[i][p]` and
/// `q(parent | p) ∝ D^a_i V_hat[i][p]`. `meas_factor` is
/// `Upsilon1(Z - z_p) / (c(z_p) Upsilon0(Z))` for CPHD or
/// `1 / (lambda c(z_p) + D_hat_p)` for PHD.
pub fn build_detected_proposal(meas_factor: &[f64], potentials: &[Vec<f64>], prior: &[f64]) -> Result<DetectedProposal> {
    let n_meas = meas_factor.len();
    let parent_given_meas: Vec<Option<SparseCategorical>> = (0..n_meas)
        .map(|p| SparseCategorical::new(potentials.iter().zip(prior).enumerate().map(|(i, (row, w))| (i, w * row[p]))))
        .collect();
    let d_hat = predicted_linear_functionals(potentials, &prior[..prior.len() - 1], prior[prior.len() - 1]);
    let meas = SparseCategorical::new(
        (0..n_meas).map(|p| (p, if parent_given_meas[p].is_some() { meas_factor[p] * d_hat[p] } else { 0.0 })),
    )
    .ok_or(Error::NoExplainableMeasurement)?;
    Ok(DetectedProposal {
        meas,
        parent_given_meas,
    })
}

/// Uniform `q(p)` and `q(parent | p) ∝ D^a`.
pub fn bootstrap_detected_proposal(n_meas: usize, prior: &[f64]) -> Result<DetectedProposal> {
    let meas = SparseCategorical::new((0..n_meas).map(|p| (p, 1.0))).ok_or(Error::NoExplainableMeasurement)?;
    let parents = SparseCategorical::new(prior.iter().copied().enumerate()).ok_or(Error::ZeroWeights)?;
    Ok(DetectedProposal {
        meas,
        parent_given_meas: vec![Some(parents); n_meas],
    })
}

#[derive(Debug, Clone)]
pub struct DetectedTuple {
    pub child: TargetState,
    pub cov: Matrix5<f64>,
    pub parent: usize,
    pub meas: usize,
    pub ln_q_meas: f64,
    pub ln_q_parent: f64,
    /// `ln q(child | parent, p)`; 0 for bootstrap draws.
    pub ln_q_child: f64,
    /// `ln f^a(child | parent)`; 0 for bootstrap draws.
    pub ln_transition: f64,
}

/// Lazily built per-parent measurement update and transition Gaussian.
struct ParentCache {
    gain: Option<(UtGain, Gaussian5)>,
    transition: Option<Gaussian5>,
}

fn cached_update<'a>(cache: &'a mut ParentCache, pred: &UtPrediction) -> Result<&'a (UtGain, Gaussian5)> {
    if cache.gain.is_none() {
        let gain = pred.gain()?;
        let post = Gaussian5::new(Vector5::zeros(), &gain.p_post)?;
        cache.gain = Some((gain, post));
    }
    Ok(cache.gain.as_ref().expect("just filled"))
}

fn ln_transition(
    parents: &ParentSet,
    cache: &mut ParentCache,
    parent: usize,
    child: &TargetState,
    models: &Models,
    mode: TransitionEval,
) -> Result<f64> {
    if parent == parents.source_index() {
        return Ok(models.birth.ln_density(child));
    }
    match mode {
        TransitionEval::Marginal => {
            if cache.transition.is_none() {
                let pred = &parents.preds[parent];
                cache.transition = Some(Gaussian5::new(pred.x_pred, &pred.p_pred)?);
            }
            Ok(cache.transition.as_ref().expect("just filled").ln_pdf(&child.to_vector()))
        }
        TransitionEval::Projected => Ok(models
            .motion
            .projected_transition_density(child, &parents.states[parent])
            .ln()),
    }
}

/// Draws `n` detected tuples; returns them with the number of source picks.
pub fn sample_detected<R: Rng + ?Sized>(
    n: usize,
    proposal: &DetectedProposal,
    parents: &ParentSet,
    z: &[Measurement],
    models: &Models,
    config: &AuxConfig,
    rng: &mut R,
) -> Result<(Vec<DetectedTuple>, usize)> {
    let mut cache: Vec<ParentCache> = (0..parents.len())
        .map(|_| ParentCache {
            gain: None,
            transition: None,
        })
        .collect();
    let source = parents.source_index();
    let mut picks = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, i, qp, qi) = proposal.sample(rng);
        if i == source {
            picks += 1;
        }
        let tuple = match config.proposal {
            ProposalKind::Unscented => {
                let (gain, post) = cached_update(&mut cache[i], &parents.preds[i])?;
                let mean = gain.posterior_mean(&z[p]);
                let p_post = gain.p_post;
                let noise = post.sample(rng);
                let child_v = mean + noise;
                let ln_q_child = post.ln_pdf(&noise);
                let child = TargetState::from_vector(&child_v);
                let ln_f = ln_transition(parents, &mut cache[i], i, &child, models, config.transition_eval)?;
                DetectedTuple {
                    child,
                    cov: p_post,
                    parent: i,
                    meas: p,
                    ln_q_meas: qp.ln(),
                    ln_q_parent: qi.ln(),
                    ln_q_child,
                    ln_transition: ln_f,
                }
            }
            ProposalKind::Bootstrap => {
                let child = if i == source {
                    models.birth.sample_birth(rng)
                } else {
                    models.motion.sample_transition(&parents.states[i], rng)
                };
                DetectedTuple {
                    child,
                    cov: parents.preds[i].p_pred,
                    parent: i,
                    meas: p,
                    ln_q_meas: qp.ln(),
                    ln_q_parent: qi.ln(),
                    ln_q_child: 0.0,
                    ln_transition: 0.0,
                }
            }
        };
        out.push(tuple);
    }
    Ok((out, picks))
}

/// Undetected children: parent ∝ `p_S^a D^a`, child from the extended
/// transition, covariance from the parent's UT prediction.
pub fn sample_undetected<R: Rng + ?Sized>(
    n: usize,
    parents: &ParentSet,
    models: &Models,
    rng: &mut R,
) -> Result<Vec<(TargetState, Matrix5<f64>, usize)>> {
    let q2 = SparseCategorical::new(
        parents
            .prior
            .iter()
            .zip(&parents.survival)
            .map(|(w, s)| w * s)
            .enumerate(),
    )
    .ok_or(Error::EmptyPrediction)?;
    let source = parents.source_index();
    Ok((0..n)
        .map(|_| {
            let (i, _) = q2.sample(rng);
            let child = if i == source {
                models.birth.sample_birth(rng)
            } else {
                models.motion.sample_transition(&parents.states[i], rng)
            };
            (child, parents.preds[i].p_pred, i)
        })
        .collect())
}

fn ln_detection(sensor: &SensorModel, z: &Measurement, x: &TargetState) -> f64 {
    match sensor.likelihood(z, x) {
        Ok(l) => (sensor.p_d * l).ln(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// `ln [p_D L_{z_p}(child) p_S^a f^a D^a / (q(child|parent,p) q(parent|p))]`.
fn ln_is_term(t: &DetectedTuple, parents: &ParentSet, z: &[Measurement], sensor: &SensorModel) -> f64 {
    if t.ln_q_child < PROPOSAL_DENSITY_FLOOR.ln() {
        return f64::NEG_INFINITY;
    }
    ln_detection(sensor, &z[t.meas], &t.child) + parents.survival[t.parent].ln() + parents.prior[t.parent].ln()
        + t.ln_transition
        - t.ln_q_child
        - t.ln_q_parent
}

/// Importance-sampling estimate of `D[p_D L_{z_p}]` from the tuples that
/// chose `p`; falls back to `d_hat[p]` when none did.
pub fn updated_linear_functionals(
    tuples: &[DetectedTuple],
    parents: &ParentSet,
    z: &[Measurement],
    sensor: &SensorModel,
    d_hat: &[f64],
) -> Vec<f64> {
    let terms: Vec<f64> = tuples.par_iter().map(|t| ln_is_term(t, parents, z, sensor).exp()).collect();
    let mut sum = vec![0.0; z.len()];
    let mut count = vec![0usize; z.len()];
    for (t, v) in tuples.iter().zip(&terms) {
        sum[t.meas] += v;
        count[t.meas] += 1;
    }
    (0..z.len())
        .map(|p| if count[p] == 0 { d_hat[p] } else { sum[p] / count[p] as f64 })
        .collect()
}

/// Detected importance weights against the full joint proposal
/// `q(child | parent, p) q(parent | p) q(p)`; `meas_factor` as in
/// [`build_detected_proposal`], evaluated with updated functionals.
pub fn detected_weights(
    tuples: &[DetectedTuple],
    parents: &ParentSet,
    z: &[Measurement],
    sensor: &SensorModel,
    meas_factor: &[f64],
) -> Vec<f64> {
    let ln_n = (tuples.len() as f64).ln();
    let weights: Vec<f64> = tuples
        .par_iter()
        .map(|t| {
            let ln_w = ln_is_term(t, parents, z, sensor) + meas_factor[t.meas].ln() - t.ln_q_meas - ln_n;
            if ln_w.is_nan() {
                0.0
            } else {
                ln_w.exp()
            }
        })
        .collect();
    let floored = tuples
        .iter()
        .filter(|t| t.ln_q_child < PROPOSAL_DENSITY_FLOOR.ln())
        .count();
    if floored > 0 {
        warn!("{floored} detected tuples had proposal density below the floor; weights set to 0");
    }
    weights
}

/// Common value of every undetected weight:
/// `(sum p_S w_i + b[1]) / n * (1 - p_D) * missed_ratio`.
pub fn undetected_weights(n: usize, weights: &[f64], b_mass: f64, p_d: f64, p_s: f64, missed_ratio: f64) -> f64 {
    let mass: f64 = weights.iter().map(|w| p_s * w).sum::<f64>() + b_mass;
    mass / n as f64 * (1.0 - p_d) * missed_ratio
}

/// Weighted mean state of each measurement group whose total weight exceeds
/// `threshold`, in measurement order.
pub fn natural_cluster_extract(tuples: &[DetectedTuple], weights: &[f64], threshold: f64) -> Vec<TargetState> {
    let n_meas = tuples.iter().map(|t| t.meas + 1).max().unwrap_or(0);
    let mut acc = vec![Vector5::zeros(); n_meas];
    let mut mass = vec![0.0; n_meas];
    for (t, w) in tuples.iter().zip(weights) {
        acc[t.meas] += t.child.to_vector() * *w;
        mass[t.meas] += w;
    }
    (0..n_meas)
        .filter(|p| mass[*p] > threshold)
        .map(|p| TargetState::from_vector(&(acc[p] / mass[p])))
        .collect()
}

fn cphd_meas_factors(ups: &UpsilonSet, clutter: &[f64]) -> Vec<f64> {
    clutter
        .iter()
        .enumerate()
        .map(|(p, c)| ups.detection_ratio(p) / c)
        .collect()
}

fn phd_meas_factors(sensor: &SensorModel, z: &[Measurement], d: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(d)
        .map(|(zp, dp)| {
            let den = sensor.clutter_intensity(zp) + dp;
            if den > 0.0 {
                1.0 / den
            } else {
                0.0
            }
        })
        .collect()
}

fn aux_step<R: Rng + ?Sized>(
    state: &AuxFilterState,
    z: &[Measurement],
    models: &Models,
    config: &AuxConfig,
    recursion: Recursion,
    rng: &mut R,
) -> Result<(AuxFilterState, StepOutput)> {
    let sensor = &models.sensor;
    let parents = ParentSet::predict(&state.particles, models, config)?;
    let n_pred = parents.predicted_mass();
    let card_pred = match (recursion, &state.card) {
        (Recursion::Cphd, Some(card)) => {
            let birth = CardinalityDist::poisson(models.birth.mass(), card.n_max());
            Some(predict_cardinality(card, models.motion.p_s, &birth))
        }
        (Recursion::Cphd, None) => return Err(Error::InvalidParameter("CPHD step needs a cardinality".into())),
        (Recursion::Phd, _) => None,
    };
    let clutter_card = ClutterCardinality::Poisson(sensor.clutter_rate);
    let clutter: Vec<f64> = z.iter().map(|zp| effective_clutter_density(sensor, zp)).collect();
    let upsilons = |d: &[f64]| -> Result<UpsilonSet> {
        let lin: Vec<f64> = d.iter().zip(&clutter).map(|(v, c)| v / c).collect();
        upsilon_set(&UpsilonInputs {
            linfuncs: &lin,
            n_pred,
            q_d: sensor.q_d(),
            clutter: &clutter_card,
            p_pred: card_pred.as_ref().expect("cphd branch"),
        })
    };

    let potentials = compute_potentials(&parents, z, models);
    let d_hat = predicted_linear_functionals(
        &potentials.detected,
        &parents.prior[..parents.len() - 1],
        models.birth.mass(),
    );

    let proposal = if z.is_empty() {
        None
    } else {
        let built = match config.proposal {
            ProposalKind::Bootstrap => bootstrap_detected_proposal(z.len(), &parents.prior),
            ProposalKind::Unscented => {
                let factor = match recursion {
                    Recursion::Cphd => cphd_meas_factors(&upsilons(&d_hat)?, &clutter),
                    Recursion::Phd => phd_meas_factors(sensor, z, &d_hat),
                };
                build_detected_proposal(&factor, &potentials.detected, &parents.prior)
            }
        };
        match built {
            Ok(p) => Some(p),
            Err(Error::NoExplainableMeasurement) => {
                debug!("no measurement explainable by the predicted intensity; undetected branch only");
                None
            }
            Err(e) => return Err(e),
        }
    };

    let (n1, n2) = if proposal.is_some() {
        (config.n_detected, config.n_undetected)
    } else {
        (0, config.n_detected + config.n_undetected)
    };
    let (tuples, picks) = match &proposal {
        Some(prop) => sample_detected(n1, prop, &parents, z, models, config, rng)?,
        None => (Vec::new(), 0),
    };
    let undetected = sample_undetected(n2, &parents, models, rng)?;

    let d_upd = updated_linear_functionals(&tuples, &parents, z, sensor, &d_hat);
    let (det_factor, missed_ratio, card_post) = match recursion {
        Recursion::Cphd => {
            let ups = upsilons(&d_upd)?;
            let lin: Vec<f64> = d_upd.iter().zip(&clutter).map(|(v, c)| v / c).collect();
            let cp = card_pred.as_ref().expect("cphd branch");
            let post = update_cardinality(
                cp,
                &UpsilonInputs {
                    linfuncs: &lin,
                    n_pred,
                    q_d: sensor.q_d(),
                    clutter: &clutter_card,
                    p_pred: cp,
                },
            )?;
            (cphd_meas_factors(&ups, &clutter), ups.missed_ratio(), Some(post))
        }
        Recursion::Phd => (phd_meas_factors(sensor, z, &d_upd), 1.0, None),
    };

    let det_w = detected_weights(&tuples, &parents, z, sensor, &det_factor);
    let und_w = undetected_weights(
        n2,
        &parents.prior[..parents.len() - 1],
        models.birth.mass(),
        sensor.p_d,
        models.motion.p_s,
        missed_ratio,
    );

    let estimates = natural_cluster_extract(&tuples, &det_w, config.threshold);
    let mut particles = Vec::with_capacity(n1 + n2);
    for (t, w) in tuples.iter().zip(&det_w) {
        particles.push(AuxParticle {
            state: t.child,
            weight: *w,
            cov: t.cov,
            origin: ParticleOrigin::Detected { meas: t.meas },
        });
    }
    for (child, cov, _) in undetected {
        particles.push(AuxParticle {
            state: child,
            weight: und_w,
            cov,
            origin: ParticleOrigin::Undetected,
        });
    }
    let next = AuxFilterState {
        particles,
        card: card_post.clone(),
        birth_pick_count: picks,
    };
    let out = StepOutput {
        estimates,
        expected_count: next.expected_count(),
        birth_picks: picks,
        card_predicted: card_pred,
        card_updated: card_post,
    };
    Ok((next, out))
}

fn step_or_reset<R: Rng + ?Sized>(
    state: &AuxFilterState,
    z: &[Measurement],
    models: &Models,
    config: &AuxConfig,
    recursion: Recursion,
    rng: &mut R,
) -> Result<(AuxFilterState, StepOutput)> {
    match aux_step(state, z, models, config, recursion, rng) {
        Ok(r) => Ok(r),
        Err(e) => {
            warn!("auxiliary filter diverged ({e}); resetting to the birth-only state");
            Err(e)
        }
    }
}

/// One U-ACPHD cycle.
pub fn uacphd_step<R: Rng + ?Sized>(
    state: &AuxFilterState,
    z: &[Measurement],
    models: &Models,
    config: &AuxConfig,
    rng: &mut R,
) -> Result<(AuxFilterState, StepOutput)> {
    step_or_reset(state, z, models, config, Recursion::Cphd, rng)
}

/// One U-APHD cycle: the same sampling with PHD corrector weights.
pub fn uaphd_step<R: Rng + ?Sized>(
    state: &AuxFilterState,
    z: &[Measurement],
    models: &Models,
    config: &AuxConfig,
    rng: &mut R,
) -> Result<(AuxFilterState, StepOutput)> {
    step_or_reset(state, z, models, config, Recursion::Phd, rng)
}

/// Stateful wrapper for the harness. A failed step resets the state to
/// birth-only and the error is passed on so the run can be flagged.
pub struct AuxFilter {
    pub models: Models,
    pub config: AuxConfig,
    pub recursion: Recursion,
    pub state: AuxFilterState,
}

impl AuxFilter {
    pub fn new(models: Models, config: AuxConfig, recursion: Recursion) -> Self {
        let state = AuxFilterState::birth_only(recursion == Recursion::Cphd, config.n_max);
        Self {
            models,
            config,
            recursion,
            state,
        }
    }
}

impl TrackingFilter for AuxFilter {
    fn name(&self) -> &'static str {
        match self.recursion {
            Recursion::Cphd => "u-acphd",
            Recursion::Phd => "u-aphd",
        }
    }

    fn step(&mut self, z: &[Measurement], rng: &mut dyn RngCore) -> Result<StepOutput> {
        match step_or_reset(&self.state, z, &self.models, &self.config, self.recursion, rng) {
            Ok((next, out)) => {
                self.state = next;
                Ok(out)
            }
            Err(e) => {
                self.state = AuxFilterState::birth_only(self.recursion == Recursion::Cphd, self.config.n_max);
                Err(e)
            }
        }
    }
}
