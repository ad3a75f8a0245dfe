//! Bootstrap SMC-PHD and SMC-CPHD baselines.
//!
//! The PHD corrector follows Vo, Singh and Doucet (2005):
//! `w <- [q_D + sum_p p_D L_p(x) / (lambda c(z_p) + sum_j p_D L_p(x_j) w_j)] w`.
//! Births are weighted `b[1] / n_birth` with no measurement-driven placement.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cphd::{
    predict_cardinality, update_cardinality, upsilon_set, CardinalityDist, ClutterCardinality, UpsilonInputs,
    DEFAULT_N_MAX,
};
use crate::error::{Error, Result};
use crate::models::{measure, Measurement, Models, SensorModel, TargetState};

/// Lower bound on `c(z)` where it appears as a divisor, so target-originated
/// measurements that fall outside the clutter region stay usable.
pub const CLUTTER_DENSITY_FLOOR: f64 = 1e-12;

pub fn effective_clutter_density(sensor: &SensorModel, z: &Measurement) -> f64 {
    sensor.clutter_density(z).max(CLUTTER_DENSITY_FLOOR)
}

/// Weighted particle approximation of an intensity function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedParticleSet {
    pub particles: Vec<TargetState>,
    pub weights: Vec<f64>,
}

impl WeightedParticleSet {
    pub fn new(particles: Vec<TargetState>, weights: Vec<f64>) -> Result<Self> {
        if particles.len() != weights.len() {
            return Err(Error::InvalidParameter("particle and weight counts differ".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        Ok(Self { particles, weights })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn expected_count(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Systematic resampling: `n_out` parent indices with expected multiplicity
/// `n_out * w_i / sum(w)`.
pub fn resample<R: Rng + ?Sized>(weights: &[f64], n_out: usize, rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroWeights);
    }
    let step = total / n_out as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n_out);
    let mut cum = 0.0;
    let mut i = 0;
    let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    for _ in 0..n_out {
        while i < last_positive && cum + weights[i] <= u {
            cum += weights[i];
            i += 1;
        }
        out.push(i);
        u += step;
    }
    Ok(out)
}

/// Survivors from resampled parents plus fresh births.
pub fn smc_predict<R: Rng + ?Sized>(
    set: &WeightedParticleSet,
    n_birth: usize,
    n_survive: usize,
    models: &Models,
    rng: &mut R,
) -> Result<WeightedParticleSet> {
    if n_birth == 0 || n_survive == 0 {
        return Err(Error::InvalidParameter("particle budgets must be positive".into()));
    }
    let mass = set.expected_count();
    let b = models.birth.mass();
    if !(mass > 0.0) && !(b > 0.0) {
        return Err(Error::EmptyPrediction);
    }
    let mut particles = Vec::with_capacity(n_survive + n_birth);
    let mut weights = Vec::with_capacity(n_survive + n_birth);
    if mass > 0.0 && models.motion.p_s > 0.0 {
        let w = models.motion.p_s * mass / n_survive as f64;
        for i in resample(&set.weights, n_survive, rng)? {
            particles.push(models.motion.sample_transition(&set.particles[i], rng));
            weights.push(w);
        }
    }
    let wb = b / n_birth as f64;
    for _ in 0..n_birth {
        particles.push(models.birth.sample_birth(rng));
        weights.push(wb);
    }
    Ok(WeightedParticleSet { particles, weights })
}

/// `p_D L_{z_p}(x_j)` for every particle `j` (rows) and measurement `p`.
pub fn detection_likelihoods(particles: &[TargetState], z: &[Measurement], sensor: &SensorModel) -> Vec<Vec<f64>> {
    particles
        .par_iter()
        .map(|x| match measure(x) {
            Ok(m) => z
                .iter()
                .map(|zp| sensor.p_d * sensor.likelihood_from_predicted(zp, &m))
                .collect(),
            Err(_) => vec![0.0; z.len()],
        })
        .collect()
}

/// `D[p_D L_{z_p}] = sum_j w_j p_D L_{z_p}(x_j)` for every measurement.
fn linear_functionals(lik: &[Vec<f64>], weights: &[f64], n_meas: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_meas];
    for (row, w) in lik.iter().zip(weights) {
        for (o, l) in out.iter_mut().zip(row) {
            *o += w * l;
        }
    }
    out
}

pub fn smc_phd_update(set: &WeightedParticleSet, z: &[Measurement], sensor: &SensorModel) -> WeightedParticleSet {
    let q_d = sensor.q_d();
    let lik = detection_likelihoods(&set.particles, z, sensor);
    let lin = linear_functionals(&lik, &set.weights, z.len());
    let denom: Vec<f64> = z
        .iter()
        .zip(&lin)
        .map(|(zp, d)| sensor.clutter_intensity(zp) + d)
        .collect();
    let weights = lik
        .iter()
        .zip(&set.weights)
        .map(|(row, w)| {
            let det: f64 = row
                .iter()
                .zip(&denom)
                .filter(|(_, d)| **d > 0.0)
                .map(|(l, d)| l / d)
                .sum();
            w * (q_d + det)
        })
        .collect();
    WeightedParticleSet {
        particles: set.particles.clone(),
        weights,
    }
}

/// Per-particle CPHD corrector factor `L_Z(x_j)` given the Upsilon ratios.
/// `lik[j][p]` is `p_D L_{z_p}(x_j)` and `clutter[p]` is `c(z_p)`.
pub fn cphd_corrector_factors(
    lik: &[Vec<f64>],
    clutter: &[f64],
    q_d: f64,
    missed_ratio: f64,
    detection_ratios: &[f64],
) -> Vec<f64> {
    let scale: Vec<f64> = clutter
        .iter()
        .zip(detection_ratios)
        .map(|(c, r)| r / c)
        .collect();
    lik.iter()
        .map(|row| q_d * missed_ratio + row.iter().zip(&scale).map(|(l, s)| l * s).sum::<f64>())
        .collect()
}

pub fn smc_cphd_update(
    set: &WeightedParticleSet,
    card: &CardinalityDist,
    z: &[Measurement],
    sensor: &SensorModel,
) -> Result<(WeightedParticleSet, CardinalityDist)> {
    let q_d = sensor.q_d();
    let lik = detection_likelihoods(&set.particles, z, sensor);
    let clutter: Vec<f64> = z.iter().map(|zp| effective_clutter_density(sensor, zp)).collect();
    let linfuncs: Vec<f64> = linear_functionals(&lik, &set.weights, z.len())
        .iter()
        .zip(&clutter)
        .map(|(d, c)| d / c)
        .collect();
    let clutter_card = ClutterCardinality::Poisson(sensor.clutter_rate);
    let inputs = UpsilonInputs {
        linfuncs: &linfuncs,
        n_pred: set.expected_count(),
        q_d,
        clutter: &clutter_card,
        p_pred: card,
    };
    let ups = upsilon_set(&inputs)?;
    let ratios: Vec<f64> = (0..z.len()).map(|p| ups.detection_ratio(p)).collect();
    let factors = cphd_corrector_factors(&lik, &clutter, q_d, ups.missed_ratio(), &ratios);
    let weights = set.weights.iter().zip(&factors).map(|(w, f)| w * f).collect();
    let post = update_cardinality(card, &inputs)?;
    Ok((
        WeightedParticleSet {
            particles: set.particles.clone(),
            weights,
        },
        post,
    ))
}

fn l1(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

fn weighted_median(mut pairs: Vec<(f64, f64)>) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * pairs.iter().map(|p| p.1).sum::<f64>();
    let mut cum = 0.0;
    for (v, w) in &pairs {
        cum += w;
        if cum >= half {
            return *v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub cost: f64,
}

const KMEANS_MAX_ITER: usize = 100;

fn kmeans_once<R: Rng + ?Sized>(points: &[[f64; 2]], weights: &[f64], k: usize, rng: &mut R) -> KMeansResult {
    // weighted seeding without replacement
    let mut avail = weights.to_vec();
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = avail.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = avail.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        for (i, w) in avail.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(points[pick]);
        avail[pick] = 0.0;
    }

    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, pt) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = l1(pt, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|i| labels[*i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for axis in 0..2 {
                center[axis] = weighted_median(members.iter().map(|&i| (points[i][axis], weights[i])).collect());
            }
        }
    }
    let cost = points
        .iter()
        .zip(&labels)
        .zip(weights)
        .map(|((p, l), w)| w * l1(p, &centers[*l]))
        .sum();
    KMeansResult { centers, labels, cost }
}

/// Weighted k-means under the city-block distance with weighted-median
/// centers; best of `restarts` random initializations.
pub fn weighted_kmeans<R: Rng + ?Sized>(
    points: &[[f64; 2]],
    weights: &[f64],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> KMeansResult {
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let r = kmeans_once(points, weights, k, rng);
        if best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    best.expect("at least one restart")
}

/// Cluster particle positions into `n_clusters` groups and return the
/// weighted mean state of each group.
pub fn kmeans_extract<R: Rng + ?Sized>(
    set: &WeightedParticleSet,
    n_clusters: usize,
    restarts: usize,
    rng: &mut R,
) -> Vec<TargetState> {
    let idx: Vec<usize> = (0..set.len()).filter(|i| set.weights[*i] > 0.0).collect();
    let k = n_clusters.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    let points: Vec<[f64; 2]> = idx.iter().map(|&i| set.particles[i].position()).collect();
    let weights: Vec<f64> = idx.iter().map(|&i| set.weights[i]).collect();
    let res = weighted_kmeans(&points, &weights, k, restarts, rng);
    (0..k)
        .filter_map(|c| {
            let mut acc = nalgebra::Vector5::zeros();
            let mut total = 0.0;
            for (j, &i) in idx.iter().enumerate() {
                if res.labels[j] == c {
                    acc += set.particles[i].to_vector() * weights[j];
                    total += weights[j];
                }
            }
            (total > 0.0).then(|| TargetState::from_vector(&(acc / total)))
        })
        .collect()
}

/// What a filter reports after processing one scan.
#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub estimates: Vec<TargetState>,
    pub expected_count: f64,
    pub birth_picks: usize,
    pub card_predicted: Option<CardinalityDist>,
    pub card_updated: Option<CardinalityDist>,
}

/// A multi-target filter driven one scan at a time.
pub trait TrackingFilter: Send {
    fn name(&self) -> &'static str;
    fn step(&mut self, z: &[Measurement], rng: &mut dyn RngCore) -> Result<StepOutput>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub n_survive: usize,
    pub n_birth: usize,
    pub kmeans_restarts: usize,
    pub n_max: usize,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            n_survive: 2500,
            n_birth: 500,
            kmeans_restarts: 5,
            n_max: DEFAULT_N_MAX,
        }
    }
}

pub struct SmcPhdFilter {
    pub models: Models,
    pub config: SmcConfig,
    pub set: WeightedParticleSet,
}

impl SmcPhdFilter {
    pub fn new(models: Models, config: SmcConfig) -> Self {
        Self {
            models,
            config,
            set: WeightedParticleSet::default(),
        }
    }
}

impl TrackingFilter for SmcPhdFilter {
    fn name(&self) -> &'static str {
        "smc-phd"
    }

    fn step(&mut self, z: &[Measurement], rng: &mut dyn RngCore) -> Result<StepOutput> {
        let pred = smc_predict(&self.set, self.config.n_birth, self.config.n_survive, &self.models, rng)?;
        self.set = smc_phd_update(&pred, z, &self.models.sensor);
        let expected_count = self.set.expected_count();
        let estimates = kmeans_extract(&self.set, expected_count.round() as usize, self.config.kmeans_restarts, rng);
        Ok(StepOutput {
            estimates,
            expected_count,
            ..StepOutput::default()
        })
    }
}

pub struct SmcCphdFilter {
    pub models: Models,
    pub config: SmcConfig,
    pub set: WeightedParticleSet,
    pub card: CardinalityDist,
}

impl SmcCphdFilter {
    pub fn new(models: Models, config: SmcConfig) -> Self {
        Self {
            models,
            config,
            set: WeightedParticleSet::default(),
            card: CardinalityDist::delta(0, config.n_max),
        }
    }
}

impl TrackingFilter for SmcCphdFilter {
    fn name(&self) -> &'static str {
        "smc-cphd"
    }

    fn step(&mut self, z: &[Measurement], rng: &mut dyn RngCore) -> Result<StepOutput> {
        let pred = smc_predict(&self.set, self.config.n_birth, self.config.n_survive, &self.models, rng)?;
        let birth = CardinalityDist::poisson(self.models.birth.mass(), self.config.n_max);
        let card_pred = predict_cardinality(&self.card, self.models.motion.p_s, &birth);
        let (set, card) = smc_cphd_update(&pred, &card_pred, z, &self.models.sensor)?;
        self.set = set;
        self.card = card;
        let expected_count = self.set.expected_count();
        let estimates = kmeans_extract(&self.set, expected_count.round() as usize, self.config.kmeans_restarts, rng);
        Ok(StepOutput {
            estimates,
            expected_count,
            birth_picks: 0,
            card_predicted: Some(card_pred),
            card_updated: Some(self.card.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> Models {
        Models::standard()
    }

    #[test]
    fn predict_mass_bookkeeping() {
        let m = models();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = WeightedParticleSet::new(vec![TargetState::new(500.0, 1.0, 500.0, 1.0, 0.0); 10], vec![0.1; 10]).unwrap();
        let pred = smc_predict(&set, 500, 2500, &m, &mut rng).unwrap();
        assert_eq!(pred.len(), 3000);
        assert!((pred.expected_count() - 1.04).abs() < 1e-12);

        let empty = WeightedParticleSet::default();
        let pred = smc_predict(&empty, 500, 2500, &m, &mut rng).unwrap();
        assert_eq!(pred.len(), 500);
        assert!((pred.expected_count() - 0.05).abs() < 1e-12);
        assert!(smc_predict(&empty, 0, 2500, &m, &mut rng).is_err());
    }

    #[test]
    fn phd_update_without_detection_keeps_weights() {
        let mut m = models();
        m.sensor.p_d = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pred = smc_predict(&WeightedParticleSet::default(), 200, 200, &m, &mut rng).unwrap();
        let z = vec![Measurement::new(700.0, 0.78)];
        let up = smc_phd_update(&pred, &z, &m.sensor);
        assert_eq!(up.weights, pred.weights);
    }

    #[test]
    fn phd_update_single_particle_hand_evaluation() {
        let mut m = models();
        m.sensor.clutter_rate = 0.0;
        let x = TargetState::new(400.0, 0.0, 300.0, 0.0, 0.0);
        let z = vec![Measurement::new(500.5, (300.0f64).atan2(400.0) + 0.001)];
        let set = WeightedParticleSet::new(vec![x], vec![0.7]).unwrap();
        let up = smc_phd_update(&set, &z, &m.sensor);
        // q_D w + p_D L w / (p_D L w) * w = (q_D + 1/w) w
        let want = m.sensor.q_d() * 0.7 + 1.0;
        assert!((up.weights[0] - want).abs() < 1e-12);
        assert!(up.weights[0] <= (1.0 + m.sensor.q_d()) * 0.7 + 1.0);
    }

    #[test]
    fn phd_update_mass_bound() {
        let m = models();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior = WeightedParticleSet::new(
            vec![TargetState::new(505.0, -5.0, 490.0, -5.0, 0.0); 50],
            vec![0.02; 50],
        )
        .unwrap();
        let pred = smc_predict(&prior, 500, 2500, &m, &mut rng).unwrap();
        let mut z = m.sensor.sample_clutter(&mut rng);
        z.push(Measurement::new(697.0, 0.77));
        let up = smc_phd_update(&pred, &z, &m.sensor);
        assert!(up.expected_count() <= z.len() as f64 + m.sensor.q_d() * pred.expected_count() + 1e-12);
    }

    #[test]
    fn cphd_update_no_measurements() {
        let mut m = models();
        m.sensor.p_d = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pred = smc_predict(&WeightedParticleSet::default(), 100, 100, &m, &mut rng).unwrap();
        let card = CardinalityDist::poisson(0.05, 100);
        let (up, post) = smc_cphd_update(&pred, &card, &[], &m.sensor).unwrap();
        for (a, b) in post.probs().iter().zip(card.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let ratio = up.weights[0] / pred.weights[0];
        for (a, b) in up.weights.iter().zip(&pred.weights) {
            assert!((a / b - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn corrector_with_unit_ratios_scales_by_missed_detection() {
        let lik = vec![vec![], vec![]];
        let f = cphd_corrector_factors(&lik, &[], 0.05, 1.0, &[]);
        assert_eq!(f, vec![0.05, 0.05]);
    }

    #[test]
    fn cphd_detection_term_vanishes_without_detection() {
        let lik = vec![vec![0.0, 0.0]];
        let f = cphd_corrector_factors(&lik, &[1e-3, 1e-3], 1.0, 0.8, &[3.0, 4.0]);
        assert_eq!(f, vec![0.8]);
    }

    #[test]
    fn cphd_map_tracks_single_target() {
        let mut m = models();
        m.sensor.clutter_rate = 0.0;
        m.sensor.p_d = 1.0;
        let mut filter = SmcCphdFilter::new(m.clone(), SmcConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = TargetState::new(505.0, -1.0, 490.0, -1.0, 0.0);
        let mut correct = 0;
        for k in 0..20 {
            let z = vec![crate::models::measure(&x).unwrap()];
            let out = filter.step(&z, &mut rng).unwrap();
            if k >= 5 && out.card_updated.unwrap().map_estimate() == 1 {
                correct += 1;
            }
            x = crate::models::ct_predict(&x, 1.0);
        }
        assert!(correct >= 14, "map correct in {correct}/15 steps");
    }

    #[test]
    fn resample_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let idx = resample(&[1.0; 7], 20, &mut rng).unwrap();
        let mut counts = [0usize; 7];
        idx.iter().for_each(|i| counts[*i] += 1);
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1);

        let idx = resample(&[0.0, 0.0, 2.0, 0.0], 50, &mut rng).unwrap();
        assert!(idx.iter().all(|i| *i == 2));
        assert!(matches!(resample(&[0.0, 0.0], 5, &mut rng), Err(Error::ZeroWeights)));
    }

    #[test]
    fn resample_multiplicities_match_expectation() {
        let w = [0.05, 0.3, 0.15, 0.4, 0.1];
        let n_out = 13;
        let reps = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut sum = [0.0; 5];
        let mut sumsq = [0.0; 5];
        for _ in 0..reps {
            let mut c = [0.0; 5];
            for i in resample(&w, n_out, &mut rng).unwrap() {
                c[i] += 1.0;
            }
            for i in 0..5 {
                sum[i] += c[i];
                sumsq[i] += c[i] * c[i];
            }
        }
        for i in 0..5 {
            let mean = sum[i] / reps as f64;
            let var = (sumsq[i] / reps as f64 - mean * mean).max(1e-12);
            let se = (var / reps as f64).sqrt();
            let want = n_out as f64 * w[i];
            assert!((mean - want).abs() <= 4.0 * se + 1e-9, "index {i}: {mean} vs {want}");
        }
    }

    #[test]
    fn resample_then_uniform_reweight_preserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let idx = resample(&w, 37, &mut rng).unwrap();
        let new_total: f64 = idx.iter().map(|_| total / 37.0).sum();
        assert!((new_total - total).abs() < 1e-12);
    }

    fn blobs(rng: &mut ChaCha8Rng) -> WeightedParticleSet {
        let mut particles = Vec::new();
        for (cx, cy) in [(100.0, 100.0), (600.0, 400.0)] {
            for _ in 0..300 {
                particles.push(TargetState::new(
                    cx + rng.random_range(-3.0..3.0),
                    0.0,
                    cy + rng.random_range(-3.0..3.0),
                    0.0,
                    0.0,
                ));
            }
        }
        let n = particles.len();
        WeightedParticleSet::new(particles, vec![2.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn kmeans_recovers_blob_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = blobs(&mut rng);
        assert!(kmeans_extract(&set, 0, 5, &mut rng).is_empty());
        let mut est = kmeans_extract(&set, 2, 5, &mut rng);
        est.sort_by(|a, b| a.x.total_cmp(&b.x));
        let means = [(0..300), (300..600)].map(|r| {
            let n = r.len() as f64;
            let xs: f64 = set.particles[r.clone()].iter().map(|p| p.x).sum();
            let ys: f64 = set.particles[r].iter().map(|p| p.y).sum();
            (xs / n, ys / n)
        });
        for (e, (mx, my)) in est.iter().zip(means) {
            assert!((e.x - mx).abs() < 1.0 && (e.y - my).abs() < 1.0);
        }
        assert_eq!(kmeans_extract(&set, 10_000, 1, &mut rng).len(), 600);
    }

    #[test]
    fn kmeans_restarts_never_worse() {
        let mut base = ChaCha8Rng::seed_from_u64(10);
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [base.random_range(0.0..100.0), base.random_range(0.0..100.0)])
            .collect();
        let w = vec![1.0; 200];
        for seed in 0..10 {
            let one = weighted_kmeans(&pts, &w, 4, 1, &mut ChaCha8Rng::seed_from_u64(seed));
            let five = weighted_kmeans(&pts, &w, 4, 5, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(five.cost <= one.cost);
        }
    }
}
