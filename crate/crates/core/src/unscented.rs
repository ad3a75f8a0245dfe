//! Unscented transform machinery for the auxiliary filters.
//!
//! Each particle carries a posterior covariance. Together with the process
//! and measurement noise it forms an augmented Gaussian whose sigma points are
//! pushed through the turn model and the range/bearing sensor. The results
//! give the predicted potential of every measurement and a Gaussian proposal
//! conditioned on a chosen measurement.

use nalgebra::{
    DMatrix, DVector, Matrix2, Matrix5, Matrix5x2, SymmetricEigen, Vector2, Vector5,
};

use crate::error::{Error, Result};
use crate::models::{wrap_angle, BirthModel, Measurement, MotionModel, SensorModel, TargetState};

/// Spread of the birth-source mean used in its augmented covariance.
pub const DEFAULT_SIGMA_B: f64 = 1e-2;

/// Largest tolerated condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Sigma-point scaling. `lambda_ut = alpha^2 (L + kappa) - L`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtParams {
    /// alpha = 1, kappa = 2, beta = 1: scaling 2 and `beta - alpha^2 = 0`.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            kappa: 2.0,
        }
    }
}

impl UtParams {
    pub fn lambda(&self, dim: usize) -> f64 {
        let l = dim as f64;
        self.alpha * self.alpha * (l + self.kappa) - l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtWeights {
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

pub fn ut_weights(params: &UtParams, dim: usize) -> Result<UtWeights> {
    let l = dim as f64;
    let lam = params.lambda(dim);
    if !(l + lam > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma-point scaling {lam} must exceed -{dim}"
        )));
    }
    let n = 2 * dim + 1;
    let w = 0.5 / (l + lam);
    let mut wm = vec![w; n];
    let mut wc = vec![w; n];
    wm[0] = lam / (l + lam);
    wc[0] = wm[0] + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(UtWeights { wm, wc })
}

#[derive(Debug, Clone)]
pub struct SigmaSet {
    /// One augmented point per column, `2L + 1` columns.
    pub points: DMatrix<f64>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

impl SigmaSet {
    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }
}

fn check_symmetric(cov: &DMatrix<f64>) -> Result<()> {
    let scale = cov.amax().max(1.0);
    let asym = (cov - cov.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Symmetric square root `V sqrt(max(D, 0)) V'` of a symmetric matrix.
pub fn symmetric_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if cov.is_empty() {
        return cov.clone();
    }
    let n = cov.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || cov[(i, j)] == 0.0));
    if diagonal {
        return DMatrix::from_diagonal(&cov.diagonal().map(|d| d.max(0.0).sqrt()));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn symmetric_sqrt5(cov: &Matrix5<f64>) -> Matrix5<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix5::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn assemble(mean: &DVector<f64>, sqrt: &DMatrix<f64>, weights: UtWeights, scale: f64) -> SigmaSet {
    let l = mean.len();
    let mut points = DMatrix::zeros(l, 2 * l + 1);
    points.set_column(0, mean);
    for k in 0..l {
        let off = sqrt.column(k) * scale;
        points.set_column(1 + k, &(mean + &off));
        points.set_column(1 + l + k, &(mean - &off));
    }
    SigmaSet {
        points,
        wm: weights.wm,
        wc: weights.wc,
    }
}

/// Sigma points `[m, m + sqrt((L+lambda) P), m - sqrt((L+lambda) P)]`.
pub fn sigma_points(mean: &DVector<f64>, cov: &DMatrix<f64>, params: &UtParams) -> Result<SigmaSet> {
    let l = mean.len();
    if cov.nrows() != l || cov.ncols() != l {
        return Err(Error::InvalidParameter("mean/covariance dimension mismatch".into()));
    }
    check_symmetric(cov)?;
    let weights = ut_weights(params, l)?;
    let scale = (l as f64 + params.lambda(l)).sqrt();
    Ok(assemble(mean, &symmetric_sqrt(cov), weights, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleKind {
    /// Existing particle; process noise enters through the turn-model gain.
    Persistent,
    /// Birth source; process noise is added directly to the state.
    Birth,
}

/// Augmented Gaussian `[state; process noise; measurement noise]` with a
/// block-diagonal covariance.
#[derive(Debug, Clone)]
pub struct AugmentedParticle {
    pub state: Vector5<f64>,
    pub state_cov: Matrix5<f64>,
    pub process_cov: DMatrix<f64>,
    pub meas_cov: Matrix2<f64>,
    pub kind: ParticleKind,
}

impl AugmentedParticle {
    /// Existing particle: dimension 5 + 3 + 2.
    pub fn persistent(x: &TargetState, cov: &Matrix5<f64>, motion: &MotionModel, sensor: &SensorModel) -> Self {
        let q = motion.noise_cov();
        Self {
            state: x.to_vector(),
            state_cov: *cov,
            process_cov: DMatrix::from_iterator(3, 3, q.iter().copied()),
            meas_cov: sensor.noise_cov(),
            kind: ParticleKind::Persistent,
        }
    }

    /// Birth source: dimension 5 + 5 + 2, mean `m_b`, state block `sigma_b^2 I`.
    pub fn birth(birth: &BirthModel, sigma_b: f64, sensor: &SensorModel) -> Self {
        Self {
            state: birth.mean().to_vector(),
            state_cov: Matrix5::identity() * (sigma_b * sigma_b),
            process_cov: DMatrix::from_iterator(5, 5, birth.cov().iter().copied()),
            meas_cov: sensor.noise_cov(),
            kind: ParticleKind::Birth,
        }
    }

    pub fn process_dim(&self) -> usize {
        self.process_cov.nrows()
    }

    pub fn dim(&self) -> usize {
        5 + self.process_dim() + 2
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        m.rows_mut(0, 5).copy_from(&self.state);
        m
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let nq = self.process_dim();
        let mut c = DMatrix::zeros(self.dim(), self.dim());
        c.view_mut((0, 0), (5, 5)).copy_from(&self.state_cov);
        c.view_mut((5, 5), (nq, nq)).copy_from(&self.process_cov);
        c.view_mut((5 + nq, 5 + nq), (2, 2)).copy_from(&self.meas_cov);
        c
    }

    /// Same points as [`sigma_points`] on `(mean(), cov())`, using the square
    /// root of each diagonal block.
    pub fn sigma_points(&self, params: &UtParams) -> Result<SigmaSet> {
        let l = self.dim();
        let nq = self.process_dim();
        let weights = ut_weights(params, l)?;
        let scale = (l as f64 + params.lambda(l)).sqrt();
        let mut sqrt = DMatrix::zeros(l, l);
        sqrt.view_mut((0, 0), (5, 5)).copy_from(&symmetric_sqrt5(&self.state_cov));
        sqrt.view_mut((5, 5), (nq, nq)).copy_from(&symmetric_sqrt(&self.process_cov));
        let r = DMatrix::from_iterator(2, 2, self.meas_cov.iter().copied());
        sqrt.view_mut((5 + nq, 5 + nq), (2, 2)).copy_from(&symmetric_sqrt(&r));
        Ok(assemble(&self.mean(), &sqrt, weights, scale))
    }
}

/// Result of pushing one augmented particle through the dynamics and sensor.
#[derive(Debug, Clone)]
pub struct UtPrediction {
    pub kind: ParticleKind,
    pub sigma_states: Vec<Vector5<f64>>,
    /// Noise-free measurement of each predicted sigma state.
    pub sigma_meas_clean: Vec<Measurement>,
    /// Measurement sigma points including the measurement-noise rows.
    pub sigma_meas: Vec<Vector2<f64>>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
    pub x_pred: Vector5<f64>,
    pub p_pred: Matrix5<f64>,
    pub y_pred: Vector2<f64>,
    /// Whether the second measurement component is an angle.
    pub wrap_bearing: bool,
}

fn bearing_residual(a: &Vector2<f64>, b: &Vector2<f64>, wrap: bool) -> Vector2<f64> {
    let mut d = a - b;
    if wrap {
        d[1] = wrap_angle(d[1]);
    }
    d
}

/// Generic time update. `transition` maps `(state, process noise)` to the
/// next state, `observe` maps a state to its noise-free measurement.
pub fn ut_time_update_with<T, O>(
    particle: &AugmentedParticle,
    params: &UtParams,
    transition: T,
    observe: O,
    wrap_bearing: bool,
) -> Result<UtPrediction>
where
    T: Fn(&Vector5<f64>, &[f64]) -> Vector5<f64>,
    O: Fn(&Vector5<f64>) -> Vector2<f64>,
{
    let sigma = particle.sigma_points(params)?;
    let nq = particle.process_dim();
    let n = sigma.len();
    let mut sigma_states = Vec::with_capacity(n);
    let mut sigma_meas_clean = Vec::with_capacity(n);
    let mut sigma_meas = Vec::with_capacity(n);
    let mut noise = [0.0; 8];
    for j in 0..n {
        let col = sigma.points.column(j);
        let x = Vector5::new(col[0], col[1], col[2], col[3], col[4]);
        for k in 0..nq {
            noise[k] = col[5 + k];
        }
        let xs = transition(&x, &noise[..nq]);
        let y = observe(&xs);
        sigma_meas.push(y + Vector2::new(col[5 + nq], col[6 + nq]));
        sigma_meas_clean.push(Measurement::from_vector(&y));
        sigma_states.push(xs);
    }

    let x_pred = sigma_states
        .iter()
        .zip(&sigma.wm)
        .fold(Vector5::zeros(), |acc, (s, w)| acc + s * *w);
    let p_pred = sigma_states
        .iter()
        .zip(&sigma.wc)
        .fold(Matrix5::zeros(), |acc, (s, w)| {
            let d = s - x_pred;
            acc + d * d.transpose() * *w
        });
    let reference = sigma_meas[0];
    let y_pred = reference
        + sigma_meas
            .iter()
            .zip(&sigma.wm)
            .fold(Vector2::zeros(), |acc, (y, w)| acc + bearing_residual(y, &reference, wrap_bearing) * *w);

    Ok(UtPrediction {
        kind: particle.kind,
        sigma_states,
        sigma_meas_clean,
        sigma_meas,
        wm: sigma.wm,
        wc: sigma.wc,
        x_pred,
        p_pred: (p_pred + p_pred.transpose()) * 0.5,
        y_pred,
        wrap_bearing,
    })
}

fn range_bearing(x: &Vector5<f64>) -> Vector2<f64> {
    Vector2::new(x[0].hypot(x[2]), x[2].atan2(x[0]))
}

/// Time update through the turn model (persistent) or the additive birth
/// branch, with range/bearing measurement sigma points.
pub fn ut_time_update(particle: &AugmentedParticle, params: &UtParams, motion: &MotionModel) -> Result<UtPrediction> {
    match particle.kind {
        ParticleKind::Persistent => {
            let g = motion.gain();
            ut_time_update_with(
                particle,
                params,
                |x, eps| {
                    crate::models::turn_matrix(x[4], motion.dt) * x
                        + g * nalgebra::Vector3::new(eps[0], eps[1], eps[2])
                },
                range_bearing,
                true,
            )
        }
        ParticleKind::Birth => ut_time_update_with(
            particle,
            params,
            |x, noise| x + Vector5::from_column_slice(noise),
            range_bearing,
            true,
        ),
    }
}

/// Measurement-independent part of the UT update: gain and conditional
/// covariance.
#[derive(Debug, Clone)]
pub struct UtGain {
    pub gain: Matrix5x2<f64>,
    pub p_post: Matrix5<f64>,
    pub p_yy: Matrix2<f64>,
    pub p_xy: Matrix5x2<f64>,
    pub x_pred: Vector5<f64>,
    pub y_pred: Vector2<f64>,
    pub wrap_bearing: bool,
}

impl UtGain {
    pub fn posterior_mean(&self, z: &Measurement) -> Vector5<f64> {
        let innov = bearing_residual(&z.to_vector(), &self.y_pred, self.wrap_bearing);
        self.x_pred + self.gain * innov
    }

    /// Gaussian predictive density `N(z; y_pred, P_yy)`.
    pub fn innovation_density(&self, z: &Measurement) -> f64 {
        let d = bearing_residual(&z.to_vector(), &self.y_pred, self.wrap_bearing);
        let det = self.p_yy.determinant();
        match self.p_yy.try_inverse() {
            Some(inv) if det > 0.0 => {
                let q = (d.transpose() * inv * d)[0];
                (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
            }
            _ => 0.0,
        }
    }
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (mid + rad, mid - rad);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

impl UtPrediction {
    pub fn gain(&self) -> Result<UtGain> {
        let mut p_yy = Matrix2::zeros();
        let mut p_xy = Matrix5x2::zeros();
        for j in 0..self.sigma_meas.len() {
            let dy = bearing_residual(&self.sigma_meas[j], &self.y_pred, self.wrap_bearing);
            let dx = self.sigma_states[j] - self.x_pred;
            p_yy += dy * dy.transpose() * self.wc[j];
            p_xy += dx * dy.transpose() * self.wc[j];
        }
        let cond = condition_number(&p_yy);
        if !(cond <= MAX_INNOVATION_CONDITION) {
            return Err(Error::DegenerateInnovation(cond));
        }
        let inv = p_yy
            .try_inverse()
            .ok_or(Error::DegenerateInnovation(f64::INFINITY))?;
        let gain = p_xy * inv;
        let p_post = self.p_pred - gain * p_yy * gain.transpose();
        Ok(UtGain {
            gain,
            p_post: (p_post + p_post.transpose()) * 0.5,
            p_yy,
            p_xy,
            x_pred: self.x_pred,
            y_pred: self.y_pred,
            wrap_bearing: self.wrap_bearing,
        })
    }

    /// Sum over sigma states of `p_S p_D L_z(chi_j) w_j`, clamped at zero.
    pub fn potential(&self, z: &Measurement, sensor: &SensorModel, survival: f64) -> f64 {
        let s: f64 = self
            .sigma_meas_clean
            .iter()
            .zip(&self.wm)
            .map(|(m, w)| w * sensor.likelihood_from_predicted(z, m))
            .sum();
        (survival * sensor.p_d * s).max(0.0)
    }
}

/// Conditional mean and covariance given measurement `z`.
pub fn ut_measurement_update(pred: &UtPrediction, z: &Measurement) -> Result<(TargetState, Matrix5<f64>)> {
    let g = pred.gain()?;
    Ok((TargetState::from_vector(&g.posterior_mean(z)), g.p_post))
}

/// Predicted potential of measurement `z` for the particle behind `pred`;
/// the birth source survives with probability one.
pub fn predicted_potential(pred: &UtPrediction, z: &Measurement, sensor: &SensorModel, motion: &MotionModel) -> f64 {
    let survival = match pred.kind {
        ParticleKind::Persistent => motion.p_s,
        ParticleKind::Birth => 1.0,
    };
    pred.potential(z, sensor, survival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ct_predict, measure, Models};
    use nalgebra::{Matrix2x5, Matrix5x3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn weights_for_default_scaling() {
        let w = ut_weights(&UtParams::default(), 10).unwrap();
        assert!((w.wm[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!(w.wm[1..].iter().all(|v| (v - 1.0 / 24.0).abs() < 1e-15));
        assert!((w.wm.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((w.wc[0] - (w.wm[0] + 1.0)).abs() < 1e-15);
        assert_eq!(UtParams::default().lambda(10), 2.0);
        assert_eq!(UtParams::default().lambda(12), 2.0);
    }

    #[test]
    fn weights_reject_bad_scaling() {
        let p = UtParams {
            alpha: 0.0,
            beta: 2.0,
            kappa: 0.0,
        };
        assert!(ut_weights(&p, 4).is_err());
    }

    #[test]
    fn sigma_points_identity_cov() {
        let p = UtParams::default();
        let mean = DVector::from_vec(vec![1.0, -2.0]);
        let s = sigma_points(&mean, &DMatrix::identity(2, 2), &p).unwrap();
        assert_eq!(s.points.column(0), mean.column(0));
        for k in 0..2 {
            let mut e = DVector::zeros(2);
            e[k] = 2.0;
            assert!((s.points.column(1 + k) - (&mean + &e)).amax() < 1e-14);
            assert!((s.points.column(3 + k) - (&mean - &e)).amax() < 1e-14);
        }
    }

    #[test]
    fn sigma_points_reject_asymmetric() {
        let mut c = DMatrix::identity(3, 3);
        c[(0, 2)] = 1e-3;
        let r = sigma_points(&DVector::zeros(3), &c, &UtParams::default());
        assert!(matches!(r, Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sigma_reconstruction_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in 1..=12 {
            let cov = random_spd(dim, &mut rng);
            let mean = DVector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
            let s = sigma_points(&mean, &cov, &UtParams::default()).unwrap();
            let mut m = DVector::zeros(dim);
            let mut c = DMatrix::zeros(dim, dim);
            for j in 0..s.len() {
                m += s.points.column(j) * s.wm[j];
            }
            for j in 0..s.len() {
                let d = s.points.column(j) - &mean;
                c += &d * d.transpose() * s.wc[j];
            }
            assert!((m - &mean).amax() < 1e-10, "dim {dim}");
            assert!((c - &cov).amax() < 1e-10, "dim {dim}");
        }
    }

    #[test]
    fn block_sigma_points_match_general_path() {
        let models = Models::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p5 = random_spd(5, &mut rng);
        let p = Matrix5::from_iterator(p5.iter().copied());
        let x = TargetState::new(400.0, 3.0, 300.0, -2.0, 0.01);
        for aug in [
            AugmentedParticle::persistent(&x, &p, &models.motion, &models.sensor),
            AugmentedParticle::birth(&models.birth, DEFAULT_SIGMA_B, &models.sensor),
        ] {
            let a = aug.sigma_points(&UtParams::default()).unwrap();
            let b = sigma_points(&aug.mean(), &aug.cov(), &UtParams::default()).unwrap();
            assert!((a.points - b.points).amax() < 1e-9);
        }
    }

    #[test]
    fn degenerate_spread_predicts_ct() {
        let mut models = Models::standard();
        models.motion.sigma_eps = 0.0;
        models.motion.sigma_w = 0.0;
        let x = TargetState::new(400.0, 3.0, 300.0, -2.0, 0.05);
        let aug = AugmentedParticle::persistent(&x, &Matrix5::zeros(), &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let want = ct_predict(&x, 1.0).to_vector();
        for s in &pred.sigma_states {
            assert!((s - want).amax() < 1e-12);
        }
        assert!(pred.p_pred.amax() < 1e-12);
    }

    #[test]
    fn birth_branch_is_additive() {
        let models = Models::standard();
        let aug = AugmentedParticle::birth(&models.birth, DEFAULT_SIGMA_B, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let want = Matrix5::identity() * DEFAULT_SIGMA_B.powi(2) + models.birth.cov();
        assert!((pred.x_pred - models.birth.mean().to_vector()).amax() < 1e-10);
        assert!((pred.p_pred - want).amax() < 1e-10);
    }

    fn linear_surrogate() -> (Matrix5<f64>, Matrix5x3<f64>, Matrix2x5<f64>) {
        let f = crate::models::turn_matrix(0.0, 1.0);
        let g = crate::models::noise_gain(1.0);
        #[rustfmt::skip]
        let h = Matrix2x5::new(
            1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0,
        );
        (f, g, h)
    }

    #[test]
    fn linear_prediction_matches_kalman() {
        let (f, g, h) = linear_surrogate();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p5 = random_spd(5, &mut rng);
        let p = Matrix5::from_iterator(p5.iter().copied());
        let q = nalgebra::Matrix3::from_diagonal(&Vector3::new(0.3, 0.2, 0.01));
        let aug = AugmentedParticle {
            state: Vector5::new(10.0, 1.0, -4.0, 2.0, 0.1),
            state_cov: p,
            process_cov: DMatrix::from_iterator(3, 3, q.iter().copied()),
            meas_cov: Matrix2::new(0.5, 0.0, 0.0, 0.7),
            kind: ParticleKind::Persistent,
        };
        let pred = ut_time_update_with(
            &aug,
            &UtParams::default(),
            |x, e| f * x + g * Vector3::new(e[0], e[1], e[2]),
            |x| h * x,
            false,
        )
        .unwrap();
        assert!((pred.x_pred - f * aug.state).amax() < 1e-8);
        assert!((pred.p_pred - (f * p * f.transpose() + g * q * g.transpose())).amax() < 1e-8);

        let z = Measurement::new(13.0, -1.0);
        let (xp, pp) = ut_measurement_update(&pred, &z).unwrap();
        let pk = f * p * f.transpose() + g * q * g.transpose();
        let s = h * pk * h.transpose() + aug.meas_cov;
        let k = pk * h.transpose() * s.try_inverse().unwrap();
        let xk = f * aug.state + k * (z.to_vector() - h * f * aug.state);
        let pkk = pk - k * s * k.transpose();
        assert!((xp.to_vector() - xk).amax() < 1e-8);
        assert!((pp - pkk).amax() < 1e-8);
    }

    #[test]
    fn zero_innovation_and_covariance_reduction() {
        let models = Models::standard();
        let x = TargetState::new(420.0, 3.0, 380.0, -2.0, 0.01);
        let p = Matrix5::from_diagonal(&Vector5::new(25.0, 4.0, 25.0, 4.0, 1e-3));
        let aug = AugmentedParticle::persistent(&x, &p, &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let z = Measurement::from_vector(&pred.y_pred);
        let (xp, pp) = ut_measurement_update(&pred, &z).unwrap();
        assert!((xp.to_vector() - pred.x_pred).amax() < 1e-9);
        let diff = pred.p_pred - pp;
        let eig = SymmetricEigen::new((diff + diff.transpose()) * 0.5);
        assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn degenerate_innovation_is_rejected() {
        let aug = AugmentedParticle {
            state: Vector5::new(1.0, 0.0, 1.0, 0.0, 0.0),
            state_cov: Matrix5::zeros(),
            process_cov: DMatrix::zeros(3, 3),
            meas_cov: Matrix2::zeros(),
            kind: ParticleKind::Persistent,
        };
        let pred = ut_time_update_with(&aug, &UtParams::default(), |x, _| *x, |x| Vector2::new(x[0], x[2]), false)
            .unwrap();
        assert!(matches!(
            ut_measurement_update(&pred, &Measurement::new(1.0, 1.0)),
            Err(Error::DegenerateInnovation(_))
        ));
    }

    #[test]
    fn potential_special_cases() {
        let mut models = Models::standard();
        let x = TargetState::new(420.0, 3.0, 380.0, -2.0, 0.01);
        let p = Matrix5::from_diagonal(&Vector5::new(25.0, 4.0, 25.0, 4.0, 1e-3));
        let z = measure(&ct_predict(&x, 1.0)).unwrap();

        models.sensor.p_d = 0.0;
        let aug = AugmentedParticle::persistent(&x, &p, &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        assert_eq!(predicted_potential(&pred, &z, &models.sensor, &models.motion), 0.0);

        models.sensor.p_d = 0.95;
        models.motion.sigma_eps = 0.0;
        models.motion.sigma_w = 0.0;
        let aug = AugmentedParticle::persistent(&x, &Matrix5::zeros(), &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let want = models.motion.p_s * 0.95 * models.sensor.likelihood(&z, &ct_predict(&x, 1.0)).unwrap();
        let got = predicted_potential(&pred, &z, &models.sensor, &models.motion);
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_matches_monte_carlo_integral() {
        let models = Models::standard();
        let x = TargetState::new(420.0, 3.0, 380.0, -2.0, 0.01);
        let p = Matrix5::from_diagonal(&Vector5::new(0.25, 0.04, 0.25, 0.04, 1e-6));
        let aug = AugmentedParticle::persistent(&x, &p, &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let z = Measurement::new(pred.y_pred[0] + 1.2, pred.y_pred[1] - 0.006);
        let ut = predicted_potential(&pred, &z, &models.sensor, &models.motion);

        // the particle is a Gaussian N(x, P); integrate p_S p_D L_z over the
        // predicted distribution by direct sampling
        let chol = p.cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let d = Vector5::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let x0 = TargetState::from_vector(&(x.to_vector() + chol * d));
            let x1 = models.motion.sample_transition(&x0, &mut rng);
            acc += models.sensor.likelihood(&z, &x1).unwrap();
        }
        let mc = models.motion.p_s * models.sensor.p_d * acc / n as f64;
        assert!((ut / mc - 1.0).abs() < 0.1, "ut {ut} mc {mc}");
    }

    #[test]
    fn potential_is_permutation_invariant() {
        let models = Models::standard();
        let x = TargetState::new(420.0, 3.0, 380.0, -2.0, 0.01);
        let p = Matrix5::from_diagonal(&Vector5::new(4.0, 1.0, 4.0, 1.0, 1e-4));
        let aug = AugmentedParticle::persistent(&x, &p, &models.motion, &models.sensor);
        let pred = ut_time_update(&aug, &UtParams::default(), &models.motion).unwrap();
        let z = Measurement::new(pred.y_pred[0] + 0.5, pred.y_pred[1]);
        let a = predicted_potential(&pred, &z, &models.sensor, &models.motion);
        let mut shuffled = pred.clone();
        shuffled.sigma_meas_clean[1..].reverse();
        let b = predicted_potential(&shuffled, &z, &models.sensor, &models.motion);
        assert!((a - b).abs() <= 1e-12 * a.abs());
        assert!(a > 0.0);
    }
}
