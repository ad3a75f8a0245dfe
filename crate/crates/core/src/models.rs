//! Target dynamics, sensor, birth and clutter models.
//!
//! Targets follow the nearly-constant-turn model with state
//! `[x, vx, y, vy, w]` and are observed by a range/bearing sensor at the
//! origin. Clutter is Poisson with a uniform spatial density over a
//! range x bearing box.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix2, Matrix3, Matrix5, Matrix5x3, Vector2, Vector3, Vector5};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this turn rate (rad/s) the turn matrix uses its constant-velocity limit.
pub const TURN_RATE_EPS: f64 = 1e-6;

/// Largest residual outside the noise-gain column space that still counts as
/// a reachable transition.
pub const TRANSITION_RESIDUAL_TOL: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Planar target state: position (m), velocity (m/s) and turn rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 5]", into = "[f64; 5]")]
pub struct TargetState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
    pub w: f64,
}

impl TargetState {
    pub const fn new(x: f64, vx: f64, y: f64, vy: f64, w: f64) -> Self {
        Self { x, vx, y, vy, w }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.x, self.vx, self.y, self.vy, self.w)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 5]> for TargetState {
    fn from(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

impl From<TargetState> for [f64; 5] {
    fn from(s: TargetState) -> Self {
        [s.x, s.vx, s.y, s.vy, s.w]
    }
}

/// Range (m) and bearing (rad) observation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Measurement {
    pub r: f64,
    pub theta: f64,
}

impl Measurement {
    pub const fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.r, self.theta)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Turn matrix `F(w)` for sampling period `dt`.
pub fn turn_matrix(w: f64, dt: f64) -> Matrix5<f64> {
    let (s, c) = (w * dt).sin_cos();
    let (s_over_w, one_minus_c_over_w) = if w.abs() < TURN_RATE_EPS {
        (dt, 0.0)
    } else {
        (s / w, (1.0 - c) / w)
    };
    #[rustfmt::skip]
    let f = Matrix5::new(
        1.0, s_over_w,            0.0, -one_minus_c_over_w, 0.0,
        0.0, c,                   0.0, -s,                  0.0,
        0.0, one_minus_c_over_w,  1.0, s_over_w,            0.0,
        0.0, s,                   0.0, c,                   0.0,
        0.0, 0.0,                 0.0, 0.0,                 1.0,
    );
    f
}

/// Noise gain `G` mapping `[acc_x, acc_y, turn]` noise into the state.
pub fn noise_gain(dt: f64) -> Matrix5x3<f64> {
    let h = 0.5 * dt * dt;
    #[rustfmt::skip]
    let g = Matrix5x3::new(
        h,   0.0, 0.0,
        dt,  0.0, 0.0,
        0.0, h,   0.0,
        0.0, dt,  0.0,
        0.0, 0.0, 1.0,
    );
    g
}

/// Deterministic nearly-constant-turn prediction `F(w) x`.
pub fn ct_predict(x: &TargetState, dt: f64) -> TargetState {
    TargetState::from_vector(&(turn_matrix(x.w, dt) * x.to_vector()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub dt: f64,
    pub sigma_eps: f64,
    pub sigma_w: f64,
    pub p_s: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            dt: 1.0,
            sigma_eps: 0.1,
            sigma_w: PI / 180.0,
            p_s: 0.99,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_w >= 0.0) {
            return Err(Error::InvalidParameter("noise std must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_s) {
            return Err(Error::InvalidParameter(format!("p_S must lie in [0,1], got {}", self.p_s)));
        }
        Ok(())
    }

    pub fn noise_cov(&self) -> Matrix3<f64> {
        let e = self.sigma_eps * self.sigma_eps;
        Matrix3::from_diagonal(&Vector3::new(e, e, self.sigma_w * self.sigma_w))
    }

    pub fn gain(&self) -> Matrix5x3<f64> {
        noise_gain(self.dt)
    }

    /// `F(w) x + G eps` for an explicit noise vector.
    pub fn propagate(&self, x: &Vector5<f64>, eps: &Vector3<f64>) -> Vector5<f64> {
        turn_matrix(x[4], self.dt) * x + self.gain() * eps
    }

    pub fn sample_transition<R: Rng + ?Sized>(&self, x: &TargetState, rng: &mut R) -> TargetState {
        let eps = Vector3::new(
            self.sigma_eps * rng.sample::<f64, _>(StandardNormal),
            self.sigma_eps * rng.sample::<f64, _>(StandardNormal),
            self.sigma_w * rng.sample::<f64, _>(StandardNormal),
        );
        TargetState::from_vector(&self.propagate(&x.to_vector(), &eps))
    }

    /// Noise coordinates `(G'G)^-1 G' (x_next - F x_prev)` and the norm of the
    /// residual that lies outside the column space of `G`.
    pub fn noise_coordinates(&self, next: &TargetState, prev: &TargetState) -> (Vector3<f64>, f64) {
        let g = self.gain();
        let resid = next.to_vector() - turn_matrix(prev.w, self.dt) * prev.to_vector();
        let gtg = g.transpose() * g;
        // G'G is diagonal and positive for any dt > 0.
        let eps = gtg.try_inverse().expect("G'G is invertible") * g.transpose() * resid;
        let orth = resid - g * eps;
        (eps, orth.amax())
    }

    fn ln_noise_density(&self, eps: &Vector3<f64>) -> f64 {
        let vars = [
            self.sigma_eps * self.sigma_eps,
            self.sigma_eps * self.sigma_eps,
            self.sigma_w * self.sigma_w,
        ];
        let mut ln = -1.5 * LN_2PI;
        for k in 0..3 {
            ln -= 0.5 * (vars[k].ln() + eps[k] * eps[k] / vars[k]);
        }
        ln
    }

    /// Transition density evaluated on the three noise coordinates. Returns 0
    /// when `next` cannot be reached from `prev` through the noise gain.
    pub fn eval_transition_density(&self, next: &TargetState, prev: &TargetState) -> f64 {
        let (eps, orth) = self.noise_coordinates(next, prev);
        if orth > TRANSITION_RESIDUAL_TOL {
            return 0.0;
        }
        self.ln_noise_density(&eps).exp()
    }

    /// Same 3-dim Gaussian, but the out-of-column-space residual is discarded
    /// (least-squares projection onto the noise coordinates).
    pub fn projected_transition_density(&self, next: &TargetState, prev: &TargetState) -> f64 {
        let (eps, _) = self.noise_coordinates(next, prev);
        self.ln_noise_density(&eps).exp()
    }
}

/// Range/bearing box over which clutter is uniformly distributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterRegion {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for ClutterRegion {
    fn default() -> Self {
        Self {
            r_min: 0.0,
            r_max: 1000.0,
            theta_min: 0.0,
            theta_max: PI / 2.0,
        }
    }
}

impl ClutterRegion {
    pub fn area(&self) -> f64 {
        (self.r_max - self.r_min) * (self.theta_max - self.theta_min)
    }

    pub fn contains(&self, z: &Measurement) -> bool {
        let th = self.theta_min + (z.theta - self.theta_min).rem_euclid(2.0 * PI);
        z.r >= self.r_min && z.r <= self.r_max && th <= self.theta_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub sigma_r: f64,
    pub sigma_theta: f64,
    pub p_d: f64,
    pub clutter_rate: f64,
    pub clutter_region: ClutterRegion,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            sigma_r: 1.0,
            sigma_theta: 0.5 * PI / 180.0,
            p_d: 0.95,
            clutter_rate: 10.0,
            clutter_region: ClutterRegion::default(),
        }
    }
}

/// Range and two-argument bearing of a position relative to the origin.
pub fn measure(x: &TargetState) -> Result<Measurement> {
    if x.x == 0.0 && x.y == 0.0 {
        return Err(Error::BearingUndefined);
    }
    Ok(Measurement::new(x.x.hypot(x.y), x.y.atan2(x.x)))
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r > 0.0 && self.sigma_theta > 0.0) {
            return Err(Error::InvalidParameter("measurement noise std must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(Error::InvalidParameter(format!("p_D must lie in [0,1], got {}", self.p_d)));
        }
        if !(self.clutter_rate >= 0.0) {
            return Err(Error::InvalidParameter("clutter rate must be nonnegative".into()));
        }
        if !(self.clutter_region.area() > 0.0) {
            return Err(Error::InvalidParameter("clutter region must have positive area".into()));
        }
        Ok(())
    }

    pub fn q_d(&self) -> f64 {
        1.0 - self.p_d
    }

    pub fn noise_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_r * self.sigma_r, 0.0, 0.0, self.sigma_theta * self.sigma_theta)
    }

    /// Gaussian likelihood of `z` given a noise-free predicted measurement.
    #[inline]
    pub fn likelihood_from_predicted(&self, z: &Measurement, predicted: &Measurement) -> f64 {
        let dr = (z.r - predicted.r) / self.sigma_r;
        let dt = wrap_angle(z.theta - predicted.theta) / self.sigma_theta;
        let q = dr * dr + dt * dt;
        // exp underflows to zero well before this
        if q > 1500.0 {
            return 0.0;
        }
        (-0.5 * q).exp() / (2.0 * PI * self.sigma_r * self.sigma_theta)
    }

    pub fn likelihood(&self, z: &Measurement, x: &TargetState) -> Result<f64> {
        Ok(self.likelihood_from_predicted(z, &measure(x)?))
    }

    /// Spatial clutter density `c(z)`.
    pub fn clutter_density(&self, z: &Measurement) -> f64 {
        if self.clutter_region.contains(z) {
            1.0 / self.clutter_region.area()
        } else {
            0.0
        }
    }

    /// Clutter intensity `lambda * c(z)`.
    pub fn clutter_intensity(&self, z: &Measurement) -> f64 {
        self.clutter_rate * self.clutter_density(z)
    }

    pub fn sample_clutter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Measurement> {
        let count = if self.clutter_rate > 0.0 {
            Poisson::new(self.clutter_rate)
                .expect("positive rate")
                .sample(rng) as usize
        } else {
            0
        };
        let reg = &self.clutter_region;
        (0..count)
            .map(|_| {
                Measurement::new(
                    rng.random_range(reg.r_min..reg.r_max),
                    rng.random_range(reg.theta_min..reg.theta_max),
                )
            })
            .collect()
    }

    /// Noisy measurement of a target (detection assumed).
    pub fn sample_measurement<R: Rng + ?Sized>(&self, x: &TargetState, rng: &mut R) -> Result<Measurement> {
        let m = measure(x)?;
        let r = m.r + self.sigma_r * rng.sample::<f64, _>(StandardNormal);
        let theta = m.theta + self.sigma_theta * rng.sample::<f64, _>(StandardNormal);
        Ok(Measurement::new(r.max(0.0), theta))
    }
}

/// Gaussian birth intensity `b(x) = mass * N(x; mean, cov)`.
#[derive(Debug, Clone)]
pub struct BirthModel {
    mass: f64,
    mean: TargetState,
    cov: Matrix5<f64>,
    chol: Matrix5<f64>,
    ln_norm: f64,
}

impl BirthModel {
    pub fn new(mass: f64, mean: TargetState, cov: Matrix5<f64>) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!("birth mass must be positive, got {mass}")));
        }
        let asym = (cov - cov.transpose()).amax();
        if asym > 1e-9 * cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::InvalidParameter("birth covariance must be positive definite".into()))?
            .l();
        let ln_det: f64 = chol.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(Self {
            mass,
            mean,
            cov,
            chol,
            ln_norm: -2.5 * LN_2PI - 0.5 * ln_det,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mean(&self) -> &TargetState {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix5<f64> {
        &self.cov
    }

    pub fn sample_birth<R: Rng + ?Sized>(&self, rng: &mut R) -> TargetState {
        let n = Vector5::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        TargetState::from_vector(&(self.mean.to_vector() + self.chol * n))
    }

    /// `ln N(x; mean, cov)` (the normalized birth density `b(x)/b[1]`).
    pub fn ln_density(&self, x: &TargetState) -> f64 {
        let d = x.to_vector() - self.mean.to_vector();
        let u = self
            .chol
            .solve_lower_triangular(&d)
            .expect("cholesky factor is nonsingular");
        self.ln_norm - 0.5 * u.norm_squared()
    }

    pub fn eval_birth_intensity(&self, x: &TargetState) -> f64 {
        self.mass * self.ln_density(x).exp()
    }
}

/// Everything a filter needs to know about the world.
#[derive(Debug, Clone)]
pub struct Models {
    pub motion: MotionModel,
    pub sensor: SensorModel,
    pub birth: BirthModel,
}

impl Models {
    /// Reference models with the birth intensity centred in the square.
    pub fn standard() -> Self {
        let cov = Matrix5::from_diagonal(&Vector5::new(
            15.0 * 15.0,
            5.0 * 5.0,
            15.0 * 15.0,
            5.0 * 5.0,
            0.1 * 0.1,
        ));
        Self {
            motion: MotionModel::default(),
            sensor: SensorModel::default(),
            birth: BirthModel::new(0.05, TargetState::new(500.0, 0.0, 500.0, 0.0, 0.0), cov)
                .expect("default birth model is valid"),
        }
    }
}
