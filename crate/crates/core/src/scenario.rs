//! Ground-truth trajectories and measurement scans.

use std::path::Path;

use nalgebra::{Matrix5, Vector5};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    ct_predict, BirthModel, ClutterRegion, Measurement, Models, MotionModel, SensorModel, TargetState,
};

const DEFAULT_SCENARIO: &str = include_str!("../data/scenario_default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub state: TargetState,
    pub appear: usize,
    pub disappear: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub sigma_r: f64,
    pub sigma_theta_deg: f64,
    #[serde(rename = "p_D")]
    pub p_d: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    #[serde(rename = "T")]
    pub dt: f64,
    pub sigma_eps: f64,
    pub sigma_w_deg: f64,
    #[serde(rename = "p_S", default = "default_p_s")]
    pub p_s: f64,
}

fn default_p_s() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSpec {
    pub mass: f64,
    pub mean: TargetState,
    pub cov_diag: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            r_min: 0.0,
            r_max: 1000.0,
            theta_min_deg: 0.0,
            theta_max_deg: 90.0,
        }
    }
}

/// Scenario file contents. Steps are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration: usize,
    pub targets: Vec<TargetSpec>,
    pub sensor: SensorSpec,
    pub motion: MotionSpec,
    pub birth: BirthSpec,
    #[serde(default)]
    pub region: RegionSpec,
}

impl ScenarioSpec {
    /// The packaged five-target scenario.
    pub fn standard() -> Self {
        Self::from_json(DEFAULT_SCENARIO).expect("packaged scenario is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.appear >= 1 && t.appear < t.disappear && t.disappear <= self.duration) {
                return Err(Error::InvalidParameter(format!(
                    "target {}: need 1 <= appear < disappear <= duration",
                    i + 1
                )));
            }
            if !t.state.is_finite() {
                return Err(Error::InvalidParameter(format!("target {}: non-finite state", i + 1)));
            }
        }
        self.models()?;
        Ok(())
    }

    pub fn models(&self) -> Result<Models> {
        let motion = MotionModel {
            dt: self.motion.dt,
            sigma_eps: self.motion.sigma_eps,
            sigma_w: self.motion.sigma_w_deg.to_radians(),
            p_s: self.motion.p_s,
        };
        motion.validate()?;
        let sensor = SensorModel {
            sigma_r: self.sensor.sigma_r,
            sigma_theta: self.sensor.sigma_theta_deg.to_radians(),
            p_d: self.sensor.p_d,
            clutter_rate: self.sensor.lambda,
            clutter_region: ClutterRegion {
                r_min: self.region.r_min,
                r_max: self.region.r_max,
                theta_min: self.region.theta_min_deg.to_radians(),
                theta_max: self.region.theta_max_deg.to_radians(),
            },
        };
        sensor.validate()?;
        let cov = Matrix5::from_diagonal(&Vector5::from_row_slice(&self.birth.cov_diag));
        let birth = BirthModel::new(self.birth.mass, self.birth.mean, cov)?;
        Ok(Models { motion, sensor, birth })
    }

    pub fn with_clutter_rate(&self, lambda: f64) -> Self {
        let mut s = self.clone();
        s.sensor.lambda = lambda;
        s
    }

    pub fn true_count(&self, step: usize) -> usize {
        self.targets
            .iter()
            .filter(|t| t.appear <= step && step < t.disappear)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Stochastic,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub id: usize,
    pub state: TargetState,
}

/// `steps[k]` holds the targets present at step `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLog {
    pub steps: Vec<Vec<TruthEntry>>,
}

impl TruthLog {
    pub fn positions(&self, step: usize) -> Vec<[f64; 2]> {
        self.steps[step - 1].iter().map(|e| e.state.position()).collect()
    }
}

/// Each target starts from its listed state at its appearance step and is
/// propagated one step at a time while present.
pub fn generate_truth<R: Rng + ?Sized>(spec: &ScenarioSpec, mode: NoiseMode, rng: &mut R) -> Result<TruthLog> {
    let models = spec.models()?;
    let mut steps = vec![Vec::new(); spec.duration];
    for (id, t) in spec.targets.iter().enumerate() {
        let mut x = t.state;
        for step in t.appear..t.disappear {
            if step > t.appear {
                x = match mode {
                    NoiseMode::Stochastic => models.motion.sample_transition(&x, rng),
                    NoiseMode::Deterministic => ct_predict(&x, models.motion.dt),
                };
            }
            steps[step - 1].push(TruthEntry { id: id + 1, state: x });
        }
    }
    Ok(TruthLog { steps })
}

/// Detections of the present targets with probability `p_D`, then Poisson
/// clutter, in shuffled order.
pub fn generate_scan<R: Rng + ?Sized>(
    truth: &[TruthEntry],
    sensor: &SensorModel,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    let mut z = Vec::with_capacity(truth.len() + sensor.clutter_rate as usize + 4);
    for e in truth {
        if rng.random::<f64>() < sensor.p_d {
            z.push(sensor.sample_measurement(&e.state, rng)?);
        }
    }
    z.extend(sensor.sample_clutter(rng));
    z.shuffle(rng);
    Ok(z)
}

/// Truth and all scans of one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRun {
    pub truth: TruthLog,
    pub scans: Vec<Vec<Measurement>>,
}

pub fn simulate<R: Rng + ?Sized>(spec: &ScenarioSpec, mode: NoiseMode, rng: &mut R) -> Result<SimulatedRun> {
    let models = spec.models()?;
    let truth = generate_truth(spec, mode, rng)?;
    let scans = truth
        .steps
        .iter()
        .map(|s| generate_scan(s, &models.sensor, rng))
        .collect::<Result<_>>()?;
    Ok(SimulatedRun { truth, scans })
}
