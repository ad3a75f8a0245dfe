//! Cardinality-distribution recursion for CPHD-type filters.
//!
//! Elementary symmetric functions are kept in a scaled representation
//! (values divided by their maximum, with the log of the scale carried
//! separately) and every Upsilon term is accumulated in log space, so
//! measurement sets of a hundred points with large likelihood ratios do
//! not overflow.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation of cardinality distributions.
pub const DEFAULT_N_MAX: usize = 100;

/// Floor applied to the predicted target count in Upsilon denominators.
pub const N_PRED_FLOOR: f64 = 1e-9;

/// Relative error bound above which leave-one-out deflation is abandoned.
const DEFLATION_TOL: f64 = 1e-6;

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_TABLE];
        for k in 1..LN_FACT_TABLE {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    })
}

pub fn ln_factorial(n: usize) -> f64 {
    let t = ln_fact_table();
    if n < t.len() {
        t[n]
    } else {
        t[t.len() - 1] + ((t.len())..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// `ln(n! / (n-k)!)`, `-inf` when `k > n`.
pub fn ln_permutations(n: usize, k: usize) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_factorial(n) - ln_factorial(n - k)
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// `k * ln(x)` with the convention `0 * ln(0) = 0`.
fn ln_pow(x: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * x.ln()
    }
}

fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Probability mass over the number of targets, `p(0..=n_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityDist {
    probs: Vec<f64>,
}

impl CardinalityDist {
    /// Normalizes a nonnegative vector with positive mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("cardinality vector is empty".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("cardinality entries must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::CardinalityDegenerate);
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    pub fn delta(n: usize, n_max: usize) -> Self {
        assert!(n <= n_max, "delta at {n} outside 0..={n_max}");
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Self { probs }
    }

    /// Poisson pmf truncated at `n_max` and renormalized.
    pub fn poisson(mean: f64, n_max: usize) -> Self {
        if mean <= 0.0 {
            return Self::delta(0, n_max);
        }
        let ln_mean = mean.ln();
        let probs = (0..=n_max)
            .map(|n| (n as f64 * ln_mean - mean - ln_factorial(n)).exp())
            .collect();
        Self::new(probs).expect("poisson pmf has positive mass")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m).powi(2) * p)
            .sum()
    }

    /// Most probable cardinality (lowest index on ties).
    pub fn map_estimate(&self) -> usize {
        let mut best = 0;
        for (n, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = n;
            }
        }
        best
    }
}

/// Elementary symmetric functions `sigma_{m,0..=m}` stored as
/// `value(i) = scaled[i] * exp(i * ln_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsfVector {
    pub scaled: Vec<f64>,
    pub ln_scale: f64,
}

impl EsfVector {
    pub fn degree(&self) -> usize {
        self.scaled.len() - 1
    }

    pub fn ln_value(&self, i: usize) -> f64 {
        let s = self.scaled[i];
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            s.ln() + i as f64 * self.ln_scale
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.scaled[i] * (i as f64 * self.ln_scale).exp()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.scaled.len()).map(|i| self.value(i)).collect()
    }
}

fn scale_of(values: &[f64]) -> Result<f64> {
    let mut max = 0.0f64;
    for &v in values {
        if !(v >= 0.0) {
            return Err(Error::NegativeEsfInput(v));
        }
        max = max.max(v);
    }
    Ok(if max > 0.0 && max.is_finite() { max } else { 1.0 })
}

/// All degrees of the elementary symmetric function, by expanding
/// `prod (1 + y_j t)` one factor at a time on max-scaled inputs.
pub fn esf(values: &[f64]) -> Result<EsfVector> {
    let scale = scale_of(values)?;
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (k, &v) in values.iter().enumerate() {
        let y = v / scale;
        for i in (1..=k + 1).rev() {
            e[i] += y * e[i - 1];
        }
    }
    Ok(EsfVector {
        scaled: e,
        ln_scale: scale.ln(),
    })
}

/// ESF of `values` with entry `skip` removed, by dividing the full product
/// polynomial by `(1 + y_skip t)`. Falls back to direct recomputation when
/// the deflation error bound is too large.
pub fn esf_leave_one_out(values: &[f64], full: &EsfVector, skip: usize) -> Result<EsfVector> {
    let m = values.len();
    assert!(skip < m && full.degree() == m);
    let y = values[skip] / full.ln_scale.exp();
    let mut f = vec![0.0; m];
    f[0] = 1.0;
    let mut err = 0.0;
    let mut ok = y.is_finite();
    for i in 1..m {
        if !ok {
            break;
        }
        f[i] = full.scaled[i] - y * f[i - 1];
        err = f64::EPSILON * (full.scaled[i].abs() + (y * f[i - 1]).abs()) + y * err;
        if f[i] < 0.0 || (err > 0.0 && err > DEFLATION_TOL * f[i]) {
            ok = false;
        }
    }
    if ok {
        return Ok(EsfVector {
            scaled: f,
            ln_scale: full.ln_scale,
        });
    }
    let rest: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .map(|(_, v)| *v)
        .collect();
    esf(&rest)
}

/// `G^(i)(x) = sum_{n >= i} n!/(n-i)! p(n) x^(n-i)`.
pub fn pgf_derivative_terms(p: &CardinalityDist, x: f64, i: usize) -> f64 {
    p.probs()
        .iter()
        .enumerate()
        .skip(i)
        .filter(|(_, pn)| **pn > 0.0)
        .map(|(n, pn)| {
            let ln_x = ln_pow(x, n - i);
            if ln_x == f64::NEG_INFINITY {
                0.0
            } else {
                (ln_permutations(n, i) + pn.ln() + ln_x).exp()
            }
        })
        .sum()
}

/// Predicted cardinality: binomial thinning of the prior by the mean
/// survival probability, convolved with the birth cardinality, truncated at
/// the prior's `n_max` and renormalized.
pub fn predict_cardinality(p: &CardinalityDist, s_ps: f64, birth: &CardinalityDist) -> CardinalityDist {
    let n_max = p.n_max();
    let s = s_ps.clamp(0.0, 1.0);
    // (1/i!) G^(i)(1 - s) s^i, evaluated term-wise in log space
    let surv: Vec<f64> = (0..=n_max)
        .map(|i| {
            let terms = p.probs().iter().enumerate().skip(i).filter(|(_, pn)| **pn > 0.0).map(|(m, pn)| {
                ln_binomial(m, i) + pn.ln() + ln_pow(1.0 - s, m - i) + ln_pow(s, i)
            });
            log_sum_exp(terms).exp()
        })
        .collect();
    let mut out = vec![0.0; n_max + 1];
    for (n, slot) in out.iter_mut().enumerate() {
        *slot = (0..=n)
            .map(|i| birth.probs().get(n - i).copied().unwrap_or(0.0) * surv[i])
            .sum();
    }
    CardinalityDist::new(out).expect("predicted cardinality keeps the prior's mass")
}

/// Cardinality distribution of false alarms.
#[derive(Debug, Clone, PartialEq)]
pub enum ClutterCardinality {
    Poisson(f64),
    Pmf(Vec<f64>),
}

impl ClutterCardinality {
    /// `ln(k! p_K(k))`.
    pub fn ln_fact_pmf(&self, k: usize) -> f64 {
        match self {
            Self::Poisson(rate) => {
                if *rate <= 0.0 {
                    if k == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    -rate + k as f64 * rate.ln()
                }
            }
            Self::Pmf(p) => match p.get(k) {
                Some(&v) if v > 0.0 => ln_factorial(k) + v.ln(),
                _ => f64::NEG_INFINITY,
            },
        }
    }
}

/// Everything the Upsilon functions need besides the measurement subset.
#[derive(Debug, Clone, Copy)]
pub struct UpsilonInputs<'a> {
    /// `D[p_D L_z] / c(z)` for every measurement of the scan.
    pub linfuncs: &'a [f64],
    pub n_pred: f64,
    pub q_d: f64,
    pub clutter: &'a ClutterCardinality,
    pub p_pred: &'a CardinalityDist,
}

/// Precomputed log terms shared by every Upsilon evaluation of one scan.
#[derive(Debug, Clone)]
pub struct UpsilonTerms {
    ln_inner: Vec<f64>,
    ln_clutter: Vec<f64>,
    ln_n_pred: f64,
}

impl UpsilonTerms {
    pub fn new(inputs: &UpsilonInputs) -> Self {
        let m = inputs.linfuncs.len();
        let p = inputs.p_pred.probs();
        let n_max = inputs.p_pred.n_max();
        let ln_inner = (0..=m + 1)
            .map(|k| {
                if k > n_max {
                    return f64::NEG_INFINITY;
                }
                log_sum_exp((k..=n_max).filter(|n| p[*n] > 0.0).map(|n| {
                    ln_permutations(n, k) + ln_pow(inputs.q_d, n - k) + p[n].ln()
                }))
            })
            .collect();
        let ln_clutter = (0..=m).map(|k| inputs.clutter.ln_fact_pmf(k)).collect();
        Self {
            ln_inner,
            ln_clutter,
            ln_n_pred: inputs.n_pred.max(N_PRED_FLOOR).ln(),
        }
    }

    /// `ln Upsilon^u` for the measurement subset whose ESF is `esf`.
    pub fn ln_upsilon(&self, u: usize, esf: &EsfVector) -> f64 {
        let m = esf.degree();
        assert!(m < self.ln_clutter.len(), "subset larger than the scan");
        log_sum_exp((0..=m).map(|j| {
            self.ln_clutter[m - j] + esf.ln_value(j) - (j + u) as f64 * self.ln_n_pred + self.ln_inner[j + u]
        }))
    }
}

/// `Upsilon^u` for the given subset of linear-functional ratios. May
/// underflow to 0; use [`UpsilonTerms::ln_upsilon`] when ratios are needed.
pub fn upsilon(u: usize, subset: &[f64], inputs: &UpsilonInputs) -> Result<f64> {
    let terms = UpsilonTerms::new(inputs);
    Ok(terms.ln_upsilon(u, &esf(subset)?).exp())
}

/// Log Upsilon values needed by a CPHD corrector for one scan.
#[derive(Debug, Clone)]
pub struct UpsilonSet {
    pub ln_u0: f64,
    pub ln_u1: f64,
    /// `ln Upsilon^1(Z - {z_p})` for every measurement `p`.
    pub ln_u1_without: Vec<f64>,
}

impl UpsilonSet {
    /// `Upsilon^1(Z) / Upsilon^0(Z)`.
    pub fn missed_ratio(&self) -> f64 {
        (self.ln_u1 - self.ln_u0).exp()
    }

    /// `Upsilon^1(Z - {z_p}) / Upsilon^0(Z)`.
    pub fn detection_ratio(&self, p: usize) -> f64 {
        (self.ln_u1_without[p] - self.ln_u0).exp()
    }
}

pub fn upsilon_set(inputs: &UpsilonInputs) -> Result<UpsilonSet> {
    let terms = UpsilonTerms::new(inputs);
    let full = esf(inputs.linfuncs)?;
    let ln_u1_without = (0..inputs.linfuncs.len())
        .map(|p| Ok(terms.ln_upsilon(1, &esf_leave_one_out(inputs.linfuncs, &full, p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(UpsilonSet {
        ln_u0: terms.ln_upsilon(0, &full),
        ln_u1: terms.ln_upsilon(1, &full),
        ln_u1_without,
    })
}

/// Posterior cardinality from the predicted one and the scan's linear
/// functionals.
pub fn update_cardinality(p_pred: &CardinalityDist, inputs: &UpsilonInputs) -> Result<CardinalityDist> {
    let full = esf(inputs.linfuncs)?;
    let m = full.degree();
    let terms = UpsilonTerms::new(inputs);
    let ln_post: Vec<f64> = p_pred
        .probs()
        .iter()
        .enumerate()
        .map(|(n, pn)| {
            if *pn <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let s = log_sum_exp((0..=m.min(n)).map(|j| {
                terms.ln_clutter[m - j] + full.ln_value(j) + ln_permutations(n, j) + ln_pow(inputs.q_d, n - j)
                    - j as f64 * terms.ln_n_pred
            }));
            pn.ln() + s
        })
        .collect();
    let max = ln_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::CardinalityDegenerate);
    }
    CardinalityDist::new(ln_post.iter().map(|l| (l - max).exp()).collect())
}
