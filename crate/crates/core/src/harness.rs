//! Monte-Carlo experiments, aggregation and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aux::{AuxConfig, AuxFilter, Recursion};
use crate::error::{Error, Result};
use crate::metrics::{ospa, OspaParams, OspaResult};
use crate::models::Models;
use crate::scenario::{simulate, NoiseMode, ScenarioSpec, SimulatedRun};
use crate::smc::{SmcCphdFilter, SmcConfig, SmcPhdFilter, TrackingFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    #[serde(rename = "smc-phd")]
    SmcPhd,
    #[serde(rename = "smc-cphd")]
    SmcCphd,
    #[serde(rename = "u-aphd")]
    UAphd,
    #[serde(rename = "u-acphd")]
    UAcphd,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [Self::SmcPhd, Self::SmcCphd, Self::UAphd, Self::UAcphd];

    pub fn name(self) -> &'static str {
        match self {
            Self::SmcPhd => "smc-phd",
            Self::SmcCphd => "smc-cphd",
            Self::UAphd => "u-aphd",
            Self::UAcphd => "u-acphd",
        }
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }

    pub fn build(self, models: Models, n_detected: usize, n_undetected: usize) -> Box<dyn TrackingFilter> {
        let smc = SmcConfig {
            n_survive: n_detected,
            n_birth: n_undetected,
            ..SmcConfig::default()
        };
        let aux = AuxConfig {
            n_detected,
            n_undetected,
            ..AuxConfig::default()
        };
        match self {
            Self::SmcPhd => Box::new(SmcPhdFilter::new(models, smc)),
            Self::SmcCphd => Box::new(SmcCphdFilter::new(models, smc)),
            Self::UAphd => Box::new(AuxFilter::new(models, aux, Recursion::Phd)),
            Self::UAcphd => Box::new(AuxFilter::new(models, aux, Recursion::Cphd)),
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown filter '{s}'")))
    }
}

fn default_runs() -> usize {
    25
}
fn default_filters() -> Vec<FilterKind> {
    FilterKind::ALL.to_vec()
}
fn default_rates() -> Vec<f64> {
    vec![10.0]
}
fn default_n_detected() -> usize {
    2500
}
fn default_n_undetected() -> usize {
    500
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_noise() -> NoiseMode {
    NoiseMode::Stochastic
}
fn default_true() -> bool {
    true
}

/// Everything that determines an experiment. Missing JSON fields fall back
/// to the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Scenario file; the packaged scenario when absent.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    #[serde(default = "default_filters")]
    pub filters: Vec<FilterKind>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rates")]
    pub clutter_rates: Vec<f64>,
    #[serde(default = "default_n_detected")]
    pub n_detected: usize,
    #[serde(default = "default_n_undetected")]
    pub n_undetected: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_noise")]
    pub truth_noise: NoiseMode,
    #[serde(default)]
    pub ospa: OspaParams,
    /// Wall-clock timing columns; off gives byte-reproducible summaries.
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Worker threads; the global pool when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidParameter("no filters selected".into()));
        }
        if self.n_detected == 0 || self.n_undetected == 0 {
            return Err(Error::InvalidParameter("particle budgets must be positive".into()));
        }
        if self.clutter_rates.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidParameter("clutter rates must be finite and nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        match &self.scenario {
            Some(p) => ScenarioSpec::load(p),
            None => Ok(ScenarioSpec::standard()),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive mix of seed components.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C909, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seed of the truth and scans shared by every filter in run `run`.
pub fn scenario_seed(master: u64, lambda: f64, run: usize) -> u64 {
    derive_seed(&[master, 0, lambda.to_bits(), run as u64])
}

pub fn filter_seed(master: u64, filter: FilterKind, lambda: f64, run: usize) -> u64 {
    derive_seed(&[master, filter.id(), lambda.to_bits(), run as u64])
}

/// One filter over one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ospa: Vec<OspaResult>,
    pub birth_picks: Vec<usize>,
    pub expected_count: Vec<f64>,
    pub step_seconds: Vec<f64>,
    /// `(step, message)` of the first failure, if any.
    pub divergence: Option<(usize, String)>,
}

/// Runs `filter` over a simulated run. Stops at the first failed step or
/// non-finite output and records it as a divergence.
pub fn run_filter(
    kind: FilterKind,
    models: &Models,
    sim: &SimulatedRun,
    cfg: &ExperimentConfig,
    seed: u64,
) -> RunRecord {
    let mut filter = kind.build(models.clone(), cfg.n_detected, cfg.n_undetected);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sim.scans.len();
    let mut rec = RunRecord {
        ospa: Vec::with_capacity(n),
        birth_picks: Vec::with_capacity(n),
        expected_count: Vec::with_capacity(n),
        step_seconds: Vec::with_capacity(n),
        divergence: None,
    };
    for (k, z) in sim.scans.iter().enumerate() {
        let t0 = Instant::now();
        let out = filter.step(z, &mut rng);
        let dt = t0.elapsed().as_secs_f64();
        let out = match out {
            Ok(o) if o.expected_count.is_finite() && o.estimates.iter().all(|x| x.is_finite()) => o,
            Ok(_) => {
                rec.divergence = Some((k + 1, "non-finite filter output".into()));
                break;
            }
            Err(e) => {
                rec.divergence = Some((k + 1, e.to_string()));
                break;
            }
        };
        let est: Vec<[f64; 2]> = out.estimates.iter().map(|x| x.position()).collect();
        rec.ospa.push(ospa(&sim.truth.positions(k + 1), &est, &cfg.ospa));
        rec.birth_picks.push(out.birth_picks);
        rec.expected_count.push(out.expected_count);
        rec.step_seconds.push(dt);
    }
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub ospa: f64,
    pub loc: f64,
    pub card: f64,
    pub birth_picks: f64,
    pub expected_count: f64,
}

/// Aggregate for one `(filter, lambda)` pair over the runs that completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub filter: FilterKind,
    pub lambda: f64,
    pub runs_used: usize,
    /// `(run, step, message)` for every excluded run.
    pub diverged: Vec<(usize, usize, String)>,
    pub curves: Vec<StepStats>,
    pub mean_ospa: f64,
    pub mean_loc: f64,
    pub mean_card: f64,
    /// Mean over runs of the per-run mean step time.
    pub time_mean_s: Option<f64>,
    /// Mean over runs of the per-run standard deviation of step times.
    pub time_sd_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub duration: usize,
    pub cells: Vec<CellResult>,
}

impl ResultsTable {
    pub fn cell(&self, filter: FilterKind, lambda: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.filter == filter && c.lambda == lambda)
    }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn aggregate(
    filter: FilterKind,
    lambda: f64,
    duration: usize,
    records: &[RunRecord],
    timing: bool,
) -> CellResult {
    let mut diverged = Vec::new();
    let mut good = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match &r.divergence {
            Some((step, msg)) => diverged.push((i, *step, msg.clone())),
            None => good.push(r),
        }
    }
    for (run, step, msg) in &diverged {
        log::warn!("{} at lambda {lambda}: run {run} excluded (step {step}: {msg})", filter.name());
    }
    let curves: Vec<StepStats> = (0..duration)
        .map(|k| StepStats {
            ospa: mean(good.iter().map(|r| r.ospa[k].total)),
            loc: mean(good.iter().map(|r| r.ospa[k].loc)),
            card: mean(good.iter().map(|r| r.ospa[k].card)),
            birth_picks: mean(good.iter().map(|r| r.birth_picks[k] as f64)),
            expected_count: mean(good.iter().map(|r| r.expected_count[k])),
        })
        .collect();
    let (time_mean_s, time_sd_s) = if timing && !good.is_empty() {
        let per_run: Vec<(f64, f64)> = good
            .iter()
            .map(|r| {
                let m = mean(r.step_seconds.iter().copied());
                let var = mean(r.step_seconds.iter().map(|t| (t - m) * (t - m)));
                (m, var.sqrt())
            })
            .collect();
        (
            Some(mean(per_run.iter().map(|p| p.0))),
            Some(mean(per_run.iter().map(|p| p.1))),
        )
    } else {
        (None, None)
    };
    CellResult {
        filter,
        lambda,
        runs_used: good.len(),
        diverged,
        mean_ospa: mean(curves.iter().map(|c| c.ospa)),
        mean_loc: mean(curves.iter().map(|c| c.loc)),
        mean_card: mean(curves.iter().map(|c| c.card)),
        curves,
        time_mean_s,
        time_sd_s,
    }
}

/// Runs every `(lambda, run)` pair, all selected filters on the same scans.
/// Runs go to the thread pool; results are reduced in run order, so the
/// numbers do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let spec = cfg.scenario_spec()?;
    let body = || -> Result<ResultsTable> {
        let mut cells = Vec::new();
        for &lambda in &cfg.clutter_rates {
            let spec = spec.with_clutter_rate(lambda);
            let models = spec.models()?;
            let per_run: Vec<Vec<RunRecord>> = (0..cfg.runs)
                .into_par_iter()
                .map(|run| -> Result<Vec<RunRecord>> {
                    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(cfg.seed, lambda, run));
                    let sim = simulate(&spec, cfg.truth_noise, &mut rng)?;
                    Ok(cfg
                        .filters
                        .iter()
                        .map(|&f| run_filter(f, &models, &sim, cfg, filter_seed(cfg.seed, f, lambda, run)))
                        .collect())
                })
                .collect::<Result<_>>()?;
            for (j, &f) in cfg.filters.iter().enumerate() {
                let records: Vec<RunRecord> = per_run.iter().map(|r| r[j].clone()).collect();
                cells.push(aggregate(f, lambda, spec.duration, &records, cfg.timing));
            }
        }
        Ok(ResultsTable {
            duration: spec.duration,
            cells,
        })
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(body),
        None => body(),
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn curve_file_name(filter: FilterKind, lambda: f64) -> String {
    format!("curves_{}_{}.csv", filter.name(), lambda)
}

/// Writes `summary.csv`, one curves file per cell, `divergence.csv`,
/// `results.json` and the SVG plots.
pub fn emit_report(results: &ResultsTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["filter", "lambda", "mean_ospa", "mean_loc", "mean_card", "time_mean_s", "time_sd_s"])?;
    for c in &results.cells {
        w.write_record([
            c.filter.name().to_string(),
            c.lambda.to_string(),
            c.mean_ospa.to_string(),
            c.mean_loc.to_string(),
            c.mean_card.to_string(),
            opt_cell(c.time_mean_s),
            opt_cell(c.time_sd_s),
        ])?;
    }
    w.flush()?;
    written.push(path);

    for c in &results.cells {
        let path = out_dir.join(curve_file_name(c.filter, c.lambda));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["step", "ospa", "loc", "card", "birth_picks"])?;
        for (k, s) in c.curves.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                s.ospa.to_string(),
                s.loc.to_string(),
                s.card.to_string(),
                s.birth_picks.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }

    let path = out_dir.join("divergence.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["filter", "lambda", "run", "step", "error"])?;
    for c in &results.cells {
        for (run, step, msg) in &c.diverged {
            w.write_record([
                c.filter.name().to_string(),
                c.lambda.to_string(),
                run.to_string(),
                step.to_string(),
                msg.clone(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = out_dir.join("results.json");
    fs::write(&path, serde_json::to_string_pretty(results)?)?;
    written.push(path);

    written.extend(write_plots(results, out_dir)?);
    Ok(written)
}

pub fn load_results(dir: &Path) -> Result<ResultsTable> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("results.json"))?)?)
}

/// Plain-text table of the summary cells.
pub fn format_summary(results: &ResultsTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<9} {:>7} {:>10} {:>10} {:>10} {:>5} {:>11} {:>11}",
        "filter", "lambda", "ospa", "loc", "card", "runs", "t_mean[s]", "t_sd[s]"
    );
    for c in &results.cells {
        let t = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            s,
            "{:<9} {:>7} {:>10.4} {:>10.4} {:>10.4} {:>5} {:>11} {:>11}",
            c.filter.name(),
            c.lambda,
            c.mean_ospa,
            c.mean_loc,
            c.mean_card,
            c.runs_used,
            t(c.time_mean_s),
            t(c.time_sd_s)
        );
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal SVG line chart.
pub fn svg_line_plot(title: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let (w, h, ml, mr, mt, mb) = (720.0, 420.0, 60.0, 140.0, 36.0, 44.0);
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(2);
    let y_max = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let px = |k: usize| ml + (w - ml - mr) * k as f64 / (n - 1) as f64;
    let py = |v: f64| mt + (h - mt - mb) * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            ml - 6.0,
            py(v) + 4.0,
            v
        );
    }
    for k in (0..n).step_by((n / 9).max(1)) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(k), h - mb + 16.0, k + 1);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time step</text>"#, (ml + w - mr) / 2.0, h - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ys
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, v)| format!("{:.2},{:.2}", px(k), py(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = mt + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            w - mr + 10.0,
            w - mr + 30.0,
            w - mr + 36.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_plots(results: &ResultsTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut by_lambda: BTreeMap<u64, Vec<&CellResult>> = BTreeMap::new();
    for c in &results.cells {
        by_lambda.entry(c.lambda.to_bits()).or_default().push(c);
    }
    let families: [(&str, &str, fn(&StepStats) -> f64); 4] = [
        ("ospa", "OSPA [m]", |s| s.ospa),
        ("loc", "localization [m]", |s| s.loc),
        ("card", "cardinality [m]", |s| s.card),
        ("birth_picks", "birth picks", |s| s.birth_picks),
    ];
    let mut written = Vec::new();
    for cells in by_lambda.values() {
        let lambda = cells[0].lambda;
        for (key, label, get) in families {
            let series: Vec<(String, Vec<f64>)> = cells
                .iter()
                .map(|c| (c.filter.name().to_string(), c.curves.iter().map(get).collect()))
                .collect();
            let path = out_dir.join(format!("plot_{key}_{lambda}.svg"));
            fs::write(&path, svg_line_plot(&format!("{label}, clutter rate {lambda}"), label, &series))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    step: usize,
    id: usize,
    x: f64,
    vx: f64,
    y: f64,
    vy: f64,
    w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScanRow {
    step: usize,
    r: f64,
    theta: f64,
}

#[derive(Debug, Deserialize)]
struct PositionRow {
    step: usize,
    x: f64,
    y: f64,
}

/// Writes `truth.csv` and `scans.csv` for one simulated run.
pub fn write_simulation(sim: &SimulatedRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let truth_path = out_dir.join("truth.csv");
    let mut w = csv::Writer::from_path(&truth_path)?;
    for (k, step) in sim.truth.steps.iter().enumerate() {
        for e in step {
            let s = e.state;
            w.serialize(TruthRow {
                step: k + 1,
                id: e.id,
                x: s.x,
                vx: s.vx,
                y: s.y,
                vy: s.vy,
                w: s.w,
            })?;
        }
    }
    w.flush()?;
    let scans_path = out_dir.join("scans.csv");
    let mut w = csv::Writer::from_path(&scans_path)?;
    for (k, z) in sim.scans.iter().enumerate() {
        for m in z {
            w.serialize(ScanRow {
                step: k + 1,
                r: m.r,
                theta: m.theta,
            })?;
        }
    }
    w.flush()?;
    Ok(vec![truth_path, scans_path])
}

/// Reads per-step planar positions from any CSV with `step`, `x` and `y`
/// columns.
pub fn read_positions(path: &Path) -> Result<BTreeMap<usize, Vec<[f64; 2]>>> {
    let mut out: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: PositionRow = row?;
        out.entry(r.step).or_default().push([r.x, r.y]);
    }
    Ok(out)
}

/// Per-step OSPA between two position files over the union of their steps.
pub fn ospa_between(
    truth: &BTreeMap<usize, Vec<[f64; 2]>>,
    est: &BTreeMap<usize, Vec<[f64; 2]>>,
    params: &OspaParams,
) -> Vec<(usize, OspaResult)> {
    let steps: std::collections::BTreeSet<usize> = truth.keys().chain(est.keys()).copied().collect();
    let empty = Vec::new();
    steps
        .into_iter()
        .map(|k| {
            let x = truth.get(&k).unwrap_or(&empty);
            let y = est.get(&k).unwrap_or(&empty);
            (k, ospa(x, y, params))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_component() {
        let a = filter_seed(42, FilterKind::UAcphd, 10.0, 0);
        assert_ne!(a, filter_seed(42, FilterKind::SmcCphd, 10.0, 0));
        assert_ne!(a, filter_seed(42, FilterKind::UAcphd, 50.0, 0));
        assert_ne!(a, filter_seed(42, FilterKind::UAcphd, 10.0, 1));
        assert_ne!(a, filter_seed(43, FilterKind::UAcphd, 10.0, 0));
        assert_ne!(scenario_seed(42, 10.0, 0), scenario_seed(42, 10.0, 1));
        assert_eq!(a, filter_seed(42, FilterKind::UAcphd, 10.0, 0));
    }

    #[test]
    fn filter_names_round_trip() {
        for k in FilterKind::ALL {
            assert_eq!(k.name().parse::<FilterKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("kalman".parse::<FilterKind>().is_err());
    }

    #[test]
    fn config_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.runs, c.n_detected, c.n_undetected), (25, 2500, 500));
        assert_eq!(c.filters.len(), 4);
        assert!(c.timing);
        let c: ExperimentConfig = serde_json::from_str(r#"{"runs": 0}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn aggregation_excludes_diverged_runs() {
        let good = RunRecord {
            ospa: vec![
                OspaResult { total: 10.0, loc: 10.0, card: 0.0 },
                OspaResult { total: 20.0, loc: 0.0, card: 20.0 },
            ],
            birth_picks: vec![4, 0],
            expected_count: vec![1.0, 1.0],
            step_seconds: vec![1.0, 3.0],
            divergence: None,
        };
        let bad = RunRecord {
            ospa: vec![],
            birth_picks: vec![],
            expected_count: vec![],
            step_seconds: vec![],
            divergence: Some((1, "boom".into())),
        };
        let c = aggregate(FilterKind::UAcphd, 10.0, 2, &[good.clone(), bad, good], true);
        assert_eq!(c.runs_used, 2);
        assert_eq!(c.diverged, vec![(1, 1, "boom".to_string())]);
        assert_eq!(c.mean_ospa, 15.0);
        assert_eq!(c.curves[0].birth_picks, 4.0);
        assert_eq!((c.time_mean_s, c.time_sd_s), (Some(2.0), Some(1.0)));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg_line_plot("t", "y", &[("a".into(), vec![1.0, 2.0, f64::NAN])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }
}
