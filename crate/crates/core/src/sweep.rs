//! Parameter sweeps, threshold bisection and CSV output.
//!
//! A sweep evaluates the full pipeline (stability → stationary covariance →
//! correlation measures) on a one-dimensional grid for each softening value
//! in `eta_list`. Rows are ordered eta-major and are identical whether the
//! grid is evaluated serially or on a thread pool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::dynamics::{self, build_diffusion, build_drift, linspace, StabilityVerdict};
use crate::error::{Error, Result};
use crate::lyapunov::{solve_lyapunov, LyapunovSolution};
use crate::measures::{report, CorrelationReport};
use crate::params::{QubitSpec, ReducedParams, SystemSpec};

/// Environment variable holding the worker count for sweeps.
pub const THREADS_ENV: &str = "OPTOMECH_THREADS";

pub const CSV_HEADER: &str = "axis,eta,stable,E_N,I_M,D_G,nu_tilde_minus,cond_flag";

pub const DEFAULT_ETA_LIST: [f64; 4] = [0.0, 0.2, 0.4, 0.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    StabilityMap,
    SweepDetuning,
    SweepCoupling,
    SweepThermal,
    Point,
    Onset,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::StabilityMap => "stability-map",
            SweepMode::SweepDetuning => "sweep-detuning",
            SweepMode::SweepCoupling => "sweep-coupling",
            SweepMode::SweepThermal => "sweep-thermal",
            SweepMode::Point => "point",
            SweepMode::Onset => "onset",
        }
    }

    /// Field swept by a one-dimensional sweep mode.
    pub fn axis_field(self) -> Option<&'static str> {
        match self {
            SweepMode::SweepDetuning | SweepMode::StabilityMap => Some("delta"),
            SweepMode::SweepCoupling => Some("g_eff"),
            SweepMode::SweepThermal => Some("n_th"),
            SweepMode::Point | SweepMode::Onset => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, steps: usize) -> Self {
        Axis {
            name: name.to_string(),
            min,
            max,
            steps,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.steps)
    }

    pub fn validate(&self) -> Result<()> {
        if ReducedParams::FIELDS.iter().all(|f| *f != self.name) {
            return Err(Error::Config(format!("unknown axis `{}`", self.name)));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("axis `{}`: steps must be >= 2", self.name)));
        }
        if !(self.min < self.max) {
            return Err(Error::Config(format!("axis `{}`: need min < max", self.name)));
        }
        Ok(())
    }
}

/// Which property a threshold bisection tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsetPredicate {
    /// Stable and `nu_tilde_minus < 1/2`.
    Entangled,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsetSpec {
    pub predicate: OnsetPredicate,
    pub lo: f64,
    pub hi: f64,
    pub tol: Option<f64>,
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Overrides applied to the reference parameters.
    pub fixed: BTreeMap<String, f64>,
    pub axis: Option<Axis>,
    /// Coupling axis of a stability map.
    pub second_axis: Option<Axis>,
    pub eta_list: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub onset: Option<OnsetSpec>,
    /// Physical-mode input for `point`.
    pub system: Option<SystemSpec>,
    pub qubit: Option<QubitSpec>,
}

impl SweepConfig {
    /// Default grids and fixed values for each mode.
    pub fn defaults(mode: SweepMode) -> Self {
        let mut fixed = BTreeMap::new();
        let (axis, second_axis, eta_list) = match mode {
            SweepMode::SweepDetuning => {
                fixed.insert("g_eff".to_string(), 0.6);
                (Some(Axis::new("delta", 0.05, 1.2, 231)), None, DEFAULT_ETA_LIST.to_vec())
            }
            SweepMode::SweepCoupling => {
                fixed.insert("delta".to_string(), 0.5);
                (Some(Axis::new("g_eff", 0.0, 0.6, 241)), None, DEFAULT_ETA_LIST.to_vec())
            }
            SweepMode::SweepThermal => {
                fixed.insert("delta".to_string(), 0.5);
                fixed.insert("g_eff".to_string(), 0.6);
                (Some(Axis::new("n_th", 0.0, 14000.0, 281)), None, DEFAULT_ETA_LIST.to_vec())
            }
            SweepMode::StabilityMap => (
                Some(Axis::new("delta", 0.0, 1.2, 241)),
                Some(Axis::new("g_eff", 0.0, 1.2, 241)),
                vec![0.0],
            ),
            SweepMode::Point | SweepMode::Onset => (None, None, vec![0.0]),
        };
        SweepConfig {
            mode,
            fixed,
            axis,
            second_axis,
            eta_list,
            output_path: None,
            onset: None,
            system: None,
            qubit: None,
        }
    }

    /// Reference parameters with `fixed` applied (eta left at its default).
    pub fn template(&self) -> Result<ReducedParams> {
        let mut p = ReducedParams::reference();
        for (k, v) in &self.fixed {
            p.set(k, *v)?;
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for key in self.fixed.keys() {
            if ReducedParams::FIELDS.iter().all(|f| f != key) {
                return Err(Error::Config(format!("unknown fixed parameter `{key}`")));
            }
        }
        if self.eta_list.is_empty() {
            return Err(Error::Config("eta_list is empty".into()));
        }
        if let Some(axis) = &self.axis {
            axis.validate()?;
            if self.fixed.contains_key(&axis.name) {
                return Err(Error::Config(format!(
                    "axis `{}` is also listed in fixed",
                    axis.name
                )));
            }
            if axis.name == "eta" {
                return Err(Error::Config("sweep eta through eta_list".into()));
            }
        }
        match self.mode {
            SweepMode::SweepDetuning | SweepMode::SweepCoupling | SweepMode::SweepThermal => {
                let want = self.mode.axis_field().expect("sweep mode has an axis");
                match &self.axis {
                    Some(a) if a.name == want => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "{} requires axis `{want}`",
                            self.mode.name()
                        )))
                    }
                }
            }
            SweepMode::StabilityMap => {
                if self.eta_list.len() != 1 {
                    return Err(Error::Config("stability-map takes exactly one eta".into()));
                }
                match (&self.axis, &self.second_axis) {
                    (Some(a), Some(b)) if a.name == "delta" && b.name == "g_eff" => {
                        b.validate()?;
                    }
                    _ => {
                        return Err(Error::Config(
                            "stability-map requires axis `delta` and second_axis `g_eff`".into(),
                        ))
                    }
                }
            }
            SweepMode::Onset => {
                if self.axis.is_none() && self.onset.is_none() {
                    return Err(Error::Config("onset requires an axis and an onset spec".into()));
                }
            }
            SweepMode::Point => {}
        }
        self.template()?.validate()
    }
}

/// On-disk form of [`SweepConfig`]; every key is optional and missing keys
/// fall back to the mode defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<SweepMode>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub axis: Option<Axis>,
    pub second_axis: Option<Axis>,
    pub eta_list: Option<Vec<f64>>,
    pub output_path: Option<PathBuf>,
    pub onset: Option<OnsetSpec>,
    pub system: Option<SystemSpec>,
    pub qubit: Option<QubitSpec>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Resolves against the defaults of `mode` (or of the file's own mode).
    pub fn resolve(self, mode: Option<SweepMode>) -> Result<SweepConfig> {
        let mode = match (mode, self.mode) {
            (Some(m), Some(f)) if m != f => {
                return Err(Error::Config(format!(
                    "config is for `{}`, not `{}`",
                    f.name(),
                    m.name()
                )))
            }
            (Some(m), _) | (None, Some(m)) => m,
            (None, None) => return Err(Error::Config("no mode given".into())),
        };
        let mut cfg = SweepConfig::defaults(mode);
        if let Some(axis) = self.axis {
            cfg.fixed.remove(&axis.name);
            cfg.axis = Some(axis);
        }
        cfg.fixed.extend(self.fixed);
        if self.second_axis.is_some() {
            cfg.second_axis = self.second_axis;
        }
        if let Some(etas) = self.eta_list {
            cfg.eta_list = etas;
        }
        cfg.output_path = self.output_path;
        cfg.onset = self.onset;
        cfg.system = self.system;
        cfg.qubit = self.qubit;
        Ok(cfg)
    }
}

/// Full pipeline output for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub params: ReducedParams,
    pub verdict: StabilityVerdict,
    /// Present only for stable points.
    pub solution: Option<LyapunovSolution>,
    pub report: Option<CorrelationReport>,
}

/// Stability → stationary covariance → measures. Unstable and marginal
/// points carry no measures.
pub fn run_point(p: &ReducedParams) -> Result<PointResult> {
    p.validate()?;
    let verdict = dynamics::stability(p);
    if !verdict.stable {
        return Ok(PointResult {
            params: *p,
            verdict,
            solution: None,
            report: None,
        });
    }
    let solution = solve_lyapunov(&build_drift(p), &build_diffusion(p))?;
    let report = report(&solution.covariance)?;
    Ok(PointResult {
        params: *p,
        verdict,
        solution: Some(solution),
        report: Some(report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMeasures {
    pub e_n: f64,
    pub i_m: f64,
    pub d_g: f64,
    pub nu_tilde_minus: f64,
}

/// One CSV line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub eta: f64,
    pub stable: bool,
    /// `None` exactly when the point is not stable.
    pub measures: Option<RowMeasures>,
    pub condition_flag: bool,
}

impl SweepRow {
    pub fn from_point(axis_value: f64, point: &PointResult) -> Self {
        SweepRow {
            axis_value,
            eta: point.params.eta,
            stable: point.verdict.stable,
            measures: point.report.map(|r| RowMeasures {
                e_n: r.e_n,
                i_m: r.i_m,
                d_g: r.d_g,
                nu_tilde_minus: r.nu_tilde_minus,
            }),
            condition_flag: point.solution.is_some_and(|s| s.ill_conditioned),
        }
    }
}

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Thread pool with this many workers; 0 means available parallelism.
    Parallel(usize),
}

impl Execution {
    /// Worker count from [`THREADS_ENV`], defaulting to available parallelism.
    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(s) => {
                let n: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV}={s} is not a count")))?;
                Ok(if n == 1 { Execution::Serial } else { Execution::Parallel(n) })
            }
            Err(_) => Ok(Execution::Parallel(0)),
        }
    }

    pub fn map<T, U, F>(self, items: &[T], f: F) -> Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U> + Sync + Send,
    {
        match self {
            Execution::Serial => items.iter().map(f).collect(),
            Execution::Parallel(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                pool.install(|| items.par_iter().map(f).collect())
            }
        }
    }
}

/// Evaluates `axis` for every eta in `eta_list` (eta outer, axis inner).
pub fn sweep_axis(
    template: &ReducedParams,
    axis: &Axis,
    eta_list: &[f64],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    axis.validate()?;
    let values = axis.values();
    let jobs: Vec<(f64, f64)> = eta_list
        .iter()
        .flat_map(|&eta| values.iter().map(move |&x| (eta, x)))
        .collect();
    exec.map(&jobs, |&(eta, x)| {
        let mut p = template.with_eta(eta);
        p.set(&axis.name, x)?;
        Ok(SweepRow::from_point(x, &run_point(&p)?))
    })
}

fn sweep_mode(cfg: &SweepConfig, mode: SweepMode, exec: Execution) -> Result<Vec<SweepRow>> {
    if cfg.mode != mode {
        return Err(Error::Config(format!(
            "expected a `{}` config, got `{}`",
            mode.name(),
            cfg.mode.name()
        )));
    }
    cfg.validate()?;
    let axis = cfg.axis.as_ref().expect("validated");
    sweep_axis(&cfg.template()?, axis, &cfg.eta_list, exec)
}

pub fn sweep_detuning(cfg: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    sweep_mode(cfg, SweepMode::SweepDetuning, exec)
}

pub fn sweep_coupling(cfg: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    sweep_mode(cfg, SweepMode::SweepCoupling, exec)
}

pub fn sweep_thermal(cfg: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    sweep_mode(cfg, SweepMode::SweepThermal, exec)
}

/// Stability map for a validated `stability-map` config.
pub fn stability_map(cfg: &SweepConfig, exec: Execution) -> Result<dynamics::StabilityMap> {
    if cfg.mode != SweepMode::StabilityMap {
        return Err(Error::Config(format!(
            "expected a `stability-map` config, got `{}`",
            cfg.mode.name()
        )));
    }
    cfg.validate()?;
    let template = cfg.template()?.with_eta(cfg.eta_list[0]);
    let deltas = cfg.axis.as_ref().expect("validated").values();
    let gs = cfg.second_axis.as_ref().expect("validated").values();
    let threads = match exec {
        Execution::Serial => 1,
        Execution::Parallel(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let map = pool.install(|| dynamics::stability_map(&deltas, &gs, &template));
    Ok(map)
}

/// Default bisection tolerance for an axis: 1 for `n_th`, 1e-4 otherwise.
pub fn default_tolerance(field: &str) -> f64 {
    if field == "n_th" {
        1.0
    } else {
        1e-4
    }
}

fn predicate_holds(p: &ReducedParams, predicate: OnsetPredicate) -> Result<bool> {
    let point = run_point(p)?;
    Ok(match predicate {
        OnsetPredicate::Stable => point.verdict.stable,
        OnsetPredicate::Entangled => point.report.is_some_and(|r| r.entangled()),
    })
}

/// Bisects `field` on `[lo, hi]` for the point where `predicate` flips and
/// returns the midpoint of the final bracket (width below `tol`).
pub fn find_onset(
    field: &str,
    lo: f64,
    hi: f64,
    template: &ReducedParams,
    predicate: OnsetPredicate,
    tol: f64,
) -> Result<f64> {
    if template.get(field).is_none() {
        return Err(Error::Config(format!("unknown onset axis `{field}`")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("onset tolerance must be > 0".into()));
    }
    let eval = |x: f64| {
        let mut p = *template;
        p.set(field, x)?;
        predicate_holds(&p, predicate)
    };
    let (mut a, mut b) = (lo, hi);
    let at_a = eval(a)?;
    if at_a == eval(b)? {
        return Err(Error::NoSignChange { lo, hi });
    }
    while (b - a).abs() >= tol {
        let mid = 0.5 * (a + b);
        if eval(mid)? == at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub location: f64,
    pub value: f64,
    /// Grid index of the discrete maximum.
    pub index: usize,
}

/// Discrete maximum of `ys`, refined by the parabola through it and its two
/// neighbours when both exist. Non-finite samples are skipped.
pub fn locate_peak(xs: &[f64], ys: &[f64]) -> Option<Peak> {
    let index = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?
        .0;
    let (x1, y1) = (xs[index], ys[index]);
    if index == 0 || index + 1 >= ys.len() || !ys[index - 1].is_finite() || !ys[index + 1].is_finite()
    {
        return Some(Peak {
            location: x1,
            value: y1,
            index,
        });
    }
    let (x0, y0, x2, y2) = (xs[index - 1], ys[index - 1], xs[index + 1], ys[index + 1]);
    // vertex of the interpolating parabola
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv < 0.0) {
        return Some(Peak {
            location: x1,
            value: y1,
            index,
        });
    }
    let location = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    let value = y1 + d01 * (location - x1) + curv * (location - x0) * (location - x1);
    Some(Peak {
        location,
        value,
        index,
    })
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_line(row: &SweepRow) -> String {
    let mut line = String::new();
    let _ = write!(
        line,
        "{},{},{}",
        format_sig(row.axis_value),
        format_sig(row.eta),
        u8::from(row.stable)
    );
    match row.measures {
        Some(m) => {
            for v in [m.e_n, m.i_m, m.d_g, m.nu_tilde_minus] {
                let _ = write!(line, ",{}", format_sig(v));
            }
        }
        None => line.push_str(",NA,NA,NA,NA"),
    }
    let _ = write!(line, ",{}", u8::from(row.condition_flag));
    line
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", csv_line(row))?;
    }
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(rows, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Parses a file produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad number `{s}`")))
    };
    let flag = |s: &str| -> Result<bool> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::Config(format!("bad flag `{s}`"))),
        }
    };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Config(format!("expected 8 fields: `{line}`")));
            }
            let measures = if f[3] == "NA" {
                None
            } else {
                Some(RowMeasures {
                    e_n: num(f[3])?,
                    i_m: num(f[4])?,
                    d_g: num(f[5])?,
                    nu_tilde_minus: num(f[6])?,
                })
            };
            Ok(SweepRow {
                axis_value: num(f[0])?,
                eta: num(f[1])?,
                stable: flag(f[2])?,
                measures,
                condition_flag: flag(f[7])?,
            })
        })
        .collect()
}

/// Rows of one eta curve.
pub fn curve(rows: &[SweepRow], eta: f64) -> Vec<SweepRow> {
    rows.iter().filter(|r| r.eta == eta).copied().collect()
}
