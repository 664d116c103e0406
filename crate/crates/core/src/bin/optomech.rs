use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optomech::params::{qubit_induced_coupling, reduce};
use optomech::steadystate::{default_branch, solve_fixed_points, FixedPointProblem};
use optomech::sweep::{
    self, default_tolerance, emit_csv, find_onset, ConfigFile, Execution, OnsetPredicate,
    OnsetSpec, SweepConfig, SweepMode, SweepRow,
};
use optomech::{Error, ReducedParams};

const EXIT_USAGE: u8 = 1;
const EXIT_UNSTABLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Steady-state entanglement, mutual information and Gaussian discord of a
/// qubit-softened optomechanical system.
#[derive(Debug, Parser)]
#[command(name = "optomech", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one parameter point.
    Point {
        #[command(flatten)]
        common: CommonArgs,
        /// Also print E_N, I_M and D_G in bits.
        #[arg(long)]
        bits: bool,
    },
    /// Stability over a (delta, G) grid.
    StabilityMap {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        axis: AxisArgs,
        #[arg(long)]
        g_min: Option<f64>,
        #[arg(long)]
        g_max: Option<f64>,
        #[arg(long)]
        g_steps: Option<usize>,
    },
    /// Correlations versus detuning.
    SweepDetuning {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        axis: AxisArgs,
    },
    /// Correlations versus effective coupling.
    SweepCoupling {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        axis: AxisArgs,
    },
    /// Correlations versus thermal occupation.
    SweepThermal {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        axis: AxisArgs,
    },
    /// Bisect for the point where entanglement or stability switches.
    Onset {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to bisect (e.g. g_eff, n_th, delta).
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long, value_parser = parse_predicate)]
        predicate: Option<OnsetPredicate>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override a fixed parameter, e.g. `--set n_th=100`.
    #[arg(long = "set", value_parser = parse_assignment)]
    set: Vec<(String, f64)>,
    /// Comma-separated eta values.
    #[arg(long, value_delimiter = ',')]
    eta_list: Option<Vec<f64>>,
    /// Evaluate grid points on the calling thread only.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct AxisArgs {
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("bad number in `{s}`"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_predicate(s: &str) -> Result<OnsetPredicate, String> {
    match s {
        "entangled" => Ok(OnsetPredicate::Entangled),
        "stable" => Ok(OnsetPredicate::Stable),
        _ => Err(format!("unknown predicate `{s}` (entangled|stable)")),
    }
}

enum Failure {
    Usage(String),
    Unstable,
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load(mode: SweepMode, common: &CommonArgs) -> Result<(SweepConfig, Execution), Failure> {
    let mut cfg = match &common.config {
        Some(path) => ConfigFile::load(path)?.resolve(Some(mode))?,
        None => SweepConfig::defaults(mode),
    };
    for (k, v) in &common.set {
        if k == "eta" {
            cfg.eta_list = vec![*v];
            continue;
        }
        if cfg.axis.as_ref().is_some_and(|a| &a.name == k) {
            return Err(Failure::Usage(format!("`{k}` is the swept axis")));
        }
        cfg.fixed.insert(k.clone(), *v);
    }
    if let Some(etas) = &common.eta_list {
        cfg.eta_list = etas.clone();
    }
    if common.output.is_some() {
        cfg.output_path = common.output.clone();
    }
    let exec = if common.serial {
        Execution::Serial
    } else {
        Execution::from_env()?
    };
    Ok((cfg, exec))
}

fn apply_axis(cfg: &mut SweepConfig, args: &AxisArgs) {
    if let Some(axis) = cfg.axis.as_mut() {
        if let Some(v) = args.min {
            axis.min = v;
        }
        if let Some(v) = args.max {
            axis.max = v;
        }
        if let Some(v) = args.steps {
            axis.steps = v;
        }
    }
}

fn open_output(cfg: &SweepConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cfg.output_path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            let f = std::fs::File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            Box::new(std::io::BufWriter::new(f))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn io_failure(cfg: &SweepConfig, source: std::io::Error) -> Failure {
    Failure::Run(Error::Io {
        path: cfg.output_path.clone().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    })
}

fn write_rows(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<(), Failure> {
    match &cfg.output_path {
        Some(path) => Ok(emit_csv(rows, path)?),
        None => sweep::write_csv(rows, std::io::stdout().lock()).map_err(|e| io_failure(cfg, e)),
    }
}

/// Parameters for `point`: physical mode when the config carries a system.
fn point_params(cfg: &SweepConfig) -> Result<ReducedParams, Failure> {
    let Some(mut system) = cfg.system else {
        let eta = cfg.eta_list[0];
        return Ok(cfg.template()?.with_eta(eta));
    };
    if let Some(qubit) = &cfg.qubit {
        let coupling = qubit_induced_coupling(qubit)?;
        if !coupling.perturbative {
            eprintln!(
                "warning: mu_q/delta_q = {:.3} is outside the perturbative regime",
                coupling.ratio
            );
        }
        system.eta = coupling.eta;
    }
    let problem = FixedPointProblem::from_spec(&system)?;
    let points = solve_fixed_points(&problem)?;
    for fp in &points {
        eprintln!(
            "fixed point {}: delta = {}, q_s = {}, |a_s| = {}, G = {}{}",
            fp.branch_index,
            sweep::format_sig(fp.delta_eff),
            sweep::format_sig(fp.q_s),
            sweep::format_sig(fp.amplitude()),
            sweep::format_sig(fp.g_eff),
            if fp.degenerate { " (degenerate)" } else { "" }
        );
    }
    let fp = default_branch(&points).expect("at least one fixed point");
    let w = system.omega_m;
    let mut p = reduce(&system, fp.delta_eff * w, fp.g_eff * w)?;
    for (k, v) in &cfg.fixed {
        p.set(k, *v)?;
    }
    Ok(p)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Point { common, bits } => {
            let (cfg, _) = load(SweepMode::Point, &common)?;
            cfg.validate()?;
            let p = point_params(&cfg)?;
            let result = sweep::run_point(&p)?;
            let mut out = open_output(&cfg)?;
            let v = &result.verdict;
            let mut lines = vec![
                ("delta", p.delta),
                ("g_eff", p.g_eff),
                ("eta", p.eta),
                ("kappa", p.kappa),
                ("gamma_m", p.gamma_m),
                ("n_th", p.n_th),
                ("stable", f64::from(u8::from(v.stable))),
                ("max_re_eig", v.max_real_eigenvalue),
                ("rh_condition_1", v.rh_condition_1),
                ("rh_condition_2", v.rh_condition_2),
            ];
            if let Ok(g) = optomech::dynamics::threshold_coupling(p.delta, p.kappa, p.eta) {
                lines.push(("g_thres", g));
            }
            if let (Some(r), Some(s)) = (result.report, result.solution) {
                lines.extend([
                    ("nu_plus", r.nu_plus),
                    ("nu_minus", r.nu_minus),
                    ("nu_tilde_minus", r.nu_tilde_minus),
                    ("E_N", r.e_n),
                    ("I_M", r.i_m),
                    ("D_G", r.d_g),
                    ("W", r.w),
                    ("condition", s.condition),
                ]);
                if bits {
                    let ln2 = std::f64::consts::LN_2;
                    lines.extend([
                        ("E_N_bits", r.e_n / ln2),
                        ("I_M_bits", r.i_m / ln2),
                        ("D_G_bits", r.d_g / ln2),
                    ]);
                }
            }
            for (k, x) in lines {
                writeln!(out, "{k} = {}", sweep::format_sig(x)).map_err(|e| io_failure(&cfg, e))?;
            }
            out.flush().map_err(|e| io_failure(&cfg, e))?;
            if !v.stable {
                return Err(Failure::Unstable);
            }
        }
        Command::StabilityMap {
            common,
            axis,
            g_min,
            g_max,
            g_steps,
        } => {
            let (mut cfg, exec) = load(SweepMode::StabilityMap, &common)?;
            apply_axis(&mut cfg, &axis);
            if let Some(g) = cfg.second_axis.as_mut() {
                g.min = g_min.unwrap_or(g.min);
                g.max = g_max.unwrap_or(g.max);
                g.steps = g_steps.unwrap_or(g.steps);
            }
            let map = sweep::stability_map(&cfg, exec)?;
            let mut out = open_output(&cfg)?;
            map.write_csv(&mut out).map_err(|e| io_failure(&cfg, e))?;
            out.flush().map_err(|e| io_failure(&cfg, e))?;
            eprintln!(
                "stable for all detunings up to G = {}; Routh-Hurwitz disagreements: {}",
                sweep::format_sig(map.uniform_stability_limit()),
                map.disagreements
            );
        }
        Command::SweepDetuning { common, axis } => {
            let (mut cfg, exec) = load(SweepMode::SweepDetuning, &common)?;
            apply_axis(&mut cfg, &axis);
            write_rows(&cfg, &sweep::sweep_detuning(&cfg, exec)?)?;
        }
        Command::SweepCoupling { common, axis } => {
            let (mut cfg, exec) = load(SweepMode::SweepCoupling, &common)?;
            apply_axis(&mut cfg, &axis);
            write_rows(&cfg, &sweep::sweep_coupling(&cfg, exec)?)?;
        }
        Command::SweepThermal { common, axis } => {
            let (mut cfg, exec) = load(SweepMode::SweepThermal, &common)?;
            apply_axis(&mut cfg, &axis);
            write_rows(&cfg, &sweep::sweep_thermal(&cfg, exec)?)?;
        }
        Command::Onset {
            common,
            axis,
            lo,
            hi,
            predicate,
            tol,
        } => {
            let (cfg, _) = load(SweepMode::Onset, &common)?;
            let field = axis
                .or_else(|| cfg.axis.as_ref().map(|a| a.name.clone()))
                .ok_or_else(|| Failure::Usage("onset needs --axis".into()))?;
            let spec = cfg.onset.clone();
            let lo = lo
                .or(spec.as_ref().map(|s| s.lo))
                .or(cfg.axis.as_ref().map(|a| a.min));
            let hi = hi
                .or(spec.as_ref().map(|s| s.hi))
                .or(cfg.axis.as_ref().map(|a| a.max));
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return Err(Failure::Usage("onset needs --lo and --hi".into()));
            };
            let spec = OnsetSpec {
                predicate: predicate
                    .or(spec.as_ref().map(|s| s.predicate))
                    .unwrap_or(OnsetPredicate::Entangled),
                lo,
                hi,
                tol: tol.or(spec.and_then(|s| s.tol)),
            };
            if cfg.eta_list.len() != 1 {
                return Err(Failure::Usage("onset takes exactly one eta".into()));
            }
            let mut template = cfg.template()?.with_eta(cfg.eta_list[0]);
            template.validate()?;
            template.set(&field, lo)?;
            let tol = spec.tol.unwrap_or_else(|| default_tolerance(&field));
            let x = find_onset(&field, spec.lo, spec.hi, &template, spec.predicate, tol)?;
            let mut out = open_output(&cfg)?;
            writeln!(out, "{field} = {}", sweep::format_sig(x)).map_err(|e| io_failure(&cfg, e))?;
            out.flush().map_err(|e| io_failure(&cfg, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unstable) => ExitCode::from(EXIT_UNSTABLE),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
