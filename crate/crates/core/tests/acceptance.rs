//! Figure-level acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and exits nonzero on any failure.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;

use optomech::dynamics::threshold_coupling;
use optomech::sweep::{
    self, curve, find_onset, locate_peak, ConfigFile, Execution, OnsetPredicate, SweepConfig,
    SweepMode, SweepRow,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> SweepConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = ConfigFile::load(&path)
        .and_then(|f| f.resolve(None))
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol + 1e-12
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sweep(cfg: &SweepConfig, exec: Execution) -> Vec<SweepRow> {
    let run = match cfg.mode {
        SweepMode::SweepDetuning => sweep::sweep_detuning,
        SweepMode::SweepCoupling => sweep::sweep_coupling,
        SweepMode::SweepThermal => sweep::sweep_thermal,
        m => panic!("{} is not a line sweep", m.name()),
    };
    run(cfg, exec).expect("sweep runs")
}

/// Samples of one measure along an eta curve; unstable points become NaN.
fn series(rows: &[SweepRow], eta: f64, pick: fn(&sweep::RowMeasures) -> f64) -> (Vec<f64>, Vec<f64>) {
    let c = curve(rows, eta);
    let xs = c.iter().map(|r| r.axis_value).collect();
    let ys = c.iter().map(|r| r.measures.as_ref().map_or(f64::NAN, pick)).collect();
    (xs, ys)
}

fn threshold() -> Outcome {
    let a = threshold_coupling(0.51, 0.5, 0.6).map_err(|e| e.to_string())?;
    let b = threshold_coupling(0.8, 0.5, 0.0).map_err(|e| e.to_string())?;
    let reported_gap = (b - 1.03).abs() / 1.03;
    verdict(
        within(a, 0.6325, 0.005) && within(b, 1.0547, 1e-3) && reported_gap <= 0.05,
        format!("G_thres(0.51, eta 0.6) = {a:.5}, G_thres(0.8, eta 0) = {b:.5} ({:.1}% from 1.03)", 100.0 * reported_gap),
    )
}

fn negativity_peaks() -> Outcome {
    let rows = sweep(&config("fig3a.toml"), Execution::Parallel(0));
    let mut ok = true;
    let mut detail = Vec::new();
    for (eta, e_n, at) in [(0.0, 0.18, 0.80), (0.6, 0.34, 0.51)] {
        let (xs, ys) = series(&rows, eta, |m| m.e_n);
        let p = locate_peak(&xs, &ys).ok_or("no stable points")?;
        ok &= within(p.value, e_n, 0.02) && within(p.location, at, 0.03);
        detail.push(format!("eta {eta}: E_N max {:.4} at delta {:.4}", p.value, p.location));
    }
    verdict(ok, detail.join("; "))
}

fn coupling_onsets() -> Outcome {
    let cfg = config("fig3b.toml");
    let mut ok = true;
    let mut detail = Vec::new();
    for (eta, want) in [(0.0, 0.24), (0.6, 0.18)] {
        let template = cfg.template().map_err(|e| e.to_string())?.with_eta(eta);
        let g = find_onset("g_eff", 0.0, 0.6, &template, OnsetPredicate::Entangled, 1e-4)
            .map_err(|e| e.to_string())?;
        ok &= within(g, want, 0.02);
        detail.push(format!("eta {eta}: G_c = {g:.4}"));
    }
    verdict(ok, detail.join("; "))
}

fn thermal_extinction() -> Outcome {
    let cfg = config("fig4.toml");
    let rows = sweep(&cfg, Execution::Parallel(0));
    let mut ok = true;
    let mut detail = Vec::new();
    for (eta, want) in [(0.0, 6626.0), (0.6, 11752.0)] {
        let template = cfg.template().map_err(|e| e.to_string())?.with_eta(eta);
        let n = find_onset("n_th", 0.0, 30000.0, &template, OnsetPredicate::Entangled, 1.0)
            .map_err(|e| e.to_string())?;
        let (_, ys) = series(&rows, eta, |m| m.e_n);
        let positive: Vec<f64> = ys.iter().copied().take_while(|y| *y > 0.0).collect();
        let decreasing = positive.windows(2).all(|w| w[1] < w[0]);
        let gap = (n - want).abs() / want;
        ok &= gap <= 0.05 && decreasing && positive.len() > 1;
        detail.push(format!(
            "eta {eta}: extinction at n_th = {n:.1} ({:+.2}% from {want}), decreasing over {} points: {decreasing}",
            100.0 * (n - want) / want,
            positive.len()
        ));
    }
    verdict(ok, detail.join("; "))
}

fn information_and_discord() -> Outcome {
    let rows = sweep(&config("fig5.toml"), Execution::Parallel(0));
    let mut detail = Vec::new();

    let (xs, i_m) = series(&rows, 0.6, |m| m.i_m);
    let (_, d_g) = series(&rows, 0.6, |m| m.d_g);
    let pi = locate_peak(&xs, &i_m).ok_or("no stable points")?;
    let pd = locate_peak(&xs, &d_g).ok_or("no stable points")?;
    let mut ok = within(pi.value, 1.29, 0.05)
        && within(pi.location, 0.49, 0.03)
        && within(pd.value, 0.20, 0.03)
        && within(pd.location, 0.80, 0.05);
    detail.push(format!(
        "eta 0.6: I_M max {:.4} at {:.4}, D_G max {:.4} at {:.4}",
        pi.value, pi.location, pd.value, pd.location
    ));

    let (_, i_m) = series(&rows, 0.0, |m| m.i_m);
    let (_, d_g) = series(&rows, 0.0, |m| m.d_g);
    let falling = |ys: &[f64]| ys.iter().all(|y| y.is_finite()) && ys.windows(2).all(|w| w[1] < w[0]);
    let eta0 = falling(&i_m) && falling(&d_g);
    ok &= eta0;
    detail.push(format!(
        "eta 0: I_M {:.4} -> {:.4}, D_G {:.4} -> {:.4}, decreasing: {eta0}",
        i_m[0],
        i_m[i_m.len() - 1],
        d_g[0],
        d_g[d_g.len() - 1]
    ));
    verdict(ok, detail.join("; "))
}

fn stability_maps() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, want) in [("fig2a.toml", 1.0), ("fig2b.toml", 0.63)] {
        let map = sweep::stability_map(&config(name), Execution::Parallel(0)).map_err(|e| e.to_string())?;
        let g = map.uniform_stability_limit();
        ok &= within(g, want, 0.005) && map.disagreements == 0;
        detail.push(format!(
            "{name}: stable at every detuning up to G = {g:.3}, {} of {} cells disagree",
            map.disagreements,
            map.cells.len()
        ));
    }
    verdict(ok, detail.join("; "))
}

fn property_suite() -> Outcome {
    common::check_stable_draws(101, 50)?;
    common::check_partial_transpose(102, 100)?;
    common::check_discord_oracle(103, 20)?;
    common::check_two_mode_squeezed()?;
    common::check_local_invariance(104, 100)?;
    common::check_discord_bounds(105, 100)?;
    Ok("stable draws, partial transpose, discord oracle, squeezed closed forms, local invariance, discord bounds".into())
}

fn csv_bytes(cfg: &SweepConfig, exec: Execution) -> Vec<u8> {
    let mut buf = Vec::new();
    if cfg.mode == SweepMode::StabilityMap {
        sweep::stability_map(cfg, exec).unwrap().write_csv(&mut buf).unwrap();
    } else {
        sweep::write_csv(&sweep(cfg, exec), &mut buf).unwrap();
    }
    buf
}

fn determinism() -> Outcome {
    let names = ["fig2a.toml", "fig2b.toml", "fig3a.toml", "fig3b.toml", "fig4.toml", "fig5.toml"];
    let mut bad = Vec::new();
    for name in names {
        let cfg = config(name);
        let first = csv_bytes(&cfg, Execution::Parallel(0));
        let again = csv_bytes(&cfg, Execution::Parallel(3));
        let serial = csv_bytes(&cfg, Execution::Serial);
        if first != again || first != serial {
            bad.push(name);
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} configs byte-identical across repeated, threaded and serial runs", names.len())
        } else {
            format!("output differs for {bad:?}")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("threshold coupling", threshold),
        ("negativity peaks vs detuning", negativity_peaks),
        ("entanglement onset vs coupling", coupling_onsets),
        ("thermal extinction", thermal_extinction),
        ("mutual information and discord", information_and_discord),
        ("stability maps", stability_maps),
        ("property suite", property_suite),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} [{tag}] {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
