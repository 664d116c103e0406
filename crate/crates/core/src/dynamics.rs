//! Linearized fluctuation dynamics: drift and diffusion matrices, and the
//! stability of the stationary state.
//!
//! Quadrature basis is `(dq, dp, dX, dY)` with `omega_m = 1`. Stability is
//! decided by the eigenvalues of the drift matrix; the two Routh-Hurwitz
//! margins are evaluated alongside as an analytic cross-check.

use nalgebra::Matrix4;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ReducedParams;

/// Eigenvalue real parts within this band of zero are treated as marginal.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix(pub Matrix4<f64>);

/// Diagonal noise matrix `diag(0, gamma_m (2 n_th + 1), kappa, kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(pub Matrix4<f64>);

pub fn build_drift(p: &ReducedParams) -> DriftMatrix {
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0,           1.0,         0.0,      0.0,
        -(1.0 - p.eta), -p.gamma_m, p.g_eff,  0.0,
        0.0,           0.0,         -p.kappa, p.delta,
        p.g_eff,       0.0,         -p.delta, -p.kappa,
    );
    DriftMatrix(a)
}

pub fn build_diffusion(p: &ReducedParams) -> DiffusionMatrix {
    DiffusionMatrix(Matrix4::from_diagonal(&nalgebra::Vector4::new(
        0.0,
        p.gamma_m * (2.0 * p.n_th + 1.0),
        p.kappa,
        p.kappa,
    )))
}

/// Coupling at which a red-detuned system loses stability,
/// `sqrt((delta^2 + kappa^2)(1 - eta) / delta)`.
pub fn threshold_coupling(delta: f64, kappa: f64, eta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::ThresholdInapplicable(format!(
            "delta = {delta} is not red-detuned"
        )));
    }
    if !(eta < 1.0) {
        return Err(Error::ThresholdInapplicable(format!("eta = {eta} >= 1")));
    }
    Ok(((delta * delta + kappa * kappa) * (1.0 - eta) / delta).sqrt())
}

/// The two nontrivial Routh-Hurwitz margins. Positive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouthHurwitz {
    pub condition_1: f64,
    pub condition_2: f64,
}

impl RouthHurwitz {
    pub fn stable(&self) -> bool {
        self.condition_1 > 0.0 && self.condition_2 > 0.0
    }
}

/// Evaluates both margins exactly as the closed forms are usually quoted;
/// stable iff both are positive.
pub fn is_stable_rh(p: &ReducedParams) -> RouthHurwitz {
    let (d, k, g, gc, e) = (p.delta, p.kappa, p.gamma_m, p.g_eff, p.eta);
    let w = 1.0;
    let d2 = d * d;
    let bracket = d2 * d2
        + d2 * (g * g + 2.0 * g * k + 2.0 * k * k - 2.0 * w * w)
        + (g * k + k * k + w * w).powi(2);
    let condition_1 = 2.0 * g * bracket
        + gc * gc * d * w * (g + 2.0 * k).powi(2)
        + 4.0 * e * g * k * w * (d2 - g * k - k * k - w * w)
        + 2.0 * e * e * w * w * g * k;
    let condition_2 = (d2 + k * k) * w * w - e * (d2 + k * k) * w - gc * gc * d * w;
    RouthHurwitz {
        condition_1,
        condition_2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

/// Largest real part of the drift spectrum and the resulting classification.
pub fn is_stable_eig(a: &DriftMatrix) -> (Stability, f64) {
    let max_re = a
        .0
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let s = if max_re.is_nan() {
        Stability::Unstable
    } else if max_re < -MARGINAL_TOL {
        Stability::Stable
    } else if max_re <= MARGINAL_TOL {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    (s, max_re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    /// Eigenvalue verdict; marginal points are not stable.
    pub stable: bool,
    pub stability: Stability,
    pub rh_condition_1: f64,
    pub rh_condition_2: f64,
    pub max_real_eigenvalue: f64,
    /// Whether the Routh-Hurwitz margins were compared (red detuning only).
    pub rh_applicable: bool,
    /// Routh-Hurwitz and eigenvalue verdicts coincide, or the point sits
    /// within the marginal band, or the margins were not applicable.
    pub method_agreement: bool,
}

/// Full verdict: eigenvalues are authoritative, Routh-Hurwitz is compared on
/// red-detuned points.
pub fn stability(p: &ReducedParams) -> StabilityVerdict {
    let rh = is_stable_rh(p);
    let (stability, max_re) = is_stable_eig(&build_drift(p));
    let stable = stability == Stability::Stable;
    let rh_applicable = p.delta > 0.0;
    let near_boundary = max_re.abs() <= MARGINAL_TOL
        || rh.condition_1.abs() <= MARGINAL_TOL
        || rh.condition_2.abs() <= MARGINAL_TOL;
    let method_agreement = !rh_applicable || near_boundary || rh.stable() == stable;
    StabilityVerdict {
        stable,
        stability,
        rh_condition_1: rh.condition_1,
        rh_condition_2: rh.condition_2,
        max_real_eigenvalue: max_re,
        rh_applicable,
        method_agreement,
    }
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCell {
    pub delta: f64,
    pub g: f64,
    pub stable: bool,
    pub max_re_eig: f64,
    pub rh_agrees: bool,
}

/// Stability over a `(delta, G)` grid. Cells are ordered delta-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub deltas: Vec<f64>,
    pub gs: Vec<f64>,
    pub cells: Vec<StabilityCell>,
    pub disagreements: usize,
}

impl StabilityMap {
    pub fn cell(&self, i_delta: usize, i_g: usize) -> &StabilityCell {
        &self.cells[i_delta * self.gs.len() + i_g]
    }

    /// Largest grid coupling below which every grid detuning is stable,
    /// i.e. the width of the stable band common to all detunings.
    pub fn uniform_stability_limit(&self) -> f64 {
        let mut limit = f64::NAN;
        for (j, &g) in self.gs.iter().enumerate() {
            if (0..self.deltas.len()).all(|i| self.cell(i, j).stable) {
                limit = g;
            } else {
                break;
            }
        }
        limit
    }

    /// Largest stable coupling in each detuning row.
    pub fn max_stable_coupling(&self) -> Vec<f64> {
        (0..self.deltas.len())
            .map(|i| {
                (0..self.gs.len())
                    .take_while(|&j| self.cell(i, j).stable)
                    .last()
                    .map_or(f64::NAN, |j| self.gs[j])
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta,g,stable,max_re_eig")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{}",
                crate::sweep::format_sig(c.delta),
                crate::sweep::format_sig(c.g),
                u8::from(c.stable),
                crate::sweep::format_sig(c.max_re_eig)
            )?;
        }
        Ok(())
    }
}

/// Evaluates [`stability`] on every grid point, in parallel on the current
/// rayon pool. Output order is fixed by grid index.
pub fn stability_map(deltas: &[f64], gs: &[f64], template: &ReducedParams) -> StabilityMap {
    let cells: Vec<StabilityCell> = deltas
        .par_iter()
        .flat_map_iter(|&delta| {
            gs.iter().map(move |&g| {
                let p = template.with_delta(delta).with_g_eff(g);
                let v = stability(&p);
                StabilityCell {
                    delta,
                    g,
                    stable: v.stable,
                    max_re_eig: v.max_real_eigenvalue,
                    rh_agrees: v.method_agreement,
                }
            })
        })
        .collect();
    let disagreements = cells.iter().filter(|c| !c.rh_agrees).count();
    if disagreements > 0 {
        log::warn!("Routh-Hurwitz disagrees with eigenvalues at {disagreements} grid points");
    }
    StabilityMap {
        deltas: deltas.to_vec(),
        gs: gs.to_vec(),
        cells,
        disagreements,
    }
}
