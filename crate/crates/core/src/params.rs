//! Physical parameters, unit normalization and the qubit-induced softening.
//!
//! Everything downstream of this module works in units where the mechanical
//! angular frequency is one. SI quantities only appear in [`SystemSpec`] and
//! [`QubitSpec`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const K_B: f64 = 1.380_649e-23;

/// Above this ratio mu_q / delta_q the second-order expansion is flagged.
pub const PERTURBATIVE_RATIO_LIMIT: f64 = 0.1;

/// Raw cavity, mirror, drive and coupling parameters. Rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub omega_m: f64,
    pub quality_factor: f64,
    pub kappa_ex: f64,
    pub kappa_0: f64,
    /// Single-photon optomechanical coupling.
    pub g: f64,
    /// Mirror-qubit softening coefficient.
    #[serde(default)]
    pub eta: f64,
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// Bare detuning omega_c - omega_l.
    #[serde(default)]
    pub delta_0: f64,
    /// Input field amplitude alpha_in, in sqrt(photons/s).
    #[serde(default)]
    pub drive_amplitude: f64,
}

impl SystemSpec {
    /// Mirror and cavity of the reference device: 10 MHz mechanical mode,
    /// Q = 1e5, 5 MHz cavity linewidth, 0.6 K bath. Coupling, detuning and
    /// drive are left at zero.
    pub fn reference() -> Self {
        SystemSpec {
            omega_m: 2.0 * PI * 10.0e6,
            quality_factor: 1.0e5,
            kappa_ex: 2.0 * PI * 5.0e6,
            kappa_0: 0.0,
            g: 0.0,
            eta: 0.0,
            temperature: 0.6,
            delta_0: 0.0,
            drive_amplitude: 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_0
    }

    pub fn gamma_m(&self) -> f64 {
        self.omega_m / self.quality_factor
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0) {
            return Err(Error::invalid("omega_m", "must be > 0"));
        }
        if !(self.quality_factor > 0.0) {
            return Err(Error::invalid("quality_factor", "must be > 0"));
        }
        if !(self.kappa_ex >= 0.0) || !(self.kappa_0 >= 0.0) {
            return Err(Error::invalid("kappa_ex/kappa_0", "must be >= 0"));
        }
        if !(self.kappa() > 0.0) {
            return Err(Error::invalid("kappa", "kappa_ex + kappa_0 must be > 0"));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta", "must be >= 0"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::invalid("temperature", "must be >= 0"));
        }
        if !(self.drive_amplitude >= 0.0) {
            return Err(Error::invalid("drive_amplitude", "must be >= 0"));
        }
        if !self.g.is_finite() || !self.delta_0.is_finite() {
            return Err(Error::invalid("g/delta_0", "must be finite"));
        }
        Ok(())
    }
}

/// Auxiliary qubit: level splitting and linear coupling to the mirror position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub delta_q: f64,
    pub mu_q: f64,
}

/// Softening coefficient produced by a [`QubitSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitCoupling {
    /// eta in rad/s.
    pub eta: f64,
    /// mu_q / delta_q.
    pub ratio: f64,
    /// False when the ratio exceeds [`PERTURBATIVE_RATIO_LIMIT`].
    pub perturbative: bool,
}

/// Dimensionless working parameters, all rates in units of omega_m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    /// Effective detuning.
    pub delta: f64,
    pub kappa: f64,
    /// kappa_ex / kappa.
    pub kappa_ex_frac: f64,
    pub gamma_m: f64,
    /// Effective (field-enhanced) coupling G.
    pub g_eff: f64,
    pub eta: f64,
    pub n_th: f64,
}

impl ReducedParams {
    /// Reference device at zero detuning and zero coupling:
    /// kappa = 0.5, gamma_m = 1e-5, n_th from T = 0.6 K.
    pub fn reference() -> Self {
        let spec = SystemSpec::reference();
        reduce(&spec, 0.0, 0.0).expect("reference spec is valid")
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_g_eff(mut self, g_eff: f64) -> Self {
        self.g_eff = g_eff;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_n_th(mut self, n_th: f64) -> Self {
        self.n_th = n_th;
        self
    }

    /// Reads a field by its name; used by sweeps and config files.
    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "delta" => self.delta,
            "kappa" => self.kappa,
            "kappa_ex_frac" => self.kappa_ex_frac,
            "gamma_m" => self.gamma_m,
            "g_eff" => self.g_eff,
            "eta" => self.eta,
            "n_th" => self.n_th,
            _ => return None,
        })
    }

    pub fn set(&mut self, field: &str, value: f64) -> Result<()> {
        let slot = match field {
            "delta" => &mut self.delta,
            "kappa" => &mut self.kappa,
            "kappa_ex_frac" => &mut self.kappa_ex_frac,
            "gamma_m" => &mut self.gamma_m,
            "g_eff" => &mut self.g_eff,
            "eta" => &mut self.eta,
            "n_th" => &mut self.n_th,
            _ => return Err(Error::Config(format!("unknown parameter `{field}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub const FIELDS: [&'static str; 7] = [
        "delta",
        "kappa",
        "kappa_ex_frac",
        "gamma_m",
        "g_eff",
        "eta",
        "n_th",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if !(self.gamma_m > 0.0) {
            return Err(Error::invalid("gamma_m", "must be > 0"));
        }
        if !(self.g_eff >= 0.0) {
            return Err(Error::invalid("g_eff", "must be >= 0"));
        }
        if !(self.n_th >= 0.0) {
            return Err(Error::invalid("n_th", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.kappa_ex_frac) {
            return Err(Error::invalid("kappa_ex_frac", "must lie in [0, 1]"));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta", "must be >= 0"));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        Ok(())
    }
}

/// Bose-Einstein occupation of the mechanical mode. Exactly zero at T = 0.
pub fn mean_thermal_occupation(temperature: f64, omega_m: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega_m / (K_B * temperature)).exp_m1()
}

/// Spring softening from second-order coupling to a qubit prepared in a
/// sigma_x eigenstate: eta = 4 delta_q (mu_q / delta_q)^2.
pub fn qubit_induced_coupling(qubit: &QubitSpec) -> Result<QubitCoupling> {
    if !(qubit.delta_q > 0.0) {
        return Err(Error::invalid("delta_q", "must be > 0"));
    }
    if !(qubit.mu_q >= 0.0) {
        return Err(Error::invalid("mu_q", "must be >= 0"));
    }
    let ratio = qubit.mu_q / qubit.delta_q;
    let perturbative = ratio <= PERTURBATIVE_RATIO_LIMIT;
    if !perturbative {
        log::warn!(
            "mu_q/delta_q = {ratio:.3} exceeds {PERTURBATIVE_RATIO_LIMIT}; \
             second-order softening may be inaccurate"
        );
    }
    Ok(QubitCoupling {
        eta: 4.0 * qubit.delta_q * ratio * ratio,
        ratio,
        perturbative,
    })
}

/// Normalizes to omega_m = 1. `delta_eff` and `g_eff` are in rad/s.
pub fn reduce(spec: &SystemSpec, delta_eff: f64, g_eff: f64) -> Result<ReducedParams> {
    spec.validate()?;
    let w = spec.omega_m;
    let kappa = spec.kappa();
    Ok(ReducedParams {
        delta: delta_eff / w,
        kappa: kappa / w,
        kappa_ex_frac: spec.kappa_ex / kappa,
        gamma_m: spec.gamma_m() / w,
        g_eff: g_eff / w,
        eta: spec.eta / w,
        n_th: mean_thermal_occupation(spec.temperature, w),
    })
}
