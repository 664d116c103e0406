//! Correlation measures of a two-mode Gaussian state from its symplectic
//! invariants: logarithmic negativity, mutual information and Gaussian
//! discord (measurement on the cavity mode).
//!
//! Convention: vacuum quadrature variance is 1/2, so a physical covariance
//! matrix has symplectic eigenvalues `>= 1/2`. Natural logarithms throughout.

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::lyapunov::CovarianceMatrix;

/// Roundoff allowance below the physical bound 1/2.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// `I3^2` below this routes the discord to the second closed form.
pub const I3_SQUARED_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticInvariants {
    /// det V_m (mirror block).
    pub i1: f64,
    /// det V_c (cavity block).
    pub i2: f64,
    /// det V_mc (correlation block).
    pub i3: f64,
    /// det V.
    pub i4: f64,
}

impl SymplecticInvariants {
    fn magnitude(&self) -> f64 {
        self.i1.abs() + self.i2.abs() + 2.0 * self.i3.abs()
    }

    /// `I1 + I2 + 2 I3`.
    pub fn seralian(&self) -> f64 {
        self.i1 + self.i2 + 2.0 * self.i3
    }

    /// Same quantity for the partially transposed matrix, `I1 + I2 - 2 I3`.
    pub fn seralian_pt(&self) -> f64 {
        self.i1 + self.i2 - 2.0 * self.i3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WBranch {
    /// Closed form valid when the guard ratio is at most one.
    First,
    /// The other closed form, also used when `I3 ~ 0`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discord {
    pub d_g: f64,
    pub w: f64,
    pub branch: WBranch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub invariants: SymplecticInvariants,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub nu_tilde_minus: f64,
    pub e_n: f64,
    pub i_m: f64,
    pub d_g: f64,
    pub w: f64,
    pub w_branch: WBranch,
}

impl CorrelationReport {
    pub fn entangled(&self) -> bool {
        self.nu_tilde_minus < 0.5
    }
}

fn det2(m: nalgebra::Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

pub fn invariants(v: &CovarianceMatrix) -> SymplecticInvariants {
    SymplecticInvariants {
        i1: det2(v.mirror()),
        i2: det2(v.cavity()),
        i3: det2(v.cross()),
        i4: v.0.determinant(),
    }
}

/// Discriminants within this many ulps of their operands' scale are zero.
const DISC_ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Roots `(nu_+, nu_-)` of `nu^4 - s nu^2 + I4 = 0`; `scale` bounds the
/// magnitude of the terms summed into `s`.
fn eigen_pair(s: f64, i4: f64, scale: f64) -> Result<(f64, f64)> {
    if !(i4 > 0.0) {
        return Err(Error::Unphysical(format!("det V = {i4:e} is not positive")));
    }
    let mut disc = s * s - 4.0 * i4;
    // a degenerate pair (pure states) leaves only roundoff here, whose square
    // root would split the eigenvalues by ~sqrt(eps)
    if disc.abs() <= DISC_ROUNDOFF * scale * scale.max(s.abs()) {
        disc = 0.0;
    }
    if disc < 0.0 {
        if disc < -PHYSICAL_TOL * (s * s).max(1.0) {
            return Err(Error::Unphysical(format!("negative discriminant {disc:e}")));
        }
        disc = 0.0;
    }
    let plus_sq = 0.5 * (s + disc.sqrt());
    if !(plus_sq > 0.0) {
        return Err(Error::Unphysical(format!("invariant sum {s:e} is not positive")));
    }
    // nu_+^2 nu_-^2 = I4; avoids cancellation in the smaller root
    let minus_sq = i4 / plus_sq;
    Ok((plus_sq.sqrt(), minus_sq.sqrt()))
}

fn clamp_half(nu: f64) -> f64 {
    if (0.5 - PHYSICAL_TOL..0.5).contains(&nu) {
        0.5
    } else {
        nu
    }
}

/// Symplectic eigenvalues `(nu_+, nu_-)` of V.
pub fn symplectic_eigenvalues(inv: &SymplecticInvariants) -> Result<(f64, f64)> {
    let (p, m) = eigen_pair(inv.seralian(), inv.i4, inv.magnitude())?;
    Ok((clamp_half(p), clamp_half(m)))
}

/// Logarithmic negativity and the smallest symplectic eigenvalue of the
/// partial transpose. Entangled iff `nu_tilde_minus < 1/2`.
pub fn log_negativity(inv: &SymplecticInvariants) -> Result<(f64, f64)> {
    let (_, nt) = eigen_pair(inv.seralian_pt(), inv.i4, inv.magnitude())?;
    let e_n = if nt < 0.5 { -(2.0 * nt).ln() } else { 0.0 };
    Ok((e_n, nt))
}

/// Von Neumann entropy of a single mode with symplectic eigenvalue `x`:
/// `(x + 1/2) ln(x + 1/2) - (x - 1/2) ln(x - 1/2)`.
pub fn f_function(x: f64) -> Result<f64> {
    if !(x >= 0.5 - PHYSICAL_TOL) {
        return Err(Error::EntropyDomain(x));
    }
    let y_ln_y = |y: f64| if y > 0.0 { y * y.ln() } else { 0.0 };
    Ok(y_ln_y(x + 0.5) - y_ln_y(x - 0.5))
}

fn nonnegative(name: &str, value: f64) -> Result<f64> {
    if value < -PHYSICAL_TOL {
        return Err(Error::Unphysical(format!("{name} = {value:e} is negative")));
    }
    Ok(value.max(0.0))
}

pub fn mutual_information(inv: &SymplecticInvariants) -> Result<f64> {
    let (nu_p, nu_m) = symplectic_eigenvalues(inv)?;
    mutual_information_with(inv, nu_p, nu_m)
}

fn mutual_information_with(inv: &SymplecticInvariants, nu_p: f64, nu_m: f64) -> Result<f64> {
    let i_m = f_function(inv.i1.sqrt())? + f_function(inv.i2.sqrt())?
        - f_function(nu_p)?
        - f_function(nu_m)?;
    nonnegative("mutual information", i_m)
}

/// First closed form for W; `None` when `4 I2 - 1` vanishes.
fn w_first(inv: &SymplecticInvariants) -> Option<f64> {
    let SymplecticInvariants { i1, i2, i3, i4 } = *inv;
    let den = 4.0 * i2 - 1.0;
    if den <= 0.0 {
        return None;
    }
    let rad = (4.0 * i3 * i3 + den * (4.0 * i4 - i1)).max(0.0);
    let r = (2.0 * i3.abs() + rad.sqrt()) / den;
    Some(r * r)
}

/// Second closed form, the smaller root of `I2 W^2 - b W + I1 I4 = 0`.
fn w_second(inv: &SymplecticInvariants) -> f64 {
    let SymplecticInvariants { i1, i2, i3, i4 } = *inv;
    let b = i1 * i2 + i4 - i3 * i3;
    let mut disc = (b * b - 4.0 * i1 * i2 * i4).max(0.0);
    let scale = i1 * i2 + i4.abs() + i3 * i3;
    if disc <= DISC_ROUNDOFF * scale * scale {
        disc = 0.0;
    }
    // product of the roots is I1 I4 / I2
    2.0 * i1 * i4 / (b + disc.sqrt())
}

/// Guard ratio selecting the closed form for W.
fn w_guard(inv: &SymplecticInvariants) -> f64 {
    let SymplecticInvariants { i1, i2, i3, i4 } = *inv;
    4.0 * (i1 * i2 - i4).powi(2) / ((i1 + 4.0 * i4) * (1.0 + 4.0 * i2) * i3 * i3)
}

fn select_w(inv: &SymplecticInvariants) -> (f64, WBranch) {
    if inv.i3 * inv.i3 >= I3_SQUARED_FLOOR && w_guard(inv) <= 1.0 {
        if let Some(w) = w_first(inv) {
            return (w, WBranch::First);
        }
    }
    (w_second(inv), WBranch::Second)
}

/// Gaussian discord with the measurement on the cavity mode.
pub fn gaussian_discord(inv: &SymplecticInvariants) -> Result<Discord> {
    let (nu_p, nu_m) = symplectic_eigenvalues(inv)?;
    gaussian_discord_with(inv, nu_p, nu_m)
}

fn gaussian_discord_with(inv: &SymplecticInvariants, nu_p: f64, nu_m: f64) -> Result<Discord> {
    let (w, branch) = select_w(inv);
    if !(w >= 0.25 - PHYSICAL_TOL) {
        return Err(Error::Unphysical(format!(
            "conditional determinant W = {w:e} below 1/4"
        )));
    }
    let d_g = f_function(inv.i2.sqrt())? - f_function(nu_p)? - f_function(nu_m)?
        + f_function(w.max(0.25).sqrt())?;
    Ok(Discord {
        d_g: nonnegative("discord", d_g)?,
        w,
        branch,
    })
}

/// All measures from one set of invariants.
pub fn report(v: &CovarianceMatrix) -> Result<CorrelationReport> {
    let inv = invariants(v);
    if !(inv.i1 > 0.0 && inv.i2 > 0.0) {
        return Err(Error::Unphysical("local blocks not positive definite".into()));
    }
    let (nu_plus, nu_minus) = symplectic_eigenvalues(&inv)?;
    if nu_minus < 0.5 {
        return Err(Error::Unphysical(format!(
            "symplectic eigenvalue {nu_minus} violates the uncertainty bound"
        )));
    }
    let (e_n, nu_tilde_minus) = log_negativity(&inv)?;
    let i_m = mutual_information_with(&inv, nu_plus, nu_minus)?;
    let discord = gaussian_discord_with(&inv, nu_plus, nu_minus)?;
    Ok(CorrelationReport {
        invariants: inv,
        nu_plus,
        nu_minus,
        nu_tilde_minus,
        e_n,
        i_m,
        d_g: discord.d_g,
        w: discord.w,
        w_branch: discord.branch,
    })
}

/// Symplectic eigenvalues from the spectrum of `i Ω V`, sorted ascending.
///
/// Independent of the invariant formulas; used to cross-check them.
pub fn spectral_symplectic_eigenvalues(v: &Matrix4<f64>) -> [f64; 2] {
    #[rustfmt::skip]
    let omega = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    let mut nus: Vec<f64> = (omega * v)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.im.abs())
        .collect();
    nus.sort_by(f64::total_cmp);
    // eigenvalues come in pairs ±i nu
    [0.5 * (nus[0] + nus[1]), 0.5 * (nus[2] + nus[3])]
}

/// Partial transpose on the mirror: flips the sign of its momentum.
pub fn partial_transpose(v: &Matrix4<f64>) -> Matrix4<f64> {
    let p = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, 1.0));
    p * v * p
}
