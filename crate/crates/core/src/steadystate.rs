//! Classical fixed points of the driven cavity and softened mirror.
//!
//! Eliminating the intracavity intensity and the mirror displacement leaves a
//! real cubic in the effective detuning,
//!
//! `(delta - delta_0) (kappa^2 + delta^2) + 2 g^2 kappa_ex alpha^2 / (1 - eta) = 0`,
//!
//! whose real roots are the fixed points. The cubic is solved through the
//! eigenvalues of its companion matrix and each root polished by Newton steps.

use std::f64::consts::SQRT_2;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::params::SystemSpec;

/// Roots closer than this are flagged as a degenerate (fold) pair.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Mean-field inputs in units of omega_m. `drive` is alpha_in / sqrt(omega_m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointProblem {
    pub delta_0: f64,
    pub kappa: f64,
    pub kappa_ex: f64,
    pub eta: f64,
    pub g: f64,
    pub drive: f64,
}

impl FixedPointProblem {
    pub fn from_spec(spec: &SystemSpec) -> Result<Self> {
        spec.validate()?;
        let w = spec.omega_m;
        Ok(FixedPointProblem {
            delta_0: spec.delta_0 / w,
            kappa: spec.kappa() / w,
            kappa_ex: spec.kappa_ex / w,
            eta: spec.eta / w,
            g: spec.g / w,
            drive: spec.drive_amplitude / w.sqrt(),
        })
    }

    /// Intracavity intensity |a_s|^2 at effective detuning `delta`.
    pub fn intensity(&self, delta: f64) -> f64 {
        2.0 * self.kappa_ex * self.drive * self.drive / (self.kappa * self.kappa + delta * delta)
    }

    /// Left-hand sides of the three mean-field equations at a fixed point:
    /// mirror force balance, detuning shift and the (complex) cavity balance.
    pub fn residuals(&self, fp: &ClassicalFixedPoint) -> [f64; 3] {
        let a2 = fp.a_s_re * fp.a_s_re + fp.a_s_im * fp.a_s_im;
        let force = (1.0 - self.eta) * fp.q_s - self.g * a2;
        let shift = fp.delta_eff - (self.delta_0 - self.g * fp.q_s);
        let src = (2.0 * self.kappa_ex).sqrt() * self.drive;
        let re = self.kappa * fp.a_s_re - fp.delta_eff * fp.a_s_im - src;
        let im = self.kappa * fp.a_s_im + fp.delta_eff * fp.a_s_re;
        [force, shift, re.hypot(im)]
    }

    fn cubic(&self) -> [f64; 3] {
        let c = 2.0 * self.g * self.g * self.kappa_ex * self.drive * self.drive / (1.0 - self.eta);
        let k2 = self.kappa * self.kappa;
        // monic: delta^3 + c2 delta^2 + c1 delta + c0
        [c - self.delta_0 * k2, k2, -self.delta_0]
    }
}

/// One mean-field solution. Lengths are dimensionless, rates in omega_m units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalFixedPoint {
    pub q_s: f64,
    pub p_s: f64,
    /// Complex intracavity amplitude from the cavity balance equation.
    pub a_s_re: f64,
    pub a_s_im: f64,
    pub delta_eff: f64,
    /// G built from |a_s| (the amplitude is taken real by a phase choice).
    pub g_eff: f64,
    pub branch_index: usize,
    /// Part of a root pair closer than [`DEGENERACY_TOL`].
    pub degenerate: bool,
}

impl ClassicalFixedPoint {
    pub fn amplitude(&self) -> f64 {
        self.a_s_re.hypot(self.a_s_im)
    }
}

/// G = g |a_s| sqrt(2).
pub fn effective_coupling(g: f64, a_s_magnitude: f64) -> f64 {
    g * a_s_magnitude * SQRT_2
}

/// All real fixed points, sorted by ascending effective detuning.
pub fn solve_fixed_points(problem: &FixedPointProblem) -> Result<Vec<ClassicalFixedPoint>> {
    if !(problem.eta < 1.0) {
        return Err(Error::MirrorUnbound { eta: problem.eta });
    }
    if problem.drive < 0.0 {
        return Err(Error::NegativeDrive(problem.drive));
    }
    if !(problem.kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }

    let roots = if problem.drive == 0.0 || problem.g == 0.0 {
        vec![problem.delta_0]
    } else {
        real_cubic_roots(problem.cubic())
    };

    let n = roots.len();
    let mut out = Vec::with_capacity(n);
    for (i, &delta) in roots.iter().enumerate() {
        let degenerate = (i > 0 && (delta - roots[i - 1]).abs() < DEGENERACY_TOL)
            || (i + 1 < n && (roots[i + 1] - delta).abs() < DEGENERACY_TOL);
        out.push(fixed_point_at(problem, delta, i, degenerate));
    }
    Ok(out)
}

/// The root continuously connected to the weak-drive solution (smallest |q_s|).
pub fn default_branch(points: &[ClassicalFixedPoint]) -> Option<&ClassicalFixedPoint> {
    points
        .iter()
        .min_by(|a, b| a.q_s.abs().total_cmp(&b.q_s.abs()))
}

fn fixed_point_at(
    problem: &FixedPointProblem,
    delta: f64,
    branch_index: usize,
    degenerate: bool,
) -> ClassicalFixedPoint {
    let src = (2.0 * problem.kappa_ex).sqrt() * problem.drive;
    let den = problem.kappa * problem.kappa + delta * delta;
    // a_s = src / (kappa + i delta)
    let a_s_re = src * problem.kappa / den;
    let a_s_im = -src * delta / den;
    let a2 = a_s_re * a_s_re + a_s_im * a_s_im;
    let q_s = problem.g * a2 / (1.0 - problem.eta);
    let amplitude = a2.sqrt();
    ClassicalFixedPoint {
        q_s,
        p_s: 0.0,
        a_s_re,
        a_s_im,
        delta_eff: problem.delta_0 - problem.g * q_s,
        g_eff: effective_coupling(problem.g, amplitude),
        branch_index,
        degenerate,
    }
}

/// Real roots of `x^3 + c2 x^2 + c1 x + c0`, ascending. `coeffs = [c0, c1, c2]`.
fn real_cubic_roots(coeffs: [f64; 3]) -> Vec<f64> {
    let [c0, c1, c2] = coeffs;
    let companion = Matrix3::new(
        0.0, 0.0, -c0, //
        1.0, 0.0, -c1, //
        0.0, 1.0, -c2,
    );
    let eig = companion.complex_eigenvalues();
    let scale = 1.0 + c0.abs().cbrt().max(c1.abs().sqrt()).max(c2.abs());

    let mut roots: Vec<f64> = eig
        .iter()
        // near a double root the pair picks up an O(sqrt(eps)) imaginary part
        .filter(|z| z.im.abs() <= 1e-6 * scale)
        .map(|z| polish(coeffs, z.re))
        .collect();
    if roots.is_empty() {
        // a real cubic always has one real root
        let z = eig
            .iter()
            .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
            .expect("three eigenvalues");
        roots.push(polish(coeffs, z.re));
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn polish(coeffs: [f64; 3], mut x: f64) -> f64 {
    let [c0, c1, c2] = coeffs;
    for _ in 0..8 {
        let p = ((x + c2) * x + c1) * x + c0;
        let dp = (3.0 * x + 2.0 * c2) * x + c1;
        if dp == 0.0 {
            break;
        }
        let step = p / dp;
        let next = x - step;
        if !next.is_finite() {
            break;
        }
        // stop once Newton no longer shrinks the residual
        let pn = ((next + c2) * next + c1) * next + c0;
        if pn.abs() >= p.abs() {
            break;
        }
        x = next;
    }
    x
}
