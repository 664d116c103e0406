//! Stationary covariance matrix from `A V + V A^T = -D`.
//!
//! The 4×4 equation is vectorized into the 16×16 system
//! `(I ⊗ A + A ⊗ I) vec(V) = -vec(D)` and solved by LU with partial pivoting.
//! [`integrate_moments`] evolves `dV/dt = A V + V A^T + D` with fixed-step RK4
//! and serves as an independent check.

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector, SymmetricEigen};

use crate::dynamics::{is_stable_eig, DiffusionMatrix, DriftMatrix, Stability, MARGINAL_TOL};
use crate::error::{Error, Result};

type Mat16 = SMatrix<f64, 16, 16>;
type Vec16 = SVector<f64, 16>;

/// Above this 1-norm condition estimate a solve is reported as ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e12;

pub const DEFAULT_DT: f64 = 0.01;

/// Symmetric 4×4 covariance over `(dq, dp, dX, dY)`, vacuum variance 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub Matrix4<f64>);

impl CovarianceMatrix {
    /// Vacuum state, `I/2`.
    pub fn vacuum() -> Self {
        CovarianceMatrix(Matrix4::identity() * 0.5)
    }

    pub fn mirror(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn cavity(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Mirror-cavity correlation block.
    pub fn cross(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn from_blocks(mirror: Matrix2<f64>, cavity: Matrix2<f64>, cross: Matrix2<f64>) -> Self {
        let mut v = Matrix4::zeros();
        v.fixed_view_mut::<2, 2>(0, 0).copy_from(&mirror);
        v.fixed_view_mut::<2, 2>(2, 2).copy_from(&cavity);
        v.fixed_view_mut::<2, 2>(0, 2).copy_from(&cross);
        v.fixed_view_mut::<2, 2>(2, 0).copy_from(&cross.transpose());
        CovarianceMatrix(v)
    }

    pub fn symmetrized(self) -> Self {
        CovarianceMatrix((self.0 + self.0.transpose()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        (self.0 - other.0).amax()
    }
}

/// Result of a stationary solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSolution {
    pub covariance: CovarianceMatrix,
    /// 1-norm condition number of the vectorized operator.
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// `max |A V + V A^T + D|`.
pub fn residual(a: &DriftMatrix, d: &DiffusionMatrix, v: &CovarianceMatrix) -> f64 {
    moment_flow(&a.0, &d.0, &v.0).amax()
}

fn moment_flow(a: &Matrix4<f64>, d: &Matrix4<f64>, v: &Matrix4<f64>) -> Matrix4<f64> {
    a * v + v * a.transpose() + d
}

fn kron_operator(a: &Matrix4<f64>) -> Mat16 {
    // column-major vec: vec(A V) = (I ⊗ A) vec(V), vec(V A^T) = (A ⊗ I) vec(V)
    let mut k = Mat16::zeros();
    for blk in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                k[(4 * blk + i, 4 * blk + j)] += a[(i, j)];
                k[(4 * i + blk, 4 * j + blk)] += a[(i, j)];
            }
        }
    }
    k
}

fn norm1(m: &Mat16) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_diffusion(d: &DiffusionMatrix) -> Result<()> {
    let m = &d.0;
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidDiffusion("not symmetric".into()));
    }
    let min_eig = SymmetricEigen::new(*m).eigenvalues.min();
    if min_eig < -1e-12 * scale {
        return Err(Error::InvalidDiffusion(format!("negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

/// Unique symmetric solution of `A V + V A^T = -D` for strictly stable `A`.
pub fn solve_lyapunov(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<LyapunovSolution> {
    let (stability, max_re) = is_stable_eig(a);
    if stability != Stability::Stable {
        return Err(Error::NoStationaryState { max_re });
    }
    check_diffusion(d)?;

    let k = kron_operator(&a.0);
    let rhs = -Vec16::from_column_slice(d.0.as_slice());
    let lu = k.lu();
    let mut x = lu.solve(&rhs).ok_or(Error::Singular)?;
    // one step of iterative refinement
    let r = rhs - k * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let inv = lu.try_inverse().ok_or(Error::Singular)?;
    let condition = norm1(&k) * norm1(&inv);
    let ill_conditioned = !(condition <= CONDITION_LIMIT);
    if ill_conditioned {
        log::warn!("Lyapunov system ill-conditioned (cond_1 = {condition:e})");
    }

    let v = CovarianceMatrix(Matrix4::from_column_slice(x.as_slice())).symmetrized();
    Ok(LyapunovSolution {
        covariance: v,
        condition,
        ill_conditioned,
    })
}

/// One RK4 step of the moment flow.
pub fn rk4_step(a: &Matrix4<f64>, d: &Matrix4<f64>, v: &Matrix4<f64>, dt: f64) -> Matrix4<f64> {
    v + rk4_increment(a, d, v, dt)
}

fn rk4_increment(a: &Matrix4<f64>, d: &Matrix4<f64>, v: &Matrix4<f64>, dt: f64) -> Matrix4<f64> {
    let k1 = moment_flow(a, d, v);
    let k2 = moment_flow(a, d, &(v + k1 * (0.5 * dt)));
    let k3 = moment_flow(a, d, &(v + k2 * (0.5 * dt)));
    let k4 = moment_flow(a, d, &(v + k3 * dt));
    (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Affine map `x -> x + e x + c` on the 16 entries of V. Keeping `e` apart
/// from the identity preserves its precision under repeated squaring.
#[derive(Clone, Copy)]
struct AffineStep {
    e: Mat16,
    c: Vec16,
}

impl AffineStep {
    /// Applies the map `n` times by binary powering.
    fn power_apply(&self, mut n: u64, mut x: Vec16) -> Vec16 {
        let mut power = *self;
        while n > 0 {
            if n & 1 == 1 {
                x = power.apply(&x);
            }
            n >>= 1;
            if n > 0 {
                power = power.after(&power);
            }
        }
        x
    }

    fn apply(&self, x: &Vec16) -> Vec16 {
        x + (self.e * x + self.c)
    }

    /// `self` applied after `first`.
    fn after(&self, first: &AffineStep) -> AffineStep {
        AffineStep {
            e: self.e + first.e + self.e * first.e,
            c: first.c + (self.e * first.c + self.c),
        }
    }
}

fn rk4_affine(a: &DriftMatrix, d: &DiffusionMatrix, dt: f64) -> AffineStep {
    let zero = Matrix4::zeros();
    let offset = rk4_increment(&a.0, &d.0, &zero, dt);
    let mut e = Mat16::zeros();
    for idx in 0..16 {
        let mut unit = Matrix4::zeros();
        unit[idx] = 1.0;
        let col = rk4_increment(&a.0, &zero, &unit, dt);
        e.set_column(idx, &Vec16::from_column_slice(col.as_slice()));
    }
    AffineStep {
        e,
        c: Vec16::from_column_slice(offset.as_slice()),
    }
}

/// Integrates `dV/dt = A V + V A^T + D` from `v0` with `ceil(t_max / dt)`
/// fixed RK4 steps and returns `V(t_max)`.
///
/// The flow is linear with constant coefficients, so one RK4 step is an
/// affine map of V. It is extracted by stepping the 16 unit matrices and the
/// zero matrix, then applied `n` times by binary powering; the result is the
/// same state sequential stepping would reach, in `O(log n)` work.
pub fn integrate_moments(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    v0: &CovarianceMatrix,
    dt: f64,
    t_max: f64,
) -> Result<CovarianceMatrix> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::invalid("dt/t_max", "need dt > 0 and t_max >= 0"));
    }
    let (_, max_re) = is_stable_eig(a);
    if !(max_re < -MARGINAL_TOL) {
        return Err(Error::NoStationaryState { max_re });
    }
    let steps = (t_max / dt).ceil() as u64;

    let x = rk4_affine(a, d, dt).power_apply(steps, Vec16::from_column_slice(v0.0.as_slice()));

    let v = CovarianceMatrix(Matrix4::from_column_slice(x.as_slice())).symmetrized();
    let rate = residual(a, d, &v);
    if !(rate < 1e-10) {
        return Err(Error::NotConverged {
            residual: rate,
            t_max,
        });
    }
    Ok(v)
}

/// Default horizon for [`integrate_moments`]: 100 / gamma_m.
pub fn default_horizon(gamma_m: f64) -> f64 {
    100.0 / gamma_m
}
