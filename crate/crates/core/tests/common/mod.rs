#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4};
use optomech::dynamics::{build_diffusion, build_drift, is_stable_eig, threshold_coupling, Stability};
use optomech::lyapunov::{integrate_moments, residual, solve_lyapunov, DEFAULT_DT};
use optomech::measures::{self, report};
use optomech::{CovarianceMatrix, ReducedParams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn squeezer(r: f64) -> Matrix2<f64> {
    Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp())
}

pub fn local(m: Matrix2<f64>, c: Matrix2<f64>) -> Matrix4<f64> {
    let mut s = Matrix4::zeros();
    s.fixed_view_mut::<2, 2>(0, 0).copy_from(&m);
    s.fixed_view_mut::<2, 2>(2, 2).copy_from(&c);
    s
}

pub fn two_mode_squeezer(r: f64) -> Matrix4<f64> {
    let (ch, sh) = (r.cosh(), r.sinh());
    Matrix4::new(
        ch, 0.0, sh, 0.0, //
        0.0, ch, 0.0, -sh, //
        sh, 0.0, ch, 0.0, //
        0.0, -sh, 0.0, ch,
    )
}

pub fn beam_splitter(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    Matrix4::new(
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, s, //
        -s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    )
}

pub fn omega() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

pub fn random_local_symplectic<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let one = |rng: &mut R| {
        rotation(rng.random_range(0.0..std::f64::consts::PI))
            * squeezer(rng.random_range(-0.8..0.8))
            * rotation(rng.random_range(0.0..std::f64::consts::PI))
    };
    let m = one(rng);
    let c = one(rng);
    local(m, c)
}

/// Random two-mode Gaussian state: symplectic image of a product thermal state.
pub fn random_physical_cm<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let a = rng.random_range(0.5..3.0);
    let b = rng.random_range(0.5..3.0);
    let thermal = Matrix4::from_diagonal(&nalgebra::Vector4::new(a, a, b, b));
    let s = random_local_symplectic(rng)
        * two_mode_squeezer(rng.random_range(0.0..1.2))
        * beam_splitter(rng.random_range(0.0..std::f64::consts::PI))
        * random_local_symplectic(rng);
    let v = s * thermal * s.transpose();
    (v + v.transpose()) * 0.5
}

/// Entropy function of a single-mode thermal state with symplectic
/// eigenvalue `x` (vacuum = 1/2).
pub fn entropy(x: f64) -> f64 {
    let up = x + 0.5;
    let down = x - 0.5;
    let tail = if down <= 0.0 { 0.0 } else { down * down.ln() };
    up * up.ln() - tail
}

/// Symplectic eigenvalues from the spectrum of Omega V, largest first.
pub fn spectrum(v: &Matrix4<f64>) -> [f64; 2] {
    let eig = (omega() * v).complex_eigenvalues();
    let mut im: Vec<f64> = eig.iter().map(|z| z.im.abs()).collect();
    im.sort_by(|a, b| b.total_cmp(a));
    [(im[0] + im[1]) / 2.0, (im[2] + im[3]) / 2.0]
}

fn blocks(v: &Matrix4<f64>) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    (
        v.fixed_view::<2, 2>(0, 0).into_owned(),
        v.fixed_view::<2, 2>(2, 2).into_owned(),
        v.fixed_view::<2, 2>(0, 2).into_owned(),
    )
}

/// Determinant of the mirror state after a pure Gaussian measurement of the
/// cavity with seed covariance rot(phi) diag(lambda, 1/lambda) rot(phi)^T / 2.
pub fn conditional_det(v: &Matrix4<f64>, ln_lambda: f64, phi: f64) -> f64 {
    let (m, c, x) = blocks(v);
    let l = ln_lambda.exp();
    let r = rotation(phi);
    let sigma = r * Matrix2::new(l, 0.0, 0.0, 1.0 / l) * r.transpose() * 0.5;
    let inv = (c + sigma).try_inverse().expect("V_c + sigma is positive definite");
    (m - x * inv * x.transpose()).determinant()
}

/// Brute-force minimum of the conditional determinant: grid search followed
/// by pattern search from the best few cells.
pub fn min_conditional_det(v: &Matrix4<f64>) -> f64 {
    let (n_l, n_p) = (121, 90);
    let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
    let mut cells = Vec::with_capacity(n_l * n_p);
    for i in 0..n_l {
        let ll = lo + (hi - lo) * i as f64 / (n_l - 1) as f64;
        for j in 0..n_p {
            let phi = std::f64::consts::PI * j as f64 / n_p as f64;
            cells.push((conditional_det(v, ll, phi), ll, phi));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cells[0].0;
    for &(d0, ll0, phi0) in cells.iter().take(4) {
        let (mut d, mut ll, mut phi) = (d0, ll0, phi0);
        let (mut step_l, mut step_p) = ((hi - lo) / n_l as f64, std::f64::consts::PI / n_p as f64);
        while step_l > 1e-10 || step_p > 1e-10 {
            let mut moved = false;
            for (dl, dp) in [(step_l, 0.0), (-step_l, 0.0), (0.0, step_p), (0.0, -step_p)] {
                let cand_l = (ll + dl).clamp(-40.0, 40.0);
                let cand = conditional_det(v, cand_l, phi + dp);
                if cand < d {
                    d = cand;
                    ll = cand_l;
                    phi += dp;
                    moved = true;
                }
            }
            if !moved {
                step_l *= 0.5;
                step_p *= 0.5;
            }
        }
        best = best.min(d);
    }
    best
}

pub fn discord_oracle(v: &Matrix4<f64>) -> f64 {
    let (_, c, _) = blocks(v);
    let [nu_p, nu_m] = spectrum(v);
    entropy(c.determinant().sqrt()) - entropy(nu_p) - entropy(nu_m)
        + entropy(min_conditional_det(v).sqrt())
}

pub fn mutual_information_oracle(v: &Matrix4<f64>) -> f64 {
    let (m, c, _) = blocks(v);
    let [nu_p, nu_m] = spectrum(v);
    entropy(m.determinant().sqrt()) + entropy(c.determinant().sqrt())
        - entropy(nu_p)
        - entropy(nu_m)
}

/// Two-mode squeezed vacuum with squeezing `r`.
pub fn tmsv(r: f64) -> Matrix4<f64> {
    let (ch, sh) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
    Matrix4::new(
        ch, 0.0, sh, 0.0, //
        0.0, ch, 0.0, -sh, //
        sh, 0.0, ch, 0.0, //
        0.0, -sh, 0.0, ch,
    )
}

/// Parameters drawn over a broad range, coupling below 95% of threshold and
/// kept only when the drift matrix is clearly stable.
pub fn random_stable_params<R: Rng>(rng: &mut R) -> ReducedParams {
    loop {
        let delta = rng.random_range(0.05..1.5);
        let kappa = rng.random_range(0.1..1.0);
        let gamma = 10f64.powf(rng.random_range(-5.0..-1.0));
        let eta = rng.random_range(0.0..0.9);
        let n_th = rng.random_range(0.0..2000.0);
        let g_thres = threshold_coupling(delta, kappa, eta).expect("delta > 0, eta < 1");
        let g = rng.random_range(0.0..0.95) * g_thres;
        let mut p = ReducedParams::reference()
            .with_delta(delta)
            .with_g_eff(g)
            .with_eta(eta)
            .with_n_th(n_th);
        p.kappa = kappa;
        p.gamma_m = gamma;
        let (verdict, max_re) = is_stable_eig(&build_drift(&p));
        if verdict == Stability::Stable && max_re < -1e-8 {
            return p;
        }
    }
}

pub fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Residual below 1e-10, integrator within 1e-6 of the direct solve and
/// nu_minus >= 1/2 - 1e-9 on `n` stable draws.
pub fn check_stable_draws(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..n {
        let p = random_stable_params(&mut rng);
        let (a, d) = (build_drift(&p), build_diffusion(&p));
        let sol = solve_lyapunov(&a, &d).map_err(|e| format!("draw {k}: {e}"))?;
        let res = residual(&a, &d, &sol.covariance);
        check(res < 1e-10, || format!("draw {k}: residual {res:e} for {p:?}"))?;

        let (_, max_re) = is_stable_eig(&a);
        let t_max = 100.0 / p.gamma_m.min(-max_re);
        let v = integrate_moments(&a, &d, &CovarianceMatrix::vacuum(), DEFAULT_DT, t_max)
            .map_err(|e| format!("draw {k}: {e} for {p:?}"))?;
        let gap = v.max_abs_diff(&sol.covariance);
        check(gap < 1e-6, || format!("draw {k}: integrator gap {gap:e} for {p:?}"))?;

        let r = report(&sol.covariance).map_err(|e| format!("draw {k}: {e}"))?;
        let nu = spectrum(&sol.covariance.0)[1];
        check(r.nu_minus >= 0.5 - 1e-9 && nu >= 0.5 - 1e-9, || {
            format!("draw {k}: nu_minus {} / {nu}", r.nu_minus)
        })?;
    }
    Ok(())
}

/// Closed-form discord against the measurement-minimization oracle.
pub fn check_discord_oracle(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..n {
        let v = random_physical_cm(&mut rng);
        let r = report(&CovarianceMatrix(v)).map_err(|e| format!("cm {k}: {e}"))?;
        let want = discord_oracle(&v);
        let err = (r.d_g - want).abs();
        check(err < 1e-4, || format!("cm {k}: D_G {} vs oracle {want}", r.d_g))?;
    }
    Ok(())
}

/// Invariant-formula nu_tilde_minus against the momentum-flip spectrum.
pub fn check_partial_transpose(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    let flip = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, 1.0));
    for k in 0..n {
        let v = random_physical_cm(&mut rng);
        let r = report(&CovarianceMatrix(v)).map_err(|e| format!("cm {k}: {e}"))?;
        let want = spectrum(&(flip * v * flip))[1];
        let err = (r.nu_tilde_minus - want).abs();
        check(err < 1e-10, || {
            format!("cm {k}: nu_tilde_minus {} vs {want}", r.nu_tilde_minus)
        })?;
    }
    Ok(())
}

/// E_N = 2r, nu_tilde_minus = exp(-2r)/2 and I_M = 2 f(cosh 2r / 2).
pub fn check_two_mode_squeezed() -> Result<(), String> {
    for r in [0.1, 0.5, 1.0] {
        let rep = report(&CovarianceMatrix(tmsv(r))).map_err(|e| e.to_string())?;
        let want_i = 2.0 * entropy((2.0 * r).cosh() / 2.0);
        let errs = [
            (rep.e_n - 2.0 * r).abs(),
            (rep.nu_tilde_minus - (-2.0 * r).exp() / 2.0).abs(),
            (rep.i_m - want_i).abs(),
        ];
        check(errs.iter().all(|e| *e < 1e-9), || {
            format!("r = {r}: errors {errs:?}")
        })?;
    }
    Ok(())
}

/// E_N, I_M and D_G unchanged by local symplectic maps.
pub fn check_local_invariance(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..n {
        let v = random_physical_cm(&mut rng);
        let s = random_local_symplectic(&mut rng);
        let a = report(&CovarianceMatrix(v)).map_err(|e| format!("cm {k}: {e}"))?;
        let b = report(&CovarianceMatrix(s * v * s.transpose()).symmetrized())
            .map_err(|e| format!("cm {k}: {e}"))?;
        let errs = [
            (a.e_n - b.e_n).abs(),
            (a.i_m - b.i_m).abs(),
            (a.d_g - b.d_g).abs(),
        ];
        check(errs.iter().all(|e| *e < 1e-10), || {
            format!("cm {k}: differences {errs:?}")
        })?;
    }
    Ok(())
}

/// 0 <= D_G <= I_M on stable steady states and random physical states.
pub fn check_discord_bounds(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for k in 0..n {
        let v = if k % 2 == 0 {
            let p = random_stable_params(&mut rng);
            solve_lyapunov(&build_drift(&p), &build_diffusion(&p))
                .map_err(|e| format!("draw {k}: {e}"))?
                .covariance
        } else {
            CovarianceMatrix(random_physical_cm(&mut rng))
        };
        let r = report(&v).map_err(|e| format!("draw {k}: {e}"))?;
        check(r.d_g >= 0.0 && r.d_g <= r.i_m, || {
            format!("draw {k}: D_G {} I_M {}", r.d_g, r.i_m)
        })?;
    }
    Ok(())
}

pub fn f_matches_oracle(x: f64) -> bool {
    (measures::f_function(x).unwrap() - entropy(x)).abs() < 1e-12 * (1.0 + entropy(x))
}
