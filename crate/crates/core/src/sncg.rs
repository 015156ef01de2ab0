//! Dual semismooth Newton-CG solver for the strongly convex subproblems
//!
//! ```text
//! min_{x,z}  f(z) + h(x) + (γ₁/2)‖x − x_ref‖² + (γ₂/2)‖z − z_ref‖²   s.t.  Ax − z = b
//! ```
//!
//! with `f` the averaged ℓ1 loss and `h(x) = ‖ω∘x‖₁ + (μ/2)‖x‖²`. The
//! solver works on the smooth convex dual in `u ∈ ℝⁿ`, whose gradient is
//! `Φ(u) = P f(z_ref + u/γ₂) − A P h(x_ref − Aᵀu/γ₁) + b`, and recovers the
//! primal pair through the two proximal maps.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, norm_sq, DenseMatrix};
use crate::penalty::{prox_l1_scaled_into, prox_weighted_l1_ridge_into};
use crate::problem::{l1_loss, ProblemInstance};

/// One inner convex problem.
#[derive(Debug, Clone)]
pub struct SubproblemSpec<'a> {
    pub inst: &'a ProblemInstance,
    /// Proximal center on the `x` side.
    pub x_ref: Vec<f64>,
    /// Proximal center on the `z` side (`Ax_ref − b` inside the MM loop).
    pub z_ref: Vec<f64>,
    /// Nonnegative ℓ1 weights.
    pub omega: Vec<f64>,
    pub mu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl<'a> SubproblemSpec<'a> {
    pub fn new(
        inst: &'a ProblemInstance,
        x_ref: Vec<f64>,
        z_ref: Vec<f64>,
        omega: Vec<f64>,
        mu: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self> {
        Error::check_len("x_ref", inst.p(), x_ref.len())?;
        Error::check_len("z_ref", inst.n(), z_ref.len())?;
        Error::check_len("omega", inst.p(), omega.len())?;
        if !(gamma1 > 0.0 && gamma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma1, gamma2 must be > 0, got {gamma1}, {gamma2}"
            )));
        }
        if !(mu >= 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
        }
        if omega.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("omega must be nonnegative".into()));
        }
        Ok(SubproblemSpec {
            inst,
            x_ref,
            z_ref,
            omega,
            mu,
            gamma1,
            gamma2,
        })
    }

    fn a(&self) -> &DenseMatrix {
        self.inst.a()
    }

    fn n(&self) -> usize {
        self.inst.n()
    }

    /// `f(z) + h(x) + (γ₁/2)‖x − x_ref‖² + (γ₂/2)‖z − z_ref‖²`.
    pub fn primal_value(&self, x: &[f64], z: &[f64]) -> f64 {
        l1_loss(z)
            + h_value(x, &self.omega, self.mu)
            + 0.5 * self.gamma1 * crate::linalg::dist_sq(x, &self.x_ref)
            + 0.5 * self.gamma2 * crate::linalg::dist_sq(z, &self.z_ref)
    }

    /// Linear term that makes the dual value and `Φ` a consistent
    /// function/gradient pair: `z_ref − A x_ref + b` (zero when
    /// `z_ref = A x_ref − b`).
    fn dual_shift(&self) -> Vec<f64> {
        let ax = self.a().matvec(&self.x_ref);
        self.z_ref
            .iter()
            .zip(&ax)
            .zip(self.inst.b())
            .map(|((z, ax), b)| z - ax + b)
            .collect()
    }
}

fn h_value(x: &[f64], omega: &[f64], mu: f64) -> f64 {
    x.iter().zip(omega).map(|(xi, wi)| wi * xi.abs()).sum::<f64>() + 0.5 * mu * norm_sq(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SncgConfig {
    pub tau_bar: f64,
    pub eta_bar: f64,
    /// Backtracking factor.
    pub delta: f64,
    pub armijo_c: f64,
    pub j_max: usize,
    pub eps_sncg: f64,
    pub cg_max: usize,
    pub backtrack_max: usize,
}

impl Default for SncgConfig {
    fn default() -> Self {
        SncgConfig {
            tau_bar: 0.1,
            eta_bar: 0.1,
            delta: 0.5,
            armijo_c: 1e-4,
            j_max: 50,
            eps_sncg: 1e-5,
            cg_max: 300,
            backtrack_max: 30,
        }
    }
}

impl SncgConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.tau_bar) || !unit(self.eta_bar) || !unit(self.delta) {
            return Err(Error::InvalidParameter(
                "tau_bar, eta_bar and delta must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return Err(Error::InvalidParameter("armijo_c must lie in (0, 1/2)".into()));
        }
        if !(self.eps_sncg > 0.0) {
            return Err(Error::InvalidParameter("eps_sncg must be > 0".into()));
        }
        Ok(())
    }
}

/// Quantities at one dual point.
struct DualPoint {
    atu: Vec<f64>,
    x_arg: Vec<f64>,
    x: Vec<f64>,
    z_arg: Vec<f64>,
    z: Vec<f64>,
}

impl DualPoint {
    fn zeros(n: usize, p: usize) -> Self {
        DualPoint {
            atu: vec![0.0; p],
            x_arg: vec![0.0; p],
            x: vec![0.0; p],
            z_arg: vec![0.0; n],
            z: vec![0.0; n],
        }
    }

    /// Fills the proximal arguments and images given `u` and `Aᵀu`
    /// (already stored in `self.atu`).
    fn refresh(&mut self, u: &[f64], spec: &SubproblemSpec) {
        let (g1, g2) = (spec.gamma1, spec.gamma2);
        for ((xa, xr), atu) in self.x_arg.iter_mut().zip(&spec.x_ref).zip(&self.atu) {
            *xa = xr - atu / g1;
        }
        prox_weighted_l1_ridge_into(&self.x_arg, &spec.omega, spec.mu, g1, &mut self.x);
        for ((za, zr), ui) in self.z_arg.iter_mut().zip(&spec.z_ref).zip(u) {
            *za = zr + ui / g2;
        }
        prox_l1_scaled_into(&self.z_arg, spec.n(), g2, &mut self.z);
    }

    fn dual_value(&self, u: &[f64], shift: &[f64], spec: &SubproblemSpec) -> f64 {
        let (g1, g2) = (spec.gamma1, spec.gamma2);
        let env_f = l1_loss(&self.z) + 0.5 * g2 * crate::linalg::dist_sq(&self.z, &self.z_arg);
        let env_h = h_value(&self.x, &spec.omega, spec.mu)
            + 0.5 * g1 * crate::linalg::dist_sq(&self.x, &self.x_arg);
        norm_sq(u) / (2.0 * g2) - env_f - env_h + norm_sq(&self.atu) / (2.0 * g1) + dot(u, shift)
    }
}

fn eval_point(u: &[f64], spec: &SubproblemSpec) -> DualPoint {
    let mut pt = DualPoint::zeros(spec.n(), spec.inst.p());
    spec.a().tr_matvec_into(u, &mut pt.atu);
    pt.refresh(u, spec);
    pt
}

fn gradient_at(pt: &DualPoint, spec: &SubproblemSpec) -> Vec<f64> {
    let ax = spec.a().matvec(&pt.x);
    pt.z
        .iter()
        .zip(&ax)
        .zip(spec.inst.b())
        .map(|((z, ax), b)| z - ax + b)
        .collect()
}

/// Dual objective value at `u`.
pub fn dual_value(u: &[f64], spec: &SubproblemSpec) -> Result<f64> {
    Error::check_len("u", spec.n(), u.len())?;
    let pt = eval_point(u, spec);
    Ok(pt.dual_value(u, &spec.dual_shift(), spec))
}

/// `Φ(u)`, the gradient of [`dual_value`].
pub fn dual_gradient(u: &[f64], spec: &SubproblemSpec) -> Result<Vec<f64>> {
    Error::check_len("u", spec.n(), u.len())?;
    Ok(gradient_at(&eval_point(u, spec), spec))
}

/// Diagonals of one element of the Clarke generalized Jacobian of `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianDiag {
    /// 1 where the loss-side soft-threshold is active, else 0.
    pub udiag: Vec<f64>,
    /// `γ₁/(γ₁+μ)` where the `x`-side threshold is active, else 0.
    pub vdiag: Vec<f64>,
}

impl JacobianDiag {
    fn active_columns(&self) -> Vec<(usize, f64)> {
        self.vdiag
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }
}

fn diagonals_at(pt: &DualPoint, spec: &SubproblemSpec) -> JacobianDiag {
    let thr = 1.0 / (spec.n() as f64 * spec.gamma2);
    let udiag = pt
        .z_arg
        .iter()
        .map(|v| if v.abs() > thr { 1.0 } else { 0.0 })
        .collect();
    let g1 = spec.gamma1;
    let scale = g1 / (g1 + spec.mu);
    // |γ₁ x_ref − Aᵀu| = γ₁ |x_arg|.
    let vdiag = pt
        .x_arg
        .iter()
        .zip(&spec.omega)
        .map(|(xa, w)| if (g1 * xa).abs() > *w { scale } else { 0.0 })
        .collect();
    JacobianDiag { udiag, vdiag }
}

/// Picks the 0 endpoint of every Clarke interval at kinks.
pub fn jacobian_diagonals(u: &[f64], spec: &SubproblemSpec) -> Result<JacobianDiag> {
    Error::check_len("u", spec.n(), u.len())?;
    Ok(diagonals_at(&eval_point(u, spec), spec))
}

/// Matrix-free `W d = γ₂⁻¹ U d + γ₁⁻¹ A V Aᵀ d`.
pub fn apply_w(d: &[f64], diags: &JacobianDiag, spec: &SubproblemSpec) -> Vec<f64> {
    let mut out = vec![0.0; d.len()];
    WOperator::new(diags, spec, 0.0).apply(d, &mut out);
    out
}

/// `W + τI` restricted to the active columns.
struct WOperator<'s, 'a> {
    spec: &'s SubproblemSpec<'a>,
    udiag: &'s [f64],
    active: Vec<(usize, f64)>,
    tau: f64,
}

impl<'s, 'a> WOperator<'s, 'a> {
    fn new(diags: &'s JacobianDiag, spec: &'s SubproblemSpec<'a>, tau: f64) -> Self {
        WOperator {
            spec,
            udiag: &diags.udiag,
            active: diags.active_columns(),
            tau,
        }
    }

    fn apply(&self, d: &[f64], out: &mut [f64]) {
        let inv_g2 = 1.0 / self.spec.gamma2;
        for ((o, di), ui) in out.iter_mut().zip(d).zip(self.udiag) {
            *o = (inv_g2 * ui + self.tau) * di;
        }
        let a = self.spec.a();
        let inv_g1 = 1.0 / self.spec.gamma1;
        for &(j, v) in &self.active {
            let col = a.column(j);
            let coef = inv_g1 * v * dot(col, d);
            if coef != 0.0 {
                axpy(coef, col, out);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub d: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Conjugate gradients for an SPD operator from `d = 0`, stopping once
/// `‖rhs − M d‖ ≤ target` or after `max_iters`. Returns the iterate with
/// the smallest residual among those after the first step, since every
/// such iterate satisfies `rhsᵀd > 0` while the residual need not
/// decrease monotonically.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    target: f64,
    max_iters: usize,
) -> CgOutcome {
    let m = rhs.len();
    let mut d = vec![0.0; m];
    let mut r = rhs.to_vec();
    let mut dir = r.clone();
    let mut q = vec![0.0; m];
    let mut rs = norm_sq(&r);
    let mut best = (rs.sqrt(), d.clone());
    let mut it = 0;
    while it < max_iters && (it == 0 || best.0 > target) {
        apply(&dir, &mut q);
        let curv = dot(&dir, &q);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rs / curv;
        axpy(alpha, &dir, &mut d);
        axpy(-alpha, &q, &mut r);
        let rs_next = norm_sq(&r);
        it += 1;
        if it == 1 || rs_next.sqrt() < best.0 {
            best = (rs_next.sqrt(), d.clone());
        }
        let beta = rs_next / rs;
        rs = rs_next;
        for (p, ri) in dir.iter_mut().zip(&r) {
            *p = ri + beta * *p;
        }
    }
    CgOutcome {
        converged: best.0 <= target,
        residual: best.0,
        d: best.1,
        iterations: it,
    }
}

/// Solves `(W + τI) d = rhs` by CG with the given residual target.
pub fn cg_solve(
    diags: &JacobianDiag,
    tau: f64,
    rhs: &[f64],
    spec: &SubproblemSpec,
    target: f64,
    cfg: &SncgConfig,
) -> CgOutcome {
    let op = WOperator::new(diags, spec, tau);
    conjugate_gradient(|v, out| op.apply(v, out), rhs, target, cfg.cg_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SncgStatus {
    Converged,
    MaxIters,
    /// The line search exhausted its backtracking budget.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// `‖Φ(u)‖ / (1 + ‖b‖)`.
    pub grad_norm: f64,
    /// Normalized duality gap `|⟨u, Φ(u)⟩| / (1 + ‖b‖)`.
    pub gap: f64,
    pub dual_value: f64,
    /// Dual values at every iterate, starting with `u_init`.
    pub dual_trace: Vec<f64>,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub cg_truncations: usize,
    pub status: SncgStatus,
}

/// Runs the semismooth Newton-CG iteration from `u_init`.
///
/// Stops when both `‖Φ(u)‖/(1+‖b‖)` and the normalized duality gap are at
/// most `cfg.eps_sncg`, after `cfg.j_max` Newton steps, or when the line
/// search stalls.
pub fn solve_subproblem(
    spec: &SubproblemSpec,
    cfg: &SncgConfig,
    u_init: &[f64],
) -> Result<SubproblemSolution> {
    cfg.validate()?;
    Error::check_len("u_init", spec.n(), u_init.len())?;

    let n = spec.n();
    let p = spec.inst.p();
    let scale = 1.0 + spec.inst.b_norm();
    let shift = spec.dual_shift();

    let mut u = u_init.to_vec();
    let mut pt = eval_point(&u, spec);
    let mut psi = pt.dual_value(&u, &shift, spec);
    let mut dual_trace = vec![psi];

    let mut trial = DualPoint::zeros(n, p);
    let mut u_trial = vec![0.0; n];
    let mut atd = vec![0.0; p];
    let mut cg_iterations = 0;
    let mut cg_truncations = 0;
    let mut j = 0;

    let (grad, status) = loop {
        let grad = gradient_at(&pt, spec);
        let gnorm = norm2(&grad);
        let gap = dot(&u, &grad).abs();
        if gnorm <= cfg.eps_sncg * scale && gap <= cfg.eps_sncg * scale {
            break (grad, SncgStatus::Converged);
        }
        if j >= cfg.j_max {
            break (grad, SncgStatus::MaxIters);
        }

        let diags = diagonals_at(&pt, spec);
        let tau = cfg.tau_bar.min(gnorm);
        let target = cfg.eta_bar.min(gnorm.powf(1.1));
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let cg = cg_solve(&diags, tau, &rhs, spec, target, cfg);
        cg_iterations += cg.iterations;
        if !cg.converged {
            cg_truncations += 1;
        }
        let d = cg.d;
        let slope = dot(&grad, &d);
        if !(slope < 0.0) {
            debug!("sncg: non-descent CG direction at j={j}");
            break (grad, SncgStatus::Stalled);
        }

        spec.a().tr_matvec_into(&d, &mut atd);
        // Ψ is only accurate to rounding of its magnitude.
        let slack = 16.0 * f64::EPSILON * (1.0 + psi.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.backtrack_max {
            for ((ut, ui), di) in u_trial.iter_mut().zip(&u).zip(&d) {
                *ut = ui + step * di;
            }
            for ((t, a), b) in trial.atu.iter_mut().zip(&pt.atu).zip(&atd) {
                *t = a + step * b;
            }
            trial.refresh(&u_trial, spec);
            let psi_trial = trial.dual_value(&u_trial, &shift, spec);
            if psi_trial <= psi + cfg.armijo_c * step * slope + slack {
                accepted = Some(psi_trial);
                break;
            }
            step *= cfg.delta;
        }
        let Some(psi_next) = accepted else {
            debug!("sncg: line search stalled at j={j} (grad {:.2e}, slope {slope:.2e}, psi {psi:.6e})", gnorm / scale);
            break (grad, SncgStatus::Stalled);
        };

        std::mem::swap(&mut u, &mut u_trial);
        // Recompute Aᵀu exactly instead of accumulating the update.
        spec.a().tr_matvec_into(&u, &mut pt.atu);
        pt.refresh(&u, spec);
        debug_assert!(psi_next.is_finite());
        psi = pt.dual_value(&u, &shift, spec);
        dual_trace.push(psi);
        j += 1;
    };

    Ok(SubproblemSolution {
        grad_norm: norm2(&grad) / scale,
        gap: dot(&u, &grad).abs() / scale,
        dual_value: pt.dual_value(&u, &shift, spec),
        x: pt.x,
        z: pt.z,
        u,
        dual_trace,
        iterations: j,
        cg_iterations,
        cg_truncations,
        status,
    })
}
