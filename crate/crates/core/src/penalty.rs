//! Scalar pieces of the DC surrogate of the zero-norm and the closed-form
//! proximal maps used by both solvers.
//!
//! With `φ(t) = ((a−1)t² + 2t)/(a+1)` and `ψ*` its conjugate restricted to
//! `[0, 1]`, the surrogate replaces `ν‖x‖₀` by
//! `λ‖x‖₁ − (λ/ρ) Σ ψ*(ρ|x_i|)` with `λ = ρν`. The per-coordinate term is
//! zero at the origin, increases to `ν` and stays at `ν` once
//! `|t| ≥ 2a/(ρ(a+1))`.

use crate::error::{Error, Result};
use crate::linalg::sign;
use crate::problem::ProblemInstance;

/// Surrogate constants `a`, `λ`, `ρ` and the derived `ν = λ/ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    a: f64,
    lambda: f64,
    rho: f64,
    nu: f64,
}

impl PenaltyParams {
    pub fn new(a: f64, lambda: f64, rho: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be > 1, got {a}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be >= 1, got {rho}"
            )));
        }
        Ok(PenaltyParams {
            a,
            lambda,
            rho,
            nu: lambda / rho,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `2/(ρ(a+1))`: below this magnitude the surrogate is `λ|t|`.
    pub fn t_lo(&self) -> f64 {
        2.0 / (self.rho * (self.a + 1.0))
    }

    /// `2a/(ρ(a+1))`: at and above this magnitude the surrogate equals `ν`.
    pub fn t_hi(&self) -> f64 {
        2.0 * self.a / (self.rho * (self.a + 1.0))
    }

    /// Weak-convexity modulus of the surrogate, `λ(a+1)ρ/(2(a−1))`.
    pub fn concavity(&self) -> f64 {
        self.lambda * (self.a + 1.0) * self.rho / (2.0 * (self.a - 1.0))
    }
}

pub fn phi(t: f64, a: f64) -> f64 {
    ((a - 1.0) * t * t + 2.0 * t) / (a + 1.0)
}

pub fn psi_star(s: f64, a: f64) -> f64 {
    if s <= 2.0 / (a + 1.0) {
        0.0
    } else if s <= 2.0 * a / (a + 1.0) {
        let d = (a + 1.0) * s - 2.0;
        d * d / (4.0 * (a * a - 1.0))
    } else {
        s - 1.0
    }
}

/// Derivative of `ψ*`, `min(1, max(0, ((a+1)s − 2)/(2(a−1))))`. Branches
/// are selected with the same comparisons as [`psi_star`].
pub fn psi_star_prime(s: f64, a: f64) -> f64 {
    if s <= 2.0 / (a + 1.0) {
        0.0
    } else if s <= 2.0 * a / (a + 1.0) {
        (((a + 1.0) * s - 2.0) / (2.0 * (a - 1.0))).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// MM weights `w_i = (ψ*)'(ρ|x_i|)`.
pub fn w_rho(x: &[f64], params: &PenaltyParams) -> Vec<f64> {
    x.iter()
        .map(|&xi| psi_star_prime(params.rho * xi.abs(), params.a))
        .collect()
}

/// Derivative of `t ↦ ψ*(ρ|t|)`, written branch by branch.
pub fn varphi_rho_prime(t: f64, params: &PenaltyParams) -> f64 {
    let (a, rho) = (params.a, params.rho);
    let s = rho * t.abs();
    if s <= 2.0 / (a + 1.0) {
        0.0
    } else if s <= 2.0 * a / (a + 1.0) {
        // The clamp only matters within rounding of a breakpoint.
        let slope = (((a + 1.0) * s - 2.0) / (2.0 * (a - 1.0))).clamp(0.0, 1.0);
        rho * slope * sign(t)
    } else {
        rho * sign(t)
    }
}

/// `g_ρ(x) = ρ⁻¹ Σ ψ*(ρ|x_i|)`.
pub fn g_rho(x: &[f64], params: &PenaltyParams) -> f64 {
    x.iter()
        .map(|&xi| psi_star(params.rho * xi.abs(), params.a))
        .sum::<f64>()
        / params.rho
}

/// `∇g_ρ(x) = w_ρ(x) ∘ sign(x)`.
pub fn grad_g_rho(x: &[f64], params: &PenaltyParams) -> Vec<f64> {
    x.iter()
        .map(|&xi| psi_star_prime(params.rho * xi.abs(), params.a) * sign(xi))
        .collect()
}

/// Per-coordinate surrogate `λ|t| − (λ/ρ)ψ*(ρ|t|)`, valued in `[0, ν]`.
pub fn surrogate_penalty(t: f64, params: &PenaltyParams) -> f64 {
    let at = t.abs();
    if at >= params.t_hi() {
        return params.nu;
    }
    params.lambda * at - params.lambda / params.rho * psi_star(params.rho * at, params.a)
}

/// `ϑ_{λ,ρ}(x) = Σ_i surrogate_penalty(x_i)`.
pub fn vartheta(x: &[f64], params: &PenaltyParams) -> f64 {
    x.iter().map(|&t| surrogate_penalty(t, params)).sum()
}

/// `Θ_{λ,ρ}(x) = F_μ(x) + ϑ_{λ,ρ}(x)`.
pub fn theta_objective(x: &[f64], inst: &ProblemInstance, params: &PenaltyParams) -> Result<f64> {
    Ok(inst.f_mu(x)? + vartheta(x, params))
}

/// `F_μ(x) + ν‖x‖₀`.
pub fn zero_norm_objective(x: &[f64], inst: &ProblemInstance, nu: f64) -> Result<f64> {
    let nnz = x.iter().filter(|v| **v != 0.0).count();
    Ok(inst.f_mu(x)? + nu * nnz as f64)
}

/// Proximal map of `h(x) = ‖ω∘x‖₁ + (μ/2)‖x‖²` with step `1/γ`:
/// `γ/(γ+μ) sign(z) max(|z| − ω/γ, 0)`.
pub fn prox_weighted_l1_ridge(z: &[f64], omega: &[f64], mu: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    prox_weighted_l1_ridge_into(z, omega, mu, gamma, &mut out);
    out
}

pub fn prox_weighted_l1_ridge_into(z: &[f64], omega: &[f64], mu: f64, gamma: f64, out: &mut [f64]) {
    let scale = gamma / (gamma + mu);
    for ((o, &zi), &wi) in out.iter_mut().zip(z).zip(omega) {
        let m = zi.abs() - wi / gamma;
        *o = if m > 0.0 { scale * m * sign(zi) } else { 0.0 };
    }
}

/// Proximal map of the averaged ℓ1 loss with step `1/γ₂`: soft-threshold
/// at `1/(nγ₂)`.
pub fn prox_l1_scaled(v: &[f64], n: usize, gamma2: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    prox_l1_scaled_into(v, n, gamma2, &mut out);
    out
}

pub fn prox_l1_scaled_into(v: &[f64], n: usize, gamma2: f64, out: &mut [f64]) {
    let thr = 1.0 / (n as f64 * gamma2);
    for (o, &vi) in out.iter_mut().zip(v) {
        let m = vi.abs() - thr;
        *o = if m > 0.0 { m * sign(vi) } else { 0.0 };
    }
}

/// Huber-type Moreau envelope of `n⁻¹|t|` with parameter `ε`.
pub fn moreau_l1_scalar(t: f64, eps: f64, n: usize) -> f64 {
    let nf = n as f64;
    if t.abs() > eps / nf {
        t.abs() / nf - eps / (2.0 * nf * nf)
    } else {
        t * t / (2.0 * eps)
    }
}

/// `e_ε f(z) = Σ_i e_ε(n⁻¹|·|)(z_i)`.
pub fn moreau_l1(z: &[f64], eps: f64, n: usize) -> f64 {
    z.iter().map(|&t| moreau_l1_scalar(t, eps, n)).sum()
}

/// Gradient of `e_ε f`: `clamp(z_i/ε, −1/n, 1/n)`.
pub fn moreau_l1_grad(z: &[f64], eps: f64, n: usize) -> Vec<f64> {
    let cap = 1.0 / n as f64;
    z.iter().map(|&t| (t / eps).clamp(-cap, cap)).collect()
}

/// Minimizer of `e_ε(n⁻¹|·|)(t) + (σ/2)(t − η_i)²` componentwise.
pub fn prox_moreau_l1(eta: &[f64], eps: f64, sigma: f64, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let knee = (1.0 + sigma * eps) / (nf * sigma);
    let shrink = sigma * eps / (1.0 + sigma * eps);
    eta.iter()
        .map(|&e| {
            if e.abs() > knee {
                e - sign(e) / (nf * sigma)
            } else {
                shrink * e
            }
        })
        .collect()
}

/// Global minimizer of `surrogate_penalty(t) + (c/2)(t − s)²`.
///
/// Requires `c > params.concavity()` so the scalar problem is strongly
/// convex; callers validate this once per configuration. The stationary
/// point of each branch is clipped into its branch and the best of those
/// candidates, the origin and both breakpoints is returned. Exact ties go
/// to the smaller magnitude.
pub fn prox_vartheta(s: f64, params: &PenaltyParams, c: f64) -> f64 {
    let at = s.abs();
    if at == 0.0 {
        return 0.0;
    }
    let (lo, hi) = (params.t_lo(), params.t_hi());
    let lambda = params.lambda;
    let a = params.a;

    let linear = (at - lambda / c).clamp(0.0, lo);
    let curved = ((c * at - lambda * a / (a - 1.0)) / (c - params.concavity())).clamp(lo, hi);
    let flat = at.max(hi);

    let mut cands = [0.0, linear, lo, curved, hi, flat];
    cands.sort_by(|x, y| x.total_cmp(y));
    let obj = |t: f64| surrogate_penalty(t, params) + 0.5 * c * (t - at) * (t - at);
    let mut best = cands[0];
    let mut best_val = obj(best);
    for &t in &cands[1..] {
        let v = obj(t);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    best * sign(s)
}

/// Checks that `c` makes the `prox_vartheta` scalar problems strongly convex.
pub fn check_prox_vartheta_modulus(params: &PenaltyParams, c: f64) -> Result<()> {
    if c > params.concavity() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "prox modulus {c} must exceed lambda(a+1)rho/(2(a-1)) = {}",
            params.concavity()
        )))
    }
}

/// Result of the local-optimality magnitude test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptCheck {
    pub holds: bool,
    /// Smallest nonzero magnitude, `None` for the zero vector.
    pub min_nonzero: Option<f64>,
    pub threshold: f64,
}

/// True iff every nonzero entry has `|x_i| > 2a/(ρ(a+1))`, in which case a
/// limit point of the MM iteration is a local minimizer of the surrogate.
pub fn check_local_opt_condition(x: &[f64], params: &PenaltyParams) -> LocalOptCheck {
    let threshold = params.t_hi();
    let min_nonzero = x
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .min_by(|a, b| a.total_cmp(b));
    LocalOptCheck {
        holds: min_nonzero.is_none_or(|m| m > threshold),
        min_nonzero,
        threshold,
    }
}
