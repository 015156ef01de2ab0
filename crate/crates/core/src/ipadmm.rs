//! Indefinite-proximal ADMM on the Moreau-smoothed surrogate
//!
//! ```text
//! min_{x,z}  e_ε f(z) + (μ/2)‖x‖² + ϑ(x)   s.t.  Ax − b = z
//! ```
//!
//! where `ϑ(x) = Σ_i surrogate_penalty(x_i)`. The x-step adds the
//! indefinite proximal term `(γ/2)‖x − x^k‖² − (σ/2)‖A(x − x^k)‖²` so that it
//! separates into scalar problems solved by [`prox_vartheta`].

use std::time::Instant;

use log::{debug, info};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dist_sq, dot, norm2, norm_sq};
use crate::penalty::{
    check_local_opt_condition, check_prox_vartheta_modulus, moreau_l1, moreau_l1_grad, prox_moreau_l1,
    prox_vartheta, vartheta, PenaltyParams,
};
use crate::bench::nnz_approx;
use crate::pmm::{SolveReport, Termination};
use crate::problem::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Smoothing parameter ε of the loss.
    pub eps_smooth: f64,
    /// Penalty σ; `None` means `4.5/ε`.
    pub sigma: Option<f64>,
    pub k_max: usize,
    pub eps_admm: f64,
}

impl AdmmConfig {
    pub fn new(eps_smooth: f64) -> Self {
        AdmmConfig {
            eps_smooth,
            sigma: None,
            k_max: 20_000,
            eps_admm: 1e-5,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(4.5 / self.eps_smooth)
    }

    /// `γ = σ‖A‖²/2 + λ(a+1)ρ/(2(a−1)) − μ`.
    pub fn gamma_prox(&self, inst: &ProblemInstance, params: &PenaltyParams) -> f64 {
        0.5 * self.sigma() * inst.spec_norm_sq() + params.concavity() - inst.mu()
    }

    pub fn validate(&self, inst: &ProblemInstance, params: &PenaltyParams) -> Result<()> {
        if !(self.eps_smooth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_smooth must be > 0, got {}",
                self.eps_smooth
            )));
        }
        let sigma = self.sigma();
        let floor = 2.0 * 2f64.sqrt() / self.eps_smooth;
        if !(sigma > floor) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma} must exceed 2√2/ε = {floor}"
            )));
        }
        if !(self.eps_admm > 0.0) {
            return Err(Error::InvalidParameter("eps_admm must be > 0".into()));
        }
        check_prox_vartheta_modulus(params, self.gamma_prox(inst, params) + inst.mu())
    }
}

/// Iterates `(x⁰, z⁰, y⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmStart {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl AdmmStart {
    /// `z⁰ = Ax⁰ − b`, `y⁰ = 0`.
    pub fn from_x0(inst: &ProblemInstance, x0: &[f64]) -> Result<Self> {
        Ok(AdmmStart {
            x: x0.to_vec(),
            z: inst.residual(x0)?,
            y: vec![0.0; inst.n()],
        })
    }

    /// `z⁰ = Ax⁰ − b`, `y⁰ = ∇e_ε f(z⁰)`, the multiplier every later
    /// iterate satisfies by optimality of the z-step.
    pub fn consistent(inst: &ProblemInstance, x0: &[f64], eps_smooth: f64) -> Result<Self> {
        let z = inst.residual(x0)?;
        let y = moreau_l1_grad(&z, eps_smooth, inst.n());
        Ok(AdmmStart { x: x0.to_vec(), z, y })
    }
}

/// `ξ = (γx − σAᵀ(Ax − z − b) − Aᵀy)/(μ + γ)` from the precomputed
/// `q = Aᵀ(Ax − z − b)` and `Aᵀy`, followed by the componentwise prox.
fn x_step(x: &[f64], q: &[f64], aty: &[f64], sigma: f64, gamma: f64, mu: f64, params: &PenaltyParams) -> Vec<f64> {
    let c = mu + gamma;
    x.iter()
        .zip(q)
        .zip(aty)
        .map(|((xi, qi), ai)| prox_vartheta((gamma * xi - sigma * qi - ai) / c, params, c))
        .collect()
}

fn primal_residual(ax: &[f64], z: &[f64], b: &[f64]) -> Vec<f64> {
    ax.iter().zip(z).zip(b).map(|((a, z), b)| a - z - b).collect()
}

pub fn x_update(
    x: &[f64],
    z: &[f64],
    y: &[f64],
    inst: &ProblemInstance,
    params: &PenaltyParams,
    cfg: &AdmmConfig,
) -> Result<Vec<f64>> {
    Error::check_len("x", inst.p(), x.len())?;
    Error::check_len("z", inst.n(), z.len())?;
    Error::check_len("y", inst.n(), y.len())?;
    let r = primal_residual(&inst.a().matvec(x), z, inst.b());
    let q = inst.a().tr_matvec(&r);
    let aty = inst.a().tr_matvec(y);
    Ok(x_step(x, &q, &aty, cfg.sigma(), cfg.gamma_prox(inst, params), inst.mu(), params))
}

/// `z = P_{1/σ}(e_ε f)(Ax − b + y/σ)`.
pub fn z_update(x_next: &[f64], y: &[f64], inst: &ProblemInstance, cfg: &AdmmConfig) -> Result<Vec<f64>> {
    Error::check_len("y", inst.n(), y.len())?;
    let r = inst.residual(x_next)?;
    Ok(z_from_residual(&r, y, inst.n(), cfg))
}

fn z_from_residual(r: &[f64], y: &[f64], n: usize, cfg: &AdmmConfig) -> Vec<f64> {
    let sigma = cfg.sigma();
    let eta: Vec<f64> = r.iter().zip(y).map(|(r, y)| r + y / sigma).collect();
    prox_moreau_l1(&eta, cfg.eps_smooth, sigma, n)
}

/// `e_ε f(z) + (μ/2)‖x‖² + ϑ(x) + ⟨y, Ax − b − z⟩ + (σ/2)‖Ax − b − z‖²`.
pub fn aug_lagrangian(
    x: &[f64],
    z: &[f64],
    y: &[f64],
    inst: &ProblemInstance,
    params: &PenaltyParams,
    cfg: &AdmmConfig,
) -> Result<f64> {
    Error::check_len("z", inst.n(), z.len())?;
    Error::check_len("y", inst.n(), y.len())?;
    let ax = inst.a().matvec(x);
    let r = primal_residual(&ax, z, inst.b());
    Ok(lagrangian_from_parts(x, z, y, &r, inst, params, cfg))
}

fn lagrangian_from_parts(
    x: &[f64],
    z: &[f64],
    y: &[f64],
    r: &[f64],
    inst: &ProblemInstance,
    params: &PenaltyParams,
    cfg: &AdmmConfig,
) -> f64 {
    moreau_l1(z, cfg.eps_smooth, inst.n())
        + 0.5 * inst.mu() * norm_sq(x)
        + vartheta(x, params)
        + dot(y, r)
        + 0.5 * cfg.sigma() * norm_sq(r)
}

/// Guaranteed per-step decrease of `L_σ`:
/// `[σ/2 − 4/(σε²)]‖Δz‖² + ((λ(a+1)ρ − 2(a−1)μ)/(4(a−1)))‖Δx‖²`.
pub fn lagrangian_decrease_bound(
    dx_sq: f64,
    dz_sq: f64,
    params: &PenaltyParams,
    mu: f64,
    cfg: &AdmmConfig,
) -> f64 {
    let sigma = cfg.sigma();
    let eps = cfg.eps_smooth;
    let a = params.a();
    let cz = 0.5 * sigma - 4.0 / (sigma * eps * eps);
    let cx = (params.lambda() * (a + 1.0) * params.rho() - 2.0 * (a - 1.0) * mu) / (4.0 * (a - 1.0));
    cz * dz_sq + cx * dx_sq
}

/// Runs iPADMM from `start`.
///
/// Stops when `max(pinf, dinf) ≤ eps_admm` or after `k_max` iterations.
/// The objective trace holds `L_σ` at every iterate and `err_trace` holds
/// `max(pinf, dinf)`.
pub fn admm_solve(
    inst: &ProblemInstance,
    params: &PenaltyParams,
    cfg: &AdmmConfig,
    start: &AdmmStart,
) -> Result<SolveReport> {
    cfg.validate(inst, params)?;
    Error::check_len("x0", inst.p(), start.x.len())?;
    Error::check_len("z0", inst.n(), start.z.len())?;
    Error::check_len("y0", inst.n(), start.y.len())?;

    let t0 = Instant::now();
    let a = inst.a();
    let b = inst.b();
    let mu = inst.mu();
    let sigma = cfg.sigma();
    let gamma = cfg.gamma_prox(inst, params);
    let scale = 1.0 + inst.b_norm();

    let mut x = start.x.clone();
    let mut z = start.z.clone();
    let mut y = start.y.clone();
    let mut r = primal_residual(&a.matvec(&x), &z, b);
    let mut q = a.tr_matvec(&r);
    let mut aty = a.tr_matvec(&y);
    let mut ax = vec![0.0; inst.n()];
    let mut q_next = vec![0.0; inst.p()];

    let mut objective_trace = vec![lagrangian_from_parts(&x, &z, &y, &r, inst, params, cfg)];
    let mut nz_trace = vec![nnz_approx(&x)];
    let mut err_trace = Vec::new();
    let mut dx_sq_trace = Vec::new();
    let mut dz_sq_trace = Vec::new();
    let mut k = 0;

    let termination = loop {
        let x_next = x_step(&x, &q, &aty, sigma, gamma, mu, params);
        a.matvec_into(&x_next, &mut ax);
        let ax_b: Vec<f64> = ax.iter().zip(b).map(|(v, bi)| v - bi).collect();
        let z_next = z_from_residual(&ax_b, &y, inst.n(), cfg);
        let r_next = primal_residual(&ax, &z_next, b);
        axpy(sigma, &r_next, &mut y);
        a.tr_matvec_into(&r_next, &mut q_next);
        k += 1;
        if k % 256 == 0 {
            a.tr_matvec_into(&y, &mut aty);
        } else {
            axpy(sigma, &q_next, &mut aty);
        }

        let pinf = norm2(&r_next) / scale;
        let dual: Vec<f64> = (0..inst.p())
            .map(|j| sigma * q_next[j] - sigma * q[j] - gamma * (x_next[j] - x[j]))
            .collect();
        let dinf = norm2(&dual) / scale;
        let err = pinf.max(dinf);

        dx_sq_trace.push(dist_sq(&x_next, &x));
        dz_sq_trace.push(dist_sq(&z_next, &z));
        x = x_next;
        z = z_next;
        r = r_next;
        std::mem::swap(&mut q, &mut q_next);
        objective_trace.push(lagrangian_from_parts(&x, &z, &y, &r, inst, params, cfg));
        nz_trace.push(nnz_approx(&x));
        err_trace.push(err);

        if k % 1000 == 0 {
            debug!("admm k={k}: L={:.10e} pinf={pinf:.3e} dinf={dinf:.3e}", objective_trace[k]);
        }
        if err <= cfg.eps_admm {
            break Termination::ResidualTol;
        }
        if k >= cfg.k_max {
            break Termination::MaxIters;
        }
    };

    let elapsed = t0.elapsed();
    info!(
        "admm: {termination} after {k} iterations, nz={}, {:.3}s",
        nz_trace[k],
        elapsed.as_secs_f64()
    );
    Ok(SolveReport {
        local_opt: check_local_opt_condition(&x, params),
        x,
        objective_trace,
        err_trace,
        nz_trace,
        dx_sq_trace,
        dz_sq_trace,
        gamma_trace: Vec::new(),
        history: None,
        iterations: k,
        inner_iterations: 0,
        inner_stalls: 0,
        refinements: 0,
        elapsed,
        termination,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn small() -> (ProblemInstance, PenaltyParams) {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, 0.1]]).unwrap();
        let inst = ProblemInstance::new(a, vec![1.0, -2.0, 0.4], 1e-8).unwrap();
        (inst, PenaltyParams::new(6.0, 0.05, 2.0).unwrap())
    }

    #[test]
    fn origin_with_zero_data_is_fixed() {
        let (inst, params) = small();
        let inst = ProblemInstance::new(inst.a().clone(), vec![0.0; 3], 1e-8).unwrap();
        let cfg = AdmmConfig::new(0.5);
        let start = AdmmStart::from_x0(&inst, &[0.0, 0.0]).unwrap();
        let r = admm_solve(&inst, &params, &cfg, &start).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.termination, Termination::ResidualTol);
    }

    #[test]
    fn lagrangian_special_points() {
        let (inst, params) = small();
        let cfg = AdmmConfig::new(0.5);
        let l = aug_lagrangian(&[0.0, 0.0], &[0.0; 3], &[0.0; 3], &inst, &params, &cfg).unwrap();
        assert!((l - 0.5 * cfg.sigma() * norm_sq(inst.b())).abs() < 1e-12);

        let x = [0.4, -0.2];
        let z = inst.residual(&x).unwrap();
        let l = aug_lagrangian(&x, &z, &[3.0, -1.0, 2.0], &inst, &params, &cfg).unwrap();
        let expect = moreau_l1(&z, 0.5, 3) + 0.5e-8 * norm_sq(&x) + vartheta(&x, &params);
        assert!((l - expect).abs() < 1e-14);
    }

    #[test]
    fn sigma_floor_enforced() {
        let (inst, params) = small();
        let mut cfg = AdmmConfig::new(0.5);
        cfg.sigma = Some(2.0);
        assert!(cfg.validate(&inst, &params).is_err());
        cfg.sigma = None;
        assert!(cfg.validate(&inst, &params).is_ok());
        let slack = cfg.gamma_prox(&inst, &params) + inst.mu() - params.concavity();
        assert!((slack - 0.5 * cfg.sigma() * inst.spec_norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn solver_x_step_matches_public_update() {
        let (inst, params) = small();
        let cfg = AdmmConfig {
            k_max: 1,
            ..AdmmConfig::new(0.4)
        };
        let start = AdmmStart {
            x: vec![0.3, -0.6],
            z: vec![0.1, 0.2, -0.3],
            y: vec![0.05, -0.02, 0.01],
        };
        let r = admm_solve(&inst, &params, &cfg, &start).unwrap();
        let x1 = x_update(&start.x, &start.z, &start.y, &inst, &params, &cfg).unwrap();
        assert_eq!(r.x, x1);
    }
}
