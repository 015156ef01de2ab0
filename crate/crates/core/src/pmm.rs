//! Proximal majorization-minimization (PMM) outer loop.
//!
//! Each step linearizes the concave part of the surrogate at `x^k` through
//! the weights `w^k = w_ρ(x^k)` and solves
//!
//! ```text
//! min_x  F_μ(x) + λ⟨e − w^k, |x|⟩ + (γ₁,k/2)‖x − x^k‖² + (γ₂,k/2)‖Ax − Ax^k‖²
//! ```
//!
//! with the dual semismooth Newton-CG method. The proximal moduli decay
//! geometrically to fixed floors.

use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::bench::nnz_approx;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm2, norm_inf, norm_sq, sub};
use crate::penalty::{check_local_opt_condition, theta_objective, w_rho, LocalOptCheck, PenaltyParams};
use crate::problem::ProblemInstance;
use crate::sncg::{solve_subproblem, SncgConfig, SncgStatus, SubproblemSpec};

const MIN_INNER_EPS: f64 = 1e-13;

/// Defaults follow the published experimental setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmmConfig {
    pub gamma1_0: f64,
    pub gamma2_0: f64,
    pub gamma1_min: f64,
    pub gamma2_min: f64,
    /// Geometric decay factor ϱ of the proximal moduli.
    pub varrho: f64,
    pub tol: f64,
    pub tol_sparse: f64,
    pub k_max: usize,
    /// Inner solver settings; `eps_sncg` is the tolerance of the first
    /// subproblem.
    pub sncg: SncgConfig,
    pub eps_decay: f64,
    pub eps_floor: f64,
    /// Tolerance and iteration cap for the starting-point problem.
    pub x0_eps: f64,
    pub x0_jmax: usize,
    /// Keep every iterate in the report (memory `O(p · iterations)`).
    pub keep_history: bool,
    /// Relative slack allowed in the sufficient-decrease inequality before
    /// a subproblem is re-solved more accurately.
    pub descent_tol: f64,
    /// Maximum number of accuracy refinements per subproblem.
    pub max_refinements: usize,
}

impl Default for PmmConfig {
    fn default() -> Self {
        PmmConfig {
            gamma1_0: 0.1,
            gamma2_0: 0.1,
            gamma1_min: 1e-8,
            gamma2_min: 1e-8,
            varrho: 0.8,
            tol: 1e-6,
            tol_sparse: 1e-4,
            k_max: 200,
            sncg: SncgConfig {
                eps_sncg: 1e-5,
                ..SncgConfig::default()
            },
            eps_decay: 0.8,
            eps_floor: 1e-6,
            x0_eps: 1e-5,
            x0_jmax: 50,
            keep_history: false,
            descent_tol: 1e-9,
            max_refinements: 4,
        }
    }
}

impl PmmConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.gamma1_0,
            self.gamma2_0,
            self.gamma1_min,
            self.gamma2_min,
            self.eps_floor,
            self.x0_eps,
            self.descent_tol,
        ];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(
                "proximal moduli, their floors and tolerances must be > 0".into(),
            ));
        }
        if !(self.varrho > 0.0 && self.varrho <= 1.0) {
            return Err(Error::InvalidParameter("varrho must lie in (0, 1]".into()));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::InvalidParameter("eps_decay must lie in (0, 1]".into()));
        }
        self.sncg.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ResidualTol,
    SparsityStable,
    MaxIters,
    Stalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ResidualTol => "residual_tol",
            Termination::SparsityStable => "sparsity_stable",
            Termination::MaxIters => "max_iters",
            Termination::Stalled => "stalled",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of either solver.
///
/// For PMM, `objective_trace[k] = Θ(x^k)` and `err_trace[k-1] = Err_k`.
/// For iPADMM, `objective_trace[k]` is the augmented Lagrangian at iterate
/// `k` and `err_trace` holds `max(pinf, dinf)`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub err_trace: Vec<f64>,
    pub nz_trace: Vec<usize>,
    /// `‖x^{k+1} − x^k‖²` per step.
    pub dx_sq_trace: Vec<f64>,
    /// `‖z^{k+1} − z^k‖²` per step (iPADMM only).
    pub dz_sq_trace: Vec<f64>,
    /// Proximal moduli `(γ₁,k, γ₂,k)` used at step `k` (PMM only).
    pub gamma_trace: Vec<(f64, f64)>,
    /// All iterates `x^0, x^1, …` when history was requested.
    pub history: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub inner_stalls: usize,
    /// Subproblems re-solved because the decrease inequality failed.
    pub refinements: usize,
    pub elapsed: Duration,
    pub termination: Termination,
    pub local_opt: LocalOptCheck,
    pub params: PenaltyParams,
}

impl SolveReport {
    pub fn final_err(&self) -> Option<f64> {
        self.err_trace.last().copied()
    }
}

/// Approximate minimizer of the ℓ1-regularized starting-point problem
/// `f(Ax − b) + λ‖x‖₁ + (γ₁,₀/2)‖x‖² + (γ₂,₀/2)‖Ax − b‖²`.
pub fn init_x0(inst: &ProblemInstance, lambda: f64, cfg: &PmmConfig) -> Result<(Vec<f64>, SncgStatus)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    cfg.validate()?;
    let spec = SubproblemSpec::new(
        inst,
        vec![0.0; inst.p()],
        vec![0.0; inst.n()],
        vec![lambda; inst.p()],
        0.0,
        cfg.gamma1_0,
        cfg.gamma2_0,
    )?;
    let sncg = SncgConfig {
        eps_sncg: cfg.x0_eps,
        j_max: cfg.x0_jmax,
        ..cfg.sncg
    };
    let sol = solve_subproblem(&spec, &sncg, &vec![0.0; inst.n()])?;
    debug!(
        "x0: {} newton steps, grad {:.2e}, status {:?}",
        sol.iterations, sol.grad_norm, sol.status
    );
    Ok((sol.x, sol.status))
}

/// `ρ = max(1, c/‖x⁰‖∞)` with `c = 25/6` when `n ≤ p` and `25/4` otherwise.
pub fn choose_rho(x0: &[f64], n: usize, p: usize) -> f64 {
    let m = norm_inf(x0);
    if m == 0.0 {
        return 1.0;
    }
    let c = if n <= p { 25.0 / 6.0 } else { 25.0 / 4.0 };
    (c / m).max(1.0)
}

/// Stationarity residual
/// `‖λ(w^{k−1} − w^k) + (γ₁I + γ₂AᵀA)(x^{k−1} − x^k)‖ / (1 + ‖b‖)`.
#[allow(clippy::too_many_arguments)]
pub fn err_k(
    w_prev: &[f64],
    w_cur: &[f64],
    x_prev: &[f64],
    x_cur: &[f64],
    gamma1: f64,
    gamma2: f64,
    inst: &ProblemInstance,
    lambda: f64,
) -> f64 {
    let dx = sub(x_prev, x_cur);
    let ata_dx = inst.a().tr_matvec(&inst.a().matvec(&dx));
    let v: Vec<f64> = (0..dx.len())
        .map(|i| lambda * (w_prev[i] - w_cur[i]) + gamma1 * dx[i] + gamma2 * ata_dx[i])
        .collect();
    norm2(&v) / (1.0 + inst.b_norm())
}

/// Sparsity-stabilization test on the last four `Nz` values.
fn sparsity_stable(nz: &[usize]) -> bool {
    if nz.len() < 4 {
        return false;
    }
    nz[nz.len() - 4..].windows(2).all(|w| w[0].abs_diff(w[1]) <= 2)
}

/// Runs PMM from `x0` (or from [`init_x0`] when `None`) with the given
/// surrogate parameters.
pub fn pmm_solve(
    inst: &ProblemInstance,
    params: &PenaltyParams,
    cfg: &PmmConfig,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mut x = match x0 {
        Some(x0) => {
            Error::check_len("x0", inst.p(), x0.len())?;
            x0.to_vec()
        }
        None => init_x0(inst, params.lambda(), cfg)?.0,
    };

    let start = Instant::now();
    let lambda = params.lambda();
    let mut gamma1 = cfg.gamma1_0;
    let mut gamma2 = cfg.gamma2_0;
    let mut sncg = cfg.sncg;
    let mut u = vec![0.0; inst.n()];
    let mut w = w_rho(&x, params);

    let mut objective_trace = vec![theta_objective(&x, inst, params)?];
    let mut nz_trace = vec![nnz_approx(&x)];
    let mut err_trace = Vec::new();
    let mut dx_sq_trace = Vec::new();
    let mut gamma_trace = Vec::new();
    let mut history = cfg.keep_history.then(|| vec![x.clone()]);
    let mut inner_iterations = 0;
    let mut inner_stalls = 0;
    let mut refinements = 0;
    let mut consecutive_stalls = 0;
    let mut k = 0;

    let termination = loop {
        let z_ref = inst.residual(&x)?;
        let omega: Vec<f64> = w.iter().map(|wi| lambda * (1.0 - wi)).collect();
        let spec = SubproblemSpec::new(inst, x.clone(), z_ref, omega, inst.mu(), gamma1, gamma2)?;
        let theta_k = objective_trace[k];
        let slack = cfg.descent_tol * (1.0 + objective_trace[0].abs());
        let mut eps = sncg.eps_sncg;
        let mut u_start = u.clone();
        let mut refined = 0;
        let (sol, theta_next) = loop {
            let inner = SncgConfig { eps_sncg: eps, ..sncg };
            let sol = solve_subproblem(&spec, &inner, &u_start)?;
            inner_iterations += sol.iterations;
            let theta_next = theta_objective(&sol.x, inst, params)?;
            let dx = sub(&sol.x, &x);
            let required = gamma1 * norm_sq(&dx) + gamma2 * norm_sq(&inst.a().matvec(&dx));
            let short = theta_k - theta_next - required;
            if short >= -slack || refined >= cfg.max_refinements || eps <= MIN_INNER_EPS {
                if short < -slack {
                    warn!("pmm k={k}: decrease short by {:.3e} after {refined} refinements", -short);
                }
                break (sol, theta_next);
            }
            refined += 1;
            eps = (eps * 0.01).max(MIN_INNER_EPS);
            u_start = sol.u;
        };
        refinements += refined;
        if sol.status == SncgStatus::Stalled {
            inner_stalls += 1;
            consecutive_stalls += 1;
        } else {
            consecutive_stalls = 0;
        }

        let x_next = sol.x;
        u = sol.u;
        let w_next = w_rho(&x_next, params);
        let err = err_k(&w, &w_next, &x, &x_next, gamma1, gamma2, inst, lambda);

        dx_sq_trace.push(dist_sq(&x, &x_next));
        gamma_trace.push((gamma1, gamma2));
        err_trace.push(err);
        objective_trace.push(theta_next);
        nz_trace.push(nnz_approx(&x_next));
        if let Some(h) = history.as_mut() {
            h.push(x_next.clone());
        }
        x = x_next;
        w = w_next;
        k += 1;

        gamma1 = cfg.gamma1_min.max(cfg.varrho * gamma1);
        gamma2 = cfg.gamma2_min.max(cfg.varrho * gamma2);
        sncg.eps_sncg = cfg.eps_floor.max(cfg.eps_decay * sncg.eps_sncg);

        debug!(
            "pmm k={k}: theta={:.10e} err={err:.3e} nz={} inner={} {:?}",
            objective_trace[k], nz_trace[k], sol.iterations, sol.status
        );

        if err <= cfg.tol {
            break Termination::ResidualTol;
        }
        if err <= cfg.tol_sparse && sparsity_stable(&nz_trace) {
            break Termination::SparsityStable;
        }
        if consecutive_stalls >= 2 {
            break Termination::Stalled;
        }
        if k >= cfg.k_max {
            break Termination::MaxIters;
        }
    };

    let elapsed = start.elapsed();
    info!(
        "pmm: {termination} after {k} iterations, nz={}, {:.3}s",
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
        dz_sq_trace: Vec::new(),
        gamma_trace,
        history,
        iterations: k,
        inner_iterations,
        inner_stalls,
        refinements,
        elapsed,
        termination,
        params: *params,
    })
}

/// Starting point, `ρ`, and the PMM run, following the default protocol:
/// `x⁰` from [`init_x0`], `ρ` from [`choose_rho`] unless overridden.
#[derive(Debug, Clone)]
pub struct PmmRun {
    pub x0: Vec<f64>,
    pub x0_time: Duration,
    pub params: PenaltyParams,
    pub report: SolveReport,
}

pub fn pmm_solve_auto(
    inst: &ProblemInstance,
    a: f64,
    lambda: f64,
    rho_override: Option<f64>,
    cfg: &PmmConfig,
) -> Result<PmmRun> {
    let t = Instant::now();
    let (x0, _) = init_x0(inst, lambda, cfg)?;
    let x0_time = t.elapsed();
    let rho = rho_override.unwrap_or_else(|| choose_rho(&x0, inst.n(), inst.p()));
    let params = PenaltyParams::new(a, lambda, rho)?;
    let report = pmm_solve(inst, &params, cfg, Some(&x0))?;
    Ok(PmmRun {
        x0,
        x0_time,
        params,
        report,
    })
}

/// Per-step slack in the sufficient-decrease inequality
/// `Θ(x^k) − Θ(x^{k+1}) − (γ₁,k‖Δ‖² + γ₂,k‖AΔ‖²)`, recomputed from the
/// stored iterates. Requires `keep_history`.
pub fn descent_gap(
    report: &SolveReport,
    inst: &ProblemInstance,
    params: &PenaltyParams,
) -> Result<Vec<f64>> {
    let hist = report
        .history
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("descent_gap needs iterate history".into()))?;
    let mut out = Vec::with_capacity(report.gamma_trace.len());
    for (k, &(g1, g2)) in report.gamma_trace.iter().enumerate() {
        let (xk, xk1) = (&hist[k], &hist[k + 1]);
        let dx = sub(xk1, xk);
        let adx = inst.a().matvec(&dx);
        let decrease = theta_objective(xk, inst, params)? - theta_objective(xk1, inst, params)?;
        out.push(decrease - (g1 * norm_sq(&dx) + g2 * norm_sq(&adx)));
    }
    Ok(out)
}

/// Ratios `‖x^{k+1} − x̄‖ / ‖x^k − x̄‖` over the last `count` steps, with
/// `x̄` the final iterate. `None` without history or with too few steps.

pub fn tail_ratios(report: &SolveReport, count: usize) -> Option<Vec<f64>> {
    let hist = report.history.as_ref()?;
    if hist.len() < count + 1 {
        return None;
    }
    let last = hist.last()?;
    let start = hist.len() - 1 - count;
    Some(
        (start..hist.len() - 1)
            .map(|k| {
                let num = dist_sq(&hist[k + 1], last).sqrt();
                let den = dist_sq(&hist[k], last).sqrt();
                if den == 0.0 {
                    0.0
                } else {
                    num / den
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn choose_rho_rule() {
        assert_eq!(choose_rho(&[25.0 / 6.0, 0.0], 1, 2), 1.0);
        assert!((choose_rho(&[1.0, -0.5], 2, 2) - 25.0 / 6.0).abs() < 1e-15);
        assert!((choose_rho(&[-1.0, 0.5], 3, 2) - 25.0 / 4.0).abs() < 1e-15);
        assert_eq!(choose_rho(&[0.0, 0.0], 3, 2), 1.0);
    }

    #[test]
    fn sparsity_rule_needs_four_values() {
        assert!(!sparsity_stable(&[5, 5, 5]));
        assert!(sparsity_stable(&[9, 7, 6, 4]));
        assert!(!sparsity_stable(&[9, 5, 6, 4]));
        assert!(!sparsity_stable(&[5, 5, 8, 8]));
    }

    #[test]
    fn err_k_special_cases() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let inst = ProblemInstance::new(a, vec![3.0, 4.0], 0.0).unwrap();
        let x = [0.5, -1.0];
        let w = [0.2, 1.0];
        assert_eq!(err_k(&w, &w, &x, &x, 0.1, 0.1, &inst, 0.7), 0.0);
        let w2 = [0.5, 0.6];
        let e = err_k(&w, &w2, &x, &x, 0.1, 0.1, &inst, 0.7);
        let expect = 0.7 * (0.09f64 + 0.16).sqrt() / 6.0;
        assert!((e - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_data_stops_immediately() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let inst = ProblemInstance::new(a, vec![0.0; 3], 1e-8).unwrap();
        let params = PenaltyParams::new(6.0, 0.1, 1.0).unwrap();
        let r = pmm_solve(&inst, &params, &PmmConfig::default(), Some(&[0.0, 0.0])).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.err_trace, vec![0.0]);
        assert_eq!(r.termination, Termination::ResidualTol);

        let (x0, _) = init_x0(&inst, 0.1, &PmmConfig::default()).unwrap();
        assert_eq!(x0, vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let bad = PmmConfig {
            varrho: 1.5,
            ..PmmConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(PmmConfig::default().validate().is_ok());
    }
}
