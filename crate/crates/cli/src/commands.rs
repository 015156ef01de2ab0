use std::path::Path;

use sparseplq_core::bench::{
    eps_grid_search, lambda_rule, nnz_approx, run_instance, run_sweep, run_table1, save_records, table1_cells,
    AdmmChoice, EpsChoice, ExperimentConfig, RunRecord, SweepKind, Table1Config,
};
use sparseplq_core::data::{load_instance, make_instance, save_instance, SyntheticSpec};
use sparseplq_core::ipadmm::{admm_solve, AdmmConfig, AdmmStart};
use sparseplq_core::pmm::{choose_rho, init_x0, PmmConfig};
use sparseplq_core::problem::load_libsvm;
use sparseplq_core::sncg::SncgConfig;
use sparseplq_core::{PenaltyParams, ProblemInstance};

use crate::args::*;

pub enum Failure {
    /// Bad flag combination, reported with usage text (exit 2).
    Usage(String),
    /// Solver or I/O failure (exit 1).
    Runtime(String),
}

impl From<sparseplq_core::Error> for Failure {
    fn from(e: sparseplq_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn synthetic_spec(a: &SyntheticArgs) -> Result<SyntheticSpec, Failure> {
    if !(0.0..=1.0).contains(&a.corrupt) {
        return Err(Failure::Usage(format!("--corrupt must lie in [0, 1], got {}", a.corrupt)));
    }
    Ok(SyntheticSpec {
        n: a.n,
        p: a.p,
        cov: a.cov,
        signal: a.signal,
        noise: a.noise,
        corrupt_count: (a.corrupt * a.n as f64).floor() as usize,
        seed: a.seed,
        noise_cap: a.noise_cap,
    })
}

struct Loaded {
    label: String,
    inst: ProblemInstance,
    x_true: Option<Vec<f64>>,
}

fn load_source(src: &SourceArgs, mu: f64) -> Result<Loaded, Failure> {
    let (label, inst, x_true) = if let Some(path) = &src.libsvm {
        (path.display().to_string(), load_libsvm(path)?, None)
    } else if let Some(path) = &src.instance {
        let si = load_instance(path)?;
        (path.display().to_string(), si.instance, Some(si.x_true))
    } else {
        let spec = synthetic_spec(&src.synthetic)?;
        let si = make_instance(&spec)?;
        (format!("synthetic/seed={}", spec.seed), si.instance, Some(si.x_true))
    };
    Ok(Loaded {
        label,
        inst: inst.with_mu(mu)?,
        x_true,
    })
}

pub fn pmm_config(s: &SolverArgs) -> PmmConfig {
    let d = PmmConfig::default();
    PmmConfig {
        tol: s.tol,
        tol_sparse: s.tol_sparse,
        k_max: s.k_max,
        sncg: SncgConfig {
            eps_sncg: s.eps_sncg,
            ..d.sncg
        },
        ..d
    }
}

fn admm_choice(s: &SolverArgs, eps: EpsChoice) -> AdmmChoice {
    AdmmChoice {
        eps,
        sigma: s.sigma,
        k_max: s.admm_k_max,
        eps_admm: s.eps_admm,
    }
}

fn experiment(s: &SolverArgs, admm: Option<AdmmChoice>) -> ExperimentConfig {
    ExperimentConfig {
        a: s.a,
        lambda_factor: s.lambda_factor,
        lambda_floor: s.lambda_floor,
        lambda: s.lambda,
        rho: s.rho,
        pmm: pmm_config(s),
        admm,
    }
}

pub fn summary_line(r: &RunRecord) -> String {
    let mut s = format!("{} {}: nz={} loss={:.6e}", r.problem, r.solver, r.nz, r.loss);
    if let Some(e) = r.l2err {
        s += &format!(" l2err={e:.3e}");
    }
    if let (Some(fp), Some(fnz)) = (r.fp, r.fn_) {
        s += &format!(" fp={fp} fn={fnz}");
    }
    if let Some(eps) = r.eps {
        s += &format!(" eps={eps}");
    }
    s + &format!(
        " lambda={:.4e} rho={:.4e} time={:.3}s iters={} termination={}",
        r.lambda, r.rho, r.time_s, r.iters, r.termination
    )
}

fn write_out(records: &[RunRecord], out: Option<&Path>) -> Outcome {
    if let Some(path) = out {
        save_records(records, path)?;
    }
    Ok(())
}

pub fn gen(a: &GenArgs) -> Outcome {
    let spec = synthetic_spec(&a.synthetic)?;
    let si = make_instance(&spec)?;
    save_instance(&si, &a.out)?;
    println!(
        "wrote {}x{} instance to {} (s*={}, |I|={}, seed={})",
        spec.n,
        spec.p,
        a.out.display(),
        si.support.len(),
        si.corrupt_set.len(),
        spec.seed
    );
    Ok(())
}

pub fn solve(a: &SolveArgs) -> Outcome {
    let s = &a.solver_args;
    let src = load_source(&a.source, s.mu)?;
    let records = match a.solver {
        SolverKind::Pmm => run_instance(&src.label, &src.inst, src.x_true.as_deref(), &experiment(s, None))?,
        SolverKind::Ipadmm => {
            let eps = s
                .eps
                .ok_or_else(|| Failure::Usage("--solver ipadmm requires --eps".into()))?;
            let inst = &src.inst;
            let cfg = pmm_config(s);
            let lambda = s.lambda.unwrap_or_else(|| lambda_rule(inst, s.lambda_factor, s.lambda_floor));
            let (x0, _) = init_x0(inst, lambda, &cfg)?;
            let rho = s.rho.unwrap_or_else(|| choose_rho(&x0, inst.n(), inst.p()));
            let params = PenaltyParams::new(s.a, lambda, rho)?;
            let acfg = AdmmConfig {
                eps_smooth: eps,
                sigma: s.sigma,
                k_max: s.admm_k_max,
                eps_admm: s.eps_admm,
            };
            let report = admm_solve(inst, &params, &acfg, &AdmmStart::from_x0(inst, &x0)?)?;
            vec![RunRecord::from_report(
                &src.label,
                "ipadmm",
                inst,
                &report,
                Some(eps),
                src.x_true.as_deref(),
            )?]
        }
    };
    for r in &records {
        println!("{}", summary_line(r));
    }
    write_out(&records, a.out.as_deref())
}

pub fn sweep(a: &SweepArgs) -> Outcome {
    let spec = synthetic_spec(&a.synthetic)?;
    if a.seeds == 0 || a.values.is_empty() {
        return Err(Failure::Usage("--seeds and --values must be nonempty".into()));
    }
    let admm = if a.no_admm {
        None
    } else {
        let eps = a.solver_args.eps.unwrap_or(0.7);
        Some(admm_choice(&a.solver_args, EpsChoice::Fixed(eps)))
    };
    let kind = match a.kind {
        SweepKindArg::Sparsity => SweepKind::Sparsity,
        SweepKindArg::Lambda => SweepKind::Lambda,
    };
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| spec.seed + i).collect();
    let cfg = experiment(&a.solver_args, admm);
    let records = run_sweep(kind, &spec, &a.values, &seeds, &cfg, a.out.as_deref())?;
    for r in &records {
        println!("{}", summary_line(r));
    }
    Ok(())
}

pub fn table1(a: &Table1Args) -> Outcome {
    let all = table1_cells();
    let cells = if a.cells.is_empty() {
        all
    } else {
        a.cells
            .iter()
            .map(|&i| {
                all.get(i)
                    .copied()
                    .ok_or_else(|| Failure::Usage(format!("cell index {i} out of range 0-9")))
            })
            .collect::<Result<_, _>>()?
    };
    let admm = match a.admm.as_str() {
        "none" => None,
        "ref" => Some(None),
        other => match other.strip_prefix("search:").map(str::parse::<usize>) {
            Some(Ok(g)) if g >= 2 => Some(Some(g)),
            _ => return Err(Failure::Usage(format!("--admm expects none, ref or search:GRID, got `{other}`"))),
        },
    };
    let mut cfg = Table1Config {
        p: a.p,
        seeds_per_cell: a.seeds,
        base_seed: a.base_seed,
        cells,
        admm,
        ..Table1Config::default()
    };
    cfg.experiment.lambda_factor = a.lambda_factor;
    let out = run_table1(&cfg, a.out.as_deref())?;
    for c in &out.cells {
        println!(
            "{} {}: runs={} nz={:.1} loss={:.4e} l2err={:.3e} fp={:.1} fn={:.1} time={:.3}s",
            c.problem, c.solver, c.runs, c.nz, c.loss, c.l2err, c.fp, c.fn_, c.time_s
        );
    }
    Ok(())
}

pub fn eps_search(a: &EpsSearchArgs) -> Outcome {
    let s = &a.solver_args;
    let src = load_source(&a.source, s.mu)?;
    let inst = &src.inst;
    let cfg = pmm_config(s);
    let lambda = s.lambda.unwrap_or_else(|| lambda_rule(inst, s.lambda_factor, s.lambda_floor));
    let (x0, _) = init_x0(inst, lambda, &cfg)?;
    let rho = s.rho.unwrap_or_else(|| choose_rho(&x0, inst.n(), inst.p()));
    let params = PenaltyParams::new(s.a, lambda, rho)?;
    let target = match (a.target_nz, &src.x_true) {
        (Some(t), _) => t,
        (None, Some(xt)) => xt.iter().filter(|v| **v != 0.0).count(),
        (None, None) => {
            let r = sparseplq_core::pmm::pmm_solve(inst, &params, &cfg, Some(&x0))?;
            nnz_approx(&r.x)
        }
    };
    let base = AdmmConfig {
        eps_smooth: a.lo,
        sigma: s.sigma,
        k_max: s.admm_k_max,
        eps_admm: s.eps_admm,
    };
    let start = AdmmStart::from_x0(inst, &x0)?;
    let (best, trials) = eps_grid_search(inst, &params, &start, (a.lo, a.hi), a.grid, target, &base)?;
    let mut records = Vec::new();
    for t in &trials {
        let r = RunRecord::from_report(&src.label, "ipadmm", inst, &t.report, Some(t.eps), src.x_true.as_deref())?;
        println!("{}", summary_line(&r));
        records.push(r);
    }
    println!("selected eps={best} (target nz={target})");
    write_out(&records, a.out.as_deref())
}

/// Built-in defaults as `key = value` lines, grouped by component.
pub fn defaults_text() -> String {
    let p = PmmConfig::default();
    let a = AdmmConfig::new(0.7);
    let t = Table1Config::default();
    let mut lines = vec![
        "# surrogate".to_string(),
        "a = 6".into(),
        "mu = 1e-8".into(),
        "lambda-factor = 0.2".into(),
        "lambda-floor = 0.05".into(),
        "# pmm".into(),
        format!("gamma1-0 = {}", p.gamma1_0),
        format!("gamma2-0 = {}", p.gamma2_0),
        format!("gamma-min = {:e}", p.gamma1_min),
        format!("varrho = {}", p.varrho),
        format!("tol = {:e}", p.tol),
        format!("tol-sparse = {:e}", p.tol_sparse),
        format!("k-max = {}", p.k_max),
        format!("eps-sncg = {:e}", p.sncg.eps_sncg),
        format!("eps-sncg-decay = {}", p.eps_decay),
        format!("eps-sncg-floor = {:e}", p.eps_floor),
        format!("x0-jmax = {}", p.x0_jmax),
        "# sncg".into(),
        format!("tau-bar = {}", p.sncg.tau_bar),
        format!("eta-bar = {}", p.sncg.eta_bar),
        format!("delta = {}", p.sncg.delta),
        format!("armijo-c = {:e}", p.sncg.armijo_c),
        format!("j-max = {}", p.sncg.j_max),
        "# ipadmm".into(),
        "sigma = 4.5/eps".into(),
        format!("eps-admm = {:e}", a.eps_admm),
        format!("admm-k-max = {}", a.k_max),
        "# table1".into(),
        format!("p = {}", t.p),
        format!("seeds = {}", t.seeds_per_cell),
        format!("lambda-factor = {}", t.experiment.lambda_factor),
        format!("corrupt = {}", t.corrupt_rate),
        format!("signal = gauss:s*:{}", t.signal_variance),
        format!("cauchy-cap = {}", t.cauchy_cap),
    ];
    lines.push(String::new());
    lines.join("\n")
}
