//! Experiment drivers, solution metrics and CSV records.

use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::data::{make_instance, table1_sizes, Covariance, NoiseDist, Signal, SyntheticInstance, SyntheticSpec};
use crate::error::{Error, Result};
use crate::ipadmm::{admm_solve, AdmmConfig, AdmmStart};
use crate::linalg::{dist_sq, norm2, norm_inf};
use crate::penalty::PenaltyParams;
use crate::pmm::{choose_rho, init_x0, pmm_solve, PmmConfig, SolveReport};
use crate::problem::{l1_loss, ProblemInstance};

pub const CSV_HEADER: [&str; 14] = [
    "problem",
    "solver",
    "lambda",
    "rho",
    "a",
    "eps",
    "nz",
    "loss",
    "l2err",
    "fp",
    "fn",
    "time_s",
    "iters",
    "termination",
];

/// Number of entries with `|x_i| > 1e-6 ‖x‖∞`.
pub fn nnz_approx(x: &[f64]) -> usize {
    let thr = 1e-6 * norm_inf(x);
    x.iter().filter(|v| v.abs() > thr).count()
}

fn detected(x: &[f64]) -> impl Iterator<Item = bool> + '_ {
    let thr = 1e-6 * norm_inf(x);
    x.iter().map(move |v| v.abs() > thr)
}

/// `‖x_out − x*‖ / ‖x*‖`.
pub fn l2err(x_out: &[f64], x_true: &[f64]) -> Result<f64> {
    Error::check_len("x_out", x_true.len(), x_out.len())?;
    let den = norm2(x_true);
    if den == 0.0 {
        return Err(Error::InvalidParameter("l2err needs a nonzero reference vector".into()));
    }
    Ok(dist_sq(x_out, x_true).sqrt() / den)
}

/// False positives and false zeros of `x_out` against the support of
/// `x_true`, using the [`nnz_approx`] detection rule.
pub fn fp_fn(x_out: &[f64], x_true: &[f64]) -> (usize, usize) {
    let mut fp = 0;
    let mut fnz = 0;
    for (hit, t) in detected(x_out).zip(x_true) {
        match (hit, *t != 0.0) {
            (true, false) => fp += 1,
            (false, true) => fnz += 1,
            _ => {}
        }
    }
    (fp, fnz)
}

pub fn loss_value(inst: &ProblemInstance, x_out: &[f64]) -> Result<f64> {
    Ok(l1_loss(&inst.residual(x_out)?))
}

/// `λ = max(floor, factor · ⫴A⫴₁ / n)`.
pub fn lambda_rule(inst: &ProblemInstance, factor: f64, floor: f64) -> f64 {
    (factor * inst.col_sum_norm() / inst.n() as f64).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub problem: String,
    pub solver: String,
    pub lambda: f64,
    pub rho: f64,
    pub a: f64,
    /// Smoothing parameter (iPADMM only).
    pub eps: Option<f64>,
    pub nz: usize,
    pub loss: f64,
    /// Absent for real data.
    pub l2err: Option<f64>,
    pub fp: Option<usize>,
    pub fn_: Option<usize>,
    pub time_s: f64,
    pub iters: usize,
    pub termination: String,
}

impl RunRecord {
    pub fn from_report(
        problem: &str,
        solver: &str,
        inst: &ProblemInstance,
        report: &SolveReport,
        eps: Option<f64>,
        x_true: Option<&[f64]>,
    ) -> Result<Self> {
        let (l2, fp, fnz) = match x_true {
            Some(xt) => {
                let (fp, fnz) = fp_fn(&report.x, xt);
                (Some(l2err(&report.x, xt)?), Some(fp), Some(fnz))
            }
            None => (None, None, None),
        };
        Ok(RunRecord {
            problem: problem.to_string(),
            solver: solver.to_string(),
            lambda: report.params.lambda(),
            rho: report.params.rho(),
            a: report.params.a(),
            eps,
            nz: nnz_approx(&report.x),
            loss: loss_value(inst, &report.x)?,
            l2err: l2,
            fp,
            fn_: fnz,
            time_s: report.elapsed.as_secs_f64(),
            iters: report.iterations,
            termination: report.termination.to_string(),
        })
    }

    /// Equality of everything except the wall time.
    pub fn same_results(&self, other: &RunRecord) -> bool {
        let mut a = self.clone();
        a.time_s = other.time_s;
        &a == other
    }

    fn to_fields(&self) -> Vec<String> {
        let opt_f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let opt_u = |v: Option<usize>| v.map(|u| u.to_string()).unwrap_or_default();
        vec![
            self.problem.clone(),
            self.solver.clone(),
            fmt_f64(self.lambda),
            fmt_f64(self.rho),
            fmt_f64(self.a),
            opt_f(self.eps),
            self.nz.to_string(),
            fmt_f64(self.loss),
            opt_f(self.l2err),
            opt_u(self.fp),
            opt_u(self.fn_),
            fmt_f64(self.time_s),
            self.iters.to_string(),
            self.termination.clone(),
        ]
    }

    fn from_fields(rec: &csv::StringRecord, line: usize) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("bad {what} field"),
        };
        let get = |i: usize| rec.get(i).ok_or_else(|| bad(CSV_HEADER[i]));
        let f = |i: usize| get(i)?.parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let u = |i: usize| get(i)?.parse::<usize>().map_err(|_| bad(CSV_HEADER[i]));
        let opt_f = |i: usize| match get(i)? {
            "" => Ok(None),
            s => s.parse::<f64>().map(Some).map_err(|_| bad(CSV_HEADER[i])),
        };
        let opt_u = |i: usize| match get(i)? {
            "" => Ok(None),
            s => s.parse::<usize>().map(Some).map_err(|_| bad(CSV_HEADER[i])),
        };
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        Ok(RunRecord {
            problem: get(0)?.to_string(),
            solver: get(1)?.to_string(),
            lambda: f(2)?,
            rho: f(3)?,
            a: f(4)?,
            eps: opt_f(5)?,
            nz: u(6)?,
            loss: f(7)?,
            l2err: opt_f(8)?,
            fp: opt_u(9)?,
            fn_: opt_u(10)?,
            time_s: f(11)?,
            iters: u(12)?,
            termination: get(13)?.to_string(),
        })
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_records<W: std::io::Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.write_record(r.to_fields())?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(r: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected CSV header".into(),
        });
    }
    rd.records()
        .enumerate()
        .map(|(i, rec)| RunRecord::from_fields(&rec?, i + 2))
        .collect()
}

pub fn save_records(records: &[RunRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, std::io::BufWriter::new(f)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(std::io::BufReader::new(f))
}

/// Index of the smallest ε whose `Nz` is closest to `target_nz`.
/// `trials` holds `(ε, Nz)` pairs in any order.
pub fn select_eps(trials: &[(f64, usize)], target_nz: usize) -> Option<usize> {
    (0..trials.len()).min_by(|&i, &j| {
        let (ei, ni) = trials[i];
        let (ej, nj) = trials[j];
        ni.abs_diff(target_nz)
            .cmp(&nj.abs_diff(target_nz))
            .then(ei.total_cmp(&ej))
    })
}

/// `grid` equispaced points of `[lo, hi]`.
pub fn eps_grid(lo: f64, hi: f64, grid: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < hi) || grid < 2 {
        return Err(Error::InvalidParameter(format!(
            "eps grid needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}] with {grid}"
        )));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    Ok((0..grid)
        .map(|i| if i + 1 == grid { hi } else { lo + step * i as f64 })
        .collect())
}

#[derive(Debug, Clone)]
pub struct EpsTrial {
    pub eps: f64,
    pub nz: usize,
    pub report: SolveReport,
}

/// Runs iPADMM for each ε of the grid (in parallel) and returns the
/// selected ε together with all trials in grid order.
pub fn eps_grid_search(
    inst: &ProblemInstance,
    params: &PenaltyParams,
    start: &AdmmStart,
    interval: (f64, f64),
    grid: usize,
    target_nz: usize,
    base: &AdmmConfig,
) -> Result<(f64, Vec<EpsTrial>)> {
    let grid = eps_grid(interval.0, interval.1, grid)?;
    let trials: Vec<EpsTrial> = grid
        .par_iter()
        .map(|&eps| {
            let cfg = AdmmConfig { eps_smooth: eps, ..*base };
            let report = admm_solve(inst, params, &cfg, start)?;
            Ok(EpsTrial {
                eps,
                nz: nnz_approx(&report.x),
                report,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, usize)> = trials.iter().map(|t| (t.eps, t.nz)).collect();
    let best = select_eps(&pairs, target_nz).expect("grid is nonempty");
    info!("eps search: selected {} (nz {}, target {target_nz})", trials[best].eps, trials[best].nz);
    Ok((trials[best].eps, trials))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsChoice {
    Fixed(f64),
    Search { lo: f64, hi: f64, grid: usize },
}

/// Baseline settings. `sigma = None` means `4.5/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmChoice {
    pub eps: EpsChoice,
    pub sigma: Option<f64>,
    pub k_max: usize,
    pub eps_admm: f64,
}

impl AdmmChoice {
    pub fn fixed(eps: f64) -> Self {
        let d = AdmmConfig::new(eps);
        AdmmChoice {
            eps: EpsChoice::Fixed(eps),
            sigma: None,
            k_max: d.k_max,
            eps_admm: d.eps_admm,
        }
    }

    fn config(&self, eps: f64) -> AdmmConfig {
        AdmmConfig {
            eps_smooth: eps,
            sigma: self.sigma,
            k_max: self.k_max,
            eps_admm: self.eps_admm,
        }
    }
}

/// How one instance is solved by both methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub a: f64,
    pub lambda_factor: f64,
    pub lambda_floor: f64,
    /// Overrides the `λ` rule.
    pub lambda: Option<f64>,
    /// Overrides the `ρ` rule.
    pub rho: Option<f64>,
    pub pmm: PmmConfig,
    /// `None` skips the baseline.
    pub admm: Option<AdmmChoice>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            a: 6.0,
            lambda_factor: 0.2,
            lambda_floor: 0.05,
            lambda: None,
            rho: None,
            pmm: PmmConfig::default(),
            admm: Some(AdmmChoice::fixed(0.7)),
        }
    }
}

/// Solves one instance with PMMSN and, if configured, iPADMM from the same
/// `x⁰` and surrogate parameters. Times cover the solver calls only.
pub fn run_instance(
    label: &str,
    inst: &ProblemInstance,
    x_true: Option<&[f64]>,
    cfg: &ExperimentConfig,
) -> Result<Vec<RunRecord>> {
    let lambda = cfg
        .lambda
        .unwrap_or_else(|| lambda_rule(inst, cfg.lambda_factor, cfg.lambda_floor));
    let (x0, _) = init_x0(inst, lambda, &cfg.pmm)?;
    let rho = cfg.rho.unwrap_or_else(|| choose_rho(&x0, inst.n(), inst.p()));
    let params = PenaltyParams::new(cfg.a, lambda, rho)?;

    let pmm = pmm_solve(inst, &params, &cfg.pmm, Some(&x0))?;
    let mut out = vec![RunRecord::from_report(label, "pmm", inst, &pmm, None, x_true)?];

    if let Some(choice) = &cfg.admm {
        let start = AdmmStart::from_x0(inst, &x0)?;
        let (eps, report) = match choice.eps {
            EpsChoice::Fixed(eps) => (eps, admm_solve(inst, &params, &choice.config(eps), &start)?),
            EpsChoice::Search { lo, hi, grid } => {
                let target = match x_true {
                    Some(xt) => xt.iter().filter(|v| **v != 0.0).count(),
                    None => nnz_approx(&pmm.x),
                };
                let base = choice.config(lo);
                let (eps, trials) = eps_grid_search(inst, &params, &start, (lo, hi), grid, target, &base)?;
                let best = trials.into_iter().find(|t| t.eps == eps).expect("selected eps is a grid point");
                (eps, best.report)
            }
        };
        out.push(RunRecord::from_report(label, "ipadmm", inst, &report, Some(eps), x_true)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Values are corruption rates `|I|/n`.
    Sparsity,
    /// Values are `λ`.
    Lambda,
}

/// Runs both solvers for every `value × seed` pair (in parallel) and
/// writes the records in `value`-major, seed-minor order.
pub fn run_sweep(
    kind: SweepKind,
    base: &SyntheticSpec,
    values: &[f64],
    seeds: &[u64],
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<Vec<RunRecord>> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("sweep needs at least one value and one seed".into()));
    }
    let jobs: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let chunks: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let mut spec = base.clone();
            spec.seed = seed;
            let mut ecfg = *cfg;
            let label = match kind {
                SweepKind::Sparsity => {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::InvalidParameter(format!("corruption rate {value} outside [0, 1]")));
                    }
                    spec.corrupt_count = (value * spec.n as f64).floor() as usize;
                    format!("sparsity={value}/seed={seed}")
                }
                SweepKind::Lambda => {
                    ecfg.lambda = Some(value);
                    format!("lambda={value}/seed={seed}")
                }
            };
            let si = make_instance(&spec)?;
            run_instance(&label, &si.instance, Some(&si.x_true), &ecfg)
        })
        .collect::<Result<_>>()?;
    let records: Vec<RunRecord> = chunks.into_iter().flatten().collect();
    if let Some(path) = out {
        save_records(&records, path)?;
    }
    Ok(records)
}

/// One `(Σ, noise)` family of the sparse-noise table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Cell {
    pub cov: Covariance,
    pub noise: NoiseDist,
    /// ε search interval and the reference ε used when not searching.
    pub eps_interval: (f64, f64),
    pub eps_ref: f64,
}

impl Table1Cell {
    pub fn label(&self) -> String {
        let cov = match self.cov {
            Covariance::Ar(r) => format!("AR{r}"),
            Covariance::Cs(a) => format!("CS{a}"),
        };
        let noise = match self.noise {
            NoiseDist::Gaussian { variance } => format!("N(0,{variance})"),
            NoiseDist::ScaledT { scale, dof } => format!("{scale:.4}*t{dof}"),
            NoiseDist::MixtureNormal => "MN".into(),
            NoiseDist::Laplace => "Laplace".into(),
            NoiseDist::Cauchy => "Cauchy".into(),
            NoiseDist::CauchyScaledToSignal => "ScaledCauchy".into(),
        };
        format!("{cov}|{noise}")
    }
}

/// The ten published families with their ε intervals and selected ε.
pub fn table1_cells() -> Vec<Table1Cell> {
    let t4 = NoiseDist::ScaledT { scale: 2f64.sqrt(), dof: 4.0 };
    let n100 = NoiseDist::Gaussian { variance: 100.0 };
    let ar = Covariance::Ar(0.5);
    let cs = Covariance::Cs(0.6);
    let cell = |cov, noise, lo, hi, eps_ref| Table1Cell {
        cov,
        noise,
        eps_interval: (lo, hi),
        eps_ref,
    };
    vec![
        cell(ar, n100, 15.0, 30.0, 25.0),
        cell(ar, t4, 10.0, 30.0, 15.0),
        cell(ar, NoiseDist::MixtureNormal, 10.0, 30.0, 20.0),
        cell(ar, NoiseDist::Laplace, 10.0, 30.0, 15.0),
        cell(ar, NoiseDist::Cauchy, 20.0, 35.0, 27.0),
        cell(cs, n100, 1600.0, 2000.0, 1800.0),
        cell(cs, t4, 1000.0, 1500.0, 1225.0),
        cell(cs, NoiseDist::MixtureNormal, 1000.0, 1500.0, 1350.0),
        cell(cs, NoiseDist::Laplace, 1000.0, 1500.0, 1150.0),
        cell(cs, NoiseDist::Cauchy, 1200.0, 1800.0, 1500.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Config {
    pub p: usize,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
    pub cells: Vec<Table1Cell>,
    pub corrupt_rate: f64,
    pub signal_variance: f64,
    /// Cauchy draws are redrawn until `‖ϖ‖∞` is below this cap.
    pub cauchy_cap: f64,
    /// `None` skips the baseline; `Some(None)` uses each cell's reference
    /// ε; `Some(Some(grid))` searches the cell's interval.
    pub admm: Option<Option<usize>>,
    pub experiment: ExperimentConfig,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            p: 5000,
            seeds_per_cell: 10,
            base_seed: 0,
            cells: table1_cells(),
            corrupt_rate: 0.3,
            signal_variance: 4.0,
            cauchy_cap: 1000.0,
            admm: Some(None),
            experiment: ExperimentConfig {
                lambda_factor: 0.12,
                ..ExperimentConfig::default()
            },
        }
    }
}

impl Table1Config {
    /// Instance specification of replication `rep` of `cell`.
    pub fn instance_spec(&self, cell: &Table1Cell, rep: usize) -> SyntheticSpec {
        let (s_star, n) = table1_sizes(self.p);
        let cauchy = matches!(cell.noise, NoiseDist::Cauchy | NoiseDist::CauchyScaledToSignal);
        SyntheticSpec {
            n,
            p: self.p,
            cov: cell.cov,
            signal: Signal::GaussianNz {
                s_star,
                variance: self.signal_variance,
            },
            noise: cell.noise,
            corrupt_count: (self.corrupt_rate * n as f64).floor() as usize,
            seed: self.base_seed + rep as u64,
            noise_cap: cauchy.then_some(self.cauchy_cap),
        }
    }
}

/// Per-cell, per-solver averages over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub problem: String,
    pub solver: String,
    pub runs: usize,
    pub nz: f64,
    pub loss: f64,
    pub l2err: f64,
    pub fp: f64,
    pub fn_: f64,
    pub time_s: f64,
    pub iters: f64,
    pub spec_norm_sq: f64,
    pub noise_inf: f64,
}

#[derive(Debug, Clone)]
pub struct Table1Output {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

/// Averages `runs` per `(cell label, solver)`, where a run's cell is the
/// part of its problem label before `/`.
pub fn summarize(runs: &[RunRecord], extras: &[(String, f64, f64)]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in runs {
        let cell = r.problem.split('/').next().unwrap_or("").to_string();
        let key = (cell, r.solver.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(cell, solver)| {
            let rs: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.solver == solver && r.problem.split('/').next() == Some(cell.as_str()))
                .collect();
            let ex: Vec<&(String, f64, f64)> = extras.iter().filter(|e| e.0 == cell).collect();
            CellSummary {
                runs: rs.len(),
                nz: mean(rs.iter().map(|r| r.nz as f64)),
                loss: mean(rs.iter().map(|r| r.loss)),
                l2err: mean(rs.iter().filter_map(|r| r.l2err)),
                fp: mean(rs.iter().filter_map(|r| r.fp.map(|v| v as f64))),
                fn_: mean(rs.iter().filter_map(|r| r.fn_.map(|v| v as f64))),
                time_s: mean(rs.iter().map(|r| r.time_s)),
                iters: mean(rs.iter().map(|r| r.iters as f64)),
                spec_norm_sq: mean(ex.iter().map(|e| e.1)),
                noise_inf: mean(ex.iter().map(|e| e.2)),
                problem: cell,
                solver,
            }
        })
        .collect()
}

pub fn write_summaries<W: std::io::Write>(cells: &[CellSummary], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "problem", "solver", "runs", "nz", "loss", "l2err", "fp", "fn", "time_s", "iters", "spec_norm_sq", "noise_inf",
    ])?;
    for c in cells {
        let mut row = vec![c.problem.clone(), c.solver.clone(), c.runs.to_string()];
        row.extend(
            [c.nz, c.loss, c.l2err, c.fp, c.fn_, c.time_s, c.iters, c.spec_norm_sq, c.noise_inf]
                .iter()
                .map(|v| fmt_f64(*v)),
        );
        wr.write_record(row)?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Path of the per-cell summary next to a run-level CSV:
/// `out.csv` becomes `out_cells.csv`.
pub fn summary_path(out: &Path) -> std::path::PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("table1");
    out.with_file_name(format!("{stem}_cells.csv"))
}

/// Runs every cell's replications (in parallel), writes per-run rows to
/// `out` and per-cell averages to [`summary_path`].
pub fn run_table1(cfg: &Table1Config, out: Option<&Path>) -> Result<Table1Output> {
    if cfg.seeds_per_cell == 0 || cfg.cells.is_empty() {
        return Err(Error::Empty("table needs at least one cell and one seed".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.cells.len())
        .flat_map(|c| (0..cfg.seeds_per_cell).map(move |r| (c, r)))
        .collect();
    let t = Instant::now();
    let results: Vec<(Vec<RunRecord>, (String, f64, f64))> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let cell = &cfg.cells[c];
            let spec = cfg.instance_spec(cell, rep);
            let si: SyntheticInstance = make_instance(&spec)?;
            let mut ecfg = cfg.experiment;
            ecfg.admm = match cfg.admm {
                None => None,
                Some(None) => Some(AdmmChoice {
                    eps: EpsChoice::Fixed(cell.eps_ref),
                    ..ecfg.admm.unwrap_or(AdmmChoice::fixed(cell.eps_ref))
                }),
                Some(Some(grid)) => Some(AdmmChoice {
                    eps: EpsChoice::Search {
                        lo: cell.eps_interval.0,
                        hi: cell.eps_interval.1,
                        grid,
                    },
                    ..ecfg.admm.unwrap_or(AdmmChoice::fixed(cell.eps_ref))
                }),
            };
            let label = format!("{}/seed={}", cell.label(), spec.seed);
            let recs = run_instance(&label, &si.instance, Some(&si.x_true), &ecfg)?;
            let extra = (cell.label(), si.instance.spec_norm_sq(), norm_inf(&si.noise));
            Ok((recs, extra))
        })
        .collect::<Result<_>>()?;
    info!("table: {} runs in {:.1}s", jobs.len(), t.elapsed().as_secs_f64());
    let (chunks, extras): (Vec<Vec<RunRecord>>, Vec<_>) = results.into_iter().unzip();
    let runs: Vec<RunRecord> = chunks.into_iter().flatten().collect();
    let cells = summarize(&runs, &extras);
    if let Some(path) = out {
        save_records(&runs, path)?;
        let sp = summary_path(path);
        let f = std::fs::File::create(&sp).map_err(|e| Error::io(&sp, e))?;
        write_summaries(&cells, std::io::BufWriter::new(f))?;
    }
    Ok(Table1Output { runs, cells })
}
