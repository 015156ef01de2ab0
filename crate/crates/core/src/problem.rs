//! Problem instances `(A, b, μ)`, the averaged ℓ1 loss, and LIBSVM ingestion.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, DenseMatrix};

/// Default ridge weight μ.
pub const DEFAULT_MU: f64 = 1e-8;

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 1000;
const POWER_SAFETY: f64 = 1.001;
const POWER_FALLBACK_SAFETY: f64 = 1.01;

/// Design matrix, observations and ridge weight, with the matrix norms the
/// solvers need cached at construction.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    a: DenseMatrix,
    b: Vec<f64>,
    mu: f64,
    spec_norm_sq: f64,
    col_sum_norm: f64,
    max_abs: f64,
}

impl ProblemInstance {
    pub fn new(a: DenseMatrix, b: Vec<f64>, mu: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Empty(format!(
                "design matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Error::check_len("b", a.nrows(), b.len())?;
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite data".into()));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
        }
        let spec_norm_sq = spectral_norm_sq(&a);
        let col_sum_norm = a.col_sum_norm();
        let max_abs = a.max_abs();
        Ok(ProblemInstance {
            a,
            b,
            mu,
            spec_norm_sq,
            col_sum_norm,
            max_abs,
        })
    }

    /// Same data, different ridge weight. Cached norms are reused.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be >= 0, got {mu}")));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// Upper estimate of ‖A‖² (squared spectral norm).
    pub fn spec_norm_sq(&self) -> f64 {
        self.spec_norm_sq
    }

    /// ⫴A⫴₁, the column sum norm.
    pub fn col_sum_norm(&self) -> f64 {
        self.col_sum_norm
    }

    /// ‖A‖∞, the elementwise maximum norm.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    pub fn b_norm(&self) -> f64 {
        norm2(&self.b)
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("x", self.p(), x.len())?;
        let mut r = self.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        Ok(r)
    }

    /// `F_μ(x) = (1/n)‖Ax − b‖₁ + (μ/2)‖x‖²`.
    pub fn f_mu(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(l1_loss(&r) + 0.5 * self.mu * dot(x, x))
    }
}

/// Averaged ℓ1 loss `(1/n) Σ |z_i|`.
pub fn l1_loss(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    z.iter().map(|v| v.abs()).sum::<f64>() / z.len() as f64
}

/// Outcome of the raw power iteration on `AᵀA`.
#[derive(Debug, Clone, Copy)]
pub struct PowerEstimate {
    /// Final Rayleigh quotient (no safety margin applied).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `AᵀA` from a fixed, slightly perturbed all-ones start.
pub fn power_iteration(a: &DenseMatrix, tol: f64, max_iters: usize) -> PowerEstimate {
    let p = a.ncols();
    let mut v: Vec<f64> = (0..p)
        .map(|j| 1.0 + 1e-3 * ((j as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.nrows()];
    let mut w = vec![0.0; p];
    let mut value = 0.0;
    for it in 1..=max_iters {
        a.matvec_into(&v, &mut av);
        a.tr_matvec_into(&av, &mut w);
        // v is unit, so vᵀAᵀAv = ‖Av‖².
        let next = dot(&av, &av);
        let nw = norm2(&w);
        if nw == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if it > 1 && (next - value).abs() <= tol * next {
            return PowerEstimate {
                value: next,
                iterations: it,
                converged: true,
            };
        }
        value = next;
    }
    PowerEstimate {
        value,
        iterations: max_iters,
        converged: false,
    }
}

/// Upper estimate of ‖A‖² for step-size formulas: the power-iteration
/// Rayleigh quotient times 1.001 (or times 1.01 when the iteration did not
/// converge, with a warning).
pub fn spectral_norm_sq(a: &DenseMatrix) -> f64 {
    let est = power_iteration(a, POWER_TOL, POWER_MAX_ITERS);
    if est.converged {
        est.value * POWER_SAFETY
    } else {
        warn!(
            "power iteration for ||A||^2 did not converge in {} iterations; using best estimate",
            est.iterations
        );
        est.value * POWER_FALLBACK_SAFETY
    }
}

/// Reads a LIBSVM regression file into a dense instance with `μ = DEFAULT_MU`.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(&text)
}

/// Parses LIBSVM text: `label idx:val idx:val ...`, 1-based strictly
/// increasing indices, `p` = largest index seen.
pub fn parse_libsvm(text: &str) -> Result<ProblemInstance> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut p = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        if label.starts_with('#') {
            return Err(perr("comments are not supported".into()));
        }
        let label: f64 = label
            .parse()
            .map_err(|_| perr(format!("bad label {label:?}")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| perr(format!("bad feature index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| perr(format!("bad feature value {val:?}")))?;
            if idx == 0 {
                return Err(perr("feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(perr(format!(
                    "feature indices must be increasing ({idx} after {last})"
                )));
            }
            if !label.is_finite() || !val.is_finite() {
                return Err(perr("non-finite value".into()));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        p = p.max(last);
        labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Empty("LIBSVM input has no samples".into()));
    }
    if p == 0 {
        return Err(Error::Empty("LIBSVM input has no features".into()));
    }
    let mut a = DenseMatrix::zeros(rows.len(), p);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            a.set(i, j, v);
        }
    }
    ProblemInstance::new(a, labels, DEFAULT_MU)
}

/// Writes `(A, b)` in LIBSVM format, omitting zero features. Floats use the
/// shortest round-trip representation.
pub fn write_libsvm<W: Write>(inst: &ProblemInstance, mut out: W) -> std::io::Result<()> {
    let a = inst.a();
    for i in 0..inst.n() {
        write!(out, "{}", inst.b()[i])?;
        for j in 0..inst.p() {
            let v = a.get(i, j);
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
