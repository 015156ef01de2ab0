//! Synthetic instances `b = A x* + ϖ` with Gaussian design rows, sparse
//! signals and sparse heavy-tailed noise.
//!
//! All randomness comes from ChaCha8 seeded with `SyntheticSpec::seed`,
//! using separate streams for the design, the signal and the noise, so the
//! same seed yields byte-identical instances on every platform.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, norm_sq, DenseMatrix};
use crate::problem::{ProblemInstance, DEFAULT_MU};

const STREAM_DESIGN: u64 = 0;
const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 16;

const MAGIC: &[u8; 8] = b"SPLQINST";
const VERSION: u32 = 1;
const TEXT_HEADER: &str = "sparseplq-instance 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance {
    /// `Σ_ij = r^|i−j|`.
    Ar(f64),
    /// `Σ_ij = α + (1 − α)·[i = j]`.
    Cs(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    /// `(2, 0, 1.5, 0, 0.8, 0, 0, 1, 0, 1.75, 0, 0, 0.75, 0, 0, 0.3, 0, …)`.
    Fixed16,
    /// `s_star` uniformly placed entries drawn from `N(0, variance)`.
    GaussianNz { s_star: usize, variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDist {
    Gaussian { variance: f64 },
    /// `scale × t_dof`.
    ScaledT { scale: f64, dof: f64 },
    /// `N(0, σ²)` with `σ ~ Unif(1, 5)` drawn per entry.
    MixtureNormal,
    /// Density `0.5 exp(−|u|)`.
    Laplace,
    Cauchy,
    /// Cauchy draws `ξ` rescaled so that `‖ϖ_I‖ = ‖Ax*‖/3`.
    CauchyScaledToSignal,
}

pub const FIXED16: [f64; 16] = [
    2.0, 0.0, 1.5, 0.0, 0.8, 0.0, 0.0, 1.0, 0.0, 1.75, 0.0, 0.0, 0.75, 0.0, 0.0, 0.3,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub cov: Covariance,
    pub signal: Signal,
    pub noise: NoiseDist,
    /// `|I|`, the number of corrupted observations.
    pub corrupt_count: usize,
    pub seed: u64,
    /// Redraw the noise until `‖ϖ‖∞ < cap`.
    pub noise_cap: Option<f64>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidParameter("n and p must be positive".into()));
        }
        if self.corrupt_count > self.n {
            return Err(Error::InvalidParameter(format!(
                "corrupt_count {} exceeds n = {}",
                self.corrupt_count, self.n
            )));
        }
        match self.signal {
            Signal::Fixed16 if self.p < 16 => {
                return Err(Error::InvalidParameter("Fixed16 signal needs p >= 16".into()))
            }
            Signal::GaussianNz { s_star, variance } => {
                if s_star > self.p {
                    return Err(Error::InvalidParameter(format!("s_star {s_star} exceeds p = {}", self.p)));
                }
                if !(variance > 0.0) {
                    return Err(Error::InvalidParameter("signal variance must be > 0".into()));
                }
            }
            _ => {}
        }
        match self.cov {
            Covariance::Ar(v) | Covariance::Cs(v) if !(v > 0.0 && v < 1.0) => {
                return Err(Error::InvalidParameter(format!("covariance parameter must lie in (0, 1), got {v}")))
            }
            _ => {}
        }
        match self.noise {
            NoiseDist::Gaussian { variance } if !(variance > 0.0) => {
                Err(Error::InvalidParameter("noise variance must be > 0".into()))
            }
            NoiseDist::ScaledT { scale, dof } if !(scale > 0.0 && dof > 0.0) => {
                Err(Error::InvalidParameter("t noise needs scale > 0 and dof > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `s* = ⌊√p/2⌋` and `n = ⌊2 s* ln p⌋`.
pub fn table1_sizes(p: usize) -> (usize, usize) {
    let s = ((p as f64).sqrt() / 2.0).floor() as usize;
    let n = (2.0 * s as f64 * (p as f64).ln()).floor() as usize;
    (s, n)
}

/// Lower-triangular Cholesky factor of a structured covariance, applied
/// without forming the `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum CovFactor {
    Ar { r: f64, p: usize },
    /// `L_jj = diag[j]` and `L_ij = below[j]` for all `i > j`.
    Cs { diag: Vec<f64>, below: Vec<f64> },
}

impl CovFactor {
    pub fn dim(&self) -> usize {
        match self {
            CovFactor::Ar { p, .. } => *p,
            CovFactor::Cs { diag, .. } => diag.len(),
        }
    }

    /// `out = L g`.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        match self {
            CovFactor::Ar { r, .. } => {
                let s = (1.0 - r * r).sqrt();
                let mut prev = 0.0;
                for (i, (o, gi)) in out.iter_mut().zip(g).enumerate() {
                    prev = if i == 0 { *gi } else { r * prev + s * gi };
                    *o = prev;
                }
            }
            CovFactor::Cs { diag, below } => {
                let mut acc = 0.0;
                for i in 0..g.len() {
                    out[i] = acc + diag[i] * g[i];
                    acc += below[i] * g[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            CovFactor::Ar { r, p } => {
                let s = (1.0 - r * r).sqrt();
                DenseMatrix::from_fn(*p, *p, |i, j| match (i, j) {
                    (i, j) if i < j => 0.0,
                    (i, 0) => r.powi(i as i32),
                    (i, j) => s * r.powi((i - j) as i32),
                })
            }
            CovFactor::Cs { diag, below } => {
                let p = diag.len();
                DenseMatrix::from_fn(p, p, |i, j| match i.cmp(&j) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => diag[j],
                    std::cmp::Ordering::Greater => below[j],
                })
            }
        }
    }
}

pub fn gen_covariance(cov: Covariance, p: usize) -> Result<CovFactor> {
    match cov {
        Covariance::Ar(r) => {
            if !(r > -1.0 && r < 1.0) {
                return Err(Error::NotPositiveDefinite(0));
            }
            Ok(CovFactor::Ar { r, p })
        }
        Covariance::Cs(alpha) => {
            if !(alpha >= 0.0 && alpha < 1.0) {
                return Err(Error::NotPositiveDefinite(0));
            }
            let mut diag = Vec::with_capacity(p);
            let mut below = Vec::with_capacity(p);
            let mut beta = alpha;
            for j in 0..p {
                let d2 = 1.0 - alpha + beta;
                if !(d2 > 0.0) {
                    return Err(Error::NotPositiveDefinite(j));
                }
                let d = d2.sqrt();
                diag.push(d);
                below.push(beta / d);
                beta = beta * (1.0 - alpha) / d2;
            }
            Ok(CovFactor::Cs { diag, below })
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gen_true_x(signal: Signal, p: usize, seed: u64) -> Vec<f64> {
    let mut x = vec![0.0; p];
    match signal {
        Signal::Fixed16 => {
            let k = p.min(16);
            x[..k].copy_from_slice(&FIXED16[..k]);
        }
        Signal::GaussianNz { s_star, variance } => {
            let mut rng = rng_for(seed, STREAM_SIGNAL);
            let normal = Normal::new(0.0, variance.sqrt()).expect("variance checked by caller");
            let mut support = index::sample(&mut rng, p, s_star.min(p)).into_vec();
            support.sort_unstable();
            for i in support {
                let mut v = 0.0;
                while v == 0.0 {
                    v = normal.sample(&mut rng);
                }
                x[i] = v;
            }
        }
    }
    x
}

/// Uniform on the open interval (0, 1).
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn draw<R: Rng>(dist: NoiseDist, rng: &mut R) -> f64 {
    match dist {
        NoiseDist::Gaussian { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
        NoiseDist::ScaledT { scale, dof } => {
            scale * StudentT::new(dof).expect("dof checked by caller").sample(rng)
        }
        NoiseDist::MixtureNormal => {
            let sigma = rng.random_range(1.0..5.0);
            sigma * rng.sample::<f64, _>(StandardNormal)
        }
        NoiseDist::Laplace => {
            let u = open_unit(rng) - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
        NoiseDist::Cauchy | NoiseDist::CauchyScaledToSignal => {
            (std::f64::consts::PI * (open_unit(rng) - 0.5)).tan()
        }
    }
}

fn noise_from_rng<R: Rng>(
    dist: NoiseDist,
    corrupt_count: usize,
    ax_true: &[f64],
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let n = ax_true.len();
    let mut set = index::sample(rng, n, corrupt_count).into_vec();
    set.sort_unstable();
    let mut noise = vec![0.0; n];
    for &i in &set {
        let mut v = 0.0;
        while v == 0.0 {
            v = draw(dist, rng);
        }
        noise[i] = v;
    }
    if dist == NoiseDist::CauchyScaledToSignal && !set.is_empty() {
        let s = norm2(ax_true) / (3.0 * norm2(&noise));
        noise.iter_mut().for_each(|v| *v *= s);
    }
    (noise, set)
}

/// Draws `ϖ` with `corrupt_count` nonzero entries at uniformly chosen
/// positions. Returns the noise and its sorted support `I`.
pub fn sample_noise(
    dist: NoiseDist,
    corrupt_count: usize,
    ax_true: &[f64],
    seed: u64,
) -> (Vec<f64>, Vec<usize>) {
    noise_from_rng(dist, corrupt_count.min(ax_true.len()), ax_true, &mut rng_for(seed, STREAM_NOISE))
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance: ProblemInstance,
    pub x_true: Vec<f64>,
    /// Sorted support of `x_true`.
    pub support: Vec<usize>,
    pub noise: Vec<f64>,
    /// Sorted support of the noise.
    pub corrupt_set: Vec<usize>,
}

impl SyntheticInstance {
    fn assemble(a: DenseMatrix, x_true: Vec<f64>, noise: Vec<f64>, corrupt_set: Vec<usize>, mu: f64) -> Result<Self> {
        let ax = a.matvec(&x_true);
        let b: Vec<f64> = ax.iter().zip(&noise).map(|(v, w)| v + w).collect();
        let support = (0..x_true.len()).filter(|&i| x_true[i] != 0.0).collect();
        Ok(SyntheticInstance {
            instance: ProblemInstance::new(a, b, mu)?,
            x_true,
            support,
            noise,
            corrupt_set,
        })
    }
}

pub fn make_instance(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let factor = gen_covariance(spec.cov, spec.p)?;
    let mut rng = rng_for(spec.seed, STREAM_DESIGN);
    let mut a = DenseMatrix::zeros(spec.n, spec.p);
    let mut g = vec![0.0; spec.p];
    let mut row = vec![0.0; spec.p];
    for i in 0..spec.n {
        g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        factor.apply(&g, &mut row);
        for (j, v) in row.iter().enumerate() {
            a.set(i, j, *v);
        }
    }
    let x_true = gen_true_x(spec.signal, spec.p, spec.seed);
    let ax = a.matvec(&x_true);

    let mut attempt = 0u64;
    let (noise, set) = loop {
        let mut rng = rng_for(spec.seed, STREAM_NOISE + attempt);
        let (noise, set) = noise_from_rng(spec.noise, spec.corrupt_count, &ax, &mut rng);
        match spec.noise_cap {
            Some(cap) if norm_inf(&noise) >= cap => {
                attempt += 1;
                if attempt > 10_000 {
                    return Err(Error::InvalidParameter(format!(
                        "no noise draw with max-norm below {cap} after 10000 attempts"
                    )));
                }
            }
            _ => break (noise, set),
        }
    };
    SyntheticInstance::assemble(a, x_true, noise, set, DEFAULT_MU)
}

/// Random vectors `x` in the cone `‖x_{Sᶜ}‖₁ ≤ 3‖x_S‖₁`, where each sample
/// draws its own `S ⊇ support` with `|S| ≤ max(1, ⌊1.5 |support|⌋)`.
pub fn re_cone_samples(p: usize, support: &[usize], samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 0);
    let s0 = support.len();
    let max_s = ((1.5 * s0 as f64).floor() as usize).max(1).max(s0).min(p);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut in_s = vec![false; p];
        for &i in support {
            in_s[i] = true;
        }
        let extra = rng.random_range(s0..=max_s) - s0;
        let rest: Vec<usize> = (0..p).filter(|&i| !in_s[i]).collect();
        if !rest.is_empty() {
            for k in index::sample(&mut rng, rest.len(), extra.min(rest.len())) {
                in_s[rest[k]] = true;
            }
        }
        if !in_s.iter().any(|&b| b) {
            in_s[rng.random_range(0..p)] = true;
        }
        let mut x: Vec<f64> = (0..p)
            .map(|i| if in_s[i] { rng.sample(StandardNormal) } else { 0.0 })
            .collect();
        let l1_s: f64 = x.iter().map(|v| v.abs()).sum();
        let tail: Vec<f64> = (0..p)
            .map(|i| if in_s[i] { 0.0 } else { rng.sample(StandardNormal) })
            .collect();
        let l1_t: f64 = tail.iter().map(|v| v.abs()).sum();
        if l1_t > 0.0 {
            let scale = rng.random::<f64>() * 3.0 * l1_s / l1_t;
            for (xi, ti) in x.iter_mut().zip(&tail) {
                *xi += scale * ti;
            }
        }
        out.push(x);
    }
    out
}

/// Smallest sampled `(1/2n)‖Ax‖²/‖x‖²` over [`re_cone_samples`], an
/// empirical upper bound on the restricted eigenvalue constant.
pub fn re_condition_estimate(inst: &ProblemInstance, support: &[usize], samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    if let Some(&i) = support.iter().find(|&&i| i >= inst.p()) {
        return Err(Error::InvalidParameter(format!("support index {i} out of range")));
    }
    let n = inst.n() as f64;
    Ok(re_cone_samples(inst.p(), support, samples, seed)
        .iter()
        .map(|x| norm_sq(&inst.a().matvec(x)) / (2.0 * n * norm_sq(x)))
        .fold(f64::INFINITY, f64::min))
}

fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64s<R: Read>(r: &mut R, len: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Binary layout, little endian: magic `SPLQINST`, `u32` version, `u64` n,
/// `u64` p, `f64` μ, row-major `A`, `b`, `x_true`, `ϖ`, `u64 |I|`, then the
/// indices of `I` as `u64`.
pub fn write_instance<W: Write>(si: &SyntheticInstance, mut w: W) -> std::io::Result<()> {
    let inst = &si.instance;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(inst.n() as u64).to_le_bytes())?;
    w.write_all(&(inst.p() as u64).to_le_bytes())?;
    w.write_all(&inst.mu().to_le_bytes())?;
    put_f64s(&mut w, &inst.a().to_row_major())?;
    put_f64s(&mut w, inst.b())?;
    put_f64s(&mut w, &si.x_true)?;
    put_f64s(&mut w, &si.noise)?;
    w.write_all(&(si.corrupt_set.len() as u64).to_le_bytes())?;
    for &i in &si.corrupt_set {
        w.write_all(&(i as u64).to_le_bytes())?;
    }
    w.flush()
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse { line: 0, msg: msg.into() }
}

pub fn read_instance<R: Read>(mut r: R) -> Result<SyntheticInstance> {
    let io = |e: std::io::Error| parse_err(format!("truncated instance: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(parse_err("not a sparseplq instance (bad magic)"));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver).map_err(io)?;
    let ver = u32::from_le_bytes(ver);
    if ver != VERSION {
        return Err(parse_err(format!("unsupported instance version {ver}")));
    }
    let n = get_u64(&mut r).map_err(io)? as usize;
    let p = get_u64(&mut r).map_err(io)? as usize;
    if n.checked_mul(p).is_none_or(|np| np > (1 << 34)) {
        return Err(parse_err(format!("implausible dimensions {n} x {p}")));
    }
    let mu = f64::from_le_bytes(get_u64(&mut r).map_err(io)?.to_le_bytes());
    let a = DenseMatrix::from_row_major(n, p, &get_f64s(&mut r, n * p).map_err(io)?)?;
    let b = get_f64s(&mut r, n).map_err(io)?;
    let x_true = get_f64s(&mut r, p).map_err(io)?;
    let noise = get_f64s(&mut r, n).map_err(io)?;
    let m = get_u64(&mut r).map_err(io)? as usize;
    if m > n {
        return Err(parse_err(format!("corrupt set size {m} exceeds n = {n}")));
    }
    let mut set = Vec::with_capacity(m);
    for _ in 0..m {
        let i = get_u64(&mut r).map_err(io)? as usize;
        if i >= n {
            return Err(parse_err(format!("corrupt index {i} out of range")));
        }
        set.push(i);
    }
    let support = (0..p).filter(|&i| x_true[i] != 0.0).collect();
    Ok(SyntheticInstance {
        instance: ProblemInstance::new(a, b, mu)?,
        x_true,
        support,
        noise,
        corrupt_set: set,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

/// Line-oriented variant for small instances: a header line, `n p mu`,
/// `n` rows of `A`, then lines for `b`, `x_true`, `ϖ` and `I`.
pub fn write_instance_text<W: Write>(si: &SyntheticInstance, mut w: W) -> std::io::Result<()> {
    let inst = &si.instance;
    writeln!(w, "{TEXT_HEADER}")?;
    writeln!(w, "{} {} {:e}", inst.n(), inst.p(), inst.mu())?;
    let rows = inst.a().to_row_major();
    for i in 0..inst.n() {
        writeln!(w, "{}", join(&rows[i * inst.p()..(i + 1) * inst.p()]))?;
    }
    writeln!(w, "{}", join(inst.b()))?;
    writeln!(w, "{}", join(&si.x_true))?;
    writeln!(w, "{}", join(&si.noise))?;
    let set: Vec<String> = si.corrupt_set.iter().map(usize::to_string).collect();
    writeln!(w, "{}", set.join(" "))?;
    w.flush()
}

pub fn read_instance_text<R: BufRead>(r: R) -> Result<SyntheticInstance> {
    let lines: Vec<String> = r
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| parse_err(e.to_string()))?;
    let line = |k: usize| -> Result<&str> {
        lines.get(k).map(String::as_str).ok_or(Error::Parse {
            line: k + 1,
            msg: "unexpected end of file".into(),
        })
    };
    let nums = |k: usize, expect: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = line(k)?
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
        if v.len() != expect {
            return Err(Error::Parse {
                line: k + 1,
                msg: format!("expected {expect} values, found {}", v.len()),
            });
        }
        Ok(v)
    };
    if line(0)?.trim() != TEXT_HEADER {
        return Err(Error::Parse { line: 1, msg: "missing instance header".into() });
    }
    let dims: Vec<&str> = line(1)?.split_whitespace().collect();
    let bad_dims = || Error::Parse { line: 2, msg: "expected `n p mu`".into() };
    if dims.len() != 3 {
        return Err(bad_dims());
    }
    let n: usize = dims[0].parse().map_err(|_| bad_dims())?;
    let p: usize = dims[1].parse().map_err(|_| bad_dims())?;
    let mu: f64 = dims[2].parse().map_err(|_| bad_dims())?;
    let mut rows = Vec::with_capacity(n * p);
    for i in 0..n {
        rows.extend(nums(2 + i, p)?);
    }
    let a = DenseMatrix::from_row_major(n, p, &rows)?;
    let b = nums(2 + n, n)?;
    let x_true = nums(3 + n, p)?;
    let noise = nums(4 + n, n)?;
    let set: Vec<usize> = line(5 + n)?
        .split_whitespace()
        .map(|t| t.parse::<usize>().ok().filter(|&i| i < n))
        .collect::<Option<_>>()
        .ok_or(Error::Parse { line: 6 + n, msg: "bad corrupt index".into() })?;
    let support = (0..p).filter(|&i| x_true[i] != 0.0).collect();
    Ok(SyntheticInstance {
        instance: ProblemInstance::new(a, b, mu)?,
        x_true,
        support,
        noise,
        corrupt_set: set,
    })
}

/// Text format for `.txt` paths, binary otherwise.
pub fn save_instance(si: &SyntheticInstance, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let w = std::io::BufWriter::new(f);
    let res = if path.extension().is_some_and(|e| e == "txt") {
        write_instance_text(si, w)
    } else {
        write_instance(si, w)
    };
    res.map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: &Path) -> Result<SyntheticInstance> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let r = std::io::BufReader::new(f);
    if path.extension().is_some_and(|e| e == "txt") {
        read_instance_text(r)
    } else {
        read_instance(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: NoiseDist) -> SyntheticSpec {
        SyntheticSpec {
            n: 30,
            p: 40,
            cov: Covariance::Ar(0.8),
            signal: Signal::Fixed16,
            noise,
            corrupt_count: 6,
            seed: 7,
            noise_cap: None,
        }
    }

    #[test]
    fn ar_factor_p2() {
        let l = gen_covariance(Covariance::Ar(0.3), 2).unwrap().to_dense();
        let s01 = l.get(1, 0) * l.get(0, 0);
        let s11 = l.get(1, 0).powi(2) + l.get(1, 1).powi(2);
        assert!((l.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((s01 - 0.3).abs() < 1e-12);
        assert!((s11 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_matches_dense_factor() {
        let g: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin()).collect();
        for cov in [Covariance::Ar(0.5), Covariance::Cs(0.6)] {
            let f = gen_covariance(cov, 7).unwrap();
            let mut out = vec![0.0; 7];
            f.apply(&g, &mut out);
            let dense = f.to_dense().matvec(&g);
            for (a, b) in out.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fixed16_prefix() {
        let x = gen_true_x(Signal::Fixed16, 20, 0);
        assert_eq!(&x[..16], &FIXED16);
        assert!(x[16..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn instance_is_deterministic_and_consistent() {
        let s = spec(NoiseDist::Gaussian { variance: 2.0 });
        let a = make_instance(&s).unwrap();
        let b = make_instance(&s).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_instance(&a, &mut ba).unwrap();
        write_instance(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);

        let r: Vec<f64> = a.instance.residual(&a.x_true).unwrap();
        let nz: Vec<usize> = (0..30).filter(|&i| r[i] != 0.0).collect();
        assert_eq!(nz, a.corrupt_set);
        assert_eq!(a.corrupt_set.len(), 6);
    }

    #[test]
    fn binary_and_text_round_trip() {
        let si = make_instance(&spec(NoiseDist::Laplace)).unwrap();
        let mut buf = Vec::new();
        write_instance(&si, &mut buf).unwrap();
        let back = read_instance(&buf[..]).unwrap();
        assert_eq!(back.instance.a(), si.instance.a());
        assert_eq!(back.instance.b(), si.instance.b());
        assert_eq!(back.noise, si.noise);
        assert_eq!(back.corrupt_set, si.corrupt_set);

        let mut txt = Vec::new();
        write_instance_text(&si, &mut txt).unwrap();
        let back = read_instance_text(&txt[..]).unwrap();
        assert_eq!(back.instance.a(), si.instance.a());
        assert_eq!(back.x_true, si.x_true);
        assert_eq!(back.support, si.support);

        assert!(read_instance(&buf[..20]).is_err());
        assert!(read_instance(&b"NOTMAGIC"[..]).is_err());
    }

    #[test]
    fn scaled_cauchy_norm() {
        let ax: Vec<f64> = (0..50).map(|i| i as f64 - 20.0).collect();
        let (w, set) = sample_noise(NoiseDist::CauchyScaledToSignal, 25, &ax, 3);
        assert_eq!(set.len(), 25);
        assert!((norm2(&w) - norm2(&ax) / 3.0).abs() < 1e-12 * norm2(&ax));
    }

    #[test]
    fn zero_corruption_gives_zero_noise() {
        let (w, set) = sample_noise(NoiseDist::Cauchy, 0, &[1.0; 5], 1);
        assert_eq!(w, vec![0.0; 5]);
        assert!(set.is_empty());
    }

    #[test]
    fn table1_dims() {
        assert_eq!(table1_sizes(5000), (35, 596));
    }

    #[test]
    fn noise_cap_respected() {
        let mut s = spec(NoiseDist::Cauchy);
        s.corrupt_count = 30;
        s.noise_cap = Some(5.0);
        let si = make_instance(&s).unwrap();
        assert!(norm_inf(&si.noise) < 5.0);
    }
}
