//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparseplq_core::{DenseMatrix, ProblemInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn gauss_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a.get(i, j))
}

/// Minimizes a convex scalar function on `[lo, hi]`.
///
/// A dense grid brackets the minimum, golden-section search narrows the
/// bracket, and bisection on the sign of the right derivative `d` finishes
/// the job to machine precision (the objective alone cannot resolve the
/// minimizer beyond roughly the square root of the unit roundoff).
pub fn minimize_scalar(f: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 4000;
    let step = (hi - lo) / GRID as f64;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..=GRID {
        let v = f(lo + step * k as f64);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = (lo + step * (best + 1) as f64).min(hi);

    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..60 {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }

    // The golden bracket may be off by rounding of f; widen before bisecting.
    let pad = 1e-6 * (1.0 + a.abs().max(b.abs()));
    let (mut l, mut r) = ((a - pad).max(lo), (b + pad).min(hi));
    if d(l) >= 0.0 {
        return l;
    }
    if d(r) < 0.0 {
        return r;
    }
    for _ in 0..200 {
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            break;
        }
        if d(m) >= 0.0 {
            r = m;
        } else {
            l = m;
        }
    }
    0.5 * (l + r)
}

/// Right derivative of `|t|`.
pub fn abs_right(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let dn = f(&xp);
            xp[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Data of the strongly convex subproblem
/// `min (1/n)‖Ax − b‖₁ + Σ ω_j|x_j| + (μ/2)‖x‖² + (γ₁/2)‖x − x_ref‖² + (γ₂/2)‖Ax − b − z_ref‖²`.
pub struct ConvexSub<'a> {
    pub a: &'a DenseMatrix,
    pub b: &'a [f64],
    pub x_ref: &'a [f64],
    pub z_ref: &'a [f64],
    pub omega: &'a [f64],
    pub mu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl ConvexSub<'_> {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.b.len() as f64;
        let mut val = 0.0;
        for i in 0..self.b.len() {
            let mut ax = 0.0;
            for j in 0..x.len() {
                ax += self.a.get(i, j) * x[j];
            }
            let r = ax - self.b[i];
            val += r.abs() / n + 0.5 * self.gamma2 * (r - self.z_ref[i]).powi(2);
        }
        for j in 0..x.len() {
            val += self.omega[j] * x[j].abs()
                + 0.5 * self.mu * x[j] * x[j]
                + 0.5 * self.gamma1 * (x[j] - self.x_ref[j]).powi(2);
        }
        val
    }

    /// Accelerated primal-dual hybrid gradient on `G(x) + K(Ax)` with
    /// `G` the (strongly convex) `x` terms and `K` the loss terms.
    pub fn pdhg(&self, iters: usize) -> Vec<f64> {
        let (n, p) = (self.b.len(), self.x_ref.len());
        let na = to_na(self.a);
        let l = na.singular_values().max();
        let nf = n as f64;
        let strong = self.mu + self.gamma1;
        let (mut tau, mut sigma) = (1.0 / l, 1.0 / l);
        let mut x = vec![0.0; p];
        let mut xbar = x.clone();
        let mut y = vec![0.0; n];
        let at = na.transpose();
        for _ in 0..iters {
            let axb = &na * DVector::from_column_slice(&xbar);
            for i in 0..n {
                let q = y[i] + sigma * axb[i];
                // prox of K/σ at q/σ, with w = v − b.
                let v0 = q / sigma - self.b[i];
                let w = soft(
                    (self.gamma2 * self.z_ref[i] + sigma * v0) / (self.gamma2 + sigma),
                    1.0 / (nf * (self.gamma2 + sigma)),
                );
                y[i] = q - sigma * (w + self.b[i]);
            }
            let aty = &at * DVector::from_column_slice(&y);
            let x_old = x.clone();
            for j in 0..p {
                let v = x[j] - tau * aty[j];
                x[j] = soft(v / tau + self.gamma1 * self.x_ref[j], self.omega[j]) / (strong + 1.0 / tau);
            }
            let theta = 1.0 / (1.0 + 2.0 * strong * tau).sqrt();
            tau *= theta;
            sigma /= theta;
            for j in 0..p {
                xbar[j] = x[j] + theta * (x[j] - x_old[j]);
            }
        }
        x
    }

    /// Solves the KKT system for the active pattern read off `guess`
    /// (nonzero coordinates, zero residuals) and checks that its
    /// multipliers are admissible. Returns `None` if the pattern is not
    /// optimal.
    pub fn polish(&self, guess: &[f64], tol: f64) -> Option<Vec<f64>> {
        let (n, p) = (self.b.len(), self.x_ref.len());
        let nf = n as f64;
        let na = to_na(self.a);
        let r = &na * DVector::from_column_slice(guess) - DVector::from_column_slice(self.b);
        let supp: Vec<usize> = (0..p).filter(|&j| guess[j].abs() > tol).collect();
        let zero_rows: Vec<usize> = (0..n).filter(|&i| r[i].abs() <= tol).collect();
        let (s, m) = (supp.len(), zero_rows.len());
        if m > s {
            return None;
        }
        let as_ = na.select_columns(&supp);
        let mut kkt = DMatrix::<f64>::zeros(s + m, s + m);
        let mut rhs = DVector::<f64>::zeros(s + m);
        let ata = as_.transpose() * &as_;
        let mut load = DVector::<f64>::zeros(n);
        for i in 0..n {
            if !zero_rows.contains(&i) {
                load[i] = r[i].signum() / nf;
            }
            load[i] -= self.gamma2 * (self.b[i] + self.z_ref[i]);
        }
        let g = as_.transpose() * &load;
        for (a, &j) in supp.iter().enumerate() {
            for c in 0..s {
                kkt[(a, c)] = self.gamma2 * ata[(a, c)];
            }
            kkt[(a, a)] += self.mu + self.gamma1;
            rhs[a] = -(g[a] + self.omega[j] * guess[j].signum() - self.gamma1 * self.x_ref[j]);
        }
        for (k, &i) in zero_rows.iter().enumerate() {
            for (a, &j) in supp.iter().enumerate() {
                kkt[(s + k, a)] = self.a.get(i, j);
                kkt[(a, s + k)] = self.a.get(i, j);
            }
            rhs[s + k] = self.b[i];
        }
        let sol = kkt.lu().solve(&rhs)?;

        let mut x = vec![0.0; p];
        for (a, &j) in supp.iter().enumerate() {
            x[j] = sol[a];
            if x[j].signum() != guess[j].signum() {
                return None;
            }
        }
        // Loss subgradient: sign/n off the kinks, the multiplier on them.
        let mut v = DVector::<f64>::zeros(n);
        let r_new = &na * DVector::from_column_slice(&x) - DVector::from_column_slice(self.b);
        for i in 0..n {
            v[i] = match zero_rows.iter().position(|&z| z == i) {
                Some(k) => {
                    let nu = sol[s + k];
                    if nu.abs() > 1.0 / nf * (1.0 + 1e-9) {
                        return None;
                    }
                    nu
                }
                None => r_new[i].signum() / nf,
            };
            v[i] += self.gamma2 * (r_new[i] - self.z_ref[i]);
        }
        let grad = na.transpose() * v;
        for j in 0..p {
            if supp.contains(&j) {
                continue;
            }
            let rest = grad[j] - self.gamma1 * self.x_ref[j];
            if rest.abs() > self.omega[j] * (1.0 + 1e-9) + 1e-12 {
                return None;
            }
        }
        Some(x)
    }
}

/// Global minimum of `(1/n)‖Ax − b‖₁ + ν‖x‖₀` by enumerating supports and,
/// for each, every square row subset (LAD optima sit on such vertices).
pub fn zero_norm_global_min(a: &DenseMatrix, b: &[f64], nu: f64) -> (f64, Vec<f64>) {
    let (n, p) = (a.nrows(), a.ncols());
    let nf = n as f64;
    let mut best = (b.iter().map(|v| v.abs()).sum::<f64>() / nf, vec![0.0; p]);
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = cols.len();
        let penalty = nu * k as f64;
        if penalty >= best.0 {
            continue;
        }
        let mut rows: Vec<usize> = (0..k).collect();
        loop {
            let m = DMatrix::from_fn(k, k, |r, c| a.get(rows[r], cols[c]));
            let rhs = DVector::from_fn(k, |r, _| b[rows[r]]);
            if let Some(xs) = m.lu().solve(&rhs) {
                if xs.iter().all(|v| v.is_finite() && *v != 0.0) {
                    let mut loss = 0.0;
                    for i in 0..n {
                        let mut ax = 0.0;
                        for (c, &j) in cols.iter().enumerate() {
                            ax += a.get(i, j) * xs[c];
                        }
                        loss += (ax - b[i]).abs();
                    }
                    let val = loss / nf + penalty;
                    if val < best.0 {
                        let mut x = vec![0.0; p];
                        for (c, &j) in cols.iter().enumerate() {
                            x[j] = xs[c];
                        }
                        best = (val, x);
                    }
                }
            }
            if !next_combination(&mut rows, n) {
                break;
            }
        }
    }
    best
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn instance(a: DenseMatrix, b: Vec<f64>, mu: f64) -> ProblemInstance {
    ProblemInstance::new(a, b, mu).expect("valid instance")
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}
