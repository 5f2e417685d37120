//! Banded complex matrices, their factorizations, and a Lanczos extreme-eigenvalue estimator.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C<T> = Complex<T>;

#[inline]
fn zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

/// `x* y`.
pub fn dot<T: Real>(x: &[C<T>], y: &[C<T>]) -> C<T> {
    x.iter().zip(y).fold(zero(), |s, (a, b)| s + a.conj() * *b)
}

pub fn norm2<T: Real>(x: &[C<T>]) -> T {
    x.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

/// `y += a x`.
pub fn axpy<T: Real>(a: C<T>, x: &[C<T>], y: &mut [C<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

pub fn sub<T: Real>(x: &[C<T>], y: &[C<T>]) -> Vec<C<T>> {
    x.iter().zip(y).map(|(a, b)| *a - *b).collect()
}

/// Seeded random complex vector with entries uniform in the unit square.
pub fn random_vector<T: Real>(n: usize, seed: u64) -> Vec<C<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            C::new(lit(a), lit(b))
        })
        .collect()
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<C<T>>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![zero(); n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, C::new(T::one(), T::zero()));
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            zero()
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: C<T>) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: C<T>) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        (0..self.n)
            .map(|i| self.cols(i).fold(zero(), |s, j| s + self.data[self.idx(i, j)] * x[j]))
            .collect()
    }

    /// `|A| |x|` entrywise.
    pub fn abs_matvec(&self, x: &[C<T>]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.cols(i).fold(T::zero(), |s, j| s + self.data[self.idx(i, j)].norm() * x[j].norm()))
            .collect()
    }

    /// `A* x`.
    pub fn matvec_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = vec![zero(); self.n];
        for i in 0..self.n {
            for j in self.cols(i) {
                y[j] += self.data[self.idx(i, j)].conj() * x[i];
            }
        }
        y
    }

    /// `self + c·other` on the union of the two bands.
    pub fn add_scaled(&self, c: C<T>, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension(format!("band sizes {} vs {}", self.n, other.n)));
        }
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.cols(i) {
                out.add_to(i, j, self.get(i, j));
            }
            for j in other.cols(i) {
                out.add_to(i, j, c * other.get(i, j));
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let half = C::new(lit::<T>(0.5), T::zero());
        let s = self.add_scaled(C::new(T::one(), T::zero()), &self.adjoint()).expect("same size");
        s.scaled(half)
    }

    pub fn scaled(&self, c: C<T>) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Largest entry modulus of `A − A*`.
    pub fn hermitian_defect(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in self.cols(i) {
                m = m.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<C<T>>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Writes `i j re im` lines for every stored entry.
    pub fn dump<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% band n={} kl={} ku={}", self.n, self.kl, self.ku)?;
        for i in 0..self.n {
            for j in self.cols(i) {
                let v = self.get(i, j);
                writeln!(w, "{i} {j} {:.16e} {:.16e}", to_f64(v.re), to_f64(v.im))?;
            }
        }
        Ok(())
    }
}

/// `f − Σ_k A_k x` with every row accumulated in compensated (twice working precision)
/// arithmetic, so the sum of the matrices is taken exactly.
pub fn residual_compensated<T: Real>(terms: &[&BandMatrix<T>], x: &[C<T>], f: &[C<T>]) -> Vec<C<T>> {
    (0..f.len())
        .map(|i| {
            let mut re = CompensatedSum::new(f[i].re);
            let mut im = CompensatedSum::new(f[i].im);
            for m in terms {
                for j in m.cols(i) {
                    let a = m.data[m.idx(i, j)];
                    re.add_product(-a.re, x[j].re);
                    re.add_product(a.im, x[j].im);
                    im.add_product(-a.re, x[j].im);
                    im.add_product(-a.im, x[j].re);
                }
            }
            C::new(re.value(), im.value())
        })
        .collect()
}

/// Dot-product accumulator with error-free transformations (`TwoSum`, `TwoProduct` via FMA).
struct CompensatedSum<T> {
    sum: T,
    err: T,
}

impl<T: Real> CompensatedSum<T> {
    fn new(start: T) -> Self {
        Self { sum: start, err: T::zero() }
    }

    fn add_product(&mut self, a: T, b: T) {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let s = self.sum + p;
        let z = s - self.sum;
        let se = (self.sum - (s - z)) + (p - z);
        self.sum = s;
        self.err += se + pe;
    }

    fn value(&self) -> T {
        self.sum + self.err
    }
}

/// Band LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    w: usize,
    data: Vec<C<T>>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn factor(a: &BandMatrix<T>) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let uw = ku + kl;
        let w = kl + uw + 1;
        let mut data = vec![zero(); n * w];
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for i in 0..n {
            for j in a.cols(i) {
                data[at(i, j)] = a.get(i, j);
            }
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[at(k, k)].norm();
            for i in k + 1..=last {
                let v = data[at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            let jend = (k + uw).min(n - 1);
            if p != k {
                for j in k..=jend {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let pivot = data[at(k, k)];
            for i in k + 1..=last {
                let l = data[at(i, k)] / pivot;
                data[at(i, k)] = l;
                if l == zero() {
                    continue;
                }
                for j in k + 1..=jend {
                    let u = data[at(k, j)];
                    data[at(i, j)] -= l * u;
                }
            }
        }
        Ok(Self { n, kl, w, data, piv })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.w + (j + self.kl - i)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let (n, kl) = (self.n, self.kl);
        let uw = self.w - kl - 1;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + uw).min(n - 1) {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }

    /// Solves `A* x = b`.
    pub fn solve_adjoint(&self, b: &[C<T>]) -> Vec<C<T>> {
        let (n, kl) = (self.n, self.kl);
        let uw = self.w - kl - 1;
        let mut x = b.to_vec();
        for k in 0..n {
            let mut s = x[k];
            for i in k.saturating_sub(uw)..k {
                s -= self.at(i, k).conj() * x[i];
            }
            x[k] = s / self.at(k, k).conj();
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                s -= self.at(i, k).conj() * x[i];
            }
            x[k] = s;
            x.swap(k, self.piv[k]);
        }
        x
    }
}

/// Band Cholesky factorization `A = L L*` of a Hermitian positive definite band matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky<T> {
    n: usize,
    kd: usize,
    /// Row `i` holds `L(i, i−kd..=i)`.
    data: Vec<C<T>>,
}

impl<T: Real> BandCholesky<T> {
    pub fn factor(a: &BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let kd = a.kl.max(a.ku);
        let w = kd + 1;
        let mut l = vec![zero(); n * w];
        let at = |i: usize, j: usize| i * w + (j + kd - i);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                let mut s = a.get(i, j);
                for k in i.saturating_sub(kd).max(j.saturating_sub(kd))..j {
                    s -= l[at(i, k)] * l[at(j, k)].conj();
                }
                if i == j {
                    if !(s.re > T::zero()) || !s.re.is_finite() {
                        return Err(Error::Singular(i));
                    }
                    l[at(i, i)] = C::new(s.re.sqrt(), T::zero());
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(Self { n, kd, data: l })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C<T> {
        self.data[i * (self.kd + 1) + (j + self.kd - i)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.kd)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.kd + 1).min(n) {
                s -= self.at(k, i).conj() * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }
}

/// Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix by implicit QL.
///
/// `diag` has length `m`, `off[i]` couples `i` and `i+1`. Returns ascending eigenvalues and
/// column-major eigenvectors `z[k][i]` (component `i` of vector `k`).
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; m];
    e[..m.saturating_sub(1)].copy_from_slice(&off[..m.saturating_sub(1)]);
    let mut z: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    estimate: d[l],
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..m {
                    let f2 = z[i + 1][k];
                    z[i + 1][k] = s * z[i][k] + c * f2;
                    z[i][k] = c * z[i][k] - s * f2;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| d[*a].total_cmp(&d[*b]));
    let vals = order.iter().map(|&k| d[k]).collect();
    let vecs = order.iter().map(|&k| z[k].clone()).collect();
    Ok((vals, vecs))
}

/// Which end of the spectrum must meet the stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
    Both,
}

/// Settings for [`extreme_eigenvalues`].
#[derive(Clone, Debug)]
pub struct IterOptions {
    /// Stop when the Ritz residual is at most `tol·max(|θ|, floor·θ_abs_max)`.
    pub tol: f64,
    pub floor: f64,
    pub max_applications: usize,
    pub krylov_dim: usize,
    pub seed: u64,
    /// Agreement required between the two seeded runs.
    pub agree_tol: f64,
}

impl Default for IterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            floor: 1e-12,
            max_applications: 10_000,
            krylov_dim: 160,
            seed: 0x5eed,
            agree_tol: 1e-6,
        }
    }
}

/// Result of an extreme-eigenvalue estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate {
    pub max: f64,
    pub min: f64,
    /// Operator applications over both runs.
    pub iterations: usize,
    /// Largest final Ritz residual of the targeted extremes, in the `W` norm.
    pub residual: f64,
    /// Set when the two seeded runs disagree by more than `agree_tol`.
    pub flagged: bool,
}

/// Extreme eigenvalues of `A`, self-adjoint with respect to `⟨x, y⟩_W = x* W y`, `W ≻ 0`.
///
/// This is power iteration accelerated by a Krylov subspace: each sweep builds a
/// `W`-orthonormal Lanczos basis with full reorthogonalization, reads Ritz values from the
/// tridiagonal projection, and restarts from the targeted Ritz vector. Two runs from distinct
/// seeded start vectors are compared.
pub fn extreme_eigenvalues<T: Real>(
    n: usize,
    apply_a: &dyn Fn(&[C<T>]) -> Result<Vec<C<T>>>,
    apply_w: &dyn Fn(&[C<T>]) -> Result<Vec<C<T>>>,
    which: Extreme,
    opts: &IterOptions,
) -> Result<EigenEstimate> {
    if n == 0 {
        return Ok(EigenEstimate {
            max: 0.0,
            min: 0.0,
            iterations: 0,
            residual: 0.0,
            flagged: false,
        });
    }
    let a = lanczos_run(n, apply_a, apply_w, which, opts, opts.seed)?;
    let b = lanczos_run(n, apply_a, apply_w, which, opts, opts.seed.wrapping_add(0x9e37_79b9))?;
    let scale = a.max.abs().max(a.min.abs()).max(f64::MIN_POSITIVE);
    let gap = match which {
        Extreme::Max => (a.max - b.max).abs(),
        Extreme::Min => (a.min - b.min).abs(),
        Extreme::Both => (a.max - b.max).abs().max((a.min - b.min).abs()),
    };
    let flagged = gap > opts.agree_tol * scale;
    Ok(EigenEstimate {
        max: a.max.max(b.max),
        min: a.min.min(b.min),
        iterations: a.iterations + b.iterations,
        residual: a.residual.max(b.residual),
        flagged,
    })
}

/// Lanczos steps between intermediate Ritz convergence checks.
const CHECK_EVERY: usize = 8;

/// Residual test on the current tridiagonal projection, with `beta` one longer than `alpha`'s
/// off-diagonal.
fn ritz_converged(alpha: &[f64], beta: &[f64], which: Extreme, opts: &IterOptions) -> Result<bool> {
    let m = alpha.len();
    let (theta, z) = tridiagonal_eigen(alpha, &beta[..m - 1])?;
    let bm = beta[m - 1];
    let big = theta[m - 1].abs().max(theta[0].abs());
    let ok = |k: usize| (bm * z[k][m - 1]).abs() <= opts.tol * theta[k].abs().max(opts.floor * big);
    Ok(match which {
        Extreme::Max => ok(m - 1),
        Extreme::Min => ok(0),
        Extreme::Both => ok(m - 1) && ok(0),
    })
}

fn lanczos_run<T: Real>(
    n: usize,
    apply_a: &dyn Fn(&[C<T>]) -> Result<Vec<C<T>>>,
    apply_w: &dyn Fn(&[C<T>]) -> Result<Vec<C<T>>>,
    which: Extreme,
    opts: &IterOptions,
    seed: u64,
) -> Result<EigenEstimate> {
    let mut start = random_vector::<T>(n, seed);
    let mut applications = 0usize;
    let kmax = opts.krylov_dim.max(2).min(n);
    let mut last: (f64, f64, f64);
    loop {
        // W-normalize the start vector.
        let ws = apply_w(&start)?;
        let nrm = dot(&start, &ws).re.max(T::zero()).sqrt();
        if !(nrm > T::zero()) {
            return Err(Error::InvalidArgument("degenerate start vector".into()));
        }
        let inv = C::new(T::one() / nrm, T::zero());
        let mut vs: Vec<Vec<C<T>>> = vec![start.iter().map(|v| *v * inv).collect()];
        let mut wvs: Vec<Vec<C<T>>> = vec![ws.iter().map(|v| *v * inv).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut exhausted = false;
        loop {
            let j = vs.len() - 1;
            let mut r = apply_a(&vs[j])?;
            applications += 1;
            let aj = dot(&wvs[j], &r).re;
            alpha.push(to_f64(aj));
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for (v, wv) in vs.iter().zip(&wvs) {
                    let c = dot(wv, &r);
                    axpy(-c, v, &mut r);
                }
            }
            if vs.len() >= kmax || applications >= opts.max_applications {
                let wr = apply_w(&r)?;
                beta.push(to_f64(dot(&r, &wr).re.max(T::zero()).sqrt()));
                break;
            }
            let wr = apply_w(&r)?;
            let b = dot(&r, &wr).re.max(T::zero()).sqrt();
            let scale = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if to_f64(b) <= 1e-13 * scale.max(f64::MIN_POSITIVE) || !(b > T::zero()) {
                beta.push(0.0);
                exhausted = true;
                break;
            }
            beta.push(to_f64(b));
            let ib = C::new(T::one() / b, T::zero());
            vs.push(r.iter().map(|v| *v * ib).collect());
            wvs.push(wr.iter().map(|v| *v * ib).collect());
            if alpha.len() % CHECK_EVERY == 0 && ritz_converged(&alpha, &beta, which, opts)? {
                break;
            }
        }
        let m = alpha.len();
        let (theta, z) = tridiagonal_eigen(&alpha, &beta[..m - 1])?;
        let bm = beta[m - 1];
        let res = |k: usize| (bm * z[k][m - 1]).abs();
        let (kmin, kmaxi) = (0, m - 1);
        let tmax = theta[kmaxi];
        let tmin = theta[kmin];
        let big = tmax.abs().max(tmin.abs());
        let ok = |k: usize| res(k) <= opts.tol * theta[k].abs().max(opts.floor * big) || big == 0.0;
        let (rmax, rmin) = (res(kmaxi), res(kmin));
        let residual = match which {
            Extreme::Max => rmax,
            Extreme::Min => rmin,
            Extreme::Both => rmax.max(rmin),
        };
        let done = exhausted
            || match which {
                Extreme::Max => ok(kmaxi),
                Extreme::Min => ok(kmin),
                Extreme::Both => ok(kmaxi) && ok(kmin),
            };
        last = (tmax, tmin, residual);
        if done {
            return Ok(EigenEstimate {
                max: tmax,
                min: tmin,
                iterations: applications,
                residual: if exhausted { 0.0 } else { residual },
                flagged: false,
            });
        }
        if applications >= opts.max_applications {
            break;
        }
        // Restart from the targeted Ritz vector(s).
        let combo: Vec<(usize, f64)> = match which {
            Extreme::Max => vec![(kmaxi, 1.0)],
            Extreme::Min => vec![(kmin, 1.0)],
            Extreme::Both => vec![(kmaxi, 1.0), (kmin, 1.0)],
        };
        let mut next = vec![zero::<T>(); n];
        for (k, wgt) in combo {
            for (i, v) in vs.iter().take(m).enumerate() {
                axpy(C::new(lit(wgt * z[k][i]), T::zero()), v, &mut next);
            }
        }
        start = next;
    }
    Err(Error::NoConvergence {
        iterations: applications,
        estimate: last.0,
        residual: last.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix<f64> {
        let v = random_vector::<f64>(n * (kl + ku + 1), seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut t = 0;
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                a.set(i, j, v[t]);
                t += 1;
            }
        }
        a
    }

    #[test]
    fn lu_solves_and_adjoint_solves() {
        let a = random_band(30, 3, 2, 1);
        let lu = BandLu::factor(&a).unwrap();
        let x = random_vector::<f64>(30, 2);
        let b = a.matvec(&x);
        let y = lu.solve(&b);
        assert!(norm2(&sub(&x, &y)) < 1e-10 * norm2(&x));
        let bt = a.matvec_adjoint(&x);
        let yt = lu.solve_adjoint(&bt);
        assert!(norm2(&sub(&x, &yt)) < 1e-10 * norm2(&x));
    }

    #[test]
    fn lu_pivots_through_zero_diagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 1, c(1.0, 0.0));
        a.set(1, 0, c(1.0, 0.0));
        a.set(1, 2, c(2.0, 0.0));
        a.set(2, 1, c(1.0, 0.0));
        a.set(2, 2, c(1.0, 1.0));
        let lu = BandLu::factor(&a).unwrap();
        let x = vec![c(1.0, 0.0), c(-2.0, 0.5), c(0.3, 0.0)];
        let y = lu.solve(&a.matvec(&x));
        assert!(norm2(&sub(&x, &y)) < 1e-14);
    }

    #[test]
    fn lu_reports_singular() {
        let a = BandMatrix::<f64>::zeros(4, 1, 1);
        assert!(matches!(BandLu::factor(&a), Err(Error::Singular(0))));
    }

    #[test]
    fn cholesky_matches_lu() {
        let b = random_band(25, 2, 2, 5);
        let mut s = b.adjoint().add_scaled(c(1.0, 0.0), &b).unwrap();
        for i in 0..25 {
            s.add_to(i, i, c(12.0, 0.0));
        }
        let ch = BandCholesky::factor(&s).unwrap();
        let f = random_vector::<f64>(25, 6);
        let x1 = ch.solve(&f);
        let x2 = BandLu::factor(&s).unwrap().solve(&f);
        assert!(norm2(&sub(&x1, &x2)) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut s = BandMatrix::<f64>::identity(3);
        s.set(1, 1, c(-1.0, 0.0));
        assert!(BandCholesky::factor(&s).is_err());
    }

    #[test]
    fn tridiagonal_known_spectrum() {
        // Second-difference matrix: 2 − 2cos(kπ/(m+1)).
        let m = 12;
        let (vals, vecs) = tridiagonal_eigen(&vec![2.0; m], &vec![-1.0; m - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
        let nrm: f64 = vecs[3].iter().map(|x| x * x).sum();
        assert!((nrm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_diagonal_operator() {
        let n = 400;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let dd = d.clone();
        let a = move |x: &[C<f64>]| Ok(x.iter().zip(&dd).map(|(v, s)| *v * *s).collect());
        let w = |x: &[C<f64>]| Ok(x.to_vec());
        let est = extreme_eigenvalues(n, &a, &w, Extreme::Both, &IterOptions::default()).unwrap();
        assert!((est.max - d[n - 1]).abs() < 1e-9);
        assert!((est.min - 1.0).abs() < 1e-9);
        assert!(!est.flagged);
    }

    #[test]
    fn lanczos_in_weighted_inner_product() {
        // A = W⁻¹ K with K, W Hermitian: eigenvalues of the pencil (K, W).
        let n = 6;
        let k = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let wv = [2.0, 0.5, 1.0, 3.0, 1.5, 1.3];
        let a = move |x: &[C<f64>]| Ok((0..n).map(|i| x[i] * (k[i] / wv[i])).collect());
        let w = move |x: &[C<f64>]| Ok((0..n).map(|i| x[i] * wv[i]).collect());
        let est = extreme_eigenvalues(n, &a, &w, Extreme::Both, &IterOptions::default()).unwrap();
        assert!((est.max - 6.0).abs() < 1e-12);
        assert!((est.min - 0.5).abs() < 1e-12);
    }
}
