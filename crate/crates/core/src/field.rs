//! Bounded matrix-valued coefficient fields on boxes in ℝ^d.

use crate::error::{Error, Result};
use crate::scalar::{CMat, Real};
use num_complex::Complex;
use std::fmt;
use std::sync::Arc;

pub type EvalFn<T> = dyn Fn(&[T]) -> CMat<T> + Send + Sync;

/// Axis-aligned box `∏ (lo_i, hi_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(*a < *b)) {
            return Err(Error::InvalidArgument("degenerate box".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The interval `(a, b)`.
    pub fn interval(a: T, b: T) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![T::zero(); dim],
            hi: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (a, b))| *xi >= *a && *xi <= *b)
    }

    pub fn diameter(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (*b - *a) * (*b - *a))
            .sum::<T>()
            .sqrt()
    }

    pub fn measure(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |acc, (a, b)| acc * (*b - *a))
    }
}

/// A map `x ↦ A(x) ∈ ℂ^{n×n}` with a declared bound on the entrywise-sum norm.
#[derive(Clone)]
pub struct CoefficientField<T> {
    dim: usize,
    ncomp: usize,
    sup_bound: T,
    eval: Arc<EvalFn<T>>,
}

impl<T: fmt::Debug> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("ncomp", &self.ncomp)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl<T: Real> CoefficientField<T> {
    pub fn new(
        dim: usize,
        ncomp: usize,
        sup_bound: T,
        eval: impl Fn(&[T]) -> CMat<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            ncomp,
            sup_bound,
            eval: Arc::new(eval),
        }
    }

    /// Scalar field times the identity: `x ↦ f(x) · I_n`.
    pub fn scalar(
        dim: usize,
        ncomp: usize,
        sup_abs: T,
        f: impl Fn(&[T]) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        let bound = sup_abs * crate::scalar::from_usize(ncomp);
        Self::new(dim, ncomp, bound, move |x| CMat::scalar(ncomp, f(x)))
    }

    /// Real scalar field times the identity.
    pub fn real_scalar(
        dim: usize,
        ncomp: usize,
        sup_abs: T,
        f: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::scalar(dim, ncomp, sup_abs, move |x| Complex::new(f(x), T::zero()))
    }

    pub fn constant(dim: usize, m: CMat<T>) -> Self {
        let n = m.n();
        let bound = m.abs_sum();
        Self::new(dim, n, bound, move |_| m.clone())
    }

    pub fn zero(dim: usize, ncomp: usize) -> Self {
        Self::constant(dim, CMat::zeros(ncomp))
    }

    pub fn identity(dim: usize, ncomp: usize) -> Self {
        Self::constant(dim, CMat::identity(ncomp))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    #[inline]
    pub fn sup_bound(&self) -> T {
        self.sup_bound
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> CMat<T> {
        (self.eval)(x)
    }

    pub fn with_sup_bound(mut self, bound: T) -> Self {
        self.sup_bound = bound;
        self
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.ncomp != other.ncomp {
            return Err(Error::Dimension(format!(
                "fields of shape (d={}, n={}) and (d={}, n={})",
                self.dim, self.ncomp, other.dim, other.ncomp
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::new(self.dim, self.ncomp, a.sup_bound + b.sup_bound, move |x| {
            &a.eval(x) + &b.eval(x)
        }))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Self::new(self.dim, self.ncomp, a.sup_bound + b.sup_bound, move |x| {
            &a.eval(x) - &b.eval(x)
        }))
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let a = self.clone();
        Self::new(self.dim, self.ncomp, a.sup_bound * c.norm(), move |x| a.eval(x).scale(c))
    }

    /// `x ↦ Ψ(x) A(x)`.
    pub fn mul_left(&self, psi: &Self) -> Result<Self> {
        self.check_same_shape(psi)?;
        let (a, p) = (self.clone(), psi.clone());
        Ok(Self::new(self.dim, self.ncomp, a.sup_bound * p.sup_bound, move |x| {
            &p.eval(x) * &a.eval(x)
        }))
    }

    /// `x ↦ A(x) Ψ(x)`.
    pub fn mul_right(&self, psi: &Self) -> Result<Self> {
        self.check_same_shape(psi)?;
        let (a, p) = (self.clone(), psi.clone());
        Ok(Self::new(self.dim, self.ncomp, a.sup_bound * p.sup_bound, move |x| {
            &a.eval(x) * &p.eval(x)
        }))
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let a = self.clone();
        Self::new(self.dim, self.ncomp, a.sup_bound, move |x| a.eval(x).adjoint())
    }

    /// Samples `n` points uniformly in `domain` and returns the largest observed `|A(x)|`.
    pub fn sampled_sup(&self, domain: &BoxDomain<T>, n: usize, seed: u64) -> T {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut best = T::zero();
        let mut x = vec![T::zero(); self.dim];
        for _ in 0..n {
            for (i, xi) in x.iter_mut().enumerate() {
                let t: f64 = rng.random();
                *xi = domain.lo[i] + (domain.hi[i] - domain.lo[i]) * crate::scalar::lit(t);
            }
            best = best.max(self.eval(&x).abs_sum());
        }
        best
    }
}
