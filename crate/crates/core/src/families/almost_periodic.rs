use super::simple::sqrt_usize;
use super::{FieldTriple, PerturbationFamily};
use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::scalar::{lit, CMat, Real};
use num_complex::Complex;
use std::sync::Arc;

/// One term `T_α(x) e^{iα·ξ}`.
#[derive(Clone, Debug)]
pub struct TrigTerm<T> {
    pub alpha: Vec<T>,
    pub coeff: CoefficientField<T>,
}

impl<T: Real> TrigTerm<T> {
    pub fn is_constant_mode(&self) -> bool {
        self.alpha.iter().all(|a| *a == T::zero())
    }
}

/// Scalar trigonometric polynomial `Σ c_α e^{iα·ξ}` in `ξ ∈ ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarTrig<T> {
    pub terms: Vec<(Vec<T>, Complex<T>)>,
}

impl<T: Real> ScalarTrig<T> {
    pub fn constant(d: usize, c: T) -> Self {
        Self {
            terms: vec![(vec![T::zero(); d], Complex::new(c, T::zero()))],
        }
    }

    /// `cos(ω·ξ)`.
    pub fn cos(omega: Vec<T>) -> Self {
        let half = Complex::new(lit(0.5), T::zero());
        let neg = omega.iter().map(|w| -*w).collect();
        Self::merged(vec![(omega, half), (neg, half)])
    }

    /// `sin(ω·ξ)`.
    pub fn sin(omega: Vec<T>) -> Self {
        let c = Complex::new(T::zero(), lit(-0.5));
        let neg = omega.iter().map(|w| -*w).collect();
        Self::merged(vec![(omega, c), (neg, -c)])
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            terms: self.terms.iter().map(|(a, t)| (a.clone(), *t * c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::merged(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, s) in &self.terms {
            for (b, t) in &other.terms {
                let ab = a.iter().zip(b).map(|(x, y)| *x + *y).collect();
                out.push((ab, *s * *t));
            }
        }
        Self::merged(out)
    }

    fn merged(terms: Vec<(Vec<T>, Complex<T>)>) -> Self {
        let mut out: Vec<(Vec<T>, Complex<T>)> = Vec::new();
        for (a, c) in terms {
            match out.iter_mut().find(|(b, _)| *b == a) {
                Some(slot) => slot.1 += c,
                None => out.push((a, c)),
            }
        }
        out.retain(|(_, c)| c.norm() > T::zero());
        Self { terms: out }
    }

    pub fn eval(&self, xi: &[T]) -> Complex<T> {
        self.terms
            .iter()
            .map(|(a, c)| {
                let ph: T = a.iter().zip(xi).map(|(x, y)| *x * *y).sum();
                *c * Complex::new(ph.cos(), ph.sin())
            })
            .fold(Complex::new(T::zero(), T::zero()), |s, t| s + t)
    }

    /// Terms with coefficient `c_α · I_n`.
    pub fn to_terms(&self, n: usize) -> Vec<TrigTerm<T>> {
        let d = self.terms.first().map_or(0, |(a, _)| a.len());
        self.terms
            .iter()
            .map(|(a, c)| TrigTerm {
                alpha: a.clone(),
                coeff: CoefficientField::constant(d, CMat::scalar(n, *c)),
            })
            .collect()
    }
}

/// `|(e^{iθ}−1)/(iθ)|`, the modulus of the mean of `e^{iθt}` over `t ∈ (0,1)`.
pub(crate) fn sinc_mod<T: Real>(theta: T) -> T {
    let h = theta.abs() * lit(0.5);
    if h < lit(1e-8) {
        T::one()
    } else {
        h.sin().abs() / h
    }
}

/// Mean of `e^{iθt}` over `t ∈ (a, a+r)`.
pub fn exp_box_mean<T: Real>(theta: T, a: T, r: T) -> Complex<T> {
    let start = Complex::new(T::zero(), theta * a).exp();
    let tr = theta * r;
    if tr.abs() < lit(1e-8) {
        return start * Complex::new(T::one(), tr * lit(0.5));
    }
    let num = Complex::new(T::zero(), tr).exp() - Complex::new(T::one(), T::zero());
    start * num / Complex::new(T::zero(), tr)
}

/// Exact average of `Σ T_α(x) e^{iα·ξ}` over `ξ ∈ corner + (0, r)^d` for fixed `x`.
pub fn box_average<T: Real>(terms: &[TrigTerm<T>], x: &[T], corner: &[T], r: T) -> CMat<T> {
    let n = terms[0].coeff.ncomp();
    let mut acc = CMat::zeros(n);
    for t in terms {
        let f = t
            .alpha
            .iter()
            .zip(corner)
            .map(|(a, c)| exp_box_mean(*a, *c, r))
            .fold(Complex::new(T::one(), T::zero()), |p, q| p * q);
        acc.axpy(f, &t.coeff.eval(x));
    }
    acc
}

/// `ρ₁₀(r) = Σ_{α≠0} sup|T_α| ∏_j min(1, 2/(|α_j| r))`.
pub fn trig_tail<T: Real>(terms: &[TrigTerm<T>], r: T) -> T {
    let two: T = lit(2.0);
    terms
        .iter()
        .filter(|t| !t.is_constant_mode())
        .map(|t| {
            t.alpha.iter().fold(t.coeff.sup_bound(), |p, a| {
                if *a == T::zero() {
                    p
                } else {
                    p * T::one().min(two / (a.abs() * r))
                }
            })
        })
        .sum()
}

/// `V^ε(x) = Σ T_α(x) e^{iα·x/ε}` with limit `T₀(x)`.
///
/// `rho9` is the common continuity modulus of the `T_α` in `x`; use `|_| 0` for constant coefficients.
pub fn make_almost_periodic<T: Real>(
    domain: BoxDomain<T>,
    terms: Vec<TrigTerm<T>>,
    rho9: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidArgument("almost periodic family needs at least one term".into()))?;
    let n = first.coeff.ncomp();
    if terms.iter().any(|t| t.alpha.len() != d || t.coeff.dim() != d || t.coeff.ncomp() != n) {
        return Err(Error::Dimension("trig terms differ in shape from the domain".into()));
    }
    let mut limit = CoefficientField::zero(d, n);
    for t in terms.iter().filter(|t| t.is_constant_mode()) {
        limit = limit.add(&t.coeff)?;
    }
    let sup: T = terms.iter().map(|t| t.coeff.sup_bound()).sum();
    let terms = Arc::new(terms);
    let tb = terms.clone();
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let tb = tb.clone();
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup, move |x| {
            let mut acc = CMat::zeros(n);
            for t in tb.iter() {
                let ph: T = t.alpha.iter().zip(x).map(|(a, xi)| *a * *xi).sum::<T>() / e;
                acc.axpy(Complex::new(ph.cos(), ph.sin()), &t.coeff.eval(x));
            }
            acc
        })))
    };
    let kappa = sqrt_usize::<T>(d);
    let half: T = lit(0.5);
    let nterms = terms.len();
    Ok(PerturbationFamily::new("almost_periodic", domain, FieldTriple::from_v(limit), build)?
        .with_rate(move |e| {
            let s = e.powf(half);
            rho9(kappa * s) + trig_tail(&terms, T::one() / s) + s
        })
        .with_param("terms", nterms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_only_is_static() {
        let fam = make_almost_periodic(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            vec![TrigTerm { alpha: vec![0.0], coeff: CoefficientField::identity(1, 2) }],
            |_| 0.0,
        )
        .unwrap();
        assert_eq!(fam.at(0.01).unwrap().v.eval(&[0.4]), CMat::identity(2));
        assert_eq!(fam.deviation(0.01).unwrap().v.eval(&[0.4]).abs_sum(), 0.0);
    }

    #[test]
    fn two_frequency_example_has_zero_limit() {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let p = ScalarTrig::sin(vec![1.0, 0.0])
            .mul(&ScalarTrig::cos(vec![0.0, 1.0]))
            .add(&ScalarTrig::cos(vec![s2, 0.0]).mul(&ScalarTrig::cos(vec![0.0, s3])));
        let xi = [0.37f64, -1.2];
        let direct = xi[0].sin() * xi[1].cos() + (s2 * xi[0]).cos() * (s3 * xi[1]).cos();
        assert!((p.eval(&xi).re - direct).abs() < 1e-14);
        assert!(p.eval(&xi).im.abs() < 1e-14);
        let fam = make_almost_periodic(BoxDomain::unit(2), p.to_terms(1), |_| 0.0).unwrap();
        assert_eq!(fam.limit().v.eval(&[0.2, 0.3]).abs_sum(), 0.0);
    }

    #[test]
    fn rejects_empty_terms() {
        assert!(make_almost_periodic::<f64>(BoxDomain::unit(1), vec![], |_| 0.0).is_err());
    }

    #[test]
    fn trig_tail_decays_like_inverse_r() {
        let terms = ScalarTrig::cos(vec![2.0f64]).to_terms(1);
        // Two modes, each 0.5·min(1, 1/r).
        assert!((trig_tail(&terms, 10.0) - 0.1).abs() < 1e-15);
        assert!((trig_tail(&terms, 0.5) - 1.0).abs() < 1e-15);
    }
}
