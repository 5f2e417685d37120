use super::simple::sqrt_usize;
use super::{FieldTriple, PerturbationFamily};
use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::lattice::Lattice;
use crate::scalar::{from_usize, lit, CMat, Real};
use std::sync::Arc;

type Profile<T> = Arc<dyn Fn(&[T], &[T]) -> CMat<T> + Send + Sync>;

/// Midpoint rule over the box `∏(0, periods_i)`; exact for trig polynomials of degree `< points`.
pub(crate) fn torus_mean<T: Real>(
    n: usize,
    periods: &[T],
    points: usize,
    f: impl Fn(&[T]) -> CMat<T>,
) -> CMat<T> {
    let k = periods.len();
    let mut acc = CMat::zeros(n);
    let mut idx = vec![0usize; k];
    let mut xi = vec![T::zero(); k];
    let np = from_usize::<T>(points);
    let half: T = lit(0.5);
    let mut count = 0usize;
    loop {
        for j in 0..k {
            xi[j] = periods[j] * (from_usize::<T>(idx[j]) + half) / np;
        }
        acc.add_assign(&f(&xi));
        count += 1;
        let mut axis = k;
        loop {
            if axis == 0 {
                return acc.scale_re(T::one() / from_usize(count));
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < points {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn default_points(k: usize) -> usize {
    match k {
        0..=2 => 32,
        3 => 16,
        _ => 8,
    }
}

fn check_periods<T: Real>(periods: &[T]) -> Result<()> {
    if periods.iter().any(|a| !(*a > T::zero())) {
        return Err(Error::InvalidArgument("periods must be positive".into()));
    }
    Ok(())
}

/// Limit field `x ↦ mean of V(x, ·)` over the period box.
fn mean_field<T: Real>(d: usize, n: usize, sup_bound: T, v: Profile<T>, periods: Vec<T>) -> CoefficientField<T> {
    let points = default_points(periods.len());
    CoefficientField::new(d, n, sup_bound, move |x| torus_mean(n, &periods, points, |xi| v(x, xi)))
}

/// `V^ε(x) = V(x, x/ε₁, …, x/ε_m)` with `ε_j = ε^{p_j}`.
///
/// `v` receives `x` and the concatenated fast variables (length `m·d`); it must be
/// `periods[j]`-periodic in the `j`-th block. `rho8` is the continuity modulus of `V` in `x`.
pub fn make_locally_periodic<T: Real>(
    domain: BoxDomain<T>,
    v: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    sup_bound: T,
    periods: Vec<Vec<T>>,
    powers: Vec<T>,
    rho8: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    let m = periods.len();
    if m == 0 || powers.len() != m {
        return Err(Error::InvalidArgument(format!(
            "need one scale power per level: {} levels, {} powers",
            m,
            powers.len()
        )));
    }
    if periods.iter().any(|p| p.len() != d) {
        return Err(Error::Dimension("each level needs d periods".into()));
    }
    periods.iter().try_for_each(|p| check_periods(p))?;
    if !(powers[0] > T::zero()) || powers.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "scale powers must be positive and strictly increasing".into(),
        ));
    }
    let flat: Vec<T> = periods.iter().flatten().copied().collect();
    let n = v(&domain.lo, &vec![T::zero(); m * d]).n();
    let v: Profile<T> = Arc::new(v);
    let limit = mean_field(d, n, sup_bound, v.clone(), flat);
    let pw = powers.clone();
    let build = move |e: T| -> Result<FieldTriple<T>> {
        if !(e < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "scale separation needs eps < 1, got {e}"
            )));
        }
        let scales: Vec<T> = pw.iter().map(|p| e.powf(*p)).collect();
        let v = v.clone();
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup_bound, move |x| {
            let xi: Vec<T> = scales.iter().flat_map(|s| x.iter().map(move |xj| *xj / *s)).collect();
            v(x, &xi)
        })))
    };
    let diam: Vec<T> = periods
        .iter()
        .map(|p| p.iter().map(|a| *a * *a).sum::<T>().sqrt())
        .collect();
    let (pr, pf) = (powers.clone(), powers.clone());
    let p_last = *powers.last().unwrap();
    let half: T = lit(0.5);
    let fam = PerturbationFamily::new("locally_periodic", domain, FieldTriple::from_v(limit), build)?
        .with_rate(move |e| {
            let mut r = e.powf(pr[0] * half);
            for j in 1..pr.len() {
                let ratio = e.powf(pr[j]) / e.powf(pr[j - 1]);
                r += rho8(sqrt_usize::<T>(j + 1) * diam[j] * ratio);
            }
            r
        })
        .with_eta(move |e| e.powf(pf[0] * half))
        .with_finest_scale(move |e| e.powf(p_last))
        .with_param("levels", m);
    Ok(fam)
}

/// Degeneracy data for [`make_modulated`].
#[derive(Clone)]
pub enum PhiKind<T> {
    /// `φ` is a diffeomorphism of the closure of Ω.
    Diffeomorphism,
    /// `φ` is periodic with degenerate set `S`; `p0(r)` bounds `|det φ′|` from below at distance `≥ r` from `S`.
    Periodic { p0: Arc<dyn Fn(T) -> T + Send + Sync> },
}

impl<T> std::fmt::Debug for PhiKind<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhiKind::Diffeomorphism => write!(f, "Diffeomorphism"),
            PhiKind::Periodic { .. } => write!(f, "Periodic"),
        }
    }
}

/// Central-difference Jacobian determinant of `phi` at `x`.
fn jacobian_det<T: Real>(phi: &dyn Fn(&[T]) -> Vec<T>, x: &[T]) -> T {
    let d = x.len();
    let mut rows = vec![vec![T::zero(); d]; d];
    let mut y = x.to_vec();
    for j in 0..d {
        let h = lit::<T>(1e-5) * (T::one() + x[j].abs());
        y[j] = x[j] + h;
        let fp = phi(&y);
        y[j] = x[j] - h;
        let fm = phi(&y);
        y[j] = x[j];
        for i in 0..d {
            rows[i][j] = (fp[i] - fm[i]) / (h + h);
        }
    }
    crate::lattice::det(&rows)
}

/// Smallest `r ∈ [0, r_max]` with `p1(r) ≥ target`, by bisection; `r_max` if none.
fn implicit_eta<T: Real>(p1: &dyn Fn(T) -> T, target: T, r_max: T) -> T {
    if p1(r_max) < target {
        return r_max;
    }
    let (mut lo, mut hi) = (T::zero(), r_max);
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        if p1(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= lit::<T>(1e-14) * r_max {
            break;
        }
    }
    hi
}

/// `V^ε(x) = V(x, φ(x)/ε)` with `V` periodic in `ξ` over `∏(0, periods_i)`.
pub fn make_modulated<T: Real>(
    domain: BoxDomain<T>,
    v: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    sup_bound: T,
    periods: Vec<T>,
    phi: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    kind: PhiKind<T>,
    rho8: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    if periods.len() != d {
        return Err(Error::Dimension("need d periods".into()));
    }
    check_periods(&periods)?;
    if phi(&domain.lo).len() != d {
        return Err(Error::Dimension("phi must map R^d to R^d".into()));
    }
    if let PhiKind::Diffeomorphism = kind {
        let samples = 17usize;
        let mut x = vec![T::zero(); d];
        let total = samples.pow(d as u32);
        for mut idx in 0..total {
            for j in 0..d {
                let t = from_usize::<T>(idx % samples) / from_usize(samples - 1);
                idx /= samples;
                x[j] = domain.lo[j] + (domain.hi[j] - domain.lo[j]) * t;
            }
            if jacobian_det(&phi, &x).abs() < lit(1e-10) {
                return Err(Error::InvalidArgument(format!(
                    "phi has a degenerate Jacobian near x = {x:?}"
                )));
            }
        }
    }
    let n = v(&domain.lo, &vec![T::zero(); d]).n();
    let v: Profile<T> = Arc::new(v);
    let limit = mean_field(d, n, sup_bound, v.clone(), periods);
    let phi = Arc::new(phi);
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let (v, phi) = (v.clone(), phi.clone());
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup_bound, move |x| {
            let xi: Vec<T> = phi(x).into_iter().map(|p| p / e).collect();
            v(x, &xi)
        })))
    };
    let half: T = lit(0.5);
    let sd = sqrt_usize::<T>(d);
    let fam = PerturbationFamily::new("modulated", domain.clone(), FieldTriple::from_v(limit), build)?;
    Ok(match kind {
        PhiKind::Diffeomorphism => fam
            .with_rate(move |e| e.powf(half) + rho8(sd * e.powf(half)))
            .with_param("phi", "diffeomorphism"),
        PhiKind::Periodic { p0 } => {
            let r_max = domain.diameter();
            let p1 = move |r: T| (r * p0(r * r)).min(p0(r * r).powi(2));
            let p1 = Arc::new(p1);
            let p1b = p1.clone();
            let eta = move |e: T| implicit_eta(&*p1, e.powf(half), r_max);
            let eta_r = move |e: T| implicit_eta(&*p1b, e.powf(half), r_max);
            fam.with_eta(eta)
                .with_rate(move |e| {
                    let h = eta_r(e);
                    e.powf(half) + h + rho8(sd * h)
                })
                .with_param("phi", "periodic")
        }
    })
}

/// `V^ε(x) = V(x, x₁/ε, x₁x₂/ε², …, x₁⋯x_d/ε^d)` with `V` periodic over `∏(0, a_i)`.
///
/// For `d = 1` this is plain periodic oscillation `V(x, x/ε)`.
pub fn make_fractal<T: Real>(
    domain: BoxDomain<T>,
    v: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    sup_bound: T,
    periods: Vec<T>,
    rho8: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    if periods.len() != d {
        return Err(Error::Dimension("need d periods".into()));
    }
    check_periods(&periods)?;
    let n = v(&domain.lo, &vec![T::zero(); d]).n();
    let v: Profile<T> = Arc::new(v);
    let limit = mean_field(d, n, sup_bound, v.clone(), periods);
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let v = v.clone();
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup_bound, move |x| {
            let mut xi = Vec::with_capacity(d);
            let (mut prod, mut scale) = (T::one(), T::one());
            for xj in x {
                prod *= *xj;
                scale *= e;
                xi.push(prod / scale);
            }
            v(x, &xi)
        })))
    };
    let spread = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(T::one(), |acc, m| acc * m.max(T::one()));
    let half: T = lit(0.5);
    let s = lit::<T>(2.0) * sqrt_usize::<T>(d);
    Ok(PerturbationFamily::new("fractal", domain, FieldTriple::from_v(limit), build)?
        .with_rate(move |e| rho8(s * e.powf(half)) + e.powf(half))
        .with_finest_scale(move |e| e.powi(d as i32) / spread)
        .with_lattice(Lattice::odd(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use std::f64::consts::PI;

    fn re(x: f64) -> CMat<f64> {
        CMat::scalar(1, Complex::new(x, 0.0))
    }

    #[test]
    fn single_level_zero_mean() {
        let fam = make_locally_periodic(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |_x: &[f64], xi: &[f64]| re((2.0 * PI * xi[0]).sin()),
            1.0,
            vec![vec![1.0]],
            vec![1.0],
            |r| r,
        )
        .unwrap();
        assert!(fam.limit().v.eval(&[0.37]).abs_sum() < 1e-15);
        let v = fam.at(0.1).unwrap().v;
        assert!((v.eval(&[0.37]).get(0, 0).re - (2.0 * PI * 3.7f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn two_scale_mean_is_x() {
        let fam = make_locally_periodic(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |x: &[f64], xi: &[f64]| re(x[0] * (1.0 + (2.0 * PI * xi[0]).cos())),
            2.0,
            vec![vec![1.0]],
            vec![1.0],
            |r| r,
        )
        .unwrap();
        for x in [0.1, 0.5, 0.93] {
            assert!((fam.limit().v.eval(&[x]).get(0, 0).re - x).abs() < 1e-14);
        }
    }

    #[test]
    fn reiterated_two_level_mean_is_zero() {
        let tp = 2.0 * PI;
        let fam = make_locally_periodic(
            BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            |_x: &[f64], s: &[f64]| re(s[0].sin() * s[1].cos() + s[2].cos() * s[3].sin()),
            2.0,
            vec![vec![tp, tp], vec![tp, tp]],
            vec![1.0, 2.0],
            |r| r,
        )
        .unwrap();
        assert!(fam.limit().v.eval(&[0.3, 0.6]).abs_sum() < 1e-14);
        assert!(fam.at(1.5).is_err());
    }

    #[test]
    fn rejects_non_increasing_powers() {
        let r = make_locally_periodic(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |_x: &[f64], _s: &[f64]| re(0.0),
            0.0,
            vec![vec![1.0], vec![1.0]],
            vec![1.0, 1.0],
            |r| r,
        );
        assert!(r.is_err());
    }

    #[test]
    fn modulated_identity_reduces_to_locally_periodic() {
        let prof = |x: &[f64], xi: &[f64]| re(x[0] * (2.0 * PI * xi[0]).sin() + 0.3);
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let a = make_locally_periodic(dom.clone(), prof, 1.3, vec![vec![1.0]], vec![1.0], |r| r).unwrap();
        let b = make_modulated(dom, prof, 1.3, vec![1.0], |x: &[f64]| x.to_vec(), PhiKind::Diffeomorphism, |r| r)
            .unwrap();
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            assert_eq!(a.at(0.07).unwrap().v.eval(&x), b.at(0.07).unwrap().v.eval(&x));
            assert_eq!(a.limit().v.eval(&x), b.limit().v.eval(&x));
        }
    }

    #[test]
    fn modulated_cubic_phase() {
        let fam = make_modulated(
            BoxDomain::interval(1.0, 2.0).unwrap(),
            |_x: &[f64], xi: &[f64]| re((2.0 * PI * xi[0]).sin()),
            1.0,
            vec![1.0],
            |x: &[f64]| vec![x[0].powi(3)],
            PhiKind::Diffeomorphism,
            |r| r,
        )
        .unwrap();
        let x = 1.3f64;
        let got = fam.at(0.01).unwrap().v.eval(&[x]).get(0, 0).re;
        assert!((got - (2.0 * PI * x.powi(3) / 0.01).sin()).abs() < 1e-10);
        assert!(fam.limit().v.eval(&[x]).abs_sum() < 1e-15);
    }

    #[test]
    fn modulated_rejects_degenerate_diffeomorphism() {
        let r = make_modulated(
            BoxDomain::interval(-1.0, 1.0).unwrap(),
            |_x: &[f64], xi: &[f64]| re(xi[0].sin()),
            1.0,
            vec![2.0 * PI],
            |x: &[f64]| vec![x[0] * x[0]],
            PhiKind::Diffeomorphism,
            |r| r,
        );
        assert!(r.is_err());
    }

    #[test]
    fn modulated_periodic_phi_eta_solves_implicit_equation() {
        let fam = make_modulated(
            BoxDomain::interval(0.0, 3.0).unwrap(),
            |_x: &[f64], xi: &[f64]| re((2.0 * PI * xi[0]).sin()),
            1.0,
            vec![1.0],
            |x: &[f64]| vec![x[0].cos()],
            PhiKind::Periodic { p0: Arc::new(|r: f64| r.min(1.0).sin()) },
            |r| r,
        )
        .unwrap();
        let e = 1e-4;
        let eta = fam.eta(e);
        let p1 = |r: f64| (r * (r * r).min(1.0).sin()).min((r * r).min(1.0).sin().powi(2));
        assert!((p1(eta) - e.sqrt()).abs() < 1e-9);
        assert!(eta < 0.5);
    }

    #[test]
    fn fractal_two_dimensional_formula() {
        let fam = make_fractal(
            BoxDomain::new(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap(),
            |_x: &[f64], xi: &[f64]| re(xi[0].sin() * xi[1].sin()),
            1.0,
            vec![2.0 * PI, 2.0 * PI],
            |r| r,
        )
        .unwrap();
        let (x1, x2, e) = (0.8f64, 1.1f64, 0.2f64);
        let got = fam.at(e).unwrap().v.eval(&[x1, x2]).get(0, 0).re;
        assert!((got - (x1 / e).sin() * (x1 * x2 / (e * e)).sin()).abs() < 1e-12);
        assert!(fam.limit().v.eval(&[x1, x2]).abs_sum() < 1e-15);
    }

    #[test]
    fn fractal_one_dimensional_is_periodic() {
        let prof = |_x: &[f64], xi: &[f64]| re((2.0 * PI * xi[0]).cos());
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let a = make_fractal(dom.clone(), prof, 1.0, vec![1.0], |r| r).unwrap();
        let b = make_locally_periodic(dom, prof, 1.0, vec![vec![1.0]], vec![1.0], |r| r).unwrap();
        for i in 0..40 {
            let x = [i as f64 / 39.0];
            assert_eq!(a.at(0.03).unwrap().v.eval(&x), b.at(0.03).unwrap().v.eval(&x));
        }
    }

    #[test]
    fn fractal_rejects_nonpositive_period() {
        let r = make_fractal(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |_x: &[f64], _xi: &[f64]| re(1.0),
            1.0,
            vec![0.0],
            |r| r,
        );
        assert!(r.is_err());
    }
}
