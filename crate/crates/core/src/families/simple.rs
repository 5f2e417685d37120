use super::{probe_eps, FieldTriple, PerturbationFamily};
use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::lattice::Lattice;
use crate::scalar::{from_usize, lit, CMat, Real};
use std::collections::HashMap;
use std::sync::Arc;

/// Regular perturbation `V^ε → V⁰` uniformly, with a caller-declared uniform rate.
pub fn make_regular<T: Real>(
    domain: BoxDomain<T>,
    v_eps: impl Fn(T) -> CoefficientField<T> + Send + Sync + 'static,
    v0: CoefficientField<T>,
    rate: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let probe = v_eps(probe_eps());
    if probe.dim() != v0.dim() || probe.ncomp() != v0.ncomp() || v0.dim() != domain.dim() {
        return Err(Error::Dimension(format!(
            "V^eps has (d={}, n={}), V0 has (d={}, n={}), domain d={}",
            probe.dim(),
            probe.ncomp(),
            v0.dim(),
            v0.ncomp(),
            domain.dim()
        )));
    }
    PerturbationFamily::new("regular", domain, FieldTriple::from_v(v0), move |e| {
        Ok(FieldTriple::from_v(v_eps(e)))
    })
    .map(|f| f.with_rate(rate))
}

/// Centers `(k + shift)·spacing` of the integer grid lying inside `domain`.
pub fn lattice_centers<T: Real>(domain: &BoxDomain<T>, spacing: T, shift: T) -> Vec<Vec<T>> {
    let d = domain.dim();
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|i| {
            let lo = (domain.lo[i] / spacing - shift).ceil().to_i64().unwrap_or(0);
            let hi = (domain.hi[i] / spacing - shift).floor().to_i64().unwrap_or(-1);
            (lo, hi)
        })
        .collect();
    let mut out = Vec::new();
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|(a, b)| a > b) {
        return out;
    }
    loop {
        let c: Vec<T> = k
            .iter()
            .map(|ki| (T::from_i64(*ki).unwrap() + shift) * spacing)
            .collect();
        if c.iter().zip(domain.lo.iter().zip(&domain.hi)).all(|(x, (a, b))| *x > *a && *x < *b) {
            out.push(c);
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < ranges[axis].1 {
                k[axis] += 1;
                for j in axis + 1..d {
                    k[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

struct CenterGrid<T> {
    cell: T,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    centers: Vec<Vec<T>>,
}

impl<T: Real> CenterGrid<T> {
    fn new(centers: Vec<Vec<T>>, cell: T) -> Self {
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, c) in centers.iter().enumerate() {
            buckets.entry(Self::key(c, cell)).or_default().push(i);
        }
        Self { cell, buckets, centers }
    }

    fn key(x: &[T], cell: T) -> Vec<i64> {
        x.iter().map(|v| (*v / cell).floor().to_i64().unwrap_or(i64::MAX)).collect()
    }

    /// Indices of centers in the 3^d neighbouring buckets of `x`.
    fn near(&self, x: &[T], mut visit: impl FnMut(usize)) {
        let base = Self::key(x, self.cell);
        let d = base.len();
        let mut off = vec![-1i64; d];
        loop {
            let k: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
            if let Some(ids) = self.buckets.get(&k) {
                ids.iter().for_each(|&i| visit(i));
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if off[axis] < 1 {
                    off[axis] += 1;
                    for o in off.iter_mut().skip(axis + 1) {
                        *o = -1;
                    }
                    break;
                }
            }
        }
    }

    fn min_separation(&self) -> Option<T> {
        let mut best: Option<T> = None;
        for (i, c) in self.centers.iter().enumerate() {
            self.near(c, |j| {
                if j != i {
                    let dist = dist(c, &self.centers[j]);
                    best = Some(best.map_or(dist, |b: T| b.min(dist)));
                }
            });
        }
        best
    }
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

/// Sparse bumps: `V^ε(x) = bump((x − M_k)/(ρ₄ρ₅))` near each center `M_k`, zero elsewhere.
///
/// `bump` is evaluated on the unit ball. Centers closer than `ρ₄(ε)` are rejected.
pub fn make_sparse<T: Real>(
    domain: BoxDomain<T>,
    centers: impl Fn(T) -> Vec<Vec<T>> + Send + Sync + 'static,
    rho4: impl Fn(T) -> T + Send + Sync + 'static,
    rho5: impl Fn(T) -> T + Send + Sync + 'static,
    bump: CoefficientField<T>,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    if bump.dim() != d {
        return Err(Error::Dimension("bump dimension differs from domain".into()));
    }
    let n = bump.ncomp();
    let rho4 = Arc::new(rho4);
    let rho5 = Arc::new(rho5);
    let (r4, r5) = (rho4.clone(), rho5.clone());
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let (s4, s5) = (r4(e), r5(e));
        if !(s4 > T::zero()) || !(s5 > T::zero()) {
            return Err(Error::InvalidArgument("rho4, rho5 must be positive".into()));
        }
        let grid = CenterGrid::new(centers(e), s4);
        if let Some(sep) = grid.min_separation() {
            if sep < s4 * (T::one() - lit(1e-12)) {
                return Err(Error::InvalidArgument(format!(
                    "centers separated by {sep} < rho4 = {s4}"
                )));
            }
        }
        let radius = s4 * s5;
        let bump = bump.clone();
        let grid = Arc::new(grid);
        let bound = bump.sup_bound();
        let v = CoefficientField::new(d, n, bound, move |x| {
            let mut out = CMat::zeros(n);
            let mut y = vec![T::zero(); x.len()];
            grid.near(x, |i| {
                let c = &grid.centers[i];
                if dist(x, c) < radius {
                    for (yi, (xi, ci)) in y.iter_mut().zip(x.iter().zip(c)) {
                        *yi = (*xi - *ci) / radius;
                    }
                    out.add_assign(&bump.eval(&y));
                }
            });
            out
        });
        Ok(FieldTriple::from_v(v))
    };
    let dd = d as i32;
    let (a4, a5) = (rho4.clone(), rho5.clone());
    let (b4, c4, c5) = (rho4.clone(), rho4, rho5);
    Ok(PerturbationFamily::new("sparse", domain, FieldTriple::zero(d, n), build)?
        .with_rate(move |e| a5(e).powi(dd) + a4(e))
        .with_eta(move |e| b4(e) / lit(3.0))
        .with_finest_scale(move |e| c4(e) * c5(e)))
}

/// `V^ε(x) = V(x, x/ε)` with `V(x, ξ) → V⁰(x)` as `|ξ| → ∞`; `ρ₆` is the caller's stabilization modulus.
pub fn make_stabilizing<T: Real>(
    domain: BoxDomain<T>,
    v: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    sup_bound: T,
    v0: CoefficientField<T>,
    rho6: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    let n = v0.ncomp();
    check_profile(&v, d, n, &domain)?;
    let v = Arc::new(v);
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let v = v.clone();
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup_bound, move |x| {
            let xi: Vec<T> = x.iter().map(|xi| *xi / e).collect();
            v(x, &xi)
        })))
    };
    let third: T = lit(1.0 / 3.0);
    Ok(PerturbationFamily::new("stabilizing", domain, FieldTriple::from_v(v0), build)?
        .with_rate(move |e| rho6(e) + e.powf(third))
        .with_eta(move |e| e.powf(third))
        .with_lattice(Lattice::odd(d)))
}

/// Stabilizing variant with a direction-dependent limit `V⁰(x) = W(x, x/|x|)`; `ρ₇` is the modulus.
pub fn make_stabilizing_directional<T: Real>(
    domain: BoxDomain<T>,
    v: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    sup_bound: T,
    w: impl Fn(&[T], &[T]) -> CMat<T> + Send + Sync + 'static,
    rho7: impl Fn(T) -> T + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    let n = v(&domain.lo, &domain.lo).n();
    let v0 = CoefficientField::new(d, n, sup_bound, move |x| {
        let r = x.iter().map(|t| *t * *t).sum::<T>().sqrt();
        let zeta: Vec<T> = if r > T::zero() {
            x.iter().map(|t| *t / r).collect()
        } else {
            (0..d).map(|i| if i == 0 { T::one() } else { T::zero() }).collect()
        };
        w(x, &zeta)
    });
    Ok(make_stabilizing(domain, v, sup_bound, v0, rho7)?.with_name("stabilizing_directional"))
}

pub(super) fn check_profile<T: Real>(
    v: &impl Fn(&[T], &[T]) -> CMat<T>,
    d: usize,
    n: usize,
    domain: &BoxDomain<T>,
) -> Result<()> {
    let probe = v(&domain.lo, &vec![T::zero(); d]);
    if probe.n() != n {
        return Err(Error::Dimension(format!(
            "profile returns {}x{} matrices, limit has n = {n}",
            probe.n(),
            probe.n()
        )));
    }
    Ok(())
}

pub(super) fn sqrt_usize<T: Real>(k: usize) -> T {
    from_usize::<T>(k).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn unit() -> BoxDomain<f64> {
        BoxDomain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn regular_scaling_family() {
        let fam = make_regular(
            unit(),
            |e: f64| CoefficientField::constant(1, CMat::identity(2).scale_re(1.0 + e)),
            CoefficientField::identity(1, 2),
            |e| e,
        )
        .unwrap();
        let dev = fam.deviation(0.25).unwrap();
        assert!((dev.v.eval(&[0.3]).abs_sum() - 0.5).abs() < 1e-15);
        assert_eq!(fam.rate(0.25), 0.25);
    }

    #[test]
    fn regular_sup_deviation_is_eps() {
        let fam = make_regular(
            unit(),
            |e: f64| CoefficientField::real_scalar(1, 1, 2.0, move |x| x[0].sin() + e * x[0] * x[0]),
            CoefficientField::real_scalar(1, 1, 1.0, |x| x[0].sin()),
            |e| e,
        )
        .unwrap();
        let dev = fam.deviation(0.01).unwrap();
        let sup = (0..=1000)
            .map(|i| dev.v.eval(&[i as f64 / 1000.0]).abs_sum())
            .fold(0.0, f64::max);
        assert!((sup - 0.01).abs() < 1e-15);
    }

    #[test]
    fn regular_rejects_component_mismatch() {
        let r = make_regular(
            unit(),
            |_e: f64| CoefficientField::identity(1, 2),
            CoefficientField::identity(1, 3),
            |e| e,
        );
        assert!(r.is_err());
    }

    #[test]
    fn sparse_single_bump_integral() {
        let bump = CoefficientField::real_scalar(1, 1, 1.0, |_| 1.0);
        let fam = make_sparse(unit(), |_e| vec![vec![0.5]], |e| e, |_e| 0.5, bump).unwrap();
        let v = fam.at(0.2).unwrap().v;
        // Ball radius 0.1 around 0.5.
        assert_eq!(v.eval(&[0.45]).get(0, 0), Complex::new(1.0, 0.0));
        assert_eq!(v.eval(&[0.61]).get(0, 0), Complex::new(0.0, 0.0));
        let cell = crate::lattice::Cell::from_box(&unit());
        let q = crate::quadrature::cell_integral(&cell, &v, 64);
        assert!((q.value.get(0, 0).re - 0.2).abs() < 1e-3);
    }

    #[test]
    fn sparse_empty_center_set_is_zero() {
        let bump = CoefficientField::real_scalar(1, 1, 1.0, |_| 1.0);
        let fam = make_sparse(unit(), |_e| vec![], |e| e, |e| e, bump).unwrap();
        assert_eq!(fam.at(0.1).unwrap().v.eval(&[0.5]).abs_sum(), 0.0);
    }

    #[test]
    fn sparse_rejects_crowded_centers() {
        let bump = CoefficientField::real_scalar(1, 1, 1.0, |_| 1.0);
        let fam = make_sparse(unit(), |_e| vec![vec![0.5], vec![0.52]], |_e| 0.1, |_e| 0.1, bump).unwrap();
        assert!(fam.at(0.1).is_err());
    }

    #[test]
    fn lattice_centers_interior() {
        let c = lattice_centers(&unit(), 0.25, 0.5);
        assert_eq!(c, vec![vec![0.125], vec![0.375], vec![0.625], vec![0.875]]);
    }

    #[test]
    fn stabilizing_exponential_profile() {
        let fam = make_stabilizing(
            unit(),
            |_x: &[f64], xi: &[f64]| CMat::scalar(1, Complex::new((-xi[0].abs()).exp(), 0.0)),
            1.0,
            CoefficientField::zero(1, 1),
            |e| (-1.0 / e.powf(1.0 / 3.0)).exp(),
        )
        .unwrap();
        let v = fam.at(0.05).unwrap().v;
        assert!((v.eval(&[0.1]).get(0, 0).re - (-2.0f64).exp()).abs() < 1e-15);
        assert!((fam.eta(0.001) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn stabilizing_constant_profile_has_zero_deviation() {
        let fam = make_stabilizing(
            unit(),
            |x: &[f64], _xi: &[f64]| CMat::scalar(1, Complex::new(x[0], 0.0)),
            1.0,
            CoefficientField::real_scalar(1, 1, 1.0, |x| x[0]),
            |_| 0.0,
        )
        .unwrap();
        assert_eq!(fam.deviation(0.01).unwrap().v.eval(&[0.7]).abs_sum(), 0.0);
    }

    #[test]
    fn directional_limit_uses_unit_direction() {
        let fam = make_stabilizing_directional(
            BoxDomain::new(vec![0.1, 0.1], vec![1.0, 1.0]).unwrap(),
            |_x: &[f64], xi: &[f64]| {
                let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                CMat::scalar(1, Complex::new(xi[0] / r, 0.0))
            },
            1.0,
            |_x: &[f64], z: &[f64]| CMat::scalar(1, Complex::new(z[0], 0.0)),
            |_| 0.0,
        )
        .unwrap();
        assert!(fam.deviation(0.01).unwrap().v.eval(&[0.3, 0.4]).abs_sum() < 1e-15);
    }
}
