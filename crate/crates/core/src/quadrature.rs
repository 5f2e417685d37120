//! Composite 4-point Gauss–Legendre quadrature over parallelotope cells.

use crate::field::CoefficientField;
use crate::lattice::Cell;
use crate::scalar::{from_usize, lit, CMat, Real};
use num_complex::Complex;

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Largest number of subcells per axis used by the default rule.
pub const MAX_REFINE: usize = 4096;

/// Composite rule on `[0,1]` with `refine` panels: `(node, weight)` pairs.
pub fn composite_rule<T: Real>(refine: usize) -> Vec<(T, T)> {
    let refine = refine.max(1);
    let h = T::one() / from_usize(refine);
    let half: T = lit(0.5);
    let mut out = Vec::with_capacity(4 * refine);
    for p in 0..refine {
        let a = h * from_usize(p);
        for (x, w) in GL4_X.iter().zip(GL4_W) {
            out.push((a + h * half * (T::one() + lit(*x)), h * half * lit(w)));
        }
    }
    out
}

/// Default subcells per axis: `ceil(η / (ε_min/8))`, clamped to `[1, MAX_REFINE]`.
pub fn default_refine<T: Real>(eta: T, eps_min: T) -> usize {
    let r = (eta / (eps_min / lit(8.0))).ceil();
    let r = r.to_f64().unwrap_or(MAX_REFINE as f64);
    if !r.is_finite() {
        return MAX_REFINE;
    }
    (r as usize).clamp(1, MAX_REFINE)
}

/// Integral with an attached error estimate.
#[derive(Clone, Debug)]
pub struct QuadResult<T> {
    pub value: CMat<T>,
    /// `|I(2r) − I(r)|` in the entrywise-sum norm.
    pub error: T,
    pub refine: usize,
}

/// Fixed-resolution tensor quadrature of a matrix-valued integrand over a cell.
pub fn integrate_fixed<T: Real>(
    cell: &Cell<T>,
    ncomp: usize,
    f: &(dyn Fn(&[T]) -> CMat<T> + Sync),
    refine: usize,
) -> CMat<T> {
    let d = cell.dim();
    let rule = composite_rule::<T>(refine);
    let m = rule.len();
    let jac = cell.measure();
    let mut acc = CMat::zeros(ncomp);
    let mut idx = vec![0usize; d];
    let mut t = vec![T::zero(); d];
    let mut x = vec![T::zero(); d];
    loop {
        let mut w = jac;
        for (i, &k) in idx.iter().enumerate() {
            t[i] = rule[k].0;
            w *= rule[k].1;
        }
        cell.point(&t, &mut x);
        acc.axpy(Complex::new(w, T::zero()), &f(&x));
        let mut axis = d;
        loop {
            if axis == 0 {
                return acc;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Integral at `refine` and `2·refine` subcells per axis; reports the finer value.
pub fn integrate<T: Real>(
    cell: &Cell<T>,
    ncomp: usize,
    f: &(dyn Fn(&[T]) -> CMat<T> + Sync),
    refine: usize,
) -> QuadResult<T> {
    let refine = refine.max(1);
    let coarse = integrate_fixed(cell, ncomp, f, refine);
    let fine = integrate_fixed(cell, ncomp, f, 2 * refine);
    let error = (&fine - &coarse).abs_sum();
    QuadResult {
        value: fine,
        error,
        refine: 2 * refine,
    }
}

/// `∫_cell field dx` with error estimate.
pub fn cell_integral<T: Real>(cell: &Cell<T>, field: &CoefficientField<T>, refine: usize) -> QuadResult<T> {
    integrate(cell, field.ncomp(), &|x| field.eval(x), refine)
}

/// `cell_integral / mes(cell)`.
pub fn cell_mean<T: Real>(cell: &Cell<T>, field: &CoefficientField<T>, refine: usize) -> QuadResult<T> {
    let q = cell_integral(cell, field, refine);
    let m = cell.measure();
    QuadResult {
        value: q.value.scale_re(T::one() / m),
        error: q.error / m,
        refine: q.refine,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoxDomain;

    fn interval(a: f64, b: f64) -> Cell<f64> {
        Cell::from_box(&BoxDomain::interval(a, b).unwrap())
    }

    #[test]
    fn constant_integrates_exactly() {
        let c = CMat::scalar(2, Complex::new(1.5, -0.5));
        let f = CoefficientField::constant(1, c.clone());
        let q = cell_integral(&interval(0.2, 0.7), &f, 1);
        assert!(q.value.max_abs_diff(&c.scale_re(0.5)) < 1e-15);
    }

    #[test]
    fn sine_matches_closed_form() {
        let eps = 0.01;
        let h = 0.37;
        let f = CoefficientField::real_scalar(1, 1, 1.0, move |x: &[f64]| (x[0] / eps).sin());
        let q = cell_integral(&interval(0.0, h), &f, default_refine(h, eps));
        let exact = eps * (1.0 - (h / eps).cos());
        assert!((q.value.get(0, 0).re - exact).abs() < 1e-12);
        assert!(q.error < 1e-10);
    }

    #[test]
    fn odd_product_vanishes_on_square() {
        use std::f64::consts::PI;
        let f = CoefficientField::real_scalar(2, 1, 1.0, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin());
        let q = cell_integral(&Cell::from_box(&BoxDomain::unit(2)), &f, 4);
        assert!(q.value.abs_sum() < 1e-14);
    }

    #[test]
    fn default_refine_resolves_eighth_scale() {
        assert_eq!(default_refine(0.5, 0.1), 40);
        assert_eq!(default_refine(1.0, 1e-9), MAX_REFINE);
        assert_eq!(default_refine(1e-3, 1.0), 1);
    }

    #[test]
    fn single_precision_quadrature() {
        let f = CoefficientField::<f32>::real_scalar(1, 1, 1.0, |x| x[0] * x[0]);
        let cell = Cell::from_box(&BoxDomain::interval(0.0f32, 1.0).unwrap());
        let q = cell_integral(&cell, &f, 2);
        assert!((q.value.get(0, 0).re - 1.0 / 3.0).abs() < 1e-6);
    }
}
