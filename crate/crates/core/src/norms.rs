//! Induced operator norms, multiplier norms, resolvent-difference norms and coercivity.

use crate::error::{Error, Result};
use crate::fem::{DiscreteOperator, Metric};
use crate::field::CoefficientField;
use crate::linalg::{dot, extreme_eigenvalues, random_vector, BandCholesky, BandMatrix, EigenEstimate, Extreme, IterOptions, C};
use crate::scalar::{lit, to_f64, Real};
use num_complex::Complex;

/// Values at or below this are reported as zero.
pub const ZERO_FLOOR: f64 = 1e-12;

/// An induced norm with iteration metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub value: f64,
    pub iterations: usize,
    /// Bound on the error of `value` implied by the final Ritz residual.
    pub residual: f64,
    /// The two seeded runs disagreed beyond tolerance.
    pub flagged: bool,
    pub matrices: Vec<String>,
}

impl NormReport {
    fn from_eig(e: &EigenEstimate, labels: &[&str]) -> Self {
        let lam = e.max.max(0.0);
        let sigma = lam.sqrt();
        let (value, residual) = if sigma <= ZERO_FLOOR {
            (0.0, 0.0)
        } else {
            (sigma, e.residual / (2.0 * sigma))
        };
        Self {
            value,
            iterations: e.iterations,
            residual,
            flagged: e.flagged,
            matrices: labels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

type Apply<'a, T> = &'a dyn Fn(&[C<T>]) -> Result<Vec<C<T>>>;

/// `sup ‖Bx‖_out / ‖x‖_in` for `B` given with its adjoint.
///
/// Runs on `A = W_in⁻¹ B* W_out B`, self-adjoint in the `W_in` inner product.
pub fn operator_norm<T: Real>(
    b: Apply<'_, T>,
    b_adj: Apply<'_, T>,
    input: Metric<'_, T>,
    output: Metric<'_, T>,
    opts: &IterOptions,
    labels: &[&str],
) -> Result<NormReport> {
    let n = input.dim();
    let a = |x: &[C<T>]| -> Result<Vec<C<T>>> {
        let y = b(x)?;
        let z = b_adj(&output.apply(&y))?;
        Ok(input.apply_inv(&z))
    };
    let w = |x: &[C<T>]| -> Result<Vec<C<T>>> { Ok(input.apply(x)) };
    let e = extreme_eigenvalues(n, &a, &w, Extreme::Max, opts)?;
    Ok(NormReport::from_eig(&e, labels))
}

/// `‖X‖_{𝔙→𝔙*}`: the largest singular value of `S^{−1/2} X S^{−1/2}`.
pub fn norm_v_to_vstar<T: Real>(x: &BandMatrix<T>, op: &DiscreteOperator<T>, opts: &IterOptions) -> Result<NormReport> {
    if x.n() != op.dof() {
        return Err(Error::Dimension(format!("X is {} but the mesh has {} unknowns", x.n(), op.dof())));
    }
    let b = |v: &[C<T>]| Ok(x.matvec(v));
    let bt = |v: &[C<T>]| Ok(x.matvec_adjoint(v));
    operator_norm(&b, &bt, op.metric_v(), op.metric_vstar(), opts, &["X", "S"])
}

/// `‖V‖_{𝔐₁,₋₁} = sup ‖Vu‖_{𝔙*}/‖u‖_𝔙` on the mesh.
pub fn norm_m1m1<T: Real>(v: &CoefficientField<T>, op: &DiscreteOperator<T>, opts: &IterOptions) -> Result<NormReport> {
    let x = op.weighted_mass(v);
    let mut r = norm_v_to_vstar(&x, op, opts)?;
    r.matrices = vec!["M_V".into(), "S".into()];
    Ok(r)
}

/// `‖Q‖_{𝔐₁,₀} = sup ‖Qu‖_{L₂}/‖u‖_𝔙`, from the Gram matrix of `Q*Q` against `S`.
pub fn norm_m10<T: Real>(q: &CoefficientField<T>, op: &DiscreteOperator<T>, opts: &IterOptions) -> Result<NormReport> {
    let qq = q.mul_left(&q.adjoint())?;
    let g = op.weighted_mass(&qq);
    let s = op.metric_v();
    let a = |v: &[C<T>]| Ok(s.apply_inv(&g.matvec(v)));
    let w = |v: &[C<T>]| Ok(s.apply(v));
    let e = extreme_eigenvalues(op.dof(), &a, &w, Extreme::Max, opts)?;
    Ok(NormReport::from_eig(&e, &["M_{Q*Q}", "S"]))
}

/// `κ = ‖D‖_{𝔙*→𝔙}` for a difference of resolvents `D` given by its action and adjoint action.
pub fn kappa<T: Real>(
    d: Apply<'_, T>,
    d_adj: Apply<'_, T>,
    op: &DiscreteOperator<T>,
    opts: &IterOptions,
) -> Result<NormReport> {
    operator_norm(d, d_adj, op.metric_vstar(), op.metric_v(), opts, &["R_eps - R_0", "S"])
}

/// Coercivity data at the selected shift.
#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport {
    pub lambda0: f64,
    /// Smallest `min eig S⁻¹ Re(G_λ)` over all checked operators.
    pub c4: f64,
    /// Smallest `Re(u*G_λu)/u*Su` over seeded random vectors.
    pub random_min_ratio: f64,
    /// Largest `|Im u*G_λu| / Re u*G_λu` over the same vectors (numerical-range sector).
    pub sector_tan: f64,
    pub doublings: usize,
}

/// `min eig S⁻¹ (Re(A) − λM)` in the `S` inner product.
///
/// Bisects on `c` with the test `Re(A) − λM − cS ≻ 0`, decided by whether a banded Cholesky
/// factorization succeeds. The returned value is the lower end of the final bracket, so the
/// shifted form is certified coercive with that constant. Iteration stops when the bracket is
/// within `opts.tol` of its scale.
pub fn coercivity_constant<T: Real>(a: &BandMatrix<T>, lambda: T, op: &DiscreteOperator<T>, opts: &IterOptions) -> Result<f64> {
    let h = a.hermitian_part().add_scaled(C::new(-lambda, T::zero()), &op.mass)?;
    let definite = |c: f64| -> Result<bool> {
        let m = h.add_scaled(C::new(lit(-c), T::zero()), &op.gram)?;
        Ok(BandCholesky::factor(&m).is_ok())
    };
    // Any Rayleigh quotient bounds the minimum from above.
    let u = random_vector::<T>(op.dof(), opts.seed);
    let mut hi = to_f64(dot(&u, &h.matvec(&u)).re) / to_f64(dot(&u, &op.gram.matvec(&u)).re);
    let mut step = hi.abs().max(1.0);
    let mut lo = hi - step;
    let mut expansions = 0;
    while !definite(lo)? {
        hi = lo;
        step *= 2.0;
        lo -= step;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence {
                iterations: expansions,
                estimate: lo,
                residual: step,
            });
        }
    }
    while hi - lo > opts.tol * lo.abs().max(hi.abs()).max(opts.floor) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if definite(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Most negative shift tried before giving up.
pub const LAMBDA_FLOOR: f64 = -1e6;

/// Finds `λ ∈ {−1, −2, −4, …}` with `Re(h + X − λ) ≥ c₄ ‖·‖²_𝔙`, `c₄ > 0`, for every operator
/// `A_k = base + X_k` (all sharing one mesh).
pub fn find_lambda<T: Real>(
    ops: &[(&DiscreteOperator<T>, &BandMatrix<T>)],
    opts: &IterOptions,
) -> Result<CoercivityReport> {
    if ops.is_empty() {
        return Err(Error::InvalidArgument("find_lambda needs at least one operator".into()));
    }
    let mut lambda = -1.0f64;
    let mut steps = 0;
    loop {
        let mut c4 = f64::INFINITY;
        for (op, a) in ops {
            c4 = c4.min(coercivity_constant(a, lit::<T>(lambda), op, opts)?);
            if c4 <= 0.0 {
                break;
            }
        }
        if c4 > 0.0 && c4.is_finite() {
            let (ratio, sector) = random_cone_check(ops, lambda, 1000);
            return Ok(CoercivityReport {
                lambda0: lambda,
                c4,
                random_min_ratio: ratio,
                sector_tan: sector,
                doublings: steps,
            });
        }
        lambda *= 2.0;
        steps += 1;
        if lambda < LAMBDA_FLOOR {
            return Err(Error::Coercivity(format!(
                "no coercive shift above {LAMBDA_FLOOR:e}; last c4 = {c4:e}"
            )));
        }
    }
}

fn random_cone_check<T: Real>(ops: &[(&DiscreteOperator<T>, &BandMatrix<T>)], lambda: f64, samples: usize) -> (f64, f64) {
    let mut ratio = f64::INFINITY;
    let mut sector = 0.0f64;
    let per = samples.div_ceil(ops.len());
    for (k, (op, a)) in ops.iter().enumerate() {
        let shift = Complex::new(lit::<T>(-lambda), T::zero());
        for s in 0..per {
            let u = random_vector::<T>(op.dof(), 0xc0e4 ^ ((k as u64) << 32) ^ s as u64);
            let mut gu = a.matvec(&u);
            let mu = op.mass.matvec(&u);
            for (g, m) in gu.iter_mut().zip(&mu) {
                *g += shift * *m;
            }
            let q = dot(&u, &gu);
            let su = to_f64(dot(&u, &op.gram.matvec(&u)).re);
            let re = to_f64(q.re);
            ratio = ratio.min(re / su);
            if re > 0.0 {
                sector = sector.max(to_f64(q.im).abs() / re);
            }
        }
    }
    (ratio, sector)
}
