use super::{FieldTriple, PerturbationFamily};
use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::lattice::{cells_inside, Lattice};
use crate::quadrature::{default_refine, integrate_fixed};
use crate::scalar::{lit, CMat, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

fn rebuild<T: Real>(
    fam: &PerturbationFamily<T>,
    name: String,
    limit: FieldTriple<T>,
    map: impl Fn(FieldTriple<T>) -> Result<FieldTriple<T>> + Send + Sync + 'static,
) -> Result<PerturbationFamily<T>> {
    let (build, rate, eta, finest) = fam.parts();
    let mut meta_params = fam.meta().params.clone();
    let mut out = PerturbationFamily::new(name, fam.domain().clone(), limit, move |e| map(build(e)?))?
        .with_rate(move |e| rate(e))
        .with_eta(move |e| eta(e))
        .with_finest_scale(move |e| finest(e))
        .with_lattice(fam.lattice().clone());
    for (k, v) in meta_params.drain(..) {
        out = out.with_param(k, v);
    }
    Ok(out)
}

/// `ΨV^ε`, `ΨQ_j^ε`, `ΨP_j^ε`; `psi_w1inf` bounds `‖Ψ‖_{W¹∞}` and scales the rate by `2‖Ψ‖_{W¹∞}`.
pub fn scale_left<T: Real>(
    psi: CoefficientField<T>,
    psi_w1inf: T,
    fam: &PerturbationFamily<T>,
) -> Result<PerturbationFamily<T>> {
    scale_impl(psi, psi_w1inf, fam, true)
}

/// `V^εΨ`, `Q_j^εΨ`, `P_j^εΨ` with the same rate scaling as [`scale_left`].
pub fn scale_right<T: Real>(
    psi: CoefficientField<T>,
    psi_w1inf: T,
    fam: &PerturbationFamily<T>,
) -> Result<PerturbationFamily<T>> {
    scale_impl(psi, psi_w1inf, fam, false)
}

fn scale_impl<T: Real>(
    psi: CoefficientField<T>,
    psi_w1inf: T,
    fam: &PerturbationFamily<T>,
    left: bool,
) -> Result<PerturbationFamily<T>> {
    if psi.dim() != fam.dim() || psi.ncomp() != fam.ncomp() {
        return Err(Error::Dimension("multiplier shape differs from family".into()));
    }
    let apply = move |t: &FieldTriple<T>, p: &CoefficientField<T>| {
        t.map(|f| if left { f.mul_left(p) } else { f.mul_right(p) })
    };
    let limit = apply(fam.limit(), &psi)?;
    let side = if left { "left" } else { "right" };
    let rate = fam.parts().1;
    let factor = lit::<T>(2.0) * psi_w1inf;
    Ok(rebuild(fam, format!("{}*psi_{side}", fam.name()), limit, move |t| apply(&t, &psi))?
        .with_rate(move |e| factor * rate(e)))
}

/// `−V^ε` etc., with the same rate.
pub fn negate<T: Real>(fam: &PerturbationFamily<T>) -> Result<PerturbationFamily<T>> {
    let m1 = Complex::new(-T::one(), T::zero());
    let neg = move |t: &FieldTriple<T>| t.map(|f| Ok(f.scale(m1)));
    let limit = neg(fam.limit())?;
    rebuild(fam, format!("-{}", fam.name()), limit, move |t| neg(&t))
}

/// Sum of two families on the same domain; rates add, the smaller cell scale is kept.
pub fn add<T: Real>(a: &PerturbationFamily<T>, b: &PerturbationFamily<T>) -> Result<PerturbationFamily<T>> {
    if a.domain() != b.domain() {
        return Err(Error::InvalidArgument("add requires identical domains".into()));
    }
    let limit = a.limit().add(b.limit())?;
    let (ba, ra, ea, fa) = a.parts();
    let (bb, rb, eb, fb) = b.parts();
    Ok(
        PerturbationFamily::new(format!("{}+{}", a.name(), b.name()), a.domain().clone(), limit, move |e| {
            ba(e)?.add(&bb(e)?)
        })?
        .with_rate(move |e| ra(e) + rb(e))
        .with_eta(move |e| ea(e).min(eb(e)))
        .with_finest_scale(move |e| fa(e).min(fb(e)))
        .with_lattice(a.lattice().clone()),
    )
}

/// Returns per-axis lattice steps if the lattice tiles by axis-aligned boxes.
fn axis_steps<T: Real>(lattice: &Lattice<T>) -> Option<Vec<T>> {
    let d = lattice.dim();
    let mut steps = Vec::with_capacity(d);
    for i in 0..d {
        for j in 0..d {
            if i != j && (lattice.basis[i][j] != T::zero() || lattice.cell.edges[i][j] != T::zero()) {
                return None;
            }
        }
        if lattice.basis[i][i] != lattice.cell.edges[i][i] || !(lattice.basis[i][i] > T::zero()) {
            return None;
        }
        steps.push(lattice.basis[i][i]);
    }
    Some(steps)
}

/// Subcells per axis for resampling quadrature: a multiple of 12, so every square-wave
/// jump with `k ∈ {1,2,3}` falls on a panel boundary.
pub fn resample_refine<T: Real>(eta: T, finest: T) -> usize {
    default_refine(eta, finest).div_ceil(12) * 12
}

/// Replaces `V^ε` on every cell `□_γ^η ⊂ Ω` by `m_γ + A_γ·sign(sin(2πk_γ(x₁−o₁)/ℓ₁))`,
/// where `m_γ` is the cell mean of `V^ε`, `k_γ ∈ {1,2,3}` and `A_γ` are drawn from `seed`.
///
/// Cell integrals are preserved; the rate grows by `η`. Only axis-aligned lattices whose cell
/// equals the basis box are supported.
pub fn cell_resample<T: Real>(
    fam: &PerturbationFamily<T>,
    eta: impl Fn(T) -> T + Send + Sync + 'static,
    seed: u64,
) -> Result<PerturbationFamily<T>> {
    let lattice = fam.lattice().clone();
    let steps = axis_steps(&lattice)
        .ok_or_else(|| Error::InvalidArgument("cell_resample needs an axis-aligned lattice".into()))?;
    let domain = fam.domain().clone();
    let (build, rate, _, finest) = fam.parts();
    let eta = Arc::new(eta);
    let (eta_b, eta_r) = (eta.clone(), eta.clone());
    let n = fam.ncomp();
    let d = fam.dim();
    let resampled = move |e: T| -> Result<FieldTriple<T>> {
        let mut t = build(e)?;
        let h = eta_b(e);
        let set = cells_inside(&lattice, h, &domain)?;
        let refine = resample_refine(h, finest(e));
        let base = t.v.clone();
        let cells: Vec<_> = set.cells(&lattice).collect();
        let means: Vec<CMat<T>> = cells
            .par_iter()
            .map(|c| {
                integrate_fixed(c, n, &|x| base.eval(x), refine).scale_re(T::one() / c.measure())
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut index: HashMap<Vec<i64>, usize> = HashMap::with_capacity(cells.len());
        let mut waves = Vec::with_capacity(cells.len());
        let mut amp_max = T::zero();
        for (i, (g, c)) in set.gammas.iter().zip(&cells).enumerate() {
            index.insert(g.clone(), i);
            let k: u32 = rng.random_range(1..=3);
            let a: f64 = rng.random_range(0.25..1.0);
            let amp = CMat::identity(n).scale_re(lit::<T>(a) * base.sup_bound() / lit(n as f64));
            amp_max = amp_max.max(amp.abs_sum());
            waves.push((means[i].clone(), amp, k, c.origin[0], c.edges[0][0]));
        }
        let bound = base.sup_bound() + amp_max;
        let off = lattice.offset.clone();
        let org = lattice.cell.origin.clone();
        let steps = steps.clone();
        t.v = CoefficientField::new(d, n, bound, move |x| {
            let key: Vec<i64> = (0..d)
                .map(|i| ((x[i] / h - org[i] - off[i]) / steps[i]).floor().to_i64().unwrap_or(i64::MIN))
                .collect();
            match index.get(&key) {
                Some(&i) => {
                    let (m, a, k, o, l) = &waves[i];
                    let s = (T::TAU() * lit::<T>(*k as f64) * (x[0] - *o) / *l).sin();
                    let mut out = m.clone();
                    let sign = if s >= T::zero() { T::one() } else { -T::one() };
                    out.axpy(Complex::new(sign, T::zero()), a);
                    out
                }
                None => base.eval(x),
            }
        });
        Ok(t)
    };
    let (_, _, eta0, finest0) = fam.parts();
    Ok(
        PerturbationFamily::new(format!("{}~resampled", fam.name()), fam.domain().clone(), fam.limit().clone(), resampled)?
            .with_rate(move |e| rate(e) + eta_r(e))
            .with_eta(move |e| eta0(e))
            .with_finest_scale(move |e| finest0(e))
            .with_lattice(fam.lattice().clone())
            .with_param("resample_seed", seed),
    )
}

/// Glues `a` on its domain and `b` on its domain into one family on the union box.
///
/// The domains must share one full face and have disjoint interiors. Rates add.
pub fn glue<T: Real>(a: &PerturbationFamily<T>, b: &PerturbationFamily<T>) -> Result<PerturbationFamily<T>> {
    let (da, db) = (a.domain(), b.domain());
    let d = da.dim();
    if db.dim() != d || a.ncomp() != b.ncomp() {
        return Err(Error::Dimension("glued families differ in shape".into()));
    }
    let overlap = (0..d).all(|i| da.lo[i] < db.hi[i] && db.lo[i] < da.hi[i]);
    if overlap {
        return Err(Error::InvalidArgument("glued domains overlap".into()));
    }
    let mut axis = None;
    for i in 0..d {
        if da.lo[i] == db.lo[i] && da.hi[i] == db.hi[i] {
            continue;
        }
        if axis.is_some() || !(da.hi[i] == db.lo[i] || db.hi[i] == da.lo[i]) {
            return Err(Error::InvalidArgument("glued domains must share a full face".into()));
        }
        axis = Some(i);
    }
    let axis = axis.ok_or_else(|| Error::InvalidArgument("glued domains coincide".into()))?;
    let mut lo = da.lo.clone();
    let mut hi = da.hi.clone();
    lo[axis] = da.lo[axis].min(db.lo[axis]);
    hi[axis] = da.hi[axis].max(db.hi[axis]);
    let union = BoxDomain::new(lo, hi)?;
    let a_first = da.hi[axis] == db.lo[axis];
    let cut = if a_first { da.hi[axis] } else { da.lo[axis] };
    let splice = move |fa: &CoefficientField<T>, fb: &CoefficientField<T>| -> Result<CoefficientField<T>> {
        let (fa, fb) = (fa.clone(), fb.clone());
        let bound = fa.sup_bound().max(fb.sup_bound());
        Ok(CoefficientField::new(fa.dim(), fa.ncomp(), bound, move |x| {
            if (x[axis] < cut) == a_first {
                fa.eval(x)
            } else {
                fb.eval(x)
            }
        }))
    };
    let limit = a.limit().zip_with(b.limit(), splice)?;
    let (ba, ra, ea, fa) = a.parts();
    let (bb, rb, eb, fb) = b.parts();
    Ok(
        PerturbationFamily::new(format!("{}|{}", a.name(), b.name()), union, limit, move |e| {
            ba(e)?.zip_with(&bb(e)?, splice)
        })?
        .with_rate(move |e| ra(e) + rb(e))
        .with_eta(move |e| ea(e).min(eb(e)))
        .with_finest_scale(move |e| fa(e).min(fb(e)))
        .with_lattice(a.lattice().clone()),
    )
}
