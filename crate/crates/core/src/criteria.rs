//! Cell statistics ρ₁ and ρ₃, η selection, local-mean limit extraction and Weyl means.

use crate::error::{Error, Result};
use crate::families::{exp_box_mean, Component, PerturbationFamily, TrigTerm};
use crate::field::{BoxDomain, CoefficientField};
use crate::lattice::{cells_inside, Cell, Lattice};
use crate::quadrature::{composite_rule, default_refine, MAX_REFINE};
use crate::scalar::{from_usize, lit, to_f64, CMat, Real};
use num_complex::Complex;
use rayon::prelude::*;

/// Quadrature controls for cell statistics.
#[derive(Clone, Debug)]
pub struct CriterionOptions {
    pub component: Component,
    /// Panels per cell axis for the coarse pass; `None` picks `default_refine(η, finest scale)`.
    pub refine: Option<usize>,
    /// Cap on integrand evaluations over both passes and all cells.
    pub max_evaluations: u64,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        Self {
            component: Component::V,
            refine: None,
            max_evaluations: 200_000_000,
        }
    }
}

/// ρ₁, ρ₃ and the bounds they imply at one `(ε, η)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport<T> {
    pub eps: T,
    pub eta: T,
    pub rho1: T,
    pub rho3: T,
    /// `ρ₁ + η`.
    pub bound_m1m1: T,
    /// `ρ₃^{1/2} + η^{1/2}`.
    pub bound_m10: T,
    /// Cell attaining ρ₁.
    pub argmax_cell: Vec<i64>,
    /// Cell attaining ρ₃.
    pub argmax_cell_rho3: Vec<i64>,
    pub cells: usize,
    /// Coarse-pass panels per axis actually used.
    pub refine: usize,
    /// Largest change in either statistic between the two passes.
    pub quad_error: T,
    /// The evaluation cap lowered `refine`.
    pub capped: bool,
}

impl<T: Real> CriterionReport<T> {
    fn new(eps: T, eta: T, stats: CellStats<T>) -> Self {
        Self {
            eps,
            eta,
            rho1: stats.rho1,
            rho3: stats.rho3,
            bound_m1m1: stats.rho1 + eta,
            bound_m10: stats.rho3.sqrt() + eta.sqrt(),
            argmax_cell: stats.argmax1,
            argmax_cell_rho3: stats.argmax3,
            cells: stats.cells,
            refine: stats.refine,
            quad_error: stats.quad_error,
            capped: stats.capped,
        }
    }
}

/// Maxima over `Γ_η` of the cell-mean deviation and the cell-mean squared deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStats<T> {
    pub rho1: T,
    pub rho3: T,
    pub argmax1: Vec<i64>,
    pub argmax3: Vec<i64>,
    pub cells: usize,
    pub refine: usize,
    pub quad_error: T,
    pub capped: bool,
}

/// Weighted sums of `f` and `|f|²` over a cell at a fixed resolution, divided by the cell measure.
fn cell_moments<T: Real>(cell: &Cell<T>, f: &CoefficientField<T>, rule: &[(T, T)]) -> (CMat<T>, T) {
    let d = cell.dim();
    let m = rule.len();
    let mut acc = CMat::zeros(f.ncomp());
    let mut sq = T::zero();
    let mut idx = vec![0usize; d];
    let mut t = vec![T::zero(); d];
    let mut x = vec![T::zero(); d];
    loop {
        let mut w = T::one();
        for (i, &k) in idx.iter().enumerate() {
            t[i] = rule[k].0;
            w *= rule[k].1;
        }
        cell.point(&t, &mut x);
        let v = f.eval(&x);
        let a = v.abs_sum();
        sq += w * a * a;
        acc.axpy(Complex::new(w, T::zero()), &v);
        let mut axis = d;
        loop {
            if axis == 0 {
                return (acc, sq);
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

fn capped_refine(requested: usize, cells: usize, dim: usize, cap: u64) -> (usize, bool) {
    // Both passes: (4r)^d + (8r)^d = (1 + 2^d)(4r)^d evaluations per cell.
    let per = (cells.max(1) as f64) * (1.0 + (1u64 << dim) as f64);
    let rmax = ((cap as f64 / per).powf(1.0 / dim as f64) / 4.0).floor().max(1.0) as usize;
    if requested > rmax {
        (rmax, true)
    } else {
        (requested, false)
    }
}

/// ρ₁ and ρ₃ of a deviation field over `Γ_η`, each cell integrated at `refine` and `2·refine`.
pub fn cell_statistics<T: Real>(
    deviation: &CoefficientField<T>,
    lattice: &Lattice<T>,
    domain: &BoxDomain<T>,
    eta: T,
    refine: usize,
    max_evaluations: u64,
) -> Result<CellStats<T>> {
    let set = cells_inside(lattice, eta, domain)?;
    if set.is_empty() {
        return Err(Error::EmptyCells(format!(
            "eta = {} admits no cell inside the domain",
            to_f64(eta)
        )));
    }
    let (refine, capped) = capped_refine(refine.max(1), set.len(), lattice.dim(), max_evaluations);
    let coarse = composite_rule::<T>(refine);
    let fine = composite_rule::<T>(2 * refine);
    let per_cell: Vec<(T, T, T)> = set
        .gammas
        .par_iter()
        .map(|k| {
            let cell = lattice.scaled_cell(k, eta);
            let (m0, s0) = cell_moments(&cell, deviation, &coarse);
            let (m1, s1) = cell_moments(&cell, deviation, &fine);
            let err = (&m1 - &m0).abs_sum().max((s1 - s0).abs());
            (m1.abs_sum(), s1, err)
        })
        .collect();
    let mut stats = CellStats {
        rho1: T::zero(),
        rho3: T::zero(),
        argmax1: set.gammas[0].clone(),
        argmax3: set.gammas[0].clone(),
        cells: set.len(),
        refine,
        quad_error: T::zero(),
        capped,
    };
    for (k, (r1, r3, e)) in set.gammas.iter().zip(per_cell) {
        if r1 > stats.rho1 {
            stats.rho1 = r1;
            stats.argmax1 = k.clone();
        }
        if r3 > stats.rho3 {
            stats.rho3 = r3;
            stats.argmax3 = k.clone();
        }
        stats.quad_error = stats.quad_error.max(e);
    }
    Ok(stats)
}

/// ρ₁ and ρ₃ of `family` at `(ε, η)` for the component selected in `opts`.
pub fn criterion<T: Real>(
    family: &PerturbationFamily<T>,
    eps: T,
    eta: T,
    opts: &CriterionOptions,
) -> Result<CriterionReport<T>> {
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    let dev = family.deviation(eps)?;
    let field = dev.get(opts.component)?;
    let refine = opts
        .refine
        .unwrap_or_else(|| default_refine(eta, family.finest_scale(eps)));
    let stats = cell_statistics(
        field,
        family.lattice(),
        family.domain(),
        eta,
        refine,
        opts.max_evaluations,
    )?;
    Ok(CriterionReport::new(eps, eta, stats))
}

/// Cell-mean criterion `max_γ |η^{-d}∫(V^ε − V⁰)|`.
pub fn rho1<T: Real>(family: &PerturbationFamily<T>, eps: T, eta: T, opts: &CriterionOptions) -> Result<T> {
    criterion(family, eps, eta, opts).map(|r| r.rho1)
}

/// Squared criterion `max_γ η^{-d}∫|Q^ε − Q⁰|²`.
pub fn rho3<T: Real>(family: &PerturbationFamily<T>, eps: T, eta: T, opts: &CriterionOptions) -> Result<T> {
    criterion(family, eps, eta, opts).map(|r| r.rho3)
}

/// Which bound `optimize_eta` minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `ρ₁ + η`.
    M1m1,
    /// `ρ₃^{1/2} + η^{1/2}`.
    M10,
}

impl Objective {
    pub fn value<T: Real>(self, r: &CriterionReport<T>) -> T {
        match self {
            Objective::M1m1 => r.bound_m1m1,
            Objective::M10 => r.bound_m10,
        }
    }
}

/// `{ε^a : a ∈ {0.3, 0.4, 0.5, 0.6, 0.7}}`.
pub fn default_eta_grid<T: Real>(eps: T) -> Vec<T> {
    [0.3, 0.4, 0.5, 0.6, 0.7].iter().map(|a| eps.powf(lit(*a))).collect()
}

/// Grid point minimizing the objective; ties within `1e-12` relative go to the larger η.
///
/// Grid points admitting no cell are skipped. Returns the winner and every evaluated report.
pub fn optimize_eta<T: Real>(
    family: &PerturbationFamily<T>,
    eps: T,
    grid: Option<&[T]>,
    objective: Objective,
    opts: &CriterionOptions,
) -> Result<(CriterionReport<T>, Vec<CriterionReport<T>>)> {
    let grid = grid.map_or_else(|| default_eta_grid(eps), <[T]>::to_vec);
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty eta grid".into()));
    }
    let mut all = Vec::new();
    for &eta in &grid {
        match criterion(family, eps, eta, opts) {
            Ok(r) => all.push(r),
            Err(Error::EmptyCells(_)) => log::warn!("eta = {} admits no cells; skipped", to_f64(eta)),
            Err(e) => return Err(e),
        }
    }
    let mut best: Option<&CriterionReport<T>> = None;
    for r in &all {
        best = match best {
            None => Some(r),
            Some(b) => {
                let (vr, vb) = (objective.value(r), objective.value(b));
                let tie = (vr - vb).abs() <= lit::<T>(1e-12) * vr.abs().max(vb.abs());
                if (tie && r.eta > b.eta) || (!tie && vr < vb) {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    match best {
        Some(b) => Ok((b.clone(), all.clone())),
        None => Err(Error::EmptyCells("every eta in the grid admits no cells".into())),
    }
}

/// `33` equispaced interior points per axis of `domain`.
pub fn default_sample_grid<T: Real>(domain: &BoxDomain<T>) -> Vec<Vec<T>> {
    sample_grid(domain, 33)
}

/// `n` equispaced interior points per axis, `lo + (i+1)(hi−lo)/(n+1)`.
pub fn sample_grid<T: Real>(domain: &BoxDomain<T>, n: usize) -> Vec<Vec<T>> {
    let d = domain.dim();
    let axis = |i: usize, k: usize| {
        domain.lo[i] + (domain.hi[i] - domain.lo[i]) * from_usize::<T>(k + 1) / from_usize::<T>(n + 1)
    };
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![T::zero(); d];
            for i in (0..d).rev() {
                x[i] = axis(i, flat % n);
                flat /= n;
            }
            x
        })
        .collect()
}

/// Output of [`local_mean_limit`].
#[derive(Clone, Debug)]
pub struct LocalMean<T> {
    /// `x ↦` mean of `V^ε` over `x + μω` at the smallest scheduled ε.
    pub candidate: CoefficientField<T>,
    /// Sample points used.
    pub points: Vec<Vec<T>>,
    /// `means[k][i]`: mean at `schedule[k]`, `points[i]`.
    pub means: Vec<Vec<CMat<T>>>,
    /// Max over points of the change between schedule entries `k` and `k+1`.
    pub successive: Vec<T>,
    /// Deviation between the last two entries.
    pub rho2: T,
    /// `ρ₂ + μ^{1/2}` at the smallest ε.
    pub predicted: T,
    /// Points where `x + μω` leaves the domain.
    pub skipped: Vec<Vec<T>>,
}

fn shifted_box<T: Real>(x: &[T], mu: T, omega: &BoxDomain<T>) -> BoxDomain<T> {
    BoxDomain {
        lo: x.iter().zip(&omega.lo).map(|(a, l)| *a + mu * *l).collect(),
        hi: x.iter().zip(&omega.hi).map(|(a, h)| *a + mu * *h).collect(),
    }
}

fn box_mean<T: Real>(f: &CoefficientField<T>, b: &BoxDomain<T>, refine: usize) -> CMat<T> {
    let rule = composite_rule::<T>(refine);
    cell_moments(&Cell::from_box(b), f, &rule).0
}

/// Extracts `V⁰(x)` as the limit of means over `x + μ(ε)ω` along a decreasing schedule.
///
/// `refine` of `None` resolves `ε/8` across `μω` at each schedule entry.
pub fn local_mean_limit<T: Real>(
    family: &PerturbationFamily<T>,
    schedule: &[T],
    mu: &(dyn Fn(T) -> T + Sync),
    omega: &BoxDomain<T>,
    points: Option<Vec<Vec<T>>>,
    refine: Option<usize>,
) -> Result<LocalMean<T>> {
    if schedule.len() < 2 {
        return Err(Error::InvalidArgument("local mean needs at least two schedule entries".into()));
    }
    if omega.dim() != family.dim() {
        return Err(Error::Dimension("omega and family differ in dimension".into()));
    }
    let domain = family.domain();
    let points = points.unwrap_or_else(|| default_sample_grid(domain));
    let width = (0..omega.dim())
        .map(|i| omega.hi[i] - omega.lo[i])
        .fold(T::zero(), T::max);
    let eps_last = *schedule.last().unwrap();
    let mu_last = mu(eps_last);
    let inside = |x: &Vec<T>, m: T| {
        let b = shifted_box(x, m, omega);
        domain.contains(&b.lo) && domain.contains(&b.hi)
    };
    let (kept, skipped): (Vec<_>, Vec<_>) = points
        .into_iter()
        .partition(|x| schedule.iter().all(|&e| inside(x, mu(e))));
    for x in &skipped {
        log::warn!("sample point {:?} skipped: x + mu*omega leaves the domain", x.iter().map(|v| to_f64(*v)).collect::<Vec<_>>());
    }
    if kept.is_empty() {
        return Err(Error::EmptyCells("every sample point leaves the domain".into()));
    }
    let refine_for = |eps: T| {
        refine.unwrap_or_else(|| default_refine(mu(eps) * width, family.finest_scale(eps)).min(MAX_REFINE))
    };
    let mut means = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let field = family.at(eps)?.v;
        let m = mu(eps);
        let r = refine_for(eps);
        let row: Vec<CMat<T>> = kept
            .par_iter()
            .map(|x| box_mean(&field, &shifted_box(x, m, omega), r))
            .collect();
        means.push(row);
    }
    let successive: Vec<T> = means
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b).abs_sum())
                .fold(T::zero(), T::max)
        })
        .collect();
    let rho2 = *successive.last().unwrap();
    let field = family.at(eps_last)?.v;
    let omega_c = omega.clone();
    let r_last = refine_for(eps_last);
    let ncomp = field.ncomp();
    let sup = field.sup_bound();
    let candidate = CoefficientField::new(field.dim(), ncomp, sup, move |x: &[T]| {
        box_mean(&field, &shifted_box(x, mu_last, &omega_c), r_last)
    });
    Ok(LocalMean {
        candidate,
        points: kept,
        means,
        successive,
        rho2,
        predicted: rho2 + mu_last.sqrt(),
        skipped,
    })
}

/// One row of a Weyl-mean study.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylRow<T> {
    pub r: T,
    /// Max over the sampled γ of `|box average − T₀(x)|`.
    pub deviation: T,
    /// Box average at the first sampled γ.
    pub mean: CMat<T>,
}

/// Averages of `Σ T_α(x)e^{iα·ξ}` over `r□ + rγ` for each `r`, compared with the constant mode.
///
/// Cells must be axis-aligned; `x` fixes the slow variable.
pub fn weyl_mean<T: Real>(
    terms: &[TrigTerm<T>],
    x: &[T],
    r_schedule: &[T],
    lattice: &Lattice<T>,
    gammas: &[Vec<i64>],
) -> Result<Vec<WeylRow<T>>> {
    if terms.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidArgument("weyl_mean needs terms and at least one gamma".into()));
    }
    let n = terms[0].coeff.ncomp();
    let mut limit = CMat::zeros(n);
    for t in terms.iter().filter(|t| t.is_constant_mode()) {
        limit.add_assign(&t.coeff.eval(x));
    }
    let mut rows = Vec::with_capacity(r_schedule.len());
    for &r in r_schedule {
        let mut deviation = T::zero();
        let mut first = None;
        for k in gammas {
            let cell = lattice.scaled_cell(k, r);
            if !cell.is_axis_aligned() {
                return Err(Error::InvalidArgument("weyl_mean requires an axis-aligned cell".into()));
            }
            let mut acc = CMat::zeros(n);
            for t in terms {
                let f = t
                    .alpha
                    .iter()
                    .enumerate()
                    .map(|(i, a)| exp_box_mean(*a, cell.origin[i], cell.edges[i][i]))
                    .fold(Complex::new(T::one(), T::zero()), |p, q| p * q);
                acc.axpy(f, &t.coeff.eval(x));
            }
            deviation = deviation.max((&acc - &limit).abs_sum());
            first.get_or_insert(acc);
        }
        rows.push(WeylRow {
            r,
            deviation,
            mean: first.unwrap(),
        });
    }
    Ok(rows)
}
