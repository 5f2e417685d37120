//! Resolvent solves, Neumann partial sums, truncation and convergence studies.

use crate::criteria::{optimize_eta, CriterionOptions, CriterionReport, Objective};
use crate::error::{Error, Result};
use crate::families::{Component, PerturbationFamily};
use crate::fem::{assemble_base, build_mesh, element_refine, mesh_elements_for, DiscreteOperator, OperatorSpec};
use crate::linalg::{axpy, norm2, random_vector, residual_compensated, sub, BandLu, BandMatrix, IterOptions, C};
use crate::norms::{find_lambda, kappa, norm_m10, norm_m1m1, norm_v_to_vstar, operator_norm, CoercivityReport, NormReport};
use crate::scalar::{lit, to_f64, Real};
use rayon::prelude::*;

/// Which resolvent to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Eps,
    Zero,
}

/// `‖Σ |A_k| |u|‖₂`, the scale of the rounding floor in `Σ A_k u`.
fn magnitude<T: Real>(terms: &[&BandMatrix<T>], u: &[C<T>]) -> T {
    let mut acc = vec![T::zero(); u.len()];
    for a in terms {
        for (s, v) in acc.iter_mut().zip(a.abs_matvec(u)) {
            *s = *s + v;
        }
    }
    acc.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt()
}

/// Upper bound on iterative-refinement sweeps per solve.
const REFINE_STEPS: usize = 4;

/// `G⁰ = h + X⁰ − λM`, `G^ε = h + X^ε − λM`, `L = X^ε − X⁰` with their factorizations.
#[derive(Clone, Debug)]
pub struct ResolventContext<T> {
    pub op: DiscreteOperator<T>,
    pub lambda: T,
    pub g0: BandMatrix<T>,
    pub geps: BandMatrix<T>,
    pub l: BandMatrix<T>,
    lu0: BandLu<T>,
    lueps: BandLu<T>,
}

impl<T: Real> ResolventContext<T> {
    /// Builds both shifted operators from the perturbation matrices on `op`'s mesh.
    pub fn new(op: DiscreteOperator<T>, x0: &BandMatrix<T>, xeps: &BandMatrix<T>, lambda: T) -> Result<Self> {
        let one = C::new(T::one(), T::zero());
        let shift = C::new(-lambda, T::zero());
        let g0 = op.base.add_scaled(one, x0)?.add_scaled(shift, &op.mass)?;
        let l = xeps.add_scaled(-one, x0)?;
        let geps = g0.add_scaled(one, &l)?;
        let lu0 = BandLu::factor(&g0).map_err(|e| Error::Breach {
            eps: f64::NAN,
            msg: format!("G0 factorization: {e}"),
        })?;
        let lueps = BandLu::factor(&geps).map_err(|e| Error::Breach {
            eps: f64::NAN,
            msg: format!("Geps factorization: {e}"),
        })?;
        Ok(Self {
            op,
            lambda,
            g0,
            geps,
            l,
            lu0,
            lueps,
        })
    }

    pub fn dof(&self) -> usize {
        self.op.dof()
    }

    /// `max |G^ε − (G⁰ + L)|` entrywise.
    pub fn identity_defect(&self) -> T {
        let one = C::new(T::one(), T::zero());
        match self.g0.add_scaled(one, &self.l).and_then(|s| self.geps.add_scaled(-one, &s)) {
            Ok(d) => d.max_abs(),
            Err(_) => T::infinity(),
        }
    }

    /// `G u = f` by the stored banded factorization plus iterative refinement with a compensated
    /// residual, stopped once the residual stalls. The normwise backward error must satisfy
    /// `‖f − Gu‖ ≤ 10⁻¹⁰ (‖f‖ + ‖|G| |u|‖)`.
    ///
    /// For `G^ε` the refinement residual uses `G⁰` and `L` separately, so the solve targets the
    /// exact sum `G⁰ + L` rather than its rounded entries.
    pub fn solve(&self, which: Which, f: &[C<T>]) -> Result<Vec<C<T>>> {
        let (lu, terms) = match which {
            Which::Eps => (&self.lueps, vec![&self.g0, &self.l]),
            Which::Zero => (&self.lu0, vec![&self.g0]),
        };
        let nf = norm2(f);
        let mut u = lu.solve(f);
        let mut res = residual_compensated(&terms, &u, f);
        let mut r = norm2(&res);
        for _ in 0..REFINE_STEPS {
            let mut next = u.clone();
            axpy(C::new(T::one(), T::zero()), &lu.solve(&res), &mut next);
            let next_res = residual_compensated(&terms, &next, f);
            let next_r = norm2(&next_res);
            if next_r >= r {
                break;
            }
            let stalled = next_r > lit::<T>(0.5) * r;
            (u, res, r) = (next, next_res, next_r);
            if stalled {
                break;
            }
        }
        let tol = lit::<T>(1e-10) * (nf + magnitude(&terms, &u));
        if r > tol && nf > T::zero() {
            return Err(Error::Breach {
                eps: f64::NAN,
                msg: format!("solve residual {} exceeds tolerance {}", to_f64(r), to_f64(tol)),
            });
        }
        Ok(u)
    }

    pub fn solve_adjoint(&self, which: Which, g: &[C<T>]) -> Vec<C<T>> {
        match which {
            Which::Eps => self.lueps.solve_adjoint(g),
            Which::Zero => self.lu0.solve_adjoint(g),
        }
    }

    /// `R⁰ Σ_{j=0}^{N} (−L R⁰)^j f` by Horner: `y₀ = R⁰f`, `y_{k+1} = R⁰(f − L y_k)`.
    pub fn neumann_sum(&self, n: usize, f: &[C<T>]) -> Vec<C<T>> {
        let mut y = self.lu0.solve(f);
        for _ in 0..n {
            let ly = self.l.matvec(&y);
            y = self.lu0.solve(&sub(f, &ly));
        }
        y
    }

    /// Adjoint of [`neumann_sum`](Self::neumann_sum): `z_{k+1} = R⁰*(g − L* z_k)`.
    pub fn neumann_sum_adjoint(&self, n: usize, g: &[C<T>]) -> Vec<C<T>> {
        let mut z = self.lu0.solve_adjoint(g);
        for _ in 0..n {
            let lz = self.l.matvec_adjoint(&z);
            z = self.lu0.solve_adjoint(&sub(g, &lz));
        }
        z
    }

    /// `κ = ‖R^ε − R⁰‖_{𝔙*→𝔙}`.
    pub fn kappa(&self, opts: &IterOptions) -> Result<NormReport> {
        let d = |f: &[C<T>]| Ok(sub(&self.lueps.solve(f), &self.lu0.solve(f)));
        let da = |g: &[C<T>]| Ok(sub(&self.lueps.solve_adjoint(g), &self.lu0.solve_adjoint(g)));
        kappa(&d, &da, &self.op, opts)
    }

    /// `‖R⁰‖_{𝔙*→𝔙}`.
    pub fn r0_norm(&self, opts: &IterOptions) -> Result<NormReport> {
        let b = |f: &[C<T>]| Ok(self.lu0.solve(f));
        let ba = |g: &[C<T>]| Ok(self.lu0.solve_adjoint(g));
        operator_norm(&b, &ba, self.op.metric_vstar(), self.op.metric_v(), opts, &["R_0", "S"])
    }

    /// `‖L‖_𝔐 = ‖L‖_{𝔙→𝔙*}`.
    pub fn l_norm(&self, opts: &IterOptions) -> Result<NormReport> {
        let mut r = norm_v_to_vstar(&self.l, &self.op, opts)?;
        r.matrices = vec!["L".into(), "S".into()];
        Ok(r)
    }

    /// `‖L R⁰‖_{𝔙*→𝔙*}`.
    pub fn lr0_norm(&self, opts: &IterOptions) -> Result<NormReport> {
        let b = |f: &[C<T>]| Ok(self.l.matvec(&self.lu0.solve(f)));
        let ba = |g: &[C<T>]| Ok(self.lu0.solve_adjoint(&self.l.matvec_adjoint(g)));
        operator_norm(&b, &ba, self.op.metric_vstar(), self.op.metric_vstar(), opts, &["L", "R_0", "S"])
    }

    /// `‖R^ε − R_N‖_{𝔙*→𝔙}` for the Neumann partial sum `R_N`.
    pub fn truncation_error(&self, n: usize, opts: &IterOptions) -> Result<NormReport> {
        let d = |f: &[C<T>]| Ok(sub(&self.lueps.solve(f), &self.neumann_sum(n, f)));
        let da = |g: &[C<T>]| Ok(sub(&self.lueps.solve_adjoint(g), &self.neumann_sum_adjoint(n, g)));
        let mut r = kappa(&d, &da, &self.op, opts)?;
        r.matrices = vec!["R_eps - R_N".into(), "S".into()];
        Ok(r)
    }

    /// `‖R^ε − R⁰‖_{L₂→W₂¹}`: loads `Mf` for `f` measured in `L₂`.
    pub fn l2_to_h1_difference(&self, opts: &IterOptions) -> Result<NormReport> {
        let m = &self.op.mass;
        let b = |f: &[C<T>]| {
            let mf = m.matvec(f);
            Ok(sub(&self.lueps.solve(&mf), &self.lu0.solve(&mf)))
        };
        let ba = |g: &[C<T>]| Ok(m.matvec(&sub(&self.lueps.solve_adjoint(g), &self.lu0.solve_adjoint(g))));
        operator_norm(&b, &ba, self.op.metric_l2(), self.op.metric_v(), opts, &["R_eps - R_0", "M", "S"])
    }

    /// Largest relative defect of `R^ε f − R⁰ f = −R⁰ L R^ε f` over `samples` seeded `f`,
    /// measured against `‖R^ε f‖`.
    pub fn resolvent_identity_defect(&self, samples: usize, seed: u64) -> Result<T> {
        let mut worst = T::zero();
        for s in 0..samples {
            let f = random_vector::<T>(self.dof(), seed.wrapping_add(s as u64));
            let ue = self.solve(Which::Eps, &f)?;
            let u0 = self.solve(Which::Zero, &f)?;
            let mut lhs = sub(&ue, &u0);
            let rhs = self.solve(Which::Zero, &self.l.matvec(&ue))?;
            axpy(C::new(T::one(), T::zero()), &rhs, &mut lhs);
            let scale = norm2(&ue);
            if scale > T::zero() {
                worst = worst.max(norm2(&lhs) / scale);
            }
        }
        Ok(worst)
    }
}

/// One row of a truncation study.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationRow {
    pub n: usize,
    pub error: f64,
    /// `c₂^{N+2}‖L‖_𝔐^{N+1}`.
    pub bound: f64,
    /// `error_N / error_{N−1}`; `None` for `N = 0` or a zero predecessor.
    pub ratio: Option<f64>,
    pub flagged: bool,
}

/// Truncation errors of the Neumann series with the quantities entering their bound.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationStudy {
    pub rows: Vec<TruncationRow>,
    /// `max(1, ‖R⁰‖_{𝔙*→𝔙})`.
    pub c2: f64,
    pub l_norm: f64,
    pub lr0_norm: f64,
}

impl TruncationStudy {
    /// Rows whose ratio is within `rel` of `‖L R⁰‖`, for `N ≥ n_min`.
    pub fn geometric_within(&self, n_min: usize, rel: f64) -> bool {
        self.rows
            .iter()
            .filter(|r| r.n >= n_min)
            .all(|r| r.ratio.is_some_and(|q| (q - self.lr0_norm).abs() <= rel * self.lr0_norm))
    }

    pub fn bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.error <= r.bound * (1.0 + 1e-8))
    }
}

/// `‖R^ε − R_N‖` for `N = 0..=n_max` against `c₂^{N+2}‖L‖_𝔐^{N+1}`.
pub fn truncation_study<T: Real>(ctx: &ResolventContext<T>, n_max: usize, opts: &IterOptions) -> Result<TruncationStudy> {
    let c2 = ctx.r0_norm(opts)?.value.max(1.0);
    let l_norm = ctx.l_norm(opts)?.value;
    let lr0_norm = ctx.lr0_norm(opts)?.value;
    if lr0_norm >= 1.0 {
        log::warn!("|L R0| = {lr0_norm:.4} >= 1: the Neumann series need not converge");
    }
    let mut rows: Vec<TruncationRow> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let e = ctx.truncation_error(n, opts)?;
        let ratio = rows
            .last()
            .and_then(|p| (p.error > 0.0).then(|| e.value / p.error));
        rows.push(TruncationRow {
            n,
            error: e.value,
            bound: c2.powi(n as i32 + 2) * l_norm.powi(n as i32 + 1),
            ratio,
            flagged: e.flagged,
        });
    }
    Ok(TruncationStudy {
        rows,
        c2,
        l_norm,
        lr0_norm,
    })
}

/// Elements per ε: `N = ceil(factor·(b−a)/s)` for the family's finest scale `s`, capped by `max_dof`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshRule {
    pub factor: f64,
    pub max_dof: usize,
    /// Fixed element count overriding the rule.
    pub fixed: Option<usize>,
}

impl Default for MeshRule {
    fn default() -> Self {
        Self {
            factor: 16.0,
            max_dof: 8192,
            fixed: None,
        }
    }
}

impl MeshRule {
    pub fn elements<T: Real>(&self, a: T, b: T, scale: T, ncomp: usize) -> usize {
        match self.fixed {
            Some(n) => n,
            None => mesh_elements_for(a, b, scale, ncomp, lit(self.factor), self.max_dof),
        }
    }
}

/// Base operator and the perturbation matrices `X⁰`, `X^ε` on the mesh chosen for `eps`.
pub fn assemble_at<T: Real>(
    spec: &OperatorSpec<T>,
    family: &PerturbationFamily<T>,
    eps: T,
    rule: &MeshRule,
) -> Result<(DiscreteOperator<T>, BandMatrix<T>, BandMatrix<T>)> {
    if family.dim() != 1 {
        return Err(Error::Dimension(format!(
            "resolvent studies are one-dimensional; family has d = {}",
            family.dim()
        )));
    }
    if family.ncomp() != spec.ncomp {
        return Err(Error::Dimension(format!(
            "family has n = {} but the operator has n = {}",
            family.ncomp(),
            spec.ncomp
        )));
    }
    let dom = family.domain();
    let tol = lit::<T>(1e-12);
    if (dom.lo[0] - spec.a).abs() > tol || (dom.hi[0] - spec.b).abs() > tol {
        return Err(Error::InvalidArgument("family domain and operator interval differ".into()));
    }
    let finest = family.finest_scale(eps);
    let n = rule.elements(spec.a, spec.b, finest.min(eps), spec.ncomp);
    let mesh = build_mesh(spec.a, spec.b, n)?;
    let refine = element_refine(mesh.h(), finest);
    let op = assemble_base(spec, &mesh, refine)?;
    let x0 = op.perturbation(family.limit())?;
    let xe = op.perturbation(&family.at(eps)?)?;
    Ok((op, x0, xe))
}

/// One ε of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow<T> {
    pub eps: T,
    pub dof: usize,
    pub kappa: NormReport,
    /// `‖𝓛^ε‖_𝔐`.
    pub l_norm: NormReport,
    pub lr0_norm: f64,
    /// ρ₁/ρ₃ at the optimized η.
    pub criterion: Option<CriterionReport<T>>,
    /// The family's predicted rate.
    pub rate: T,
    pub identity_defect: T,
}

/// Rows of a norm-resolvent convergence study sharing one shift λ.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy<T> {
    pub lambda: f64,
    pub coercivity: Option<CoercivityReport>,
    pub rows: Vec<ConvergenceRow<T>>,
}

impl<T: Real> ConvergenceStudy<T> {
    pub fn kappa_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].kappa.value < w[0].kappa.value)
    }

    pub fn l_norm_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l_norm.value < w[0].l_norm.value)
    }
}

/// Controls for [`convergence_study`].
#[derive(Clone, Debug)]
pub struct ConvergenceOptions {
    pub mesh: MeshRule,
    /// Fixed shift; `None` runs `find_lambda` over the schedule and subtracts 1.
    pub lambda: Option<f64>,
    pub iter: IterOptions,
    /// Criterion statistics per row; `None` skips them.
    pub criterion: Option<CriterionOptions>,
    /// Random right-hand sides for the resolvent identity check.
    pub identity_samples: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            mesh: MeshRule::default(),
            lambda: None,
            iter: IterOptions::default(),
            criterion: Some(CriterionOptions::default()),
            identity_samples: 20,
        }
    }
}

fn objective_for(c: Component) -> Objective {
    match c {
        Component::P(_) => Objective::M10,
        _ => Objective::M1m1,
    }
}

/// Shift used by a study: the given λ, or `find_lambda` over all scheduled operators minus 1.
pub fn study_lambda<T: Real>(
    spec: &OperatorSpec<T>,
    family: &PerturbationFamily<T>,
    schedule: &[T],
    opts: &ConvergenceOptions,
) -> Result<(f64, Option<CoercivityReport>)> {
    if let Some(l) = opts.lambda {
        return Ok((l, None));
    }
    let one = C::new(T::one(), T::zero());
    let assembled: Vec<(DiscreteOperator<T>, BandMatrix<T>, BandMatrix<T>)> = schedule
        .par_iter()
        .map(|&e| {
            let (op, x0, xe) = assemble_at(spec, family, e, &opts.mesh)?;
            let a0 = op.base.add_scaled(one, &x0)?;
            let ae = op.base.add_scaled(one, &xe)?;
            Ok((op, a0, ae))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(2 * assembled.len());
    for (op, a0, ae) in &assembled {
        pairs.push((op, a0));
        pairs.push((op, ae));
    }
    let rep = find_lambda(&pairs, &opts.iter)?;
    Ok((rep.lambda0 - 1.0, Some(rep)))
}

/// κ(ε), ‖𝓛^ε‖_𝔐 and the criterion statistics along a schedule, one shared λ.
pub fn convergence_study<T: Real>(
    spec: &OperatorSpec<T>,
    family: &PerturbationFamily<T>,
    schedule: &[T],
    opts: &ConvergenceOptions,
) -> Result<ConvergenceStudy<T>> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty eps schedule".into()));
    }
    let (lambda, coercivity) = study_lambda(spec, family, schedule, opts)?;
    let rows = schedule
        .par_iter()
        .map(|&eps| convergence_row(spec, family, eps, lambda, opts).map_err(|e| e.at_eps(to_f64(eps))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy {
        lambda,
        coercivity,
        rows,
    })
}

fn convergence_row<T: Real>(
    spec: &OperatorSpec<T>,
    family: &PerturbationFamily<T>,
    eps: T,
    lambda: f64,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceRow<T>> {
    let (op, x0, xe) = assemble_at(spec, family, eps, &opts.mesh)?;
    let ctx = ResolventContext::new(op, &x0, &xe, lit(lambda))?;
    let kappa = ctx.kappa(&opts.iter)?;
    let l_norm = ctx.l_norm(&opts.iter)?;
    let lr0_norm = ctx.lr0_norm(&opts.iter)?.value;
    let identity_defect = ctx.resolvent_identity_defect(opts.identity_samples, 0x1de7)?;
    let criterion = match &opts.criterion {
        Some(c) => Some(optimize_eta(family, eps, None, objective_for(c.component), c)?.0),
        None => None,
    };
    Ok(ConvergenceRow {
        eps,
        dof: ctx.dof(),
        kappa,
        l_norm,
        lr0_norm,
        criterion,
        rate: family.rate(eps),
        identity_defect,
    })
}

/// Relative slack on the calibrated `L₂ → W₂¹` bound at finer ε.
pub const THEOREM6_SLACK: f64 = 0.1;

/// One ε of the `L₂ → W₂¹` check.
#[derive(Clone, Debug, PartialEq)]
pub struct Theorem6Row<T> {
    pub eps: T,
    /// `‖R^ε − R⁰‖_{L₂→W₂¹}`.
    pub lhs: f64,
    /// `‖V^ε−V⁰‖_{𝔐₁,₋₁} + ‖Q^ε−Q⁰‖_{𝔐₁,₋₁} + ‖P^ε−P⁰‖_{𝔐₁,₀}`.
    pub rhs: f64,
}

/// Table of the `L₂ → W₂¹` resolvent difference against its bound, with the constant
/// `C = lhs/rhs` calibrated at the first (coarsest) ε.
#[derive(Clone, Debug)]
pub struct Theorem6Check<T> {
    pub lambda: f64,
    pub rows: Vec<Theorem6Row<T>>,
    pub constant: f64,
}

impl<T: Real> Theorem6Check<T> {
    /// `lhs ≤ C·rhs` with relative slack `rel` at every ε.
    pub fn dominated(&self, rel: f64) -> bool {
        self.rows.iter().all(|r| r.lhs <= self.constant * r.rhs * (1.0 + rel) + 1e-12)
    }
}

/// `‖R^ε − R⁰‖_{L₂→W₂¹}` against the multiplier-norm bound, `𝔐₂,₀` replaced by `𝔐₁,₀`.
///
/// Expects smooth base coefficients so that the discrete limit operator is `H²`-regular.
pub fn theorem6_check<T: Real>(
    spec: &OperatorSpec<T>,
    family: &PerturbationFamily<T>,
    schedule: &[T],
    opts: &ConvergenceOptions,
) -> Result<Theorem6Check<T>> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty eps schedule".into()));
    }
    let (lambda, _) = study_lambda(spec, family, schedule, opts)?;
    let rows = schedule
        .par_iter()
        .map(|&eps| {
            let (op, x0, xe) = assemble_at(spec, family, eps, &opts.mesh)?;
            let dev = family.deviation(eps)?;
            let rhs = norm_m1m1(&dev.v, &op, &opts.iter)?.value
                + norm_m1m1(&dev.q[0], &op, &opts.iter)?.value
                + norm_m10(&dev.p[0], &op, &opts.iter)?.value;
            let ctx = ResolventContext::new(op, &x0, &xe, lit(lambda))?;
            let lhs = ctx.l2_to_h1_difference(&opts.iter)?.value;
            Ok(Theorem6Row { eps, lhs, rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    let first = &rows[0];
    let constant = if first.rhs > 0.0 { first.lhs / first.rhs } else { 0.0 };
    Ok(Theorem6Check {
        lambda,
        rows,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_regular, FieldTriple};
    use crate::fem::Boundary;
    use crate::field::{BoxDomain, CoefficientField};

    fn sine_family() -> PerturbationFamily<f64> {
        make_regular(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |eps: f64| CoefficientField::real_scalar(1, 1, 1.0, move |x| (x[0] / eps).sin()),
            CoefficientField::zero(1, 1),
            |e: f64| e.sqrt(),
        )
        .unwrap()
    }

    fn context(eps: f64, lambda: f64) -> ResolventContext<f64> {
        let spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
        let (op, x0, xe) = assemble_at(&spec, &sine_family(), eps, &MeshRule::default()).unwrap();
        ResolventContext::new(op, &x0, &xe, lambda).unwrap()
    }

    #[test]
    fn zero_rhs_and_gram_solve() {
        let ctx = context(0.1, -1.0);
        let z = vec![C::new(0.0, 0.0); ctx.dof()];
        assert!(norm2(&ctx.solve(Which::Eps, &z).unwrap()) == 0.0);
        // With X⁰ = 0 and λ = −1, G⁰ is the W₂¹ Gram matrix.
        let w = random_vector::<f64>(ctx.dof(), 3);
        let u = ctx.solve(Which::Zero, &ctx.op.gram.matvec(&w)).unwrap();
        assert!(norm2(&sub(&u, &w)) < 1e-10 * norm2(&w));
        assert!(ctx.identity_defect() < 1e-12);
    }

    #[test]
    fn neumann_zeroth_term_and_recursion() {
        let ctx = context(0.05, -2.0);
        let f = random_vector::<f64>(ctx.dof(), 9);
        let r0 = ctx.solve(Which::Zero, &f).unwrap();
        assert!(norm2(&sub(&ctx.neumann_sum(0, &f), &r0)) <= 1e-12 * norm2(&r0));
        let s2 = ctx.neumann_sum(2, &f);
        let s3 = ctx.neumann_sum(3, &f);
        let step = ctx.solve(Which::Zero, &sub(&f, &ctx.l.matvec(&s2))).unwrap();
        assert!(norm2(&sub(&s3, &step)) <= 1e-12 * norm2(&s3));
    }

    #[test]
    fn resolvent_identity_holds() {
        let ctx = context(0.05, -2.0);
        assert!(ctx.resolvent_identity_defect(20, 1).unwrap() <= 1e-10);
    }

    #[test]
    fn identical_family_has_zero_kappa() {
        let spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
        let fam = make_regular(
            BoxDomain::interval(0.0, 1.0).unwrap(),
            |_e: f64| CoefficientField::real_scalar(1, 1, 1.0, |x| x[0]),
            CoefficientField::real_scalar(1, 1, 1.0, |x| x[0]),
            |_| 0.0,
        )
        .unwrap();
        let (op, x0, xe) = assemble_at(&spec, &fam, 0.1, &MeshRule::default()).unwrap();
        let ctx = ResolventContext::new(op, &x0, &xe, -1.0).unwrap();
        assert_eq!(ctx.kappa(&IterOptions::default()).unwrap().value, 0.0);
        let t = truncation_study(&ctx, 3, &IterOptions::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.error == 0.0));
    }

    #[test]
    fn truncation_errors_decrease_for_sine() {
        let ctx = context(0.05, -2.0);
        let t = truncation_study(&ctx, 4, &IterOptions::default()).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].error < w[0].error);
        }
        assert!(t.bound_holds());
        assert!(t.lr0_norm < 1.0);
    }

    #[test]
    fn kappa_shrinks_for_sine() {
        let spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
        let study = convergence_study(
            &spec,
            &sine_family(),
            &[0.1, 0.025],
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert_eq!(study.lambda, -2.0);
        assert!(study.kappa_decreasing());
        assert!(study.l_norm_decreasing());
        for r in &study.rows {
            assert!(r.identity_defect <= 1e-10);
            let c = r.criterion.as_ref().unwrap();
            assert!(c.rho1 >= 0.0);
        }
    }

    #[test]
    fn theorem6_with_decaying_p() {
        let spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let fam = PerturbationFamily::new("p", dom, FieldTriple::zero(1, 1), |eps: f64| {
            let mut t = FieldTriple::zero(1, 1);
            t.p[0] = CoefficientField::real_scalar(1, 1, eps, move |x| eps * (x[0] / eps).sin());
            Ok(t)
        })
        .unwrap();
        let chk = theorem6_check(&spec, &fam, &[0.1, 0.05, 0.025], &ConvergenceOptions::default()).unwrap();
        for w in chk.rows.windows(2) {
            assert!(w[1].lhs < w[0].lhs);
        }
        assert!(chk.dominated(THEOREM6_SLACK));
    }
}
