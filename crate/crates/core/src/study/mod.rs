//! Configured studies: family sampling, criterion statistics, local means, multiplier
//! norms, resolvent convergence, Neumann truncation and the `L₂ → W₂¹` check.

pub mod catalogue;
pub mod config;
pub mod output;

pub use catalogue::{build_family, build_operator};
pub use config::{EtaPolicy, LambdaPolicy, StudyConfig};
pub use output::{emit_plot, fit_rate, render_svg, Fit, StudyReport, Value};

use crate::criteria::{criterion, local_mean_limit, optimize_eta, sample_grid, CriterionReport, Objective};
use crate::error::{Error, Result};
use crate::families::{Component, PerturbationFamily};
use crate::fem::OperatorSpec;
use crate::field::BoxDomain;
use crate::linalg::{BandMatrix, IterOptions};
use crate::norms::{norm_m10, norm_m1m1, norm_v_to_vstar};
use crate::resolvent::{
    assemble_at, study_lambda, theorem6_check, truncation_study, ConvergenceOptions, ResolventContext, THEOREM6_SLACK,
};
use num_complex::Complex;
use rayon::prelude::*;

/// The available studies, one per CLI subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Families,
    Criterion,
    Homogenize,
    Norm,
    Resolvent,
    Neumann,
    Theorem6,
}

impl StudyKind {
    pub const ALL: [StudyKind; 7] = [
        StudyKind::Families,
        StudyKind::Criterion,
        StudyKind::Homogenize,
        StudyKind::Norm,
        StudyKind::Resolvent,
        StudyKind::Neumann,
        StudyKind::Theorem6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Families => "families",
            StudyKind::Criterion => "criterion",
            StudyKind::Homogenize => "homogenize",
            StudyKind::Norm => "norm",
            StudyKind::Resolvent => "resolvent",
            StudyKind::Neumann => "neumann",
            StudyKind::Theorem6 => "theorem6",
        }
    }

    /// CSV header of the study; stable across releases.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            StudyKind::Families => &["eps", "point", "x", "y", "value_re", "value_im", "limit_re", "limit_im", "deviation", "rate"],
            StudyKind::Criterion => &[
                "eps",
                "eta",
                "rho1",
                "rho3",
                "bound_m1m1",
                "bound_m10",
                "cells",
                "refine",
                "quad_error",
                "capped",
                "argmax_gamma",
                "rate",
            ],
            StudyKind::Homogenize => &["point", "x", "y", "candidate_re", "candidate_im", "limit_re", "limit_im", "error", "bound"],
            StudyKind::Norm => &["eps", "dof", "m1m1_v", "m10_v", "m10_q", "m10_p", "x_norm", "triangle_bound"],
            StudyKind::Resolvent => &[
                "eps",
                "dof",
                "eta",
                "rho1",
                "rho3",
                "l_norm",
                "kappa",
                "lr0_norm",
                "rate",
                "identity_defect",
                "flagged",
            ],
            StudyKind::Neumann => &["eps", "n", "error", "bound", "ratio", "lr0_norm", "l_norm", "c2", "flagged"],
            StudyKind::Theorem6 => &["eps", "lhs", "rhs", "calibrated"],
        }
    }

    fn error_columns(self) -> &'static [&'static str] {
        match self {
            StudyKind::Criterion => &["rho1", "bound_m1m1"],
            StudyKind::Norm => &["m1m1_v", "x_norm"],
            StudyKind::Resolvent => &["kappa", "l_norm", "rho1"],
            StudyKind::Theorem6 => &["lhs", "rhs"],
            _ => &[],
        }
    }

    fn needs_resolvent(self) -> bool {
        matches!(
            self,
            StudyKind::Norm | StudyKind::Resolvent | StudyKind::Neumann | StudyKind::Theorem6
        )
    }
}

impl std::str::FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown study `{s}`")))
    }
}

/// Family and base operator of a configuration.
pub fn build(cfg: &StudyConfig) -> Result<(PerturbationFamily<f64>, OperatorSpec<f64>)> {
    let spec = build_operator(&cfg.operator)?;
    let family = build_family(&cfg.family, &cfg.operator, cfg.seed)?;
    Ok((family, spec))
}

/// Runs one study. Rows come out in schedule order whatever the thread count.
pub fn run(kind: StudyKind, cfg: &StudyConfig) -> Result<StudyReport> {
    let (family, spec) = build(cfg)?;
    if kind.needs_resolvent() && family.dim() != 1 {
        return Err(Error::config(
            "family.domain",
            format!("the {} study needs a one-dimensional family", kind.name()),
        ));
    }
    if kind == StudyKind::Homogenize && cfg.family.slot != Component::V {
        return Err(Error::config("family.slot", "the homogenize study reads the V slot"));
    }
    let mut report = StudyReport::new(kind.name(), &cfg.name, kind.columns());
    report.error_columns = kind.error_columns().iter().map(|s| s.to_string()).collect();
    report.comments.push(format!("family: {}", family_label(&family)));
    match kind {
        StudyKind::Families => families_rows(&family, cfg, &mut report)?,
        StudyKind::Criterion => criterion_rows(&family, cfg, &mut report)?,
        StudyKind::Homogenize => homogenize_rows(&family, cfg, &mut report)?,
        StudyKind::Norm => norm_rows(&spec, &family, cfg, &mut report)?,
        StudyKind::Resolvent => resolvent_rows(&spec, &family, cfg, &mut report)?,
        StudyKind::Neumann => neumann_rows(&spec, &family, cfg, &mut report)?,
        StudyKind::Theorem6 => theorem6_rows(&spec, &family, cfg, &mut report)?,
    }
    report.refit();
    Ok(report)
}

fn family_label(f: &PerturbationFamily<f64>) -> String {
    let mut s = f.name().to_string();
    for (k, v) in &f.meta().params {
        s.push_str(&format!(" {k}={v}"));
    }
    s
}

/// Resolvent-study options derived from a config: its mesh rule and shift policy, default iteration.
pub fn convergence_options(cfg: &StudyConfig) -> ConvergenceOptions {
    ConvergenceOptions {
        mesh: cfg.mesh.clone(),
        lambda: match cfg.lambda {
            LambdaPolicy::Auto => None,
            LambdaPolicy::Fixed(l) => Some(l),
        },
        iter: IterOptions::default(),
        criterion: None,
        identity_samples: 20,
    }
}

fn objective(slot: Component) -> Objective {
    match slot {
        Component::P(_) => Objective::M10,
        _ => Objective::M1m1,
    }
}

/// Criterion statistics at `eps` under the configured η policy.
pub fn criterion_at(family: &PerturbationFamily<f64>, cfg: &StudyConfig, eps: f64) -> Result<CriterionReport<f64>> {
    let opts = &cfg.criterion;
    match &cfg.eta {
        EtaPolicy::Optimize { grid_powers } => {
            let grid: Option<Vec<f64>> = grid_powers.as_ref().map(|p| p.iter().map(|q| eps.powf(*q)).collect());
            Ok(optimize_eta(family, eps, grid.as_deref(), objective(cfg.family.slot), opts)?.0)
        }
        EtaPolicy::Natural => criterion(family, eps, family.eta(eps), opts),
        EtaPolicy::Fixed(eta) => criterion(family, eps, *eta, opts),
    }
}

fn coords(x: &[f64]) -> (Value, Value) {
    (Value::Num(x[0]), x.get(1).map_or(Value::Text(String::new()), |v| Value::Num(*v)))
}

fn families_rows(family: &PerturbationFamily<f64>, cfg: &StudyConfig, out: &mut StudyReport) -> Result<()> {
    let d = family.dim();
    let per_axis = if d == 1 { cfg.homogenize.samples } else { cfg.homogenize.samples.min(9) };
    let points = sample_grid(family.domain(), per_axis);
    let slot = cfg.family.slot;
    let limit = family.limit().get(slot)?.clone();
    for &eps in &cfg.schedule {
        let field = family.at(eps).map_err(|e| e.at_eps(eps))?.get(slot)?.clone();
        let rate = family.rate(eps);
        for (i, x) in points.iter().enumerate() {
            let (v, l) = (field.eval(x), limit.eval(x));
            let (px, py) = coords(x);
            out.push(vec![
                Value::Num(eps),
                Value::Int(i as i64),
                px,
                py,
                Value::Num(v.get(0, 0).re),
                Value::Num(v.get(0, 0).im),
                Value::Num(l.get(0, 0).re),
                Value::Num(l.get(0, 0).im),
                Value::Num((&v - &l).abs_sum()),
                Value::Num(rate),
            ]);
        }
    }
    Ok(())
}

fn criterion_rows(family: &PerturbationFamily<f64>, cfg: &StudyConfig, out: &mut StudyReport) -> Result<()> {
    let reports = cfg
        .schedule
        .par_iter()
        .map(|&eps| criterion_at(family, cfg, eps).map_err(|e| e.at_eps(eps)))
        .collect::<Result<Vec<_>>>()?;
    for r in reports {
        if r.capped {
            out.comments.push(format!("eps {:e}: quadrature capped at refine {}", r.eps, r.refine));
        }
        out.push(vec![
            Value::Num(r.eps),
            Value::Num(r.eta),
            Value::Num(r.rho1),
            Value::Num(r.rho3),
            Value::Num(r.bound_m1m1),
            Value::Num(r.bound_m10),
            Value::Int(r.cells as i64),
            Value::Int(r.refine as i64),
            Value::Num(r.quad_error),
            Value::Int(r.capped as i64),
            Value::Text(gamma_label(&r.argmax_cell)),
            Value::Num(family.rate(r.eps)),
        ]);
    }
    Ok(())
}

fn gamma_label(g: &[i64]) -> String {
    g.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

fn homogenize_rows(family: &PerturbationFamily<f64>, cfg: &StudyConfig, out: &mut StudyReport) -> Result<()> {
    let d = family.dim();
    let p = cfg.homogenize.mu_power;
    let mu = move |e: f64| e.powf(p);
    let omega = BoxDomain::new(vec![-0.5; d], vec![0.5; d])?;
    let per_axis = if d == 1 { cfg.homogenize.samples } else { cfg.homogenize.samples.min(9) };
    let points = admissible_samples(family.domain(), 0.5 * mu(cfg.schedule[0]), per_axis)?;
    let lm = local_mean_limit(family, &cfg.schedule, &mu, &omega, Some(points), None)?;
    let limit = &family.limit().v;
    for x in &lm.skipped {
        out.comments.push(format!("skipped point {x:?}: x + mu*omega leaves the domain"));
    }
    out.comments.push(format!("rho2 = {:e}", lm.rho2));
    out.comments.push(format!("predicted = {:e}", lm.predicted));
    for (i, x) in lm.points.iter().enumerate() {
        let c = lm.means.last().map_or_else(|| lm.candidate.eval(x), |m| m[i].clone());
        let l = limit.eval(x);
        let (px, py) = coords(x);
        out.push(vec![
            Value::Int(i as i64),
            px,
            py,
            Value::Num(c.get(0, 0).re),
            Value::Num(c.get(0, 0).im),
            Value::Num(l.get(0, 0).re),
            Value::Num(l.get(0, 0).im),
            Value::Num((&c - &l).abs_sum()),
            Value::Num(lm.predicted),
        ]);
    }
    out.abscissa = "x".into();
    Ok(())
}

/// `n` equispaced points per axis inside `domain` shrunk by `margin` on every side.
pub fn admissible_samples(domain: &BoxDomain<f64>, margin: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    let lo: Vec<f64> = domain.lo.iter().map(|a| a + margin).collect();
    let hi: Vec<f64> = domain.hi.iter().map(|b| b - margin).collect();
    let inner = BoxDomain::new(lo, hi)
        .map_err(|_| Error::config("homogenize.mu_power", "the local-mean window covers the whole domain"))?;
    Ok(sample_grid(&inner, n))
}

fn norm_rows(
    spec: &OperatorSpec<f64>,
    family: &PerturbationFamily<f64>,
    cfg: &StudyConfig,
    out: &mut StudyReport,
) -> Result<()> {
    let iter = IterOptions::default();
    let rows = cfg
        .schedule
        .par_iter()
        .map(|&eps| -> Result<Vec<Value>> {
            let (op, x0, xe) = assemble_at(spec, family, eps, &cfg.mesh)?;
            let dev = family.deviation(eps)?;
            let m1m1_v = norm_m1m1(&dev.v, &op, &iter)?.value;
            let m10_v = norm_m10(&dev.v, &op, &iter)?.value;
            let m10_q = norm_m10(&dev.q[0], &op, &iter)?.value;
            let m10_p = norm_m10(&dev.p[0], &op, &iter)?.value;
            let diff: BandMatrix<f64> = xe.add_scaled(Complex::new(-1.0, 0.0), &x0)?;
            let x_norm = norm_v_to_vstar(&diff, &op, &iter)?.value;
            Ok(vec![
                Value::Num(eps),
                Value::Int(op.dof() as i64),
                Value::Num(m1m1_v),
                Value::Num(m10_v),
                Value::Num(m10_q),
                Value::Num(m10_p),
                Value::Num(x_norm),
                Value::Num(m1m1_v + (spec.ncomp as f64).sqrt() * m10_q + m10_p),
            ])
        })
        .collect::<Vec<_>>();
    for (r, &eps) in rows.into_iter().zip(&cfg.schedule) {
        out.push(r.map_err(|e| e.at_eps(eps))?);
    }
    Ok(())
}

fn resolvent_rows(
    spec: &OperatorSpec<f64>,
    family: &PerturbationFamily<f64>,
    cfg: &StudyConfig,
    out: &mut StudyReport,
) -> Result<()> {
    let opts = convergence_options(cfg);
    let (lambda, coercivity) = study_lambda(spec, family, &cfg.schedule, &opts)?;
    out.comments.push(format!("lambda = {lambda:e}"));
    if let Some(c) = coercivity {
        out.comments.push(format!("coercivity c4 = {:e} after {} doublings", c.c4, c.doublings));
    }
    let rows = cfg
        .schedule
        .par_iter()
        .map(|&eps| {
            (|| -> Result<Vec<Value>> {
                let (op, x0, xe) = assemble_at(spec, family, eps, &opts.mesh)?;
                let ctx = ResolventContext::new(op, &x0, &xe, lambda)?;
                let kappa = ctx.kappa(&opts.iter)?;
                let l_norm = ctx.l_norm(&opts.iter)?;
                let lr0 = ctx.lr0_norm(&opts.iter)?;
                let defect = ctx.resolvent_identity_defect(opts.identity_samples, cfg.seed ^ 0x1de7)?;
                let crit = criterion_at(family, cfg, eps)?;
                Ok(vec![
                    Value::Num(eps),
                    Value::Int(ctx.dof() as i64),
                    Value::Num(crit.eta),
                    Value::Num(crit.rho1),
                    Value::Num(crit.rho3),
                    Value::Num(l_norm.value),
                    Value::Num(kappa.value),
                    Value::Num(lr0.value),
                    Value::Num(family.rate(eps)),
                    Value::Num(defect),
                    Value::Int((kappa.flagged || l_norm.flagged || lr0.flagged) as i64),
                ])
            })()
            .map_err(|e| e.at_eps(eps))
        })
        .collect::<Result<Vec<_>>>()?;
    for r in rows {
        out.push(r);
    }
    Ok(())
}

fn neumann_rows(
    spec: &OperatorSpec<f64>,
    family: &PerturbationFamily<f64>,
    cfg: &StudyConfig,
    out: &mut StudyReport,
) -> Result<()> {
    let opts = convergence_options(cfg);
    let eps_list = cfg.neumann.eps.clone().unwrap_or_else(|| cfg.schedule.clone());
    let (lambda, _) = study_lambda(spec, family, &eps_list, &opts)?;
    out.comments.push(format!("lambda = {lambda:e}"));
    let studies = eps_list
        .par_iter()
        .map(|&eps| {
            (|| {
                let (op, x0, xe) = assemble_at(spec, family, eps, &opts.mesh)?;
                let ctx = ResolventContext::new(op, &x0, &xe, lambda)?;
                truncation_study(&ctx, cfg.neumann.n_max, &opts.iter)
            })()
            .map_err(|e| e.at_eps(eps))
        })
        .collect::<Result<Vec<_>>>()?;
    for (s, &eps) in studies.iter().zip(&eps_list) {
        if s.lr0_norm >= 1.0 {
            out.comments.push(format!("eps {eps:e}: |L R0| = {:e} >= 1, series need not converge", s.lr0_norm));
        }
        for r in &s.rows {
            out.push(vec![
                Value::Num(eps),
                Value::Int(r.n as i64),
                Value::Num(r.error),
                Value::Num(r.bound),
                r.ratio.map_or(Value::Text(String::new()), Value::Num),
                Value::Num(s.lr0_norm),
                Value::Num(s.l_norm),
                Value::Num(s.c2),
                Value::Int(r.flagged as i64),
            ]);
        }
    }
    out.abscissa = "n".into();
    Ok(())
}

fn theorem6_rows(
    spec: &OperatorSpec<f64>,
    family: &PerturbationFamily<f64>,
    cfg: &StudyConfig,
    out: &mut StudyReport,
) -> Result<()> {
    let opts = convergence_options(cfg);
    let check = theorem6_check(spec, family, &cfg.schedule, &opts)?;
    out.comments.push(format!("lambda = {:e}", check.lambda));
    out.comments.push(format!("constant = {:e}", check.constant));
    out.comments.push(format!(
        "dominated with slack {THEOREM6_SLACK}: {}",
        check.dominated(THEOREM6_SLACK)
    ));
    for r in &check.rows {
        out.push(vec![
            Value::Num(r.eps),
            Value::Num(r.lhs),
            Value::Num(r.rhs),
            Value::Num(check.constant * r.rhs),
        ]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> StudyConfig {
        StudyConfig::parse(&format!(
            "name = \"t\"\n[family]\nkind = \"sine\"\n{extra}\n[schedule]\nstart = 0.1\nfactor = 0.5\ncount = 3\n[mesh]\nmax_dof = 400\n"
        ))
        .unwrap()
    }

    #[test]
    fn kinds_parse_by_name() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
        }
        assert!("nope".parse::<StudyKind>().is_err());
    }

    #[test]
    fn criterion_study_rows_and_fit() {
        let r = run(StudyKind::Criterion, &cfg("")).unwrap();
        assert_eq!(r.rows.len(), 3);
        let rho1 = r.column("rho1").unwrap();
        assert!(rho1.windows(2).all(|w| w[1] < w[0]));
        assert!(r.fit("rho1").is_some());
    }

    #[test]
    fn zero_amplitude_skips_fits() {
        let r = run(StudyKind::Criterion, &cfg("amplitude = 0.0")).unwrap();
        assert!(r.column("rho1").unwrap().iter().all(|v| *v == 0.0));
        assert!(r.fit("rho1").is_none());
        assert!(r.comments.iter().any(|c| c.starts_with("fit rho1: skipped")));
    }

    #[test]
    fn resolvent_needs_one_dimension() {
        let c = StudyConfig::parse(
            "[family]\nkind = \"fractal\"\ndomain = [0.5, 1.5, 0.5, 1.5]\n[schedule]\nvalues = [0.2, 0.1, 0.05]\n",
        )
        .unwrap();
        assert!(run(StudyKind::Resolvent, &c).unwrap_err().is_config());
    }

    #[test]
    fn norm_rows_respect_triangle() {
        let r = run(StudyKind::Norm, &cfg("")).unwrap();
        let x = r.column("x_norm").unwrap();
        let t = r.column("triangle_bound").unwrap();
        assert!(x.iter().zip(&t).all(|(a, b)| *a <= b * (1.0 + 1e-8)));
    }
}
