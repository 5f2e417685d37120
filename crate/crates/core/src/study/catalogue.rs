//! Built-in families and base operators addressed by configuration.

use super::config::{BoundaryConfig, FamilyConfig, FamilyKind, OperatorConfig};
use crate::error::{Error, Result};
use crate::families::{
    lattice_centers, make_almost_periodic, make_fractal, make_locally_periodic, make_modulated, make_random,
    make_regular, make_sparse, make_stabilizing, ErgodicSystem, FieldTriple, Observable, PerturbationFamily, PhiKind, ScalarTrig,
};
use crate::fem::{Boundary, OperatorSpec};
use crate::field::{BoxDomain, CoefficientField};
use crate::scalar::CMat;
use num_complex::Complex;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// The base operator `−(a₁₁u′)′ + a₀u` with the configured boundary condition.
pub fn build_operator(c: &OperatorConfig) -> Result<OperatorSpec<f64>> {
    let n = c.ncomp;
    let scalar = |v: f64| CoefficientField::constant(1, CMat::scalar(n, Complex::new(v, 0.0)));
    let bc = match c.boundary {
        BoundaryConfig::Dirichlet => Boundary::Dirichlet,
        BoundaryConfig::Robin { ka, kb } => Boundary::Robin {
            ka: CMat::scalar(n, Complex::new(ka, 0.0)),
            kb: CMat::scalar(n, Complex::new(kb, 0.0)),
        },
    };
    let spec = OperatorSpec {
        a: c.a,
        b: c.b,
        ncomp: n,
        a11: scalar(c.a11),
        aplus: CoefficientField::zero(1, n),
        aminus: CoefficientField::zero(1, n),
        a0: scalar(c.a0),
        bc,
        c1: c.a11,
    };
    spec.validate(64, 0)?;
    Ok(spec)
}

fn max_abs_coord(domain: &BoxDomain<f64>) -> f64 {
    domain
        .lo
        .iter()
        .chain(&domain.hi)
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Builds the configured family on its domain (the operator interval unless overridden).
///
/// Presets whose torus mean is known in closed form carry it as the limit, which keeps
/// criterion integrands free of nested torus quadrature.
pub fn build_family(c: &FamilyConfig, op: &OperatorConfig, seed: u64) -> Result<PerturbationFamily<f64>> {
    let fam = build_raw(c, op, seed)?;
    let (d, n) = (fam.dim(), fam.ncomp());
    let exact = match &c.kind {
        FamilyKind::LocallyPeriodic { .. } => Some(CoefficientField::real_scalar(d, n, max_abs_coord(fam.domain()), |x| x[0])),
        FamilyKind::Modulated { .. } | FamilyKind::Fractal => Some(CoefficientField::zero(d, n)),
        _ => None,
    };
    match exact {
        Some(v) => fam.with_limit(FieldTriple::from_v(v).moved_to(c.slot)?),
        None => Ok(fam),
    }
}

fn build_raw(c: &FamilyConfig, op: &OperatorConfig, seed: u64) -> Result<PerturbationFamily<f64>> {
    let domain = match &c.domain {
        Some(d) => d.clone(),
        None => BoxDomain::interval(op.a, op.b)?,
    };
    let d = domain.dim();
    let n = op.ncomp;
    let xmax = max_abs_coord(&domain);
    let sqrt = |e: f64| e.sqrt();
    let fam = match &c.kind {
        FamilyKind::Sine { amplitude } => {
            let a = *amplitude;
            make_regular(
                domain,
                move |e| CoefficientField::real_scalar(d, n, a.abs(), move |x| a * (x[0] / e).sin()),
                CoefficientField::zero(d, n),
                move |e| 2.0 * a.abs() * sqrt(e),
            )?
            .with_name("sine")
        }
        FamilyKind::SignControl { declared_limit } => {
            let v0 = *declared_limit;
            make_regular(
                domain,
                move |e| CoefficientField::real_scalar(d, n, 1.0, move |x| sign((x[0] / e).sin())),
                CoefficientField::real_scalar(d, n, v0.abs(), move |_| v0),
                sqrt,
            )?
            .with_name("sign_control")
            .with_param("declared_limit", v0)
        }
        FamilyKind::TwoScale => make_regular(
            domain,
            move |e| {
                CoefficientField::real_scalar(d, n, 2.0 * xmax, move |x| x[0] * (1.0 + (TAU * x[0] / e).cos()))
            },
            CoefficientField::real_scalar(d, n, xmax, |x| x[0]),
            sqrt,
        )?
        .with_name("two_scale"),
        FamilyKind::Regular { amplitude } => {
            let a = *amplitude;
            make_regular(
                domain,
                move |e| {
                    CoefficientField::real_scalar(d, n, 1.0 + a.abs() * e * xmax * xmax, move |x| {
                        (TAU * x[0]).sin() + a * e * x[0] * x[0]
                    })
                },
                CoefficientField::real_scalar(d, n, 1.0, |x| (TAU * x[0]).sin()),
                move |e| a.abs() * e * xmax * xmax,
            )?
            .with_finest_scale(|_| 0.25)
            .with_name("regular")
        }
        FamilyKind::Sparse {
            rho4_power,
            rho5_power,
            amplitude,
        } => {
            let (p4, p5, a) = (*rho4_power, *rho5_power, *amplitude);
            let dom = domain.clone();
            let bump = CoefficientField::real_scalar(d, n, a.abs(), move |t| {
                let r2: f64 = t.iter().map(|v| v * v).sum();
                a * (1.0 - r2).max(0.0)
            });
            make_sparse(
                domain,
                move |e| lattice_centers(&dom, e.powf(p4), 0.5),
                move |e| e.powf(p4),
                move |e| e.powf(p5),
                bump,
            )?
            .with_param("rho4_power", p4)
            .with_param("rho5_power", p5)
        }
        FamilyKind::Stabilizing { amplitude } => {
            let a = *amplitude;
            make_stabilizing(
                domain,
                move |x: &[f64], xi: &[f64]| {
                    let r2: f64 = xi.iter().map(|v| v * v).sum();
                    CMat::scalar(n, Complex::new((PI * x[0]).cos() + a / (1.0 + r2), 0.0))
                },
                (1.0 + a.abs()) * n as f64,
                CoefficientField::real_scalar(d, n, 1.0, |x| (PI * x[0]).cos()),
                move |e: f64| a.abs() * e.powf(2.0 / 3.0),
            )?
        }
        FamilyKind::LocallyPeriodic { powers } => {
            let m = powers.len();
            let profile = move |x: &[f64], xi: &[f64]| {
                let s: f64 = (0..m).map(|j| (TAU * xi[j * d]).cos()).sum();
                CMat::scalar(n, Complex::new(x[0] + (1.0 + x[0]) * s / m as f64, 0.0))
            };
            make_locally_periodic(
                domain,
                profile,
                (1.0 + 2.0 * xmax) * n as f64,
                vec![vec![1.0; d]; m],
                powers.clone(),
                |r: f64| 2.0 * r,
            )?
        }
        FamilyKind::AlmostPeriodic { frequencies, mean } => {
            let axis = |w: f64| {
                let mut v = vec![0.0; d];
                v[0] = w;
                v
            };
            let mut trig = ScalarTrig::constant(d, *mean);
            for w in frequencies {
                trig = trig.add(&ScalarTrig::cos(axis(*w)));
            }
            make_almost_periodic(domain, trig.to_terms(n), |_r: f64| 0.0)?
        }
        FamilyKind::Modulated { periodic_phi, strength } => {
            let s = *strength;
            let profile = move |x: &[f64], xi: &[f64]| CMat::scalar(n, Complex::new((1.0 + x[0]) * (TAU * xi[0]).cos(), 0.0));
            let sup = (1.0 + xmax) * n as f64;
            if *periodic_phi {
                let p0: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r: f64| s.abs() * (4.0 * r).min(1.0));
                make_modulated(
                    domain,
                    profile,
                    sup,
                    vec![1.0; d],
                    move |x: &[f64]| x.iter().map(|v| s * (TAU * v).sin() / TAU).collect(),
                    PhiKind::Periodic { p0 },
                    |r: f64| r,
                )?
            } else {
                make_modulated(
                    domain,
                    profile,
                    sup,
                    vec![1.0; d],
                    move |x: &[f64]| x.iter().map(|v| v + s * (TAU * v).sin() / TAU).collect(),
                    PhiKind::Diffeomorphism,
                    |r: f64| r,
                )?
            }
            .with_param("strength", s)
        }
        FamilyKind::Fractal => {
            if d != 2 {
                return Err(Error::config("family.domain", "the fractal family needs a 2D domain"));
            }
            make_fractal(
                domain,
                move |_x: &[f64], xi: &[f64]| {
                    CMat::scalar(n, Complex::new((TAU * xi[0]).cos() + (TAU * xi[1]).cos(), 0.0))
                },
                2.0 * n as f64,
                vec![1.0, 1.0],
                |_r: f64| 0.0,
            )?
        }
        FamilyKind::Random { flow, realization } => {
            let k = flow.len();
            let rows: Vec<Vec<f64>> = flow.iter().map(|f| vec![*f; d]).collect();
            let coeff = CoefficientField::constant(d, CMat::scalar(n, Complex::new(0.5 / k as f64, 0.0)));
            let mut terms = Vec::with_capacity(2 * k);
            for i in 0..k {
                for s in [1i64, -1] {
                    let mut m = vec![0i64; k];
                    m[i] = s;
                    terms.push((m, coeff.clone()));
                }
            }
            let sys = ErgodicSystem::new(rows, Observable::Trig(terms), seed)?;
            make_random(domain, sys, *realization, |_r: f64| 0.0, None)?
        }
    };
    fam.in_slot(c.slot)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Component;
    use crate::study::config::StudyConfig;

    fn config(family: &str) -> StudyConfig {
        StudyConfig::parse(&format!(
            "[family]\n{family}\n[schedule]\nstart = 0.1\nfactor = 0.5\ncount = 3\n"
        ))
        .unwrap()
    }

    #[test]
    fn every_kind_builds() {
        for kind in FamilyKind::NAMES {
            let extra = if kind == "fractal" { "\ndomain = [0.5, 1.5, 0.5, 1.5]" } else { "" };
            let c = config(&format!("kind = \"{kind}\"{extra}"));
            let f = build_family(&c.family, &c.operator, 3).unwrap();
            let t = f.at(0.05).unwrap();
            let x = vec![0.3; f.dim()];
            assert!(t.v.eval(&x).abs_sum().is_finite(), "{kind}");
        }
    }

    #[test]
    fn slot_moves_the_profile() {
        let c = config("kind = \"sine\"\nslot = \"P\"");
        let f = build_family(&c.family, &c.operator, 0).unwrap();
        let t = f.at(0.1).unwrap();
        assert_eq!(t.v.eval(&[0.3]).abs_sum(), 0.0);
        assert!((t.get(Component::P(0)).unwrap().eval(&[0.3]).get(0, 0).re - 3.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_limits_match_torus_means() {
        for (family, dims) in [
            ("kind = \"locally_periodic\"\npowers = [1.0, 2.0]", 1),
            ("kind = \"modulated\"\nphi = \"periodic\"\nstrength = 2.0", 1),
            ("kind = \"modulated\"", 1),
            ("kind = \"fractal\"\ndomain = [0.0, 1.0, 0.0, 1.0]", 2),
        ] {
            let c = config(family);
            let fast = build_family(&c.family, &c.operator, 0).unwrap();
            let slow = build_raw(&c.family, &c.operator, 0).unwrap();
            for k in 0..7 {
                let x = vec![0.05 + 0.13 * k as f64; dims];
                let diff = &fast.limit().v.eval(&x) - &slow.limit().v.eval(&x);
                assert!(diff.abs_sum() < 1e-12, "{family} at {x:?}");
            }
        }
    }

    #[test]
    fn fractal_rejects_one_dimension() {
        let c = config("kind = \"fractal\"");
        assert!(build_family(&c.family, &c.operator, 0).unwrap_err().is_config());
    }

    #[test]
    fn operator_from_config() {
        let c = StudyConfig::parse(
            "[family]\nkind = \"sine\"\n[schedule]\nvalues = [0.1, 0.05, 0.02]\n[operator]\nncomp = 2\nboundary = \"robin\"\nrobin = [1.0, 0.5]\na11 = 2.0\n",
        )
        .unwrap();
        let spec = build_operator(&c.operator).unwrap();
        assert_eq!(spec.c1, 2.0);
        assert!(matches!(spec.bc, Boundary::Robin { .. }));
    }
}
