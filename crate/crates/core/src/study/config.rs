//! Study configuration: TOML with dotted sections, validated key by key.

use crate::criteria::CriterionOptions;
use crate::error::{Error, Result};
use crate::families::Component;
use crate::field::BoxDomain;
use crate::resolvent::MeshRule;
use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;
use toml::{Table, Value};

/// A family from the built-in catalogue with its numeric parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    /// `a·sin(x/ε)`, limit 0.
    Sine { amplitude: f64 },
    /// `sign(sin(x/ε))` against a declared (deliberately wrong) constant limit.
    SignControl { declared_limit: f64 },
    /// `x(1 + cos(2πx/ε))`, limit `x`.
    TwoScale,
    /// `sin(2πx) + a·ε·x²`, limit `sin(2πx)`.
    Regular { amplitude: f64 },
    /// Bumps `a(1 − |t|²)₊` of radius `ρ₄ρ₅` at spacing `ρ₄ = ε^{p₄}`, `ρ₅ = ε^{p₅}`.
    Sparse {
        rho4_power: f64,
        rho5_power: f64,
        amplitude: f64,
    },
    /// `cos(πx) + a/(1 + |x/ε|²)`, limit `cos(πx)`.
    Stabilizing { amplitude: f64 },
    /// `x + (1+x)/m · Σ_j cos(2πx/ε^{p_j})`, limit `x`.
    LocallyPeriodic { powers: Vec<f64> },
    /// `c + Σ_k cos(ω_k x/ε)`, limit `c`.
    AlmostPeriodic { frequencies: Vec<f64>, mean: f64 },
    /// `(1+x)cos(2πφ(x)/ε)` for a diffeomorphic or periodic `φ`, limit 0.
    Modulated { periodic_phi: bool, strength: f64 },
    /// `cos(2πξ₁)cos(2πξ₂)` with `ξ = (x₁/ε, x₁x₂/ε²)`, limit 0; criterion studies only.
    Fractal,
    /// `cos(2πϖ₁) + … ` along the flow `ϖ + F x/ε`, limit 0.
    Random { flow: Vec<f64>, realization: u64 },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Sine { .. } => "sine",
            FamilyKind::SignControl { .. } => "sign_control",
            FamilyKind::TwoScale => "two_scale",
            FamilyKind::Regular { .. } => "regular",
            FamilyKind::Sparse { .. } => "sparse",
            FamilyKind::Stabilizing { .. } => "stabilizing",
            FamilyKind::LocallyPeriodic { .. } => "locally_periodic",
            FamilyKind::AlmostPeriodic { .. } => "almost_periodic",
            FamilyKind::Modulated { .. } => "modulated",
            FamilyKind::Fractal => "fractal",
            FamilyKind::Random { .. } => "random",
        }
    }

    /// Names accepted in `family.kind`.
    pub const NAMES: [&'static str; 11] = [
        "sine",
        "sign_control",
        "two_scale",
        "regular",
        "sparse",
        "stabilizing",
        "locally_periodic",
        "almost_periodic",
        "modulated",
        "fractal",
        "random",
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    pub slot: Component,
    /// Defaults to the operator interval.
    pub domain: Option<BoxDomain<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryConfig {
    Dirichlet,
    /// Scalar multiples of the identity at the two endpoints.
    Robin { ka: f64, kb: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorConfig {
    pub a: f64,
    pub b: f64,
    pub ncomp: usize,
    /// `A₁₁ = a11·I`, also the ellipticity constant.
    pub a11: f64,
    pub a0: f64,
    pub boundary: BoundaryConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EtaPolicy {
    /// Minimize the bound over a grid (`None`: `ε^{0.3..0.7}`).
    Optimize { grid_powers: Option<Vec<f64>> },
    /// The family's natural cell scale.
    Natural,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaPolicy {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeumannConfig {
    pub n_max: usize,
    /// Defaults to the schedule.
    pub eps: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizeConfig {
    /// `μ = ε^{mu_power}`.
    pub mu_power: f64,
    /// Sample points per axis.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub csv: String,
    pub plot: Option<String>,
    /// Significant digits of floats.
    pub precision: usize,
}

/// A validated study configuration.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub name: String,
    pub seed: u64,
    pub family: FamilyConfig,
    pub operator: OperatorConfig,
    /// Strictly decreasing, at least three entries.
    pub schedule: Vec<f64>,
    pub eta: EtaPolicy,
    pub lambda: LambdaPolicy,
    pub mesh: MeshRule,
    pub criterion: CriterionOptions,
    pub neumann: NeumannConfig,
    pub homogenize: HomogenizeConfig,
    pub output: OutputConfig,
    /// The raw text, echoed into output headers.
    pub source: String,
}

/// One-based line of `key` inside `[section]` in `src`, if it can be located.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Section<'a> {
    src: &'a str,
    path: String,
    table: Option<&'a Table>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(src: &'a str, path: &str, table: Option<&'a Table>) -> Self {
        Self {
            src,
            path: path.to_string(),
            table,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn err(&self, k: &str, msg: impl Into<String>) -> Error {
        let msg = msg.into();
        let line = locate(self.src, &self.path, k);
        Error::config(
            self.key(k),
            match line {
                Some(l) => format!("{msg} (line {l})"),
                None => msg,
            },
        )
    }

    fn raw(&self, k: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn opt_f64(&self, k: &str) -> Result<Option<f64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.err(k, "expected a number")),
        }
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(k)?.unwrap_or(default))
    }

    fn req_f64(&self, k: &str) -> Result<f64> {
        self.opt_f64(k)?.ok_or_else(|| self.err(k, "required number missing"))
    }

    fn opt_u64(&self, k: &str) -> Result<Option<u64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.err(k, "expected a nonnegative integer")),
        }
    }

    fn usize_or(&self, k: &str, default: usize) -> Result<usize> {
        Ok(self.opt_u64(k)?.map_or(default, |v| v as usize))
    }

    fn opt_str(&self, k: &str) -> Result<Option<&'a str>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(k, "expected a string")),
        }
    }

    fn opt_f64_array(&self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.err(k, "expected an array of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(k, "expected an array of numbers")),
        }
    }

    /// Rejects keys that were never read.
    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            let used = self.used.borrow();
            if let Some(k) = t.keys().find(|k| !used.contains(*k)) {
                return Err(self.err(k, "unknown key"));
            }
        }
        Ok(())
    }
}

fn positive(s: &Section<'_>, k: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(s.err(k, format!("must be positive, got {v}")))
    }
}

fn sub_table<'a>(root: &'a Table, src: &str, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::config(
            name,
            format!(
                "expected a [{name}] section{}",
                locate(src, "", name).map_or(String::new(), |l| format!(" (line {l})"))
            ),
        )),
    }
}

impl StudyConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src)
    }

    /// Parses and validates a configuration text.
    pub fn parse(src: &str) -> Result<Self> {
        let root: Table = src.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| src[..s.start.min(src.len())].lines().count().max(1));
            Error::ConfigParse(match line {
                Some(l) => format!("line {l}: {}", e.message()),
                None => e.message().to_string(),
            })
        })?;
        const SECTIONS: [&str; 10] = [
            "family",
            "operator",
            "schedule",
            "eta",
            "lambda",
            "mesh",
            "criterion",
            "neumann",
            "homogenize",
            "output",
        ];
        let top = Section::new(src, "", Some(&root));
        let name = top.opt_str("name")?.unwrap_or("study").to_string();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(top.err("name", "use letters, digits, '_' or '-'"));
        }
        let seed = top.opt_u64("seed")?.unwrap_or(0);
        for s in SECTIONS {
            top.raw(s);
        }
        top.finish()?;

        let operator = parse_operator(src, sub_table(&root, src, "operator")?)?;
        let family = parse_family(src, sub_table(&root, src, "family")?)?;
        let schedule = parse_schedule(src, sub_table(&root, src, "schedule")?)?;

        let eta_s = Section::new(src, "eta", sub_table(&root, src, "eta")?);
        let eta = match eta_s.opt_str("policy")?.unwrap_or("optimize") {
            "optimize" => EtaPolicy::Optimize {
                grid_powers: eta_s.opt_f64_array("grid_powers")?,
            },
            "natural" => EtaPolicy::Natural,
            "fixed" => EtaPolicy::Fixed(positive(&eta_s, "value", eta_s.req_f64("value")?)?),
            other => return Err(eta_s.err("policy", format!("unknown eta policy `{other}`"))),
        };
        if let EtaPolicy::Optimize { grid_powers: Some(g) } = &eta {
            if g.is_empty() || g.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return Err(eta_s.err("grid_powers", "need a nonempty list of powers in (0, 1)"));
            }
        }
        eta_s.finish()?;

        let lam_s = Section::new(src, "lambda", sub_table(&root, src, "lambda")?);
        let lambda = match lam_s.opt_str("policy")?.unwrap_or("auto") {
            "auto" => LambdaPolicy::Auto,
            "fixed" => LambdaPolicy::Fixed(lam_s.req_f64("value")?),
            other => return Err(lam_s.err("policy", format!("unknown lambda policy `{other}`"))),
        };
        lam_s.finish()?;

        let mesh_s = Section::new(src, "mesh", sub_table(&root, src, "mesh")?);
        let defaults = MeshRule::default();
        let mesh = MeshRule {
            factor: positive(&mesh_s, "factor", mesh_s.f64_or("factor", defaults.factor)?)?,
            max_dof: mesh_s.usize_or("max_dof", defaults.max_dof)?,
            fixed: mesh_s.opt_u64("elements")?.map(|v| v as usize),
        };
        if mesh.max_dof < 3 || mesh.max_dof > 8192 {
            return Err(mesh_s.err("max_dof", "must lie in 3..=8192"));
        }
        if mesh.fixed.is_some_and(|n| n < 2 || n * operator.ncomp > mesh.max_dof) {
            return Err(mesh_s.err("elements", "need 2 <= elements and elements*ncomp <= max_dof"));
        }
        mesh_s.finish()?;

        let crit_s = Section::new(src, "criterion", sub_table(&root, src, "criterion")?);
        let cdef = CriterionOptions::default();
        let criterion = CriterionOptions {
            component: family.slot,
            refine: crit_s.opt_u64("refine")?.map(|v| v.max(1) as usize),
            max_evaluations: crit_s.opt_u64("max_evaluations")?.unwrap_or(cdef.max_evaluations),
        };
        crit_s.finish()?;

        let neu_s = Section::new(src, "neumann", sub_table(&root, src, "neumann")?);
        let neumann = NeumannConfig {
            n_max: neu_s.usize_or("n_max", 4)?,
            eps: neu_s.opt_f64_array("eps")?,
        };
        if let Some(e) = &neumann.eps {
            if e.is_empty() || e.iter().any(|v| !(*v > 0.0)) {
                return Err(neu_s.err("eps", "need positive values"));
            }
        }
        neu_s.finish()?;

        let hom_s = Section::new(src, "homogenize", sub_table(&root, src, "homogenize")?);
        let homogenize = HomogenizeConfig {
            mu_power: positive(&hom_s, "mu_power", hom_s.f64_or("mu_power", 0.5)?)?,
            samples: hom_s.usize_or("samples", 33)?,
        };
        if homogenize.samples == 0 {
            return Err(hom_s.err("samples", "must be positive"));
        }
        hom_s.finish()?;

        let out_s = Section::new(src, "output", sub_table(&root, src, "output")?);
        let output = OutputConfig {
            csv: out_s.opt_str("csv")?.map_or_else(|| format!("{name}.csv"), str::to_string),
            plot: out_s.opt_str("plot")?.map(str::to_string),
            precision: out_s.usize_or("precision", 17)?,
        };
        if !(1..=17).contains(&output.precision) {
            return Err(out_s.err("precision", "must lie in 1..=17"));
        }
        out_s.finish()?;

        Ok(Self {
            name,
            seed,
            family,
            operator,
            schedule,
            eta,
            lambda,
            mesh,
            criterion,
            neumann,
            homogenize,
            output,
            source: src.to_string(),
        })
    }
}

fn parse_operator(src: &str, t: Option<&Table>) -> Result<OperatorConfig> {
    let s = Section::new(src, "operator", t);
    let (a, b) = match s.opt_f64_array("interval")? {
        None => (0.0, 1.0),
        Some(v) if v.len() == 2 && v[1] > v[0] => (v[0], v[1]),
        Some(_) => return Err(s.err("interval", "expected [a, b] with a < b")),
    };
    let ncomp = s.usize_or("ncomp", 1)?;
    if !(1..=4).contains(&ncomp) {
        return Err(s.err("ncomp", "must lie in 1..=4"));
    }
    let a11 = positive(&s, "a11", s.f64_or("a11", 1.0)?)?;
    let a0 = s.f64_or("a0", 0.0)?;
    let boundary = match s.opt_str("boundary")?.unwrap_or("dirichlet") {
        "dirichlet" => BoundaryConfig::Dirichlet,
        "robin" => match s.opt_f64_array("robin")? {
            Some(v) if v.len() == 2 => BoundaryConfig::Robin { ka: v[0], kb: v[1] },
            _ => return Err(s.err("robin", "robin boundary needs robin = [ka, kb]")),
        },
        other => return Err(s.err("boundary", format!("unknown boundary `{other}`"))),
    };
    if boundary == BoundaryConfig::Dirichlet && s.table.is_some_and(|t| t.contains_key("robin")) {
        return Err(s.err("robin", "robin coefficients given with a dirichlet boundary"));
    }
    s.finish()?;
    Ok(OperatorConfig {
        a,
        b,
        ncomp,
        a11,
        a0,
        boundary,
    })
}

fn parse_family(src: &str, t: Option<&Table>) -> Result<FamilyConfig> {
    let s = Section::new(src, "family", t);
    if t.is_none() {
        return Err(Error::config("family", "missing [family] section"));
    }
    let kind_name = s
        .opt_str("kind")?
        .ok_or_else(|| s.err("kind", "required string missing"))?;
    let slot = match s.opt_str("slot")?.unwrap_or("V") {
        "V" => Component::V,
        "Q" => Component::Q(0),
        "P" => Component::P(0),
        other => return Err(s.err("slot", format!("expected V, Q or P, got `{other}`"))),
    };
    let domain = match s.opt_f64_array("domain")? {
        None => None,
        Some(v) if v.len() % 2 == 0 && !v.is_empty() => {
            let d = v.len() / 2;
            let lo: Vec<f64> = (0..d).map(|i| v[2 * i]).collect();
            let hi: Vec<f64> = (0..d).map(|i| v[2 * i + 1]).collect();
            Some(BoxDomain::new(lo, hi).map_err(|e| s.err("domain", e.to_string()))?)
        }
        Some(_) => return Err(s.err("domain", "expected [lo_1, hi_1, lo_2, hi_2, ...]")),
    };
    let kind = match kind_name {
        "sine" => FamilyKind::Sine {
            amplitude: s.f64_or("amplitude", 1.0)?,
        },
        "sign_control" => FamilyKind::SignControl {
            declared_limit: s.f64_or("declared_limit", 0.5)?,
        },
        "two_scale" => FamilyKind::TwoScale,
        "regular" => FamilyKind::Regular {
            amplitude: s.f64_or("amplitude", 1.0)?,
        },
        "sparse" => {
            let rho4_power = positive(&s, "rho4_power", s.f64_or("rho4_power", 0.5)?)?;
            let rho5_power = positive(&s, "rho5_power", s.f64_or("rho5_power", 0.5)?)?;
            FamilyKind::Sparse {
                rho4_power,
                rho5_power,
                amplitude: s.f64_or("amplitude", 1.0)?,
            }
        }
        "stabilizing" => FamilyKind::Stabilizing {
            amplitude: s.f64_or("amplitude", 1.0)?,
        },
        "locally_periodic" => {
            let powers = s.opt_f64_array("powers")?.unwrap_or_else(|| vec![1.0]);
            if powers.is_empty() || powers.len() > 3 || powers[0] <= 0.0 || powers.windows(2).any(|w| w[1] <= w[0]) {
                return Err(s.err("powers", "need 1 to 3 positive, strictly increasing powers"));
            }
            FamilyKind::LocallyPeriodic { powers }
        }
        "almost_periodic" => {
            let frequencies = s
                .opt_f64_array("frequencies")?
                .unwrap_or_else(|| vec![1.0, std::f64::consts::SQRT_2]);
            if frequencies.is_empty() || frequencies.iter().any(|w| *w == 0.0) {
                return Err(s.err("frequencies", "need nonzero frequencies"));
            }
            FamilyKind::AlmostPeriodic {
                frequencies,
                mean: s.f64_or("mean", 0.0)?,
            }
        }
        "modulated" => {
            let periodic_phi = match s.opt_str("phi")?.unwrap_or("diffeomorphism") {
                "diffeomorphism" => false,
                "periodic" => true,
                other => return Err(s.err("phi", format!("expected diffeomorphism or periodic, got `{other}`"))),
            };
            let strength = s.f64_or("strength", 0.3)?;
            if !periodic_phi && !(strength.abs() < 1.0) {
                return Err(s.err("strength", "a diffeomorphic phi needs |strength| < 1"));
            }
            FamilyKind::Modulated { periodic_phi, strength }
        }
        "fractal" => FamilyKind::Fractal,
        "random" => {
            let flow = s
                .opt_f64_array("flow")?
                .unwrap_or_else(|| vec![1.0, std::f64::consts::SQRT_2]);
            if flow.is_empty() || flow.len() > 3 {
                return Err(s.err("flow", "need 1 to 3 torus directions"));
            }
            FamilyKind::Random {
                flow,
                realization: s.opt_u64("realization")?.unwrap_or(0),
            }
        }
        other => {
            return Err(s.err(
                "kind",
                format!("unknown family `{other}`; expected one of {}", FamilyKind::NAMES.join(", ")),
            ))
        }
    };
    s.finish()?;
    Ok(FamilyConfig { kind, slot, domain })
}

fn parse_schedule(src: &str, t: Option<&Table>) -> Result<Vec<f64>> {
    let s = Section::new(src, "schedule", t);
    if t.is_none() {
        return Err(Error::config("schedule", "missing [schedule] section"));
    }
    let values = match s.opt_f64_array("values")? {
        Some(v) => {
            for k in ["start", "factor", "count"] {
                if s.table.is_some_and(|t| t.contains_key(k)) {
                    return Err(s.err(k, "give either values or start/factor/count"));
                }
            }
            v
        }
        None => {
            let start = positive(&s, "start", s.req_f64("start")?)?;
            let factor = s.req_f64("factor")?;
            if !(factor > 0.0 && factor < 1.0) {
                return Err(s.err("factor", "must lie in (0, 1)"));
            }
            let count = s
                .opt_u64("count")?
                .ok_or_else(|| s.err("count", "required integer missing"))? as usize;
            (0..count).map(|k| start * factor.powi(k as i32)).collect()
        }
    };
    if values.len() < 3 {
        return Err(s.err(if s.table.is_some_and(|t| t.contains_key("values")) { "values" } else { "count" }, "need at least 3 entries"));
    }
    if values.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(s.err("values", "entries must lie in (0, 1)"));
    }
    if values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(s.err("values", "schedule must be strictly decreasing"));
    }
    s.finish()?;
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
[family]
kind = "sine"
[schedule]
start = 0.1
factor = 0.5
count = 4
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = StudyConfig::parse(BASE).unwrap();
        assert_eq!(c.schedule, vec![0.1, 0.05, 0.025, 0.0125]);
        assert_eq!(c.eta, EtaPolicy::Optimize { grid_powers: None });
        assert_eq!(c.lambda, LambdaPolicy::Auto);
        assert_eq!(c.output.csv, "t.csv");
        assert_eq!(c.operator.boundary, BoundaryConfig::Dirichlet);
    }

    #[test]
    fn unknown_key_is_named() {
        let src = format!("{BASE}amplitud = 2.0\n");
        let e = StudyConfig::parse(&src).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("schedule.amplitud"), "{msg}");
        assert!(msg.contains("line 9"), "{msg}");
        assert!(e.is_config());
    }

    #[test]
    fn schedule_must_decrease_with_three_entries() {
        let e = StudyConfig::parse("[family]\nkind = \"sine\"\n[schedule]\nvalues = [0.1, 0.2, 0.05]\n").unwrap_err();
        assert!(e.to_string().contains("strictly decreasing"));
        let e = StudyConfig::parse("[family]\nkind = \"sine\"\n[schedule]\nvalues = [0.1, 0.05]\n").unwrap_err();
        assert!(e.to_string().contains("at least 3"));
    }

    #[test]
    fn wrong_type_and_unknown_family() {
        let e = StudyConfig::parse(&BASE.replace("count = 4", "count = \"four\"")).unwrap_err();
        assert!(e.to_string().contains("schedule.count"));
        let e = StudyConfig::parse(&BASE.replace("\"sine\"", "\"sinus\"")).unwrap_err();
        assert!(e.to_string().contains("family.kind"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = StudyConfig::parse("[family]\nkind = \n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse(_)));
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
