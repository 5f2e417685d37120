//! Perturbation families `ε ↦ (V^ε, {Q_j^ε}, {P_j^ε})` with declared limits and predicted rates.

mod almost_periodic;
mod combinators;
mod periodic;
mod random;
mod simple;

pub use almost_periodic::{box_average, exp_box_mean, make_almost_periodic, trig_tail, ScalarTrig, TrigTerm};
pub use combinators::{add, cell_resample, glue, negate, resample_refine, scale_left, scale_right};
pub use periodic::{make_fractal, make_locally_periodic, make_modulated, PhiKind};
pub use random::{expectation, make_random, quantize_position, ErgodicSystem, Observable, TorusPoint, RANDOM_ALPHA};
pub use simple::{lattice_centers, make_regular, make_sparse, make_stabilizing, make_stabilizing_directional};

use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::lattice::Lattice;
use crate::scalar::{lit, Real};
use std::fmt;
use std::sync::Arc;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
type BuildFn<T> = Arc<dyn Fn(T) -> Result<FieldTriple<T>> + Send + Sync>;

/// Which coefficient of the perturbation a field occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    V,
    Q(usize),
    P(usize),
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::V => write!(f, "V"),
            Component::Q(j) => write!(f, "Q{}", j + 1),
            Component::P(j) => write!(f, "P{}", j + 1),
        }
    }
}

/// The triple `(V, {Q_j}, {P_j})`, `j = 1..d`.
#[derive(Clone, Debug)]
pub struct FieldTriple<T> {
    pub v: CoefficientField<T>,
    pub q: Vec<CoefficientField<T>>,
    pub p: Vec<CoefficientField<T>>,
}

impl<T: Real> FieldTriple<T> {
    pub fn zero(dim: usize, ncomp: usize) -> Self {
        Self {
            v: CoefficientField::zero(dim, ncomp),
            q: vec![CoefficientField::zero(dim, ncomp); dim],
            p: vec![CoefficientField::zero(dim, ncomp); dim],
        }
    }

    /// Only `V` nonzero.
    pub fn from_v(v: CoefficientField<T>) -> Self {
        let mut t = Self::zero(v.dim(), v.ncomp());
        t.v = v;
        t
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn ncomp(&self) -> usize {
        self.v.ncomp()
    }

    pub fn get(&self, c: Component) -> Result<&CoefficientField<T>> {
        match c {
            Component::V => Some(&self.v),
            Component::Q(j) => self.q.get(j),
            Component::P(j) => self.p.get(j),
        }
        .ok_or_else(|| Error::Dimension(format!("component {c} out of range for d = {}", self.dim())))
    }

    pub fn set(&mut self, c: Component, f: CoefficientField<T>) -> Result<()> {
        let slot = match c {
            Component::V => Some(&mut self.v),
            Component::Q(j) => self.q.get_mut(j),
            Component::P(j) => self.p.get_mut(j),
        };
        match slot {
            Some(s) => {
                *s = f;
                Ok(())
            }
            None => Err(Error::Dimension(format!("component {c} out of range"))),
        }
    }

    pub fn components(&self) -> Vec<Component> {
        let d = self.dim();
        let mut out = vec![Component::V];
        out.extend((0..d).map(Component::Q));
        out.extend((0..d).map(Component::P));
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self.ncomp() == other.ncomp()
            && self.q.len() == other.q.len()
            && self.p.len() == other.p.len()
            && self
                .q
                .iter()
                .chain(&self.p)
                .chain(other.q.iter().chain(&other.p))
                .all(|f| f.dim() == self.dim() && f.ncomp() == self.ncomp())
    }

    /// Applies `f` to corresponding fields of `self` and `other`.
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&CoefficientField<T>, &CoefficientField<T>) -> Result<CoefficientField<T>>,
    ) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("field triples differ in shape".into()));
        }
        Ok(Self {
            v: f(&self.v, &other.v)?,
            q: self.q.iter().zip(&other.q).map(|(a, b)| f(a, b)).collect::<Result<_>>()?,
            p: self.p.iter().zip(&other.p).map(|(a, b)| f(a, b)).collect::<Result<_>>()?,
        })
    }

    pub fn map(&self, f: impl Fn(&CoefficientField<T>) -> Result<CoefficientField<T>>) -> Result<Self> {
        Ok(Self {
            v: f(&self.v)?,
            q: self.q.iter().map(&f).collect::<Result<_>>()?,
            p: self.p.iter().map(&f).collect::<Result<_>>()?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    /// Largest declared sup bound over all components.
    pub fn sup_bound(&self) -> T {
        self.q
            .iter()
            .chain(&self.p)
            .fold(self.v.sup_bound(), |m, f| m.max(f.sup_bound()))
    }

    /// Moves the `V` slot into `slot`, leaving `V = 0`.
    pub fn moved_to(&self, slot: Component) -> Result<Self> {
        let mut t = Self::zero(self.dim(), self.ncomp());
        t.set(slot, self.v.clone())?;
        Ok(t)
    }
}

/// Family name and the parameters it was built with.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FamilyMeta {
    pub name: String,
    pub params: Vec<(String, String)>,
}

impl fmt::Display for FamilyMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", ps.join(", "))?;
        }
        Ok(())
    }
}

/// A one-parameter family of perturbation coefficients.
///
/// Multi-parameter families are traversed along a fixed path `ε ↦ (ε_1(ε), …, ε_m(ε))`
/// chosen by the generator.
#[derive(Clone)]
pub struct PerturbationFamily<T> {
    meta: FamilyMeta,
    domain: BoxDomain<T>,
    build: BuildFn<T>,
    limit: FieldTriple<T>,
    rate: ScalarFn<T>,
    eta: ScalarFn<T>,
    finest_scale: ScalarFn<T>,
    lattice: Lattice<T>,
}

impl<T: Real> fmt::Debug for PerturbationFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationFamily")
            .field("meta", &self.meta)
            .field("domain", &self.domain)
            .finish()
    }
}

impl<T: Real> PerturbationFamily<T> {
    /// Defaults: rate 0, natural cell scale `ε^{1/2}`, finest scale `ε`, lattice `ℤ^d`.
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain<T>,
        limit: FieldTriple<T>,
        build: impl Fn(T) -> Result<FieldTriple<T>> + Send + Sync + 'static,
    ) -> Result<Self> {
        if limit.dim() != domain.dim() {
            return Err(Error::Dimension(format!(
                "limit has d = {} but domain has d = {}",
                limit.dim(),
                domain.dim()
            )));
        }
        let d = domain.dim();
        Ok(Self {
            meta: FamilyMeta {
                name: name.into(),
                params: Vec::new(),
            },
            domain,
            build: Arc::new(build),
            limit,
            rate: Arc::new(|_| T::zero()),
            eta: Arc::new(|e: T| e.sqrt()),
            finest_scale: Arc::new(|e| e),
            lattice: Lattice::integer(d),
        })
    }

    pub fn with_rate(mut self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.rate = Arc::new(f);
        self
    }

    pub fn with_eta(mut self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.eta = Arc::new(f);
        self
    }

    pub fn with_finest_scale(mut self, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.finest_scale = Arc::new(f);
        self
    }

    pub fn with_lattice(mut self, lattice: Lattice<T>) -> Self {
        self.lattice = lattice;
        self
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.meta.params.push((key.into(), value.to_string()));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.meta.name = name.into();
        self
    }

    /// Replaces the declared limit (e.g. to build a deliberately wrong control).
    pub fn with_limit(mut self, limit: FieldTriple<T>) -> Result<Self> {
        if !limit.same_shape(&self.limit) {
            return Err(Error::Dimension("replacement limit differs in shape".into()));
        }
        self.limit = limit;
        Ok(self)
    }

    /// Moves the generated `V` field (and its limit) into another coefficient slot.
    pub fn in_slot(self, slot: Component) -> Result<Self> {
        if slot == Component::V {
            return Ok(self);
        }
        let limit = self.limit.moved_to(slot)?;
        let inner = self.build.clone();
        Ok(Self {
            limit,
            build: Arc::new(move |e| inner(e)?.moved_to(slot)),
            ..self
        })
    }

    /// Coefficients at `ε`.
    pub fn at(&self, eps: T) -> Result<FieldTriple<T>> {
        if !(eps > T::zero()) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        let t = (self.build)(eps)?;
        if !t.same_shape(&self.limit) {
            return Err(Error::Dimension(format!(
                "family `{}` produced fields of a different shape than its limit",
                self.meta.name
            )));
        }
        Ok(t)
    }

    /// `at(ε) − limit`.
    pub fn deviation(&self, eps: T) -> Result<FieldTriple<T>> {
        self.at(eps)?.sub(&self.limit)
    }

    pub fn limit(&self) -> &FieldTriple<T> {
        &self.limit
    }

    pub fn rate(&self, eps: T) -> T {
        (self.rate)(eps)
    }

    /// The natural cell scale `η(ε)` used by the family's convergence argument.
    pub fn eta(&self, eps: T) -> T {
        (self.eta)(eps)
    }

    /// Smallest oscillation length at `ε`; drives default quadrature resolution.
    pub fn finest_scale(&self, eps: T) -> T {
        (self.finest_scale)(eps)
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ncomp(&self) -> usize {
        self.limit.ncomp()
    }

    pub fn meta(&self) -> &FamilyMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub(crate) fn parts(&self) -> (BuildFn<T>, ScalarFn<T>, ScalarFn<T>, ScalarFn<T>) {
        (
            self.build.clone(),
            self.rate.clone(),
            self.eta.clone(),
            self.finest_scale.clone(),
        )
    }
}

/// Probe parameter used to validate generator output at construction time.
pub(crate) fn probe_eps<T: Real>() -> T {
    lit(0.1)
}
