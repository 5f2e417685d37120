//! Numerical homogenization laboratory.

pub mod criteria;
pub mod error;
pub mod families;
pub mod fem;
pub mod field;
pub mod lattice;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod resolvent;
pub mod scalar;
pub mod study;

pub use error::{Error, Result};
pub use scalar::{CMat, Real};

/// `f64` instantiations of the generic core.
pub type Family = families::PerturbationFamily<f64>;
pub type Field = field::CoefficientField<f64>;
pub type Domain = field::BoxDomain<f64>;
pub type Matrix = scalar::CMat<f64>;
pub type Operator = fem::DiscreteOperator<f64>;
pub type Spec = fem::OperatorSpec<f64>;
pub type Criterion = criteria::CriterionReport<f64>;
pub type Resolvent = resolvent::ResolventContext<f64>;
