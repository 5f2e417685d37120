use super::almost_periodic::sinc_mod;
use super::periodic::torus_mean;
use super::simple::sqrt_usize;
use super::{FieldTriple, PerturbationFamily, ScalarFn};
use crate::error::{Error, Result};
use crate::field::{BoxDomain, CoefficientField};
use crate::scalar::{lit, to_f64, CMat, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const FLOW_SHIFT: i32 = 96;
const POS_SHIFT: i32 = 32;

/// A point of the torus `[0,1)^k` in fixed point, units of `2^{-128}`.
///
/// Shifts add modulo `2^128`, so the group law holds bit-exactly.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TorusPoint(pub Vec<u128>);

impl TorusPoint {
    pub fn from_fractions(x: &[f64]) -> Self {
        Self(x.iter().map(|v| frac_to_fixed(*v)).collect())
    }

    pub fn to_fractions(&self) -> Vec<f64> {
        self.0.iter().map(|v| (*v >> 64) as f64 / 2f64.powi(64)).collect()
    }

    pub fn shifted(&self, disp: &TorusPoint) -> Self {
        Self(self.0.iter().zip(&disp.0).map(|(a, b)| a.wrapping_add(*b)).collect())
    }
}

fn frac_to_fixed(v: f64) -> u128 {
    let f = v - v.floor();
    ((f * 2f64.powi(64)) as u128) << 64
}

/// Quantizes a real position to the grid `2^{-32}ℤ`.
pub fn quantize_position(x: f64) -> i64 {
    (x * 2f64.powi(POS_SHIFT)).round() as i64
}

/// An observable on `Ω × 𝕋^k`.
#[derive(Clone)]
pub enum Observable<T> {
    /// `Σ_m C_m(x) e^{2πi m·ϖ}` over integer frequency vectors `m`.
    Trig(Vec<(Vec<i64>, CoefficientField<T>)>),
    /// A general 1-periodic map `(x, ϖ) ↦ matrix`, with a bound on `|·|`.
    Smooth {
        ncomp: usize,
        sup_bound: T,
        f: Arc<dyn Fn(&[T], &[T]) -> CMat<T> + Send + Sync>,
    },
}

impl<T: Real> Observable<T> {
    pub fn ncomp(&self) -> usize {
        match self {
            Observable::Trig(t) => t.first().map_or(1, |(_, c)| c.ncomp()),
            Observable::Smooth { ncomp, .. } => *ncomp,
        }
    }

    pub fn sup_bound(&self) -> T {
        match self {
            Observable::Trig(t) => t.iter().map(|(_, c)| c.sup_bound()).sum(),
            Observable::Smooth { sup_bound, .. } => *sup_bound,
        }
    }

    pub fn eval(&self, x: &[T], w: &[T]) -> CMat<T> {
        match self {
            Observable::Trig(t) => {
                let mut acc = CMat::zeros(self.ncomp());
                for (m, c) in t {
                    let ph: T = m
                        .iter()
                        .zip(w)
                        .map(|(mi, wi)| T::from_i64(*mi).unwrap() * *wi)
                        .sum::<T>()
                        * T::TAU();
                    acc.axpy(Complex::new(ph.cos(), ph.sin()), &c.eval(x));
                }
                acc
            }
            Observable::Smooth { f, .. } => f(x, w),
        }
    }
}

/// Torus rotation `Θ(y)ϖ = ϖ + F·y mod 1` with an observable.
#[derive(Clone)]
pub struct ErgodicSystem<T> {
    torus_dim: usize,
    flow: Vec<Vec<T>>,
    flow_fixed: Vec<Vec<u128>>,
    observable: Observable<T>,
    seed: u64,
}

impl<T: Real> std::fmt::Debug for ErgodicSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ErgodicSystem")
            .field("torus_dim", &self.torus_dim)
            .field("flow", &self.flow)
            .field("seed", &self.seed)
            .finish()
    }
}

impl<T: Real> ErgodicSystem<T> {
    /// `flow` is `k×d`; its rows should be rationally independent (not checked).
    pub fn new(flow: Vec<Vec<T>>, observable: Observable<T>, seed: u64) -> Result<Self> {
        let k = flow.len();
        if k == 0 {
            return Err(Error::InvalidArgument("torus dimension must be positive".into()));
        }
        let d = flow[0].len();
        if d == 0 || flow.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("flow matrix rows must share a positive length".into()));
        }
        if let Observable::Trig(t) = &observable {
            if t.is_empty() || t.iter().any(|(m, c)| m.len() != k || c.dim() != d) {
                return Err(Error::Dimension("trig observable frequencies must have length k".into()));
            }
        }
        let limit = 2f64.powi(126 - FLOW_SHIFT);
        let mut flow_fixed = Vec::with_capacity(k);
        for row in &flow {
            let mut r = Vec::with_capacity(d);
            for v in row {
                let f = to_f64(*v);
                if !f.is_finite() || f.abs() >= limit {
                    return Err(Error::InvalidArgument(format!("flow entry {f} out of range")));
                }
                r.push((f * 2f64.powi(FLOW_SHIFT)).round() as i128 as u128);
            }
            flow_fixed.push(r);
        }
        Ok(Self {
            torus_dim: k,
            flow,
            flow_fixed,
            observable,
            seed,
        })
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim
    }

    pub fn dim(&self) -> usize {
        self.flow[0].len()
    }

    pub fn flow(&self) -> &[Vec<T>] {
        &self.flow
    }

    pub fn observable(&self) -> &Observable<T> {
        &self.observable
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Displacement `F·p mod 1` for a quantized position `p` (units `2^{-32}`).
    pub fn displacement(&self, p: &[i64]) -> TorusPoint {
        TorusPoint(
            self.flow_fixed
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(p)
                        .fold(0u128, |acc, (f, pi)| acc.wrapping_add(f.wrapping_mul(*pi as i128 as u128)))
                })
                .collect(),
        )
    }

    /// Starting point for a realization; streams are independent for distinct indices.
    pub fn sample_point(&self, realization: u64) -> TorusPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(realization);
        TorusPoint((0..self.torus_dim).map(|_| rng.random::<u128>()).collect())
    }

    /// Observable at `x` with torus coordinate `w`.
    pub fn eval_at(&self, x: &[T], w: &TorusPoint) -> CMat<T> {
        let wf: Vec<T> = w.to_fractions().into_iter().map(lit).collect();
        self.observable.eval(x, &wf)
    }

    /// `ρ₁₁` for trig observables: worst-case deviation of the Birkhoff box average over `(0, t)^d`.
    pub fn birkhoff_tail(&self, t: T) -> Option<T> {
        let Observable::Trig(terms) = &self.observable else {
            return None;
        };
        let d = self.dim();
        let mut total = T::zero();
        for (m, c) in terms {
            if m.iter().all(|v| *v == 0) {
                continue;
            }
            let mut f = c.sup_bound();
            for j in 0..d {
                let omega: T = m
                    .iter()
                    .zip(&self.flow)
                    .map(|(mi, row)| T::from_i64(*mi).unwrap() * row[j])
                    .sum();
                f *= sinc_mod(T::TAU() * omega * t);
            }
            total += f;
        }
        Some(total)
    }
}

/// Torus integral of the observable, as a field in `x`.
pub fn expectation<T: Real>(system: &ErgodicSystem<T>) -> CoefficientField<T> {
    let d = system.dim();
    let n = system.observable.ncomp();
    match &system.observable {
        Observable::Trig(terms) => {
            let mut acc = CoefficientField::zero(d, n);
            for (m, c) in terms {
                if m.iter().all(|v| *v == 0) {
                    acc = acc.add(c).expect("shapes checked at construction");
                }
            }
            acc
        }
        Observable::Smooth { f, sup_bound, .. } => {
            let k = system.torus_dim;
            let points = match k {
                0..=2 => 32,
                3 => 16,
                _ => 8,
            };
            let f = f.clone();
            let ones = vec![T::one(); k];
            CoefficientField::new(d, n, *sup_bound, move |x| torus_mean(n, &ones, points, |w| f(x, w)))
        }
    }
}

/// Exponent `α` in the cell scale `η = ε^{1/(2(1+α))}`.
pub const RANDOM_ALPHA: f64 = 1.0;

/// `V^ε(x) = V(x, ϖ + F·x/ε mod 1)` for one realization `ϖ`.
///
/// `rho10` is the continuity modulus of the observable in `x`. For smooth observables `rho11`
/// must be supplied; for trig observables it is computed from the Birkhoff box averages.
pub fn make_random<T: Real>(
    domain: BoxDomain<T>,
    system: ErgodicSystem<T>,
    realization: u64,
    rho10: impl Fn(T) -> T + Send + Sync + 'static,
    rho11: Option<ScalarFn<T>>,
) -> Result<PerturbationFamily<T>> {
    let d = domain.dim();
    if system.dim() != d {
        return Err(Error::Dimension(format!(
            "flow matrix has {} columns, domain d = {d}",
            system.dim()
        )));
    }
    let n = system.observable.ncomp();
    let limit = expectation(&system);
    let sup = system.observable.sup_bound();
    let start = system.sample_point(realization);
    let sys = Arc::new(system);
    let sb = sys.clone();
    let build = move |e: T| -> Result<FieldTriple<T>> {
        let (sys, start) = (sb.clone(), start.clone());
        Ok(FieldTriple::from_v(CoefficientField::new(d, n, sup, move |x| {
            let p: Vec<i64> = x.iter().map(|xi| quantize_position(to_f64(*xi / e))).collect();
            let w = start.shifted(&sys.displacement(&p));
            sys.eval_at(x, &w)
        })))
    };
    let alpha: T = lit(RANDOM_ALPHA);
    let expo = T::one() / (lit::<T>(2.0) * (T::one() + alpha));
    let rho11: ScalarFn<T> = match rho11 {
        Some(f) => f,
        None => {
            if sys.birkhoff_tail(T::one()).is_none() {
                return Err(Error::InvalidArgument(
                    "smooth observables need an explicit rho11".into(),
                ));
            }
            let s = sys.clone();
            Arc::new(move |e: T| {
                let eta = e.powf(expo);
                s.birkhoff_tail(eta.powf(-alpha)).unwrap_or(T::zero())
            })
        }
    };
    let sd = sqrt_usize::<T>(d);
    Ok(PerturbationFamily::new("random", domain, FieldTriple::from_v(limit), build)?
        .with_eta(move |e| e.powf(expo))
        .with_rate(move |e| {
            let eta = e.powf(expo);
            rho10(sd * eta) + e / eta.powf(T::one() + alpha) + rho11(e)
        })
        .with_param("realization", realization))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn cos_system(seed: u64) -> ErgodicSystem<f64> {
        let half = Complex::new(0.5, 0.0);
        ErgodicSystem::new(
            vec![vec![1.0]],
            Observable::Trig(vec![
                (vec![1], CoefficientField::constant(1, CMat::scalar(1, half))),
                (vec![-1], CoefficientField::constant(1, CMat::scalar(1, half))),
            ]),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn rejects_zero_torus_dim() {
        let obs = Observable::Trig(vec![(vec![], CoefficientField::<f64>::identity(1, 1))]);
        assert!(ErgodicSystem::new(vec![], obs, 1).is_err());
    }

    #[test]
    fn deterministic_observable_expectation() {
        let obs = Observable::Smooth {
            ncomp: 1,
            sup_bound: 1.0,
            f: Arc::new(|x: &[f64], _w: &[f64]| CMat::scalar(1, Complex::new(x[0].sin(), 0.0))),
        };
        let sys = ErgodicSystem::new(vec![vec![1.0]], obs, 3).unwrap();
        let e = expectation(&sys);
        assert!((e.eval(&[0.4]).get(0, 0).re - 0.4f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn pure_mode_has_zero_expectation() {
        let obs = Observable::Trig(vec![(vec![1], CoefficientField::<f64>::identity(1, 1))]);
        let sys = ErgodicSystem::new(vec![vec![2f64.sqrt()]], obs, 3).unwrap();
        assert_eq!(expectation(&sys).eval(&[0.1]).abs_sum(), 0.0);
    }

    #[test]
    fn realization_field_matches_formula() {
        let sys = cos_system(11);
        let w0 = sys.sample_point(4).to_fractions()[0];
        let fam = make_random(BoxDomain::interval(0.0, 1.0).unwrap(), sys, 4, |_| 0.0, None).unwrap();
        let e = 0.01;
        let x = 0.3;
        let got = fam.at(e).unwrap().v.eval(&[x]).get(0, 0).re;
        assert!((got - (TAU * (w0 + x / e)).cos()).abs() < 1e-8);
    }

    #[test]
    fn group_law_on_quantized_positions() {
        let sys = ErgodicSystem::new(
            vec![vec![2f64.sqrt(), -0.3], vec![3f64.sqrt(), 1.7]],
            Observable::Trig(vec![(vec![0, 0], CoefficientField::identity(2, 1))]),
            9,
        )
        .unwrap();
        let w = sys.sample_point(0);
        let (p, q) = ([123456789i64, -987654321], [-5555555i64, 42]);
        let pq = [p[0] + q[0], p[1] + q[1]];
        let two = w.shifted(&sys.displacement(&p)).shifted(&sys.displacement(&q));
        assert_eq!(two, w.shifted(&sys.displacement(&pq)));
    }

    #[test]
    fn birkhoff_tail_matches_closed_form() {
        let sys = cos_system(0);
        // |sin(πT)/(πT)| per mode, two modes of weight 1/2.
        let t = 3.3;
        let expect = ((std::f64::consts::PI * t).sin() / (std::f64::consts::PI * t)).abs();
        assert!((sys.birkhoff_tail(t).unwrap() - expect).abs() < 1e-14);
    }
}
