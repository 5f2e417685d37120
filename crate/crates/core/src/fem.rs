//! Vector P1 finite elements on an interval for the forms `h`, `h^ε`, `h⁰` and the operator `X`.

use crate::error::{Error, Result};
use crate::families::FieldTriple;
use crate::field::CoefficientField;
use crate::linalg::{dot, BandCholesky, BandMatrix, C};
use crate::quadrature::composite_rule;
use crate::scalar::{from_usize, lit, CMat, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Boundary condition of the base operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary<T> {
    Dirichlet,
    /// `∂u/∂ν + K u = 0` with matrices at the left and right endpoints.
    Robin { ka: CMat<T>, kb: CMat<T> },
}

impl<T> Boundary<T> {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Boundary::Dirichlet)
    }
}

/// Base operator data on an interval.
#[derive(Clone, Debug)]
pub struct OperatorSpec<T> {
    pub a: T,
    pub b: T,
    pub ncomp: usize,
    pub a11: CoefficientField<T>,
    pub aplus: CoefficientField<T>,
    pub aminus: CoefficientField<T>,
    pub a0: CoefficientField<T>,
    pub bc: Boundary<T>,
    pub c1: T,
}

impl<T: Real> OperatorSpec<T> {
    /// `−(u′)′` with the given boundary condition, `n` components, `c₁ = 1`.
    pub fn laplacian(a: T, b: T, ncomp: usize, bc: Boundary<T>) -> Self {
        Self {
            a,
            b,
            ncomp,
            a11: CoefficientField::identity(1, ncomp),
            aplus: CoefficientField::zero(1, ncomp),
            aminus: CoefficientField::zero(1, ncomp),
            a0: CoefficientField::zero(1, ncomp),
            bc,
            c1: T::one(),
        }
    }

    /// Checks shapes, `c₁ > 0`, and `Re z*A₁₁(x)z ≥ c₁|z|²` at `samples` seeded points.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        if !(self.b > self.a) {
            return Err(Error::InvalidArgument("operator interval is degenerate".into()));
        }
        if !(self.c1 > T::zero()) {
            return Err(Error::InvalidArgument("ellipticity constant c1 must be positive".into()));
        }
        for (name, f) in [("A11", &self.a11), ("A+", &self.aplus), ("A-", &self.aminus), ("A0", &self.a0)] {
            if f.dim() != 1 || f.ncomp() != self.ncomp {
                return Err(Error::Dimension(format!(
                    "{name} must be a 1D field with n = {}",
                    self.ncomp
                )));
            }
        }
        if let Boundary::Robin { ka, kb } = &self.bc {
            if ka.n() != self.ncomp || kb.n() != self.ncomp {
                return Err(Error::Dimension("Robin matrices must be n x n".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.ncomp;
        for _ in 0..samples {
            let t: f64 = rng.random();
            let x = self.a + (self.b - self.a) * lit(t);
            let z: Vec<C<T>> = (0..n)
                .map(|_| C::new(lit(rng.random_range(-1.0..1.0)), lit(rng.random_range(-1.0..1.0))))
                .collect();
            let az = self.a11.eval(&[x]).apply(&z);
            let lhs = dot(&z, &az).re;
            let zz: T = z.iter().map(|v| v.norm_sqr()).sum();
            if lhs < self.c1 * zz * (T::one() - lit(1e-12)) {
                return Err(Error::InvalidArgument(format!(
                    "ellipticity fails at x = {x}: Re(A11 z, z) = {lhs} < c1 |z|^2 = {}",
                    self.c1 * zz
                )));
            }
        }
        Ok(())
    }
}

/// Uniform mesh of an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    pub nodes: Vec<T>,
}

impl<T: Real> Mesh<T> {
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn h(&self) -> T {
        self.nodes[1] - self.nodes[0]
    }

    pub fn a(&self) -> T {
        self.nodes[0]
    }

    pub fn b(&self) -> T {
        *self.nodes.last().unwrap()
    }
}

/// `N + 1` equispaced nodes on `(a, b)`, `N ≥ 2`.
pub fn build_mesh<T: Real>(a: T, b: T, n: usize) -> Result<Mesh<T>> {
    if !(b > a) {
        return Err(Error::InvalidArgument("mesh interval is degenerate".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("mesh needs N >= 2 elements, got {n}")));
    }
    let h = (b - a) / from_usize(n);
    let mut nodes: Vec<T> = (0..=n).map(|i| a + h * from_usize(i)).collect();
    nodes[n] = b;
    Ok(Mesh { nodes })
}

/// Elements for scale `eps`: `N = ceil(factor·(b−a)/eps)`, with at most `max_dof` unknowns.
pub fn mesh_elements_for<T: Real>(a: T, b: T, eps: T, ncomp: usize, factor: T, max_dof: usize) -> usize {
    let want = (factor * (b - a) / eps).ceil().to_usize().unwrap_or(usize::MAX);
    let cap = (max_dof / ncomp.max(1)).max(3);
    want.clamp(2, cap)
}

/// Quadrature panels per element so that a scale `finest` gets at least 8 panels.
pub fn element_refine<T: Real>(h: T, finest: T) -> usize {
    let r = (h / (finest / lit(8.0))).ceil().to_usize().unwrap_or(64);
    r.clamp(1, 64)
}

/// Index map from `(node, component)` to free unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofMap {
    pub nodes: usize,
    pub ncomp: usize,
    pub dirichlet: bool,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.free_nodes() * self.ncomp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn free_nodes(&self) -> usize {
        if self.dirichlet {
            self.nodes - 2
        } else {
            self.nodes
        }
    }

    pub fn index(&self, node: usize, comp: usize) -> Option<usize> {
        if self.dirichlet {
            if node == 0 || node + 1 == self.nodes {
                None
            } else {
                Some((node - 1) * self.ncomp + comp)
            }
        } else {
            Some(node * self.ncomp + comp)
        }
    }

    /// Half bandwidth of the block-tridiagonal pattern.
    pub fn bandwidth(&self) -> usize {
        2 * self.ncomp - 1
    }

    pub fn node_of(&self, dof: usize) -> usize {
        let k = dof / self.ncomp;
        if self.dirichlet {
            k + 1
        } else {
            k
        }
    }
}

/// Integrand shape of a form term: which factors carry derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    /// `∫ A u′ · v̄′`
    GradGrad,
    /// `∫ A u′ · v̄`
    GradVal,
    /// `∫ A u · v̄′`
    ValGrad,
    /// `∫ A u · v̄`
    ValVal,
}

/// Assembles `Σ_t sign_t ∫ A_t (∂^·u)(∂^·v̄)` with entry `(i, j) = form(φ_j, φ_i)`.
///
/// Element matrices are computed in parallel and summed in element order.
pub fn assemble_terms<T: Real>(
    mesh: &Mesh<T>,
    map: DofMap,
    terms: &[(TermKind, T, &CoefficientField<T>)],
    quad_refine: usize,
) -> BandMatrix<T> {
    let n = map.ncomp;
    let rule = composite_rule::<T>(quad_refine);
    let h = mesh.h();
    let inv_h = T::one() / h;
    let elements: Vec<[[CMat<T>; 2]; 2]> = (0..mesh.elements())
        .into_par_iter()
        .map(|e| {
            let xl = mesh.nodes[e];
            let mut blk = [[CMat::zeros(n), CMat::zeros(n)], [CMat::zeros(n), CMat::zeros(n)]];
            for (t, w) in &rule {
                let x = xl + h * *t;
                let phi = [T::one() - *t, *t];
                let dphi = [-inv_h, inv_h];
                let wh = *w * h;
                for (kind, sign, field) in terms {
                    let a = field.eval(&[x]);
                    for i in 0..2 {
                        for j in 0..2 {
                            let (vj, vi) = match kind {
                                TermKind::GradGrad => (dphi[j], dphi[i]),
                                TermKind::GradVal => (dphi[j], phi[i]),
                                TermKind::ValGrad => (phi[j], dphi[i]),
                                TermKind::ValVal => (phi[j], phi[i]),
                            };
                            blk[i][j].axpy(Complex::new(wh * *sign * vj * vi, T::zero()), &a);
                        }
                    }
                }
            }
            blk
        })
        .collect();
    let bw = map.bandwidth();
    let mut out = BandMatrix::zeros(map.len(), bw, bw);
    for (e, blk) in elements.iter().enumerate() {
        for (i, row) in blk.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        if let (Some(gi), Some(gj)) = (map.index(e + i, r), map.index(e + j, c)) {
                            out.add_to(gi, gj, m.get(r, c));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Assembled base form with Gram matrices on a mesh.
#[derive(Clone, Debug)]
pub struct DiscreteOperator<T> {
    pub mesh: Mesh<T>,
    pub map: DofMap,
    /// Matrix of `h`.
    pub base: BandMatrix<T>,
    pub stiffness: BandMatrix<T>,
    /// `L₂` Gram matrix.
    pub mass: BandMatrix<T>,
    /// `W₂¹` Gram matrix `stiffness + mass`.
    pub gram: BandMatrix<T>,
    pub gram_factor: BandCholesky<T>,
    pub mass_factor: BandCholesky<T>,
    pub quad_refine: usize,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn dof(&self) -> usize {
        self.map.len()
    }

    pub fn interpolate(&self, f: impl Fn(T) -> Vec<C<T>>) -> Vec<C<T>> {
        interpolate(&self.mesh, self.map, f)
    }

    /// Norm metric of `𝔙 = W₂¹`.
    pub fn metric_v(&self) -> Metric<'_, T> {
        Metric::direct(&self.gram, &self.gram_factor)
    }

    /// Norm metric of `𝔙*`, realized through `S⁻¹`.
    pub fn metric_vstar(&self) -> Metric<'_, T> {
        Metric::inverse(&self.gram, &self.gram_factor)
    }

    pub fn metric_l2(&self) -> Metric<'_, T> {
        Metric::direct(&self.mass, &self.mass_factor)
    }

    pub fn norm_h1(&self, u: &[C<T>]) -> T {
        dot(u, &self.gram.matvec(u)).re.max(T::zero()).sqrt()
    }

    pub fn norm_l2(&self, u: &[C<T>]) -> T {
        dot(u, &self.mass.matvec(u)).re.max(T::zero()).sqrt()
    }

    /// `(f* S⁻¹ f)^{1/2}`.
    pub fn norm_dual(&self, f: &[C<T>]) -> T {
        dot(f, &self.gram_factor.solve(f)).re.max(T::zero()).sqrt()
    }

    /// Matrix of the perturbation operator for a field triple.
    pub fn perturbation(&self, t: &FieldTriple<T>) -> Result<BandMatrix<T>> {
        assemble_perturbation(t, &self.mesh, self.map, self.quad_refine)
    }

    /// Mass matrix weighted by a matrix field: `∫ V u v̄`.
    pub fn weighted_mass(&self, v: &CoefficientField<T>) -> BandMatrix<T> {
        assemble_terms(&self.mesh, self.map, &[(TermKind::ValVal, T::one(), v)], self.quad_refine)
    }
}

/// A Hermitian positive definite norm `‖x‖² = x* W x` with `W = G` or `W = G⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct Metric<'a, T> {
    mat: &'a BandMatrix<T>,
    chol: &'a BandCholesky<T>,
    inverted: bool,
}

impl<'a, T: Real> Metric<'a, T> {
    pub fn direct(mat: &'a BandMatrix<T>, chol: &'a BandCholesky<T>) -> Self {
        Self { mat, chol, inverted: false }
    }

    pub fn inverse(mat: &'a BandMatrix<T>, chol: &'a BandCholesky<T>) -> Self {
        Self { mat, chol, inverted: true }
    }

    /// `W x`.
    pub fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        if self.inverted {
            self.chol.solve(x)
        } else {
            self.mat.matvec(x)
        }
    }

    /// `W⁻¹ x`.
    pub fn apply_inv(&self, x: &[C<T>]) -> Vec<C<T>> {
        if self.inverted {
            self.mat.matvec(x)
        } else {
            self.chol.solve(x)
        }
    }

    pub fn norm(&self, x: &[C<T>]) -> T {
        dot(x, &self.apply(x)).re.max(T::zero()).sqrt()
    }

    pub fn dim(&self) -> usize {
        self.mat.n()
    }
}

/// Nodal interpolant restricted to free unknowns.
pub fn interpolate<T: Real>(mesh: &Mesh<T>, map: DofMap, f: impl Fn(T) -> Vec<C<T>>) -> Vec<C<T>> {
    let mut out = vec![C::new(T::zero(), T::zero()); map.len()];
    for (k, x) in mesh.nodes.iter().enumerate() {
        let v = f(*x);
        for (c, vc) in v.iter().enumerate().take(map.ncomp) {
            if let Some(i) = map.index(k, c) {
                out[i] = *vc;
            }
        }
    }
    out
}

/// Load vector `(∫ f · φ_i)_i` over free unknowns.
pub fn assemble_load<T: Real>(
    mesh: &Mesh<T>,
    map: DofMap,
    f: impl Fn(T) -> Vec<C<T>>,
    quad_refine: usize,
) -> Vec<C<T>> {
    let rule = composite_rule::<T>(quad_refine);
    let h = mesh.h();
    let mut out = vec![C::new(T::zero(), T::zero()); map.len()];
    for e in 0..mesh.elements() {
        for (t, w) in &rule {
            let v = f(mesh.nodes[e] + h * *t);
            let phi = [T::one() - *t, *t];
            for (i, p) in phi.iter().enumerate() {
                for (comp, vc) in v.iter().enumerate().take(map.ncomp) {
                    if let Some(g) = map.index(e + i, comp) {
                        out[g] += *vc * (*w * h * *p);
                    }
                }
            }
        }
    }
    out
}

/// Assembles the base form, stiffness, mass and `W₂¹` Gram matrices.
pub fn assemble_base<T: Real>(spec: &OperatorSpec<T>, mesh: &Mesh<T>, quad_refine: usize) -> Result<DiscreteOperator<T>> {
    let n = spec.ncomp;
    let map = DofMap {
        nodes: mesh.nodes.len(),
        ncomp: n,
        dirichlet: spec.bc.is_dirichlet(),
    };
    if map.is_empty() {
        return Err(Error::InvalidArgument("mesh has no free unknowns".into()));
    }
    let mut base = assemble_terms(
        mesh,
        map,
        &[
            (TermKind::GradGrad, T::one(), &spec.a11),
            (TermKind::GradVal, T::one(), &spec.aplus),
            (TermKind::ValGrad, -T::one(), &spec.aminus),
            (TermKind::ValVal, T::one(), &spec.a0),
        ],
        quad_refine,
    );
    if let Boundary::Robin { ka, kb } = &spec.bc {
        let last = mesh.nodes.len() - 1;
        for r in 0..n {
            for c in 0..n {
                base.add_to(map.index(0, r).unwrap(), map.index(0, c).unwrap(), ka.get(r, c));
                base.add_to(map.index(last, r).unwrap(), map.index(last, c).unwrap(), kb.get(r, c));
            }
        }
    }
    let id = CoefficientField::identity(1, n);
    let stiffness = assemble_terms(mesh, map, &[(TermKind::GradGrad, T::one(), &id)], 1);
    let mass = assemble_terms(mesh, map, &[(TermKind::ValVal, T::one(), &id)], 1);
    let gram = stiffness.add_scaled(C::new(T::one(), T::zero()), &mass)?;
    let gram_factor = BandCholesky::factor(&gram)?;
    let mass_factor = BandCholesky::factor(&mass)?;
    Ok(DiscreteOperator {
        mesh: mesh.clone(),
        map,
        base,
        stiffness,
        mass,
        gram,
        gram_factor,
        mass_factor,
        quad_refine,
    })
}

/// `⟨Xu, v⟩ = (Q u′, v) − (P u, v′) + (V u, v)` on the given dof map.
pub fn assemble_perturbation<T: Real>(
    t: &FieldTriple<T>,
    mesh: &Mesh<T>,
    map: DofMap,
    quad_refine: usize,
) -> Result<BandMatrix<T>> {
    if t.dim() != 1 || t.q.len() != 1 || t.p.len() != 1 {
        return Err(Error::Dimension("assembly needs a one-dimensional field triple".into()));
    }
    if t.ncomp() != map.ncomp || !t.same_shape(t) {
        return Err(Error::Dimension(format!(
            "field triple has n = {} but the operator has n = {}",
            t.ncomp(),
            map.ncomp
        )));
    }
    Ok(assemble_terms(
        mesh,
        map,
        &[
            (TermKind::GradVal, T::one(), &t.q[0]),
            (TermKind::ValGrad, -T::one(), &t.p[0]),
            (TermKind::ValVal, T::one(), &t.v),
        ],
        quad_refine,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_vector, BandLu};

    fn c(x: f64) -> C<f64> {
        C::new(x, 0.0)
    }

    #[test]
    fn mesh_nodes() {
        assert_eq!(build_mesh(0.0, 1.0, 4).unwrap().nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(build_mesh(1.0, 2.0, 2).unwrap().nodes, vec![1.0, 1.5, 2.0]);
        assert!(build_mesh(0.0, 1.0, 1).is_err());
        assert!(build_mesh(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn textbook_stiffness_and_mass() {
        let mesh = build_mesh(0.0, 1.0, 8).unwrap();
        let spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
        let op = assemble_base(&spec, &mesh, 1).unwrap();
        let h = 0.125f64;
        assert!((op.base.get(2, 2).re - 2.0 / h).abs() < 1e-12);
        assert!((op.base.get(2, 3).re + 1.0 / h).abs() < 1e-12);
        assert!((op.mass.get(2, 2).re - 4.0 * h / 6.0).abs() < 1e-14);
        assert!((op.mass.get(2, 1).re - h / 6.0).abs() < 1e-14);
    }

    #[test]
    fn robin_adds_to_corners_only() {
        let mesh = build_mesh(0.0, 1.0, 6).unwrap();
        let k = 2.5;
        let rob = Boundary::Robin {
            ka: CMat::scalar(1, c(k)),
            kb: CMat::scalar(1, c(k)),
        };
        let r = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 1, rob), &mesh, 1).unwrap();
        let z = assemble_base(
            &OperatorSpec::laplacian(
                0.0,
                1.0,
                1,
                Boundary::Robin {
                    ka: CMat::zeros(1),
                    kb: CMat::zeros(1),
                },
            ),
            &mesh,
            1,
        )
        .unwrap();
        assert!((r.base.get(0, 0) - z.base.get(0, 0) - c(k)).norm() < 1e-12);
        assert!((r.base.get(6, 6) - z.base.get(6, 6) - c(k)).norm() < 1e-12);
        assert_eq!(r.base.get(3, 3), z.base.get(3, 3));
        // Interior of Robin equals Dirichlet.
        let d = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet), &mesh, 1).unwrap();
        for i in 1..6 {
            for j in 1..6 {
                assert_eq!(r.base.get(i, j), d.base.get(i - 1, j - 1));
            }
        }
    }

    #[test]
    fn unit_function_norms() {
        let mesh = build_mesh(0.0, 1.0, 10).unwrap();
        let rob = Boundary::Robin {
            ka: CMat::zeros(1),
            kb: CMat::zeros(1),
        };
        let op = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 1, rob), &mesh, 1).unwrap();
        let u = op.interpolate(|_| vec![c(1.0)]);
        assert!((op.norm_l2(&u) - 1.0).abs() < 1e-14);
        assert!((op.norm_h1(&u) - 1.0).abs() < 1e-14);
        let f = op.gram.matvec(&u);
        assert!((op.norm_dual(&f) - 1.0).abs() < 1e-12);
        assert_eq!(op.norm_h1(&vec![c(0.0); u.len()]), 0.0);
    }

    #[test]
    fn perturbation_with_unit_potential_is_mass() {
        let mesh = build_mesh(0.0, 1.0, 7).unwrap();
        let op = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 2, Boundary::Dirichlet), &mesh, 2).unwrap();
        let x = op.perturbation(&FieldTriple::from_v(CoefficientField::identity(1, 2))).unwrap();
        let diff = x.add_scaled(c(-1.0), &op.mass).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn p_term_is_negative_transpose_of_q_term() {
        let mesh = build_mesh(0.0, 1.0, 9).unwrap();
        let op = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet), &mesh, 1).unwrap();
        let mut tq = FieldTriple::zero(1, 1);
        tq.q[0] = CoefficientField::identity(1, 1);
        let mut tp = FieldTriple::zero(1, 1);
        tp.p[0] = CoefficientField::identity(1, 1);
        let xq = op.perturbation(&tq).unwrap();
        let xp = op.perturbation(&tp).unwrap();
        for i in 0..op.dof() {
            for j in 0..op.dof() {
                assert!((xp.get(i, j) + xq.get(j, i)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn divergence_triple_gives_zero_operator() {
        // Q = −P, V = Q′ with P compactly supported in (0,1).
        let bump = |x: f64| if x > 0.2 && x < 0.8 { ((x - 0.2) * (0.8 - x)).powi(3) } else { 0.0 };
        let dbump = |x: f64| {
            if x > 0.2 && x < 0.8 {
                let (a, b) = (x - 0.2, 0.8 - x);
                3.0 * (a * b).powi(2) * (b - a)
            } else {
                0.0
            }
        };
        let mut t = FieldTriple::zero(1, 1);
        t.p[0] = CoefficientField::real_scalar(1, 1, 1.0, move |x| bump(x[0]));
        t.q[0] = CoefficientField::real_scalar(1, 1, 1.0, move |x| -bump(x[0]));
        t.v = CoefficientField::real_scalar(1, 1, 1.0, move |x| -dbump(x[0]));
        let mesh = build_mesh(0.0, 1.0, 20).unwrap();
        let op = assemble_base(&OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet), &mesh, 8).unwrap();
        let x = op.perturbation(&t).unwrap();
        assert!(x.max_abs() < 1e-12, "{}", x.max_abs());
    }

    #[test]
    fn manufactured_solution_converges_at_rate_h() {
        use std::f64::consts::PI;
        let mut errs = Vec::new();
        let ns = [8usize, 16, 32, 64];
        for &n in &ns {
            let mesh = build_mesh(0.0, 1.0, n).unwrap();
            let mut spec = OperatorSpec::laplacian(0.0, 1.0, 1, Boundary::Dirichlet);
            spec.a0 = CoefficientField::identity(1, 1);
            let op = assemble_base(&spec, &mesh, 4).unwrap();
            let load = assemble_load(&mesh, op.map, |x| vec![c((1.0 + PI * PI) * (PI * x).sin())], 4);
            let u = BandLu::factor(&op.base).unwrap().solve(&load);
            let exact = op.interpolate(|x| vec![c((PI * x).sin())]);
            let err: Vec<C<f64>> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
            // Interpolant error dominates the H¹ error at rate h; measure against fine quadrature.
            let h1 = h1_error(&mesh, &u, |x| (PI * x).sin(), |x| PI * (PI * x).cos());
            errs.push(h1);
            assert!(op.norm_h1(&err) < h1 + 1e-12);
        }
        let slope = (errs[0] / errs[3]).ln() / (8.0f64).ln();
        assert!(slope >= 0.95, "slope {slope}");

        fn h1_error(mesh: &Mesh<f64>, u: &[C<f64>], ex: impl Fn(f64) -> f64, dex: impl Fn(f64) -> f64) -> f64 {
            let n = mesh.elements();
            let h = mesh.h();
            let val = |k: usize| if k == 0 || k == n { 0.0 } else { u[k - 1].re };
            let rule = composite_rule::<f64>(8);
            let mut s = 0.0;
            for e in 0..n {
                let (ul, ur) = (val(e), val(e + 1));
                for (t, w) in &rule {
                    let x = mesh.nodes[e] + h * t;
                    let uh = ul * (1.0 - t) + ur * t;
                    let duh = (ur - ul) / h;
                    s += w * h * ((uh - ex(x)).powi(2) + (duh - dex(x)).powi(2));
                }
            }
            s.sqrt()
        }
    }

    #[test]
    fn gram_matrices_are_hermitian_and_ordered() {
        let mesh = build_mesh(0.0, 2.0, 12).unwrap();
        let op = assemble_base(&OperatorSpec::laplacian(0.0, 2.0, 3, Boundary::Dirichlet), &mesh, 1).unwrap();
        assert!(op.gram.hermitian_defect() < 1e-12);
        assert!(op.mass.hermitian_defect() < 1e-12);
        let u = random_vector::<f64>(op.dof(), 3);
        assert!(op.norm_h1(&u) >= op.norm_l2(&u));
    }

    #[test]
    fn ellipticity_validation() {
        let mut spec = OperatorSpec::laplacian(0.0, 1.0, 2, Boundary::Dirichlet);
        assert!(spec.validate(1000, 1).is_ok());
        spec.c1 = 2.0;
        assert!(spec.validate(1000, 1).is_err());
    }
}
