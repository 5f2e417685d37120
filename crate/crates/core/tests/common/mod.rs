//! Dense reference computations and random instances shared by the integration tests.
#![allow(dead_code)]

use homlab::families::FieldTriple;
use homlab::fem::{assemble_base, build_mesh, Boundary, DiscreteOperator, OperatorSpec};
use homlab::linalg::{BandMatrix, IterOptions, C};
use homlab::norms::{find_lambda, norm_m10, norm_m1m1, norm_v_to_vstar};
use homlab::resolvent::ResolventContext;
use homlab::{CMat, Field};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = DMatrix<Complex<f64>>;

pub fn dense(b: &BandMatrix<f64>) -> Dense {
    let rows = b.to_dense();
    DMatrix::from_fn(b.n(), b.n(), |i, j| rows[i][j])
}

pub fn dvec(x: &[C<f64>]) -> DVector<Complex<f64>> {
    DVector::from_column_slice(x)
}

pub fn inverse(a: &Dense) -> Dense {
    a.clone().try_inverse().expect("singular dense matrix")
}

fn lower_factor(w: &Dense) -> Dense {
    w.clone().cholesky().expect("metric is not positive definite").l()
}

/// `sup ‖Bx‖_out / ‖x‖_in` with `‖x‖²_W = x* W x`, as `σ_max(L_outᴴ B L_in⁻ᴴ)` for `W = L Lᴴ`.
pub fn induced_norm(b: &Dense, w_in: &Dense, w_out: &Dense) -> f64 {
    let l_in = lower_factor(w_in);
    let l_out = lower_factor(w_out);
    let l_in_inv_h = inverse(&l_in).adjoint();
    let m = l_out.adjoint() * b * l_in_inv_h;
    m.singular_values().max()
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_cmat(n: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
    CMat::from_fn(n, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// `Σ_k A_k cos(ω_k x + φ_k)` with random complex `A_k` and frequencies up to 25.
pub fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Field {
    let terms: Vec<(CMat<f64>, f64, f64)> = (0..3)
        .map(|_| (random_cmat(n, rng), rng.random_range(0.0..25.0), rng.random_range(0.0..6.3)))
        .collect();
    let sup = terms.iter().map(|(a, _, _)| a.abs_sum()).sum();
    Field::new(1, n, sup, move |x| {
        let mut m = CMat::zeros(n);
        for (a, w, p) in &terms {
            m.axpy(C::new((w * x[0] + p).cos(), 0.0), a);
        }
        m
    })
}

pub fn random_triple(n: usize, rng: &mut ChaCha8Rng) -> FieldTriple<f64> {
    FieldTriple {
        v: random_field(n, rng),
        q: vec![random_field(n, rng)],
        p: vec![random_field(n, rng)],
    }
}

pub fn scaled_triple(t: &FieldTriple<f64>, c: f64) -> FieldTriple<f64> {
    let c = C::new(c, 0.0);
    FieldTriple {
        v: t.v.scale(c),
        q: t.q.iter().map(|f| f.scale(c)).collect(),
        p: t.p.iter().map(|f| f.scale(c)).collect(),
    }
}

pub fn sum_triple(a: &FieldTriple<f64>, b: &FieldTriple<f64>) -> FieldTriple<f64> {
    FieldTriple {
        v: a.v.add(&b.v).unwrap(),
        q: a.q.iter().zip(&b.q).map(|(x, y)| x.add(y).unwrap()).collect(),
        p: a.p.iter().zip(&b.p).map(|(x, y)| x.add(y).unwrap()).collect(),
    }
}

/// `−u″ + u` on `(0, 1)` with `n` components.
pub fn small_operator(n: usize, elements: usize, robin: bool) -> DiscreteOperator<f64> {
    let bc = if robin {
        Boundary::Robin {
            ka: CMat::scalar(n, C::new(0.5, 0.0)),
            kb: CMat::scalar(n, C::new(1.5, 0.0)),
        }
    } else {
        Boundary::Dirichlet
    };
    let mut spec = OperatorSpec::laplacian(0.0, 1.0, n, bc);
    spec.a0 = Field::identity(1, n);
    let mesh = build_mesh(0.0, 1.0, elements).unwrap();
    assemble_base(&spec, &mesh, 8).unwrap()
}

pub fn tight() -> IterOptions {
    IterOptions {
        tol: 1e-13,
        ..IterOptions::default()
    }
}

/// Largest relative discrepancy between the iterative norms and the dense oracle, with labels.
pub struct OracleOutcome {
    pub worst: f64,
    pub worst_label: String,
    pub checks: usize,
    pub max_dof: usize,
}

impl OracleOutcome {
    fn record(&mut self, label: String, got: f64, want: f64) {
        self.record_error(label, relative(got, want));
    }

    fn record_error(&mut self, label: String, r: f64) {
        self.checks += 1;
        if r > self.worst || r.is_nan() {
            self.worst = if r.is_nan() { f64::INFINITY } else { r };
            self.worst_label = label;
        }
    }
}

fn dense_neumann(g0inv: &Dense, l: &Dense, n: usize) -> Dense {
    let step = -(l * g0inv);
    let mut term = g0inv.clone();
    let mut sum = g0inv.clone();
    for _ in 0..n {
        term = &term * &step;
        sum += &term;
    }
    sum
}

/// Compares every induced norm and Neumann quantity on `cases` random instances with dof ≤ 40.
pub fn oracle_suite(cases: usize, seed: u64) -> OracleOutcome {
    let mut out = OracleOutcome {
        worst: 0.0,
        worst_label: String::new(),
        checks: 0,
        max_dof: 0,
    };
    let opts = tight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = 1 + case % 3;
        let robin = case % 2 == 1;
        let elements = (if robin { 39 } else { 41 }) / n - 1;
        let op = small_operator(n, elements, robin);
        assert!(op.dof() <= 40);
        out.max_dof = out.max_dof.max(op.dof());
        let t0 = random_triple(n, &mut rng);
        let t1 = scaled_triple(&random_triple(n, &mut rng), 0.15);
        let teps = sum_triple(&t0, &t1);

        let s = dense(&op.gram);
        let sinv = inverse(&s);
        let m = dense(&op.mass);
        let tag = |what: &str| format!("case {case} (n={n}, robin={robin}): {what}");

        let x0 = op.perturbation(&t0).unwrap();
        let xeps = op.perturbation(&teps).unwrap();
        out.record(
            tag("norm_v_to_vstar"),
            norm_v_to_vstar(&x0, &op, &opts).unwrap().value,
            induced_norm(&dense(&x0), &s, &sinv),
        );
        out.record(
            tag("norm_m1m1"),
            norm_m1m1(&t0.v, &op, &opts).unwrap().value,
            induced_norm(&dense(&op.weighted_mass(&t0.v)), &s, &sinv),
        );
        let qq = t0.q[0].mul_left(&t0.q[0].adjoint()).unwrap();
        let g = dense(&op.weighted_mass(&qq));
        let li = inverse(&lower_factor(&s));
        let m10 = (&li * &g * li.adjoint()).singular_values().max().sqrt();
        out.record(tag("norm_m10"), norm_m10(&t0.q[0], &op, &opts).unwrap().value, m10);

        let one = C::new(1.0, 0.0);
        let a0 = op.base.add_scaled(one, &x0).unwrap();
        let aeps = op.base.add_scaled(one, &xeps).unwrap();
        let lambda = find_lambda(&[(&op, &a0), (&op, &aeps)], &opts).unwrap().lambda0 - 1.0;
        let ctx = ResolventContext::new(op.clone(), &x0, &xeps, lambda).unwrap();
        let g0inv = inverse(&dense(&ctx.g0));
        let gepsinv = inverse(&dense(&ctx.geps));
        let l = dense(&ctx.l);
        let diff = &gepsinv - &g0inv;

        out.record(tag("kappa"), ctx.kappa(&opts).unwrap().value, induced_norm(&diff, &sinv, &s));
        out.record(tag("r0_norm"), ctx.r0_norm(&opts).unwrap().value, induced_norm(&g0inv, &sinv, &s));
        out.record(tag("l_norm"), ctx.l_norm(&opts).unwrap().value, induced_norm(&l, &s, &sinv));
        out.record(tag("lr0_norm"), ctx.lr0_norm(&opts).unwrap().value, induced_norm(&(&l * &g0inv), &sinv, &sinv));
        out.record(
            tag("l2_to_h1_difference"),
            ctx.l2_to_h1_difference(&opts).unwrap().value,
            induced_norm(&(&diff * &m), &m, &s),
        );
        let f: Vec<C<f64>> = (0..op.dof()).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        for nn in 0..4 {
            let rn = dense_neumann(&g0inv, &l, nn);
            out.record(
                tag(&format!("truncation_error({nn})")),
                ctx.truncation_error(nn, &opts).unwrap().value,
                induced_norm(&(&gepsinv - &rn), &sinv, &s),
            );
            let want = &rn * dvec(&f);
            let got = dvec(&ctx.neumann_sum(nn, &f));
            out.record_error(tag(&format!("neumann_sum({nn})")), (&got - &want).norm() / want.norm());
            let want = rn.adjoint() * dvec(&f);
            let got = dvec(&ctx.neumann_sum_adjoint(nn, &f));
            out.record_error(tag(&format!("neumann_sum_adjoint({nn})")), (&got - &want).norm() / want.norm());
        }
    }
    out
}

/// Slack of the triangle, adjoint and chain inequalities over random instances.
pub struct InequalityOutcome {
    /// Largest `(lhs − rhs) / rhs` seen per inequality.
    pub triangle: f64,
    pub adjoint: f64,
    pub chain_lower: f64,
    pub chain_upper: f64,
    pub instances: usize,
}

impl InequalityOutcome {
    pub fn worst(&self) -> f64 {
        self.triangle.max(self.adjoint).max(self.chain_lower).max(self.chain_upper)
    }
}

pub fn inequality_suite(instances: usize, seed: u64) -> InequalityOutcome {
    let opts = tight();
    let mut out = InequalityOutcome {
        triangle: f64::NEG_INFINITY,
        adjoint: f64::NEG_INFINITY,
        chain_lower: f64::NEG_INFINITY,
        chain_upper: f64::NEG_INFINITY,
        instances,
    };
    let ops: Vec<_> = (1..=3).map(|n| small_operator(n, 24, n == 2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        let n = 1 + i % 3;
        let op = &ops[n - 1];
        let t = random_triple(n, &mut rng);
        let sn = (n as f64).sqrt();
        let x = norm_v_to_vstar(&op.perturbation(&t).unwrap(), op, &opts).unwrap().value;
        let q = norm_m10(&t.q[0], op, &opts).unwrap().value;
        let p = norm_m10(&t.p[0], op, &opts).unwrap().value;
        let v1 = norm_m1m1(&t.v, op, &opts).unwrap().value;
        let v0 = norm_m10(&t.v, op, &opts).unwrap().value;
        let qa = norm_m10(&t.q[0].adjoint(), op, &opts).unwrap().value;
        let gap = |lhs: f64, rhs: f64| (lhs - rhs) / rhs;
        out.triangle = out.triangle.max(gap(x, sn * q + p + v1));
        out.adjoint = out.adjoint.max(gap(qa, sn * q));
        out.chain_lower = out.chain_lower.max(gap(v1, v0));
        out.chain_upper = out.chain_upper.max(gap(v0, t.v.sup_bound()));
    }
    out
}
