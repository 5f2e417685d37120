mod common;

use common::{inequality_suite, oracle_suite};

#[test]
fn iterative_norms_match_dense_oracle() {
    let out = oracle_suite(12, 0x0ac1e);
    assert!(out.max_dof <= 40);
    eprintln!("{} checks, worst {:.3e} at {}", out.checks, out.worst, out.worst_label);
    assert!(out.worst <= 1e-8, "{}: relative discrepancy {:.3e}", out.worst_label, out.worst);
}

#[test]
fn triangle_adjoint_and_chain_inequalities() {
    let out = inequality_suite(30, 27);
    eprintln!("slacks {:.3e} {:.3e} {:.3e} {:.3e}", out.triangle, out.adjoint, out.chain_lower, out.chain_upper);
    assert!(out.triangle <= 1e-8, "triangle slack {:.3e}", out.triangle);
    assert!(out.adjoint <= 1e-8, "adjoint slack {:.3e}", out.adjoint);
    assert!(out.chain_lower <= 1e-8, "M1,-1 <= M1,0 slack {:.3e}", out.chain_lower);
    assert!(out.chain_upper <= 1e-8, "M1,0 <= sup slack {:.3e}", out.chain_upper);
}
