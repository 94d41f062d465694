use std::sync::Arc;

use frac_ocp::analysis::{getoor_constant, semismooth_newton_oracle};
use frac_ocp::assembly::{kappa, normalization_constant, FracOperator};
use frac_ocp::ocp::{kkt_residual, solve_fixed_gamma, ControlBounds, Method, ProblemConfig};
use frac_ocp::{Mesh, P0Function};

fn tgamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[test]
fn normalization_constant_matches_gamma_formula() {
    for s in [0.26, 0.3, 0.4, 0.5, 0.6, 0.75, 0.9, 0.99] {
        let want = s * 4f64.powf(s) * tgamma(0.5 + s) / (std::f64::consts::PI.sqrt() * tgamma(1.0 - s));
        let got = normalization_constant(s).unwrap();
        assert!((got - want).abs() <= 1e-13 * want, "s = {s}: {got} vs {want}");
    }
    // the half-Laplacian constant is 1/π
    assert!((normalization_constant(0.5).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn getoor_constant_matches_gamma_formula() {
    for s in [0.3, 0.5, 0.7] {
        let want = 4f64.powf(-s) * tgamma(0.5) / (tgamma(0.5 + s) * tgamma(1.0 + s));
        assert!((getoor_constant(s).unwrap() - want).abs() < 1e-13 * want);
    }
}

/// `C ∫_{ℝ∖(a,b)} |x - y|^{-1-2s} dy` with the substitution `y = x ± t⁻¹ᐟ²ˢ`
/// avoided: integrate each half-line in `u = 1/(y-x)` on a midpoint rule.
fn exterior_mass(a: f64, b: f64, s: f64, x: f64) -> f64 {
    let side = |d: f64| {
        // ∫_d^∞ t^{-1-2s} dt = ∫_0^{1/d} u^{2s-1} du
        let m = 400_000;
        let top = 1.0 / d;
        let h = top / m as f64;
        (0..m).map(|k| ((k as f64 + 0.5) * h).powf(2.0 * s - 1.0) * h).sum::<f64>()
    };
    normalization_constant(s).unwrap() * (side(x - a) + side(b - x))
}

#[test]
fn kappa_matches_exterior_integral() {
    let mesh = Mesh::uniform(-0.5, 0.5, 4).unwrap();
    for s in [0.6, 0.8] {
        for x in [-0.3, 0.0, 0.41] {
            let k = kappa(&mesh, s, x).unwrap();
            let q = exterior_mass(-0.5, 0.5, s, x);
            assert!((k - q).abs() < 1e-4 * k, "s = {s}, x = {x}: {k} vs {q}");
        }
    }
    assert!(kappa(&mesh, 0.5, -0.5).is_err());
}

#[test]
fn stiffness_annihilates_nothing_and_is_positive() {
    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 24).unwrap());
    for s in [0.3, 0.7] {
        let op = FracOperator::assemble(mesh.clone(), s).unwrap();
        let ones = vec![1.0; op.n_dofs()];
        assert!(op.energy(&ones) > 0.0);
        let au = op.apply_stiffness(&ones);
        let back = op.solve(&au);
        let err = back.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}

#[test]
fn optimizers_agree_with_the_oracle_when_bounds_bind() {
    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, 16).unwrap());
    let op = FracOperator::assemble(mesh.clone(), 0.5).unwrap();
    // tight upper bound so that some cells sit on it
    let cfg = ProblemConfig {
        s: 0.5,
        alpha: 1e-3,
        control_bounds: Some(ControlBounds::new(0.0, 0.5).unwrap()),
        opt_tol: 1e-11,
        max_iter: 50_000,
        ..Default::default()
    };
    let z0 = P0Function::zeros(mesh.clone());
    let oracle = semismooth_newton_oracle(&cfg, &op, 1e3, &z0).unwrap();
    assert!(oracle.converged);
    assert!(oracle.z.values().iter().any(|v| *v == 0.5));
    for method in [Method::SemismoothNewton, Method::ProjectedGradient] {
        let sol = solve_fixed_gamma(&ProblemConfig { method, ..cfg.clone() }, &op, 1e3, &z0).unwrap();
        assert!(sol.converged, "{method}");
        let d: f64 =
            sol.z.values().iter().zip(oracle.z.values()).map(|(a, b)| (a - b).powi(2) / 16.0).sum::<f64>().sqrt();
        assert!(d < 1e-7, "{method}: {d:e}");
        assert!(kkt_residual(&cfg, &op, &sol.z, 1e3).unwrap() <= cfg.opt_tol);
    }
}
