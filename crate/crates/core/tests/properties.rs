use std::sync::Arc;

use frac_ocp::analysis::{fit_rate, FitWindow};
use frac_ocp::assembly::FracOperator;
use frac_ocp::ocp::{project_control, ControlBounds, Problem, ProblemConfig};
use frac_ocp::pde::{positive_part, solve_state};
use frac_ocp::{Mesh, NodalFunction, P0Function};
use proptest::prelude::*;

fn sorted_nodes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 2..30).prop_map(|gaps| {
        let mut x = vec![-0.5];
        let total: f64 = gaps.iter().sum();
        for g in &gaps {
            let last = *x.last().unwrap();
            x.push(last + g / total);
        }
        *x.last_mut().unwrap() = 0.5;
        x
    })
}

fn operator(n: usize, s: f64) -> (Arc<Mesh>, FracOperator) {
    let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n).unwrap());
    let op = FracOperator::assemble(mesh.clone(), s).unwrap();
    (mesh, op)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mesh_widths_sum_to_length(nodes in sorted_nodes()) {
        let mesh = Mesh::from_nodes(nodes.clone()).unwrap();
        let sum: f64 = mesh.widths().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(mesh.widths().iter().all(|h| *h > 0.0));
        prop_assert_eq!(mesh.n_cells() + 1, nodes.len());
        let fine = mesh.refine();
        prop_assert_eq!(fine.n_cells(), 2 * mesh.n_cells());
        prop_assert!(mesh.is_nested_in(&fine));
    }

    #[test]
    fn positive_part_is_monotone(
        vals in prop::collection::vec(-1.0f64..1.0, 3..30),
        bump in prop::collection::vec(0.0f64..0.5, 30),
    ) {
        let n = vals.len() - 1;
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n).unwrap());
        let w = NodalFunction::new(mesh.clone(), vals.clone()).unwrap();
        let raised: Vec<f64> = vals.iter().zip(&bump).map(|(v, b)| v + b).collect();
        let w2 = NodalFunction::new(mesh, raised).unwrap();
        let (p, q) = (positive_part(&w), positive_part(&w2));
        prop_assert!(q.l1 >= p.l1 - 1e-15);
        prop_assert!(q.l2 >= p.l2 - 1e-15);
        for (a, b) in p.load.iter().zip(&q.load) {
            prop_assert!(*b >= *a - 1e-15);
        }
    }

    #[test]
    fn positive_part_of_nonnegative_is_identity(vals in prop::collection::vec(0.0f64..1.0, 3..30)) {
        let n = vals.len() - 1;
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, n).unwrap());
        let h = 1.0 / n as f64;
        let w = NodalFunction::new(mesh, vals.clone()).unwrap();
        let l1: f64 = vals.windows(2).map(|v| 0.5 * h * (v[0] + v[1])).sum();
        prop_assert!((positive_part(&w).l1 - l1).abs() < 1e-13);
    }

    #[test]
    fn projection_is_idempotent(vals in prop::collection::vec(-20.0f64..20.0, 2..30), lo in -5.0f64..0.0, width in 0.1f64..10.0) {
        let mesh = Arc::new(Mesh::uniform(-0.5, 0.5, vals.len()).unwrap());
        let z = P0Function::new(mesh, vals).unwrap();
        let b = Some(ControlBounds::new(lo, lo + width).unwrap());
        let p = project_control(&z, b);
        prop_assert!(p.values().iter().all(|v| *v >= lo && *v <= lo + width));
        prop_assert_eq!(project_control(&p, b).into_values(), p.values().to_vec());
        prop_assert_eq!(project_control(&z, None).into_values(), z.values().to_vec());
    }

    #[test]
    fn fit_rate_is_invariant_under_scaling(p in -3.0f64..3.0, c in 0.01f64..100.0, k in 0.1f64..10.0) {
        let xs: Vec<f64> = (0..6).map(|i| 2f64.powi(-i)).collect();
        let errs: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
        let fit = fit_rate(&xs, &errs, FitWindow::All).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
        let fit2 = fit_rate(&scaled, &errs, FitWindow::All).unwrap();
        prop_assert!((fit2.slope - p).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn state_solve_is_linear(
        a in prop::collection::vec(-2.0f64..2.0, 12),
        b in prop::collection::vec(-2.0f64..2.0, 12),
        t in -3.0f64..3.0,
    ) {
        let (mesh, op) = operator(12, 0.6);
        let za = P0Function::new(mesh.clone(), a.clone()).unwrap();
        let zb = P0Function::new(mesh.clone(), b.clone()).unwrap();
        let zc = P0Function::new(mesh, a.iter().zip(&b).map(|(x, y)| x + t * y).collect()).unwrap();
        let (ua, ub, uc) = (solve_state(&op, &za).unwrap(), solve_state(&op, &zb).unwrap(), solve_state(&op, &zc).unwrap());
        for i in 0..uc.values().len() {
            let lin = ua.values()[i] + t * ub.values()[i];
            prop_assert!((uc.values()[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn penalized_objective_is_convex(
        a in prop::collection::vec(-3.0f64..3.0, 10),
        b in prop::collection::vec(-3.0f64..3.0, 10),
        t in 0.0f64..1.0,
        gamma in 0.1f64..1e4,
    ) {
        let (mesh, op) = operator(10, 0.5);
        let cfg = ProblemConfig { s: 0.5, ..Default::default() };
        let problem = Problem::new(&cfg, &op).unwrap();
        let za = P0Function::new(mesh.clone(), a.clone()).unwrap();
        let zb = P0Function::new(mesh.clone(), b.clone()).unwrap();
        let zt = P0Function::new(mesh, a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect()).unwrap();
        let (ja, jb, jt) = (
            problem.objective(&za, gamma).unwrap(),
            problem.objective(&zb, gamma).unwrap(),
            problem.objective(&zt, gamma).unwrap(),
        );
        let chord = (1.0 - t) * ja + t * jb;
        prop_assert!(jt <= chord + 1e-12 * (1.0 + chord.abs()));
    }

    #[test]
    fn penalty_only_adds(vals in prop::collection::vec(-3.0f64..3.0, 10), gamma in 0.1f64..1e5) {
        let (mesh, op) = operator(10, 0.4);
        let cfg = ProblemConfig::default();
        let problem = Problem::new(&cfg, &op).unwrap();
        let z = P0Function::new(mesh, vals).unwrap();
        let jg = problem.objective(&z, gamma).unwrap();
        let j = problem.objective_plain(&z).unwrap();
        prop_assert!(jg >= j);
    }
}
