use dirsim_conic::corpus::reference_problems;
use dirsim_conic::{solve, AffineExpr, Cone, ProblemBuilder, SolveStatus, Solver, SolverSettings, WarmStart};

#[test]
fn infeasible_problem_detected() {
    // x >= 1 and x <= -1
    let mut pb = ProblemBuilder::new();
    pb.add_variables("x", 1);
    pb.add_objective(0, 1.0);
    pb.add_block(Cone::Nonneg(2), &[AffineExpr::var(0).plus(-1.0), AffineExpr::constant(-1.0).term(0, -1.0)])
        .unwrap();
    let sol = solve(&pb.build().unwrap(), 1e-7, 50_000).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_problem_detected() {
    // min x s.t. x <= 3
    let mut pb = ProblemBuilder::new();
    pb.add_variables("x", 1);
    pb.add_objective(0, 1.0);
    pb.add_block(Cone::Nonneg(1), &[AffineExpr::constant(3.0).term(0, -1.0)]).unwrap();
    let sol = solve(&pb.build().unwrap(), 1e-7, 50_000).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn infeasible_soc_detected() {
    // ||(x, 1)|| <= 0.5 has no solution
    let mut pb = ProblemBuilder::new();
    pb.add_variables("x", 1);
    pb.add_block(Cone::SecondOrder(3), &[AffineExpr::constant(0.5), AffineExpr::var(0), AffineExpr::constant(1.0)])
        .unwrap();
    let sol = solve(&pb.build().unwrap(), 1e-7, 50_000).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn iteration_cap_reported() {
    let rp = reference_problems().unwrap().into_iter().find(|p| p.name == "psd_rayleigh").unwrap();
    let sol = solve(&rp.problem, 1e-12, 3).unwrap();
    assert_eq!(sol.status, SolveStatus::MaxIter);
}

#[test]
fn optimal_solutions_satisfy_kkt() {
    for rp in reference_problems().unwrap() {
        let p = &rp.problem;
        let tol = 1e-7;
        let sol = solve(p, tol, 50_000).unwrap();
        let cx: f64 = p.c.iter().zip(&sol.x).map(|(a, b)| a * b).sum();
        let by: f64 = p.b.iter().zip(&sol.y).map(|(a, b)| a * b).sum();
        assert!((cx + by).abs() <= 10.0 * tol * (1.0 + cx.abs()), "{}: gap {}", rp.name, cx + by);
        let mut ax = vec![0.0; p.num_rows()];
        p.a.mul_vec(&sol.x, &mut ax);
        for i in 0..p.num_rows() {
            assert!((ax[i] + sol.s[i] - p.b[i]).abs() <= 10.0 * tol * (1.0 + p.b[i].abs()), "{}", rp.name);
        }
        for (cone, range) in p.cones.iter().zip(p.cone_ranges()) {
            assert!(cone.distance(&sol.s[range.clone()]) <= 10.0 * tol, "{}", rp.name);
            assert!(cone.dual_distance(&sol.y[range]) <= 10.0 * tol, "{}", rp.name);
        }
    }
}

#[test]
fn solve_is_deterministic() {
    for rp in reference_problems().unwrap() {
        let a = solve(&rp.problem, 1e-7, 50_000).unwrap();
        let b = solve(&rp.problem, 1e-7, 50_000).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.iterations, b.iterations);
    }
}

#[test]
fn warm_start_from_solution_converges_quickly() {
    for rp in reference_problems().unwrap() {
        let solver = Solver::new(&rp.problem, SolverSettings::default()).unwrap();
        let cold = solver.solve(None).unwrap();
        let warm = solver.solve(Some(&WarmStart::from(&cold))).unwrap();
        assert_eq!(warm.status, SolveStatus::Optimal, "{}", rp.name);
        assert!(warm.iterations <= cold.iterations, "{}: {} > {}", rp.name, warm.iterations, cold.iterations);
    }
}

#[test]
fn malformed_cone_rejected() {
    let mut pb = ProblemBuilder::new();
    pb.add_variables("x", 1);
    assert!(pb.add_block(Cone::Exponential, &[AffineExpr::var(0)]).is_err());
    assert!(pb.add_block(Cone::Psd(0), &[]).is_err());
}

#[test]
fn acceleration_reduces_total_iterations() {
    let mut plain_total = 0;
    let mut accel_total = 0;
    for rp in reference_problems().unwrap() {
        let plain = SolverSettings { anderson_memory: 0, ..SolverSettings::default() };
        let a = Solver::new(&rp.problem, plain).unwrap().solve(None).unwrap();
        let b = Solver::new(&rp.problem, SolverSettings::default()).unwrap().solve(None).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal, "{}", rp.name);
        assert_eq!(b.status, SolveStatus::Optimal, "{}", rp.name);
        assert!((a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)) < 1e-4, "{}", rp.name);
        plain_total += a.iterations;
        accel_total += b.iterations;
    }
    assert!(accel_total < plain_total, "{accel_total} >= {plain_total}");
}
