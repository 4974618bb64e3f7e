//! Reference problems with closed-form optima, covering every cone kind.
//!
//! Used by the test suites as a correctness corpus for the solver.

use crate::cone::{packed_index, Cone};
use crate::error::Result;
use crate::problem::{AffineExpr, ConicProblem, ProblemBuilder};

pub struct ReferenceProblem {
    pub name: &'static str,
    pub problem: ConicProblem,
    /// Optimal value of `c'x`.
    pub optimum: f64,
}

fn psd_entries(start: usize, order: usize) -> Vec<AffineExpr> {
    // variables laid out in packed order already
    (0..order * (order + 1) / 2).map(|k| AffineExpr::var(start + k)).collect()
}

/// Coefficient that extracts `X_ij` from a scaled-packed variable.
fn packed_coef(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

pub fn reference_problems() -> Result<Vec<ReferenceProblem>> {
    let mut out = Vec::new();

    // min x s.t. x >= 1
    {
        let mut pb = ProblemBuilder::new();
        let x = pb.add_variables("x", 1).start;
        pb.add_objective(x, 1.0);
        pb.add_block(Cone::Nonneg(1), &[AffineExpr::var(x).plus(-1.0)])?;
        out.push(ReferenceProblem { name: "lp_bound", problem: pb.build()?, optimum: 1.0 });
    }

    // min -x1 - x2 s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0; vertex (8/5, 6/5)
    {
        let mut pb = ProblemBuilder::new();
        let x = pb.add_variables("x", 2);
        pb.add_objective(x.start, -1.0);
        pb.add_objective(x.start + 1, -1.0);
        pb.add_block(
            Cone::Nonneg(4),
            &[
                AffineExpr::constant(4.0).term(0, -1.0).term(1, -2.0),
                AffineExpr::constant(6.0).term(0, -3.0).term(1, -1.0),
                AffineExpr::var(0),
                AffineExpr::var(1),
            ],
        )?;
        out.push(ReferenceProblem { name: "lp_vertex", problem: pb.build()?, optimum: -2.8 });
    }

    // min x1 + 2 x2 + 3 x3 on the simplex
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("x", 3);
        for j in 0..3 {
            pb.add_objective(j, (j + 1) as f64);
        }
        pb.add_block(Cone::Zero(1), &[AffineExpr::constant(-1.0).term(0, 1.0).term(1, 1.0).term(2, 1.0)])?;
        pb.add_block(Cone::Nonneg(3), &[AffineExpr::var(0), AffineExpr::var(1), AffineExpr::var(2)])?;
        out.push(ReferenceProblem { name: "lp_simplex", problem: pb.build()?, optimum: 1.0 });
    }

    // min x + y s.t. ||(x, y)|| <= 1
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("xy", 2);
        pb.add_objective(0, 1.0);
        pb.add_objective(1, 1.0);
        pb.add_block(Cone::SecondOrder(3), &[AffineExpr::constant(1.0), AffineExpr::var(0), AffineExpr::var(1)])?;
        out.push(ReferenceProblem { name: "soc_disk", problem: pb.build()?, optimum: -std::f64::consts::SQRT_2 });
    }

    // distance from (3, 4) to the line x + y = 1
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("xyt", 3);
        pb.add_objective(2, 1.0);
        pb.add_block(
            Cone::SecondOrder(3),
            &[AffineExpr::var(2), AffineExpr::var(0).plus(-3.0), AffineExpr::var(1).plus(-4.0)],
        )?;
        pb.add_block(Cone::Zero(1), &[AffineExpr::constant(-1.0).term(0, 1.0).term(1, 1.0)])?;
        out.push(ReferenceProblem {
            name: "soc_point_line",
            problem: pb.build()?,
            optimum: 3.0 * std::f64::consts::SQRT_2,
        });
    }

    // max p s.t. e^p <= 5
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("p", 1);
        pb.add_objective(0, -1.0);
        pb.add_block(Cone::Exponential, &[AffineExpr::var(0), AffineExpr::constant(1.0), AffineExpr::constant(5.0)])?;
        out.push(ReferenceProblem { name: "exp_log5", problem: pb.build()?, optimum: -(5.0_f64.ln()) });
    }

    // min t s.t. e^x <= t, x >= 2
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("xt", 2);
        pb.add_objective(1, 1.0);
        pb.add_block(Cone::Exponential, &[AffineExpr::var(0), AffineExpr::constant(1.0), AffineExpr::var(1)])?;
        pb.add_block(Cone::Nonneg(1), &[AffineExpr::var(0).plus(-2.0)])?;
        out.push(ReferenceProblem { name: "exp_bound", problem: pb.build()?, optimum: 2.0_f64.exp() });
    }

    // max -x ln x: (r, x, 1) in K_exp, optimum 1/e at x = 1/e
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("rx", 2);
        pb.add_objective(0, -1.0);
        pb.add_block(Cone::Exponential, &[AffineExpr::var(0), AffineExpr::var(1), AffineExpr::constant(1.0)])?;
        out.push(ReferenceProblem { name: "exp_entropy", problem: pb.build()?, optimum: -(-1.0_f64).exp() });
    }

    // min Tr X s.t. X >= 0, X_11 = 1 (order 2)
    {
        let mut pb = ProblemBuilder::new();
        let x = pb.add_variables("X", 3).start;
        pb.add_objective(x + packed_index(0, 0), 1.0);
        pb.add_objective(x + packed_index(1, 1), 1.0);
        pb.add_block(Cone::Psd(2), &psd_entries(x, 2))?;
        pb.add_block(Cone::Zero(1), &[AffineExpr::var(x + packed_index(0, 0)).plus(-1.0)])?;
        out.push(ReferenceProblem { name: "psd_trace", problem: pb.build()?, optimum: 1.0 });
    }

    // min t s.t. t I - [[2, 1], [1, 2]] >= 0; lambda_max = 3
    {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("t", 1);
        pb.add_objective(0, 1.0);
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let mut entries = vec![AffineExpr::default(); 3];
        for j in 0..2 {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                let mut e = AffineExpr::constant(-m[i][j] * scale);
                if i == j {
                    e = e.term(0, 1.0);
                }
                entries[packed_index(i, j)] = e;
            }
        }
        pb.add_block(Cone::Psd(2), &entries)?;
        out.push(ReferenceProblem { name: "psd_lambda_max", problem: pb.build()?, optimum: 3.0 });
    }

    // max <C, X> s.t. Tr X = 1, X >= 0; optimum lambda_max(C) = 3
    {
        let c = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 0.5]];
        let mut pb = ProblemBuilder::new();
        let x = pb.add_variables("X", 6).start;
        for j in 0..3 {
            for i in 0..=j {
                // <C, X> = sum_ii C_ii X_ii + 2 sum_{i<j} C_ij X_ij
                let w = if i == j { c[i][j] } else { 2.0 * c[i][j] * packed_coef(i, j) };
                pb.add_objective(x + packed_index(i, j), -w);
            }
        }
        pb.add_block(Cone::Psd(3), &psd_entries(x, 3))?;
        let mut tr = AffineExpr::constant(-1.0);
        for i in 0..3 {
            tr = tr.term(x + packed_index(i, i), 1.0);
        }
        pb.add_block(Cone::Zero(1), &[tr])?;
        out.push(ReferenceProblem { name: "psd_rayleigh", problem: pb.build()?, optimum: -3.0 });
    }

    // min (t - x) + Tr X with e^x <= t, |x| <= 2, X >= 0, X_11 = 1: optimum 1 + 1
    {
        let mut pb = ProblemBuilder::new();
        let xt = pb.add_variables("xt", 2).start;
        let xm = pb.add_variables("X", 3).start;
        pb.add_objective(xt + 1, 1.0);
        pb.add_objective(xt, -1.0);
        pb.add_objective(xm + packed_index(0, 0), 1.0);
        pb.add_objective(xm + packed_index(1, 1), 1.0);
        pb.add_block(Cone::Exponential, &[AffineExpr::var(xt), AffineExpr::constant(1.0), AffineExpr::var(xt + 1)])?;
        pb.add_block(Cone::SecondOrder(2), &[AffineExpr::constant(2.0), AffineExpr::var(xt)])?;
        pb.add_block(Cone::Psd(2), &psd_entries(xm, 2))?;
        pb.add_block(Cone::Zero(1), &[AffineExpr::var(xm + packed_index(0, 0)).plus(-1.0)])?;
        pb.add_block(Cone::Nonneg(1), &[AffineExpr::var(xt + 1)])?;
        out.push(ReferenceProblem { name: "mixed_all_cones", problem: pb.build()?, optimum: 2.0 });
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_problems_cover_every_cone() {
        let probs = reference_problems().unwrap();
        assert_eq!(probs.len(), 12);
        let kinds = |f: fn(&Cone) -> bool| probs.iter().any(|p| p.problem.cones.iter().any(f));
        assert!(kinds(|c| matches!(c, Cone::Zero(_))));
        assert!(kinds(|c| matches!(c, Cone::Nonneg(_))));
        assert!(kinds(|c| matches!(c, Cone::SecondOrder(_))));
        assert!(kinds(|c| matches!(c, Cone::Exponential)));
        assert!(kinds(|c| matches!(c, Cone::Psd(_))));
    }
}
