//! Problem data in the standard form
//!
//! ```text
//! minimize    c'x
//! subject to  A x + s = b,  s in K = K_1 x ... x K_p
//! ```
//!
//! `A` is kept as a compressed-row sparse matrix. [`ProblemBuilder`] offers an
//! affine-expression interface: pushing the expression `g'x + h` into a cone
//! block stores the row `-g` with right-hand side `h`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use crate::cone::Cone;
use crate::error::{ConicError, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nrows];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(ConicError::Dimension(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `out = A' y`
    pub fn mul_t_vec(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }
}

/// A conic program in standard form.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    /// Named variable ranges, for diagnostics only.
    pub variable_map: BTreeMap<String, Range<usize>>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.ncols != self.c.len() {
            return Err(ConicError::Dimension(format!(
                "A has {} columns but c has length {}",
                self.a.ncols,
                self.c.len()
            )));
        }
        if self.a.nrows != self.b.len() {
            return Err(ConicError::Dimension(format!(
                "A has {} rows but b has length {}",
                self.a.nrows,
                self.b.len()
            )));
        }
        for cone in &self.cones {
            cone.validate()?;
        }
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != self.b.len() {
            return Err(ConicError::ConeRowMismatch { cones: total, rows: self.b.len() });
        }
        if self.c.iter().any(|x| !x.is_finite()) {
            return Err(ConicError::NonFinite("c"));
        }
        if self.b.iter().any(|x| !x.is_finite()) {
            return Err(ConicError::NonFinite("b"));
        }
        if self.a.values.iter().any(|x| !x.is_finite()) {
            return Err(ConicError::NonFinite("A"));
        }
        Ok(())
    }

    /// Row range of each cone block, in order.
    pub fn cone_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.cones
            .iter()
            .map(|k| {
                let r = start..start + k.dim();
                start += k.dim();
                r
            })
            .collect()
    }

    /// Plain-text dump for cross-checking against reference solvers.
    ///
    /// Layout: a `dims` line, one `cone` line per block, `c` and `b` entries,
    /// then `A` triplets (zero-based).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dims {} {} {}", self.num_rows(), self.num_vars(), self.a.nnz());
        for cone in &self.cones {
            let _ = writeln!(out, "cone {}", cone.short_name());
        }
        for (name, range) in &self.variable_map {
            let _ = writeln!(out, "var {} {} {}", name, range.start, range.end);
        }
        for (j, v) in self.c.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "c {j} {v:e}");
            }
        }
        for (i, v) in self.b.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "b {i} {v:e}");
            }
        }
        for (i, j, v) in self.a.triplets() {
            let _ = writeln!(out, "A {i} {j} {v:e}");
        }
        out
    }
}

/// Affine expression `sum_j coef_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn term(mut self, index: usize, coef: f64) -> Self {
        self.terms.push((index, coef));
        self
    }

    pub fn plus(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn add(&mut self, other: &AffineExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(j, v)| (j, v * scale)));
        self.constant += other.constant * scale;
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(j, v)| (j, v * scale)).collect(),
            constant: self.constant * scale,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, v)| v * x[j]).sum::<f64>()
    }
}

/// Incremental construction of a [`ConicProblem`].
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    n: usize,
    c: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
    variable_map: BTreeMap<String, Range<usize>>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` variables under `name`; returns their index range.
    pub fn add_variables(&mut self, name: &str, count: usize) -> Range<usize> {
        let range = self.n..self.n + count;
        self.n += count;
        self.c.resize(self.n, 0.0);
        self.variable_map.insert(name.to_string(), range.clone());
        range
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `coef * x_j` to the minimization objective.
    pub fn add_objective(&mut self, index: usize, coef: f64) {
        self.c[index] += coef;
    }

    /// Constrains the stacked expressions to lie in `cone`.
    pub fn add_block(&mut self, cone: Cone, exprs: &[AffineExpr]) -> Result<Range<usize>> {
        cone.validate()?;
        if exprs.len() != cone.dim() {
            return Err(ConicError::InvalidCone(format!(
                "{} expects {} expressions, got {}",
                cone.short_name(),
                cone.dim(),
                exprs.len()
            )));
        }
        let start = self.b.len();
        for (k, e) in exprs.iter().enumerate() {
            let row = start + k;
            for &(j, v) in &e.terms {
                if j >= self.n {
                    return Err(ConicError::Dimension(format!("variable {j} not declared")));
                }
                self.triplets.push((row, j, -v));
            }
            self.b.push(e.constant);
        }
        self.cones.push(cone);
        Ok(start..self.b.len())
    }

    pub fn build(self) -> Result<ConicProblem> {
        let a = SparseMatrix::from_triplets(self.b.len(), self.n, &self.triplets)?;
        let p = ConicProblem { c: self.c, a, b: self.b, cones: self.cones, variable_map: self.variable_map };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_stores_negated_rows() {
        let mut pb = ProblemBuilder::new();
        let x = pb.add_variables("x", 2);
        pb.add_objective(x.start, 1.0);
        pb.add_block(Cone::Nonneg(1), &[AffineExpr::var(0).term(1, 2.0).plus(-1.0)]).unwrap();
        let p = pb.build().unwrap();
        assert_eq!(p.a.triplets(), vec![(0, 0, -1.0), (0, 1, -2.0)]);
        assert_eq!(p.b, vec![-1.0]);
        assert!(p.dump().starts_with("dims 1 2 2\ncone nonneg 1\n"));
    }

    #[test]
    fn cone_row_mismatch_detected() {
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0)]).unwrap();
        let p = ConicProblem {
            c: vec![1.0],
            a,
            b: vec![0.0, 0.0],
            cones: vec![Cone::Nonneg(1)],
            variable_map: BTreeMap::new(),
        };
        assert_eq!(p.validate(), Err(ConicError::ConeRowMismatch { cones: 1, rows: 2 }));
    }

    #[test]
    fn nan_rejected() {
        let mut pb = ProblemBuilder::new();
        pb.add_variables("x", 1);
        pb.add_objective(0, f64::NAN);
        pb.add_block(Cone::Zero(1), &[AffineExpr::var(0)]).unwrap();
        assert_eq!(pb.build().unwrap_err(), ConicError::NonFinite("c"));
    }

    #[test]
    fn sparse_products() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0), (1, 1, 4.0)])
            .unwrap();
        let mut out = vec![0.0; 2];
        a.mul_vec(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, vec![7.0, 6.0]);
        let mut out = vec![0.0; 3];
        a.mul_t_vec(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![1.0, 3.0, 2.0]);
    }
}
