//! Affine symmetric-matrix maps encoding the Lyapunov–Krasovskii stability
//! and stabilization conditions for delay systems.
//!
//! A problem is a set of named matrix variables plus affine constraints,
//! each required strictly negative or strictly positive definite. Builders
//! cover constant-delay and interval-delay stability (including the
//! parameter-dependent refinement and delay partitioning) and the
//! free-weighting-matrix stabilization family with gain extraction
//! `gain = X⁻¹G`.

mod builders;

pub use builders::*;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("delays must satisfy {0}")]
    DelayOrder(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Block-selector basis `v₁ … v_k`, each `kn × n` with the identity at one
/// block row. Satisfies `vᵢᵀvⱼ = δᵢⱼ I` and `Σ vᵢ vᵢᵀ = I`.
#[derive(Debug, Clone, Copy)]
pub struct SelectorBasis {
    pub n: usize,
    pub k: usize,
}

impl SelectorBasis {
    pub fn new(n: usize, k: usize) -> Self {
        SelectorBasis { n, k }
    }

    /// Selector for block `i` (1-indexed to match the usual notation).
    pub fn v(&self, i: usize) -> Mat {
        assert!(i >= 1 && i <= self.k, "selector index out of range");
        let mut m = Mat::zeros(self.k * self.n, self.n);
        for r in 0..self.n {
            m[((i - 1) * self.n + r, r)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.k * self.n
    }
}

/// Structure of a matrix variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Symmetric, constrained positive definite by an accompanying
    /// constraint.
    SymmetricPd(usize),
    Symmetric(usize),
    General(usize, usize),
    Scalar,
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::SymmetricPd(n) | VarKind::Symmetric(n) => (n, n),
            VarKind::General(r, c) => (r, c),
            VarKind::Scalar => (1, 1),
        }
    }

    /// Number of free scalars in the block.
    pub fn scalar_count(&self) -> usize {
        match *self {
            VarKind::SymmetricPd(n) | VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::General(r, c) => r * c,
            VarKind::Scalar => 1,
        }
    }

    /// Entry coordinates of the `k`-th free scalar.
    pub fn entry(&self, k: usize) -> (usize, usize) {
        match *self {
            VarKind::SymmetricPd(n) | VarKind::Symmetric(n) => {
                // row-major upper triangle
                let mut idx = k;
                for i in 0..n {
                    let row_len = n - i;
                    if idx < row_len {
                        return (i, i + idx);
                    }
                    idx -= row_len;
                }
                unreachable!("scalar index out of range")
            }
            VarKind::General(_, c) => (k / c, k % c),
            VarKind::Scalar => (0, 0),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, VarKind::SymmetricPd(_) | VarKind::Symmetric(_))
    }

    /// Materialize a block from its packed scalars.
    pub fn assemble(&self, x: &[f64]) -> Mat {
        let (r, c) = self.shape();
        let mut m = Mat::zeros(r, c);
        for (k, &val) in x.iter().enumerate() {
            let (i, j) = self.entry(k);
            m[(i, j)] = val;
            if self.is_symmetric() && i != j {
                m[(j, i)] = val;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Constraint map must be ≺ 0 (realized as ⪯ −εI).
    Negative,
    /// Constraint map must be ≻ 0 (realized as ⪰ +εI).
    Positive,
}

/// One linear term `coeff · L · V(ᵀ) · R`, optionally symmetrized by adding
/// its transpose.
#[derive(Debug, Clone)]
pub struct Term {
    pub var: usize,
    pub left: Mat,
    pub right: Mat,
    pub coeff: f64,
    pub symmetrize: bool,
    pub transpose_var: bool,
}

/// A single affine symmetric-matrix constraint.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub dim: usize,
    pub sense: Sense,
    pub constant: Mat,
    pub terms: Vec<Term>,
}

impl Constraint {
    /// Evaluate the map at a full assignment (one matrix per variable).
    pub fn eval(&self, assign: &[Mat]) -> Mat {
        let mut m = self.constant.clone();
        for t in &self.terms {
            let v = &assign[t.var];
            let vmat = if t.transpose_var { v.transpose() } else { v.clone() };
            let prod = t.left.matmul(&vmat).matmul(&t.right).scale(t.coeff);
            m = m.add_ref(&prod);
            if t.symmetrize {
                m = m.add_ref(&prod.transpose());
            }
        }
        m
    }
}

/// Gain recovery rule for stabilization problems: each listed gain `G`
/// yields `X⁻¹G` once the nonsingular multiplier `X` is solved.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub x_var: usize,
    pub gains: Vec<(String, usize)>,
}

/// A complete feasibility problem.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub id: String,
    pub vars: Vec<VarBlock>,
    pub constraints: Vec<Constraint>,
    /// Strictness margin ε; strict inequalities are realized as ⪯ −εI or
    /// ⪰ +εI.
    pub epsilon: f64,
    pub extraction: Option<Extraction>,
}

impl LmiProblem {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn scalar_count(&self) -> usize {
        self.vars.iter().map(|v| v.kind.scalar_count()).sum()
    }

    /// Evaluate every constraint at an assignment.
    pub fn eval_all(&self, assign: &[Mat]) -> Vec<Mat> {
        self.constraints.iter().map(|c| c.eval(assign)).collect()
    }

    /// Zero assignment with correct shapes (for affinity tests and the
    /// scalarization bridge).
    pub fn zero_assignment(&self) -> Vec<Mat> {
        self.vars
            .iter()
            .map(|v| {
                let (r, c) = v.kind.shape();
                Mat::zeros(r, c)
            })
            .collect()
    }

    /// Structured full-precision text dump of the scalarized problem, for
    /// cross-checking against external semidefinite solvers.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem {}", self.id);
        let _ = writeln!(out, "epsilon {:.17e}", self.epsilon);
        let _ = writeln!(out, "variables {}", self.vars.len());
        for v in &self.vars {
            let (r, c) = v.kind.shape();
            let kind = match v.kind {
                VarKind::SymmetricPd(_) => "symmetric_pd",
                VarKind::Symmetric(_) => "symmetric",
                VarKind::General(..) => "general",
                VarKind::Scalar => "scalar",
            };
            let _ = writeln!(out, "var {} {} {} {}", v.name, kind, r, c);
        }
        let _ = writeln!(out, "constraints {}", self.constraints.len());
        for c in &self.constraints {
            let sense = match c.sense {
                Sense::Negative => "negative",
                Sense::Positive => "positive",
            };
            let _ = writeln!(out, "constraint {} {} dim {}", c.name, sense, c.dim);
            let _ = writeln!(out, "constant");
            for i in 0..c.constant.rows() {
                let row: Vec<String> =
                    c.constant.row(i).iter().map(|x| format!("{x:.17e}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
            for t in &c.terms {
                let _ = writeln!(
                    out,
                    "term var {} coeff {:.17e} symmetrize {} transpose {}",
                    self.vars[t.var].name, t.coeff, t.symmetrize, t.transpose_var
                );
                let _ = writeln!(out, "left {} {}", t.left.rows(), t.left.cols());
                for i in 0..t.left.rows() {
                    let row: Vec<String> =
                        t.left.row(i).iter().map(|x| format!("{x:.17e}")).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
                let _ = writeln!(out, "right {} {}", t.right.rows(), t.right.cols());
                for i in 0..t.right.rows() {
                    let row: Vec<String> =
                        t.right.row(i).iter().map(|x| format!("{x:.17e}")).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
        }
        out
    }
}

/// Outcome of a feasibility run, evaluated independently of the solver:
/// `feasible` implies every constraint passes an eigenvalue recheck with
/// margin at least ε/2.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// Named variable assignment (present when feasible).
    pub assignment: Vec<(String, Mat)>,
    /// Smallest certified eigenvalue distance over all constraints.
    pub margin: f64,
    /// Extracted gains for stabilization problems.
    pub gains: Vec<(String, Mat)>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Feasible,
    /// No certificate found; strict infeasibility is not claimed.
    NotFeasible,
    /// Iteration budget exhausted before a decision.
    Inconclusive,
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        self.status == VerdictStatus::Feasible
    }

    pub fn gain(&self, name: &str) -> Option<&Mat> {
        self.gains.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn variable(&self, name: &str) -> Option<&Mat> {
        self.assignment.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_algebra() {
        let basis = SelectorBasis::new(2, 4);
        let mut sum = Mat::zeros(8, 8);
        for i in 1..=4 {
            for j in 1..=4 {
                let prod = basis.v(i).transpose().matmul(&basis.v(j));
                let want = if i == j { Mat::identity(2) } else { Mat::zeros(2, 2) };
                assert!(prod.sub_ref(&want).norm_max() == 0.0);
            }
            sum = sum.add_ref(&basis.v(i).matmul(&basis.v(i).transpose()));
        }
        assert!(sum.sub_ref(&Mat::identity(8)).norm_max() == 0.0);
    }

    #[test]
    fn symmetric_var_round_trip() {
        let kind = VarKind::Symmetric(3);
        assert_eq!(kind.scalar_count(), 6);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = kind.assemble(&x);
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 2.0);
        assert_eq!(m[(2, 2)], 6.0);
        for k in 0..6 {
            let (i, j) = kind.entry(k);
            assert_eq!(m[(i, j)], x[k]);
        }
    }

    #[test]
    fn constraint_eval_symmetrizes() {
        let vars = vec![VarBlock { name: "x".into(), kind: VarKind::General(1, 1) }];
        let c = Constraint {
            name: "test".into(),
            dim: 2,
            sense: Sense::Negative,
            constant: Mat::zeros(2, 2),
            terms: vec![Term {
                var: 0,
                left: Mat::col_vec(&[1.0, 0.0]),
                right: Mat::row_vec(&[0.0, 1.0]),
                coeff: 2.0,
                symmetrize: true,
                transpose_var: false,
            }],
        };
        let assign = vec![Mat::scalar(3.0)];
        let m = c.eval(&assign);
        // 2·3 placed at (0,1) and its transpose at (1,0)
        assert_eq!(m[(0, 1)], 6.0);
        assert_eq!(m[(1, 0)], 6.0);
        let _ = vars;
    }
}
