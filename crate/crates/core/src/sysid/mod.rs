//! Linear-in-the-parameters identification.
//!
//! A model y(k) = Σᵢ θᵢ pᵢ(k) + e(k) is fitted by orthogonalising the candidate
//! regressors with modified Gram-Schmidt. [`frols`] grows the model greedily,
//! at each step taking the candidate whose orthogonalised part explains the
//! largest share of yᵀy (its error reduction ratio). [`volterra_terms`] builds
//! candidate sets of lagged-input monomials.

mod frols;
mod orthogonal;
mod volterra;

pub use frols::{frols, StopRule, StopStatus, TermSelection, DEFAULT_RHO};
pub use orthogonal::{
    frols_coefficients, gram_schmidt, least_squares, least_squares_with, LsOptions,
    OrthogonalDecomposition, DEPENDENCE_TOLERANCE,
};
pub use volterra::{volterra_terms, VolterraSpec};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Signal a lagged factor refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    Input,
    Output,
}

/// x(k − lag) for x = u or y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lagged {
    pub signal: Signal,
    pub lag: usize,
}

impl fmt::Display for Lagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.signal {
            Signal::Input => "u",
            Signal::Output => "y",
        };
        write!(f, "{name}(k-{})", self.lag)
    }
}

/// Description of a candidate regressor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Constant,
    /// Product of lagged factors, e.g. u(k−1)·u(k−2).
    Product(Vec<Lagged>),
    /// A column supplied by the user.
    Named(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant => f.write_str("1"),
            Term::Named(name) => f.write_str(name),
            Term::Product(factors) => {
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{factor}")?;
                }
                Ok(())
            }
        }
    }
}

/// Candidate columns p₁..p_M (each of length N) and the target y.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    terms: Vec<Term>,
}

impl DesignMatrix {
    pub fn new(columns: Vec<Vec<f64>>, target: Vec<f64>, terms: Vec<Term>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Dimension("design matrix has no columns".into()));
        }
        if terms.len() != columns.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} columns but {} term descriptions",
                columns.len(),
                terms.len()
            )));
        }
        let n = target.len();
        if n == 0 {
            return Err(Error::Dimension("target vector is empty".into()));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Dimension(alloc::format!(
                    "column {j} has {} rows, target has {n}",
                    col.len()
                )));
            }
            if col.iter().all(|x| *x == 0.0) {
                return Err(Error::domain(alloc::format!("column {j} ({}) is all zero", terms[j])));
            }
        }
        if columns.iter().flatten().chain(&target).any(|x| !x.is_finite()) {
            return Err(Error::domain("design matrix contains non-finite values"));
        }
        Ok(Self { columns, target, terms })
    }

    /// Columns named `x0, x1, …`.
    pub fn from_columns(columns: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        let terms = (0..columns.len()).map(|j| Term::Named(alloc::format!("x{j}"))).collect();
        Self::new(columns, target, terms)
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// The same data restricted to the columns in `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&j| self.columns[j].clone()).collect(),
            self.target.clone(),
            indices.iter().map(|&j| self.terms[j].clone()).collect(),
        )
    }

    /// P·θ.
    pub fn predict(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.n_rows()];
        for (col, t) in self.columns.iter().zip(theta) {
            axpy(*t, col, &mut out);
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y ← y + a·x
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
