use alloc::vec::Vec;

use super::{DesignMatrix, Lagged, Signal, Term};
use crate::{Error, Result};

/// Candidate set of a truncated Volterra expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolterraSpec {
    /// Largest input lag M; inputs u(k−1)..u(k−M) are used.
    pub max_lag: usize,
    /// Highest monomial order ℓ_max.
    pub max_order: usize,
    pub constant: bool,
    /// Output lags y(k−1)..y(k−n) added as extra base variables (0 for none).
    pub output_lags: usize,
}

impl VolterraSpec {
    fn validate(&self) -> Result<()> {
        if self.max_lag == 0 || self.max_order == 0 {
            return Err(Error::domain("Volterra lag and order must be at least 1"));
        }
        Ok(())
    }

    fn base(&self) -> Vec<Lagged> {
        let inputs = (1..=self.max_lag).map(|lag| Lagged { signal: Signal::Input, lag });
        let outputs = (1..=self.output_lags).map(|lag| Lagged { signal: Signal::Output, lag });
        inputs.chain(outputs).collect()
    }

    /// Σ_{ℓ=1}^{ℓmax} C(b + ℓ − 1, ℓ) (+ 1) for b base variables.
    pub fn term_count(&self) -> usize {
        let b = self.max_lag + self.output_lags;
        let mut count = usize::from(self.constant);
        // C(b + ℓ − 1, ℓ) = C(b + ℓ − 2, ℓ − 1)·(b + ℓ − 1)/ℓ
        let mut c = 1usize;
        for l in 1..=self.max_order {
            c = c * (b + l - 1) / l;
            count += c;
        }
        count
    }

    /// Terms in column order: the constant, then each order's monomials in
    /// lexicographic order of their (non-decreasing) lag lists.
    pub fn terms(&self) -> Vec<Term> {
        let base = self.base();
        let mut out = Vec::with_capacity(self.term_count());
        if self.constant {
            out.push(Term::Constant);
        }
        for order in 1..=self.max_order {
            let mut idx = alloc::vec![0usize; order];
            loop {
                out.push(Term::Product(idx.iter().map(|&i| base[i]).collect()));
                // next non-decreasing index tuple
                let Some(pos) = idx.iter().rposition(|&i| i + 1 < base.len()) else {
                    break;
                };
                let v = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = v;
                }
            }
        }
        out
    }
}

/// Design matrix of all Volterra monomials of `u` (and optionally lagged `y`)
/// with target `y`.
///
/// Row r corresponds to time k = r + max(M, n_y), so every lag is available.
/// Needs at least max(M, n_y) + 2 samples.
pub fn volterra_terms(u: &[f64], y: &[f64], spec: &VolterraSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    if u.len() != y.len() {
        return Err(Error::Dimension(alloc::format!(
            "input has {} samples, output has {}",
            u.len(),
            y.len()
        )));
    }
    let start = spec.max_lag.max(spec.output_lags);
    if u.len() < start + 2 {
        return Err(Error::SeriesTooShort { len: u.len(), needed: start + 2 });
    }
    let terms = spec.terms();
    let columns = terms
        .iter()
        .map(|term| {
            (start..u.len())
                .map(|k| match term {
                    Term::Product(factors) => factors
                        .iter()
                        .map(|f| match f.signal {
                            Signal::Input => u[k - f.lag],
                            Signal::Output => y[k - f.lag],
                        })
                        .product(),
                    _ => 1.0,
                })
                .collect()
        })
        .collect();
    DesignMatrix::new(columns, y[start..].to_vec(), terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn names(spec: &VolterraSpec) -> Vec<String> {
        spec.terms().iter().map(|t| alloc::format!("{t}")).collect()
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_expansions() {
        let spec = VolterraSpec { max_lag: 2, max_order: 1, constant: true, output_lags: 0 };
        assert_eq!(names(&spec), ["1", "u(k-1)", "u(k-2)"]);
        let spec = VolterraSpec { max_order: 2, ..spec };
        assert_eq!(
            names(&spec),
            ["1", "u(k-1)", "u(k-2)", "u(k-1)*u(k-1)", "u(k-1)*u(k-2)", "u(k-2)*u(k-2)"]
        );
        let spec = VolterraSpec { max_lag: 3, max_order: 3, constant: false, output_lags: 0 };
        assert_eq!(spec.terms().len(), 19);
        assert_eq!(spec.term_count(), 19);
    }

    #[test]
    fn counts_match_multiset_formula() {
        for m in 1..=6 {
            for l in 1..=4 {
                for ny in 0..=2 {
                    let spec = VolterraSpec { max_lag: m, max_order: l, constant: true, output_lags: ny };
                    let expect = 1 + (1..=l).map(|o| binomial(m + ny + o - 1, o)).sum::<usize>();
                    let terms = spec.terms();
                    assert_eq!(terms.len(), expect);
                    assert_eq!(spec.term_count(), expect);
                    let mut dedup = terms.clone();
                    dedup.sort_by_key(|t| alloc::format!("{t}"));
                    dedup.dedup();
                    assert_eq!(dedup.len(), expect);
                }
            }
        }
    }

    #[test]
    fn rows_align_with_lags() {
        let u = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0, 0.5, 1.0, 1.5, 2.0];
        let spec = VolterraSpec { max_lag: 2, max_order: 2, constant: false, output_lags: 1 };
        let p = volterra_terms(&u, &y, &spec).unwrap();
        assert_eq!(p.n_rows(), 3);
        assert_eq!(p.target(), &[1.0, 1.5, 2.0]);
        let col = |name: &str| {
            let j = p.terms().iter().position(|t| alloc::format!("{t}") == name).unwrap();
            p.column(j).to_vec()
        };
        assert_eq!(col("u(k-1)"), [2.0, 3.0, 4.0]);
        assert_eq!(col("u(k-2)"), [1.0, 2.0, 3.0]);
        assert_eq!(col("y(k-1)"), [0.5, 1.0, 1.5]);
        assert_eq!(col("u(k-1)*u(k-2)"), [2.0, 6.0, 12.0]);
    }

    #[test]
    fn short_series_is_rejected() {
        let spec = VolterraSpec { max_lag: 3, max_order: 1, constant: true, output_lags: 0 };
        assert_eq!(
            volterra_terms(&[1.0; 4], &[1.0; 4], &spec),
            Err(Error::SeriesTooShort { len: 4, needed: 5 })
        );
        assert!(volterra_terms(&[1.0; 5], &[1.0; 5], &spec).is_ok());
    }
}
