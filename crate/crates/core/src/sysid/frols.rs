use alloc::vec::Vec;

use super::orthogonal::DEPENDENCE_TOLERANCE;
use super::{axpy, dot, DesignMatrix, OrthogonalDecomposition, Term};
use crate::math::sqrt;
use crate::{Error, Result};

/// Default bound on the unexplained share 1 − Σerr.
pub const DEFAULT_RHO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once 1 − Σerr ≤ rho (checked after the first term).
    pub rho: f64,
    /// Stop after this many terms.
    pub max_terms: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { rho: DEFAULT_RHO, max_terms: usize::MAX }
    }
}

/// Why term selection ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopStatus {
    /// 1 − Σerr reached the tolerance.
    Tolerance,
    /// `max_terms` terms were selected.
    MaxTerms,
    /// Every candidate was selected.
    Exhausted,
    /// The remaining candidates all lie in the span of the selected ones.
    Dependent,
}

/// Outcome of [`frols`].
#[derive(Debug, Clone, PartialEq)]
pub struct TermSelection {
    /// Candidate indices in order of selection.
    pub selected: Vec<usize>,
    /// Error reduction ratio of each selected term.
    pub err: Vec<f64>,
    pub err_sum: f64,
    pub decomposition: OrthogonalDecomposition,
    /// Coefficients of the selected columns (A⁻¹g), in selection order.
    pub coefficients: Vec<f64>,
    /// Mean squared residual ‖y − W·g‖²/N.
    pub residual_variance: f64,
    pub status: StopStatus,
}

impl TermSelection {
    /// Descriptions of the selected terms.
    pub fn terms<'a>(&self, p: &'a DesignMatrix) -> Vec<&'a Term> {
        self.selected.iter().map(|&j| &p.terms()[j]).collect()
    }
}

/// Forward-regression orthogonal least squares.
///
/// At step s every unselected candidate is orthogonalised against the terms
/// picked so far, its error reduction ratio (qᵀy)²/(qᵀq·yᵀy) is computed and
/// the largest one is selected (ties go to the lowest index). Candidates that
/// have become numerically dependent are skipped.
pub fn frols(p: &DesignMatrix, stop: StopRule) -> Result<TermSelection> {
    let y = p.target();
    let yy = dot(y, y);
    if yy == 0.0 {
        return Err(Error::domain("target vector is all zero"));
    }
    if !(stop.rho >= 0.0) {
        return Err(Error::domain("rho must be non-negative"));
    }
    let m = p.n_cols();
    let norms: Vec<f64> = p.columns().iter().map(|c| sqrt(dot(c, c))).collect();
    let mut work: Vec<Vec<f64>> = p.columns().to_vec();
    // Projection coefficients of each candidate on w₁..w_s.
    let mut proj: Vec<Vec<f64>> = alloc::vec![Vec::new(); m];
    let mut used = alloc::vec![false; m];

    let mut selected = Vec::new();
    let mut err = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();
    let mut g = Vec::new();
    let mut a_cols: Vec<Vec<f64>> = Vec::new();
    let mut err_sum = 0.0;
    let mut y_res = y.to_vec();

    let status = loop {
        if !selected.is_empty() && 1.0 - err_sum <= stop.rho {
            break StopStatus::Tolerance;
        }
        if selected.len() >= stop.max_terms {
            break StopStatus::MaxTerms;
        }
        if selected.len() == m {
            break StopStatus::Exhausted;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if used[j] {
                continue;
            }
            let q = &work[j];
            let qq = dot(q, q);
            if sqrt(qq) < DEPENDENCE_TOLERANCE * norms[j] {
                continue;
            }
            let qy = dot(q, y);
            let e = qy * qy / (qq * yy);
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((j, e));
            }
        }
        let Some((l, e)) = best else {
            break StopStatus::Dependent;
        };

        used[l] = true;
        let wl = core::mem::take(&mut work[l]);
        let ww = dot(&wl, &wl);
        let gl = dot(&wl, &y_res) / ww;
        axpy(-gl, &wl, &mut y_res);
        for j in 0..m {
            if used[j] {
                continue;
            }
            let c = dot(&wl, &work[j]) / ww;
            axpy(-c, &wl, &mut work[j]);
            proj[j].push(c);
        }
        a_cols.push(core::mem::take(&mut proj[l]));
        selected.push(l);
        err.push(e);
        err_sum += e;
        w.push(wl);
        g.push(gl);
    };

    let r = selected.len();
    let mut a = alloc::vec![alloc::vec![0.0; r]; r];
    for (j, coeffs) in a_cols.iter().enumerate() {
        a[j][j] = 1.0;
        for (i, c) in coeffs.iter().enumerate() {
            a[i][j] = *c;
        }
    }
    let decomposition = OrthogonalDecomposition { w, a, g, order: selected.clone() };
    let coefficients = decomposition.coefficients();
    let residual_variance = dot(&y_res, &y_res) / y.len() as f64;
    Ok(TermSelection {
        selected,
        err,
        err_sum,
        decomposition,
        coefficients,
        residual_variance,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use alloc::string::String;
    use crate::sysid::{least_squares, volterra_terms, VolterraSpec};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn perfect_single_term() {
        let p1 = alloc::vec![1.0, 1.0, 0.0, 0.0];
        let p2 = alloc::vec![0.0, 0.0, 1.0, -1.0];
        let y: Vec<f64> = p1.iter().map(|v| 2.0 * v).collect();
        let p = DesignMatrix::from_columns(alloc::vec![p1, p2], y).unwrap();
        let sel = frols(&p, StopRule::default()).unwrap();
        assert_eq!(sel.selected, alloc::vec![0]);
        assert_eq!(sel.err, alloc::vec![1.0]);
        assert_eq!(sel.coefficients, alloc::vec![2.0]);
        assert_eq!(sel.status, StopStatus::Tolerance);
    }

    #[test]
    fn orthogonal_candidates_give_r_squared() {
        // Orthogonal columns built from disjoint supports.
        let n = 12;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..n).map(|k| if k % 4 == j { (k + 1) as f64 } else { 0.0 }).collect())
            .collect();
        let y = gaussian(n, 1);
        let p = DesignMatrix::from_columns(cols.clone(), y.clone()).unwrap();
        let sel = frols(&p, StopRule { rho: 0.0, max_terms: 4 }).unwrap();
        let theta = least_squares(&p).unwrap();
        let fitted = p.predict(&theta);
        let r2 = dot(&fitted, &fitted) / dot(&y, &y);
        assert!((sel.err_sum - r2).abs() < 1e-12);
        for (s, &j) in sel.selected.iter().enumerate() {
            let c = &cols[j];
            let alone = dot(c, &y).powi(2) / (dot(c, c) * dot(&y, &y));
            assert!((sel.err[s] - alone).abs() < 1e-14);
        }
    }

    #[test]
    fn rho_one_stops_after_one_term() {
        let p = DesignMatrix::from_columns(
            alloc::vec![gaussian(50, 2), gaussian(50, 3), gaussian(50, 4)],
            gaussian(50, 5),
        )
        .unwrap();
        let sel = frols(&p, StopRule { rho: 1.0, max_terms: 10 }).unwrap();
        assert_eq!(sel.selected.len(), 1);
    }

    #[test]
    fn recovers_generating_volterra_terms() {
        let u = gaussian(505, 6);
        let spec = VolterraSpec { max_lag: 4, max_order: 2, constant: true, output_lags: 0 };
        let probe = volterra_terms(&u, &u, &spec).unwrap();
        assert_eq!(probe.n_cols(), 15);
        // y(k) = 0.8 u(k−1) − 0.5 u(k−2)u(k−3) + 0.3
        let mut y = alloc::vec![0.0; u.len()];
        for k in 4..u.len() {
            y[k] = 0.8 * u[k - 1] - 0.5 * u[k - 2] * u[k - 3] + 0.3;
        }
        let p = volterra_terms(&u, &y, &spec).unwrap();
        let sel = frols(&p, StopRule::default()).unwrap();
        let mut names: Vec<String> = sel.terms(&p).iter().map(|t| alloc::format!("{t}")).collect();
        names.sort();
        assert_eq!(names, ["1", "u(k-1)", "u(k-2)*u(k-3)"]);
        assert!(sel.err_sum >= 1.0 - 1e-8);
        for (&j, b) in sel.selected.iter().zip(&sel.coefficients) {
            let expect = match alloc::format!("{}", p.terms()[j]).as_str() {
                "1" => 0.3,
                "u(k-1)" => 0.8,
                _ => -0.5,
            };
            assert!((b - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn dependent_candidates_end_selection() {
        let a = gaussian(20, 7);
        let b: Vec<f64> = a.iter().map(|v| -3.0 * v).collect();
        let p = DesignMatrix::from_columns(alloc::vec![a, b], gaussian(20, 8)).unwrap();
        let sel = frols(&p, StopRule { rho: 0.0, max_terms: 5 }).unwrap();
        assert_eq!(sel.selected.len(), 1);
        assert_eq!(sel.status, StopStatus::Dependent);
    }

    #[test]
    fn all_zero_target_is_an_error() {
        let p = DesignMatrix::from_columns(alloc::vec![alloc::vec![1.0, 2.0]], alloc::vec![0.0, 0.0]).unwrap();
        assert!(frols(&p, StopRule::default()).is_err());
    }

    fn random_design(n: usize, m: usize, seed: u64) -> DesignMatrix {
        let cols = (0..m).map(|j| gaussian(n, seed * 100 + j as u64)).collect();
        DesignMatrix::from_columns(cols, gaussian(n, seed * 100 + 99)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ledger_invariants(seed in 0u64..10_000, m in 1usize..8, max_terms in 1usize..8) {
            let p = random_design(40, m, seed);
            let sel = frols(&p, StopRule { rho: 0.0, max_terms }).unwrap();
            prop_assert!(sel.err.iter().all(|e| (0.0..=1.0).contains(e)));
            prop_assert!(sel.err_sum <= 1.0 + 1e-9);
            let mut sorted = sel.selected.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), sel.selected.len());

            let y = p.target();
            let resid = sel.decomposition.residual(y);
            let unexplained = dot(&resid, &resid) / dot(y, y);
            prop_assert!((1.0 - sel.err_sum - unexplained).abs() < 1e-8);

            let w = &sel.decomposition.w;
            for i in 0..w.len() {
                for k in 0..i {
                    prop_assert!(dot(&w[i], &w[k]).abs() < 1e-8 * sqrt(dot(&w[i], &w[i]) * dot(&w[k], &w[k])));
                }
            }

            let direct = least_squares(&p.select(&sel.selected).unwrap()).unwrap();
            let num: f64 = direct.iter().zip(&sel.coefficients).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(sqrt(num / dot(&direct, &direct)) < 1e-8);
        }

        #[test]
        fn column_order_does_not_change_the_selection(seed in 0u64..10_000, m in 2usize..8, rot in 0usize..8) {
            let p = random_design(40, m, seed);
            let perm: Vec<usize> = (0..m).map(|j| (j + rot) % m).collect();
            let shuffled = p.select(&perm).unwrap();
            let a = frols(&p, StopRule { rho: 0.0, max_terms: 3 }).unwrap();
            let b = frols(&shuffled, StopRule { rho: 0.0, max_terms: 3 }).unwrap();
            let mapped: Vec<usize> = b.selected.iter().map(|&j| perm[j]).collect();
            prop_assert_eq!(&a.selected, &mapped);
            prop_assert!((a.err_sum - b.err_sum).abs() < 1e-12);
        }
    }
}
