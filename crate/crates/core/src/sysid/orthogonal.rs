use alloc::vec::Vec;

use super::{axpy, dot, DesignMatrix};
use crate::math::sqrt;
use crate::{Error, Result};

/// A column counts as dependent when its orthogonalised norm falls below
/// this fraction of its original norm.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-12;

/// Factorisation P_sel = W·A of the columns `order` of a design matrix, with
/// y ≈ W·g.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalDecomposition {
    /// Mutually orthogonal columns w₁..w_r.
    pub w: Vec<Vec<f64>>,
    /// Unit upper-triangular r×r matrix, row-major: `a[i][j]` for i ≤ j.
    pub a: Vec<Vec<f64>>,
    /// gᵢ = wᵢᵀy / wᵢᵀwᵢ.
    pub g: Vec<f64>,
    /// Design-matrix column behind each wᵢ.
    pub order: Vec<usize>,
}

impl OrthogonalDecomposition {
    pub fn rank(&self) -> usize {
        self.w.len()
    }

    /// β solving A·β = g, i.e. the coefficients of the columns in `order`.
    pub fn coefficients(&self) -> Vec<f64> {
        back_substitute(&self.a, &self.g)
    }

    /// y − W·g.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        for (w, g) in self.w.iter().zip(&self.g) {
            axpy(-g, w, &mut r);
        }
        r
    }
}

/// Solves the unit upper-triangular system A·x = b.
fn back_substitute(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let r = b.len();
    let mut x = b.to_vec();
    for i in (0..r).rev() {
        let mut v = x[i];
        for j in i + 1..r {
            v -= a[i][j] * x[j];
        }
        x[i] = v;
    }
    x
}

/// Modified Gram-Schmidt on the columns `order` of `p`.
///
/// Fails with [`Error::DependentColumn`] naming the first column that is
/// numerically dependent on the ones before it.
pub fn gram_schmidt(p: &DesignMatrix, order: &[usize]) -> Result<OrthogonalDecomposition> {
    orthogonalise(p, order, false).map(|(dec, _)| dec)
}

/// MGS that either stops at the first dependent column or, with
/// `skip_dependent`, leaves it out and reports it.
fn orthogonalise(
    p: &DesignMatrix,
    order: &[usize],
    skip_dependent: bool,
) -> Result<(OrthogonalDecomposition, Vec<usize>)> {
    let mut seen = alloc::vec![false; p.n_cols()];
    for &j in order {
        if j >= p.n_cols() || core::mem::replace(&mut seen[j], true) {
            return Err(Error::Dimension(alloc::format!("invalid or repeated column index {j}")));
        }
    }
    let r_max = order.len();
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(r_max);
    let mut ww: Vec<f64> = Vec::with_capacity(r_max);
    let mut a_cols: Vec<Vec<f64>> = Vec::with_capacity(r_max);
    let mut kept = Vec::with_capacity(r_max);
    let mut dropped = Vec::new();
    for &j in order {
        let col = p.column(j);
        let mut v = col.to_vec();
        let mut coeffs = Vec::with_capacity(w.len());
        for (wk, wwk) in w.iter().zip(&ww) {
            let c = dot(wk, &v) / wwk;
            axpy(-c, wk, &mut v);
            coeffs.push(c);
        }
        let vv = dot(&v, &v);
        if sqrt(vv) < DEPENDENCE_TOLERANCE * sqrt(dot(col, col)) {
            if skip_dependent {
                dropped.push(j);
                continue;
            }
            return Err(Error::DependentColumn { column: j });
        }
        w.push(v);
        ww.push(vv);
        a_cols.push(coeffs);
        kept.push(j);
    }

    let r = w.len();
    let mut a = alloc::vec![alloc::vec![0.0; r]; r];
    for (j, coeffs) in a_cols.iter().enumerate() {
        a[j][j] = 1.0;
        for (i, c) in coeffs.iter().enumerate() {
            a[i][j] = *c;
        }
    }
    let mut y = p.target().to_vec();
    let mut g = Vec::with_capacity(r);
    for (wk, wwk) in w.iter().zip(&ww) {
        let gk = dot(wk, &y) / wwk;
        axpy(-gk, wk, &mut y);
        g.push(gk);
    }
    Ok((OrthogonalDecomposition { w, a, g, order: kept }, dropped))
}

/// β = A⁻¹g for a decomposition produced by [`gram_schmidt`] or [`frols`].
///
/// [`frols`]: super::frols
pub fn frols_coefficients(decomposition: &OrthogonalDecomposition) -> Vec<f64> {
    decomposition.coefficients()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LsOptions {
    /// Return the minimum-norm solution instead of failing on rank
    /// deficiency.
    pub min_norm_fallback: bool,
}

/// θ minimising ‖y − P·θ‖², computed through an orthogonal decomposition.
///
/// Rank deficiency is an error ([`Error::RankDeficient`]).
pub fn least_squares(p: &DesignMatrix) -> Result<Vec<f64>> {
    least_squares_with(p, LsOptions::default())
}

pub fn least_squares_with(p: &DesignMatrix, options: LsOptions) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..p.n_cols()).collect();
    if !options.min_norm_fallback {
        return match gram_schmidt(p, &all) {
            Ok(dec) => Ok(dec.coefficients()),
            Err(Error::DependentColumn { column }) => Err(Error::RankDeficient { column }),
            Err(e) => Err(e),
        };
    }
    let (dec, dropped) = orthogonalise(p, &all, true)?;
    let z = dec.coefficients();
    if dropped.is_empty() {
        return Ok(z);
    }
    min_norm(p, &dec, &dropped, &z)
}

/// Minimum-norm θ among all least-squares solutions.
///
/// With basis columns B (those kept by `dec`) and each dropped column written
/// as B·cⱼ, every solution satisfies K·θ = z for K = [I C] (in the original
/// column positions), so θ = Kᵀ(K·Kᵀ)⁻¹z.
fn min_norm(
    p: &DesignMatrix,
    dec: &OrthogonalDecomposition,
    dropped: &[usize],
    z: &[f64],
) -> Result<Vec<f64>> {
    let r = dec.rank();
    // K as r rows over all columns.
    let mut k = alloc::vec![alloc::vec![0.0; p.n_cols()]; r];
    for (i, &j) in dec.order.iter().enumerate() {
        k[i][j] = 1.0;
    }
    for &j in dropped {
        let mut v = p.column(j).to_vec();
        let mut h = Vec::with_capacity(r);
        for w in &dec.w {
            let c = dot(w, &v) / dot(w, w);
            axpy(-c, w, &mut v);
            h.push(c);
        }
        for (i, c) in back_substitute(&dec.a, &h).into_iter().enumerate() {
            k[i][j] = c;
        }
    }
    // K·Kᵀ is symmetric positive definite (it is I + C·Cᵀ).
    let mut m = alloc::vec![alloc::vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..=i {
            let v = dot(&k[i], &k[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let lambda = cholesky_solve(&mut m, z)?;
    let mut theta = alloc::vec![0.0; p.n_cols()];
    for (row, l) in k.iter().zip(&lambda) {
        axpy(*l, row, &mut theta);
    }
    Ok(theta)
}

/// Solves M·x = b for symmetric positive-definite M (overwritten by its
/// Cholesky factor).
fn cholesky_solve(m: &mut [Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = m[j][j];
        for k in 0..j {
            d -= m[j][k] * m[j][k];
        }
        if !(d > 0.0) {
            return Err(Error::domain("normal matrix of the minimum-norm system is not positive definite"));
        }
        let d = sqrt(d);
        m[j][j] = d;
        for i in j + 1..n {
            let mut v = m[i][j];
            for k in 0..j {
                v -= m[i][k] * m[j][k];
            }
            m[i][j] = v / d;
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= m[i][k] * x[k];
        }
        x[i] /= m[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= m[k][i] * x[k];
        }
        x[i] /= m[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::sysid::Term;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = substream(seed, 0);
        (0..cols).map(|_| (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        sqrt(num / den)
    }

    #[test]
    fn identity_system() {
        let p = DesignMatrix::from_columns(
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]],
            alloc::vec![3.0, 4.0],
        )
        .unwrap();
        assert_eq!(least_squares(&p).unwrap(), alloc::vec![3.0, 4.0]);
    }

    #[test]
    fn recovers_noiseless_coefficients() {
        let cols = random_matrix(100, 5, 1);
        let truth = [1.5, -2.0, 0.25, 3.0, -0.75];
        let mut y = alloc::vec![0.0; 100];
        for (c, t) in cols.iter().zip(&truth) {
            axpy(*t, c, &mut y);
        }
        let p = DesignMatrix::from_columns(cols, y.clone()).unwrap();
        let theta = least_squares(&p).unwrap();
        assert!(rel_err(&theta, &truth) < 1e-8);
        let resid: Vec<f64> = p.predict(&theta).iter().zip(&y).map(|(a, b)| b - a).collect();
        assert!(resid.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let cols = random_matrix(60, 4, 2);
        let y: Vec<f64> = random_matrix(60, 1, 3).remove(0);
        let p = DesignMatrix::from_columns(cols, y.clone()).unwrap();
        let theta = least_squares(&p).unwrap();
        let resid: Vec<f64> = p.predict(&theta).iter().zip(&y).map(|(a, b)| b - a).collect();
        for c in p.columns() {
            assert!(dot(c, &resid).abs() < 1e-8 * sqrt(dot(c, c) * dot(&y, &y)));
        }
    }

    #[test]
    fn hand_gram_schmidt() {
        let p = DesignMatrix::from_columns(
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![1.0, 1.0]],
            alloc::vec![1.0, 1.0],
        )
        .unwrap();
        let dec = gram_schmidt(&p, &[0, 1]).unwrap();
        assert_eq!(dec.w, alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]]);
        assert_eq!(dec.a, alloc::vec![alloc::vec![1.0, 1.0], alloc::vec![0.0, 1.0]]);
    }

    #[test]
    fn orthogonal_columns_are_left_alone() {
        let p = DesignMatrix::from_columns(
            alloc::vec![alloc::vec![1.0, 1.0, 0.0], alloc::vec![1.0, -1.0, 0.0], alloc::vec![0.0, 0.0, 2.0]],
            alloc::vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let dec = gram_schmidt(&p, &[0, 1, 2]).unwrap();
        assert_eq!(dec.w, p.columns());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(dec.a[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(dec.coefficients(), dec.g);
    }

    #[test]
    fn reconstruction_on_random_matrices() {
        for seed in 0..5 {
            let cols = random_matrix(200, 10, 100 + seed);
            let p = DesignMatrix::from_columns(cols, alloc::vec![1.0; 200]).unwrap();
            let order: Vec<usize> = (0..10).rev().collect();
            let dec = gram_schmidt(&p, &order).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for (jj, &j) in order.iter().enumerate() {
                let mut rebuilt = alloc::vec![0.0; 200];
                for i in 0..=jj {
                    axpy(dec.a[i][jj], &dec.w[i], &mut rebuilt);
                }
                num += rebuilt.iter().zip(p.column(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                den += dot(p.column(j), p.column(j));
            }
            assert!(sqrt(num / den) < 1e-10);
            for i in 0..10 {
                for k in 0..i {
                    let c = dot(&dec.w[i], &dec.w[k]);
                    assert!(c.abs() < 1e-8 * sqrt(dot(&dec.w[i], &dec.w[i]) * dot(&dec.w[k], &dec.w[k])));
                }
            }
        }
    }

    #[test]
    fn dependent_columns_are_reported() {
        let a = alloc::vec![1.0, 2.0, 3.0];
        let b = alloc::vec![0.0, 1.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let p = DesignMatrix::from_columns(alloc::vec![a, b, c], alloc::vec![1.0, 0.0, 2.0]).unwrap();
        assert_eq!(gram_schmidt(&p, &[0, 1, 2]), Err(Error::DependentColumn { column: 2 }));
        assert_eq!(least_squares(&p), Err(Error::RankDeficient { column: 2 }));
    }

    #[test]
    fn minimum_norm_fallback() {
        // Duplicated column: solutions θ₀ + θ₁ = c, minimum norm splits evenly.
        let x = alloc::vec![1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let p = DesignMatrix::new(
            alloc::vec![x.clone(), x],
            y,
            alloc::vec![Term::Named("a".into()), Term::Named("b".into())],
        )
        .unwrap();
        let theta = least_squares_with(&p, LsOptions { min_norm_fallback: true }).unwrap();
        assert!((theta[0] - 1.5).abs() < 1e-12 && (theta[1] - 1.5).abs() < 1e-12);

        // Random rank-deficient system against a brute-force oracle: the
        // minimum-norm solution is orthogonal to the null space.
        let mut cols = random_matrix(30, 3, 7);
        let mut rng = substream(8, 0);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let dep: Vec<f64> = cols[0].iter().zip(&cols[2]).map(|(a, b)| u * a - v * b).collect();
        cols.insert(1, dep);
        let y = random_matrix(30, 1, 9).remove(0);
        let p = DesignMatrix::from_columns(cols, y.clone()).unwrap();
        let theta = least_squares_with(&p, LsOptions { min_norm_fallback: true }).unwrap();
        // columns are now [c0, u·c0 − v·c2, c1, c2]
        let null = [u, -1.0, 0.0, -v];
        assert!(dot(&theta, &null).abs() < 1e-10);
        let full_rank = DesignMatrix::from_columns(
            alloc::vec![p.column(0).to_vec(), p.column(2).to_vec(), p.column(3).to_vec()],
            y,
        )
        .unwrap();
        let fitted_a = p.predict(&theta);
        let fitted_b = full_rank.predict(&least_squares(&full_rank).unwrap());
        assert!(rel_err(&fitted_a, &fitted_b) < 1e-10);
    }
}
