//! Dense complex kernels: pivoted Cholesky for Hermitian semidefinite
//! systems, Gram factorizations and cheap condition estimates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Cx, Real};

pub type CMatrix<T> = DMatrix<Cx<T>>;
pub type CVector<T> = DVector<Cx<T>>;

/// Column-major dense matrix from a row-major closure.
pub fn cmatrix_from_fn<T: Real>(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Cx<T>) -> CMatrix<T> {
    DMatrix::from_fn(rows, cols, f)
}

pub fn cvector<T: Real>(v: &[Cx<T>]) -> CVector<T> {
    DVector::from_column_slice(v)
}

/// Euclidean norm accumulated in `f64`.
pub fn norm<T: Real>(v: &CVector<T>) -> f64 {
    crate::scalar::vec_norm(v.as_slice())
}

/// Rank-revealing `P A P^T = L L^H` for a Hermitian positive semidefinite
/// matrix, stopped once the largest remaining diagonal falls below
/// `tol * max(diag A)`.
#[derive(Clone, Debug)]
pub struct PivotedCholesky<T: Real> {
    n: usize,
    /// Column-major lower factor, `n x rank` (leading `rank` columns used).
    l: Vec<Cx<T>>,
    /// `perm[i]` is the original index of pivoted position `i`.
    perm: Vec<usize>,
    rank: usize,
    /// Pivot values `L_ii^2` in elimination order.
    pivots: Vec<f64>,
    /// Largest diagonal left when elimination stopped (0 if full rank).
    residual_pivot: f64,
}

impl<T: Real> PivotedCholesky<T> {
    pub fn new(a: &CMatrix<T>, tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument(format!("matrix is {}x{}, expected square", n, a.ncols())));
        }
        // full Hermitian copy, column-major; permutations swap rows and columns
        let mut w: Vec<Cx<T>> = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut diag: Vec<f64> = (0..n).map(|i| to_f64(w[i * n + i].re)).collect();
        let scale = diag.iter().cloned().fold(0.0, f64::max);
        let mut pivots = Vec::with_capacity(n);
        let mut rank = 0;
        let mut residual_pivot = 0.0;
        if !(scale.is_finite()) {
            return Err(Error::Conditioning {
                what: "non-finite diagonal in semidefinite factorization".into(),
                condition: f64::INFINITY,
            });
        }
        for j in 0..n {
            let (p, dmax) = (j..n)
                .map(|i| (i, diag[i]))
                .fold((j, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if scale == 0.0 || dmax <= tol * scale {
                residual_pivot = dmax.max(0.0);
                break;
            }
            if p != j {
                // swap columns p and j, then rows p and j
                for r in 0..n {
                    w.swap(j * n + r, p * n + r);
                }
                for c in 0..n {
                    w.swap(c * n + j, c * n + p);
                }
                perm.swap(j, p);
                diag.swap(j, p);
            }
            // left-looking update of column j below the diagonal:
            // w[i, j] -= sum_{q<j} L[i,q] conj(L[j,q])
            let (done, rest) = w.split_at_mut(j * n);
            let col = &mut rest[..n];
            for q in 0..j {
                let lq = &done[q * n..(q + 1) * n];
                let c = lq[j].conj();
                if c.is_zero() {
                    continue;
                }
                for i in j..n {
                    col[i] -= lq[i] * c;
                }
            }
            let d = col[j].re;
            let d64 = to_f64(d);
            if d64 <= tol * scale {
                residual_pivot = d64.max(0.0);
                break;
            }
            let ljj = Float::sqrt(d);
            let inv = T::one() / ljj;
            col[j] = Cx::new(ljj, T::zero());
            for x in col.iter_mut().take(n).skip(j + 1) {
                *x = x.scale(inv);
            }
            for i in j + 1..n {
                diag[i] -= to_f64(col[i].norm_sqr());
            }
            pivots.push(d64);
            rank = j + 1;
        }
        w.truncate(rank * n);
        Ok(Self {
            n,
            l: w,
            perm,
            rank,
            pivots,
            residual_pivot,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n
    }

    /// Pivot ratio of the retained block, a lower bound on its condition number.
    pub fn retained_condition(&self) -> f64 {
        match (self.pivots.first(), self.pivots.last()) {
            (Some(a), Some(b)) if *b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }

    /// Condition estimate of the whole matrix; infinite when the rank is
    /// deficient and the leftover diagonal is exactly zero.
    pub fn condition_estimate(&self) -> f64 {
        if self.is_full_rank() {
            self.retained_condition()
        } else if self.residual_pivot > 0.0 {
            self.pivots.first().copied().unwrap_or(0.0) / self.residual_pivot
        } else {
            f64::INFINITY
        }
    }

    /// Basic solution of `A x = b`: the pivoted leading block is solved and
    /// the non-pivot unknowns are set to zero. Exact whenever `b` lies in the
    /// range of `A`.
    pub fn solve(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let (n, r) = (self.n, self.rank);
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y: Vec<Cx<T>> = (0..r).map(|i| b[self.perm[i]]).collect();
        // forward: L11 y = b_p
        for j in 0..r {
            let col = &self.l[j * n..(j + 1) * n];
            let v = y[j] / col[j];
            y[j] = v;
            for i in j + 1..r {
                y[i] -= col[i] * v;
            }
        }
        // backward: L11^H x = y
        for j in (0..r).rev() {
            let col = &self.l[j * n..(j + 1) * n];
            let mut acc = y[j];
            for i in j + 1..r {
                acc -= col[i].conj() * y[i];
            }
            y[j] = acc / col[j].conj();
        }
        let mut x = vec![Cx::zero(); n];
        for i in 0..r {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

/// Cholesky factor of a Gram matrix together with an extreme-eigenvalue
/// condition estimate.
#[derive(Clone, Debug)]
pub struct GramFactor<T: Real> {
    pub chol: Cholesky<Cx<T>, Dyn>,
    pub condition: f64,
}

impl<T: Real> GramFactor<T> {
    /// Factors `A^H A` for a tall matrix `A`.
    pub fn of(a: &CMatrix<T>, what: &str, max_condition: f64) -> Result<Self> {
        let g = a.adjoint() * a;
        Self::hermitian(g, what, max_condition)
    }

    pub fn hermitian(g: CMatrix<T>, what: &str, max_condition: f64) -> Result<Self> {
        let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::Conditioning {
            what: format!("{what} is not numerically positive definite"),
            condition: f64::INFINITY,
        })?;
        let condition = hermitian_condition(&g, &chol, 60);
        if !(condition < max_condition) {
            return Err(Error::Conditioning {
                what: what.to_string(),
                condition,
            });
        }
        Ok(Self { chol, condition })
    }

    pub fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &CVector<T>) -> CVector<T> {
        self.chol.solve(b)
    }

    /// `A L^{-H}` for the factored Gram `A^H A = L L^H`: an orthonormal basis
    /// of the column space of `A`.
    pub fn orthonormal_basis(&self, a: &CMatrix<T>) -> CMatrix<T> {
        let qh = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&a.adjoint())
            .expect("Cholesky factor has a positive diagonal");
        qh.adjoint()
    }
}

/// `lambda_max / lambda_min` of a Hermitian positive definite matrix by
/// power iteration and inverse iteration on its Cholesky factor.
pub fn hermitian_condition<T: Real>(g: &CMatrix<T>, chol: &Cholesky<Cx<T>, Dyn>, iters: usize) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return 1.0;
    }
    // deterministic start vector with energy in every coordinate
    let start = CVector::<T>::from_fn(n, |i, _| {
        let t = i as f64 * 0.618_033_988_75;
        Cx::new(lit(1.0 + 0.5 * t.sin()), lit(0.25 * t.cos()))
    });
    let rayleigh = |v: &CVector<T>, gv: &CVector<T>| -> f64 {
        let num = v.dotc(gv);
        to_f64(num.re) / norm(v).powi(2)
    };
    let mut v = start.clone();
    let mut lmax = 0.0;
    for _ in 0..iters {
        let gv = g * &v;
        lmax = rayleigh(&v, &gv);
        let nv = norm(&gv);
        if nv == 0.0 {
            return f64::INFINITY;
        }
        v = gv.unscale(lit(nv));
    }
    let mut u = start;
    let mut lmin_inv = 0.0;
    for _ in 0..iters {
        let gu = chol.solve(&u);
        lmin_inv = rayleigh(&u, &gu);
        let nu = norm(&gu);
        if !nu.is_finite() || nu == 0.0 {
            return f64::INFINITY;
        }
        u = gu.unscale(lit(nu));
    }
    if lmin_inv <= 0.0 || !lmin_inv.is_finite() {
        return f64::INFINITY;
    }
    lmax * lmin_inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| Cx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn full_rank_solve_matches_lu() {
        let a = random(12, 8, 1);
        let g = a.adjoint() * &a;
        let b = random(8, 1, 2);
        let pc = PivotedCholesky::new(&g, 1e-14).unwrap();
        assert_eq!(pc.rank(), 8);
        let x = pc.solve(b.as_slice());
        let x_ref = g.clone().lu().solve(&b).unwrap();
        for (u, v) in x.iter().zip(x_ref.iter()) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_consistent_system() {
        // G = A A^H with A 10x4 has rank 4
        let a = random(10, 4, 3);
        let g = &a * a.adjoint();
        let b = &g * random(10, 1, 4);
        let pc = PivotedCholesky::new(&g, 1e-12).unwrap();
        assert_eq!(pc.rank(), 4);
        assert!(!pc.is_full_rank());
        let x = cvector(&pc.solve(b.as_slice()));
        let r = &g * &x - b.column(0);
        assert!(norm(&r) < 1e-10 * norm(&b.column(0).into_owned()));
        assert_eq!(x.iter().filter(|z| z.is_zero()).count(), 6);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let g = CMatrix::<f64>::zeros(3, 3);
        let pc = PivotedCholesky::new(&g, 1e-12).unwrap();
        assert_eq!(pc.rank(), 0);
        assert!(pc.solve(&[Cx::new(0.0, 0.0); 3]).iter().all(|z| z.is_zero()));
    }

    #[test]
    fn condition_of_diagonal() {
        let g = CMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![
            Cx::new(1.0, 0.0),
            Cx::new(4.0, 0.0),
            Cx::new(100.0, 0.0),
        ]));
        let chol = Cholesky::new(g.clone()).unwrap();
        let c = hermitian_condition(&g, &chol, 200);
        assert!((c - 100.0).abs() < 1e-6, "{c}");
        let pc = PivotedCholesky::new(&g, 1e-14).unwrap();
        assert!((pc.condition_estimate() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_basis_spans_columns() {
        let a = random(9, 4, 5);
        let f = GramFactor::of(&a, "test gram", 1e12).unwrap();
        let q = f.orthonormal_basis(&a);
        let eye = q.adjoint() * &q;
        assert!((eye - CMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let p = &q * q.adjoint();
        assert!((&p * &a - &a).norm() < 1e-12);
    }

    #[test]
    fn gram_rejects_singular() {
        let mut a = random(6, 3, 6);
        let c0 = a.column(0).into_owned();
        a.set_column(2, &c0);
        assert!(matches!(GramFactor::of(&a, "dup", 1e12), Err(Error::Conditioning { .. })));
    }
}
