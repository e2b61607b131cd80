//! Verification routes that never touch `D`.

use nalgebra::SVD;
use num_traits::Zero;

use super::FilterBank;
use crate::convmat::{BlockSystem, Flavor};
use crate::dsp::dft_padded;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cvector, CMatrix, CVector, GramFactor};
use crate::scalar::{lit, to_f64, vec_norm, Cx, Real};

/// Minimizes `||X h - e||` over the nullspace of `X~` by explicit basis.
///
/// An orthonormal basis `Z` of `null(X~)` comes from a full SVD (the matrix
/// is zero-padded to square so every right singular vector is available);
/// then `min_w ||X Z w - e||` is solved by SVD least squares and `h = Z w`.
pub fn solve_constrained_ls_oracle<T: Real>(x: &CMatrix<T>, xtil: &CMatrix<T>, e: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
    let cols = x.ncols();
    if xtil.ncols() != cols || e.len() != x.nrows() {
        return invalid(format!(
            "inconsistent shapes: X {:?}, X~ {:?}, e {}",
            x.shape(),
            xtil.shape(),
            e.len()
        ));
    }
    let z = dense_nullspace(xtil)?;
    let a = x * &z;
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().map(|s| to_f64(*s)).fold(0.0, f64::max);
    let eps = lit::<T>(a.nrows().max(a.ncols()) as f64 * T::eps_f64() * smax);
    let w = svd
        .solve(&cvector(e), eps)
        .map_err(|m| Error::InvalidArgument(format!("least-squares solve failed: {m}")))?;
    Ok((&z * w).as_slice().to_vec())
}

/// Orthonormal basis of `null(A)`; infeasible when trivial.
fn dense_nullspace<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return Ok(CMatrix::identity(cols, cols));
    }
    let mut sq = CMatrix::<T>::zeros(rows.max(cols), cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = SVD::new(sq, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().map(|s| to_f64(*s)).fold(0.0, f64::max);
    let tol = rows.max(cols) as f64 * T::eps_f64() * smax.max(f64::MIN_POSITIVE) * 10.0;
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| to_f64(svd.singular_values[i]) <= tol)
        .collect();
    if null.is_empty() {
        return Err(Error::Infeasible("the constraint matrix has a trivial nullspace".into()));
    }
    Ok(CMatrix::from_fn(cols, null.len(), |r, c| v_t[(null[c], r)].conj()))
}

/// Orthonormal basis of the constraint nullspace built from the structure of
/// a linear-flavor system, without factoring `X~` or `D`.
///
/// `X~ h = 0` holds exactly when every `Psi_k h_k` equals one common output
/// `y`, so `y` ranges over the intersection of the column spaces. That
/// intersection is the nullspace of the stacked `(I - P_k) Q_1`,
/// `k = 2..K`, where `Q_k` are orthonormal column bases. Each intersection
/// vector is mapped back through `h_k = G_k^-1 Psi_k^H y`.
pub fn constraint_nullspace<T: Real>(sys: &BlockSystem<T>, singular_tol: f64) -> Result<CMatrix<T>> {
    if sys.flavor != Flavor::Linear {
        return invalid("constraint_nullspace expects a linear-flavor system");
    }
    let (k, n, c) = (sys.k(), sys.n(), sys.taps());
    let factors = sys
        .blocks
        .iter()
        .enumerate()
        .map(|(i, psi)| GramFactor::of(psi, &format!("Gram matrix of waveform {i}"), f64::INFINITY))
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<CMatrix<T>> = sys.blocks.iter().zip(&factors).map(|(p, f)| f.orthonormal_basis(p)).collect();
    let basis_y = if k == 1 {
        q[0].clone()
    } else {
        let mut m = CMatrix::<T>::zeros((k - 1) * n, c);
        for i in 1..k {
            let proj = &q[i] * (q[i].adjoint() * &q[0]);
            m.view_mut(((i - 1) * n, 0), (n, c)).copy_from(&(&q[0] - proj));
        }
        let svd = SVD::new(m, false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let null: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| to_f64(svd.singular_values[i]) <= singular_tol)
            .collect();
        if null.is_empty() {
            return Err(Error::Infeasible("column spaces of the waveforms intersect trivially".into()));
        }
        let a = CMatrix::from_fn(c, null.len(), |r, j| v_t[(null[j], r)].conj());
        &q[0] * a
    };
    let d = basis_y.ncols();
    let mut z = CMatrix::<T>::zeros(k * c, d);
    for (i, (psi, f)) in sys.blocks.iter().zip(&factors).enumerate() {
        let hk = f.solve(&(psi.adjoint() * &basis_y));
        z.view_mut((i * c, 0), (c, d)).copy_from(&hk);
    }
    Ok(z.qr().q())
}

/// Nullspace-projected gradient `||Z^H X^H (X h - e)|| / ||X^H e||`.
///
/// For the linear flavor `Z` is [`constraint_nullspace`] (pass it in to
/// reuse it across banks). For the circular flavor the projection is done
/// per DFT bin: the nullspace at bin `f` is spanned by `(1/S_1(f), ...,
/// 1/S_K(f))` where `S_k` is the waveform spectrum.
pub fn kkt_residual<T: Real>(sys: &BlockSystem<T>, bank: &FilterBank<T>, z: Option<&CMatrix<T>>) -> Result<f64> {
    let (k, n, c) = (sys.k(), sys.n(), sys.taps());
    if bank.k() != k || bank.taps() != c {
        return invalid("bank does not match the system dimensions");
    }
    let e = cvector(&sys.e_block());
    let grads: Vec<CVector<T>> = (0..k)
        .map(|i| {
            let psi = &sys.blocks[i];
            let r = psi * cvector(&bank.filters[i]) - &e;
            psi.adjoint() * r
        })
        .collect();
    let xhe: f64 = sys
        .blocks
        .iter()
        .map(|psi| vec_norm((psi.adjoint() * &e).as_slice()).powi(2))
        .sum::<f64>()
        .sqrt();
    let projected = match sys.flavor {
        Flavor::Linear => {
            let owned;
            let z = match z {
                Some(z) => z,
                None => {
                    owned = constraint_nullspace(sys, 1e-8)?;
                    &owned
                }
            };
            let g: Vec<Cx<T>> = grads.iter().flat_map(|v| v.iter().copied()).collect();
            vec_norm((z.adjoint() * cvector(&g)).as_slice())
        }
        Flavor::Circular => {
            let spectra: Vec<Vec<Cx<T>>> = sys.blocks.iter().map(|b| dft_padded(b.column(0).as_slice(), n)).collect();
            let gs: Vec<Vec<Cx<T>>> = grads.iter().map(|g| dft_padded(g.as_slice(), n)).collect();
            let mut acc = 0.0;
            for f in 0..n {
                let mut dot = Cx::<f64>::zero();
                let mut norm2 = 0.0;
                for i in 0..k {
                    let s = spectra[i][f];
                    let u = Cx::new(to_f64(s.re), to_f64(s.im)).inv();
                    let g = Cx::new(to_f64(gs[i][f].re), to_f64(gs[i][f].im));
                    dot += u.conj() * g;
                    norm2 += u.norm_sqr();
                }
                acc += dot.norm_sqr() / norm2;
            }
            // unnormalized DFT: ||x||^2 = sum |X|^2 / n
            (acc / n as f64).sqrt()
        }
    };
    Ok(if xhe > 0.0 { projected / xhe } else { projected })
}
