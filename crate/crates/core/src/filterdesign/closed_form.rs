//! Structured evaluation of the constrained least-squares closed form
//!
//!   h = G^-1 X^H e - G^-1 X~^H D^-1 X~ G^-1 X^H e,   D = X~ G^-1 X~^H,
//!
//! with `G = X^H X` block diagonal. No inverse is formed: each `G_k` is
//! Cholesky factored, and `D`, which is block tridiagonal with blocks built
//! from the column-space projectors `P_k = Psi_k G_k^-1 Psi_k^H`, goes
//! through a rank-revealing pivoted Cholesky.

use num_traits::{Float, Zero};

use super::{constraint_tolerance, SolveDiagnostics, MAX_CONDITION};
use crate::convmat::{BlockSystem, Flavor};
use crate::dsp::{dft_padded, idft};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cvector, CMatrix, CVector, GramFactor, PivotedCholesky};
use crate::scalar::{to_f64, vec_norm, Cx, Real};

/// Closed-form solution for the linear flavor with target block `e_block`
/// (replicated for every waveform).
pub fn solve_linear<T: Real>(sys: &BlockSystem<T>, e_block: &[Cx<T>]) -> Result<(Vec<Vec<Cx<T>>>, SolveDiagnostics)> {
    if sys.flavor != Flavor::Linear {
        return invalid("solve_linear needs a linear-flavor system");
    }
    let (k, n) = (sys.k(), sys.n());
    if e_block.len() != n {
        return invalid(format!("target block has length {}, expected {n}", e_block.len()));
    }
    let e = cvector(e_block);
    let mut diag = SolveDiagnostics::default();

    let mut factors = Vec::with_capacity(k);
    let mut g = Vec::with_capacity(k);
    for (i, psi) in sys.blocks.iter().enumerate() {
        let f = GramFactor::of(psi, &format!("Gram matrix of waveform {i}"), MAX_CONDITION)?;
        diag.gram_condition.push(f.condition);
        g.push(f.solve_vec(&(psi.adjoint() * &e)));
        factors.push(f);
    }
    if k == 1 {
        return Ok((g.into_iter().map(|v| v.as_slice().to_vec()).collect(), diag));
    }

    // b = X~ g
    let y: Vec<CVector<T>> = sys.blocks.iter().zip(&g).map(|(psi, gk)| psi * gk).collect();
    let m = (k - 1) * n;
    let mut b = Vec::with_capacity(m);
    for i in 0..k - 1 {
        b.extend(y[i].iter().zip(y[i + 1].iter()).map(|(a, c)| *a - *c));
    }

    let proj: Vec<CMatrix<T>> = sys
        .blocks
        .iter()
        .zip(&factors)
        .map(|(psi, f)| {
            let q = f.orthonormal_basis(psi);
            &q * q.adjoint()
        })
        .collect();
    let mut d = CMatrix::<T>::zeros(m, m);
    for i in 0..k - 1 {
        let diag_block = &proj[i] + &proj[i + 1];
        d.view_mut((i * n, i * n), (n, n)).copy_from(&diag_block);
        if i + 1 < k - 1 {
            let off = -&proj[i + 1];
            d.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&off);
            d.view_mut(((i + 1) * n, i * n), (n, n)).copy_from(&off);
        }
    }
    let tol = 64.0 * m as f64 * T::eps_f64();
    let pc = PivotedCholesky::new(&d, tol)?;
    let retained = pc.retained_condition();
    diag.d_condition = Some(pc.condition_estimate());
    diag.d_rank = Some((pc.rank(), m));
    if pc.rank() > 0 && !(retained < MAX_CONDITION) {
        return Err(Error::Conditioning {
            what: "constraint matrix D".into(),
            condition: retained,
        });
    }
    if !pc.is_full_rank() {
        diag.warn(format!(
            "constraint matrix D is rank deficient (rank {} of {m}, condition estimate {:.3e}); the waveforms share spectral structure and the redundant constraints are dropped",
            pc.rank(),
            pc.condition_estimate()
        ));
    }
    let lambda = pc.solve(&b);

    // h_k = g_k - G_k^-1 (X~^H lambda)_k
    let mut filters = Vec::with_capacity(k);
    for i in 0..k {
        let psi_h = sys.blocks[i].adjoint();
        let mut r = CVector::<T>::zeros(sys.taps());
        if i < k - 1 {
            r += &psi_h * cvector(&lambda[i * n..(i + 1) * n]);
        }
        if i > 0 {
            r -= &psi_h * cvector(&lambda[(i - 1) * n..i * n]);
        }
        let h = &g[i] - factors[i].solve_vec(&r);
        filters.push(h.as_slice().to_vec());
    }
    check_constraint(sys, &filters, e_block, &diag)?;
    Ok((filters, diag))
}

/// Closed-form solution for the circular flavor.
///
/// Every circulant is diagonalized by the DFT, so `G_k`, the projectors and
/// `D` reduce to independent `K`-variable problems per frequency bin.
pub fn solve_circular<T: Real>(sys: &BlockSystem<T>, e_block: &[Cx<T>]) -> Result<(Vec<Vec<Cx<T>>>, SolveDiagnostics)> {
    if sys.flavor != Flavor::Circular {
        return invalid("solve_circular needs a circular-flavor system");
    }
    let (k, n) = (sys.k(), sys.n());
    if e_block.len() != n {
        return invalid(format!("target block has length {}, expected {n}", e_block.len()));
    }
    let mut diag = SolveDiagnostics::default();

    let spectra: Vec<Vec<Cx<T>>> = sys
        .blocks
        .iter()
        .map(|c| dft_padded(c.column(0).as_slice(), n))
        .collect();
    for (i, s) in spectra.iter().enumerate() {
        let (bin, lo) = s
            .iter()
            .enumerate()
            .map(|(f, z)| (f, to_f64(z.norm())))
            .fold((0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
        let hi = s.iter().map(|z| to_f64(z.norm())).fold(0.0, f64::max);
        let cond = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
        if !(cond < MAX_CONDITION) {
            return Err(Error::Conditioning {
                what: format!("circulant of waveform {i} is singular at DFT bin {bin} (|X| = {lo:.3e})"),
                condition: cond,
            });
        }
        diag.gram_condition.push(cond);
    }
    let spec_e = dft_padded(e_block, n);

    let mut freq: Vec<Vec<Cx<T>>> = vec![vec![Cx::zero(); n]; k];
    let mut g = vec![Cx::zero(); k];
    let mut p = vec![T::zero(); k];
    let mut b = vec![Cx::zero(); k.saturating_sub(1)];
    for f in 0..n {
        for i in 0..k {
            let s = spectra[i][f];
            let mag2 = s.norm_sqr();
            // G_k^-1 Psi_k^H e; the per-bin projector Psi G^-1 Psi^H is 1
            g[i] = s.conj() * spec_e[f] / mag2;
            p[i] = T::one();
        }
        for i in 0..k.saturating_sub(1) {
            b[i] = spectra[i][f] * g[i] - spectra[i + 1][f] * g[i + 1];
        }
        let lambda = solve_tridiagonal(&p, &b);
        for i in 0..k {
            let s = spectra[i][f];
            let mut r = Cx::zero();
            if i + 1 < k {
                r += lambda[i];
            }
            if i > 0 {
                r -= lambda[i - 1];
            }
            freq[i][f] = g[i] - s.conj() * r / s.norm_sqr();
        }
    }
    if k > 1 {
        // eigenvalues of tridiag(-1, 2, -1) of order K-1 are 2 - 2cos(j pi / K)
        let kf = k as f64;
        let lmin = 2.0 - 2.0 * (std::f64::consts::PI / kf).cos();
        let lmax = 2.0 - 2.0 * ((kf - 1.0) * std::f64::consts::PI / kf).cos();
        diag.d_condition = Some(lmax / lmin);
        diag.d_rank = Some(((k - 1) * n, (k - 1) * n));
    }
    let filters: Vec<Vec<Cx<T>>> = freq.iter().map(|h| idft(h)).collect();
    check_constraint(sys, &filters, e_block, &diag)?;
    Ok((filters, diag))
}

/// Solves the per-bin system with diagonal `p_i + p_{i+1}` and
/// off-diagonal `-p_{i+1}` by the Thomas algorithm.
fn solve_tridiagonal<T: Real>(p: &[T], b: &[Cx<T>]) -> Vec<Cx<T>> {
    let m = b.len();
    if m == 0 {
        return Vec::new();
    }
    let mut c = vec![T::zero(); m];
    let mut d = vec![Cx::zero(); m];
    let mut denom = p[0] + p[1];
    c[0] = -p[1] / denom;
    d[0] = b[0] / denom;
    for i in 1..m {
        let a = -p[i];
        denom = p[i] + p[i + 1] - a * c[i - 1];
        c[i] = if i + 1 < m { -p[i + 1] / denom } else { T::zero() };
        d[i] = (b[i] - d[i - 1] * a) / denom;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] = x[i] - x[i + 1] * c[i];
    }
    x
}

fn check_constraint<T: Real>(sys: &BlockSystem<T>, filters: &[Vec<Cx<T>>], e_block: &[Cx<T>], diag: &SolveDiagnostics) -> Result<()> {
    let stacked: Vec<Cx<T>> = filters.iter().flatten().copied().collect();
    let resid = vec_norm(&sys.apply_xtil(&stacked));
    let e_norm = vec_norm(e_block) * (sys.k() as f64).sqrt();
    let tol = constraint_tolerance::<T>() * e_norm;
    if !(resid <= tol) || stacked.iter().any(|z| !Float::is_finite(z.re) || !Float::is_finite(z.im)) {
        return Err(Error::Conditioning {
            what: format!("constraint residual {resid:.3e} exceeds {tol:.3e} after solving"),
            condition: diag.d_condition.unwrap_or(f64::INFINITY),
        });
    }
    Ok(())
}
