//! Uncoherent comparison designs.

use super::{bank_from_solution, DesignKind, FilterBank, SolveDiagnostics, MAX_CONDITION};
use crate::convmat::{build_linear_conv, default_peak_index, BlockSystem, Dims, Flavor};
use crate::error::{invalid, Result};
use crate::linalg::{cvector, CVector, GramFactor};
use crate::scalar::{lit, vec_norm, Real};
use crate::waveform::WaveformAlphabet;

/// Linear-flavor system without the feasibility gate; the baselines carry
/// no coherency constraint.
fn unconstrained_system<T: Real>(alphabet: &WaveformAlphabet<T>, l_f: usize, peak_index: usize) -> Result<BlockSystem<T>> {
    if l_f == 0 {
        return invalid("L_f must be at least 1");
    }
    let dims = Dims {
        k: alphabet.len(),
        l: alphabet.pulse_len(),
        l_f,
    };
    if peak_index >= dims.n() {
        return invalid(format!(
            "peak_index {peak_index} outside output length {} (default would be {})",
            dims.n(),
            default_peak_index(dims.l, l_f)
        ));
    }
    let blocks = (0..dims.k)
        .map(|i| Ok(build_linear_conv(alphabet.samples(i), l_f)?.entries))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockSystem {
        blocks,
        flavor: Flavor::Linear,
        dims,
        peak_index,
    })
}

/// Independent least-squares mismatched filter per waveform,
/// `h_k = (Psi_k^H Psi_k)^-1 Psi_k^H e_k`.
pub fn design_uncoherent_ls_baseline<T: Real>(alphabet: &WaveformAlphabet<T>, l_f: usize, peak_index: usize) -> Result<FilterBank<T>> {
    let sys = unconstrained_system(alphabet, l_f, peak_index)?;
    let e = cvector(&sys.e_block());
    let mut diag = SolveDiagnostics::default();
    let mut filters = Vec::with_capacity(sys.k());
    for (i, psi) in sys.blocks.iter().enumerate() {
        let f = GramFactor::of(psi, &format!("Gram matrix of waveform {i}"), MAX_CONDITION)?;
        diag.gram_condition.push(f.condition);
        filters.push(f.solve_vec(&(psi.adjoint() * &e)).as_slice().to_vec());
    }
    Ok(bank_from_solution(&sys, DesignKind::BaselineLs, filters, diag))
}

/// `sum_k ||Psi_k h_k - e||^2 + mu sum_k ||Psi_k h_k - Psi_{k+1} h_{k+1}||^2`.
pub fn penalized_objective<T: Real>(outputs: &[CVector<T>], e: &CVector<T>, mu: f64) -> f64 {
    let fit: f64 = outputs.iter().map(|y| vec_norm((y - e).as_slice()).powi(2)).sum();
    let pen: f64 = outputs
        .windows(2)
        .map(|w| vec_norm((&w[0] - &w[1]).as_slice()).powi(2))
        .sum();
    fit + mu * pen
}

/// Quadratic coherency penalty minimized by block-coordinate descent.
///
/// Each sweep minimizes exactly over one filter at a time: with the other
/// outputs fixed, the optimal output of waveform `k` is the projection onto
/// the column space of `Psi_k` of `(e + mu * sum of neighbour outputs) /
/// (1 + mu * #neighbours)`. The objective therefore never increases. The
/// sweep starts from the unconstrained least-squares bank.
pub fn design_penalized_iterative_baseline<T: Real>(
    alphabet: &WaveformAlphabet<T>,
    l_f: usize,
    peak_index: usize,
    mu: f64,
    iters: usize,
) -> Result<FilterBank<T>> {
    if !(mu.is_finite() && mu >= 0.0) {
        return invalid(format!("penalty weight mu = {mu} must be finite and non-negative"));
    }
    if iters == 0 {
        return invalid("iters must be at least 1");
    }
    let sys = unconstrained_system(alphabet, l_f, peak_index)?;
    let k = sys.k();
    let e = cvector(&sys.e_block());
    let mut diag = SolveDiagnostics::default();
    let mut factors = Vec::with_capacity(k);
    for (i, psi) in sys.blocks.iter().enumerate() {
        let f = GramFactor::of(psi, &format!("Gram matrix of waveform {i}"), MAX_CONDITION)?;
        diag.gram_condition.push(f.condition);
        factors.push(f);
    }
    let fit = |i: usize, t: &CVector<T>| factors[i].solve_vec(&(sys.blocks[i].adjoint() * t));
    let mut h: Vec<CVector<T>> = (0..k).map(|i| fit(i, &e)).collect();
    let mut y: Vec<CVector<T>> = (0..k).map(|i| &sys.blocks[i] * &h[i]).collect();
    let mu_t: T = lit(mu);
    for _ in 0..iters {
        for i in 0..k {
            let mut t = e.clone();
            let mut count = 0.0;
            if i > 0 {
                t += y[i - 1].scale(mu_t);
                count += 1.0;
            }
            if i + 1 < k {
                t += y[i + 1].scale(mu_t);
                count += 1.0;
            }
            let t = t.unscale(lit(1.0 + mu * count));
            h[i] = fit(i, &t);
            y[i] = &sys.blocks[i] * &h[i];
        }
        diag.objective_history.push(penalized_objective(&y, &e, mu));
    }
    let filters = h.into_iter().map(|v| v.as_slice().to_vec()).collect();
    Ok(bank_from_solution(&sys, DesignKind::BaselinePenalized, filters, diag))
}
