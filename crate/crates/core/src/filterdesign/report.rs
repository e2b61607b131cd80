use serde::{Deserialize, Serialize};

use super::FilterBank;
use crate::convmat::Flavor;
use crate::dsp::{circular_convolve, linear_convolve};
use crate::error::{invalid, Result};
use crate::scalar::{to_f64, vec_norm, Cx, Real};
use crate::waveform::WaveformAlphabet;

/// Reported in place of `-inf` when a response has no sidelobe energy.
pub const PSL_FLOOR_DB: f64 = -300.0;

/// Samples on each side of the peak excluded from the sidelobe region.
const MAINLOBE_GUARD: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub design: String,
    pub coherence_error: f64,
    /// Peak sidelobe level of each waveform/filter pair, dB re mainlobe.
    pub psl_db: Vec<f64>,
    /// Integrated sidelobe level of each pair, dB re mainlobe.
    pub isl_db: Vec<f64>,
    /// Mainlobe magnitude `|y_k[peak_index]|` of each pair.
    pub mainlobe: Vec<f64>,
    pub objective_residual: f64,
    pub constraint_residual: f64,
    pub gram_condition: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_condition: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DesignReport {
    /// Worst PSL over the bank.
    pub fn psl_max_db(&self) -> f64 {
        self.psl_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn isl_max_db(&self) -> f64 {
        self.isl_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Output of every waveform through its own filter, using the bank's
/// convolution flavor. Each output has `L + L_f - 1` samples.
pub fn filter_outputs<T: Real>(bank: &FilterBank<T>, alphabet: &WaveformAlphabet<T>) -> Result<Vec<Vec<Cx<T>>>> {
    if bank.k() != alphabet.len() {
        return invalid(format!("bank has {} filters, alphabet {} waveforms", bank.k(), alphabet.len()));
    }
    let n = bank.dims.n();
    if alphabet.pulse_len() != bank.dims.l {
        return invalid(format!("bank designed for L = {}, alphabet has L = {}", bank.dims.l, alphabet.pulse_len()));
    }
    Ok((0..bank.k())
        .map(|i| match bank.flavor {
            Flavor::Linear => linear_convolve(alphabet.samples(i), &bank.filters[i]),
            Flavor::Circular => circular_convolve(alphabet.samples(i), &bank.filters[i], n),
        })
        .collect())
}

/// `(psl_db, isl_db, mainlobe)` of one response around `peak`.
pub fn sidelobe_levels<T: Real>(y: &[Cx<T>], peak: usize) -> (f64, f64, f64) {
    let main = to_f64(y[peak].norm());
    let mut peak_side = 0.0f64;
    let mut energy = 0.0f64;
    for (i, z) in y.iter().enumerate() {
        if i.abs_diff(peak) <= MAINLOBE_GUARD {
            continue;
        }
        let m = to_f64(z.norm());
        peak_side = peak_side.max(m);
        energy += m * m;
    }
    let db = |ratio: f64, scale: f64| {
        if main == 0.0 {
            f64::INFINITY
        } else if ratio == 0.0 {
            PSL_FLOOR_DB
        } else {
            (scale * ratio.log10()).max(PSL_FLOOR_DB)
        }
    };
    (db(peak_side / main, 20.0), db(energy / (main * main), 10.0), main)
}

fn coherence_against<T: Real>(outputs: &[Vec<Cx<T>>], reference: usize) -> f64 {
    let r = &outputs[reference];
    let rn = vec_norm(r);
    let worst = outputs
        .iter()
        .map(|y| {
            let d: Vec<Cx<T>> = y.iter().zip(r).map(|(a, b)| *a - *b).collect();
            vec_norm(&d)
        })
        .fold(0.0, f64::max);
    if rn > 0.0 {
        worst / rn
    } else if worst == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Relative spread of the per-waveform outputs, measured against output
/// `reference`.
pub fn coherence_error_against<T: Real>(bank: &FilterBank<T>, alphabet: &WaveformAlphabet<T>, reference: usize) -> Result<f64> {
    let y = filter_outputs(bank, alphabet)?;
    if reference >= y.len() {
        return invalid(format!("reference {reference} out of range"));
    }
    Ok(coherence_against(&y, reference))
}

/// Scores a bank against the alphabet it was designed for.
pub fn evaluate_filterbank<T: Real>(bank: &FilterBank<T>, alphabet: &WaveformAlphabet<T>) -> Result<DesignReport> {
    let y = filter_outputs(bank, alphabet)?;
    let n = bank.dims.n();
    if bank.peak_index >= n {
        return invalid("peak_index outside the output support");
    }
    let mut psl_db = Vec::with_capacity(y.len());
    let mut isl_db = Vec::with_capacity(y.len());
    let mut mainlobe = Vec::with_capacity(y.len());
    let mut objective = 0.0;
    for yk in &y {
        let (p, i, m) = sidelobe_levels(yk, bank.peak_index);
        psl_db.push(p);
        isl_db.push(i);
        mainlobe.push(m);
        objective += yk
            .iter()
            .enumerate()
            .map(|(j, z)| {
                let t = if j == bank.peak_index { 1.0 } else { 0.0 };
                let (re, im) = (to_f64(z.re) - t, to_f64(z.im));
                re * re + im * im
            })
            .sum::<f64>();
    }
    let constraint: f64 = y
        .windows(2)
        .map(|w| {
            let d: Vec<Cx<T>> = w[0].iter().zip(&w[1]).map(|(a, b)| *a - *b).collect();
            vec_norm(&d).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(DesignReport {
        design: bank.design.label().to_string(),
        coherence_error: coherence_against(&y, 0),
        psl_db,
        isl_db,
        mainlobe,
        objective_residual: objective.sqrt(),
        constraint_residual: constraint,
        gram_condition: bank.diagnostics.gram_condition.clone(),
        d_condition: bank.diagnostics.d_condition,
        warnings: bank.diagnostics.warnings.clone(),
    })
}
