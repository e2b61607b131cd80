//! Receiver chain: per-pulse filtering, slow-time FFT, detection, and the
//! Monte-Carlo drivers for detection probability and symbol error rate.

mod montecarlo;

use std::path::Path;

use nalgebra::DMatrix;
use num_traits::Zero;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::convmat::Flavor;
use crate::dsp::{linear_convolve, CircularConvolver};
use crate::error::{invalid, Result};
use crate::export::{atomic_write, csv_rows_bytes, fmt_f64, write_json};
use crate::filterdesign::FilterBank;
use crate::radarsim::{DataMatrix, PulseTrain, TargetSpec};
use crate::scalar::{lit, to_f64, Cx, Real};

pub use montecarlo::{
    estimate_pd, estimate_pd_multi, simulate_ser, snr_at_ser, wilson_interval, CurvePoint, PdSetup, WILSON_Z,
};

/// How the taps are applied to each received column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplyMode {
    Linear,
    Circular,
}

impl ApplyMode {
    /// Circular banks default to circular application, linear banks to linear.
    pub fn default_for(flavor: Flavor) -> Self {
        match flavor {
            Flavor::Linear => ApplyMode::Linear,
            Flavor::Circular => ApplyMode::Circular,
        }
    }
}

/// Filters every column with the filter of its symbol and aligns the
/// output so a scatterer at gate `g` peaks at output row `g`.
///
/// Linear mode: row `g` is sample `g + peak_index` of the linear
/// convolution. Circular mode (circular banks only): gates are processed in
/// blocks of `L_f`; block `b` circularly convolves the `L + L_f - 1` input
/// samples starting at gate `b L_f`, and gate `b L_f + j` reads sample
/// `(j + peak_index) mod (L + L_f - 1)`. With at most `L_f` gates the whole
/// frame is one block and the circular design's response is reproduced
/// exactly.
pub fn apply_filterbank<T: Real>(data: &DataMatrix<T>, bank: &FilterBank<T>, train: &PulseTrain, mode: ApplyMode) -> Result<DataMatrix<T>> {
    if train.symbol_indices != data.symbol_indices {
        return invalid("pulse train does not match the data columns");
    }
    train.validate(bank.k())?;
    let gates = data.n_gates;
    let l = bank.dims.l;
    if data.rows() != gates + l - 1 {
        return invalid(format!(
            "data has {} fast-time rows, expected {} for {gates} gates and L = {l}",
            data.rows(),
            gates + l - 1
        ));
    }
    let p = bank.peak_index;
    let mut out = Vec::with_capacity(gates * data.pulses());
    match mode {
        ApplyMode::Linear => {
            for (m, &k) in train.symbol_indices.iter().enumerate() {
                let z = linear_convolve(data.column(m), &bank.filters[k]);
                out.extend((0..gates).map(|g| z.get(g + p).copied().unwrap_or_else(Cx::zero)));
            }
        }
        ApplyMode::Circular => {
            if bank.flavor != Flavor::Circular {
                return invalid("circular application needs a circular-flavor bank");
            }
            let n = bank.dims.n();
            let block = bank.dims.l_f;
            let conv = CircularConvolver::new(&bank.filters, n);
            for (m, &k) in train.symbol_indices.iter().enumerate() {
                let col = data.column(m);
                let mut g0 = 0;
                while g0 < gates {
                    let end = (g0 + n).min(col.len());
                    let c = conv.apply(&col[g0..end], k);
                    let len = block.min(gates - g0);
                    out.extend((0..len).map(|j| c[(j + p) % n]));
                    g0 += block;
                }
            }
        }
    }
    Ok(DataMatrix {
        entries: DMatrix::from_vec(gates, data.pulses(), out),
        gate_offset: data.gate_offset,
        n_gates: gates,
        symbol_indices: data.symbol_indices.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum DopplerWindow {
    Rectangular,
    /// 4-term Blackman-Harris, about -92 dB sidelobes.
    #[default]
    BlackmanHarris,
}


impl DopplerWindow {
    pub fn coefficients(self, m: usize) -> Vec<f64> {
        match self {
            DopplerWindow::Rectangular => vec![1.0; m],
            DopplerWindow::BlackmanHarris => {
                let a = [0.35875, 0.48829, 0.14128, 0.01168];
                // periodic form, matched to an M-point DFT
                (0..m)
                    .map(|i| {
                        let x = std::f64::consts::TAU * i as f64 / m as f64;
                        a[0] - a[1] * x.cos() + a[2] * (2.0 * x).cos() - a[3] * (3.0 * x).cos()
                    })
                    .collect()
            }
        }
    }
}

/// `|FFT|` over slow time for every range gate.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeDopplerMap {
    /// `gates x M`, column `i` is Doppler `doppler_axis[i]`.
    pub magnitudes: DMatrix<f64>,
    pub doppler_axis: Vec<f64>,
    pub range_axis: Vec<usize>,
}

impl RangeDopplerMap {
    pub fn n_doppler(&self) -> usize {
        self.doppler_axis.len()
    }

    /// Column holding normalized Doppler `nu` (nearest bin, wrapped).
    pub fn doppler_bin(&self, nu: f64) -> usize {
        let m = self.n_doppler() as f64;
        let f = (nu * m).round().rem_euclid(m) as usize;
        (f + doppler_offset(self.n_doppler())) % self.n_doppler()
    }

    /// Rows `first..first+count` (clamped), e.g. the central gates.
    pub fn crop(&self, first: usize, count: usize) -> RangeDopplerMap {
        let rows = self.magnitudes.nrows();
        let first = first.min(rows);
        let count = count.min(rows - first);
        RangeDopplerMap {
            magnitudes: self.magnitudes.rows(first, count).into_owned(),
            doppler_axis: self.doppler_axis.clone(),
            range_axis: self.range_axis[first..first + count].to_vec(),
        }
    }

    /// The `count` gates centred on the middle of the map.
    pub fn central(&self, count: usize) -> RangeDopplerMap {
        let rows = self.magnitudes.nrows();
        self.crop(rows.saturating_sub(count) / 2, count)
    }

    /// `<stem>.csv` (one row per gate, one column per Doppler bin) and
    /// `<stem>.json` (axes).
    pub fn save(&self, dir: &Path, stem: &str, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["gate".to_string()];
        header.extend((0..self.n_doppler()).map(|i| format!("bin{i}")));
        let rows = (0..self.magnitudes.nrows()).map(|r| {
            let mut row = vec![self.range_axis[r].to_string()];
            row.extend((0..self.n_doppler()).map(|c| fmt_f64(self.magnitudes[(r, c)])));
            row
        });
        atomic_write(&dir.join(format!("{stem}.csv")), &csv_rows_bytes(&header, rows)?)?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &serde_json::json!({
                "doppler_axis": self.doppler_axis,
                "range_axis": self.range_axis,
                "units": {"doppler": "cycles/pulse", "magnitude": "linear"},
                "config_hash": config_hash,
            }),
        )
    }
}

/// Index of Doppler zero after the shift that puts the axis on (-0.5, 0.5].
fn doppler_offset(m: usize) -> usize {
    m.div_ceil(2) - 1
}

/// Normalized Doppler of each shifted bin; spans (-0.5, 0.5] in steps `1/M`.
pub fn doppler_axis(m: usize) -> Vec<f64> {
    let off = doppler_offset(m) as f64;
    (0..m).map(|i| (i as f64 - off) / m as f64).collect()
}

/// Windowed `M`-point FFT along every row of the filtered data.
pub fn range_doppler_map<T: Real>(filtered: &DataMatrix<T>, window: DopplerWindow) -> Result<RangeDopplerMap> {
    let (gates, m) = (filtered.rows(), filtered.pulses());
    if m < 2 {
        return invalid("a range-Doppler map needs at least two pulses");
    }
    let w = window.coefficients(m);
    let fft = FftPlanner::<T>::new().plan_fft_forward(m);
    let off = doppler_offset(m);
    let mut mags = DMatrix::<f64>::zeros(gates, m);
    let mut buf = vec![Cx::<T>::zero(); m];
    for r in 0..gates {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = filtered.entries[(r, c)].scale(lit(w[c]));
        }
        fft.process(&mut buf);
        for (f, z) in buf.iter().enumerate() {
            mags[(r, (f + off) % m)] = to_f64(z.norm());
        }
    }
    Ok(RangeDopplerMap {
        magnitudes: mags,
        doppler_axis: doppler_axis(m),
        range_axis: (0..gates).map(|g| g + filtered.gate_offset).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub gate: usize,
    pub doppler_bin: usize,
    pub doppler: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detections: Vec<Detection>,
    /// Linear magnitude threshold actually applied.
    pub threshold: f64,
    /// Truth targets with at least one matching detection.
    pub truth_matches: usize,
}

impl DetectionResult {
    /// Counts truth targets hit by a detection at the same gate and within
    /// half a Doppler bin (inclusive).
    pub fn score(&mut self, truth: &[TargetSpec], n_doppler: usize) -> usize {
        self.truth_matches = truth.iter().filter(|t| self.matches(t, n_doppler)).count();
        self.truth_matches
    }

    pub fn matches(&self, t: &TargetSpec, n_doppler: usize) -> bool {
        let half = 0.5 / n_doppler as f64 + 1e-9;
        self.detections.iter().any(|d| {
            let dv = (d.doppler - t.normalized_doppler + 0.5).rem_euclid(1.0) - 0.5;
            d.gate == t.range_cell && dv.abs() <= half
        })
    }
}

/// Local maxima (3x3, Doppler wrapping) outside `|nu| <= exclusion` whose
/// magnitude exceeds the map median by `threshold_db`.
pub fn detect_targets(map: &RangeDopplerMap, exclusion: f64, threshold_db: f64) -> Result<DetectionResult> {
    if !threshold_db.is_finite() {
        return invalid("threshold_db must be finite");
    }
    let mut all: Vec<f64> = map.magnitudes.iter().copied().collect();
    let threshold = if all.is_empty() {
        f64::INFINITY
    } else {
        let mid = all.len() / 2;
        let (_, med, _) = all.select_nth_unstable_by(mid, f64::total_cmp);
        *med * 10f64.powf(threshold_db / 20.0)
    };
    let (rows, m) = map.magnitudes.shape();
    let mut detections = Vec::new();
    for c in 0..m {
        let nu = map.doppler_axis[c];
        if nu.abs() <= exclusion {
            continue;
        }
        for r in 0..rows {
            let v = map.magnitudes[(r, c)];
            if !(v > threshold) {
                continue;
            }
            let mut is_max = true;
            'nb: for dr in -1i64..=1 {
                let rr = r as i64 + dr;
                if rr < 0 || rr >= rows as i64 {
                    continue;
                }
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let cc = (c as i64 + dc).rem_euclid(m as i64) as usize;
                    if map.magnitudes[(rr as usize, cc)] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                detections.push(Detection {
                    gate: map.range_axis[r],
                    doppler_bin: c,
                    doppler: nu,
                    magnitude: v,
                });
            }
        }
    }
    Ok(DetectionResult {
        detections,
        threshold,
        truth_matches: 0,
    })
}

#[cfg(test)]
mod tests;
