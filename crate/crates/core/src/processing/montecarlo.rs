use std::path::Path;

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply_filterbank, detect_targets, range_doppler_map, ApplyMode, DopplerWindow};
use crate::convmat::Flavor;
use crate::error::{invalid, Result};
use crate::export::{atomic_write, csv_rows_bytes, fmt_f64};
use crate::filterdesign::FilterBank;
use crate::radarsim::{generate_scene, simulate_comm_received, simulate_ncpi, PulseTrain, SceneConfig};
use crate::scalar::{to_f64, Cx, Real};
use crate::seeds::{derive_seed, stream_rng};
use crate::waveform::WaveformAlphabet;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959964;

/// Wilson score interval for `count` events in `trials`.
pub fn wilson_interval(count: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// SNR, dB.
    pub x: f64,
    /// Pd or SER.
    pub y: f64,
    pub trials: usize,
    /// Detections (Pd) or symbol errors (SER).
    pub count: usize,
    pub wilson_ci: (f64, f64),
}

impl CurvePoint {
    pub fn from_count(x: f64, count: usize, trials: usize) -> Self {
        Self {
            x,
            y: count as f64 / trials as f64,
            trials,
            count,
            wilson_ci: wilson_interval(count, trials, WILSON_Z),
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.wilson_ci.1 - self.wilson_ci.0
    }

    /// `x,y,ci_lo,ci_hi,trials`.
    pub fn write_csv(points: &[CurvePoint], path: &Path) -> Result<()> {
        let header: Vec<String> = ["x", "y", "ci_lo", "ci_hi", "trials"].iter().map(|s| s.to_string()).collect();
        let rows = points.iter().map(|p| {
            vec![
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(p.wilson_ci.0),
                fmt_f64(p.wilson_ci.1),
                p.trials.to_string(),
            ]
        });
        atomic_write(path, &csv_rows_bytes(&header, rows)?)
    }
}

/// Scene template and detector settings for a Pd sweep. The template's
/// `snr_db` is overwritten by each grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdSetup {
    pub scene: SceneConfig,
    pub threshold_db: f64,
    pub exclusion: f64,
    pub window: DopplerWindow,
}

fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(master, point as u64), trial as u64)
}

/// Pd curves for several banks evaluated on the same simulated data, so
/// the designs see common random numbers. A trial succeeds when every
/// configured target is detected at its gate and nearest Doppler bin.
pub fn estimate_pd_multi<T: Real>(
    alphabet: &WaveformAlphabet<T>,
    banks: &[(&FilterBank<T>, ApplyMode)],
    setup: &PdSetup,
    snr_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<CurvePoint>>> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if setup.scene.targets.is_empty() {
        return invalid("Pd needs at least one configured target");
    }
    let mut counts = vec![vec![0usize; snr_grid.len()]; banks.len()];
    for (i, &snr) in snr_grid.iter().enumerate() {
        let mut cfg = setup.scene.clone();
        cfg.snr_db = snr;
        for t in 0..trials {
            let s = trial_seed(seed, i, t);
            let scene = generate_scene::<T>(&cfg, derive_seed(s, 0))?;
            let train = PulseTrain::random(cfg.n_pulses, alphabet.len(), derive_seed(s, 1))?;
            let data = simulate_ncpi(&scene, alphabet, &train)?;
            for (b, (bank, mode)) in banks.iter().enumerate() {
                let filtered = apply_filterbank(&data, bank, &train, *mode)?;
                let map = range_doppler_map(&filtered, setup.window)?;
                let det = detect_targets(&map, setup.exclusion, setup.threshold_db)?;
                if cfg.targets.iter().all(|tg| det.matches(tg, map.n_doppler())) {
                    counts[b][i] += 1;
                }
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c.into_iter().zip(snr_grid).map(|(n, &x)| CurvePoint::from_count(x, n, trials)).collect())
        .collect())
}

/// Pd curve of a single bank.
pub fn estimate_pd<T: Real>(
    alphabet: &WaveformAlphabet<T>,
    bank: &FilterBank<T>,
    mode: ApplyMode,
    setup: &PdSetup,
    snr_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    Ok(estimate_pd_multi(alphabet, &[(bank, mode)], setup, snr_grid, trials, seed)?.remove(0))
}

/// Output sample `peak_index` of `r` filtered by `h`.
fn peak_output<T: Real>(r: &[Cx<T>], h: &[Cx<T>], peak: usize, flavor: Flavor, n: usize) -> Cx<T> {
    let mut acc = Cx::<T>::zero();
    for (i, x) in r.iter().enumerate() {
        let j = match flavor {
            Flavor::Linear if i <= peak && peak - i < h.len() => peak - i,
            Flavor::Linear => continue,
            Flavor::Circular => (peak + n - i % n) % n,
        };
        acc += *x * h[j];
    }
    acc
}

/// SER over `snr_grid`. Each trial draws a symbol, sends it through a
/// unit-gain, zero-Doppler link at the grid SNR, and decides by the largest
/// `|output[peak_index]|` across the `K` filters. `snr = +inf` is noise-free.
/// Trial seeds depend only on `(seed, point, trial)`, so different banks
/// see identical symbols and noise.
pub fn simulate_ser<T: Real>(
    alphabet: &WaveformAlphabet<T>,
    bank: &FilterBank<T>,
    snr_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if bank.k() != alphabet.len() || bank.dims.l != alphabet.pulse_len() {
        return invalid("bank does not match the alphabet");
    }
    let n = bank.dims.n();
    let k = bank.k();
    let mut points = Vec::with_capacity(snr_grid.len());
    for (i, &snr) in snr_grid.iter().enumerate() {
        let mut errors = 0;
        for t in 0..trials {
            let s = trial_seed(seed, i, t);
            let sym = stream_rng(s, 0).random_range(0..k);
            let r = simulate_comm_received(&alphabet.waveforms[sym], Cx::new(1.0, 0.0), 0.0, snr, Some(derive_seed(s, 1)))?;
            let mut best = (0, f64::NEG_INFINITY);
            for (j, h) in bank.filters.iter().enumerate() {
                let v = to_f64(peak_output(&r, h, bank.peak_index, bank.flavor, n).norm());
                if v > best.1 {
                    best = (j, v);
                }
            }
            if best.0 != sym {
                errors += 1;
            }
        }
        points.push(CurvePoint::from_count(snr, errors, trials));
    }
    Ok(points)
}

/// SNR where the curve (ascending in SNR) first falls through `target`,
/// interpolating `log10(y)` linearly in dB. Zero counts are replaced by
/// `0.5 / trials`; non-finite SNRs are skipped.
pub fn snr_at_ser(curve: &[CurvePoint], target: f64) -> Option<f64> {
    let finite: Vec<CurvePoint> = curve.iter().filter(|p| p.x.is_finite()).copied().collect();
    let ly = |p: &CurvePoint| {
        let y = if p.count == 0 { 0.5 / p.trials as f64 } else { p.y };
        y.log10()
    };
    let lt = target.log10();
    finite.windows(2).find_map(|w| {
        let (a, b) = (ly(&w[0]), ly(&w[1]));
        if a >= lt && b < lt {
            Some(w[0].x + (lt - a) / (b - a) * (w[1].x - w[0].x))
        } else {
            None
        }
    })
}
