//! Chip sequences, constant-modulus DPSK/MSK baseband synthesis and the
//! passband modulator/demodulator pair.

use num_traits::{Float, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::dft_padded;
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Cx, Real};
use crate::seeds::derive_seed;

/// Timing parameters shared by every waveform of an alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub n_chips: usize,
    /// Chip interval in seconds.
    pub chip_duration: f64,
    /// Pulse-shaping frequency, always `1 / (2 * chip_duration)`.
    pub baseband_freq: f64,
    /// Baseband sample rate in Hz.
    pub sample_rate: f64,
    /// Carrier frequency in Hz; only used by the passband utilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_freq: Option<f64>,
}

impl ModulationParams {
    pub fn new(n_chips: usize, chip_duration: f64, sample_rate: f64) -> Result<Self> {
        let p = Self {
            n_chips,
            chip_duration,
            baseband_freq: 1.0 / (2.0 * chip_duration),
            sample_rate,
            carrier_freq: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// 30 chips of 1 ms sampled at 3 kHz (90 samples per pulse).
    pub fn standard() -> Self {
        Self::new(30, 1e-3, 3e3).expect("valid defaults")
    }

    pub fn with_carrier(mut self, carrier_freq: f64) -> Self {
        self.carrier_freq = Some(carrier_freq);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chips == 0 {
            return invalid("n_chips must be at least 1");
        }
        if !(self.chip_duration.is_finite() && self.chip_duration > 0.0) {
            return invalid("chip_duration must be positive and finite");
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return invalid("sample_rate must be positive and finite");
        }
        let fb = 1.0 / (2.0 * self.chip_duration);
        if ((self.baseband_freq - fb) / fb).abs() > 1e-12 {
            return invalid(format!(
                "baseband_freq {} must equal 1/(2*chip_duration) = {fb}",
                self.baseband_freq
            ));
        }
        let spc = self.sample_rate * self.chip_duration;
        if spc < 0.5 || (spc - spc.round()).abs() > 1e-9 * spc.max(1.0) {
            return invalid(format!(
                "sample_rate * chip_duration = {spc} is not a positive integer"
            ));
        }
        Ok(())
    }

    pub fn samples_per_chip(&self) -> usize {
        (self.sample_rate * self.chip_duration).round() as usize
    }

    /// Samples per pulse, `L`.
    pub fn len(&self) -> usize {
        self.n_chips * self.samples_per_chip()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pulse duration `T = N * chip_duration`.
    pub fn pulse_duration(&self) -> f64 {
        self.n_chips as f64 * self.chip_duration
    }
}

/// Binary chip values in {-1, +1}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipSequence {
    pub chips: Vec<i8>,
    pub seed: u64,
}

/// Draws `n` chips as signs of standard normal variates.
pub fn generate_chip_sequence(n: usize, seed: u64) -> Result<ChipSequence> {
    if n == 0 {
        return invalid("chip sequence length must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chips = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            if g >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(ChipSequence { chips, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Dpsk,
    Msk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasebandWaveform<T: Real> {
    pub samples: Vec<Cx<T>>,
    pub params: ModulationParams,
    pub kind: WaveformKind,
    /// Seed of the chip sequence the waveform was synthesized from.
    pub seed: Option<u64>,
}

impl<T: Real> BasebandWaveform<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest deviation of `|samples[p]|` from one.
    pub fn modulus_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|z| (to_f64(z.norm()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Wraps raw samples, e.g. a hand-built test pulse.
    pub fn from_samples(samples: Vec<Cx<T>>, params: ModulationParams, kind: WaveformKind) -> Self {
        Self {
            samples,
            params,
            kind,
            seed: None,
        }
    }

    /// `<stem>.csv` (`index,real,imag`) plus a `<stem>.json` header with the
    /// modulation parameters, kind and chip seed.
    pub fn save(&self, dir: &std::path::Path, stem: &str, config_hash: Option<&str>) -> Result<()> {
        crate::export::atomic_write(&dir.join(format!("{stem}.csv")), &crate::export::complex_csv_bytes(&self.samples)?)?;
        crate::export::write_json(
            &dir.join(format!("{stem}.json")),
            &serde_json::json!({
                "params": self.params,
                "kind": self.kind,
                "seed": self.seed,
                "len": self.len(),
                "config_hash": config_hash,
            }),
        )
    }
}

/// Differential phase chip value `exp(j*pi*(x+1)/2)`, which is `-x` for `x = ±1`.
#[inline]
fn chip_phasor(x: i8) -> f64 {
    -f64::from(x)
}

fn check_chips(chips: &ChipSequence, params: &ModulationParams) -> Result<()> {
    params.validate()?;
    if chips.chips.len() != params.n_chips {
        return invalid(format!(
            "chip sequence has {} chips, params expect {}",
            chips.chips.len(),
            params.n_chips
        ));
    }
    if chips.chips.iter().any(|&c| c != 1 && c != -1) {
        return invalid("chips must be exactly -1 or +1");
    }
    Ok(())
}

/// DPSK pulse: half-chip-delayed `|cos|` branch on I, `|sin|` branch on Q.
///
/// The digital phase sequence is a step function, so the half-chip delay is
/// evaluated exactly at each sample instant. Before `t = chip/2` the delayed
/// branch holds the first chip.
pub fn synth_dpsk<T: Real>(chips: &ChipSequence, params: &ModulationParams) -> Result<BasebandWaveform<T>> {
    check_chips(chips, params)?;
    let spc = params.samples_per_chip();
    let len = params.len();
    let samples = (0..len)
        .map(|p| {
            let now = chip_phasor(chips.chips[p / spc]);
            // floor((t - tau/2) / tau) in sample units: (2p - spc) / (2 spc)
            let delayed_idx = if 2 * p < spc { 0 } else { (2 * p - spc) / (2 * spc) };
            let delayed = chip_phasor(chips.chips[delayed_idx]);
            // 2*pi*f_b*t = pi * p / spc
            let arg = std::f64::consts::PI * p as f64 / spc as f64;
            Cx::new(lit(delayed * arg.cos().abs()), lit(now * arg.sin().abs()))
        })
        .collect();
    Ok(BasebandWaveform {
        samples,
        params: *params,
        kind: WaveformKind::Dpsk,
        seed: Some(chips.seed),
    })
}

/// MSK pulse `exp(-j(theta_n + s_d(t) * pi * f_b * t))`, with the chip offset
/// `theta_n` advanced so the phase is continuous at every chip boundary.
pub fn synth_msk<T: Real>(chips: &ChipSequence, params: &ModulationParams, theta0: f64) -> Result<BasebandWaveform<T>> {
    check_chips(chips, params)?;
    if !theta0.is_finite() {
        return invalid("theta0 must be finite");
    }
    let spc = params.samples_per_chip();
    let mut samples = Vec::with_capacity(params.len());
    let mut theta = theta0;
    let mut prev: Option<f64> = None;
    for (n, &c) in chips.chips.iter().enumerate() {
        let s = chip_phasor(c);
        if let Some(sp) = prev {
            // pi * f_b * t at t = n * tau equals n * pi / 2
            theta += (sp - s) * n as f64 * std::f64::consts::FRAC_PI_2;
        }
        prev = Some(s);
        for q in 0..spc {
            let p = n * spc + q;
            let ramp = std::f64::consts::FRAC_PI_2 * p as f64 / spc as f64;
            let phase = -(theta + s * ramp);
            samples.push(Cx::new(lit(phase.cos()), lit(phase.sin())));
        }
    }
    Ok(BasebandWaveform {
        samples,
        params: *params,
        kind: WaveformKind::Msk,
        seed: Some(chips.seed),
    })
}

fn passband_factor(params: &ModulationParams, carrier_freq: f64, pass_rate: f64) -> Result<usize> {
    if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
        return invalid("carrier_freq must be positive");
    }
    if pass_rate <= 2.0 * (carrier_freq + params.baseband_freq) {
        return invalid(format!(
            "pass_rate {pass_rate} Hz undersamples carrier {carrier_freq} Hz (needs > {})",
            2.0 * (carrier_freq + params.baseband_freq)
        ));
    }
    let factor = pass_rate / params.sample_rate;
    if (factor - factor.round()).abs() > 1e-9 * factor || factor.round() < 1.0 {
        return invalid(format!(
            "pass_rate {pass_rate} must be an integer multiple of the baseband rate {}",
            params.sample_rate
        ));
    }
    Ok(factor.round() as usize)
}

/// `Re(Psi(t) * exp(j*2*pi*f_c*t))` on the passband grid. Baseband samples
/// are held over their sample interval.
pub fn to_passband<T: Real>(wf: &BasebandWaveform<T>, carrier_freq: f64, pass_rate: f64) -> Result<Vec<T>> {
    let factor = passband_factor(&wf.params, carrier_freq, pass_rate)?;
    let w = 2.0 * std::f64::consts::PI * carrier_freq / pass_rate;
    Ok((0..wf.len() * factor)
        .map(|q| {
            let z = wf.samples[q / factor];
            let (s, c) = (w * q as f64).sin_cos();
            z.re * lit(c) - z.im * lit(s)
        })
        .collect())
}

/// Envelope/phase form `|Psi(t)| cos(2*pi*f_c*t + theta(t))` of the same signal.
pub fn to_passband_polar<T: Real>(wf: &BasebandWaveform<T>, carrier_freq: f64, pass_rate: f64) -> Result<Vec<T>> {
    let factor = passband_factor(&wf.params, carrier_freq, pass_rate)?;
    let w = 2.0 * std::f64::consts::PI * carrier_freq / pass_rate;
    Ok((0..wf.len() * factor)
        .map(|q| {
            let z = wf.samples[q / factor];
            let (env, theta) = (to_f64(z.norm()), to_f64(z.arg()));
            lit(env * (w * q as f64 + theta).cos())
        })
        .collect())
}

/// I/Q demodulation: mix with `2cos` / `-2sin`, then a centered moving
/// average over one carrier period. Output stays on the passband grid.
pub fn demodulate_iq<T: Real>(passband: &[T], carrier_freq: f64, pass_rate: f64) -> Result<Vec<Cx<T>>> {
    if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
        return invalid("carrier_freq must be positive");
    }
    if pass_rate <= 2.0 * carrier_freq {
        return invalid(format!("pass_rate {pass_rate} Hz undersamples carrier {carrier_freq} Hz"));
    }
    let w = 2.0 * std::f64::consts::PI * carrier_freq / pass_rate;
    let mixed: Vec<(f64, f64)> = passband
        .iter()
        .enumerate()
        .map(|(q, &x)| {
            let (s, c) = (w * q as f64).sin_cos();
            let x = to_f64(x);
            (2.0 * x * c, -2.0 * x * s)
        })
        .collect();
    let period = ((pass_rate / carrier_freq).round() as usize).max(1);
    let half = period / 2;
    // prefix sums for the moving average
    let mut acc = vec![(0.0, 0.0); mixed.len() + 1];
    for (q, &(i, qv)) in mixed.iter().enumerate() {
        acc[q + 1] = (acc[q].0 + i, acc[q].1 + qv);
    }
    Ok((0..mixed.len())
        .map(|q| {
            let lo = q.saturating_sub(half);
            let hi = (lo + period).min(mixed.len());
            let lo = hi.saturating_sub(period);
            let n = (hi - lo) as f64;
            Cx::new(lit((acc[hi].0 - acc[lo].0) / n), lit((acc[hi].1 - acc[lo].1) / n))
        })
        .collect())
}

/// Picks the centre sample of each `factor`-long hold interval, undoing the
/// hold applied by [`to_passband`].
pub fn decimate_hold<T: Real>(samples: &[Cx<T>], factor: usize) -> Vec<Cx<T>> {
    samples.iter().skip(factor / 2).step_by(factor.max(1)).copied().collect()
}

/// K waveforms forming the communication symbol set.
#[derive(Clone, Debug)]
pub struct WaveformAlphabet<T: Real> {
    pub waveforms: Vec<BasebandWaveform<T>>,
    pub bits_per_symbol: u32,
}

impl<T: Real> WaveformAlphabet<T> {
    pub fn new(waveforms: Vec<BasebandWaveform<T>>) -> Result<Self> {
        let k = waveforms.len();
        if k == 0 || !k.is_power_of_two() {
            return invalid(format!("alphabet size {k} is not a power of two"));
        }
        let first = &waveforms[0];
        for (i, w) in waveforms.iter().enumerate() {
            if w.len() != first.len() || w.params != first.params {
                return invalid(format!("waveform {i} differs in length or parameters from waveform 0"));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                let rho = xcorr_peak(&waveforms[i].samples, &waveforms[j].samples);
                if rho >= 1.0 - 1e-6 {
                    return invalid(format!(
                        "waveforms {i} and {j} are not distinct (normalized cross-correlation {rho})"
                    ));
                }
            }
        }
        Ok(Self {
            bits_per_symbol: k.trailing_zeros(),
            waveforms,
        })
    }

    pub fn len(&self) -> usize {
        self.waveforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms.is_empty()
    }

    /// Samples per pulse, `L`.
    pub fn pulse_len(&self) -> usize {
        self.waveforms[0].len()
    }

    pub fn params(&self) -> &ModulationParams {
        &self.waveforms[0].params
    }

    pub fn samples(&self, k: usize) -> &[Cx<T>] {
        &self.waveforms[k].samples
    }
}

/// Peak of the normalized cross-correlation magnitude over all lags.
pub fn xcorr_peak<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> f64 {
    let na = crate::scalar::vec_norm(a);
    let nb = crate::scalar::vec_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (la, lb) = (a.len() as isize, b.len() as isize);
    let mut best = 0.0f64;
    for lag in -(lb - 1)..la {
        let mut acc = Cx::<f64>::zero();
        for (j, y) in b.iter().enumerate() {
            let i = j as isize + lag;
            if (0..la).contains(&i) {
                let x = a[i as usize];
                acc += Cx::new(to_f64(x.re), to_f64(x.im)) * Cx::new(to_f64(y.re), -to_f64(y.im));
            }
        }
        best = best.max(acc.norm());
    }
    best / (na * nb)
}

/// Rejects candidate pulses whose zero-padded DFT comes close to zero.
///
/// A circular receive filter inverts the pulse spectrum on a `dft_len`-point
/// grid, so a near-zero bin makes that design singular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralScreen {
    pub dft_len: usize,
    /// Largest accepted `max|X| / min|X|`.
    pub max_ratio: f64,
}

impl SpectralScreen {
    pub fn ratio<T: Real>(&self, samples: &[Cx<T>]) -> f64 {
        spectral_ratio(samples, self.dft_len)
    }
}

/// `max|X[k]| / min|X[k]|` over the `len`-point DFT of the zero-padded pulse.
pub fn spectral_ratio<T: Real>(samples: &[Cx<T>], len: usize) -> f64 {
    let spectrum = dft_padded(samples, len);
    let (lo, hi) = spectrum.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| {
        let m = to_f64(z.norm());
        (lo.min(m), hi.max(m))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Draws a K-waveform alphabet from `seed`.
///
/// Candidate `i` uses the chip seed derived from `(seed, i)`; candidates
/// that duplicate an accepted waveform or fail the optional spectral screen
/// are skipped, so the result is a deterministic function of the arguments.
pub fn draw_alphabet<T: Real>(
    kind: WaveformKind,
    k: usize,
    params: &ModulationParams,
    seed: u64,
    screen: Option<SpectralScreen>,
) -> Result<WaveformAlphabet<T>> {
    if k == 0 || !k.is_power_of_two() {
        return invalid(format!("alphabet size {k} is not a power of two"));
    }
    params.validate()?;
    const MAX_CANDIDATES: u64 = 4096;
    let mut accepted: Vec<BasebandWaveform<T>> = Vec::with_capacity(k);
    for i in 0..MAX_CANDIDATES {
        if accepted.len() == k {
            break;
        }
        let chips = generate_chip_sequence(params.n_chips, derive_seed(seed, i))?;
        let wf = match kind {
            WaveformKind::Dpsk => synth_dpsk(&chips, params)?,
            WaveformKind::Msk => synth_msk(&chips, params, 0.0)?,
        };
        if let Some(s) = screen {
            if s.ratio(&wf.samples) > s.max_ratio {
                log::debug!("alphabet candidate {i} rejected by spectral screen");
                continue;
            }
        }
        if accepted
            .iter()
            .any(|w| xcorr_peak(&w.samples, &wf.samples) >= 1.0 - 1e-6)
        {
            continue;
        }
        accepted.push(wf);
    }
    if accepted.len() < k {
        return Err(Error::InvalidArgument(format!(
            "could not draw {k} admissible waveforms from {MAX_CANDIDATES} candidates"
        )));
    }
    WaveformAlphabet::new(accepted)
}

/// Instantaneous phase (radians, unwrapped) of a sample vector.
pub fn unwrapped_phase<T: Real>(samples: &[Cx<T>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for z in samples {
        let a = to_f64(Float::atan2(z.im, z.re));
        if let Some(p) = prev {
            let mut d = a + offset - p;
            while d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                d += 2.0 * std::f64::consts::PI;
            }
        }
        let v = a + offset;
        out.push(v);
        prev = Some(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModulationParams {
        ModulationParams::standard()
    }

    fn ones(n: usize, v: i8) -> ChipSequence {
        ChipSequence { chips: vec![v; n], seed: 0 }
    }

    #[test]
    fn chip_sequence_codomain_and_determinism() {
        let a = generate_chip_sequence(4, 11).unwrap();
        assert!(a.chips.iter().all(|&c| c == 1 || c == -1));
        assert_eq!(a, generate_chip_sequence(4, 11).unwrap());
        assert!(matches!(generate_chip_sequence(0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn chip_sequence_is_zero_mean() {
        let s = generate_chip_sequence(100_000, 3).unwrap();
        let mean = s.chips.iter().map(|&c| f64::from(c)).sum::<f64>() / 1e5;
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn standard_pulse_dimensions() {
        let p = params();
        assert_eq!(p.samples_per_chip(), 3);
        assert_eq!(p.len(), 90);
        assert!((p.pulse_duration() - 0.030).abs() < 1e-15);
        assert!((p.baseband_freq - 500.0).abs() < 1e-12);
    }

    #[test]
    fn params_reject_fractional_samples_per_chip() {
        assert!(ModulationParams::new(30, 1e-3, 2500.0).is_err());
        let mut p = params();
        p.baseband_freq = 400.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn dpsk_all_minus_one_has_unit_envelope() {
        let wf: BasebandWaveform<f64> = synth_dpsk(&ones(30, -1), &params()).unwrap();
        assert!(wf.modulus_error() <= 1e-12);
        // s_d == 1: I branch is |cos|, Q branch |sin|, both non-negative
        assert!(wf.samples.iter().all(|z| z.re >= 0.0 && z.im >= 0.0));
    }

    #[test]
    fn dpsk_is_constant_modulus() {
        for seed in 0..8 {
            let chips = generate_chip_sequence(30, seed).unwrap();
            let wf: BasebandWaveform<f64> = synth_dpsk(&chips, &params()).unwrap();
            assert_eq!(wf.len(), 90);
            assert!(wf.modulus_error() <= 1e-9);
        }
    }

    #[test]
    fn dpsk_half_chip_delay_holds_first_chip() {
        let mut chips = ones(30, 1);
        chips.chips[0] = -1;
        let p = ModulationParams::new(30, 1e-3, 4e3).unwrap();
        let wf: BasebandWaveform<f64> = synth_dpsk(&chips, &p).unwrap();
        // samples 0,1 (t < tau/2) hold chip 0 on I; sample 2..5 still chip 0
        // on I (delayed) while Q already follows chip 1 from sample 4.
        assert!(wf.samples[0].re > 0.0);
        assert!(wf.samples[5].re > 0.0 || wf.samples[5].re.abs() < 1e-12);
        assert!(wf.samples[6].re < 0.0);
        assert!(wf.samples[5].im < 0.0);
    }

    #[test]
    fn msk_all_minus_one_is_linear_ramp() {
        let p = params();
        let wf: BasebandWaveform<f64> = synth_msk(&ones(30, -1), &p, 0.0).unwrap();
        let phase = unwrapped_phase(&wf.samples);
        for (i, ph) in phase.iter().enumerate() {
            let t = i as f64 / p.sample_rate;
            let want = -std::f64::consts::PI * p.baseband_freq * t;
            assert!((ph - want).abs() < 1e-9, "sample {i}: {ph} vs {want}");
        }
    }

    #[test]
    fn msk_phase_is_continuous() {
        let p = params();
        let bound = std::f64::consts::PI * p.baseband_freq / p.sample_rate + 1e-9;
        for seed in 0..8 {
            let chips = generate_chip_sequence(30, seed).unwrap();
            let wf: BasebandWaveform<f64> = synth_msk(&chips, &p, 0.7).unwrap();
            assert!(wf.modulus_error() <= 1e-12);
            let phase = unwrapped_phase(&wf.samples);
            let jump = phase.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            assert!(jump <= bound, "jump {jump} > {bound}");
        }
    }

    #[test]
    fn msk_rejects_non_finite_theta() {
        assert!(synth_msk::<f64>(&ones(30, 1), &params(), f64::NAN).is_err());
    }

    #[test]
    fn passband_of_constant_is_carrier() {
        let p = ModulationParams::new(4, 1e-3, 2e3).unwrap();
        let wf = BasebandWaveform::<f64>::from_samples(vec![Cx::new(1.0, 0.0); 8], p, WaveformKind::Dpsk);
        let (fc, fs) = (10e3, 80e3);
        let pb = to_passband(&wf, fc, fs).unwrap();
        for (q, v) in pb.iter().enumerate() {
            let want = (2.0 * std::f64::consts::PI * fc * q as f64 / fs).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn passband_forms_agree() {
        let chips = generate_chip_sequence(30, 5).unwrap();
        let wf: BasebandWaveform<f64> = synth_dpsk(&chips, &params()).unwrap();
        let a = to_passband(&wf, 12e3, 48e3).unwrap();
        let b = to_passband_polar(&wf, 12e3, 48e3).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "max diff {err}");
    }

    #[test]
    fn passband_rejects_undersampling() {
        let chips = generate_chip_sequence(30, 5).unwrap();
        let wf: BasebandWaveform<f64> = synth_dpsk(&chips, &params()).unwrap();
        assert!(matches!(to_passband(&wf, 12e3, 24e3), Err(Error::InvalidArgument(_))));
        assert!(demodulate_iq(&[0.0f64; 4], 12e3, 20e3).is_err());
    }

    #[test]
    fn demodulation_of_pure_tones() {
        let (fc, fs) = (1e3, 16e3);
        let n = 320;
        let cosine: Vec<f64> = (0..n).map(|q| (2.0 * std::f64::consts::PI * fc * q as f64 / fs).cos()).collect();
        let sine: Vec<f64> = (0..n).map(|q| -(2.0 * std::f64::consts::PI * fc * q as f64 / fs).sin()).collect();
        let i = demodulate_iq(&cosine, fc, fs).unwrap();
        let q = demodulate_iq(&sine, fc, fs).unwrap();
        for z in &i[16..n - 16] {
            assert!((z - Cx::new(1.0, 0.0)).norm() < 1e-9);
        }
        for z in &q[16..n - 16] {
            assert!((z - Cx::new(0.0, 1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn modulate_demodulate_round_trip() {
        let p = params();
        let chips = generate_chip_sequence(30, 9).unwrap();
        for wf in [
            synth_dpsk::<f64>(&chips, &p).unwrap(),
            synth_msk::<f64>(&chips, &p, 0.0).unwrap(),
        ] {
            let (fc, fs) = (60e3, 480e3);
            let factor = (fs / p.sample_rate) as usize;
            let pb = to_passband(&wf, fc, fs).unwrap();
            let bb = decimate_hold(&demodulate_iq(&pb, fc, fs).unwrap(), factor);
            assert_eq!(bb.len(), wf.len());
            // first and last samples carry the filter transient
            let inner = 1..wf.len() - 1;
            let num: f64 = inner.clone().map(|i| (bb[i] - wf.samples[i]).norm_sqr()).sum();
            let den: f64 = inner.map(|i| wf.samples[i].norm_sqr()).sum();
            let rms = (num / den).sqrt();
            assert!(rms <= 0.02, "round-trip rms error {rms}");
        }
    }

    #[test]
    fn alphabet_draw_is_deterministic_and_distinct() {
        let p = params();
        let a: WaveformAlphabet<f64> = draw_alphabet(WaveformKind::Dpsk, 4, &p, 42, None).unwrap();
        let b: WaveformAlphabet<f64> = draw_alphabet(WaveformKind::Dpsk, 4, &p, 42, None).unwrap();
        assert_eq!(a.bits_per_symbol, 2);
        for k in 0..4 {
            assert_eq!(a.samples(k), b.samples(k));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(xcorr_peak(a.samples(i), a.samples(j)) < 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn alphabet_rejects_duplicates_and_bad_sizes() {
        let p = params();
        let chips = generate_chip_sequence(30, 1).unwrap();
        let w: BasebandWaveform<f64> = synth_dpsk(&chips, &p).unwrap();
        assert!(WaveformAlphabet::new(vec![w.clone(), w.clone()]).is_err());
        assert!(WaveformAlphabet::new(vec![w.clone(), w.clone(), w]).is_err());
        assert!(draw_alphabet::<f64>(WaveformKind::Msk, 3, &p, 1, None).is_err());
    }

    #[test]
    fn screened_alphabet_respects_bound() {
        let p = params();
        let screen = SpectralScreen { dft_len: 539, max_ratio: 1e3 };
        let a: WaveformAlphabet<f64> = draw_alphabet(WaveformKind::Dpsk, 4, &p, 7, Some(screen)).unwrap();
        for k in 0..4 {
            assert!(screen.ratio(a.samples(k)) <= 1e3);
        }
    }

    #[test]
    fn single_precision_synthesis() {
        let chips = generate_chip_sequence(30, 2).unwrap();
        let wf: BasebandWaveform<f32> = synth_dpsk(&chips, &params()).unwrap();
        assert!(wf.modulus_error() <= 1e-6);
        let wf: BasebandWaveform<f32> = synth_msk(&chips, &params(), 0.0).unwrap();
        assert!(wf.modulus_error() <= 1e-6);
    }

    #[test]
    fn save_writes_samples_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let chips = generate_chip_sequence(params().n_chips, 2).unwrap();
        let wf: BasebandWaveform<f64> = synth_dpsk(&chips, &params()).unwrap();
        wf.save(dir.path(), "wf0", Some("abc")).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("wf0.csv")).unwrap();
        assert_eq!(rdr.headers().unwrap(), vec!["index", "real", "imag"]);
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), wf.len());
        let re: f64 = rows[3][1].parse().unwrap();
        assert_eq!(re, wf.samples[3].re);
        let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("wf0.json")).unwrap()).unwrap();
        assert_eq!(meta["kind"], "dpsk");
        assert_eq!(meta["seed"], 2);
        assert_eq!(meta["config_hash"], "abc");
    }
}
