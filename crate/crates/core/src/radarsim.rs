//! Clutter/target scenes, NCPI echo synthesis and the single-path
//! communication channel.
//!
//! Powers are per fast-time sample against unit-variance complex noise.
//! Doppler is normalized to cycles per pulse.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::export::{atomic_write, csv_rows_bytes, fmt_f64, write_json};
use crate::linalg::CMatrix;
use crate::scalar::{lit, to_f64, Cx, Real};
use crate::seeds::{derive_seed, stream_rng};
use crate::waveform::{BasebandWaveform, WaveformAlphabet};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScattererKind {
    Target,
    Clutter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scatterer<T: Real> {
    pub range_cell: usize,
    /// Cycles per pulse, within [-0.5, 0.5].
    pub normalized_doppler: f64,
    pub reflectivity: Cx<T>,
    pub kind: ScattererKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub range_cell: usize,
    pub normalized_doppler: f64,
}

/// Everything [`generate_scene`] needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub n_range_gates: usize,
    pub n_pulses: usize,
    /// Samples per pulse, `L`.
    pub pulse_len: usize,
    pub sample_rate: f64,
    pub t_pri: f64,
    pub wavelength: f64,
    /// Clutter-to-noise ratio; `-inf` disables clutter.
    pub cnr_db: f64,
    /// Target-to-noise ratio per target.
    pub snr_db: f64,
    /// Clutter Doppler is uniform on `[-clutter_doppler, clutter_doppler]`.
    pub clutter_doppler: f64,
    pub targets: Vec<TargetSpec>,
    /// Adds unit-variance receiver noise when true.
    pub noise: bool,
}

impl SceneConfig {
    /// 450 gates, 50 pulses and six targets around the centre gates.
    ///
    /// The first three targets share Doppler 0.3; cells 235, 215 and 245
    /// carry -0.3, -0.25 and 0.2. (An alternative reading assigns 0.25 to
    /// the fourth target; the explicit per-cell list is used here.)
    pub fn six_targets(pulse_len: usize, sample_rate: f64, cnr_db: f64, snr_db: f64) -> Self {
        let targets = [(225, 0.3), (228, 0.3), (221, 0.3), (235, -0.3), (215, -0.25), (245, 0.2)]
            .into_iter()
            .map(|(range_cell, normalized_doppler)| TargetSpec {
                range_cell,
                normalized_doppler,
            })
            .collect();
        Self {
            n_range_gates: 450,
            n_pulses: 50,
            pulse_len,
            sample_rate,
            t_pri: 0.2,
            wavelength: 0.1,
            cnr_db,
            snr_db,
            clutter_doppler: 0.1,
            targets,
            noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_range_gates == 0 || self.n_pulses == 0 || self.pulse_len == 0 {
            return invalid("n_range_gates, n_pulses and pulse_len must be positive");
        }
        for (name, v) in [("sample_rate", self.sample_rate), ("t_pri", self.t_pri), ("wavelength", self.wavelength)] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive and finite"));
            }
        }
        if self.cnr_db.is_nan() || self.cnr_db == f64::INFINITY {
            return invalid("cnr_db must be finite or -inf");
        }
        if self.snr_db.is_nan() || self.snr_db == f64::INFINITY {
            return invalid("snr_db must be finite or -inf");
        }
        if !(0.0..=0.5).contains(&self.clutter_doppler) {
            return invalid("clutter_doppler must lie in [0, 0.5]");
        }
        for t in &self.targets {
            if t.range_cell >= self.n_range_gates {
                return invalid(format!(
                    "target range cell {} outside the {} configured gates",
                    t.range_cell, self.n_range_gates
                ));
            }
            if !(t.normalized_doppler.abs() <= 0.5) {
                return invalid(format!("target Doppler {} outside [-0.5, 0.5]", t.normalized_doppler));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene<T: Real> {
    pub scatterers: Vec<Scatterer<T>>,
    pub n_range_gates: usize,
    pub t_pri: f64,
    pub n_pulses: usize,
    pub wavelength: f64,
    pub sample_rate: f64,
    pub cnr_db: f64,
    pub snr_db: f64,
    /// Seed of the receiver noise; `None` means noise-free.
    pub noise_seed: Option<u64>,
}

#[derive(Serialize)]
struct ScattererRecord {
    range_cell: usize,
    normalized_doppler: f64,
    re: f64,
    im: f64,
    kind: ScattererKind,
}

impl<T: Real> Scene<T> {
    /// Range of gate `cell`, `cell * c / (2 fs)`.
    pub fn range_of(&self, cell: usize) -> f64 {
        cell as f64 * SPEED_OF_LIGHT / (2.0 * self.sample_rate)
    }

    /// Hex SHA-256 of the scene contents.
    pub fn digest(&self) -> String {
        let recs: Vec<ScattererRecord> = self
            .scatterers
            .iter()
            .map(|s| ScattererRecord {
                range_cell: s.range_cell,
                normalized_doppler: s.normalized_doppler,
                re: to_f64(s.reflectivity.re),
                im: to_f64(s.reflectivity.im),
                kind: s.kind,
            })
            .collect();
        let body = serde_json::json!({
            "scatterers": recs,
            "n_range_gates": self.n_range_gates,
            "t_pri": self.t_pri,
            "n_pulses": self.n_pulses,
            "wavelength": self.wavelength,
            "sample_rate": self.sample_rate,
            "cnr_db": self.cnr_db,
            "snr_db": self.snr_db,
            "noise_seed": self.noise_seed,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_seed = None;
        self
    }

    pub fn targets(&self) -> impl Iterator<Item = &Scatterer<T>> {
        self.scatterers.iter().filter(|s| s.kind == ScattererKind::Target)
    }
}

fn db_to_lin(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Circularly symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Cx<f64> {
    let s = (var / 2.0).sqrt();
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Cx::new(s * a, s * b)
}

/// Draws a scene: one clutter scatterer per gate plus the configured targets.
///
/// Clutter reflectivities are `CN(0, CNR / L)`, so the `L` overlapping
/// clutter echoes at any fast-time sample sum to power CNR. Each target has
/// `|beta|^2 = SNR` and a uniform random phase.
pub fn generate_scene<T: Real>(config: &SceneConfig, seed: u64) -> Result<Scene<T>> {
    config.validate()?;
    let mut rng = stream_rng(seed, 0);
    let mut scatterers = Vec::with_capacity(config.n_range_gates + config.targets.len());
    let cnr = db_to_lin(config.cnr_db);
    if cnr > 0.0 {
        let var = cnr / config.pulse_len as f64;
        for g in 0..config.n_range_gates {
            let beta = complex_gaussian(&mut rng, var);
            let nu = if config.clutter_doppler > 0.0 {
                rng.random_range(-config.clutter_doppler..=config.clutter_doppler)
            } else {
                0.0
            };
            scatterers.push(Scatterer {
                range_cell: g,
                normalized_doppler: nu,
                reflectivity: Cx::new(lit(beta.re), lit(beta.im)),
                kind: ScattererKind::Clutter,
            });
        }
    }
    let amp = db_to_lin(config.snr_db).sqrt();
    for t in &config.targets {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let beta = Cx::from_polar(amp, phase);
        scatterers.push(Scatterer {
            range_cell: t.range_cell,
            normalized_doppler: t.normalized_doppler,
            reflectivity: Cx::new(lit(beta.re), lit(beta.im)),
            kind: ScattererKind::Target,
        });
    }
    Ok(Scene {
        scatterers,
        n_range_gates: config.n_range_gates,
        t_pri: config.t_pri,
        n_pulses: config.n_pulses,
        wavelength: config.wavelength,
        sample_rate: config.sample_rate,
        cnr_db: config.cnr_db,
        snr_db: config.snr_db,
        noise_seed: config.noise.then(|| derive_seed(seed, 1)),
    })
}

/// Symbol carried by each pulse of the NCPI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub symbol_indices: Vec<usize>,
    pub seed: u64,
}

impl PulseTrain {
    /// `m` symbols drawn uniformly from `0..k`.
    pub fn random(m: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return invalid("alphabet size must be positive");
        }
        let mut rng = stream_rng(seed, 0);
        Ok(Self {
            symbol_indices: (0..m).map(|_| rng.random_range(0..k)).collect(),
            seed,
        })
    }

    /// Conventional CPI: the same symbol on every pulse.
    pub fn constant(m: usize, symbol: usize) -> Self {
        Self {
            symbol_indices: vec![symbol; m],
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.symbol_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol_indices.is_empty()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if let Some(bad) = self.symbol_indices.iter().find(|&&s| s >= k) {
            return invalid(format!("symbol index {bad} outside alphabet of size {k}"));
        }
        Ok(())
    }
}

/// Fast-time x slow-time samples. Row `r` holds delay `gate_offset + r`;
/// an echo from gate `g` starts at row `g - gate_offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix<T: Real> {
    pub entries: CMatrix<T>,
    pub gate_offset: usize,
    pub n_gates: usize,
    pub symbol_indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DataHeader {
    rows: usize,
    cols: usize,
    order: String,
    sample_format: String,
    gate_offset: usize,
    n_gates: usize,
    symbol_indices: Vec<usize>,
    scene_digest: String,
}

impl<T: Real> DataMatrix<T> {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn pulses(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, m: usize) -> &[Cx<T>] {
        let r = self.rows();
        &self.entries.as_slice()[m * r..(m + 1) * r]
    }

    /// `<stem>.bin` holds interleaved little-endian `f64` real/imag pairs in
    /// column-major order; `<stem>.json` is the header.
    pub fn write_binary(&self, dir: &Path, stem: &str, scene_digest: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(self.entries.len() * 16);
        for z in self.entries.iter() {
            buf.write_all(&to_f64(z.re).to_le_bytes())?;
            buf.write_all(&to_f64(z.im).to_le_bytes())?;
        }
        atomic_write(&dir.join(format!("{stem}.bin")), &buf)?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &DataHeader {
                rows: self.rows(),
                cols: self.pulses(),
                order: "column-major".into(),
                sample_format: "f64le interleaved re,im".into(),
                gate_offset: self.gate_offset,
                n_gates: self.n_gates,
                symbol_indices: self.symbol_indices.clone(),
                scene_digest: scene_digest.into(),
            },
        )
    }

    pub fn read_binary(dir: &Path, stem: &str) -> Result<Self> {
        let h: DataHeader = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let raw = std::fs::read(dir.join(format!("{stem}.bin")))?;
        if raw.len() != h.rows * h.cols * 16 {
            return Err(crate::error::Error::Serialization(format!(
                "binary payload has {} bytes, header implies {}",
                raw.len(),
                h.rows * h.cols * 16
            )));
        }
        let vals: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let data: Vec<Cx<T>> = vals.chunks_exact(2).map(|p| Cx::new(lit(p[0]), lit(p[1]))).collect();
        Ok(Self {
            entries: DMatrix::from_vec(h.rows, h.cols, data),
            gate_offset: h.gate_offset,
            n_gates: h.n_gates,
            symbol_indices: h.symbol_indices,
        })
    }

    /// `row,pulse,real,imag` CSV, intended for small cases.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = ["row", "pulse", "real", "imag"].iter().map(|s| s.to_string()).collect();
        let rows = (0..self.pulses()).flat_map(|m| {
            self.column(m)
                .iter()
                .enumerate()
                .map(move |(r, z)| vec![r.to_string(), m.to_string(), fmt_f64(to_f64(z.re)), fmt_f64(to_f64(z.im))])
                .collect::<Vec<_>>()
        });
        atomic_write(path, &csv_rows_bytes(&header, rows)?)
    }
}

/// Fast-time samples per pulse: every gate plus the trailing pulse tail.
pub fn fast_time_len(n_gates: usize, pulse_len: usize) -> usize {
    n_gates + pulse_len - 1
}

/// Echo of pulse `m` carrying waveform `wf`.
///
/// Scatterer `i` contributes `beta_i exp(-j 4 pi R_i / lambda) exp(j 2 pi
/// nu_i m)` times the waveform delayed to its gate. Noise, when enabled, is
/// unit-variance complex Gaussian drawn from stream `m` of the scene's
/// noise seed.
pub fn simulate_received_pulse<T: Real>(scene: &Scene<T>, wf: &BasebandWaveform<T>, m: usize) -> Result<Vec<Cx<T>>> {
    if m >= scene.n_pulses {
        return invalid(format!("pulse index {m} outside NCPI of {} pulses", scene.n_pulses));
    }
    let l = wf.len();
    if l == 0 {
        return invalid("waveform is empty");
    }
    let rows = fast_time_len(scene.n_range_gates, l);
    let mut acc = vec![Cx::<f64>::zero(); rows];
    let x: Vec<Cx<f64>> = wf.samples.iter().map(|z| Cx::new(to_f64(z.re), to_f64(z.im))).collect();
    for s in &scene.scatterers {
        if s.range_cell >= scene.n_range_gates {
            return invalid(format!("scatterer at gate {} outside span", s.range_cell));
        }
        let range_phase = -4.0 * std::f64::consts::PI * scene.range_of(s.range_cell) / scene.wavelength;
        let doppler_phase = 2.0 * std::f64::consts::PI * s.normalized_doppler * m as f64;
        let beta = Cx::new(to_f64(s.reflectivity.re), to_f64(s.reflectivity.im));
        let a = beta * Cx::from_polar(1.0, range_phase + doppler_phase);
        for (y, xv) in acc[s.range_cell..s.range_cell + l].iter_mut().zip(&x) {
            *y += a * xv;
        }
    }
    if let Some(seed) = scene.noise_seed {
        let mut rng = stream_rng(seed, m as u64);
        for y in acc.iter_mut() {
            *y += complex_gaussian(&mut rng, 1.0);
        }
    }
    Ok(acc.into_iter().map(|z| Cx::new(lit(z.re), lit(z.im))).collect())
}

/// Data matrix of a full NCPI; column `m` carries waveform `train[m]`.
pub fn simulate_ncpi<T: Real>(scene: &Scene<T>, alphabet: &WaveformAlphabet<T>, train: &PulseTrain) -> Result<DataMatrix<T>> {
    if train.len() != scene.n_pulses {
        return invalid(format!(
            "pulse train has {} symbols, scene has {} pulses",
            train.len(),
            scene.n_pulses
        ));
    }
    train.validate(alphabet.len())?;
    let rows = fast_time_len(scene.n_range_gates, alphabet.pulse_len());
    let mut data = Vec::with_capacity(rows * train.len());
    for (m, &k) in train.symbol_indices.iter().enumerate() {
        data.extend(simulate_received_pulse(scene, &alphabet.waveforms[k], m)?);
    }
    Ok(DataMatrix {
        entries: DMatrix::from_vec(rows, train.len(), data),
        gate_offset: 0,
        n_gates: scene.n_range_gates,
        symbol_indices: train.symbol_indices.clone(),
    })
}

/// Single-path link `g exp(j 2 pi f_d t) x(t) + v(t)`.
///
/// The noise variance is `|g|^2 / SNR`, so `snr_db` is the received
/// signal-to-noise ratio per sample. `snr_db = +inf` or `noise_seed = None`
/// gives the noise-free signal.
pub fn simulate_comm_received<T: Real>(
    wf: &BasebandWaveform<T>,
    path_gain: Cx<f64>,
    doppler_hz: f64,
    snr_db: f64,
    noise_seed: Option<u64>,
) -> Result<Vec<Cx<T>>> {
    if !(path_gain.re.is_finite() && path_gain.im.is_finite() && doppler_hz.is_finite()) || snr_db.is_nan() {
        return invalid("channel parameters must be finite");
    }
    let fs = wf.params.sample_rate;
    let mut out: Vec<Cx<f64>> = wf
        .samples
        .iter()
        .enumerate()
        .map(|(p, z)| {
            let rot = Cx::from_polar(1.0, 2.0 * std::f64::consts::PI * doppler_hz * p as f64 / fs);
            path_gain * rot * Cx::new(to_f64(z.re), to_f64(z.im))
        })
        .collect();
    if let Some(seed) = noise_seed {
        if snr_db != f64::INFINITY {
            let var = path_gain.norm_sqr() / db_to_lin(snr_db);
            let mut rng = stream_rng(seed, 0);
            for y in out.iter_mut() {
                *y += complex_gaussian(&mut rng, var);
            }
        }
    }
    Ok(out.into_iter().map(|z| Cx::new(lit(z.re), lit(z.im))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{draw_alphabet, generate_chip_sequence, synth_dpsk, ModulationParams, WaveformKind};

    fn wf() -> BasebandWaveform<f64> {
        let chips = generate_chip_sequence(30, 3).unwrap();
        synth_dpsk(&chips, &ModulationParams::standard()).unwrap()
    }

    fn bare_scene(scatterers: Vec<Scatterer<f64>>, wavelength: f64) -> Scene<f64> {
        Scene {
            scatterers,
            n_range_gates: 20,
            t_pri: 0.2,
            n_pulses: 4,
            wavelength,
            sample_rate: 3e3,
            cnr_db: f64::NEG_INFINITY,
            snr_db: 0.0,
            noise_seed: None,
        }
    }

    fn point(cell: usize, nu: f64, beta: Cx<f64>) -> Scatterer<f64> {
        Scatterer {
            range_cell: cell,
            normalized_doppler: nu,
            reflectivity: beta,
            kind: ScattererKind::Target,
        }
    }

    #[test]
    fn six_target_scene() {
        let cfg = SceneConfig::six_targets(90, 3e3, 50.0, 10.0);
        let s: Scene<f64> = generate_scene(&cfg, 1).unwrap();
        let t: Vec<(usize, f64)> = s.targets().map(|t| (t.range_cell, t.normalized_doppler)).collect();
        assert_eq!(t, vec![(225, 0.3), (228, 0.3), (221, 0.3), (235, -0.3), (215, -0.25), (245, 0.2)]);
        assert_eq!(s.scatterers.len(), 456);
        for tg in s.targets() {
            assert!((tg.reflectivity.norm_sqr() - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clutter_off_leaves_only_targets() {
        let cfg = SceneConfig::six_targets(90, 3e3, f64::NEG_INFINITY, 10.0);
        let s: Scene<f64> = generate_scene(&cfg, 1).unwrap();
        assert!(s.scatterers.iter().all(|x| x.kind == ScattererKind::Target));
    }

    #[test]
    fn out_of_span_target_rejected() {
        let mut cfg = SceneConfig::six_targets(90, 3e3, 50.0, 10.0);
        cfg.targets.push(TargetSpec {
            range_cell: 450,
            normalized_doppler: 0.0,
        });
        assert!(generate_scene::<f64>(&cfg, 1).is_err());
    }

    #[test]
    fn unit_scatterer_reproduces_waveform() {
        // R = 0 at gate 0, so the range phase vanishes
        let s = bare_scene(vec![point(0, 0.0, Cx::new(1.0, 0.0))], 0.1);
        let w = wf();
        let y = simulate_received_pulse(&s, &w, 0).unwrap();
        assert_eq!(&y[..90], &w.samples[..]);
        assert!(y[90..].iter().all(|z| z.is_zero()));
    }

    #[test]
    fn superposition() {
        let a = point(3, 0.1, Cx::new(0.5, -1.0));
        let b = point(7, -0.2, Cx::new(2.0, 0.3));
        let w = wf();
        for m in 0..4 {
            let ya = simulate_received_pulse(&bare_scene(vec![a], 0.1), &w, m).unwrap();
            let yb = simulate_received_pulse(&bare_scene(vec![b], 0.1), &w, m).unwrap();
            let yab = simulate_received_pulse(&bare_scene(vec![a, b], 0.1), &w, m).unwrap();
            for i in 0..yab.len() {
                assert!((yab[i] - ya[i] - yb[i]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn pulse_to_pulse_phase_progression() {
        let nu = 0.23;
        let s = bare_scene(vec![point(5, nu, Cx::new(1.0, 0.0))], 0.1);
        let w = wf();
        let y0 = simulate_received_pulse(&s, &w, 1).unwrap();
        let y1 = simulate_received_pulse(&s, &w, 2).unwrap();
        let want = Cx::from_polar(1.0, std::f64::consts::TAU * nu);
        for i in 5..95 {
            assert!((y1[i] / y0[i] - want).norm() <= 1e-9);
        }
    }

    #[test]
    fn power_calibration() {
        let mut cfg = SceneConfig::six_targets(90, 3e3, 20.0, 10.0);
        cfg.targets.clear();
        cfg.noise = false;
        cfg.n_pulses = 100;
        let w = wf();
        // clutter power over the fully overlapped region, many pulses/scenes
        let mut clutter = 0.0;
        let mut count = 0.0;
        for seed in 0..4 {
            let s: Scene<f64> = generate_scene(&cfg, seed).unwrap();
            for m in 0..25 {
                let y = simulate_received_pulse(&s, &w, m).unwrap();
                for z in &y[89..450] {
                    clutter += z.norm_sqr();
                    count += 1.0;
                }
            }
        }
        let cnr = 10.0 * (clutter / count).log10();
        assert!((cnr - 20.0).abs() <= 0.5, "measured CNR {cnr}");

        let noise_only = Scene {
            noise_seed: Some(9),
            ..bare_scene(vec![], 0.1)
        };
        let y = simulate_received_pulse(&noise_only, &w, 0).unwrap();
        let mut p = 0.0;
        let mut n = 0.0;
        for m in 0..4 {
            let y = simulate_received_pulse(&noise_only, &w, m).unwrap();
            p += y.iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += y.len() as f64;
        }
        assert_eq!(y.len(), 109);
        let nd = 10.0 * (p / n).log10();
        assert!(nd.abs() <= 0.5, "noise power {nd} dB");
    }

    #[test]
    fn clutter_doppler_is_uniform() {
        let mut cfg = SceneConfig::six_targets(90, 3e3, 50.0, 10.0);
        cfg.n_range_gates = 10_000;
        cfg.targets.clear();
        let s: Scene<f64> = generate_scene(&cfg, 5).unwrap();
        let mut v: Vec<f64> = s.scatterers.iter().map(|x| x.normalized_doppler).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let d = v
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = (x + 0.1) / 0.2;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at alpha = 0.01
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn noise_is_seeded() {
        let w = wf();
        let mk = |seed| Scene {
            noise_seed: Some(seed),
            ..bare_scene(vec![], 0.1)
        };
        let a = simulate_received_pulse(&mk(1), &w, 0).unwrap();
        assert_eq!(a, simulate_received_pulse(&mk(1), &w, 0).unwrap());
        let b = simulate_received_pulse(&mk(2), &w, 0).unwrap();
        let dot: Cx<f64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(dot.norm() / (na * nb) < 0.2);
    }

    #[test]
    fn ncpi_columns_follow_train() {
        let p = ModulationParams::standard();
        let a = draw_alphabet::<f64>(WaveformKind::Dpsk, 4, &p, 1, None).unwrap();
        let s = bare_scene(vec![point(2, 0.0, Cx::new(1.0, 0.0))], 0.1);
        let train = PulseTrain::random(4, 4, 3).unwrap();
        let d = simulate_ncpi(&s, &a, &train).unwrap();
        assert_eq!(d.pulses(), 4);
        for m in 0..4 {
            let y = simulate_received_pulse(&s, &a.waveforms[train.symbol_indices[m]], m).unwrap();
            assert_eq!(d.column(m), &y[..]);
        }
        let short = PulseTrain::constant(3, 0);
        assert!(simulate_ncpi(&s, &a, &short).is_err());
    }

    #[test]
    fn comm_channel_identity_and_rotation() {
        let w = wf();
        let y = simulate_comm_received(&w, Cx::new(1.0, 0.0), 0.0, 10.0, None).unwrap();
        assert_eq!(y, w.samples);
        let r = simulate_comm_received(&w, Cx::new(0.0, 1.0), 0.0, f64::INFINITY, Some(4)).unwrap();
        for (a, b) in r.iter().zip(&w.samples) {
            assert!((a - b * Cx::new(0.0, 1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn data_matrix_binary_round_trip() {
        let p = ModulationParams::standard();
        let a = draw_alphabet::<f64>(WaveformKind::Msk, 2, &p, 1, None).unwrap();
        let mut cfg = SceneConfig::six_targets(90, 3e3, 30.0, 10.0);
        cfg.n_range_gates = 300;
        cfg.n_pulses = 3;
        let s: Scene<f64> = generate_scene(&cfg, 2).unwrap();
        let d = simulate_ncpi(&s, &a, &PulseTrain::random(3, 2, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write_binary(dir.path(), "data", &s.digest()).unwrap();
        assert_eq!(DataMatrix::<f64>::read_binary(dir.path(), "data").unwrap(), d);
        d.write_csv(&dir.path().join("data.csv")).unwrap();
        let lines = std::fs::read_to_string(dir.path().join("data.csv")).unwrap().lines().count();
        assert_eq!(lines, 1 + 389 * 3);
        assert_eq!(s.digest().len(), 64);
    }
}
