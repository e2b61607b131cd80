//! Experiment configuration. Every section and key is optional; omitted
//! values fall back to the standard four-waveform DPSK setup. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use dfrc_core::convmat::{check_feasibility, default_filter_len, default_peak_index, Feasibility};
use dfrc_core::filterdesign::DesignKind;
use dfrc_core::processing::{ApplyMode, DopplerWindow};
use dfrc_core::radarsim::{SceneConfig, TargetSpec};
use dfrc_core::waveform::{ModulationParams, SpectralScreen, WaveformKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub waveform: WaveformSection,
    pub design: DesignSection,
    pub scene: SceneSection,
    pub radar: RadarSection,
    pub pd: PdSection,
    pub ser: SerSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            waveform: WaveformSection::default(),
            design: DesignSection::default(),
            scene: SceneSection::default(),
            radar: RadarSection::default(),
            pd: PdSection::default(),
            ser: SerSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformSection {
    pub kind: WaveformKind,
    /// Alphabet size; a power of two.
    pub k: usize,
    pub n_chips: usize,
    pub chip_duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
    /// Rejects candidates whose zero-padded spectrum has a deep null.
    pub screen: Option<ScreenSection>,
}

impl Default for WaveformSection {
    fn default() -> Self {
        let p = ModulationParams::standard();
        Self {
            kind: WaveformKind::Dpsk,
            k: 4,
            n_chips: p.n_chips,
            chip_duration: p.chip_duration,
            sample_rate: p.sample_rate,
            seed: 1,
            screen: Some(ScreenSection::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreenSection {
    /// DFT length; defaults to the circular filter length `L + L_f - 1`.
    pub dft_len: Option<usize>,
    pub max_ratio: f64,
}

impl Default for ScreenSection {
    fn default() -> Self {
        Self {
            dft_len: None,
            max_ratio: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub designs: Vec<DesignKind>,
    /// Filter length; `K (L - 1)` when omitted.
    pub l_f: Option<usize>,
    /// Output sample that carries the mainlobe; centre of the support when omitted.
    pub peak_index: Option<usize>,
    pub penalized_mu: f64,
    pub penalized_iters: usize,
    /// Overrides the per-flavor default application mode.
    pub apply_mode: Option<ApplyMode>,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            designs: vec![DesignKind::CoherentLinear, DesignKind::CoherentCircular, DesignKind::BaselineLs],
            l_f: None,
            peak_index: None,
            penalized_mu: 1.0,
            penalized_iters: 50,
            apply_mode: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub n_range_gates: usize,
    pub n_pulses: usize,
    pub t_pri: f64,
    pub wavelength: f64,
    pub clutter_doppler: f64,
    pub targets: Vec<TargetSpec>,
    pub noise: bool,
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = SceneConfig::six_targets(1, 1.0, 0.0, 0.0);
        Self {
            n_range_gates: s.n_range_gates,
            n_pulses: s.n_pulses,
            t_pri: s.t_pri,
            wavelength: s.wavelength,
            clutter_doppler: s.clutter_doppler,
            targets: s.targets,
            noise: s.noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub cnr_db: f64,
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    pub scenarios: Vec<Scenario>,
    pub threshold_db: f64,
    /// Detections with `|nu| <= exclusion` are discarded.
    pub exclusion: f64,
    pub window: DopplerWindow,
    /// Gates kept in the `_central` map export.
    pub plot_gates: usize,
    pub seed: u64,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            scenarios: vec![
                Scenario {
                    name: "cnr50".into(),
                    cnr_db: 50.0,
                    snr_db: 10.0,
                },
                Scenario {
                    name: "cnr70".into(),
                    cnr_db: 70.0,
                    snr_db: 10.0,
                },
            ],
            threshold_db: 13.0,
            exclusion: 0.1,
            window: DopplerWindow::default(),
            plot_gates: 100,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub cnr_db: f64,
    pub target: TargetSpec,
    pub seed: u64,
}

impl Default for PdSection {
    fn default() -> Self {
        Self {
            snr_db: (-5..=2).map(|x| 2.0 * x as f64).collect(),
            trials: 500,
            cnr_db: 50.0,
            target: TargetSpec {
                range_cell: 225,
                normalized_doppler: 0.3,
            },
            seed: 606,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SerSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SerSection {
    fn default() -> Self {
        Self {
            snr_db: (-6..=12).map(f64::from).collect(),
            trials: 10_000,
            seed: 707,
        }
    }
}

/// Manifests store the canonical TOML, which can be fed back through
/// `--config` to reproduce a run.
#[derive(Debug, Deserialize)]
struct ManifestConfig {
    config_toml: String,
}

impl ExperimentConfig {
    /// Reads TOML, or the `config_toml` field of a manifest when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: ManifestConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&m.config_toml).map_err(|e| CliError::Config(format!("{} (config_toml): {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn params(&self) -> Result<ModulationParams, CliError> {
        Ok(ModulationParams::new(self.waveform.n_chips, self.waveform.chip_duration, self.waveform.sample_rate)?)
    }

    pub fn pulse_len(&self) -> Result<usize, CliError> {
        Ok(self.params()?.len())
    }

    pub fn l_f(&self) -> Result<usize, CliError> {
        let l = self.pulse_len()?;
        Ok(self.design.l_f.unwrap_or_else(|| default_filter_len(self.waveform.k, l)))
    }

    pub fn peak_index(&self) -> Result<usize, CliError> {
        let l = self.pulse_len()?;
        let l_f = self.l_f()?;
        Ok(self.design.peak_index.unwrap_or_else(|| default_peak_index(l, l_f)))
    }

    pub fn screen(&self) -> Result<Option<SpectralScreen>, CliError> {
        let n = self.pulse_len()? + self.l_f()? - 1;
        Ok(self.waveform.screen.as_ref().map(|s| SpectralScreen {
            dft_len: s.dft_len.unwrap_or(n),
            max_ratio: s.max_ratio,
        }))
    }

    pub fn scene_config(&self, cnr_db: f64, snr_db: f64, targets: Vec<TargetSpec>) -> Result<SceneConfig, CliError> {
        let s = &self.scene;
        let cfg = SceneConfig {
            n_range_gates: s.n_range_gates,
            n_pulses: s.n_pulses,
            pulse_len: self.pulse_len()?,
            sample_rate: self.waveform.sample_rate,
            t_pri: s.t_pri,
            wavelength: s.wavelength,
            cnr_db,
            snr_db,
            clutter_doppler: s.clutter_doppler,
            targets,
            noise: s.noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything a command needs before any heavy computation.
    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        let w = &self.waveform;
        if w.k == 0 || !w.k.is_power_of_two() {
            return Err(CliError::Config(format!("waveform.k = {} is not a power of two", w.k)));
        }
        self.params()?.validate()?;
        let l = self.pulse_len()?;
        let l_f = self.l_f()?;
        if l_f == 0 {
            return Err(CliError::Config("design.l_f must be positive".into()));
        }
        if self.design.designs.is_empty() {
            return Err(CliError::Config("design.designs is empty".into()));
        }
        if self.design.designs.iter().any(|d| d.flavor() == dfrc_core::convmat::Flavor::Linear) {
            if let Feasibility::Violated { bound } = check_feasibility(w.k, l, l_f) {
                return Err(dfrc_core::Error::Dimension { bound }.into());
            }
        }
        let peak = self.peak_index()?;
        if peak >= l + l_f - 1 {
            return Err(CliError::Config(format!("design.peak_index = {peak} outside 0..{}", l + l_f - 1)));
        }
        if let Some(s) = &self.waveform.screen {
            if !(s.max_ratio >= 1.0) || s.dft_len == Some(0) {
                return Err(CliError::Config("waveform.screen needs max_ratio >= 1 and a positive dft_len".into()));
            }
        }
        if !(self.design.penalized_mu >= 0.0) {
            return Err(CliError::Config("design.penalized_mu must be non-negative".into()));
        }
        match command {
            "radar" => {
                let r = &self.radar;
                if r.scenarios.is_empty() {
                    return Err(CliError::Config("radar.scenarios is empty".into()));
                }
                for sc in &r.scenarios {
                    if sc.name.is_empty() || !sc.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                        return Err(CliError::Config(format!("scenario name `{}` must be [A-Za-z0-9_-]+", sc.name)));
                    }
                    self.scene_config(sc.cnr_db, sc.snr_db, self.scene.targets.clone())?;
                }
                self.check_detector()?;
                if r.plot_gates == 0 {
                    return Err(CliError::Config("radar.plot_gates must be positive".into()));
                }
            }
            "pd" => {
                check_grid("pd.snr_db", &self.pd.snr_db, self.pd.trials)?;
                self.scene_config(self.pd.cnr_db, 0.0, vec![self.pd.target])?;
                self.check_detector()?;
            }
            "ser" => check_grid("ser.snr_db", &self.ser.snr_db, self.ser.trials)?,
            _ => {}
        }
        Ok(())
    }

    fn check_detector(&self) -> Result<(), CliError> {
        let r = &self.radar;
        if !r.threshold_db.is_finite() || !(r.exclusion >= 0.0) {
            return Err(CliError::Config("radar.threshold_db must be finite and radar.exclusion non-negative".into()));
        }
        if self.scene.n_pulses < 2 {
            return Err(CliError::Config("scene.n_pulses must be at least 2 for a Doppler map".into()));
        }
        Ok(())
    }

    /// Fully expanded TOML with every default filled in.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of [`Self::canonical_toml`], so formatting and omitted
    /// defaults do not change the hash.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }
}

fn check_grid(name: &str, grid: &[f64], trials: usize) -> Result<(), CliError> {
    if grid.is_empty() || grid.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(CliError::Config(format!("{name} must be a non-empty list of SNRs (dB)")));
    }
    if trials == 0 {
        return Err(CliError::Config(format!("{name}: trials must be at least 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_standard_setup() {
        let c: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.pulse_len().unwrap(), 90);
        assert_eq!(c.l_f().unwrap(), 356);
        c.validate("radar").unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("colour = 3").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[waveform]\nchips = 3").is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a: ExperimentConfig = toml::from_str("[waveform]\nk = 2\n").unwrap();
        let b: ExperimentConfig = toml::from_str("# comment\n[waveform]\nk   =   2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn canonical_form_round_trips_infinities() {
        let c: ExperimentConfig = toml::from_str("[ser]\nsnr_db = [inf, 0.0]\n[[radar.scenarios]]\nname = \"quiet\"\ncnr_db = -inf\nsnr_db = 10.0").unwrap();
        let back: ExperimentConfig = toml::from_str(&c.canonical_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.ser.snr_db[0], f64::INFINITY);
    }

    #[test]
    fn infeasible_filter_length_is_a_dimension_error() {
        let c: ExperimentConfig = toml::from_str("[design]\nl_f = 266").unwrap();
        let err = c.validate("design").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("(K-1)(L+L_f-1) > K*L_f"));
    }
}
