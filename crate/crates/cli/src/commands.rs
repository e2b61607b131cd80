use std::path::PathBuf;

use dfrc_core::convmat::{block_system_from_samples, min_filter_len, Flavor};
use dfrc_core::filterdesign::{
    design_coherent_circular, design_coherent_linear, design_from_system, design_penalized_iterative_baseline,
    design_uncoherent_ls_baseline, evaluate_filterbank, filter_outputs, solve_constrained_ls_oracle, DesignKind, DesignReport,
    FilterBank,
};
use dfrc_core::processing::{
    apply_filterbank, detect_targets, estimate_pd_multi, range_doppler_map, simulate_ser, snr_at_ser, ApplyMode, CurvePoint,
    PdSetup,
};
use dfrc_core::radarsim::{generate_scene, simulate_ncpi, PulseTrain};
use dfrc_core::scalar::vec_norm;
use dfrc_core::seeds::derive_seed;
use dfrc_core::waveform::{draw_alphabet, WaveformAlphabet};
use dfrc_core::Cx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{gnuplot_curves, gnuplot_map, output_root, write_manifest, write_text, Staging};
use crate::CliError;

pub struct Designed {
    pub alphabet: WaveformAlphabet<f64>,
    pub banks: Vec<FilterBank<f64>>,
}

pub fn build_banks(cfg: &ExperimentConfig) -> Result<Designed, CliError> {
    let w = &cfg.waveform;
    let alphabet = draw_alphabet(w.kind, w.k, &cfg.params()?, w.seed, cfg.screen()?)?;
    let (l_f, peak) = (cfg.l_f()?, cfg.peak_index()?);
    let banks = cfg
        .design
        .designs
        .iter()
        .map(|&kind| {
            log::info!("designing {kind} (L_f = {l_f}, peak {peak})");
            match kind {
                DesignKind::CoherentLinear => design_coherent_linear(&alphabet, l_f, peak),
                DesignKind::CoherentCircular => design_coherent_circular(&alphabet, l_f, peak),
                DesignKind::BaselineLs => design_uncoherent_ls_baseline(&alphabet, l_f, peak),
                DesignKind::BaselinePenalized => {
                    design_penalized_iterative_baseline(&alphabet, l_f, peak, cfg.design.penalized_mu, cfg.design.penalized_iters)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Designed { alphabet, banks })
}

fn mode_for(cfg: &ExperimentConfig, bank: &FilterBank<f64>) -> ApplyMode {
    match bank.flavor {
        Flavor::Linear => ApplyMode::Linear,
        Flavor::Circular => cfg.design.apply_mode.unwrap_or(ApplyMode::Circular),
    }
}

fn design_seeds(cfg: &ExperimentConfig) -> serde_json::Value {
    json!({ "alphabet": cfg.waveform.seed })
}

pub fn cmd_design(cfg: &ExperimentConfig, gnuplot: bool) -> Result<PathBuf, CliError> {
    cfg.validate("design")?;
    let d = build_banks(cfg)?;
    let reports: Vec<DesignReport> = d.banks.iter().map(|b| evaluate_filterbank(b, &d.alphabet)).collect::<Result<_, _>>()?;
    let staging = Staging::new(&output_root(cfg), "design")?;
    let dir = staging.dir();
    let hash = cfg.hash();
    for (k, wf) in d.alphabet.waveforms.iter().enumerate() {
        wf.save(dir, &format!("waveform_{k}"), Some(&hash))?;
    }
    for (bank, report) in d.banks.iter().zip(&reports) {
        let label = bank.design.label();
        bank.save(dir, &format!("bank_{label}"), Some(&hash))?;
        dfrc_core::export::write_json(&dir.join(format!("report_{label}.json")), &json!({"config_hash": hash, "report": report}))?;
        let outputs = filter_outputs(bank, &d.alphabet)?;
        let mut header = vec!["index".to_string()];
        header.extend((0..outputs.len()).map(|k| format!("waveform_{k}_db")));
        let rows = (0..outputs[0].len()).map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(outputs.iter().map(|y| {
                let main = y[bank.peak_index].norm().max(1e-300);
                dfrc_core::export::fmt_f64(20.0 * (y[i].norm() / main).max(1e-15).log10())
            }));
            row
        });
        dfrc_core::export::atomic_write(
            &dir.join(format!("response_{label}.csv")),
            &dfrc_core::export::csv_rows_bytes(&header, rows)?,
        )?;
        if gnuplot {
            write_text(
                dir,
                &format!("response_{label}.gp"),
                &gnuplot_curves(&format!("response_{label}.csv"), label, "output sample", "dB re mainlobe", false, false),
            )?;
        }
        println!(
            "{label}: coherence error {:.3e}, worst PSL {:.2} dB, worst ISL {:.2} dB{}",
            report.coherence_error,
            report.psl_max_db(),
            report.isl_max_db(),
            if report.warnings.is_empty() {
                String::new()
            } else {
                format!(", {} warning(s)", report.warnings.len())
            }
        );
    }
    dfrc_core::export::write_json(&dir.join("summary.json"), &json!({"config_hash": hash, "reports": reports}))?;
    write_manifest(&staging, "design", cfg, design_seeds(cfg))?;
    staging.commit()
}

#[derive(Serialize)]
struct DesignDetections {
    design: String,
    truth_matches: usize,
    n_targets: usize,
    detections: usize,
}

pub fn cmd_radar(cfg: &ExperimentConfig, gnuplot: bool) -> Result<PathBuf, CliError> {
    cfg.validate("radar")?;
    let d = build_banks(cfg)?;
    let staging = Staging::new(&output_root(cfg), "radar")?;
    let dir = staging.dir();
    let hash = cfg.hash();
    let r = &cfg.radar;
    let mut summary = Vec::new();
    let mut seeds = Vec::new();
    for (i, sc) in r.scenarios.iter().enumerate() {
        let scene_cfg = cfg.scene_config(sc.cnr_db, sc.snr_db, cfg.scene.targets.clone())?;
        let (scene_seed, train_seed) = (derive_seed(r.seed, 2 * i as u64), derive_seed(r.seed, 2 * i as u64 + 1));
        seeds.push(json!({"scenario": sc.name, "scene": scene_seed, "pulse_train": train_seed}));
        let scene = generate_scene::<f64>(&scene_cfg, scene_seed)?;
        let train = PulseTrain::random(scene_cfg.n_pulses, d.alphabet.len(), train_seed)?;
        let data = simulate_ncpi(&scene, &d.alphabet, &train)?;
        let mut per_design = Vec::new();
        for bank in &d.banks {
            let label = bank.design.label();
            let filtered = apply_filterbank(&data, bank, &train, mode_for(cfg, bank))?;
            let map = range_doppler_map(&filtered, r.window)?;
            let mut det = detect_targets(&map, r.exclusion, r.threshold_db)?;
            det.score(&scene_cfg.targets, map.n_doppler());
            let stem = format!("map_{}_{label}", sc.name);
            map.save(dir, &stem, Some(&hash))?;
            map.central(r.plot_gates).save(dir, &format!("{stem}_central"), Some(&hash))?;
            if gnuplot {
                write_text(dir, &format!("{stem}_central.gp"), &gnuplot_map(&format!("{stem}_central.csv"), &format!("{} {label}", sc.name)))?;
            }
            dfrc_core::export::write_json(
                &dir.join(format!("detections_{}_{label}.json", sc.name)),
                &json!({"config_hash": hash, "result": det}),
            )?;
            println!(
                "{} {label}: {}/{} targets at their cells, {} detections",
                sc.name,
                det.truth_matches,
                scene_cfg.targets.len(),
                det.detections.len()
            );
            per_design.push(DesignDetections {
                design: label.to_string(),
                truth_matches: det.truth_matches,
                n_targets: scene_cfg.targets.len(),
                detections: det.detections.len(),
            });
        }
        summary.push(json!({
            "scenario": sc.name,
            "cnr_db": sc.cnr_db,
            "snr_db": sc.snr_db,
            "scene_digest": scene.digest(),
            "designs": per_design,
        }));
    }
    dfrc_core::export::write_json(&dir.join("summary.json"), &json!({"config_hash": hash, "scenarios": summary}))?;
    write_manifest(&staging, "radar", cfg, json!({"alphabet": cfg.waveform.seed, "radar": r.seed, "scenarios": seeds}))?;
    staging.commit()
}

fn write_curves(dir: &std::path::Path, prefix: &str, banks: &[FilterBank<f64>], curves: &[Vec<CurvePoint>], gnuplot: bool, logy: bool) -> Result<(), CliError> {
    for (bank, c) in banks.iter().zip(curves) {
        let label = bank.design.label();
        let name = format!("{prefix}_{label}.csv");
        CurvePoint::write_csv(c, &dir.join(&name))?;
        if gnuplot {
            let ylabel = if prefix == "pd" { "Pd" } else { "SER" };
            write_text(dir, &format!("{prefix}_{label}.gp"), &gnuplot_curves(&name, label, "SNR (dB)", ylabel, logy, true))?;
        }
    }
    Ok(())
}

pub fn cmd_pd(cfg: &ExperimentConfig, gnuplot: bool) -> Result<PathBuf, CliError> {
    cfg.validate("pd")?;
    let d = build_banks(cfg)?;
    let p = &cfg.pd;
    let setup = PdSetup {
        scene: cfg.scene_config(p.cnr_db, 0.0, vec![p.target])?,
        threshold_db: cfg.radar.threshold_db,
        exclusion: cfg.radar.exclusion,
        window: cfg.radar.window,
    };
    let refs: Vec<_> = d.banks.iter().map(|b| (b, mode_for(cfg, b))).collect();
    let curves = estimate_pd_multi(&d.alphabet, &refs, &setup, &p.snr_db, p.trials, p.seed)?;
    let staging = Staging::new(&output_root(cfg), "pd")?;
    write_curves(staging.dir(), "pd", &d.banks, &curves, gnuplot, false)?;
    let hash = cfg.hash();
    let summary: Vec<_> = d
        .banks
        .iter()
        .zip(&curves)
        .map(|(b, c)| {
            println!(
                "{}: Pd {}",
                b.design.label(),
                c.iter().map(|pt| format!("{:.3}@{}dB", pt.y, pt.x)).collect::<Vec<_>>().join(" ")
            );
            json!({"design": b.design.label(), "points": c})
        })
        .collect();
    dfrc_core::export::write_json(&staging.dir().join("summary.json"), &json!({"config_hash": hash, "curves": summary}))?;
    write_manifest(&staging, "pd", cfg, json!({"alphabet": cfg.waveform.seed, "pd": p.seed}))?;
    staging.commit()
}

pub fn cmd_ser(cfg: &ExperimentConfig, gnuplot: bool) -> Result<PathBuf, CliError> {
    cfg.validate("ser")?;
    let d = build_banks(cfg)?;
    let s = &cfg.ser;
    let curves = d
        .banks
        .iter()
        .map(|b| simulate_ser(&d.alphabet, b, &s.snr_db, s.trials, s.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let staging = Staging::new(&output_root(cfg), "ser")?;
    write_curves(staging.dir(), "ser", &d.banks, &curves, gnuplot, true)?;
    let hash = cfg.hash();
    let summary: Vec<_> = d
        .banks
        .iter()
        .zip(&curves)
        .map(|(b, c)| {
            let at = snr_at_ser(c, 1e-2);
            println!(
                "{}: SNR at SER 1e-2 {}",
                b.design.label(),
                at.map_or("not reached on grid".to_string(), |v| format!("{v:.2} dB"))
            );
            json!({"design": b.design.label(), "snr_at_ser_1e-2": at, "points": c})
        })
        .collect();
    dfrc_core::export::write_json(&staging.dir().join("summary.json"), &json!({"config_hash": hash, "curves": summary}))?;
    write_manifest(&staging, "ser", cfg, json!({"alphabet": cfg.waveform.seed, "ser": s.seed}))?;
    staging.commit()
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub instances: usize,
    pub seed: u64,
    pub worst_relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Closed-form designs against the dense nullspace solver on random
/// unit-modulus instances (`K` in 2..=4, `L` in 2..=6, both flavors).
pub fn cmd_selftest(instances: usize, seed: u64) -> Result<SelftestReport, CliError> {
    const TOL: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let k = 2 + i % 3;
        let l = rng.random_range(2..=6);
        let l_f = min_filter_len(k, l) + rng.random_range(1..=3);
        let flavor = if i % 2 == 0 { Flavor::Linear } else { Flavor::Circular };
        let w: Vec<Vec<Cx<f64>>> = (0..k)
            .map(|_| {
                (0..l)
                    .map(|_| Cx::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                    .collect()
            })
            .collect();
        let peak = rng.random_range(0..l + l_f - 1);
        let sys = block_system_from_samples(&w, l_f, peak, flavor)?;
        let h = design_from_system(&sys)?.stacked();
        let oracle = solve_constrained_ls_oracle(&sys.x(), &sys.xtil(), &sys.e())?;
        let diff: Vec<Cx<f64>> = h.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        worst = worst.max(vec_norm(&diff) / vec_norm(&oracle));
    }
    Ok(SelftestReport {
        instances,
        seed,
        worst_relative_deviation: worst,
        tolerance: TOL,
        pass: worst <= TOL,
    })
}
