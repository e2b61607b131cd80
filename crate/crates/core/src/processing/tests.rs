use super::*;
use crate::convmat::{default_filter_len, default_peak_index};
use crate::filterdesign::{design, DesignKind};
use crate::radarsim::{generate_scene, simulate_ncpi, SceneConfig};
use crate::waveform::{draw_alphabet, ModulationParams, WaveformAlphabet, WaveformKind};

fn small_alphabet() -> WaveformAlphabet<f64> {
    let p = ModulationParams::new(8, 1e-3, 3e3).unwrap();
    draw_alphabet(WaveformKind::Dpsk, 4, &p, 5, None).unwrap()
}

fn bank(a: &WaveformAlphabet<f64>, kind: DesignKind) -> FilterBank<f64> {
    let l_f = default_filter_len(a.len(), a.pulse_len());
    design(kind, a, l_f, default_peak_index(a.pulse_len(), l_f)).unwrap()
}

fn scene_cfg(a: &WaveformAlphabet<f64>, targets: Vec<TargetSpec>) -> SceneConfig {
    SceneConfig {
        n_range_gates: 40,
        n_pulses: 16,
        pulse_len: a.pulse_len(),
        sample_rate: 3e3,
        t_pri: 0.2,
        wavelength: 0.1,
        cnr_db: f64::NEG_INFINITY,
        snr_db: 20.0,
        clutter_doppler: 0.0,
        targets,
        noise: false,
    }
}

fn column_spread(d: &DataMatrix<f64>) -> f64 {
    let r = d.column(0);
    let rn = crate::scalar::vec_norm(r);
    (1..d.pulses())
        .map(|m| {
            let diff: Vec<Cx<f64>> = d.column(m).iter().zip(r).map(|(a, b)| a - b).collect();
            crate::scalar::vec_norm(&diff) / rn
        })
        .fold(0.0, f64::max)
}

#[test]
fn coherent_banks_give_symbol_independent_columns() {
    let a = small_alphabet();
    let cfg = scene_cfg(&a, vec![TargetSpec { range_cell: 17, normalized_doppler: 0.0 }]);
    let scene = generate_scene::<f64>(&cfg, 3).unwrap();
    let train = PulseTrain::random(16, 4, 8).unwrap();
    let data = simulate_ncpi(&scene, &a, &train).unwrap();
    for kind in [DesignKind::CoherentLinear, DesignKind::CoherentCircular] {
        let b = bank(&a, kind);
        let f = apply_filterbank(&data, &b, &train, ApplyMode::default_for(b.flavor)).unwrap();
        assert!(column_spread(&f) <= 1e-6, "{kind}: {}", column_spread(&f));
        let peak = (0..40).max_by(|&i, &j| f.entries[(i, 0)].norm().total_cmp(&f.entries[(j, 0)].norm()));
        assert_eq!(peak, Some(17));
    }
    let b = bank(&a, DesignKind::BaselineLs);
    let f = apply_filterbank(&data, &b, &train, ApplyMode::Linear).unwrap();
    assert!(column_spread(&f) > 1e-2);
}

#[test]
fn impulse_column_returns_aligned_taps() {
    let a = small_alphabet();
    let b = bank(&a, DesignKind::CoherentLinear);
    let gates = 30;
    let rows = gates + a.pulse_len() - 1;
    let mut entries = DMatrix::zeros(rows, 1);
    entries[(0, 0)] = Cx::new(1.0, 0.0);
    let data = DataMatrix {
        entries,
        gate_offset: 0,
        n_gates: gates,
        symbol_indices: vec![2],
    };
    let train = PulseTrain::constant(1, 2);
    let f = apply_filterbank(&data, &b, &train, ApplyMode::Linear).unwrap();
    for g in 0..gates {
        assert!((f.entries[(g, 0)] - b.filters[2][g + b.peak_index]).norm() < 1e-12);
    }
}

#[test]
fn apply_rejects_mismatches() {
    let a = small_alphabet();
    let lin = bank(&a, DesignKind::CoherentLinear);
    let cfg = scene_cfg(&a, vec![]);
    let scene = generate_scene::<f64>(&cfg, 1).unwrap();
    let train = PulseTrain::constant(16, 0);
    let data = simulate_ncpi(&scene, &a, &train).unwrap();
    assert!(apply_filterbank(&data, &lin, &train, ApplyMode::Circular).is_err());
    assert!(apply_filterbank(&data, &lin, &PulseTrain::constant(16, 1), ApplyMode::Linear).is_err());
    let mut short = data.clone();
    short.n_gates += 1;
    assert!(apply_filterbank(&short, &lin, &train, ApplyMode::Linear).is_err());
}

#[test]
fn doppler_axis_layout() {
    let ax = doppler_axis(50);
    assert_eq!(ax.len(), 50);
    assert!((ax[0] + 0.48).abs() < 1e-15);
    assert_eq!(ax[49], 0.5);
    assert_eq!(ax[24], 0.0);
    let odd = doppler_axis(7);
    assert!((odd[0] + 3.0 / 7.0).abs() < 1e-15 && (odd[6] - 3.0 / 7.0).abs() < 1e-15);
    for w in ax.windows(2) {
        assert!((w[1] - w[0] - 0.02).abs() < 1e-12);
    }
}

fn single_mover_map(nu: f64, window: DopplerWindow) -> RangeDopplerMap {
    let a = small_alphabet();
    let b = bank(&a, DesignKind::CoherentCircular);
    let mut cfg = scene_cfg(&a, vec![TargetSpec { range_cell: 20, normalized_doppler: nu }]);
    cfg.n_pulses = 50;
    let scene = generate_scene::<f64>(&cfg, 4).unwrap();
    let train = PulseTrain::random(50, 4, 2).unwrap();
    let data = simulate_ncpi(&scene, &a, &train).unwrap();
    let f = apply_filterbank(&data, &b, &train, ApplyMode::Circular).unwrap();
    range_doppler_map(&f, window).unwrap()
}

#[test]
fn mover_peaks_in_nearest_bin() {
    for window in [DopplerWindow::Rectangular, DopplerWindow::BlackmanHarris] {
        let map = single_mover_map(0.3, window);
        let (mut best, mut at) = (0.0, (0, 0));
        for r in 0..map.magnitudes.nrows() {
            for c in 0..map.n_doppler() {
                if map.magnitudes[(r, c)] > best {
                    best = map.magnitudes[(r, c)];
                    at = (r, c);
                }
            }
        }
        assert_eq!(at, (20, 24 + 15));
        assert_eq!(map.doppler_bin(0.3), 39);
        let det = detect_targets(&map, 0.1, 13.0).unwrap();
        let truth = [TargetSpec { range_cell: 20, normalized_doppler: 0.3 }];
        assert!(det.matches(&truth[0], 50));
        assert!(det.detections.iter().all(|d| d.magnitude > det.threshold));
    }
}

#[test]
fn static_scatterer_sits_at_zero_doppler() {
    let map = single_mover_map(0.0, DopplerWindow::Rectangular);
    let row = map.magnitudes.row(20);
    let total: f64 = row.iter().map(|v| v * v).sum();
    assert!(row[24] * row[24] / total > 1.0 - 1e-9);
    let det = detect_targets(&map, 0.1, 13.0).unwrap();
    assert!(det.detections.iter().all(|d| d.doppler.abs() > 0.1));
}

#[test]
fn parseval_per_row() {
    let a = small_alphabet();
    let mut cfg = scene_cfg(&a, vec![]);
    cfg.noise = true;
    cfg.cnr_db = 20.0;
    cfg.clutter_doppler = 0.1;
    let scene = generate_scene::<f64>(&cfg, 9).unwrap();
    let train = PulseTrain::random(16, 4, 9).unwrap();
    let data = simulate_ncpi(&scene, &a, &train).unwrap();
    let b = bank(&a, DesignKind::CoherentLinear);
    let f = apply_filterbank(&data, &b, &train, ApplyMode::Linear).unwrap();
    let map = range_doppler_map(&f, DopplerWindow::Rectangular).unwrap();
    for r in 0..f.rows() {
        let slow: f64 = (0..16).map(|m| f.entries[(r, m)].norm_sqr()).sum();
        let fast: f64 = map.magnitudes.row(r).iter().map(|v| v * v).sum();
        assert!((fast - 16.0 * slow).abs() <= 1e-9 * fast, "row {r}");
    }
}

#[test]
fn empty_map_has_no_detections() {
    let map = RangeDopplerMap {
        magnitudes: DMatrix::zeros(10, 8),
        doppler_axis: doppler_axis(8),
        range_axis: (0..10).collect(),
    };
    let det = detect_targets(&map, 0.1, 3.0).unwrap();
    assert!(det.detections.is_empty());
    assert!(detect_targets(&map, 0.1, f64::NAN).is_err());
}

#[test]
fn detection_wraps_doppler_neighbourhood() {
    let mut mags = DMatrix::from_element(5, 8, 1.0);
    mags[(2, 0)] = 50.0;
    mags[(2, 7)] = 60.0;
    let map = RangeDopplerMap {
        magnitudes: mags,
        doppler_axis: doppler_axis(8),
        range_axis: (0..5).collect(),
    };
    let det = detect_targets(&map, 0.1, 10.0).unwrap();
    assert_eq!(det.detections.len(), 1);
    assert_eq!(det.detections[0].doppler_bin, 7);
    assert_eq!(det.detections[0].doppler, 0.5);
}

#[test]
fn central_crop() {
    let map = RangeDopplerMap {
        magnitudes: DMatrix::from_fn(450, 4, |r, _| r as f64),
        doppler_axis: doppler_axis(4),
        range_axis: (0..450).collect(),
    };
    let c = map.central(100);
    assert_eq!(c.range_axis.first(), Some(&175));
    assert_eq!(c.magnitudes.nrows(), 100);
    assert_eq!(c.magnitudes[(0, 0)], 175.0);
}

#[test]
fn wilson_interval_values() {
    let (lo, hi) = wilson_interval(50, 100, WILSON_Z);
    assert!((lo - 0.403832).abs() < 1e-6 && (hi - 0.596168).abs() < 1e-6);
    let (lo, hi) = wilson_interval(0, 100, WILSON_Z);
    assert_eq!(lo, 0.0);
    assert!((hi - 0.0369935).abs() < 1e-6);
    let w1 = CurvePoint::from_count(0.0, 200, 1000).ci_width();
    let w2 = CurvePoint::from_count(0.0, 400, 2000).ci_width();
    let ratio = w2 / w1;
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2);
}

#[test]
fn snr_interpolation() {
    let pts = [
        CurvePoint::from_count(0.0, 1000, 10000),
        CurvePoint::from_count(2.0, 10, 10000),
        CurvePoint::from_count(4.0, 0, 10000),
    ];
    // log10 falls from -1 to -3 over 2 dB
    assert!((snr_at_ser(&pts, 1e-2).unwrap() - 1.0).abs() < 1e-12);
    // zero count becomes 0.5/trials = 5e-5
    let x = snr_at_ser(&pts, 1e-4).unwrap();
    let expect = 2.0 + (-4.0 + 3.0) / (5e-5f64.log10() + 3.0) * 2.0;
    assert!((x - expect).abs() < 1e-12);
    assert!(snr_at_ser(&pts[..1], 1e-2).is_none());
    let mut with_inf = pts.to_vec();
    with_inf.insert(1, CurvePoint::from_count(f64::INFINITY, 0, 10000));
    assert!((snr_at_ser(&with_inf, 1e-2).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ser_noise_free_is_zero_and_reproducible() {
    let a = small_alphabet();
    for kind in [DesignKind::CoherentLinear, DesignKind::CoherentCircular, DesignKind::BaselineLs] {
        let b = bank(&a, kind);
        let c = simulate_ser(&a, &b, &[f64::INFINITY, 0.0], 200, 4).unwrap();
        assert_eq!(c[0].count, 0, "{kind}");
        assert_eq!(c, simulate_ser(&a, &b, &[f64::INFINITY, 0.0], 200, 4).unwrap());
    }
}

#[test]
fn pd_limits_and_reproducibility() {
    let a = small_alphabet();
    let b = bank(&a, DesignKind::CoherentCircular);
    let mut cfg = scene_cfg(&a, vec![TargetSpec { range_cell: 20, normalized_doppler: 0.3 }]);
    cfg.noise = true;
    let setup = PdSetup {
        scene: cfg,
        threshold_db: 13.0,
        exclusion: 0.1,
        window: DopplerWindow::BlackmanHarris,
    };
    let c = estimate_pd(&a, &b, ApplyMode::Circular, &setup, &[40.0, -40.0], 20, 6).unwrap();
    assert_eq!(c[0].y, 1.0);
    assert!(c[1].y <= 0.2);
    assert!(c.iter().all(|p| p.wilson_ci.0 <= p.y && p.y <= p.wilson_ci.1));
    assert_eq!(c, estimate_pd(&a, &b, ApplyMode::Circular, &setup, &[40.0, -40.0], 20, 6).unwrap());
}
