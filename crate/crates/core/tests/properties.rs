use dfrc_core::convmat::{
    block_system_from_samples, check_feasibility, default_filter_len, min_filter_len, Feasibility, Flavor,
};
use dfrc_core::dsp::{circular_convolve, direct_convolve};
use dfrc_core::filterdesign::{design_from_system, solve_constrained_ls_oracle};
use dfrc_core::scalar::vec_norm;
use dfrc_core::waveform::{generate_chip_sequence, synth_dpsk, synth_msk, ModulationParams};
use dfrc_core::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phases(k: usize, l: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| (0..l).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect())
        .collect()
}

fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    vec_norm(&d) / vec_norm(b).max(1e-300)
}

fn flavor() -> impl Strategy<Value = Flavor> {
    prop_oneof![Just(Flavor::Linear), Just(Flavor::Circular)]
}

/// `(K, L, extra L_f above the minimum, peak fraction, seed)`.
fn instance() -> impl Strategy<Value = (usize, usize, usize, f64, u64)> {
    (2usize..=4, 2usize..=6, 0usize..=4, 0.0f64..1.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_agrees_with_nullspace_oracle((k, l, extra, frac, seed) in instance(), fl in flavor()) {
        let l_f = min_filter_len(k, l) + extra + 1;
        let n = l + l_f - 1;
        let peak = ((frac * n as f64) as usize).min(n - 1);
        let sys = block_system_from_samples(&phases(k, l, seed), l_f, peak, fl).unwrap();
        let bank = design_from_system(&sys).unwrap();
        let oracle = solve_constrained_ls_oracle(&sys.x(), &sys.xtil(), &sys.e()).unwrap();
        prop_assert!(rel(&bank.stacked(), &oracle) <= 1e-8, "{}", rel(&bank.stacked(), &oracle));
    }

    #[test]
    fn coherent_outputs_coincide((k, l, extra, frac, seed) in instance(), fl in flavor()) {
        let l_f = min_filter_len(k, l) + extra;
        let n = l + l_f - 1;
        let peak = ((frac * n as f64) as usize).min(n - 1);
        let sys = block_system_from_samples(&phases(k, l, seed), l_f, peak, fl).unwrap();
        let bank = design_from_system(&sys).unwrap();
        let y = sys.outputs(&bank.stacked());
        let scale = vec_norm(&y[0]).max(1.0);
        for yk in &y[1..] {
            let d: Vec<Complex64> = yk.iter().zip(&y[0]).map(|(a, b)| a - b).collect();
            prop_assert!(vec_norm(&d) <= 1e-9 * scale);
        }
        let xh = sys.apply_xtil(&bank.stacked());
        prop_assert!(vec_norm(&xh) <= 1e-9 * scale);
    }

    #[test]
    fn generic_waveforms_at_the_tight_bound_admit_only_the_zero_bank(k in 2usize..=4, l in 2usize..=6, seed in any::<u64>()) {
        let l_f = min_filter_len(k, l);
        let sys = block_system_from_samples(&phases(k, l, seed), l_f, 0, Flavor::Linear).unwrap();
        let bank = design_from_system(&sys).unwrap();
        prop_assert!(vec_norm(&bank.stacked()) <= 1e-8);
        let oracle = solve_constrained_ls_oracle(&sys.x(), &sys.xtil(), &sys.e());
        let trivial = matches!(oracle, Err(Error::Infeasible(_)));
        prop_assert!(trivial);
    }

    #[test]
    fn phase_rotation_moves_into_the_filter(seed in any::<u64>(), j in 0usize..3, phi in 0.0..std::f64::consts::TAU, fl in flavor()) {
        let (k, l) = (3, 4);
        let l_f = default_filter_len(k, l);
        let w = phases(k, l, seed);
        let rot = Complex64::from_polar(1.0, phi);
        let mut w2 = w.clone();
        w2[j].iter_mut().for_each(|s| *s *= rot);
        let peak = (l + l_f - 1) / 2;
        let a = design_from_system(&block_system_from_samples(&w, l_f, peak, fl).unwrap()).unwrap();
        let b = design_from_system(&block_system_from_samples(&w2, l_f, peak, fl).unwrap()).unwrap();
        for i in 0..k {
            let expect: Vec<Complex64> = if i == j {
                a.filters[i].iter().map(|h| h / rot).collect()
            } else {
                a.filters[i].clone()
            };
            prop_assert!(rel(&b.filters[i], &expect) <= 1e-9);
        }
    }

    #[test]
    fn block_rows_are_convolutions((k, l, extra, _frac, seed) in instance(), fl in flavor()) {
        let l_f = min_filter_len(k, l) + extra;
        let w = phases(k, l, seed);
        let sys = block_system_from_samples(&w, l_f, 0, fl).unwrap();
        let h = phases(k, sys.taps(), seed ^ 0x5a5a).concat();
        let y = sys.outputs(&h);
        let n = l + l_f - 1;
        let c = sys.taps();
        for i in 0..k {
            let hk = &h[i * c..(i + 1) * c];
            let expect = match fl {
                Flavor::Linear => direct_convolve(&w[i], hk),
                Flavor::Circular => circular_convolve(&w[i], hk, n),
            };
            prop_assert_eq!(y[i].len(), n);
            prop_assert!(rel(&y[i], &expect) <= 1e-12);
        }
    }

    #[test]
    fn feasibility_matches_minimum_length(k in 1usize..=8, l in 1usize..=40, l_f in 1usize..=400) {
        let ok = check_feasibility(k, l, l_f).is_feasible();
        prop_assert_eq!(ok, k == 1 || l_f >= min_filter_len(k, l));
        if !ok {
            let w = phases(k, l, 1);
            let err = block_system_from_samples(&w, l_f, 0, Flavor::Linear).unwrap_err();
            let is_dimension = matches!(err, Error::Dimension { .. });
            prop_assert!(is_dimension);
            prop_assert!(block_system_from_samples(&w, l_f, 0, Flavor::Circular).is_ok());
        }
        if let Feasibility::Feasible { lower_tight: true } = check_feasibility(k, l, l_f) {
            prop_assert_eq!((k - 1) * (l + l_f - 1), k * l_f);
        }
    }

    #[test]
    fn modulated_pulses_have_unit_modulus_and_are_reproducible(n in 1usize..=40, spc in 1usize..=8, seed in any::<u64>()) {
        let p = ModulationParams::new(n, 1e-3, spc as f64 * 1e3).unwrap();
        let chips = generate_chip_sequence(n, seed).unwrap();
        prop_assert_eq!(&chips.chips, &generate_chip_sequence(n, seed).unwrap().chips);
        let d = synth_dpsk::<f64>(&chips, &p).unwrap();
        let m = synth_msk::<f64>(&chips, &p, 0.0).unwrap();
        prop_assert_eq!(d.len(), n * spc);
        prop_assert_eq!(m.len(), n * spc);
        prop_assert!(d.modulus_error() <= 1e-12);
        prop_assert!(m.modulus_error() <= 1e-12);
        prop_assert_eq!(&d.samples, &synth_dpsk::<f64>(&chips, &p).unwrap().samples);
    }
}
