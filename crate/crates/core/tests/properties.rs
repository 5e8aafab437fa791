use alignmem::field::{energy, make_signal, spectrum, FieldGrid, SignalSpec};
use alignmem::maxwell_bloch::{integrate_bloch, propagate, PropagationConfig};
use alignmem::medium::{extract_ramp, AtomSpec, IndexTrace, MediumSpec};
use alignmem::protocol::efficiency;
use alignmem::rotor::{build_cos2_operator, evolve_single, thermal_alignment, MoleculeSpec, PulseSpec};
use alignmem::{units, TimeGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn atom() -> AtomSpec {
    AtomSpec::rb87_d1()
}

fn carrier_grid(span_fs: f64) -> TimeGrid {
    // resolves every carrier used below, up to 1.8 eV
    let dt = 2.0 * std::f64::consts::PI / units::ev_to_au(1.8) / 20.0;
    TimeGrid::spanning(units::fs_to_au(-span_fs), units::fs_to_au(span_fs), dt).unwrap()
}

fn pulse(amplitude: f64, duration_fs: f64, center_fs: f64, carrier_ev: f64, grid: TimeGrid) -> FieldGrid {
    let s = SignalSpec::new(amplitude, units::fs_to_au(duration_fs), units::fs_to_au(center_fs), units::ev_to_au(carrier_ev))
        .unwrap();
    make_signal(&s, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn cos2_operator_is_symmetric_and_banded(j in 0u32..60, jp in 0u32..60, m in -20i32..=20) {
        let op = build_cos2_operator(60, m).unwrap();
        prop_assert_eq!(op.element(j, jp), op.element(jp, j));
        let lo = m.unsigned_abs();
        if j < lo || jp < lo || !matches!(j.abs_diff(jp), 0 | 2) {
            prop_assert_eq!(op.element(j, jp), 0.0);
        }
        if j >= lo {
            let d = op.element(j, j);
            prop_assert!(d > 0.0 && d < 1.0);
        }
    }

    #[test]
    fn single_state_traces_are_bounded_and_m_symmetric(
        j in 0u32..25,
        m_frac in 0.0f64..1.0,
        intensity in 0.0f64..8e13,
    ) {
        let m = (m_frac * j as f64).floor() as i32;
        let mol = MoleculeSpec::co2();
        let p = [PulseSpec::from_lab(60.0, 50.0, intensity).unwrap()];
        let grid = TimeGrid::spanning(0.0, units::fs_to_au(500.0), units::fs_to_au(5.0)).unwrap();
        let plus = evolve_single((j, m), &p, grid, &mol).unwrap();
        let minus = evolve_single((j, -m), &p, grid, &mol).unwrap();
        prop_assert_eq!(&plus, &minus);
        prop_assert!(plus.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn field_free_thermal_trace_is_isotropic(temperature in 20.0f64..500.0) {
        let grid = TimeGrid::spanning(0.0, units::fs_to_au(5000.0), units::fs_to_au(100.0)).unwrap();
        let p = [PulseSpec::from_lab(50.0, 50.0, 0.0).unwrap()];
        let tr = thermal_alignment(&MoleculeSpec::co2(), &p, temperature, grid).unwrap();
        prop_assert!(tr.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-3));
    }

    #[test]
    fn index_is_affine_in_alignment(
        density in 1e19f64..1e22,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let m = MediumSpec::new(MoleculeSpec::co2(), units::per_cm3_to_au(density), 0.0, atom()).unwrap();
        let mixed = m.index_at(lambda * a + (1.0 - lambda) * b);
        let interp = lambda * m.index_at(a) + (1.0 - lambda) * m.index_at(b);
        prop_assert!((mixed - interp).abs() < 1e-14);
        prop_assert_eq!(m.baseline_index(), m.index_at(1.0 / 3.0));
        prop_assert!(m.index_at(1.0) >= m.index_at(0.0));
    }

    #[test]
    fn ramp_fit_recovers_a_linear_index(slope in -1e-8f64..1e-8, offset in -1e-3f64..1e-3) {
        prop_assume!(slope.abs() > 1e-12);
        let grid = TimeGrid::new(0.0, 10.0, 400).unwrap();
        let t_mid = grid.time(200);
        let n_values = grid.times().map(|t| 1.0 + offset + slope * (t - t_mid)).collect();
        let trace = IndexTrace { grid, n_values, n0: 1.0, frame_velocity: units::C_AU };
        let r = extract_ramp(&trace, (grid.time(50), grid.time(350))).unwrap();
        prop_assert!(((r.slope - slope) / slope).abs() < 1e-8);
        prop_assert!(r.residual < 1e-12);
    }

    #[test]
    fn parseval_holds_for_pulse_pairs(
        d1 in 20.0f64..80.0,
        d2 in 20.0f64..80.0,
        sep in -200.0f64..200.0,
        amp in 0.1f64..2.0,
    ) {
        let g = carrier_grid(700.0);
        let mut f = pulse(1.0, d1, 0.0, 1.4, g);
        let second = pulse(amp, d2, sep, 1.5, g);
        for (a, b) in f.samples.iter_mut().zip(&second.samples) {
            *a += b;
        }
        let (e_t, e_w) = (energy(&f), spectrum(&f).energy());
        prop_assert!(((e_t - e_w) / e_t).abs() < 1e-6, "{} vs {}", e_t, e_w);
    }

    #[test]
    fn bloch_state_stays_physical(
        amp in 1e-4f64..3e-2,
        detuning_ev in -0.2f64..0.2,
        t2_fs in 100.0f64..1e5,
        duration_fs in 20.0f64..100.0,
    ) {
        let a = AtomSpec::new(atom().transition_omega, atom().dipole, f64::INFINITY, units::fs_to_au(t2_fs)).unwrap();
        let f = pulse(amp, duration_fs, 0.0, 1.56 + detuning_ev, carrier_grid(400.0));
        let st = integrate_bloch(&f, &a, 1e-9).unwrap().state;
        for (c, d) in st.rho_ba.iter().zip(&st.rho_d) {
            prop_assert!(c.norm_sqr() + 0.25 * d * d <= 0.25 + 1e-12);
            prop_assert!(d.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn vacuum_is_the_identity(amp in 1e-8f64..1.0, center in -100.0f64..100.0, len_cm in 0.01f64..5.0) {
        let f = pulse(amp, 50.0, center, 1.4, carrier_grid(400.0));
        let medium = MediumSpec::new(MoleculeSpec::co2(), 0.0, 0.0, atom()).unwrap();
        let cfg = PropagationConfig::new(units::cm_to_au(len_cm), 3).unwrap();
        let r = propagate(&f, &IndexTrace::uniform(f.grid, 1.0), &medium, &cfg).unwrap();
        let err = r.field_out.samples.iter().zip(&f.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8 * amp);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn weak_field_propagation_is_linear_and_passive(scale in 0.1f64..10.0, detuning_ev in -0.05f64..0.05) {
        let a = atom();
        let amp = 1e-7 * a.transition_omega / a.dipole;
        let f = pulse(amp, 50.0, -150.0, 1.56 + detuning_ev, carrier_grid(400.0));
        let mut g = f.clone();
        for s in &mut g.samples {
            *s *= scale;
        }
        let medium = MediumSpec::new(MoleculeSpec::co2(), 0.0, units::per_cm3_to_au(1e14), a).unwrap();
        let index = IndexTrace::uniform(f.grid, 1.0);
        let cfg = PropagationConfig::new(units::cm_to_au(0.1), 4).unwrap();
        let r1 = propagate(&f, &index, &medium, &cfg).unwrap();
        let r2 = propagate(&g, &index, &medium, &cfg).unwrap();
        let norm = r1.field_out.samples.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
        let diff = r1
            .field_out
            .samples
            .iter()
            .zip(&r2.field_out.samples)
            .map(|(x, y)| (x * scale - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff < 1e-6 * scale * norm);
        let eff = efficiency(&f, &r1.field_out, (f.grid.t0, f.grid.end())).unwrap();
        prop_assert!((0.0..=1.0 + 1e-6).contains(&eff), "{}", eff);
    }

    #[test]
    fn efficiency_is_a_bounded_fraction(gain in 0.0f64..1.0, a_fs in -300.0f64..0.0, b_fs in 1.0f64..300.0) {
        let f = pulse(1.0, 50.0, 0.0, 1.4, carrier_grid(400.0));
        let mut out = f.clone();
        for s in &mut out.samples {
            *s *= Complex64::from_polar(gain.sqrt(), 0.3);
        }
        let e = efficiency(&f, &out, (units::fs_to_au(a_fs), units::fs_to_au(b_fs))).unwrap();
        prop_assert!(e >= 0.0 && e <= gain * (1.0 + 1e-12));
    }
}
