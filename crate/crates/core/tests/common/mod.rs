#![allow(dead_code)]

use alignmem::field::SignalSpec;
use alignmem::maxwell_bloch::PropagationConfig;
use alignmem::medium::AtomSpec;
use alignmem::protocol::{AnalysisPolicy, ScenarioConfig};
use alignmem::rotor::{MoleculeSpec, PulseSpec, RotorNumerics};
use alignmem::{units, TimeGrid};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Associated Legendre functions normalized to unit norm on [-1, 1],
/// for `l = m ..= l_max` at `x`. Index `l - m`.
pub fn normalized_legendre(l_max: u32, m: u32, x: f64) -> Vec<f64> {
    let mf = m as f64;
    let mut pmm = (0.5 * (2.0 * mf + 1.0)).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf - 1.0) / (2.0 * kf)).sqrt() * (1.0 - x * x).sqrt();
    }
    let mut out = vec![pmm];
    if l_max == m {
        return out;
    }
    out.push(x * (2.0 * mf + 3.0).sqrt() * pmm);
    for l in m + 2..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
        let n = out.len();
        out.push(a * (x * out[n - 1] - b * out[n - 2]));
    }
    out
}

/// `<j, m| cos^2 theta |jp, m>` for all `j, jp` in `|m| ..= j_max`, by quadrature.
pub fn cos2_quadrature(j_max: u32, m: i32) -> Vec<Vec<f64>> {
    let ma = m.unsigned_abs();
    let (xs, ws) = gauss_legendre(j_max as usize + 8);
    let n = (j_max - ma + 1) as usize;
    let mut out = vec![vec![0.0; n]; n];
    for (&x, &w) in xs.iter().zip(&ws) {
        let p = normalized_legendre(j_max, ma, x);
        for a in 0..n {
            for b in 0..n {
                out[a][b] += w * p[a] * p[b] * x * x;
            }
        }
    }
    out
}

pub fn co2_pulse(center_fs: f64) -> PulseSpec {
    PulseSpec::from_lab(center_fs, 50.0, 5e13).unwrap()
}

/// Sample variance of `values` on `grid` restricted to `[a, b]` (fs).
pub fn variance_between(grid: TimeGrid, values: &[f64], a_fs: f64, b_fs: f64) -> f64 {
    let sel: Vec<f64> = grid
        .times()
        .zip(values)
        .filter(|(t, _)| {
            let f = units::au_to_fs(*t);
            f >= a_fs && f <= b_fs
        })
        .map(|(_, v)| *v)
        .collect();
    let mean = sel.iter().sum::<f64>() / sel.len() as f64;
    sel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sel.len() as f64
}

/// Storage scenario: pump peaked at 50 fs, signal on the falling edge of the
/// half revival, 1 cm of CO2 with rubidium atoms.
pub fn memory_config(
    signal_fs: f64,
    window_fs: (f64, f64),
    pulses_fs: &[f64],
    length_cm: f64,
    atomic_density_cm3: f64,
) -> ScenarioConfig {
    let atom = AtomSpec::rb87_d1();
    ScenarioConfig {
        molecule: MoleculeSpec::co2(),
        temperature: 295.0,
        pulses: pulses_fs.iter().map(|&t| co2_pulse(t)).collect(),
        rotor: RotorNumerics::default(),
        molecular_density: units::per_cm3_to_au(1e21),
        atomic_density: units::per_cm3_to_au(atomic_density_cm3),
        atom,
        signal: SignalSpec::new(
            1e-6 * atom.transition_omega / atom.dipole,
            units::fs_to_au(50.0),
            units::fs_to_au(signal_fs),
            units::ev_to_au(1.4),
        )
        .unwrap(),
        window: (units::fs_to_au(window_fs.0), units::fs_to_au(window_fs.1)),
        dt: 2.0 * std::f64::consts::PI / atom.transition_omega / 20.0,
        propagation: PropagationConfig::new(units::cm_to_au(length_cm), 4).unwrap(),
        analysis: AnalysisPolicy::default(),
    }
}

/// Short storage on the half revival: stores for about 300 fs.
pub fn storage_config() -> ScenarioConfig {
    memory_config(21_470.0, (21_050.0, 22_350.0), &[50.0], 1.0, 1.35e16)
}

/// Revivals attenuated at 21.45 ps and regenerated at `regen_fs`; the
/// signal is held until the regenerated ramp releases it.
pub fn read_config(regen_fs: f64) -> ScenarioConfig {
    memory_config(21_330.0, (21_000.0, 23_200.0), &[50.0, 21_450.0, regen_fs], 1.0, 1.35e16)
}
