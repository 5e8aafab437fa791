use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::propagate::{RotorRecord, RotorSolver, Schedule};
use super::{AlignmentTrace, MoleculeSpec, PulseSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::TimeGrid;
use crate::units::KB_HARTREE_PER_K;

/// Boltzmann-weighted set of initial `|J, M>` states.
///
/// Only `M >= 0` is listed; `M > 0` entries carry the weight of both
/// `+M` and `-M`, whose traces are identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnsemble {
    pub temperature: f64,
    pub states: Vec<(u32, i32, f64)>,
    pub partition_function: f64,
    pub included_weight: f64,
    pub j_thermal: u32,
}

impl ThermalEnsemble {
    pub fn new(molecule: &MoleculeSpec, temperature: f64, tolerance: f64, j_cap: u32) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        let kt = KB_HARTREE_PER_K * temperature;
        let level = |j: u32| {
            let g = molecule.spin_weights.weight(j);
            g * (-molecule.energy(j) / kt).exp()
        };
        let degenerate = |j: u32| (2 * j + 1) as f64 * level(j);

        let z: f64 = (0..=j_cap).map(degenerate).sum();
        let tail = degenerate(j_cap).max(degenerate(j_cap.saturating_sub(1)));
        if !(z > 0.0) || tail > 1e-3 * tolerance * z {
            return Err(Error::non_convergence(
                "thermal truncation",
                format!("Boltzmann tail at J = {j_cap} still holds {:.3e} of the population", tail / z),
            ));
        }

        let mut states = Vec::new();
        let mut included = 0.0;
        let mut j_thermal = 0;
        for j in 0..=j_cap {
            if included >= (1.0 - tolerance) * z {
                break;
            }
            let w = level(j);
            if w == 0.0 {
                continue;
            }
            for m in 0..=j as i32 {
                states.push((j, m, if m == 0 { w } else { 2.0 * w }));
            }
            included += degenerate(j);
            j_thermal = j;
        }
        if included < (1.0 - tolerance) * z {
            return Err(Error::non_convergence(
                "thermal truncation",
                format!("only {:.6} of the population fits below J = {j_cap}", included / z),
            ));
        }
        Ok(Self { temperature, states, partition_function: z, included_weight: included, j_thermal })
    }

    pub fn omitted_fraction(&self) -> f64 {
        1.0 - self.included_weight / self.partition_function
    }
}

/// Running weighted sum of per-state records, keyed by absolute `J`.
struct Accumulator {
    diag: Vec<f64>,
    couplings: Vec<Vec<Complex64>>,
    pulse_values: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(schedule: &Schedule) -> Self {
        let n = schedule.interval_count();
        Self {
            diag: vec![0.0; n + 1],
            couplings: vec![Vec::new(); n + 1],
            pulse_values: schedule.pulse_ranges.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    fn add(&mut self, rec: &RotorRecord, weight: f64) {
        for (k, seg) in rec.free.iter().enumerate() {
            self.diag[k] += weight * seg.diag;
            let acc = &mut self.couplings[k];
            for (i, c) in seg.couplings.iter().enumerate() {
                let j = (seg.j_lo + 2 * i as u32) as usize;
                if acc.len() <= j {
                    acc.resize(j + 1, Complex64::new(0.0, 0.0));
                }
                acc[j] += c * weight;
            }
        }
        for (acc, vals) in self.pulse_values.iter_mut().zip(&rec.pulse_values) {
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += weight * v;
            }
        }
    }

    fn evaluate(&self, schedule: &Schedule, molecule: &MoleculeSpec, norm: f64) -> Vec<f64> {
        let grid = schedule.grid;
        let mut out = vec![0.0; grid.len];
        for (k, range) in schedule.free_ranges.iter().enumerate() {
            let t_ref = schedule.free_reference(k);
            let terms: Vec<(f64, Complex64)> = self.couplings[k]
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .map(|(j, c)| {
                    let j = j as u32;
                    (molecule.energy(j + 2) - molecule.energy(j), *c)
                })
                .collect();
            for i in range.clone() {
                let dt = grid.time(i) - t_ref;
                let mut acc = 0.0;
                for (w, c) in &terms {
                    let (s, co) = (w * dt).sin_cos();
                    acc += c.re * co + c.im * s;
                }
                out[i] = (self.diag[k] + 2.0 * acc) / norm;
            }
        }
        for (vals, range) in self.pulse_values.iter().zip(&schedule.pulse_ranges) {
            for (o, v) in out[range.clone()].iter_mut().zip(vals) {
                *o = v / norm;
            }
        }
        out
    }
}

impl RotorSolver {
    /// Boltzmann-averaged `<cos^2 theta>_T` on `grid`.
    pub fn thermal_alignment(
        &self,
        temperature: f64,
        grid: TimeGrid,
        execution: Execution,
    ) -> Result<AlignmentTrace> {
        let ensemble = ThermalEnsemble::new(
            &self.molecule,
            temperature,
            self.numerics.thermal_tolerance,
            self.numerics.j_cap,
        )?;
        self.ensemble_alignment(&ensemble, grid, execution)
    }

    pub fn ensemble_alignment(
        &self,
        ensemble: &ThermalEnsemble,
        grid: TimeGrid,
        execution: Execution,
    ) -> Result<AlignmentTrace> {
        let schedule = self.schedule(grid);
        let records = execution.map(&ensemble.states, |&(j, m, _)| self.run_state(&schedule, j, m));
        let mut acc = Accumulator::new(&schedule);
        for (rec, &(_, _, w)) in records.into_iter().zip(&ensemble.states) {
            acc.add(&rec?, w);
        }
        let values = acc.evaluate(&schedule, &self.molecule, ensemble.included_weight);
        Ok(AlignmentTrace { grid, values, temperature: ensemble.temperature })
    }
}

/// Thermal alignment trace with default rotor numerics.
pub fn thermal_alignment(
    molecule: &MoleculeSpec,
    pulses: &[PulseSpec],
    temperature: f64,
    grid: TimeGrid,
) -> Result<AlignmentTrace> {
    RotorSolver::new(molecule.clone(), pulses.to_vec()).thermal_alignment(temperature, grid, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units;

    #[test]
    fn co2_ensemble_truncation() {
        let mol = MoleculeSpec::co2();
        let e = ThermalEnsemble::new(&mol, 295.0, 1e-4, 400).unwrap();
        assert!(e.omitted_fraction() < 1e-4);
        assert!(e.states.iter().all(|&(j, _, _)| j % 2 == 0));
        assert!(e.j_thermal > 50 && e.j_thermal < 90, "j_thermal = {}", e.j_thermal);
    }

    #[test]
    fn rejects_cap_too_small() {
        let mol = MoleculeSpec::co2();
        assert!(ThermalEnsemble::new(&mol, 295.0, 1e-4, 20).is_err());
        assert!(ThermalEnsemble::new(&mol, 0.0, 1e-4, 400).is_err());
    }

    #[test]
    fn field_free_ensemble_is_isotropic() {
        let mol = MoleculeSpec::co2();
        let grid = TimeGrid::new(0.0, units::fs_to_au(100.0), 20).unwrap();
        let zero = PulseSpec::from_lab(500.0, 50.0, 0.0).unwrap();
        let tr = thermal_alignment(&mol, &[zero], 295.0, grid).unwrap();
        assert!(tr.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }
}
