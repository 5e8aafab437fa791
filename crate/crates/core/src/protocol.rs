//! End-to-end storage scenarios: alignment, index, propagation, then
//! emission detection and the efficiency/storage-time figures of merit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{self, energy, energy_between, make_signal, FieldGrid, SignalSpec};
use crate::grid::TimeGrid;
use crate::maxwell_bloch::{propagate, PropagationConfig, PropagationResult};
use crate::medium::{
    density_for_depth, find_linear_ramp, index_trace, optical_depth, AtomSpec, IndexTrace, MediumSpec, OpticalDepth,
    RampSegment,
};
use crate::rotor::{AlignmentTrace, MoleculeSpec, PulseSpec, RotorNumerics, RotorSolver};
use crate::units;

/// Thresholds for locating the re-emitted pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPolicy {
    /// Window edges sit where the intensity drops below this fraction of the emission peak.
    pub edge_fraction: f64,
    /// Emission peaks below this fraction of the input peak intensity are ignored.
    pub floor_fraction: f64,
    /// Half-width of the excluded input region, in units of the signal duration.
    pub exclusion_durations: f64,
    /// Relative residual allowed when fitting the storage ramp.
    pub ramp_tolerance: f64,
}

impl Default for AnalysisPolicy {
    fn default() -> Self {
        Self { edge_fraction: 0.01, floor_fraction: 1e-4, exclusion_durations: 1.5, ramp_tolerance: 0.02 }
    }
}

/// A complete memory run. All quantities in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub molecule: MoleculeSpec,
    pub temperature: f64,
    /// Pump and control pulses, in any order.
    pub pulses: Vec<PulseSpec>,
    pub rotor: RotorNumerics,
    pub molecular_density: f64,
    pub atomic_density: f64,
    pub atom: AtomSpec,
    pub signal: SignalSpec,
    /// Moving-frame window `[start, end]`.
    pub window: (f64, f64),
    pub dt: f64,
    pub propagation: PropagationConfig,
    pub analysis: AnalysisPolicy,
}

impl ScenarioConfig {
    pub fn medium(&self) -> Result<MediumSpec> {
        MediumSpec::new(self.molecule.clone(), self.molecular_density, self.atomic_density, self.atom)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(self.window.0, self.window.1, self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.window;
        let s = &self.signal;
        if !(b > a) {
            return Err(Error::invalid("window", "end must be later than start"));
        }
        if s.center_time - 3.0 * s.duration < a || s.center_time + 3.0 * s.duration > b {
            return Err(Error::invalid("signal", "signal centre +- 3 durations must lie inside the window"));
        }
        let limit = field::carrier_max_dt(s.carrier_omega.max(self.atom.transition_omega));
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive and at most {:.4} fs", units::au_to_fs(limit)),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        self.medium()?;
        self.propagation.validate()
    }
}

/// Alignment, index and input field shared by runs that differ only in atomic density.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub alignment: AlignmentTrace,
    pub index: IndexTrace,
    pub input: FieldGrid,
    /// Linear fit of the index around the signal centre, if one exists.
    pub ramp: Option<RampSegment>,
}

pub fn prepare(config: &ScenarioConfig, execution: Execution) -> Result<Prepared> {
    config.validate()?;
    let grid = config.grid()?;
    let solver = RotorSolver::new(config.molecule.clone(), config.pulses.clone()).with_numerics(config.rotor);
    let alignment = solver.thermal_alignment(config.temperature, grid, execution)?;
    let index = index_trace(&alignment, &config.medium()?);
    let input = make_signal(&config.signal, grid)?;
    let ramp = find_linear_ramp(&index, config.signal.center_time, config.analysis.ramp_tolerance)
        .ok()
        .filter(|r| r.slope != 0.0 && r.t_end > r.t_start);
    Ok(Prepared { alignment, index, input, ramp })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryResult {
    pub efficiency: f64,
    /// Peak-to-peak delay between input and emission; zero when nothing was emitted.
    pub storage_time: f64,
    pub emission_window: Option<(f64, f64)>,
    /// Output energy outside the emission window, relative to the input energy.
    pub leakage_fraction: f64,
    /// Output energy inside the excluded input region, relative to the input energy.
    pub transmitted_fraction: f64,
    pub time_bandwidth_product: f64,
    pub input_peak_time: f64,
    pub emission_peak_time: Option<f64>,
    pub optical_depth: Option<OpticalDepth>,
    pub ramp: Option<RampSegment>,
    pub exclusion: (f64, f64),
    pub input: FieldGrid,
    pub propagation: PropagationResult,
    pub warnings: Vec<String>,
}

impl MemoryResult {
    /// Summary record; `config_echo` is embedded verbatim.
    pub fn to_json(&self, config_echo: serde_json::Value) -> serde_json::Value {
        let fs = units::au_to_fs;
        let (ta, tb) = self.emission_window.map(|(a, b)| (Some(fs(a)), Some(fs(b)))).unwrap_or((None, None));
        serde_json::json!({
            "efficiency": self.efficiency,
            "storage_time_fs": fs(self.storage_time),
            "t_a_fs": ta,
            "t_b_fs": tb,
            "leakage_fraction": self.leakage_fraction,
            "time_bandwidth_product": self.time_bandwidth_product,
            "emission_detected": self.emission_window.is_some(),
            "transmitted_fraction": self.transmitted_fraction,
            "input_peak_fs": fs(self.input_peak_time),
            "emission_peak_fs": self.emission_peak_time.map(fs),
            "optical_depth": self.optical_depth.map(|d| d.depth),
            "ramp": self.ramp.map(|r| r.to_json()),
            "exclusion_fs": [fs(self.exclusion.0), fs(self.exclusion.1)],
            "z_steps_internal": self.propagation.substeps * self.propagation.z_positions.len().saturating_sub(1),
            "max_physicality_violation": self.propagation.max_violation,
            "warnings": self.warnings,
            "config_echo": config_echo,
        })
    }
}

/// Runs the full pipeline for `config`.
pub fn run_memory(config: &ScenarioConfig, execution: Execution) -> Result<MemoryResult> {
    let prepared = prepare(config, execution)?;
    run_prepared(config, &prepared, config.atomic_density)
}

/// Propagation and analysis on precomputed traces, with the atomic density overridden.
pub fn run_prepared(config: &ScenarioConfig, prepared: &Prepared, atomic_density: f64) -> Result<MemoryResult> {
    let medium = MediumSpec { atomic_density, ..config.medium()? };
    let mut warnings: Vec<String> = medium.validity_warning().into_iter().collect();
    let propagation = propagate(&prepared.input, &prepared.index, &medium, &config.propagation)?;
    let excitation = propagation.atom_final.max_excitation();
    if excitation > 1e-3 {
        warnings.push(format!("peak excited population {excitation:.2e}; response is no longer linear"));
    }

    let input = &prepared.input;
    let output = &propagation.field_out;
    let e_in = energy(input);
    let e_out = energy(output);
    let exclusion = input_exclusion(config, prepared, &medium);
    let transmitted = energy_between(output, exclusion.0, exclusion.1) / e_in;
    let input_peak_time = input.peak_time();
    let optical_depth =
        prepared.ramp.as_ref().and_then(|r| optical_depth(&medium, r, config.signal.carrier_omega, config.atom.dipole).ok());

    let mut result = MemoryResult {
        efficiency: 0.0,
        storage_time: 0.0,
        emission_window: None,
        leakage_fraction: e_out / e_in,
        transmitted_fraction: transmitted,
        time_bandwidth_product: 0.0,
        input_peak_time,
        emission_peak_time: None,
        optical_depth,
        ramp: prepared.ramp,
        exclusion,
        input: input.clone(),
        propagation: propagation.clone(),
        warnings,
    };
    match detect_emission_window(output, input.peak_intensity(), exclusion, &config.analysis) {
        Ok(window) => {
            let eff = efficiency(input, output, window)?;
            let intensity = output.intensity();
            let g = output.grid;
            let lo = g.nearest(window.0);
            let hi = (g.nearest(window.1) + 1).min(g.len);
            let peak = field::peak_time_in(&intensity, g, lo, hi);
            result.efficiency = eff;
            result.emission_window = Some(window);
            result.emission_peak_time = Some(peak);
            result.storage_time = peak - input_peak_time;
            result.leakage_fraction = (e_out / e_in - eff).max(0.0);
            result.time_bandwidth_product = time_bandwidth(&result, &config.signal);
        }
        Err(Error::NoEmission(reason)) => result.warnings.push(format!("no emission detected: {reason}")),
        Err(e) => return Err(e),
    }
    Ok(result)
}

/// Region around the input pulse, widened by the group lag the unabsorbed
/// part picks up from the index at the signal time.
fn input_exclusion(config: &ScenarioConfig, prepared: &Prepared, medium: &MediumSpec) -> (f64, f64) {
    let s = &config.signal;
    let half = config.analysis.exclusion_durations * s.duration;
    let dn = prepared.index.value_at(s.center_time) - medium.baseline_index();
    let lag = dn * config.propagation.length / units::C_AU;
    (s.center_time - half + lag.min(0.0), s.center_time + half + lag.max(0.0))
}

/// `integral_{t_a}^{t_b} |E_out|^2 / integral |E_in|^2`.
pub fn efficiency(input: &FieldGrid, output: &FieldGrid, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    let g = output.grid;
    if !(b > a) {
        return Err(Error::invalid("efficiency window", "t_b must exceed t_a"));
    }
    if a < g.t0 - 1e-9 * g.dt || b > g.end() + 1e-9 * g.dt {
        return Err(Error::invalid("efficiency window", "window must lie inside the output grid"));
    }
    let e_in = energy(input);
    if !(e_in > 0.0) {
        return Err(Error::invalid("efficiency", "input field carries no energy"));
    }
    Ok(energy_between(output, a, b) / e_in)
}

/// Window around the strongest intensity peak after `exclusion`, extended
/// to the nearest samples below `edge_fraction` of that peak.
pub fn detect_emission_window(
    output: &FieldGrid,
    input_peak_intensity: f64,
    exclusion: (f64, f64),
    policy: &AnalysisPolicy,
) -> Result<(f64, f64)> {
    let g = output.grid;
    let intensity = output.intensity();
    let start = ((exclusion.1 - g.t0) / g.dt).floor().max(-1.0) as i64 + 1;
    let start = start.max(0) as usize;
    if start >= g.len {
        return Err(Error::NoEmission("nothing is recorded after the input region".into()));
    }
    let (k, peak) = intensity[start..]
        .iter()
        .enumerate()
        .fold((start, 0.0), |(bk, bv), (i, &v)| if v > bv { (start + i, v) } else { (bk, bv) });
    let floor = policy.floor_fraction * input_peak_intensity;
    if !(peak > floor) {
        return Err(Error::NoEmission(format!(
            "strongest post-input intensity is {:.3e} of the input peak",
            peak / input_peak_intensity
        )));
    }
    let edge = policy.edge_fraction * peak;
    let mut lo = k;
    while lo > start && intensity[lo] >= edge {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < g.len && intensity[hi] >= edge {
        hi += 1;
    }
    Ok((g.time(lo), g.time(hi)))
}

/// Storage time over signal duration.
pub fn time_bandwidth(result: &MemoryResult, signal: &SignalSpec) -> f64 {
    storage_over_duration(result.storage_time, signal.duration)
}

fn storage_over_duration(storage: f64, duration: f64) -> f64 {
    storage / duration
}

/// Optical depth realized by atomic density `density` on the signal ramp.
pub fn depth_to_density(config: &ScenarioConfig, prepared: &Prepared, depth: f64) -> Result<f64> {
    let ramp = prepared
        .ramp
        .as_ref()
        .ok_or_else(|| Error::invalid("optical depth sweep", "no linear index ramp at the signal time"))?;
    Ok(density_for_depth(&config.medium()?, ramp, config.signal.carrier_omega, config.atom.dipole, depth))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub optical_depth: f64,
    pub atomic_density: f64,
    pub efficiency: f64,
    pub storage_time: f64,
}

/// One run per depth; depths are realized by scaling the atomic density at
/// fixed ramp. Points run concurrently under `Execution::Parallel`.
pub fn sweep_optical_depth(config: &ScenarioConfig, depths: &[f64], execution: Execution) -> Result<Vec<SweepPoint>> {
    if depths.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::invalid("optical depth sweep", "depths must be finite and non-negative"));
    }
    let prepared = prepare(config, execution)?;
    let densities = depths
        .iter()
        .map(|&d| depth_to_density(config, &prepared, d))
        .collect::<Result<Vec<_>>>()?;
    let runs = execution.map(&densities, |&na| run_prepared(config, &prepared, na));
    depths
        .iter()
        .zip(densities)
        .zip(runs)
        .map(|((&d, na), r)| {
            let r = r?;
            Ok(SweepPoint { optical_depth: d, atomic_density: na, efficiency: r.efficiency, storage_time: r.storage_time })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "optical_depth,efficiency")?;
    for p in points {
        writeln!(w, "{:.10e},{:.10e}", p.optical_depth, p.efficiency)?;
    }
    Ok(())
}

/// Spectrum of the input pulse followed by the emitted pulse, the pair
/// whose interference produces fringes spaced by `2 pi / storage time`.
pub fn storage_record_spectrum(result: &MemoryResult, min_len: usize) -> Result<field::Spectrum> {
    let (a, b) = result
        .emission_window
        .ok_or_else(|| Error::NoEmission("no emitted pulse to pair with the input".into()))?;
    let out = &result.propagation.field_out;
    let g = out.grid;
    let samples = g
        .times()
        .zip(&result.input.samples)
        .zip(&out.samples)
        .map(|((t, i), o)| if t >= a && t <= b { i + o } else { *i })
        .collect();
    let joint = FieldGrid { samples, ..out.clone() };
    Ok(field::spectrum_padded(&joint, min_len))
}
