//! Subcommand bodies. Each writes its files atomically into the output
//! directory and embeds the resolved configuration in its JSON record.

use std::io::Write;
use std::path::{Path, PathBuf};

use alignmem::field::{fringe_spacing, spectrogram_tau, spectrogram_z, spectrum, spectrum_padded, FieldGrid};
use alignmem::io::write_atomic;
use alignmem::medium::{find_linear_ramp, index_trace, MediumSpec};
use alignmem::protocol::{prepare, run_prepared, storage_record_spectrum, sweep_optical_depth, write_sweep_csv, MemoryResult};
use alignmem::rotor::{RotorSolver, ThermalEnsemble};
use alignmem::{units, Execution};
use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::{Resolved, RunConfig};

pub struct Options {
    pub out: PathBuf,
    pub grid_scale: f64,
    pub execution: Execution,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NoEmission,
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
    .with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, fill: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<()> {
    write_atomic(path, fill).with_context(|| format!("writing {}", path.display()))
}

/// Input config with defaults filled and the output location removed, so
/// runs differing only in `--out` produce identical records.
fn echo(cfg: &RunConfig, command: &str, opts: &Options, resolved: Option<&Resolved>) -> Value {
    let mut lab = cfg.clone();
    lab.output.dir = None;
    if let (Some(r), Some(w)) = (resolved, lab.window.as_mut()) {
        w.dt_fs = Some(units::au_to_fs(r.scenario.dt));
    }
    json!({
        "command": command,
        "grid_scale": opts.grid_scale,
        "config": lab,
        "atomic_units": resolved.map(|r| serde_json::to_value(&r.scenario).unwrap_or(Value::Null)),
        "notes": resolved.map(|r| r.notes.clone()).unwrap_or_default(),
    })
}

pub fn align(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let molecule = cfg.molecule()?;
    let temperature = cfg.temperature()?;
    let numerics = cfg.rotor_numerics()?;
    let grid = cfg.alignment_grid(opts.grid_scale)?;
    let medium = MediumSpec::new(
        molecule.clone(),
        units::per_cm3_to_au(cfg.medium.molecular_density_cm3),
        units::per_cm3_to_au(cfg.medium.atomic_density_cm3),
        cfg.atom()?,
    )
    .map_err(|e| crate::config::ConfigError(format!("config key `medium`: {e}")))?;

    let ensemble = ThermalEnsemble::new(&molecule, temperature, numerics.thermal_tolerance, numerics.j_cap)?;
    let solver = RotorSolver::new(molecule, cfg.pulses()?).with_numerics(numerics);
    let trace = solver.ensemble_alignment(&ensemble, grid, opts.execution)?;
    let index = index_trace(&trace, &medium);

    write_csv(&opts.out.join("alignment.csv"), |w| trace.write_csv(w))?;
    write_csv(&opts.out.join("index.csv"), |w| index.write_csv(w))?;
    let ramp = cfg
        .signal
        .as_ref()
        .filter(|s| grid.contains(units::fs_to_au(s.center_fs)))
        .and_then(|s| find_linear_ramp(&index, units::fs_to_au(s.center_fs), cfg.analysis.ramp_tolerance).ok());
    let record = json!({
        "samples": grid.len,
        "thermal_states": ensemble.states.len(),
        "j_thermal": ensemble.j_thermal,
        "omitted_population": ensemble.omitted_fraction(),
        "baseline_index_minus_1": index.n0 - 1.0,
        "index_swing": index.swing(),
        "max_index_deviation": index.max_deviation(),
        "alignment_min": trace.values.iter().cloned().fold(f64::INFINITY, f64::min),
        "alignment_max": trace.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "ramp_at_signal": ramp.map(|r| r.to_json()),
        "medium_warning": medium.validity_warning(),
        "config_echo": echo(cfg, "align", opts, None),
    });
    write_json(&opts.out.join("align.json"), &record)?;
    Ok(Outcome::Done)
}

fn run(cfg: &RunConfig, opts: &Options) -> Result<(Resolved, alignmem::protocol::Prepared, MemoryResult)> {
    let resolved = cfg.resolve(opts.grid_scale)?;
    let sc = &resolved.scenario;
    let prepared = prepare(sc, opts.execution)?;
    let result = run_prepared(sc, &prepared, sc.atomic_density)?;
    Ok((resolved, prepared, result))
}

fn outcome(result: &MemoryResult) -> Outcome {
    if result.emission_window.is_some() {
        Outcome::Done
    } else {
        Outcome::NoEmission
    }
}

fn memory_record(result: &MemoryResult, resolved: &Resolved, echo: Value) -> Value {
    let mut record = result.to_json(echo);
    if let Some(warnings) = record.get_mut("warnings").and_then(Value::as_array_mut) {
        warnings.extend(resolved.notes.iter().map(|n| Value::String(n.clone())));
    }
    record
}

pub fn memory(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let (resolved, prepared, result) = run(cfg, opts)?;
    let out = &opts.out;
    write_csv(&out.join("alignment.csv"), |w| prepared.alignment.write_csv(w))?;
    write_csv(&out.join("index.csv"), |w| prepared.index.write_csv(w))?;
    write_csv(&out.join("field_in.csv"), |w| result.input.write_csv(w))?;
    write_csv(&out.join("field_out.csv"), |w| result.propagation.field_out.write_csv(w))?;
    write_csv(&out.join("spectrum_in.csv"), |w| spectrum(&result.input).write_csv(w))?;
    write_csv(&out.join("spectrum_out.csv"), |w| spectrum(&result.propagation.field_out).write_csv(w))?;
    result.propagation.write_history(out).context("writing field snapshots")?;
    let record = memory_record(&result, &resolved, echo(cfg, "memory", opts, Some(&resolved)));
    write_json(&out.join("memory.json"), &record)?;
    Ok(outcome(&result))
}

fn band(cfg: &RunConfig) -> (f64, f64) {
    let [a, b] = cfg.spectrum.band_ev;
    (units::ev_to_au(a), units::ev_to_au(b))
}

pub fn spectrum_cmd(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let (resolved, _, result) = run(cfg, opts)?;
    let sc = &resolved.scenario;
    let out = &opts.out;
    let n = cfg.spectrum.padded_points;
    let input = spectrum_padded(&result.input, n);
    let output = spectrum_padded(&result.propagation.field_out, n);
    write_csv(&out.join("spectrum_in.csv"), |w| input.write_csv(w))?;
    write_csv(&out.join("spectrum_out.csv"), |w| output.write_csv(w))?;

    let window = cfg.spectrum.window_durations * sc.signal.duration;
    let tau_map = spectrogram_tau(&result.propagation.field_out, window, band(cfg))?;
    write_csv(&out.join("spectrogram_tau.csv"), |w| tau_map.write_csv(w))?;
    if result.propagation.history.len() >= 2 {
        let slices: Vec<FieldGrid> = result.propagation.history.iter().map(|(_, f)| f.clone()).collect();
        let z: Vec<f64> = result.propagation.history.iter().map(|(z, _)| units::au_to_cm(*z)).collect();
        let z_map = spectrogram_z(&slices, &z, band(cfg))?;
        write_csv(&out.join("spectrogram_z.csv"), |w| z_map.write_csv(w))?;
    }

    let mut fringes = Value::Null;
    let mut echo_centroid = Value::Null;
    if let Ok(record) = storage_record_spectrum(&result, n) {
        write_csv(&out.join("spectrum_record.csv"), |w| record.write_csv(w))?;
        let expected = 2.0 * std::f64::consts::PI / result.storage_time;
        fringes = match fringe_spacing(&record) {
            Ok(s) => json!({
                "spacing_ev": units::au_to_ev(s),
                "expected_ev": units::au_to_ev(expected),
                "spacing_over_expected": s / expected,
            }),
            Err(e) => json!({ "error": e.to_string(), "expected_ev": units::au_to_ev(expected) }),
        };
        if let Some((a, b)) = result.emission_window {
            let mut emitted = result.propagation.field_out.clone();
            for (t, s) in emitted.grid.times().zip(emitted.samples.iter_mut()) {
                if t < a || t > b {
                    *s = 0.0.into();
                }
            }
            echo_centroid = json!(units::au_to_ev(spectrum_padded(&emitted, n).centroid()));
        }
    }
    let record = json!({
        "input_centroid_ev": units::au_to_ev(input.centroid()),
        "output_centroid_ev": units::au_to_ev(output.centroid()),
        "emission_centroid_ev": echo_centroid,
        "fringes": fringes,
        "spectrogram_window_fwhm_fs": units::au_to_fs(window),
        "memory": memory_record(&result, &resolved, Value::Null),
        "config_echo": echo(cfg, "spectrum", opts, Some(&resolved)),
    });
    write_json(&out.join("spectrum.json"), &record)?;
    Ok(outcome(&result))
}

pub fn sweep(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let depths = cfg.optical_depths()?.to_vec();
    let resolved = cfg.resolve(opts.grid_scale)?;
    let points = sweep_optical_depth(&resolved.scenario, &depths, opts.execution)?;
    write_csv(&opts.out.join("sweep.csv"), |w| write_sweep_csv(&points, w))?;
    let rows: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "optical_depth": p.optical_depth,
                "atomic_density_cm3": units::au_to_per_cm3(p.atomic_density),
                "efficiency": p.efficiency,
                "storage_time_fs": units::au_to_fs(p.storage_time),
            })
        })
        .collect();
    let record = json!({
        "depth_mapping": "atomic density scaled at fixed index ramp",
        "points": rows,
        "config_echo": echo(cfg, "sweep", opts, Some(&resolved)),
    });
    write_json(&opts.out.join("sweep.json"), &record)?;
    Ok(Outcome::Done)
}
