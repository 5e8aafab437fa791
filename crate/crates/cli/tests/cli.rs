use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alignmem_cli::config::RunConfig;
use tempfile::TempDir;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn reference(name: &str) -> toml::Table {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    text.parse().unwrap()
}

fn set(table: &mut toml::Table, path: &str, value: toml::Value) {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().unwrap();
    let mut t = table;
    for k in keys {
        t = t.entry(k).or_insert_with(|| toml::Value::Table(toml::Table::new())).as_table_mut().unwrap();
    }
    t.insert(last.to_owned(), value);
}

fn write_config(dir: &Path, table: &toml::Table) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, toml::to_string(table).unwrap()).unwrap();
    p
}

fn alignmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignmem")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    alignmem(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Cheap alignment config: short grid, pump only.
fn short_align(intensity: f64) -> toml::Table {
    let mut t = reference("three_pulse.toml");
    let pulses = t.get_mut("pulses").unwrap().as_array_mut().unwrap();
    pulses.truncate(1);
    pulses[0].as_table_mut().unwrap().insert("intensity_w_cm2".into(), toml::Value::Float(intensity));
    set(&mut t, "alignment.end_fs", toml::Value::Float(2000.0));
    set(&mut t, "alignment.dt_fs", toml::Value::Float(20.0));
    t
}

#[test]
fn reference_configs_resolve() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.molecule().unwrap();
        cfg.pulses().unwrap();
        cfg.alignment_grid(1.0).unwrap();
        if cfg.signal.is_some() {
            let r = cfg.resolve(1.0).unwrap();
            assert!(r.notes.is_empty());
            let coarse = cfg.resolve(2.0).unwrap();
            assert_eq!(coarse.scenario.dt, r.scenario.dt);
            assert!(!coarse.notes.is_empty());
            assert!(coarse.scenario.propagation.n_z_steps <= r.scenario.propagation.n_z_steps);
        }
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let mut t = short_align(5e13);
    set(&mut t, "medium.pressure_atm", toml::Value::Float(1.0));
    let o = run("align", &write_config(dir.path(), &t), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pressure_atm"), "{}", stderr(&o));
}

#[test]
fn invalid_values_name_their_key() {
    let dir = TempDir::new().unwrap();
    let mut t = reference("storage.toml");
    set(&mut t, "signal.duration_fs", toml::Value::Float(-5.0));
    let o = run("memory", &write_config(dir.path(), &t), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("signal.duration_fs"), "{}", stderr(&o));

    let mut t = reference("storage.toml");
    set(&mut t, "window.dt_fs", toml::Value::Float(1.0));
    let o = run("memory", &write_config(dir.path(), &t), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window.dt_fs"));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &short_align(5e13));
    let o = alignmem(&["align", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));
}

#[test]
fn basis_cap_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let mut t = short_align(5e13);
    set(&mut t, "rotor.j_cap", toml::Value::Integer(20));
    let o = run("align", &write_config(dir.path(), &t), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn dark_pump_gives_a_flat_isotropic_trace() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("align", &write_config(dir.path(), &short_align(0.0)), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("alignment.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_fs,cos2_expectation"));
    for l in lines {
        let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-3);
    }
    let rec = json(out.join("align.json"));
    assert!(rec["config_echo"]["config"]["molecule"]["b0_cm"].as_f64() == Some(0.3902));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &short_align(5e13));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("align", &cfg, &a, &[]).status.success());
    assert!(run("align", &cfg, &b, &["--threads", "1"]).status.success());
    for f in ["alignment.csv", "index.csv", "align.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let leftovers: Vec<_> = std::fs::read_dir(&a).unwrap().filter_map(|e| {
        let n = e.unwrap().file_name().to_string_lossy().into_owned();
        n.ends_with(".tmp").then_some(n)
    }).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn three_pulse_config_attenuates_and_regenerates() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("align", &configs_dir().join("three_pulse.toml"), &out, &["--grid-scale", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("alignment.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let var = |a: f64, b: f64| {
        let v: Vec<f64> = rows.iter().filter(|(t, _)| *t >= a && *t <= b).map(|(_, v)| *v).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    };
    let (pre, mid, post) = (var(350.0, 21_400.0), var(21_800.0, 39_950.0), var(40_350.0, 64_000.0));
    assert!(mid < 0.1 * pre && post > 10.0 * mid, "{pre:e} {mid:e} {post:e}");
}

#[test]
fn transparent_medium_reports_no_emission_with_json() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut t = reference("storage.toml");
    set(&mut t, "medium.atomic_density_cm3", toml::Value::Float(0.0));
    set(&mut t, "propagation.convergence_tolerance", toml::Value::Float(0.005));
    let o = run("memory", &write_config(dir.path(), &t), &out, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let rec = json(out.join("memory.json"));
    assert_eq!(rec["efficiency"].as_f64(), Some(0.0));
    assert_eq!(rec["emission_detected"].as_bool(), Some(false));
    assert!(rec["leakage_fraction"].as_f64().unwrap() > 0.5);
    assert!(rec["config_echo"]["atomic_units"]["dt"].as_f64().is_some());
    assert!(out.join("field_out.csv").exists() && out.join("field_z4.csv").exists());
}

#[test]
fn cheap_sweep_is_monotone_and_starts_at_zero() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut t = reference("storage.toml");
    set(
        &mut t,
        "sweep.optical_depths",
        toml::Value::Array(vec![0.0.into(), 2.5.into(), 10.0.into()]),
    );
    let o = run("sweep", &write_config(dir.path(), &t), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("optical_depth,efficiency"));
    let eff: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(eff.len(), 3);
    assert_eq!(eff[0], 0.0);
    assert!(eff[1] > 0.0 && eff[2] > eff[1]);
    assert_eq!(json(out.join("sweep.json"))["points"].as_array().unwrap().len(), 3);
}

#[test]
fn spectrum_command_measures_storage_fringes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("spectrum", &configs_dir().join("storage.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["spectrum_in.csv", "spectrum_out.csv", "spectrum_record.csv", "spectrogram_tau.csv", "spectrogram_z.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rec = json(out.join("spectrum.json"));
    let ratio = rec["fringes"]["spacing_over_expected"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    let tau = rec["memory"]["storage_time_fs"].as_f64().unwrap();
    assert!((240.0..=360.0).contains(&tau));
    assert!((rec["spectrogram_window_fwhm_fs"].as_f64().unwrap() - 200.0).abs() < 1e-9);
}
