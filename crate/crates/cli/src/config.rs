//! TOML run configuration in lab units.
//!
//! Every unit-bearing key carries its unit as a suffix (`_fs`, `_cm`,
//! `_cm3`, `_a3`, `_ev`, `_nm`, `_w_cm2`, `_k`, `_ea0`). Unknown keys are
//! rejected. [`RunConfig::resolve`] fills in defaults and converts to the
//! atomic-unit [`ScenarioConfig`] used by the library.

use std::path::{Path, PathBuf};

use alignmem::field::SignalSpec;
use alignmem::maxwell_bloch::PropagationConfig;
use alignmem::medium::AtomSpec;
use alignmem::protocol::{AnalysisPolicy, ScenarioConfig};
use alignmem::rotor::{MoleculeSpec, PulseSpec, RotorNumerics, SpinWeights};
use alignmem::{units, TimeGrid};
use serde::{Deserialize, Serialize};

/// Invalid configuration; mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("config key `{key}`: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be non-negative and finite, got {v}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    pub name: String,
    pub b0_cm: f64,
    pub alpha_perp_a3: f64,
    pub delta_alpha_a3: f64,
    pub spin_weight_even: f64,
    pub spin_weight_odd: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub temperature_k: f64,
    pub molecular_density_cm3: f64,
    pub atomic_density_cm3: f64,
    pub length_cm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub transition_nm: Option<f64>,
    pub transition_ev: Option<f64>,
    pub dipole_ea0: f64,
    /// Absent means no relaxation.
    pub t1_fs: Option<f64>,
    pub t2_fs: Option<f64>,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self { transition_nm: Some(795.0), transition_ev: None, dipole_ea0: 2.99, t1_fs: None, t2_fs: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub center_fs: f64,
    pub sigma_fs: f64,
    pub intensity_w_cm2: f64,
}

fn default_rabi_fraction() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub center_fs: f64,
    pub duration_fs: f64,
    pub carrier_ev: Option<f64>,
    pub carrier_nm: Option<f64>,
    /// Peak Rabi frequency `mu E0` as a fraction of the transition frequency.
    #[serde(default = "default_rabi_fraction")]
    pub rabi_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub start_fs: f64,
    pub end_fs: f64,
    /// Defaults to 1/20 of the shorter of the carrier and transition periods.
    pub dt_fs: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentSection {
    pub start_fs: f64,
    pub end_fs: f64,
    pub dt_fs: f64,
}

impl Default for AlignmentSection {
    fn default() -> Self {
        Self { start_fs: 0.0, end_fs: 45_000.0, dt_fs: 10.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub z_steps: usize,
    /// Field snapshot every this many z steps; 0 writes none.
    pub snapshot_every: usize,
    pub guard_fraction: f64,
    pub physicality_slack: f64,
    /// Relative exit-energy tolerance for the doubled-z-step rerun.
    pub convergence_tolerance: Option<f64>,
}

impl Default for PropagationSection {
    fn default() -> Self {
        Self { z_steps: 4, snapshot_every: 1, guard_fraction: 0.25, physicality_slack: 1e-9, convergence_tolerance: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub edge_fraction: f64,
    pub floor_fraction: f64,
    pub exclusion_durations: f64,
    pub ramp_tolerance: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let p = AnalysisPolicy::default();
        Self {
            edge_fraction: p.edge_fraction,
            floor_fraction: p.floor_fraction,
            exclusion_durations: p.exclusion_durations,
            ramp_tolerance: p.ramp_tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorSection {
    pub step_scale: f64,
    pub shell_tolerance: f64,
    pub j_margin: u32,
    pub j_increment: u32,
    pub j_cap: u32,
    pub thermal_tolerance: f64,
}

impl Default for RotorSection {
    fn default() -> Self {
        let r = RotorNumerics::default();
        Self {
            step_scale: r.step_scale,
            shell_tolerance: r.shell_tolerance,
            j_margin: r.j_margin,
            j_increment: r.j_increment,
            j_cap: r.j_cap,
            thermal_tolerance: r.thermal_tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub band_ev: [f64; 2],
    /// Short-time window FWHM in units of the signal duration.
    pub window_durations: f64,
    pub padded_points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { band_ev: [1.0, 2.0], window_durations: 4.0, padded_points: 1 << 16 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub optical_depths: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub molecule: MoleculeSection,
    pub medium: MediumSection,
    #[serde(default)]
    pub atom: AtomSection,
    #[serde(default)]
    pub pulses: Vec<PulseSection>,
    pub signal: Option<SignalSection>,
    pub window: Option<WindowSection>,
    #[serde(default)]
    pub alignment: AlignmentSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub rotor: RotorSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn molecule(&self) -> Result<MoleculeSpec> {
        let m = &self.molecule;
        positive("molecule.b0_cm", m.b0_cm)?;
        non_negative("molecule.alpha_perp_a3", m.alpha_perp_a3)?;
        non_negative("molecule.spin_weight_even", m.spin_weight_even)?;
        non_negative("molecule.spin_weight_odd", m.spin_weight_odd)?;
        MoleculeSpec::from_lab(
            m.name.clone(),
            m.b0_cm,
            m.alpha_perp_a3,
            m.delta_alpha_a3,
            SpinWeights { even: m.spin_weight_even, odd: m.spin_weight_odd },
        )
        .map_err(|e| bad("molecule", e))
    }

    pub fn atom(&self) -> Result<AtomSpec> {
        let a = &self.atom;
        let omega = match (a.transition_nm, a.transition_ev) {
            (Some(nm), None) => units::wavelength_nm_to_au(positive("atom.transition_nm", nm)?),
            (None, Some(ev)) => units::ev_to_au(positive("atom.transition_ev", ev)?),
            _ => return Err(bad("atom", "give exactly one of transition_nm or transition_ev")),
        };
        let lifetime = |key: &str, v: Option<f64>| -> Result<f64> {
            v.map_or(Ok(f64::INFINITY), |fs| positive(key, fs).map(units::fs_to_au))
        };
        AtomSpec::new(
            omega,
            positive("atom.dipole_ea0", a.dipole_ea0)?,
            lifetime("atom.t1_fs", a.t1_fs)?,
            lifetime("atom.t2_fs", a.t2_fs)?,
        )
        .map_err(|e| bad("atom", e))
    }

    pub fn pulses(&self) -> Result<Vec<PulseSpec>> {
        self.pulses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                positive(&format!("pulses[{i}].sigma_fs"), p.sigma_fs)?;
                non_negative(&format!("pulses[{i}].intensity_w_cm2"), p.intensity_w_cm2)?;
                PulseSpec::from_lab(p.center_fs, p.sigma_fs, p.intensity_w_cm2).map_err(|e| bad("pulses", e))
            })
            .collect()
    }

    pub fn rotor_numerics(&self) -> Result<RotorNumerics> {
        let r = &self.rotor;
        positive("rotor.step_scale", r.step_scale)?;
        positive("rotor.shell_tolerance", r.shell_tolerance)?;
        positive("rotor.thermal_tolerance", r.thermal_tolerance)?;
        if r.j_increment == 0 {
            return Err(bad("rotor.j_increment", "must be at least 1"));
        }
        Ok(RotorNumerics {
            step_scale: r.step_scale,
            shell_tolerance: r.shell_tolerance,
            j_margin: r.j_margin,
            j_increment: r.j_increment,
            j_cap: r.j_cap,
            thermal_tolerance: r.thermal_tolerance,
        })
    }

    pub fn temperature(&self) -> Result<f64> {
        positive("medium.temperature_k", self.medium.temperature_k)
    }

    /// Sampling grid for the `align` command, coarsened by `grid_scale`.
    pub fn alignment_grid(&self, grid_scale: f64) -> Result<TimeGrid> {
        let a = &self.alignment;
        let dt = positive("alignment.dt_fs", a.dt_fs)? * grid_scale;
        if !(a.end_fs > a.start_fs) {
            return Err(bad("alignment.end_fs", "must exceed alignment.start_fs"));
        }
        TimeGrid::spanning(units::fs_to_au(a.start_fs), units::fs_to_au(a.end_fs), units::fs_to_au(dt))
            .map_err(|e| bad("alignment", e))
    }

    /// Full scenario in atomic units. `grid_scale` multiplies the tau step
    /// (capped at the carrier-resolution limit) and divides the z steps.
    pub fn resolve(&self, grid_scale: f64) -> Result<Resolved> {
        positive("--grid-scale", grid_scale)?;
        let atom = self.atom()?;
        let s = self.signal.as_ref().ok_or_else(|| bad("signal", "section is required for this command"))?;
        let w = self.window.as_ref().ok_or_else(|| bad("window", "section is required for this command"))?;

        let carrier = match (s.carrier_ev, s.carrier_nm) {
            (Some(ev), None) => units::ev_to_au(positive("signal.carrier_ev", ev)?),
            (None, Some(nm)) => units::wavelength_nm_to_au(positive("signal.carrier_nm", nm)?),
            _ => return Err(bad("signal", "give exactly one of carrier_ev or carrier_nm")),
        };
        let rabi = positive("signal.rabi_fraction", s.rabi_fraction)?;
        if rabi > 1e-3 {
            return Err(bad("signal.rabi_fraction", "must not exceed 1e-3 (linear regime)"));
        }
        let signal = SignalSpec::new(
            rabi * atom.transition_omega / atom.dipole,
            units::fs_to_au(positive("signal.duration_fs", s.duration_fs)?),
            units::fs_to_au(s.center_fs),
            carrier,
        )
        .map_err(|e| bad("signal", e))?;

        let limit = 2.0 * std::f64::consts::PI / carrier.max(atom.transition_omega) / 20.0;
        let requested = match w.dt_fs {
            Some(dt) => units::fs_to_au(positive("window.dt_fs", dt)?),
            None => limit,
        };
        if requested > limit * (1.0 + 1e-12) {
            return Err(bad(
                "window.dt_fs",
                format!("must be at most {:.5} fs to resolve the carrier and the transition", units::au_to_fs(limit)),
            ));
        }
        let mut notes = Vec::new();
        let scaled = requested * grid_scale;
        let dt = if scaled > limit {
            notes.push(format!(
                "grid scale {grid_scale} would exceed the carrier-resolution limit; tau step held at {:.5} fs",
                units::au_to_fs(limit)
            ));
            limit
        } else {
            scaled
        };

        let p = &self.propagation;
        if p.z_steps == 0 {
            return Err(bad("propagation.z_steps", "must be at least 1"));
        }
        let z_steps = ((p.z_steps as f64 / grid_scale).ceil() as usize).max(1);
        let mut propagation =
            PropagationConfig::new(units::cm_to_au(positive("medium.length_cm", self.medium.length_cm)?), z_steps)
                .map_err(|e| bad("medium.length_cm", e))?;
        propagation.store_every = p.snapshot_every;
        propagation.guard_fraction = p.guard_fraction;
        propagation.physicality_slack = non_negative("propagation.physicality_slack", p.physicality_slack)?;
        propagation.convergence_tolerance = p
            .convergence_tolerance
            .map(|t| positive("propagation.convergence_tolerance", t))
            .transpose()?;
        propagation.validate().map_err(|e| bad("propagation.guard_fraction", e))?;

        let a = &self.analysis;
        let analysis = AnalysisPolicy {
            edge_fraction: positive("analysis.edge_fraction", a.edge_fraction)?,
            floor_fraction: positive("analysis.floor_fraction", a.floor_fraction)?,
            exclusion_durations: non_negative("analysis.exclusion_durations", a.exclusion_durations)?,
            ramp_tolerance: positive("analysis.ramp_tolerance", a.ramp_tolerance)?,
        };

        let scenario = ScenarioConfig {
            molecule: self.molecule()?,
            temperature: self.temperature()?,
            pulses: self.pulses()?,
            rotor: self.rotor_numerics()?,
            molecular_density: units::per_cm3_to_au(non_negative(
                "medium.molecular_density_cm3",
                self.medium.molecular_density_cm3,
            )?),
            atomic_density: units::per_cm3_to_au(non_negative(
                "medium.atomic_density_cm3",
                self.medium.atomic_density_cm3,
            )?),
            atom,
            signal,
            window: (units::fs_to_au(w.start_fs), units::fs_to_au(w.end_fs)),
            dt,
            propagation,
            analysis,
        };
        scenario.validate().map_err(|e| bad("window", e))?;

        let band = self.spectrum.band_ev;
        if !(band[1] > band[0] && band[0] >= 0.0) {
            return Err(bad("spectrum.band_ev", "must be an increasing pair of non-negative energies"));
        }
        positive("spectrum.window_durations", self.spectrum.window_durations)?;
        Ok(Resolved { scenario, notes })
    }

    /// Depth list for `sweep`.
    pub fn optical_depths(&self) -> Result<&[f64]> {
        let d = &self.sweep.optical_depths;
        if d.is_empty() {
            return Err(bad("sweep.optical_depths", "list at least one depth"));
        }
        for (i, &v) in d.iter().enumerate() {
            non_negative(&format!("sweep.optical_depths[{i}]"), v)?;
        }
        Ok(d)
    }
}

/// Scenario in atomic units plus notes about adjustments made while resolving.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub scenario: ScenarioConfig,
    pub notes: Vec<String>,
}
