//! Driven rigid-rotor dynamics and thermally averaged alignment.
//!
//! Each thermally populated `|J, M>` state is propagated under
//! `B J^2 - U0(t) cos^2(theta)` through every pump or control pulse;
//! field-free stretches use exact rotational phases. The Boltzmann
//! average of the per-state `<cos^2 theta>` traces gives the
//! [`AlignmentTrace`] that drives the refractive index of the medium.

mod operator;
mod propagate;
mod thermal;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::units;

pub use operator::{build_cos2_operator, Cos2Operator};
pub use propagate::{evolve_single, RotorRecord, RotorSolver};
pub use thermal::{thermal_alignment, ThermalEnsemble};

/// Nuclear-spin statistical weight `g_J`, by parity of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinWeights {
    pub even: f64,
    pub odd: f64,
}

impl SpinWeights {
    pub fn weight(&self, j: u32) -> f64 {
        if j % 2 == 0 {
            self.even
        } else {
            self.odd
        }
    }
}

/// Linear molecule, all fields in atomic units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub name: String,
    pub rotational_constant: f64,
    pub alpha_perp: f64,
    pub delta_alpha: f64,
    pub spin_weights: SpinWeights,
}

impl MoleculeSpec {
    pub fn new(
        name: impl Into<String>,
        rotational_constant: f64,
        alpha_perp: f64,
        delta_alpha: f64,
        spin_weights: SpinWeights,
    ) -> Result<Self> {
        if !(rotational_constant > 0.0) || !rotational_constant.is_finite() {
            return Err(Error::invalid("molecule", "rotational constant must be positive"));
        }
        if !(alpha_perp >= 0.0) || !delta_alpha.is_finite() || !alpha_perp.is_finite() {
            return Err(Error::invalid("molecule", "alpha_perp must be non-negative and finite"));
        }
        let SpinWeights { even, odd } = spin_weights;
        if !(even >= 0.0 && odd >= 0.0) || even + odd == 0.0 {
            return Err(Error::invalid("molecule", "spin weights must be non-negative and not all zero"));
        }
        Ok(Self {
            name: name.into(),
            rotational_constant,
            alpha_perp,
            delta_alpha,
            spin_weights,
        })
    }

    /// Constructor taking `B0` in cm^-1 and polarizability volumes in cubic angstrom.
    pub fn from_lab(
        name: impl Into<String>,
        b0_cm: f64,
        alpha_perp_a3: f64,
        delta_alpha_a3: f64,
        spin_weights: SpinWeights,
    ) -> Result<Self> {
        Self::new(
            name,
            units::wavenumber_to_au(b0_cm),
            units::angstrom3_to_au(alpha_perp_a3),
            units::angstrom3_to_au(delta_alpha_a3),
            spin_weights,
        )
    }

    /// CO2 reference molecule: B0 = 0.3902 cm^-1, spin-0 oxygen nuclei
    /// (odd J absent), alpha_perp = 1.97 A^3, delta_alpha = 2.04 A^3.
    pub fn co2() -> Self {
        Self::from_lab("CO2", 0.3902, 1.97, 2.04, SpinWeights { even: 1.0, odd: 0.0 })
            .expect("reference constants are valid")
    }

    /// Rotational energy `B0 J (J + 1)`.
    pub fn energy(&self, j: u32) -> f64 {
        let jf = j as f64;
        self.rotational_constant * jf * (jf + 1.0)
    }

    /// Full rotational revival period `pi / B0` (a.u.).
    pub fn revival_period(&self) -> f64 {
        std::f64::consts::PI / self.rotational_constant
    }
}

/// Non-resonant pump or control pulse.
///
/// The interaction `U0(t) = Delta_alpha E0^2 / 4 * cos^2(pi (t - t_c) / (2 sigma))`
/// is the single half-period of the `sin^2` envelope centred on the peak;
/// it vanishes identically outside `[t_c - sigma, t_c + sigma]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub center_time: f64,
    pub sigma: f64,
    pub field_amplitude: f64,
}

impl PulseSpec {
    pub fn new(center_time: f64, sigma: f64, field_amplitude: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("pulse", "duration must be positive"));
        }
        if !(field_amplitude >= 0.0) || !field_amplitude.is_finite() || !center_time.is_finite() {
            return Err(Error::invalid("pulse", "field amplitude must be non-negative"));
        }
        Ok(Self { center_time, sigma, field_amplitude })
    }

    /// Centre in fs, duration in fs, peak intensity in W/cm^2.
    pub fn from_lab(center_fs: f64, sigma_fs: f64, intensity_w_cm2: f64) -> Result<Self> {
        if !(intensity_w_cm2 >= 0.0) {
            return Err(Error::invalid("pulse", "peak intensity must be non-negative"));
        }
        Self::new(
            units::fs_to_au(center_fs),
            units::fs_to_au(sigma_fs),
            units::intensity_to_field_au(intensity_w_cm2),
        )
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center_time - self.sigma, self.center_time + self.sigma)
    }

    /// Peak interaction strength `Delta_alpha E0^2 / 4`.
    pub fn peak_coupling(&self, delta_alpha: f64) -> f64 {
        0.25 * delta_alpha * self.field_amplitude * self.field_amplitude
    }

    /// `U0(t)` for this pulse alone.
    pub fn coupling(&self, t: f64, delta_alpha: f64) -> f64 {
        let x = (t - self.center_time) / self.sigma;
        if x.abs() > 1.0 {
            return 0.0;
        }
        let c = (0.5 * std::f64::consts::PI * x).cos();
        self.peak_coupling(delta_alpha) * c * c
    }
}

/// Controls for the rotor integrator and basis truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorNumerics {
    /// RK4 step is `step_scale / rate`, where `rate` bounds the
    /// interaction-picture generator.
    pub step_scale: f64,
    /// Basis grows while the top two retained shells hold more than this.
    pub shell_tolerance: f64,
    pub j_margin: u32,
    pub j_increment: u32,
    pub j_cap: u32,
    /// Omitted Boltzmann population allowed by the thermal truncation.
    pub thermal_tolerance: f64,
}

impl Default for RotorNumerics {
    fn default() -> Self {
        Self {
            step_scale: 0.01,
            shell_tolerance: 1e-10,
            j_margin: 20,
            j_increment: 10,
            j_cap: 400,
            thermal_tolerance: 1e-4,
        }
    }
}

/// Thermally averaged `<cos^2 theta>_T` on a uniform grid (a.u. times).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub temperature: f64,
}

impl AlignmentTrace {
    /// Constant trace, e.g. the isotropic value 1/3.
    pub fn constant(grid: TimeGrid, value: f64, temperature: f64) -> Self {
        Self { grid, values: vec![value; grid.len], temperature }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_fs,cos2_expectation")?;
        for (t, v) in self.grid.times().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e}", units::au_to_fs(t), v)?;
        }
        Ok(())
    }
}
