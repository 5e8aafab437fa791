//! Refractive index of the aligned host gas, linear-ramp extraction and
//! the optical depth of the broadened atomic ensemble.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rotor::{AlignmentTrace, MoleculeSpec};
use crate::units::{self, C_AU};

/// Two-level absorber. Angular frequency and dipole in atomic units;
/// `t1`/`t2` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub transition_omega: f64,
    pub dipole: f64,
    #[serde(with = "infinite_as_null")]
    pub t1: f64,
    #[serde(with = "infinite_as_null")]
    pub t2: f64,
}

impl AtomSpec {
    pub fn new(transition_omega: f64, dipole: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(transition_omega > 0.0) || !transition_omega.is_finite() {
            return Err(Error::invalid("atom", "transition frequency must be positive"));
        }
        if !(dipole > 0.0) || !dipole.is_finite() {
            return Err(Error::invalid("atom", "dipole must be real and positive"));
        }
        if !(t1 > 0.0) || !(t2 > 0.0) {
            return Err(Error::invalid("atom", "relaxation times must be positive (or infinite)"));
        }
        Ok(Self { transition_omega, dipole, t1, t2 })
    }

    /// 87Rb D1 line (795 nm, 2.99 e a0) without relaxation.
    pub fn rb87_d1() -> Self {
        Self::new(units::wavelength_nm_to_au(795.0), 2.99, f64::INFINITY, f64::INFINITY)
            .expect("reference constants are valid")
    }
}

/// Mixed molecular/atomic propagation medium. Densities in bohr^-3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub molecule: MoleculeSpec,
    pub molecular_density: f64,
    pub atomic_density: f64,
    pub atom: AtomSpec,
}

impl MediumSpec {
    pub fn new(molecule: MoleculeSpec, molecular_density: f64, atomic_density: f64, atom: AtomSpec) -> Result<Self> {
        if !(molecular_density >= 0.0) || !(atomic_density >= 0.0) {
            return Err(Error::invalid("medium", "densities must be non-negative"));
        }
        Ok(Self { molecule, molecular_density, atomic_density, atom })
    }

    /// `2 pi N_m (alpha_perp + delta_alpha)`, the dimensionless scale of the
    /// molecular susceptibility. The index model assumes it is small.
    pub fn susceptibility_scale(&self) -> f64 {
        2.0 * std::f64::consts::PI
            * self.molecular_density
            * (self.molecule.alpha_perp + self.molecule.delta_alpha)
    }

    /// Warning text when the dilute-gas index model is being stretched.
    pub fn validity_warning(&self) -> Option<String> {
        let s = self.susceptibility_scale();
        (s > 0.1).then(|| format!("molecular susceptibility scale {s:.3} exceeds 0.1; linear index model is unreliable"))
    }

    pub fn index_at(&self, alignment: f64) -> f64 {
        let m = &self.molecule;
        1.0 + 2.0 * std::f64::consts::PI * self.molecular_density * (m.alpha_perp + m.delta_alpha * alignment)
    }

    /// Index of the randomly aligned gas.
    pub fn baseline_index(&self) -> f64 {
        self.index_at(1.0 / 3.0)
    }
}

/// Refractive index on the moving-frame grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexTrace {
    pub grid: TimeGrid,
    pub n_values: Vec<f64>,
    pub n0: f64,
    /// Pump-frame velocity `c / n0` (a.u.).
    pub frame_velocity: f64,
}

impl IndexTrace {
    /// Constant index equal to the baseline: molecules present but not aligned.
    pub fn uniform(grid: TimeGrid, n0: f64) -> Self {
        Self { grid, n_values: vec![n0; grid.len], n0, frame_velocity: C_AU / n0 }
    }

    /// Max minus min of the trace.
    pub fn swing(&self) -> f64 {
        let (lo, hi) = self
            .n_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    pub fn max_deviation(&self) -> f64 {
        self.n_values.iter().map(|n| (n - self.n0).abs()).fold(0.0, f64::max)
    }

    /// Linear interpolation at `t`, clamped to the trace ends.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = ((t - self.grid.t0) / self.grid.dt).clamp(0.0, (self.grid.len - 1) as f64);
        let k = (x.floor() as usize).min(self.grid.len.saturating_sub(2));
        if self.grid.len < 2 {
            return self.n_values[0];
        }
        let f = x - k as f64;
        self.n_values[k] * (1.0 - f) + self.n_values[k + 1] * f
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_fs,n_minus_1")?;
        for (t, n) in self.grid.times().zip(&self.n_values) {
            writeln!(w, "{:.16e},{:.16e}", units::au_to_fs(t), n - 1.0)?;
        }
        Ok(())
    }
}

/// `n(tau) = 1 + 2 pi N_m [alpha_perp + delta_alpha <cos^2>_T(tau)]`.
pub fn index_trace(alignment: &AlignmentTrace, medium: &MediumSpec) -> IndexTrace {
    let n_values = alignment.values.iter().map(|&a| medium.index_at(a)).collect();
    let n0 = medium.baseline_index();
    IndexTrace { grid: alignment.grid, n_values, n0, frame_velocity: C_AU / n0 }
}

/// Least-squares line through a window of the index trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// dn/dtau per atomic unit of time.
    pub slope: f64,
    pub intercept_at_center: f64,
    /// RMS deviation of the trace from the fitted line over the window.
    pub residual: f64,
}

impl RampSegment {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t_start_fs": units::au_to_fs(self.t_start),
            "t_end_fs": units::au_to_fs(self.t_end),
            "slope_per_fs": self.slope / units::AU_TIME_FS,
            "residual": self.residual,
        })
    }
}

fn fit_samples(index: &IndexTrace, lo: usize, hi: usize) -> RampSegment {
    let g = index.grid;
    let n = (hi - lo + 1) as f64;
    let tc = 0.5 * (g.time(lo) + g.time(hi));
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in lo..=hi {
        let x = g.time(k) - tc;
        let y = index.n_values[k];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = (lo..=hi)
        .map(|k| {
            let r = index.n_values[k] - (intercept + slope * (g.time(k) - tc));
            r * r
        })
        .sum();
    RampSegment {
        t_start: g.time(lo),
        t_end: g.time(hi),
        slope,
        intercept_at_center: intercept,
        residual: (ss / n).sqrt(),
    }
}

/// Fit a line to the samples inside `[t_start, t_end]`.
pub fn extract_ramp(index: &IndexTrace, window: (f64, f64)) -> Result<RampSegment> {
    let g = index.grid;
    let (a, b) = window;
    if !(b > a) || a < g.t0 - 1e-9 * g.dt || b > g.end() + 1e-9 * g.dt {
        return Err(Error::invalid("ramp window", "window must be increasing and inside the trace"));
    }
    let lo = ((a - g.t0) / g.dt - 1e-9).ceil().max(0.0) as usize;
    let hi = (((b - g.t0) / g.dt + 1e-9).floor() as usize).min(g.len - 1);
    if hi < lo + 2 {
        return Err(Error::invalid("ramp window", "window holds fewer than 3 samples"));
    }
    Ok(fit_samples(index, lo, hi))
}

/// Largest window around `center` whose RMS deviation from a straight
/// line stays below `rel_tolerance` times the total index swing.
///
/// The window grows one sample at a time on whichever side keeps the
/// residual smaller.
pub fn find_linear_ramp(index: &IndexTrace, center: f64, rel_tolerance: f64) -> Result<RampSegment> {
    let g = index.grid;
    if !g.contains(center) || g.len < 3 {
        return Err(Error::invalid("ramp search", "centre must lie inside a trace of at least 3 samples"));
    }
    let limit = rel_tolerance * index.swing();
    let c = g.nearest(center).clamp(1, g.len - 2);
    let (mut lo, mut hi) = (c - 1, c + 1);
    let mut best = fit_samples(index, lo, hi);
    loop {
        let left = (lo > 0).then(|| fit_samples(index, lo - 1, hi));
        let right = (hi + 1 < g.len).then(|| fit_samples(index, lo, hi + 1));
        let pick = match (left, right) {
            (Some(l), Some(r)) => {
                if l.residual <= r.residual {
                    Some((l, true))
                } else {
                    Some((r, false))
                }
            }
            (Some(l), None) => Some((l, true)),
            (None, Some(r)) => Some((r, false)),
            (None, None) => None,
        };
        match pick {
            Some((seg, is_left)) if seg.residual < limit => {
                if is_left {
                    lo -= 1;
                } else {
                    hi += 1;
                }
                best = seg;
            }
            _ => break,
        }
    }
    Ok(best)
}

/// Sign of an index ramp: falling index blue-shifts the signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampDirection {
    Rising,
    Falling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalDepth {
    pub depth: f64,
    pub direction: RampDirection,
}

/// `d = (2 pi N_a mu^2 / omega0) (n0 / |dn/dtau|)`.
pub fn optical_depth(medium: &MediumSpec, ramp: &RampSegment, omega0: f64, dipole: f64) -> Result<OpticalDepth> {
    if ramp.slope == 0.0 || !ramp.slope.is_finite() {
        return Err(Error::invalid("optical depth", "ramp slope is zero; there is no broadening"));
    }
    if !(omega0 > 0.0) {
        return Err(Error::invalid("optical depth", "carrier frequency must be positive"));
    }
    let n0 = medium.baseline_index();
    let depth = 2.0 * std::f64::consts::PI * medium.atomic_density * dipole * dipole / omega0 * n0 / ramp.slope.abs();
    let direction = if ramp.slope > 0.0 { RampDirection::Rising } else { RampDirection::Falling };
    Ok(OpticalDepth { depth, direction })
}

/// Atomic density that realizes optical depth `depth` on `ramp`; inverse of [`optical_depth`].
pub fn density_for_depth(medium: &MediumSpec, ramp: &RampSegment, omega0: f64, dipole: f64, depth: f64) -> f64 {
    depth * omega0 * ramp.slope.abs() / (2.0 * std::f64::consts::PI * dipole * dipole * medium.baseline_index())
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_medium() -> MediumSpec {
        MediumSpec::new(
            MoleculeSpec::co2(),
            units::per_cm3_to_au(1e21),
            units::per_cm3_to_au(1.35e16),
            AtomSpec::rb87_d1(),
        )
        .unwrap()
    }

    fn synthetic(grid: TimeGrid, f: impl Fn(f64) -> f64, n0: f64) -> IndexTrace {
        IndexTrace { grid, n_values: grid.times().map(f).collect(), n0, frame_velocity: C_AU / n0 }
    }

    #[test]
    fn isotropic_baseline_index() {
        // 1 + 2 pi N_m (alpha_perp + delta_alpha / 3) with the CO2 constants
        let m = reference_medium();
        assert!((m.baseline_index() - 1.016_65).abs() < 2e-5, "{}", m.baseline_index());
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let idx = index_trace(&AlignmentTrace::constant(grid, 1.0 / 3.0, 295.0), &m);
        assert!(idx.n_values.iter().all(|&n| n == idx.n0));
        assert_eq!(idx.frame_velocity * idx.n0, C_AU);
    }

    #[test]
    fn anti_aligned_and_vacuum_limits() {
        let m = reference_medium();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let idx = index_trace(&AlignmentTrace::constant(grid, 0.0, 295.0), &m);
        let expect = 1.0 + 2.0 * std::f64::consts::PI * m.molecular_density * m.molecule.alpha_perp;
        assert!(idx.n_values.iter().all(|&n| n == expect));

        let vac = MediumSpec { molecular_density: 0.0, ..m };
        let idx = index_trace(&AlignmentTrace::constant(grid, 0.7, 295.0), &vac);
        assert!(idx.n_values.iter().all(|&n| n == 1.0));
        assert_eq!(idx.frame_velocity, C_AU);
    }

    #[test]
    fn linear_ramp_is_recovered_exactly() {
        let grid = TimeGrid::new(-50.0, 1.0, 101).unwrap();
        let idx = synthetic(grid, |t| 1.01 + 3e-6 * t, 1.01);
        let r = extract_ramp(&idx, (-20.0, 30.0)).unwrap();
        assert!((r.slope / 3e-6 - 1.0).abs() < 1e-10);
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn quadratic_has_zero_slope_on_symmetric_window() {
        let grid = TimeGrid::new(-50.0, 1.0, 101).unwrap();
        let idx = synthetic(grid, |t| 1.01 + 2e-7 * t * t, 1.01);
        let r = extract_ramp(&idx, (-25.0, 25.0)).unwrap();
        assert!(r.slope.abs() < 1e-16);
        assert!(r.residual > 0.0);
    }

    #[test]
    fn ramp_window_errors() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let idx = synthetic(grid, |t| t, 1.0);
        assert!(extract_ramp(&idx, (2.0, 3.0)).is_err());
        assert!(extract_ramp(&idx, (5.0, 4.0)).is_err());
        assert!(extract_ramp(&idx, (-1.0, 4.0)).is_err());
    }

    #[test]
    fn linear_search_stops_at_the_kink() {
        let grid = TimeGrid::new(0.0, 1.0, 201).unwrap();
        // falls until 120 then flat
        let idx = synthetic(grid, |t| 1.0 - 1e-4 * t.min(120.0), 1.0);
        let r = find_linear_ramp(&idx, 60.0, 0.02).unwrap();
        assert!(r.slope < 0.0);
        assert!(r.t_end <= 135.0 && r.t_end >= 118.0, "{}", r.t_end);
    }

    #[test]
    fn optical_depth_scaling() {
        let m = reference_medium();
        let ramp = RampSegment { t_start: 0.0, t_end: 1.0, slope: -2e-7, intercept_at_center: 1.0, residual: 0.0 };
        let w0 = units::ev_to_au(1.4);
        let d = optical_depth(&m, &ramp, w0, 2.99).unwrap();
        assert_eq!(d.direction, RampDirection::Falling);
        let m2 = MediumSpec { atomic_density: 2.0 * m.atomic_density, ..m.clone() };
        let d2 = optical_depth(&m2, &ramp, w0, 2.99).unwrap();
        assert!((d2.depth / d.depth - 2.0).abs() < 1e-12);
        let steep = RampSegment { slope: 2.0 * ramp.slope, ..ramp };
        let d3 = optical_depth(&m, &steep, w0, 2.99).unwrap();
        assert!((d3.depth / d.depth - 0.5).abs() < 1e-12);
        let back = density_for_depth(&m, &ramp, w0, 2.99, d.depth);
        assert!((back / m.atomic_density - 1.0).abs() < 1e-12);
        let flat = RampSegment { slope: 0.0, ..ramp };
        assert!(optical_depth(&m, &flat, w0, 2.99).is_err());
    }

    #[test]
    fn dense_gas_warns() {
        let m = reference_medium();
        assert!(m.validity_warning().is_none());
        let dense = MediumSpec { molecular_density: 1e-2, ..m };
        assert!(dense.validity_warning().is_some());
    }
}
