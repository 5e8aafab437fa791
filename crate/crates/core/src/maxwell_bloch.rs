//! Two-level Bloch dynamics driven by the propagating signal and the
//! forward field march through the aligned gas in the pump's frame.
//!
//! Sign convention: `rho_d` is the ground minus excited population and
//! rests at `+1`. The coherence obeys
//!
//! ```text
//! d rho_ba / dtau = -(i w_ba + 1/T2) rho_ba + i mu E rho_d
//! d rho_d  / dtau = (1 - rho_d)/T1 + 2 i mu (E* rho_ba - E rho_ab)
//! ```
//!
//! which absorbs from a ground-state ensemble when the atomic polarization
//! is `N_a mu rho_ba`. In the pump frame the field obeys
//!
//! ```text
//! dE/dz = -(1/c) d/dtau[(n(tau) - n0) E] - (2 pi / c) N_a mu d rho_ba / dtau
//! ```

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{energy, FieldGrid};
use crate::grid::TimeGrid;
use crate::medium::{AtomSpec, IndexTrace, MediumSpec};
use crate::units::{self, C_AU};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coherence and population difference on the tau grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub rho_ba: Vec<Complex64>,
    pub rho_d: Vec<f64>,
}

impl AtomState {
    /// Largest excess of `|rho_ba|^2` over `(1 - rho_d^2)/4`, and of `|rho_d|` over 1.
    pub fn max_violation(&self) -> f64 {
        self.rho_ba
            .iter()
            .zip(&self.rho_d)
            .map(|(c, &d)| (c.norm_sqr() - 0.25 * (1.0 - d * d)).max(d.abs() - 1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_physical(&self, slack: f64) -> Result<()> {
        for (index, (c, &d)) in self.rho_ba.iter().zip(&self.rho_d).enumerate() {
            if c.norm_sqr() > 0.25 * (1.0 - d * d) + slack || d.abs() > 1.0 + slack || !d.is_finite() {
                return Err(Error::Unphysical { index, coherence_sq: c.norm_sqr(), rho_d: d });
            }
        }
        Ok(())
    }

    /// Largest excited-state population `(1 - rho_d)/2`.
    pub fn max_excitation(&self) -> f64 {
        self.rho_d.iter().map(|d| 0.5 * (1.0 - d)).fold(0.0, f64::max)
    }
}

/// Midpoint values of the slowly varying rotating-frame drive, by
/// four-point cubic interpolation (two-point at the ends).
fn midpoints(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    (0..n.saturating_sub(1))
        .map(|k| {
            if k == 0 || k + 2 >= n {
                0.5 * (f[k] + f[k + 1])
            } else {
                (9.0 * (f[k] + f[k + 1]) - f[k - 1] - f[k + 2]) / 16.0
            }
        })
        .collect()
}

/// Integrates from the ground state at the first sample. Each step is an
/// exact Bloch-vector rotation under the midpoint drive, with relaxation
/// split symmetrically around it.
fn bloch_sweep(samples: &[Complex64], grid: TimeGrid, atom: &AtomSpec) -> AtomState {
    let n = samples.len();
    let w = atom.transition_omega;
    let mu = atom.dipole;
    let h = grid.dt;
    // rotating-frame drive F = E exp(i w tau)
    let drive: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(k, e)| e * Complex64::from_polar(1.0, w * grid.time(k)))
        .collect();
    let mid = midpoints(&drive);
    let dec2 = (-0.5 * h / atom.t2).exp();
    let dec1 = (-0.5 * h / atom.t1).exp();

    let mut rho_ba = Vec::with_capacity(n);
    let mut rho_d = Vec::with_capacity(n);
    // Bloch vector (Re sigma, Im sigma, rho_d / 2)
    let (mut x, mut y, mut z) = (0.0f64, 0.0f64, 0.5f64);
    rho_ba.push(ZERO);
    rho_d.push(1.0);
    for (k, f) in mid.iter().enumerate() {
        x *= dec2;
        y *= dec2;
        z = 0.5 + (z - 0.5) * dec1;

        let (ox, oy) = (-2.0 * mu * f.re, -2.0 * mu * f.im);
        let om = ox.hypot(oy);
        let theta = om * h;
        if theta > 0.0 {
            let (kx, ky) = (ox / om, oy / om);
            let (s, c) = theta.sin_cos();
            let dot = kx * x + ky * y;
            // k x v with k = (kx, ky, 0)
            let (cx, cy, cz) = (ky * z, -kx * z, kx * y - ky * x);
            let g = dot * (1.0 - c);
            let nx = x * c + cx * s + kx * g;
            let ny = y * c + cy * s + ky * g;
            let nz = z * c + cz * s;
            x = nx;
            y = ny;
            z = nz;
        }

        x *= dec2;
        y *= dec2;
        z = 0.5 + (z - 0.5) * dec1;

        let tau = grid.time(k + 1);
        rho_ba.push(Complex64::new(x, y) * Complex64::from_polar(1.0, -w * tau));
        rho_d.push(2.0 * z);
    }
    AtomState { rho_ba, rho_d }
}

/// Coherence rate from the equations of motion at each sample.
fn coherence_rate(state: &AtomState, samples: &[Complex64], atom: &AtomSpec) -> Vec<Complex64> {
    let decay = Complex64::new(1.0 / atom.t2, atom.transition_omega);
    let i_mu = Complex64::new(0.0, atom.dipole);
    state
        .rho_ba
        .iter()
        .zip(&state.rho_d)
        .zip(samples)
        .map(|((r, &d), e)| -decay * r + i_mu * e * d)
        .collect()
}

/// Atomic response to `field` starting from the ground state.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochSolution {
    pub state: AtomState,
    /// `N_a mu rho_ba(tau)`.
    pub polarization: Vec<Complex64>,
}

pub fn integrate_bloch(field: &FieldGrid, atom: &AtomSpec, atomic_density: f64) -> Result<BlochSolution> {
    check_atom_grid(field.grid, atom)?;
    let state = bloch_sweep(&field.samples, field.grid, atom);
    state.check_physical(1e-9)?;
    let polarization = state.rho_ba.iter().map(|r| r * (atomic_density * atom.dipole)).collect();
    Ok(BlochSolution { state, polarization })
}

fn check_atom_grid(grid: TimeGrid, atom: &AtomSpec) -> Result<()> {
    let limit = crate::field::carrier_max_dt(atom.transition_omega);
    if grid.dt > limit * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "field grid",
            format!(
                "dt = {:.4} fs does not resolve the atomic transition (need <= {:.4} fs)",
                units::au_to_fs(grid.dt),
                units::au_to_fs(limit)
            ),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Medium length (bohr).
    pub length: f64,
    pub n_z_steps: usize,
    /// Keep a snapshot every this many z steps (0 keeps none). Entry and
    /// exit planes are always kept when snapshots are on.
    pub store_every: usize,
    /// Allowed excess in the density-matrix positivity bound.
    pub physicality_slack: f64,
    /// Each side of the tau window is padded by this fraction of its length.
    pub guard_fraction: f64,
    /// When set, the march is repeated with twice the z steps and the exit
    /// energies must agree to this relative tolerance.
    pub convergence_tolerance: Option<f64>,
}

impl PropagationConfig {
    pub fn new(length: f64, n_z_steps: usize) -> Result<Self> {
        let c = Self {
            length,
            n_z_steps,
            store_every: 0,
            physicality_slack: 1e-9,
            guard_fraction: 0.25,
            convergence_tolerance: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::invalid("propagation", "length must be positive"));
        }
        if self.n_z_steps == 0 {
            return Err(Error::invalid("propagation", "need at least one z step"));
        }
        if !(self.guard_fraction >= 0.2) {
            return Err(Error::invalid("propagation", "guard bands must be at least 20% of the window"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub field_out: FieldGrid,
    /// `(z, field)` snapshots in increasing z.
    pub history: Vec<(f64, FieldGrid)>,
    pub atom_final: AtomState,
    pub z_positions: Vec<f64>,
    pub energies: Vec<f64>,
    /// Internal substeps per requested z step (stability limit).
    pub substeps: usize,
    /// Largest positivity-bound excess seen at any stage.
    pub max_violation: f64,
}

impl PropagationResult {
    /// Writes `field_z{index}.csv` per snapshot and `diagnostics.json`.
    pub fn write_history(&self, dir: &Path) -> std::io::Result<()> {
        for (i, (_, f)) in self.history.iter().enumerate() {
            crate::io::write_atomic(&dir.join(format!("field_z{i}.csv")), |w| f.write_csv(w))?;
        }
        crate::io::write_atomic(&dir.join("diagnostics.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &self.diagnostics_json())?;
            writeln!(w)
        })
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "z_cm": self.z_positions.iter().map(|z| units::au_to_cm(*z)).collect::<Vec<_>>(),
            "energy": self.energies,
            "snapshot_z_cm": self.history.iter().map(|(z, _)| units::au_to_cm(*z)).collect::<Vec<_>>(),
            "substeps": self.substeps,
            "max_physicality_violation": self.max_violation,
        })
    }
}

/// Right-hand side of the z march on a guard-padded window.
struct Marcher {
    grid: TimeGrid,
    offset: usize,
    inner_len: usize,
    /// `(n - n0)/c` on the padded grid, or `None` when identically zero.
    delta_n: Option<Vec<f64>>,
    /// `i kappa / N` for the spectral derivative.
    deriv: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    atom: AtomSpec,
    /// `2 pi N_a mu / c`, zero when there are no atoms.
    atomic_coupling: f64,
    slack: f64,
}

fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl Marcher {
    fn new(field: &FieldGrid, index: &IndexTrace, medium: &MediumSpec, cfg: &PropagationConfig) -> Result<Self> {
        let g = field.grid;
        let ig = index.grid;
        let tol = 1e-6 * g.dt;
        if ig.t0 > g.t0 + tol || ig.end() < g.end() - tol {
            return Err(Error::invalid("index trace", "index trace does not cover the field window"));
        }
        let guard = ((cfg.guard_fraction * g.len as f64).ceil() as usize).max(1);
        let total = smooth_len(g.len + 2 * guard);
        let grid = TimeGrid::new(g.t0 - guard as f64 * g.dt, g.dt, total)?;
        let right_guard = total - g.len - guard;

        let inner: Vec<f64> = g.times().map(|t| index.value_at(t) - index.n0).collect();
        let delta_n = if inner.iter().all(|&d| d == 0.0) {
            None
        } else {
            let mut d = vec![0.0; total];
            for (k, v) in inner.iter().enumerate() {
                d[guard + k] = v / C_AU;
            }
            // fade to the reference index across the inner half of each guard
            let taper = |j: usize, width: usize| {
                let x = (j as f64 + 1.0) / (width as f64 + 1.0);
                if x >= 1.0 {
                    0.0
                } else {
                    let c = (0.5 * std::f64::consts::PI * x).cos();
                    c * c
                }
            };
            let wl = (guard / 2).max(1);
            for j in 0..guard {
                d[guard - 1 - j] = inner[0] / C_AU * taper(j, wl);
            }
            let wr = (right_guard / 2).max(1);
            for j in 0..right_guard {
                d[guard + g.len + j] = inner[g.len - 1] / C_AU * taper(j, wr);
            }
            Some(d)
        };

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(total);
        let inverse = planner.plan_fft_inverse(total);
        let dk = 2.0 * std::f64::consts::PI / (total as f64 * g.dt);
        let deriv = (0..total)
            .map(|k| {
                let kk = if 2 * k == total {
                    0.0
                } else if k > total / 2 {
                    k as f64 - total as f64
                } else {
                    k as f64
                };
                Complex64::new(0.0, kk * dk / total as f64)
            })
            .collect();

        check_atom_grid(g, &medium.atom)?;
        let atomic_coupling =
            2.0 * std::f64::consts::PI * medium.atomic_density * medium.atom.dipole / C_AU;
        Ok(Self {
            grid,
            offset: guard,
            inner_len: g.len,
            delta_n,
            deriv,
            forward,
            inverse,
            atom: medium.atom,
            atomic_coupling,
            slack: cfg.physicality_slack,
        })
    }

    fn pad(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.grid.len];
        v[self.offset..self.offset + self.inner_len].copy_from_slice(samples);
        v
    }

    fn trim(&self, samples: &[Complex64]) -> Vec<Complex64> {
        samples[self.offset..self.offset + self.inner_len].to_vec()
    }

    /// Largest z step that keeps RK4 inside its stability region.
    fn stable_dz(&self) -> f64 {
        let kmax = std::f64::consts::PI / self.grid.dt;
        let dn = self
            .delta_n
            .as_ref()
            .map(|d| d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0);
        // the undamped atomic response grows linearly with window length
        let span = self.grid.dt * self.grid.len as f64;
        let atomic = self.atomic_coupling * self.atom.dipole * self.atom.transition_omega * span.min(2.0 * self.atom.t2);
        let rate = kmax * dn + atomic;
        if rate > 0.0 {
            2.5 / rate
        } else {
            f64::INFINITY
        }
    }

    fn rhs(&self, e: &[Complex64], violation: &mut f64) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; e.len()];
        if let Some(dn) = &self.delta_n {
            let mut buf: Vec<Complex64> = e.iter().zip(dn).map(|(x, d)| x * *d).collect();
            self.forward.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&self.deriv) {
                *b *= k;
            }
            self.inverse.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o = -b;
            }
        }
        if self.atomic_coupling != 0.0 {
            let state = bloch_sweep(e, self.grid, &self.atom);
            *violation = violation.max(state.max_violation());
            state.check_physical(self.slack)?;
            let rate = coherence_rate(&state, e, &self.atom);
            for (o, r) in out.iter_mut().zip(&rate) {
                *o -= self.atomic_coupling * r;
            }
        }
        Ok(out)
    }

    fn rk4(&self, e: &mut [Complex64], h: f64, violation: &mut f64) -> Result<()> {
        let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let k1 = self.rhs(e, violation)?;
        let k2 = self.rhs(&axpy(e, 0.5 * h, &k1), violation)?;
        let k3 = self.rhs(&axpy(e, 0.5 * h, &k2), violation)?;
        let k4 = self.rhs(&axpy(e, h, &k3), violation)?;
        for i in 0..e.len() {
            e[i] += (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (h / 6.0);
        }
        Ok(())
    }
}

fn march(
    field_in: &FieldGrid,
    index: &IndexTrace,
    medium: &MediumSpec,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    cfg.validate()?;
    let m = Marcher::new(field_in, index, medium, cfg)?;
    let dz = cfg.length / cfg.n_z_steps as f64;
    let substeps = if dz > m.stable_dz() { (dz / m.stable_dz()).ceil() as usize } else { 1 };
    let h = dz / substeps as f64;

    let mut e = m.pad(&field_in.samples);
    let mut violation = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut z_positions = vec![0.0];
    let mut energies = vec![energy(field_in)];
    let snapshot = |e: &[Complex64]| FieldGrid { samples: m.trim(e), ..field_in.clone() };
    if cfg.store_every > 0 {
        history.push((0.0, field_in.clone()));
    }
    for step in 1..=cfg.n_z_steps {
        for _ in 0..substeps {
            m.rk4(&mut e, h, &mut violation)?;
        }
        let z = step as f64 * dz;
        let f = snapshot(&e);
        z_positions.push(z);
        energies.push(energy(&f));
        if cfg.store_every > 0 && (step % cfg.store_every == 0 || step == cfg.n_z_steps) {
            history.push((z, f));
        }
    }
    let field_out = snapshot(&e);
    let final_state = bloch_sweep(&e, m.grid, &m.atom);
    let atom_final = AtomState {
        rho_ba: m.trim(&final_state.rho_ba),
        rho_d: final_state.rho_d[m.offset..m.offset + m.inner_len].to_vec(),
    };
    Ok(PropagationResult {
        field_out,
        history,
        atom_final,
        z_positions,
        energies,
        substeps,
        max_violation: violation.max(final_state.max_violation()),
    })
}

/// Marches `field_in` from the entrance to the exit plane.
///
/// The molecular term uses a spectral tau derivative on a periodic window
/// padded by guard bands in which the index relaxes to its reference value;
/// the atomic term uses the coherence rate from the Bloch equations, which
/// are re-solved against the field at every RK4 stage in z.
pub fn propagate(
    field_in: &FieldGrid,
    index: &IndexTrace,
    medium: &MediumSpec,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    let result = march(field_in, index, medium, cfg)?;
    if let Some(tol) = cfg.convergence_tolerance {
        let fine = PropagationConfig { n_z_steps: 2 * cfg.n_z_steps, store_every: 0, convergence_tolerance: None, ..*cfg };
        let check = march(field_in, index, medium, &fine)?;
        let (a, b) = (energy(&result.field_out), energy(&check.field_out));
        let scale = energy(field_in).max(f64::MIN_POSITIVE);
        if (a - b).abs() > tol * scale {
            return Err(Error::non_convergence(
                "z march",
                format!("exit energy changed by {:.3e} of the input when z steps were doubled", (a - b).abs() / scale),
            ));
        }
    }
    Ok(result)
}
