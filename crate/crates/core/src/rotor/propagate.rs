use std::ops::Range;

use num_complex::Complex64;

use super::operator::{coupling, diagonal};
use super::{MoleculeSpec, PulseSpec, RotorNumerics};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A maximal run of overlapping pulse supports.
#[derive(Clone, Debug)]
struct Interval {
    start: f64,
    end: f64,
    pulses: Vec<PulseSpec>,
    peak_coupling: f64,
    /// Integration breakpoints after `start`: every interior grid sample, then `end`.
    breaks: Vec<f64>,
}

/// Pulse intervals laid over a sampling grid. State independent, so it
/// is built once and shared by every initial state.
#[derive(Clone, Debug)]
pub(crate) struct Schedule {
    pub(crate) grid: TimeGrid,
    intervals: Vec<Interval>,
    /// Samples owned by free segment `k` (before interval `k`, after interval `k - 1`).
    pub(crate) free_ranges: Vec<Range<usize>>,
    /// Samples strictly inside interval `k`.
    pub(crate) pulse_ranges: Vec<Range<usize>>,
}

impl Schedule {
    pub(crate) fn new(pulses: &[PulseSpec], delta_alpha: f64, grid: TimeGrid) -> Self {
        let mut active: Vec<PulseSpec> = pulses
            .iter()
            .copied()
            .filter(|p| p.peak_coupling(delta_alpha) != 0.0)
            .collect();
        active.sort_by(|a, b| a.support().0.total_cmp(&b.support().0));

        let mut intervals: Vec<Interval> = Vec::new();
        for p in active {
            let (a, b) = p.support();
            match intervals.last_mut() {
                Some(last) if a < last.end => {
                    last.end = last.end.max(b);
                    last.peak_coupling += p.peak_coupling(delta_alpha);
                    last.pulses.push(p);
                }
                _ => intervals.push(Interval {
                    start: a,
                    end: b,
                    pulses: vec![p],
                    peak_coupling: p.peak_coupling(delta_alpha),
                    breaks: Vec::new(),
                }),
            }
        }

        let first_after = |t: f64| (0..grid.len).find(|&k| grid.time(k) > t).unwrap_or(grid.len);
        let first_at_or_after =
            |t: f64| (0..grid.len).find(|&k| grid.time(k) >= t).unwrap_or(grid.len);

        let mut free_ranges = Vec::with_capacity(intervals.len() + 1);
        let mut pulse_ranges = Vec::with_capacity(intervals.len());
        let mut cursor = 0;
        for iv in &mut intervals {
            let lo = first_after(iv.start).max(cursor);
            let hi = first_at_or_after(iv.end).max(lo);
            free_ranges.push(cursor..lo);
            pulse_ranges.push(lo..hi);
            iv.breaks = (lo..hi).map(|k| grid.time(k)).collect();
            iv.breaks.push(iv.end);
            cursor = hi;
        }
        free_ranges.push(cursor..grid.len);

        Self { grid, intervals, free_ranges, pulse_ranges }
    }

    pub(crate) fn interval_count(&self) -> usize {
        self.intervals.len()
    }

    /// Reference time for free segment `k`.
    pub(crate) fn free_reference(&self, k: usize) -> f64 {
        if k == 0 {
            self.intervals.first().map_or(0.0, |iv| iv.start)
        } else {
            self.intervals[k - 1].end
        }
    }
}

/// Field-free stretch of one state: `<cos^2>(t) = diag + 2 Re sum_k c_k exp(-i w_k (t - t_ref))`,
/// where `c_k` pairs `J = j_lo + 2k` with `J + 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSegment {
    pub reference_time: f64,
    pub diag: f64,
    pub j_lo: u32,
    pub couplings: Vec<Complex64>,
}

impl FreeSegment {
    fn value(&self, t: f64, molecule: &MoleculeSpec) -> f64 {
        let dt = t - self.reference_time;
        let mut acc = 0.0;
        for (k, c) in self.couplings.iter().enumerate() {
            let j = self.j_lo + 2 * k as u32;
            let w = molecule.energy(j + 2) - molecule.energy(j);
            let (s, co) = (w * dt).sin_cos();
            // Re(c * exp(-i w dt))
            acc += c.re * co + c.im * s;
        }
        self.diag + 2.0 * acc
    }
}

/// Everything needed to rebuild one initial state's alignment trace.
#[derive(Clone, Debug, PartialEq)]
pub struct RotorRecord {
    pub j0: u32,
    pub m: i32,
    pub free: Vec<FreeSegment>,
    /// `<cos^2>` at the grid samples inside each pulse interval.
    pub pulse_values: Vec<Vec<f64>>,
    pub j_max_used: u32,
    /// Population left in the top two retained shells after the last pulse.
    pub top_shell_population: f64,
    /// Largest |norm - 1| observed at any breakpoint.
    pub norm_drift: f64,
}

impl RotorRecord {
    pub(crate) fn trace(&self, schedule: &Schedule, molecule: &MoleculeSpec) -> Vec<f64> {
        let grid = schedule.grid;
        let mut out = vec![0.0; grid.len];
        for (seg, range) in self.free.iter().zip(&schedule.free_ranges) {
            for k in range.clone() {
                out[k] = seg.value(grid.time(k), molecule);
            }
        }
        for (vals, range) in self.pulse_values.iter().zip(&schedule.pulse_ranges) {
            out[range.clone()].copy_from_slice(vals);
        }
        out
    }
}

/// Propagates single rotor states through a fixed pulse sequence.
#[derive(Clone, Debug)]
pub struct RotorSolver {
    pub molecule: MoleculeSpec,
    pub pulses: Vec<PulseSpec>,
    pub numerics: RotorNumerics,
}

/// Working arrays for one same-parity block `J = j_lo, j_lo + 2, ...`.
struct Block {
    j_lo: u32,
    m: i32,
    diag: Vec<f64>,
    band: Vec<f64>,
    omega: Vec<f64>,
    energy: Vec<f64>,
}

impl Block {
    fn new(j_lo: u32, m: i32, len: usize, molecule: &MoleculeSpec) -> Self {
        let mut b = Self { j_lo, m, diag: vec![], band: vec![], omega: vec![], energy: vec![] };
        b.resize(len, molecule);
        b
    }

    fn resize(&mut self, len: usize, molecule: &MoleculeSpec) {
        let j = |k: usize| self.j_lo + 2 * k as u32;
        self.diag = (0..len).map(|k| diagonal(j(k), self.m)).collect();
        self.band = (0..len.saturating_sub(1)).map(|k| coupling(j(k), self.m)).collect();
        self.energy = (0..len).map(|k| molecule.energy(j(k))).collect();
        self.omega = (0..len.saturating_sub(1)).map(|k| self.energy[k + 1] - self.energy[k]).collect();
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn j_max(&self) -> u32 {
        self.j_lo + 2 * (self.len() as u32 - 1)
    }

    /// out = i u C_I(t) y, with `q[k] = exp(-i w_k (t - t_ref))`.
    fn apply(&self, y: &[Complex64], q: &[Complex64], u: f64, out: &mut [Complex64]) {
        let n = y.len();
        for k in 0..n {
            let mut acc = y[k] * self.diag[k];
            if k + 1 < n {
                acc += q[k] * y[k + 1] * self.band[k];
            }
            if k > 0 {
                acc += q[k - 1].conj() * y[k - 1] * self.band[k - 1];
            }
            out[k] = Complex64::new(-acc.im * u, acc.re * u);
        }
    }

    /// `<cos^2>` of an interaction-picture state.
    fn expectation(&self, y: &[Complex64], q: &[Complex64]) -> f64 {
        let mut d = 0.0;
        let mut off = 0.0;
        for k in 0..y.len() {
            d += self.diag[k] * y[k].norm_sqr();
            if k + 1 < y.len() {
                off += (y[k].conj() * y[k + 1] * q[k]).re * self.band[k];
            }
        }
        d + 2.0 * off
    }

    fn free_segment(&self, c: &[Complex64], reference_time: f64) -> FreeSegment {
        let diag = c.iter().zip(&self.diag).map(|(x, d)| d * x.norm_sqr()).sum();
        let couplings = (0..c.len().saturating_sub(1))
            .map(|k| c[k].conj() * c[k + 1] * self.band[k])
            .collect();
        FreeSegment { reference_time, diag, j_lo: self.j_lo, couplings }
    }
}

fn top_shells(y: &[Complex64]) -> f64 {
    y.iter().rev().take(2).map(|c| c.norm_sqr()).sum()
}

fn phases(omega: &[f64], dt: f64, out: &mut Vec<Complex64>) {
    out.clear();
    out.extend(omega.iter().map(|w| {
        let (s, c) = (w * dt).sin_cos();
        Complex64::new(c, -s)
    }));
}

impl RotorSolver {
    pub fn new(molecule: MoleculeSpec, pulses: Vec<PulseSpec>) -> Self {
        Self { molecule, pulses, numerics: RotorNumerics::default() }
    }

    pub fn with_numerics(mut self, numerics: RotorNumerics) -> Self {
        self.numerics = numerics;
        self
    }

    pub(crate) fn schedule(&self, grid: TimeGrid) -> Schedule {
        Schedule::new(&self.pulses, self.molecule.delta_alpha, grid)
    }

    /// `<cos^2 theta>_{J0,M}(t)` on `grid`.
    pub fn evolve_single(&self, j0: u32, m: i32, grid: TimeGrid) -> Result<Vec<f64>> {
        let schedule = self.schedule(grid);
        let rec = self.run_state(&schedule, j0, m)?;
        Ok(rec.trace(&schedule, &self.molecule))
    }

    pub(crate) fn run_state(&self, schedule: &Schedule, j0: u32, m: i32) -> Result<RotorRecord> {
        let mol = &self.molecule;
        let num = &self.numerics;
        let m_abs = m.unsigned_abs();
        if j0 < m_abs {
            return Err(Error::invalid("initial rotor state", format!("J0 = {j0} is below |M| = {m_abs}")));
        }
        let j_lo = m_abs + (j0 - m_abs) % 2;
        let j_start = j0.max(m_abs) + num.j_margin;
        let len0 = ((j_start.min(num.j_cap.max(j0)) - j_lo) / 2 + 1) as usize;
        let mut block = Block::new(j_lo, m, len0, mol);

        let mut c = vec![Complex64::new(0.0, 0.0); block.len()];
        c[((j0 - j_lo) / 2) as usize] = Complex64::new(1.0, 0.0);

        let mut free = Vec::with_capacity(schedule.interval_count() + 1);
        free.push(block.free_segment(&c, schedule.free_reference(0)));
        let mut pulse_values = Vec::with_capacity(schedule.interval_count());
        let mut norm_drift: f64 = 0.0;

        let mut k1 = Vec::new();
        let mut k2 = Vec::new();
        let mut k3 = Vec::new();
        let mut k4 = Vec::new();
        let mut tmp = Vec::new();
        let mut q = Vec::new();
        let mut half = Vec::new();

        // time at which `c` holds the Schrodinger-picture state
        let mut c_time = schedule.intervals.first().map(|iv| iv.start).unwrap_or(0.0);
        for (idx, iv) in schedule.intervals.iter().enumerate() {
            let gap = iv.start - c_time;
            for (v, e) in c.iter_mut().zip(&block.energy) {
                *v *= Complex64::from_polar(1.0, -e * gap);
            }
            // interaction picture referenced to the interval start: y = c there
            let mut y = c.clone();
            let t_ref = iv.start;
            let mut t = iv.start;
            let mut values = Vec::with_capacity(iv.breaks.len().saturating_sub(1));
            let u_at = |t: f64| -> f64 { iv.pulses.iter().map(|p| p.coupling(t, mol.delta_alpha)).sum() };

            for (bi, &t_break) in iv.breaks.iter().enumerate() {
                let span = t_break - t;
                if span > 0.0 {
                    let omega_max = block.omega.last().copied().unwrap_or(0.0);
                    let rate = iv.peak_coupling + omega_max;
                    let h_max = num.step_scale / rate.max(f64::MIN_POSITIVE);
                    let steps = (span / h_max).ceil().max(1.0) as usize;
                    let h = span / steps as f64;

                    phases(&block.omega, t - t_ref, &mut q);
                    phases(&block.omega, 0.5 * h, &mut half);
                    let n = y.len();
                    for buf in [&mut k1, &mut k2, &mut k3, &mut k4, &mut tmp] {
                        buf.resize(n, Complex64::new(0.0, 0.0));
                    }
                    for s in 0..steps {
                        let ts = t + s as f64 * h;
                        let u0 = u_at(ts);
                        let u1 = u_at(ts + 0.5 * h);
                        let u2 = u_at(ts + h);
                        block.apply(&y, &q, u0, &mut k1);
                        for (qq, f) in q.iter_mut().zip(&half) {
                            *qq *= f;
                        }
                        for k in 0..n {
                            tmp[k] = y[k] + k1[k] * (0.5 * h);
                        }
                        block.apply(&tmp, &q, u1, &mut k2);
                        for k in 0..n {
                            tmp[k] = y[k] + k2[k] * (0.5 * h);
                        }
                        block.apply(&tmp, &q, u1, &mut k3);
                        for (qq, f) in q.iter_mut().zip(&half) {
                            *qq *= f;
                        }
                        for k in 0..n {
                            tmp[k] = y[k] + k3[k] * h;
                        }
                        block.apply(&tmp, &q, u2, &mut k4);
                        for k in 0..n {
                            y[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (h / 6.0);
                        }
                    }
                    t = t_break;
                }

                let norm: f64 = y.iter().map(|v| v.norm_sqr()).sum();
                norm_drift = norm_drift.max((norm - 1.0).abs());

                if bi + 1 < iv.breaks.len() {
                    phases(&block.omega, t - t_ref, &mut q);
                    values.push(block.expectation(&y, &q));
                }

                while top_shells(&y) > num.shell_tolerance {
                    if block.j_max() >= num.j_cap {
                        return Err(Error::non_convergence(
                            "rotor basis",
                            format!(
                                "J0 = {j0}, M = {m}: {:.3e} of the population sits in the top shells at J_max = {} (cap {})",
                                top_shells(&y),
                                block.j_max(),
                                num.j_cap
                            ),
                        ));
                    }
                    let grow = (num.j_increment / 2).max(1) as usize;
                    let new_len = (block.len() + grow).min(((num.j_cap - j_lo) / 2 + 1) as usize);
                    block.resize(new_len, mol);
                    y.resize(new_len, Complex64::new(0.0, 0.0));
                }
            }

            // back to the Schrodinger picture at the interval end
            let dt = iv.end - t_ref;
            c = y
                .iter()
                .zip(&block.energy)
                .map(|(v, e)| {
                    let (s, co) = (e * dt).sin_cos();
                    v * Complex64::new(co, -s)
                })
                .collect();
            pulse_values.push(values);
            free.push(block.free_segment(&c, schedule.free_reference(idx + 1)));
            c_time = iv.end;
        }

        Ok(RotorRecord {
            j0,
            m,
            free,
            pulse_values,
            j_max_used: block.j_max(),
            top_shell_population: top_shells(&c),
            norm_drift,
        })
    }
}

/// Alignment trace of a single initial state `(J0, M)` with default numerics.
pub fn evolve_single(
    initial: (u32, i32),
    pulses: &[PulseSpec],
    grid: TimeGrid,
    molecule: &MoleculeSpec,
) -> Result<Vec<f64>> {
    RotorSolver::new(molecule.clone(), pulses.to_vec()).evolve_single(initial.0, initial.1, grid)
}
