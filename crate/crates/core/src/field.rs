//! Weak signal field on the moving-frame grid and its spectral diagnostics.
//!
//! Fields are complex analytic signals with the carrier included:
//! `E(tau) = E0 exp(-4 ln2 (tau - t0)^2 / sigma^2) exp(-i omega0 tau)`.
//! Spectra use `E(omega) = sum_k dt E_k exp(+i omega tau_k)`, so the carrier
//! sits at `+omega0` and `sum |E(omega)|^2 d_omega / 2pi = sum |E_k|^2 dt`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, TimeGrid};
use crate::units;

/// Gaussian signal pulse. `duration` is the FWHM of the field amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub amplitude: f64,
    pub duration: f64,
    pub center_time: f64,
    pub carrier_omega: f64,
}

impl SignalSpec {
    pub fn new(amplitude: f64, duration: f64, center_time: f64, carrier_omega: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("signal", "duration must be positive"));
        }
        if !(carrier_omega > 0.0) || !carrier_omega.is_finite() {
            return Err(Error::invalid("signal", "carrier frequency must be positive"));
        }
        if !amplitude.is_finite() || !center_time.is_finite() {
            return Err(Error::invalid("signal", "amplitude and centre must be finite"));
        }
        Ok(Self { amplitude, duration, center_time, carrier_omega })
    }

    /// Amplitude FWHM of the spectrum, `8 ln2 / duration`.
    pub fn spectral_fwhm(&self) -> f64 {
        8.0 * std::f64::consts::LN_2 / self.duration
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center_time) / self.duration;
        self.amplitude * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
    }

    pub fn value(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.envelope(t), -self.carrier_omega * t)
    }

    /// Closed-form `integral |E|^2 dtau`.
    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude * self.duration * (std::f64::consts::PI / (8.0 * std::f64::consts::LN_2)).sqrt()
    }

    /// Largest grid step that still samples the carrier 20 times per period.
    pub fn max_dt(&self) -> f64 {
        carrier_max_dt(self.carrier_omega)
    }
}

pub(crate) fn carrier_max_dt(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI / omega / 20.0
}

/// Complex field samples on a uniform moving-frame grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub grid: TimeGrid,
    pub samples: Vec<Complex64>,
    /// Carrier used when the field was synthesized.
    pub carrier_omega: f64,
}

impl FieldGrid {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>, carrier_omega: f64) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(Error::invalid("field", "sample count does not match the grid"));
        }
        if grid.dt > carrier_max_dt(carrier_omega) * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "field grid",
                format!(
                    "dt = {:.4} fs does not resolve the carrier (need <= {:.4} fs)",
                    units::au_to_fs(grid.dt),
                    units::au_to_fs(carrier_max_dt(carrier_omega))
                ),
            ));
        }
        Ok(Self { grid, samples, carrier_omega })
    }

    pub fn zeros(grid: TimeGrid, carrier_omega: f64) -> Result<Self> {
        Self::new(grid, vec![Complex64::new(0.0, 0.0); grid.len], carrier_omega)
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|e| e.norm_sqr()).collect()
    }

    pub fn peak_intensity(&self) -> f64 {
        self.samples.iter().map(|e| e.norm_sqr()).fold(0.0, f64::max)
    }

    /// Time of the intensity maximum, refined by a parabola through the
    /// three samples around it.
    pub fn peak_time(&self) -> f64 {
        let i = self.intensity();
        peak_time_in(&i, self.grid, 0, i.len())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau_fs,re_E,im_E")?;
        for (t, e) in self.grid.times().zip(&self.samples) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", units::au_to_fs(t), e.re, e.im)?;
        }
        Ok(())
    }
}

pub(crate) fn peak_time_in(intensity: &[f64], grid: TimeGrid, lo: usize, hi: usize) -> f64 {
    let mut k = lo;
    for i in lo..hi {
        if intensity[i] > intensity[k] {
            k = i;
        }
    }
    let shift = if k > 0 && k + 1 < intensity.len() {
        parabolic_offset(intensity[k - 1], intensity[k], intensity[k + 1])
    } else {
        0.0
    };
    grid.time(k) + shift * grid.dt
}

fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

/// Samples `spec` on `grid`. The grid must cover `t0 +- 3 sigma_s` and resolve the carrier.
pub fn make_signal(spec: &SignalSpec, grid: TimeGrid) -> Result<FieldGrid> {
    let reach = 3.0 * spec.duration;
    if grid.t0 > spec.center_time - reach || grid.end() < spec.center_time + reach {
        return Err(Error::invalid("signal grid", "grid must span the pulse centre +- 3 durations"));
    }
    FieldGrid::new(grid, grid.times().map(|t| spec.value(t)).collect(), spec.carrier_omega)
}

/// `integral |E|^2 dtau` by the trapezoid rule.
pub fn energy(field: &FieldGrid) -> f64 {
    trapezoid(field.samples.iter().map(|e| e.norm_sqr()), field.grid.dt)
}

/// Energy inside `[a, b]`, trapezoid over the samples that fall in the interval.
pub fn energy_between(field: &FieldGrid, a: f64, b: f64) -> f64 {
    let g = field.grid;
    let lo = ((a - g.t0) / g.dt).ceil().max(0.0) as usize;
    let hi = (((b - g.t0) / g.dt).floor().max(-1.0) + 1.0).min(g.len as f64) as usize;
    if hi <= lo {
        return 0.0;
    }
    trapezoid(field.samples[lo..hi].iter().map(|e| e.norm_sqr()), g.dt)
}

/// Complex spectrum sorted by angular frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn amplitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn d_omega(&self) -> f64 {
        self.omega[1] - self.omega[0]
    }

    /// `sum |E(omega)|^2 d_omega / 2pi`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.d_omega() / (2.0 * std::f64::consts::PI)
    }

    /// Power-weighted mean frequency.
    pub fn centroid(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (w, v) in self.omega.iter().zip(&self.values) {
            let p = v.norm_sqr();
            num += w * p;
            den += p;
        }
        num / den
    }

    /// Writes non-negative frequencies only; the analytic signal carries
    /// its content there.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_ev,amplitude")?;
        for (om, v) in self.omega.iter().zip(&self.values) {
            if *om >= 0.0 {
                writeln!(w, "{:.16e},{:.16e}", units::au_to_ev(*om), v.norm())?;
            }
        }
        Ok(())
    }
}

/// Discrete transform on the grid's own conjugate axis.
pub fn spectrum(field: &FieldGrid) -> Spectrum {
    spectrum_padded(field, field.grid.len)
}

/// Spectrum after zero-padding to at least `min_len` samples (finer frequency spacing).
pub fn spectrum_padded(field: &FieldGrid, min_len: usize) -> Spectrum {
    let n = min_len.max(field.grid.len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..field.grid.len].copy_from_slice(&field.samples);
    transform_window(&mut buf, field.grid, inverse_plan(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Transforms `buf` (samples starting at `grid.t0`) in place and returns the sorted spectrum.
fn transform_window(buf: &mut [Complex64], grid: TimeGrid, plan: Arc<dyn Fft<f64>>) -> Spectrum {
    let n = buf.len();
    plan.process(buf);
    let dw = 2.0 * std::f64::consts::PI / (n as f64 * grid.dt);
    let half = n.div_ceil(2);
    let mut omega = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        // negative frequencies first
        let k = (i + half) % n;
        let kk = if k >= half { k as f64 - n as f64 } else { k as f64 };
        let w = kk * dw;
        omega.push(w);
        values.push(buf[k] * Complex64::from_polar(grid.dt, w * grid.t0));
    }
    Spectrum { omega, values }
}

/// Amplitude map over a frequency band; one row per slice or frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub row_label: String,
    /// Row coordinates in the units named by `row_label`.
    pub rows: Vec<f64>,
    pub omega: Vec<f64>,
    pub amplitude: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// CSV matrix: header row `<row_label>\omega_ev,w1,w2,...`, then one
    /// row per slice starting with its coordinate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "{}\\omega_ev", self.row_label)?;
        for om in &self.omega {
            write!(w, ",{:.10e}", units::au_to_ev(*om))?;
        }
        writeln!(w)?;
        for (r, row) in self.rows.iter().zip(&self.amplitude) {
            write!(w, "{r:.10e}")?;
            for a in row {
                write!(w, ",{a:.10e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Power-weighted mean frequency of each row.
    pub fn row_centroids(&self) -> Vec<f64> {
        self.amplitude
            .iter()
            .map(|row| {
                let (mut num, mut den) = (0.0, 0.0);
                for (w, a) in self.omega.iter().zip(row) {
                    num += w * a * a;
                    den += a * a;
                }
                num / den
            })
            .collect()
    }
}

fn band_indices(s: &Spectrum, band: (f64, f64)) -> std::ops::Range<usize> {
    let lo = s.omega.partition_point(|&w| w < band.0);
    let hi = s.omega.partition_point(|&w| w <= band.1);
    lo..hi
}

/// Spectrum of each z slice restricted to `band` (angular frequencies, a.u.).
/// `positions` are the slice coordinates in cm.
pub fn spectrogram_z(history: &[FieldGrid], positions: &[f64], band: (f64, f64)) -> Result<Spectrogram> {
    if history.len() < 2 || positions.len() != history.len() {
        return Err(Error::invalid("spectrogram", "need at least two slices with matching positions"));
    }
    let grid = history[0].grid;
    if history.iter().any(|f| f.grid != grid) {
        return Err(Error::invalid("spectrogram", "slices must share one grid"));
    }
    let plan = inverse_plan(grid.len);
    let mut omega = Vec::new();
    let mut amplitude = Vec::with_capacity(history.len());
    for f in history {
        let mut buf = f.samples.clone();
        let s = transform_window(&mut buf, grid, plan.clone());
        let r = band_indices(&s, band);
        if omega.is_empty() {
            omega = s.omega[r.clone()].to_vec();
        }
        amplitude.push(s.values[r].iter().map(|v| v.norm()).collect());
    }
    Ok(Spectrogram { row_label: "z_cm".into(), rows: positions.to_vec(), omega, amplitude })
}

/// Short-time transform with a Gaussian window of intensity FWHM
/// `window_fwhm`, hopped by a quarter of the FWHM across the grid.
pub fn spectrogram_tau(field: &FieldGrid, window_fwhm: f64, band: (f64, f64)) -> Result<Spectrogram> {
    if !(window_fwhm > 0.0) {
        return Err(Error::invalid("spectrogram", "window width must be positive"));
    }
    let grid = field.grid;
    let hop = 0.25 * window_fwhm;
    let a = 4.0 * std::f64::consts::LN_2 / (window_fwhm * window_fwhm);
    let plan = inverse_plan(grid.len);
    let mut rows = Vec::new();
    let mut omega = Vec::new();
    let mut amplitude = Vec::new();
    let mut center = grid.t0;
    while center <= grid.end() + 1e-9 * grid.dt {
        let mut buf: Vec<Complex64> = grid
            .times()
            .zip(&field.samples)
            .map(|(t, e)| e * (-a * (t - center) * (t - center)).exp())
            .collect();
        let s = transform_window(&mut buf, grid, plan.clone());
        let r = band_indices(&s, band);
        if omega.is_empty() {
            omega = s.omega[r.clone()].to_vec();
        }
        amplitude.push(s.values[r].iter().map(|v| v.norm()).collect());
        rows.push(units::au_to_fs(center));
        center += hop;
    }
    Ok(Spectrogram { row_label: "tau_fs".into(), rows, omega, amplitude })
}

/// Mean spacing between adjacent amplitude maxima above 10% of the peak,
/// each refined by a parabola through its neighbours.
pub fn fringe_spacing(spectrum: &Spectrum) -> Result<f64> {
    let amp = spectrum.amplitude();
    let peak = amp.iter().cloned().fold(0.0, f64::max);
    let dw = spectrum.d_omega();
    let mut maxima = Vec::new();
    for k in 1..amp.len().saturating_sub(1) {
        if amp[k] > 0.1 * peak && amp[k] > amp[k - 1] && amp[k] >= amp[k + 1] {
            maxima.push(spectrum.omega[k] + parabolic_offset(amp[k - 1], amp[k], amp[k + 1]) * dw);
        }
    }
    if maxima.len() < 3 {
        return Err(Error::TooFewFringes { found: maxima.len() });
    }
    Ok((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}
