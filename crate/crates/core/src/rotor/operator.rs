//! Matrix elements of cos^2(theta) in the |J, M> basis.
//!
//! Uses cos^2 = 1/3 + (2/3) P2(cos theta), which couples only
//! Delta J in {0, +-2} at fixed M.

use crate::error::{Error, Result};

/// Banded real symmetric representation of cos^2(theta) for one M.
///
/// Rows run over `J = |M| ..= j_max`. Only the diagonal and the
/// `J <-> J + 2` band are stored; every other entry is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Cos2Operator {
    m: i32,
    j_max: u32,
    diag: Vec<f64>,
    band2: Vec<f64>,
}

impl Cos2Operator {
    pub fn new(j_max: u32, m: i32) -> Result<Self> {
        let j_min = m.unsigned_abs();
        if j_max < j_min {
            return Err(Error::invalid(
                "cos^2 operator",
                format!("j_max = {j_max} is below |M| = {j_min}"),
            ));
        }
        let diag = (j_min..=j_max).map(|j| diagonal(j, m)).collect();
        let band2 = if j_max >= j_min + 2 {
            (j_min..=j_max - 2).map(|j| coupling(j, m)).collect()
        } else {
            Vec::new()
        };
        Ok(Self { m, j_max, diag, band2 })
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn j_min(&self) -> u32 {
        self.m.unsigned_abs()
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// `<J, M| cos^2 theta |J', M>`; zero outside the band or the basis.
    pub fn element(&self, j: u32, jp: u32) -> f64 {
        let lo = self.j_min();
        if j < lo || jp < lo || j > self.j_max || jp > self.j_max {
            return 0.0;
        }
        match j.abs_diff(jp) {
            0 => self.diag[(j - lo) as usize],
            2 => self.band2[(j.min(jp) - lo) as usize],
            _ => 0.0,
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Entries `<J|cos^2|J+2>` for `J = |M| ..= j_max - 2`.
    pub fn band(&self) -> &[f64] {
        &self.band2
    }
}

/// `<J,M|cos^2|J,M>`.
pub fn diagonal(j: u32, m: i32) -> f64 {
    let jf = j as f64;
    let m2 = (m as f64).powi(2);
    1.0 / 3.0 + (2.0 / 3.0) * (jf * (jf + 1.0) - 3.0 * m2) / ((2.0 * jf - 1.0) * (2.0 * jf + 3.0))
}

/// `<J+2,M|cos^2|J,M>`.
pub fn coupling(j: u32, m: i32) -> f64 {
    let jf = j as f64;
    let m2 = (m as f64).powi(2);
    let num = ((jf + 1.0).powi(2) - m2) * ((jf + 2.0).powi(2) - m2);
    let den = (2.0 * jf + 1.0) * (2.0 * jf + 3.0).powi(2) * (2.0 * jf + 5.0);
    (num / den).sqrt()
}

/// Build the banded cos^2(theta) operator for azimuthal index `m` up to `j_max`.
pub fn build_cos2_operator(j_max: u32, m: i32) -> Result<Cos2Operator> {
    Cos2Operator::new(j_max, m)
}
