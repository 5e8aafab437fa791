//! Conversion between laboratory units and atomic units.
//!
//! All physics in this crate runs in atomic units (hbar = e = m_e = 1).
//! Configuration surfaces accept lab units and convert through the
//! helpers below.

/// One atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;
/// One Hartree in electron-volts.
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// One Hartree in wavenumbers (cm^-1).
pub const HARTREE_CM: f64 = 219_474.631_363_2;
/// Bohr radius in centimetres.
pub const BOHR_CM: f64 = 0.529_177_210_903e-8;
/// Bohr radius in angstrom.
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;
/// Speed of light in atomic units.
pub const C_AU: f64 = 137.035_999_084;
/// Intensity carried by a field of peak amplitude 1 a.u. (W/cm^2).
pub const AU_INTENSITY_W_CM2: f64 = 3.509_445_06e16;
/// Boltzmann constant in Hartree per kelvin.
pub const KB_HARTREE_PER_K: f64 = 3.166_811_563e-6;
/// hc in eV nm.
pub const HC_EV_NM: f64 = 1_239.841_984;

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / AU_TIME_FS
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * AU_TIME_FS
}

pub fn ps_to_au(t_ps: f64) -> f64 {
    fs_to_au(t_ps * 1e3)
}

pub fn ev_to_au(e_ev: f64) -> f64 {
    e_ev / HARTREE_EV
}

pub fn au_to_ev(e_au: f64) -> f64 {
    e_au * HARTREE_EV
}

pub fn wavenumber_to_au(k_cm: f64) -> f64 {
    k_cm / HARTREE_CM
}

/// Vacuum wavelength (nm) to angular frequency (a.u.).
pub fn wavelength_nm_to_au(lambda_nm: f64) -> f64 {
    ev_to_au(HC_EV_NM / lambda_nm)
}

/// Polarizability volume in cubic angstrom to atomic units.
pub fn angstrom3_to_au(a: f64) -> f64 {
    a / BOHR_ANGSTROM.powi(3)
}

/// Number density in cm^-3 to bohr^-3.
pub fn per_cm3_to_au(n: f64) -> f64 {
    n * BOHR_CM.powi(3)
}

pub fn au_to_per_cm3(n: f64) -> f64 {
    n / BOHR_CM.powi(3)
}

pub fn cm_to_au(l_cm: f64) -> f64 {
    l_cm / BOHR_CM
}

pub fn au_to_cm(l_au: f64) -> f64 {
    l_au * BOHR_CM
}

/// Peak intensity (W/cm^2) to peak field amplitude (a.u.).
pub fn intensity_to_field_au(i_w_cm2: f64) -> f64 {
    (i_w_cm2 / AU_INTENSITY_W_CM2).sqrt()
}
