use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("atomic state left the physical region at sample {index}: |rho_ba|^2 = {coherence_sq:.3e}, rho_d = {rho_d:.6}")]
    Unphysical { index: usize, coherence_sq: f64, rho_d: f64 },

    #[error("no emission detected: {0}")]
    NoEmission(String),

    #[error("too few spectral fringes: found {found}, need at least 3")]
    TooFewFringes { found: usize },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { what, reason: reason.into() }
    }

    pub(crate) fn non_convergence(what: &'static str, detail: impl Into<String>) -> Self {
        Error::NonConvergence { what, detail: detail.into() }
    }
}
