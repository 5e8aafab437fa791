//! Configuration-driven front end for the `alignmem` simulator.

pub mod commands;
pub mod config;

use alignmem::Error;

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<config::ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Invalid { .. }) => 2,
        Some(Error::NonConvergence { .. } | Error::Unphysical { .. } | Error::TooFewFringes { .. }) => 3,
        Some(Error::NoEmission(_)) => 4,
        None => 1,
    }
}
