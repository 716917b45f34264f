use std::fmt;

/// Command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

/// Usage or configuration problem.
pub const USAGE: u8 = 2;
/// Experiment failure (a stage or seed did not complete).
pub const EXPERIMENT: u8 = 1;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn experiment(message: impl Into<String>) -> Self {
        Failure {
            code: EXPERIMENT,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Maps a core error to a failure; input-shaped problems are usage errors.
pub fn from_core(context: &str, e: unmix_core::Error) -> Failure {
    use unmix_core::Error as E;
    let message = format!("{context}: {e}");
    match e {
        E::NonFinite { .. } | E::ZeroSignal | E::ZeroNorm => Failure::experiment(message),
        _ => Failure::usage(message),
    }
}
