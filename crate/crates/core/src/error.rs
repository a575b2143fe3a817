use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("mode `{0}` appears twice")]
    DuplicateMode(String),
    #[error("empty mode selection")]
    EmptySelection,
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),
    #[error("fidelity supports 1 or 2 modes, got {0}")]
    FidelityModes(usize),
    #[error("states have different mode counts ({0} vs {1})")]
    ModeCountMismatch(usize, usize),
    #[error("receiver calibration scale is zero")]
    DegenerateCalibration,
    #[error("phase estimate undefined at theta = {0} (sin theta = 0)")]
    DeltaMethodSingular(f64),
    #[error("{0} is not defined for this probe")]
    UnsupportedVariant(&'static str),
    #[error("epsilon target {target} unreachable with N_S <= {cap}")]
    NoBracket { target: f64, cap: f64 },
    #[error("N_S = {value} exceeds the cap {cap}")]
    CapExceeded { value: f64, cap: f64 },
    #[error("QFI did not converge: error estimate {error:e} against J = {qfi:e}")]
    NotConverged { qfi: f64, error: f64 },
    #[error("M times the smallest detector mean is {0}, below 100; Gaussian aggregate sampling refused")]
    CltGuard(f64),
    #[error("need at least 2 shots, got {0}")]
    TooFewShots(usize),
    #[error("exact counting test out of range (expected counts {0:e}) and approximation disabled")]
    CountOverflow(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}
