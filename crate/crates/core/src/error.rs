use thiserror::Error;

use crate::fock::{ModeId, Spatial};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("states are defined over different mode registries")]
    RegistryMismatch,
    #[error("mode {0} appears in both operands")]
    OverlappingModes(ModeId),
    #[error("mode {0} registered twice")]
    DuplicateMode(ModeId),
    #[error("mode {0} is not registered")]
    UnknownMode(ModeId),
    #[error("spatial label {0} has no registered H/V pair")]
    UnknownSpatial(Spatial),
    #[error("basis state has {found} occupations, registry has {expected} modes")]
    OccupationLength { expected: usize, found: usize },
    #[error("basis state holds {total} photons, cutoff is {cutoff}")]
    CutoffExceeded { total: u32, cutoff: u32 },
    #[error("cannot normalize the zero state")]
    ZeroState,
    #[error("mode subset is empty")]
    EmptyModeSet,
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("mode {0} still holds photons and cannot be dropped")]
    OccupiedMode(ModeId),
    #[error("invalid port assignment: {0}")]
    PortMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expected exactly one photon in each arm")]
    NotTwoPhoton,
    #[error("requested outcome has zero probability")]
    ZeroProbability,
}
