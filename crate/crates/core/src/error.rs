use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("region not admissible: {0}")]
    NotAdmissible(String),
    #[error("empty set has no solidness")]
    EmptySolidness,
    #[error("all sets precompact in compact mode")]
    AllPrecompact,
    #[error("solidness is undefined on a discrete space")]
    DiscreteSolidness,
    #[error("valuation gap: {0}")]
    ValuationGap(String),
    #[error("extension inconsistency: {0}")]
    ExtensionInconsistency(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("p-conic domain violated: {0}")]
    ConicDomain(String),
    #[error("integrand does not vanish near the infinity ring: {0}")]
    NotVanishing(String),
    #[error("unbalanced; normalize first (masses {0} and {1})")]
    Unbalanced(f64, f64),
    #[error("lipschitz projection did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("support grew to {0} points, above the cap of {1}; use chaos_game instead")]
    SupportCap(usize, usize),
    #[error("contraction violated: {0}")]
    ContractionViolated(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("measure is not simple: {0}")]
    NotSimple(String),
    #[error("map is not proper: {0}")]
    ImproperMap(String),
    #[error("not a solid variable: {0}")]
    NotSolidVariable(String),
    #[error("family parity: {0}")]
    FamilyParity(String),
    #[error("median formulas disagree: {0}")]
    MedianDisagreement(String),
    #[error("render bounds exclude all points")]
    EmptyRaster,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
