use thiserror::Error;
use topomeasure::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// A checked property does not hold.
    #[error("{0}")]
    Property(String),
    /// Unknown name, malformed scene, or an argument the library rejects.
    #[error("{0}")]
    Reference(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Reference(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ContractionViolated(_)
            | CoreError::MedianDisagreement(_)
            | CoreError::NotSolidVariable(_)
            | CoreError::ExtensionInconsistency(_)
            | CoreError::ValuationGap(_)
            | CoreError::NoConvergence(_) => CliError::Property(e.to_string()),
            _ => CliError::Reference(e.to_string()),
        }
    }
}
