use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to parse configuration: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("policy for UAV {uav} selected unit {unit}, but only {units} processing units exist")]
    UnknownUnit { uav: usize, unit: usize, units: usize },

    #[error("task {0} is already queued at this unit")]
    DuplicateTask(u64),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SimError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn context(self, context: impl Into<String>) -> Self {
        SimError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
