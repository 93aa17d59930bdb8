use alloc::string::String;

/// Errors raised by the simulation, training and validation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Array or matrix dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Two inputs that must have the same size do not.
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical integration produced a non-finite state.
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    /// A training loss became non-finite.
    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    /// A regression problem has no unique solution.
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    /// Range normalization over a flat profile.
    #[error("undefined normalization: observed profile is flat")]
    UndefinedNormalization,

    /// Simulation of dataset sample `index` failed.
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn in_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }
}
