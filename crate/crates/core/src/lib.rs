//! Multi-attribute impact assessment: Delphi rounds, reliability statistics,
//! weight normalization, weighted aggregation and scenario ranking.

pub mod aggregation;
pub mod batch;
pub mod clock;
pub mod delphi;
pub mod fixture;
pub mod io;
pub mod model;
pub mod plot;
pub mod reliability;
pub mod report;
pub mod scales;

use thiserror::Error;

/// Any failure from this crate, with a stable machine-readable code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Engine(#[from] delphi::EngineError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Stats(#[from] reliability::StatsError),
    #[error(transparent)]
    Scale(#[from] scales::ScaleError),
    #[error(transparent)]
    Aggregation(#[from] aggregation::AggregationError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error("{code}: {message}")]
    Invalid { code: String, message: String },
}

impl Error {
    pub fn code(&self) -> &str {
        match self {
            Self::Engine(e) => e.code(),
            Self::Io(e) => e.code(),
            Self::Stats(e) => e.code(),
            Self::Scale(e) => e.code(),
            Self::Aggregation(e) => e.code(),
            Self::Plot(e) => e.code(),
            Self::Invalid { code, .. } => code,
        }
    }
}
