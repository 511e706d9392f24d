//! Synthetic multichannel recordings: shoebox room responses, gated white
//! Gaussian sources and sensor noise.

mod render;
mod room;
mod scenario;

use thiserror::Error;

pub use render::{render_signals, sensor_noise, source_signal, MultichannelSignal};
pub use room::{image_source_air, RoomSpec};
pub use scenario::{Scenario, SourceKind, SourceSpec};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("position {0:?} is not strictly inside the room")]
    PositionOutsideRoom([f64; 3]),
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("configuration error: {0}")]
    Config(String),
}
