pub mod artifacts;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod informativeness;
pub mod linker;
pub mod pipeline;
pub mod recommender;
pub mod releasediff;
pub mod seeds;
pub mod signals;
pub mod synthetic;
pub mod textprep;
pub mod topics;
pub mod uiminer;

pub use error::{Error, Result};
