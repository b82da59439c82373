pub mod combinatorics;
pub mod error;
pub mod innovations;
pub mod marginal;
pub mod pmf;
pub mod presets;
pub mod process;
pub mod validation;

pub use error::{InarError, Result};
pub use innovations::InnovationSpec;
pub use marginal::StationaryModel;
