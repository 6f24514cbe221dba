pub mod cli_io;
pub mod error;
pub mod groundstate;
pub mod numeric;
pub mod oracle;
pub mod potential;
pub mod profiles;
pub mod scaling;
pub mod settings;
pub mod squarewell;
pub mod stability;
pub mod walls;
pub use error::{Error, Result};
