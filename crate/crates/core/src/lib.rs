pub mod chains;
pub mod environment;
pub mod error;
pub mod eta;
pub mod genealogy;
pub mod montecarlo;
pub mod pgf;
pub mod tree;
pub mod verify;
