mod eval;
mod landscape;
mod sweep;
mod train;
mod verify;

pub use eval::cmd_eval;
pub use landscape::cmd_landscape;
pub use sweep::cmd_sweep;
pub use train::cmd_train;
pub use verify::{cmd_verify, VerifyReport};
