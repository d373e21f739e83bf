mod eval;
mod identity;
mod landscape;
mod skip;
mod tau;

pub use eval::{evaluate_rl2, ExactReference, HjbMcReference, Rl2Evaluation, SolutionReference};
pub use identity::{bsde_identity_check, IdentityCheck};
pub use landscape::{landscape_argmin, landscape_sweep, LandscapeRow};
pub use skip::{skip_sweep, train_and_eval, SkipSweepRow, TrainSetup};
pub use tau::{onestep_point_loss, tau_scaling_study, TauScalingRow};
