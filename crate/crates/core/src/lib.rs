//! Learning-based spectrum sharing with multiple primary power levels.
//!
//! A secondary transmitter learns the primary's power-level mixture blindly
//! with a Dirichlet-process Gaussian mixture, turns the learned model into a
//! belief-state planning problem and is scored by normalized power level
//! alignment (NPLA) against periodic and perfect baselines.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod config;
pub mod dpgmm;
pub mod engine;
pub mod error;
pub mod mixture;
pub mod policy;
pub mod num;
pub mod rng;
pub mod sample;
pub mod scenario;
pub mod sensing;
pub mod special;

pub use error::{Error, Result};
pub use num::Real;

pub type PowerMode = scenario::PowerMode<f64>;
pub type ModeSchedule = scenario::ModeSchedule<f64>;
pub type StatStream = scenario::StatStream<f64>;
pub type MixtureModel = mixture::MixtureModel<f64>;
pub type GibbsState = dpgmm::GibbsState<f64>;
pub type Chain = dpgmm::Chain<f64>;
pub type SenseModel = sensing::SenseModel<f64>;
pub type RewardSpec = policy::RewardSpec<f64>;
pub type PolicyTable = policy::PolicyTable<f64>;
pub type BeliefState = policy::BeliefState<f64>;
pub type Deployment = engine::Deployment<f64>;
pub type Planner = engine::Planner<f64>;
