//! Spectral traveling-wave solver and continuation toolkit for electron-layer states
//! ("E-states") of the one-dimensional Vlasov–Poisson contour dynamics.

// `!(x > 0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod continuation;
pub mod format;
pub mod model;
pub mod scalar;
pub mod simulator;
pub mod spectral;

pub use scalar::Real;

pub type StripParamsF64 = model::StripParams<f64>;
pub type StripParamsF32 = model::StripParams<f32>;
pub type ProfilePairF64 = spectral::ProfilePair<f64>;
pub type ProfilePairF32 = spectral::ProfilePair<f32>;
pub type ResidualPairF64 = spectral::ResidualPair<f64>;
pub type ResidualPairF32 = spectral::ResidualPair<f32>;
pub type FullStateF64 = spectral::FullState<f64>;
pub type FullStateF32 = spectral::FullState<f32>;
pub type ScenarioF64 = bifurcation::Scenario<f64>;
pub type ScenarioF32 = bifurcation::Scenario<f32>;
pub type BifurcationPointF64 = bifurcation::BifurcationPoint<f64>;
pub type BifurcationPointF32 = bifurcation::BifurcationPoint<f32>;
pub type ContinuationConfigF64 = continuation::ContinuationConfig<f64>;
pub type BranchF64 = continuation::Branch<f64>;
pub type BranchPointF64 = continuation::BranchPoint<f64>;
pub type SimConfigF64 = simulator::SimConfig<f64>;
pub type TrajectoryReportF64 = simulator::TrajectoryReport<f64>;
