//! Robot base placement from annotated workcell point clouds.
//!
//! The pipeline: scan a workcell ([`cloudio`]), spray interaction zones,
//! avoidance regions and a search plane onto the cloud ([`annotate`]), then
//! search the plane for the base position that maximizes the number of
//! reachable, collision-free task targets ([`optimizer`]), using
//! [`kinematics`] for inverse kinematics and [`collide`] for collision checks.

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod cloudio;
pub mod geom;
pub mod collide;
pub mod kinematics;
pub mod optimizer;
pub mod registry;
