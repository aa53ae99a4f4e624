//! Simulation and analytic models for content dissemination among fog servers
//! (cloud-coordinated, carried by mobile devices) and for neighbor-assisted
//! access-point handoff on highways.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cvfh;
pub mod fogroute;
pub mod metrics;
pub mod mobility;
pub mod sim;
