//! Joint placement, association and uplink power control for aerial base
//! stations serving ground IoT devices, with energy-budgeted relocation over
//! a time horizon.

pub mod activation;
pub mod assignment;
pub mod geo;
pub mod mobility;
pub mod orchestrator;
pub mod placement;
pub mod power;
pub mod spectrum;
pub mod special;

pub use geo::{Environment, Vec3};
