//! Collision-cone control barrier function (C3BF) safety filtering on top of
//! Cartesian impedance control for revolute serial manipulators.
//!
//! The crate is split along the control pipeline:
//!
//! * [`arm_model`]: DH kinematics, translational Jacobian and rigid-body
//!   dynamics (recursive Newton-Euler, mass matrix, forward dynamics).
//! * [`impedance`]: nominal task acceleration from the impedance law and the
//!   operational-space mapping of task accelerations to joint torques.
//! * [`safety_filter`]: collision-cone and distance barrier constraints plus
//!   the minimum-deviation QP that filters the nominal acceleration.
//! * [`world`]: moving spherical obstacles and the perception boundary.
//! * [`sim`]: the closed loop, traces, metrics and builtin scenarios.
//! * [`config`] and [`cli`]: TOML scenario files and the command line tool.

pub mod arm_model;
pub mod cli;
pub mod config;
pub mod error;
pub mod impedance;
pub mod safety_filter;
pub mod sim;
pub mod world;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
