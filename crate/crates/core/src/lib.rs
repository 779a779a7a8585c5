//! Differentiable physics for rod-and-cable (tensegrity) robots.
//!
//! The crate is organized in layers:
//!
//! - [`autodiff`]: a scalar reverse-mode tape with an explicit detach
//!   (stop-gradient) operation. Everything above it is generic over
//!   [`autodiff::Scalar`], so the same physics code runs on plain `f64`
//!   (fast, for planning) or on taped variables (for gradients).
//! - [`math`]: small 3D vector / quaternion types over any `Scalar`.
//! - [`dynamics`]: rigid rods, cable springs, semi-implicit Euler.
//! - [`contact`]: ground contact with restitution and Coulomb friction,
//!   using detached impulses so contact parameters keep useful gradients.
//! - [`robot`]: the 3-bar robot assembly, PID cable control, trajectory
//!   recording and file formats.
//! - [`sysid`]: gait segmentation, key-frame loss and baseline losses,
//!   gradient-descent parameter identification.
//! - [`gaits`]: symmetry relabeling, gait graph search, policy expansion.
//! - [`toybench`]: self-contained 1D problems (drone, box, billiards, car)
//!   exercising the contact gradients and the key-frame loss.

pub mod autodiff;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod gaits;
pub mod math;
pub mod robot;
pub mod sysid;
pub mod opt;
pub mod toybench;

pub use autodiff::{Gradients, Scalar, Tape, Var};
pub use error::{Error, Result};
