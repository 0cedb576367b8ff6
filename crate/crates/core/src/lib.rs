//! Flatness-based boundary control for the linear Zakharov–Kuznetsov equation
//! `u_t + u_xxx + u_xyy + a u_x = 0` on `(-1,0) x (0,1)`, with the control
//! acting through `u(-1, y, t) = h(y, t)`.

pub mod cheb;
pub mod domain;
pub mod error;
pub mod freeflow;
pub mod genfun;
pub mod io;
pub mod gevrey;
pub mod jet;
pub mod modal;
pub mod pipeline;
pub mod simulator;
pub mod synthesis;

pub use error::{Error, Result};
