//! Micro-width residual networks ("SimResNet") for microstructure-to-fatigue
//! regression.
//!
//! A SimResNet has as many neurons per layer as there are input features and
//! reads each layer as one explicit Euler step of an ODE in layer-time:
//!
//! ```text
//! x(t_{k+1}) = x(t_k) + dt * sigma( (1/N) w(t_k) x(t_k) + b(t_k) )
//! ```
//!
//! The crate covers the forward map, exact reverse-mode gradients with a
//! finite-difference oracle, the per-picture training protocol with its error
//! statistics, a width-scaling benchmark, and a desk-scale solver for the
//! discrete static shakedown problem that produces the regression targets.
//!
//! Runnable walkthroughs live in `examples/`; the `simresnet` binary wraps the
//! same functionality as subcommands (see [`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activation;
pub mod cli;
pub mod data;
pub mod error;
pub mod forward;
pub mod gradient;
pub mod metrics;
pub mod network;
pub mod shakedown;
pub mod trainer;

pub use activation::ActivationKind;
pub use error::{Error, Result};
pub use forward::{forward_step, forward_trajectory, Trajectory};
pub use gradient::{backprop_gradients, finite_diff_gradients, loss, ParamGradients};
pub use network::{LayerParams, Network};
