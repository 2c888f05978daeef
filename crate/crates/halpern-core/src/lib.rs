//! Stochastic anchored/averaged fixed-point iterations with executable
//! asymptotic-regularity rates.
//!
//! The crate simulates the two-operator recursion
//!
//! ```text
//! y_n     = (1 - alpha_n) (T x_n + xi_n) + alpha_n u
//! x_{n+1} = (1 - beta_n) (U y_n + delta_n) + beta_n y_n
//! ```
//!
//! for nonexpansive `T`, `U` on `R^d` under controlled noise, and constructs
//! the convergence-rate functions that bound its displacements and residuals,
//! both in expectation and almost surely. Anchored (Halpern) and averaged
//! Tikhonov-regularized special cases, linear-decay closed forms, geometry
//! (uniform-convexity) driven rates, and an average-reward Q-learning
//! instantiation are all included.
//!
//! `no_std`-compatible with `alloc`; the `std` feature (default) only toggles
//! `std::error::Error` impls and native float intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod geometry;
pub mod math;
pub mod mdp;
pub mod noise;
pub mod op;
pub mod rates;
pub mod rng;
pub mod schedule;
pub mod scheme;
pub mod space;

pub use noise::NoiseModel;
pub use op::{check_nonexpansive, residual, NonexpansiveOp};
pub use rates::{AsRate, FastBound, FastCase, MeanRate, RateError};
pub use rng::{path_seed, PathRng};
pub use schedule::Schedule;
pub use scheme::{
    make_halpern, make_km_tikhonov, run_path, Quantity, SchemeConfig, SchemeKind, StepRecord,
    Trajectory,
};
pub use space::{dist, norm, NormKind, Point};
