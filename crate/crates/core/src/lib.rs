//! Sequential change-point detection on data streams using score-based
//! CUSUM statistics.
//!
//! The detection statistic accumulates differences of Hyvärinen scores
//! between a pre-change and a post-change score function. Score functions
//! are either analytic (Gaussian mixtures with closed-form scores) or
//! learned from reference data by denoising score matching with a small
//! feed-forward network. The crate also ships classical baselines
//! (likelihood-ratio CUSUM variants, Hotelling's T²), Monte-Carlo
//! threshold calibration against a target average run length, synthetic
//! stream generators, and an evaluation harness for delay-vs-run-length
//! tradeoff tables.

pub mod baselines;
pub mod calibrate;
pub mod datagen;
pub mod detector;
pub mod error;
pub mod io;
pub mod rng;
pub mod score_net;
pub mod stats;

pub use error::{Error, Result};
