//! Distributed sparse-GP TSDF mapping for robot teams on time-varying
//! networks.
//!
//! Each robot turns laser scans into truncated signed distance samples on a
//! shared lattice ([`tsdf`]), stores per-pseudo-point sufficient statistics
//! in a [`quadtree`], and diffuses its observations as mini-batches
//! ([`protocol`]) over proximity graphs ([`network`]). Maps are read out with
//! a compressed GP posterior ([`gp`]). A [`central`] agent and a closed-form
//! [`oracle`] provide ground truth for the diffusion, and [`sim`] ties it all
//! together.

// `!(x > 0.0)` is the idiom for rejecting NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod central;
pub mod cli;
pub mod geometry;
pub mod gp;
pub mod network;
pub mod oracle;
pub mod protocol;
pub mod quadtree;
pub mod sim;
pub mod tsdf;
