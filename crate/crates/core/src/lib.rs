//! Energy-wastage models for broadcast flooding in tree-shaped wireless
//! sensor networks.
//!
//! The crate has four parts:
//!
//! - [`topology`] builds explicit tree realizations of the supported
//!   topology families (linear chain, balanced binary, nested
//!   binary/ternary, Q-ary) and extracts breadth-first spanning trees
//!   from arbitrary graphs.
//! - [`analytic`] evaluates the closed-form wastage expressions for each
//!   family exactly, with big-integer counts and exact rationals for
//!   controlled-flooding expectations.
//! - [`floodsim`] is an independent structural cross-check: it propagates
//!   floods over explicit trees, computes exact expected counts by
//!   dynamic programming, and estimates them by seeded Monte Carlo.
//! - [`levelsector`] simulates the levelling-and-sectoring query protocol
//!   on geometric fields and accounts for the energy it spends compared
//!   to flooding.

pub mod analytic;
pub mod exact;
pub mod floodsim;
pub mod levelsector;
pub mod topology;
