//! Distributed k-means in the coordinator model.
//!
//! `m` simulated machines hold shards of the data and talk only to a
//! coordinator. [`soccer`] implements the SOCCER algorithm, which stops on its
//! own once the remaining data fits the coordinator, and [`kmeans_parallel`]
//! the k-means|| baseline. Both run on [`simnet::Network`], which accounts for
//! every point and scalar moved and for per-round machine time.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, threads and the
//! command line live in the companion `soccer-cli` crate.

#![no_std]
// `!(x > 0.0)` style checks are intentional: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod blackbox;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod kmeans_parallel;
pub mod reduce;
pub mod seed;
pub mod simnet;
pub mod soccer;

pub use error::{Error, Result};
pub use geometry::{CenterSet, Dataset, Point};
