//! Multi-view panoramic room-layout geometry.
//!
//! The crate works on the horizon-depth representation of a room layout: one
//! wall distance per panorama column, normalized by camera height, plus the
//! ceiling/floor height ratio. It provides
//!
//! * conversions between horizon depth, floor-plane boundary points and image rows ([`geometry`]),
//! * a deterministic room and camera simulator with exact ray-cast depth ([`simulator`]),
//! * multi-view pseudo-label consensus with per-column confidence ([`consensus`]),
//! * 1D variance cost volumes over depth planes ([`cost_volume`]),
//! * fine-tuning objectives ([`objectives`]) and layout metrics ([`metrics`]),
//! * an end-to-end scenario pipeline with on-disk artifacts ([`pipeline`]).
//!
//! Batch work runs on rayon when the `parallel` feature is enabled (default);
//! see [`exec`].

pub mod consensus;
pub mod cost_volume;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod metrics;
pub mod objectives;
pub mod pipeline;
pub mod polygon;
pub mod simulator;
pub mod stats;
pub mod svg;

pub use error::{LayoutError, Result};
pub use exec::Execution;
pub use geometry::{
    BinAggregation, BoundarySamples, CameraPose, Direction, Frame, HorizonDepth, LongitudeGrid, Point2, Point3,
    Points3D, RatioValue,
};
