//! Core of the poster layout-tree toolkit.
//!
//! Everything in this crate is pure computation over in-memory values:
//! geometry, the SVG layout-tree dialect, hierarchical tree construction,
//! rasterization, quality metrics, example retrieval, prompt assembly and
//! candidate ranking, and mockup realization. File formats, network
//! backends and the command line live in the `postree` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod generation;
pub mod geom;
pub mod intent;
pub mod math;
pub mod metrics;
pub mod raster;
pub mod realize;
pub mod retrieval;
pub mod svg;
pub mod tree;
pub mod types;

pub use geom::{CubicSegment, Point, Rect, Shape, ShapeError};
pub use raster::{BinMap, GrayMap};
pub use types::{
    BaseCategory, Canvas, DatasetRecord, DesignIntent, ElementCategory, Layout, LayoutElement,
    LayoutTree, Polygon, TextVariant, TreeNode,
};
