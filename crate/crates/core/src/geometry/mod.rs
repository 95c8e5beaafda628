//! Domains on uniform grids: shapes, anti-aliased rasterization, set
//! operations and volume/perimeter measurement.

mod domain;
mod grid;
pub mod pgm;
mod shape;

pub use domain::{dilate, measure, rasterize, subtract, symmetric_difference_hull, CompactSet, GridDomain, Measure};
pub use grid::{GridSpec, MARGIN_CELLS, MIN_CELLS};
pub use shape::{AnalyticTag, Shape};
