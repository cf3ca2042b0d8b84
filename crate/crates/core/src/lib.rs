//! Topological measures (quasi-measures) on finite planar grids.

pub mod error;
pub mod grid;
pub mod image_transforms;
pub mod kr;
pub mod markov;
pub mod median;
pub mod qmeasures;
pub mod quasi_integral;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use grid::{Adjacency, CellSet, Connectivity, GridSpace, Mode, Region, Role};
pub use qmeasures::{extend, Kind, SolidSetFunction, TopoMeasure};
