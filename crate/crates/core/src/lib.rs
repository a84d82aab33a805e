//! Discrete exterior calculus on 2D and 3D Cartesian image grids.
//!
//! The grid is treated as a cubical complex. Images are segmented into an
//! inside region, from which restricted Laplacians under normal or
//! tangential boundary conditions are assembled. Their kernels give Betti
//! numbers and their solves give Hodge decompositions of vector fields
//! derived from the image.

pub mod cochain;
pub mod decompose;
pub mod error;
pub mod fields;
pub mod grid;
pub mod image;
pub mod laplacian;
pub mod linalg;
pub mod manifold;
pub mod pipeline;
pub mod solver;
pub mod synthetic;

pub use cochain::{Cochain, SupportTag};
pub use decompose::{
    decomposed_image, hodge_decompose, hodge_decompose_with, DecomposeOptions, DecomposeParams, DecomposedImage,
    DecompositionResult, Diagnostics, FieldMethod,
};
pub use error::{Error, Result};
pub use fields::{CubeField, FlowDirection, VertexField};
pub use grid::{build_grid, AxisSet, CellId, GridComplex, SparseMatrix};
pub use image::Image;
pub use laplacian::{
    assemble, betti, betti_numbers, harmonic_space, spectrum, EigenOptions, HarmonicBasis, LaplacianOperator, Variant,
};
pub use manifold::{build_support, segment, BoundaryCondition, SupportSet, Supports, VertexMask};
pub use solver::{conjugate_gradient, conjugate_gradient_with_floor, CgOptions, CgReport};
