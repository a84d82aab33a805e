//! Cartesian cell complex of an image grid.
//!
//! A grid with vertex extents `dims` carries cells of every degree `0..=m`.
//! A `k`-cell is identified by the set of `k` coordinate axes it spans and by
//! its lowest corner (the anchor). Cells of one degree are numbered
//! contiguously from zero: first by axis set (`x < y < z`, `xy < xz < yz`),
//! then by anchor in row-major order with the last axis varying fastest.
//! Axis `0` is called `x`, axis `1` `y` and axis `2` `z`; for image arrays this
//! is the order of the array axes.
//!
//! Every cell is oriented positively along its axes. The boundary of a cell
//! spanning axes `a_0 < ... < a_k` at anchor `p` is
//! `sum_i (-1)^i (face(p + e_{a_i}) - face(p))`, where the faces drop axis
//! `a_i`. The exterior derivative `D_k` is the transpose of that boundary map.

use std::fmt;

use sprs::CsMat;

use crate::error::{Error, Result};

pub type SparseMatrix = CsMat<f64>;

pub const MAX_DIM: usize = 3;

const AXIS_NAMES: [char; MAX_DIM] = ['x', 'y', 'z'];

/// Set of coordinate axes spanned by a cell, stored as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AxisSet(u8);

impl AxisSet {
    pub const EMPTY: AxisSet = AxisSet(0);

    pub fn from_axes(axes: &[usize]) -> Self {
        let mut bits = 0u8;
        for &a in axes {
            assert!(a < MAX_DIM, "axis {a} out of range");
            bits |= 1 << a;
        }
        AxisSet(bits)
    }

    pub fn single(axis: usize) -> Self {
        Self::from_axes(&[axis])
    }

    pub fn contains(self, axis: usize) -> bool {
        axis < MAX_DIM && self.0 & (1 << axis) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn without(self, axis: usize) -> Self {
        AxisSet(self.0 & !(1 << axis))
    }

    /// Axes in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_DIM).filter(move |&a| self.contains(a))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "v");
        }
        for a in self.iter() {
            write!(f, "{}", AXIS_NAMES[a])?;
        }
        Ok(())
    }
}

/// A single cell of the grid. Anchor coordinates beyond the grid dimension are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellId {
    pub axes: AxisSet,
    pub anchor: [usize; MAX_DIM],
}

impl CellId {
    pub fn new(axes: AxisSet, anchor: [usize; MAX_DIM]) -> Self {
        CellId { axes, anchor }
    }

    pub fn degree(&self) -> usize {
        self.axes.len()
    }
}

#[derive(Clone, Debug)]
struct CellBlock {
    axes: AxisSet,
    extents: [usize; MAX_DIM],
    offset: usize,
    len: usize,
}

impl CellBlock {
    fn linear(&self, anchor: &[usize; MAX_DIM]) -> usize {
        self.extents.iter().zip(anchor).fold(0, |idx, (e, x)| idx * e + x)
    }

    fn anchor(&self, mut linear: usize) -> [usize; MAX_DIM] {
        let mut anchor = [0; MAX_DIM];
        for a in (0..MAX_DIM).rev() {
            anchor[a] = linear % self.extents[a];
            linear /= self.extents[a];
        }
        anchor
    }

    fn holds(&self, anchor: &[usize; MAX_DIM]) -> bool {
        (0..MAX_DIM).all(|a| anchor[a] < self.extents[a])
    }
}

/// Cartesian cell complex with uniform spacing.
#[derive(Clone, Debug)]
pub struct GridComplex {
    dims: [usize; MAX_DIM],
    dim: usize,
    spacing: f64,
    blocks: Vec<Vec<CellBlock>>,
}

/// Builds the cell complex of a grid with the given vertex extents.
pub fn build_grid(dims: &[usize], spacing: f64) -> Result<GridComplex> {
    GridComplex::new(dims, spacing)
}

impl GridComplex {
    pub fn new(dims: &[usize], spacing: f64) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::InvalidGeometry(format!(
                "grid dimension must be 1..={MAX_DIM}, got {}",
                dims.len()
            )));
        }
        if let Some(&e) = dims.iter().find(|&&e| e < 2) {
            return Err(Error::InvalidGeometry(format!(
                "every extent must be at least 2, got {e} in {dims:?}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let dim = dims.len();
        let mut padded = [1; MAX_DIM];
        padded[..dim].copy_from_slice(dims);

        let mut blocks = Vec::with_capacity(dim + 1);
        for k in 0..=dim {
            let mut offset = 0;
            let mut degree_blocks = Vec::new();
            for axes in axis_sets(dim, k) {
                let mut extents = [1; MAX_DIM];
                for a in 0..dim {
                    extents[a] = if axes.contains(a) { padded[a] - 1 } else { padded[a] };
                }
                let len = extents.iter().product();
                degree_blocks.push(CellBlock {
                    axes,
                    extents,
                    offset,
                    len,
                });
                offset += len;
            }
            blocks.push(degree_blocks);
        }
        Ok(GridComplex {
            dims: padded,
            dim,
            spacing,
            blocks,
        })
    }

    /// Vertex extents per axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_count(&self, degree: usize) -> usize {
        self.blocks
            .get(degree)
            .map(|b| b.iter().map(|blk| blk.len).sum())
            .unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.cell_count(0)
    }

    /// Extents of the grid of top-dimensional cells (`dims - 1` per axis).
    pub fn cube_extents(&self) -> Vec<usize> {
        self.dims().iter().map(|&d| d - 1).collect()
    }

    pub(crate) fn check_degree(&self, degree: usize) -> Result<()> {
        if degree > self.dim {
            Err(Error::Degree { degree, dim: self.dim })
        } else {
            Ok(())
        }
    }

    /// Axis sets present at a degree, in index order, with their index ranges.
    pub fn axis_blocks(&self, degree: usize) -> Vec<(AxisSet, std::ops::Range<usize>)> {
        self.blocks
            .get(degree)
            .map(|bs| bs.iter().map(|b| (b.axes, b.offset..b.offset + b.len)).collect())
            .unwrap_or_default()
    }

    /// Anchor extents of the cells spanning `axes`.
    pub fn block_extents(&self, axes: AxisSet) -> Option<[usize; MAX_DIM]> {
        self.blocks
            .get(axes.len())?
            .iter()
            .find(|b| b.axes == axes)
            .map(|b| b.extents)
    }

    fn block(&self, axes: AxisSet) -> Option<&CellBlock> {
        self.blocks.get(axes.len())?.iter().find(|b| b.axes == axes)
    }

    pub fn index_of(&self, cell: &CellId) -> Option<usize> {
        let block = self.block(cell.axes)?;
        if !block.holds(&cell.anchor) {
            return None;
        }
        Some(block.offset + block.linear(&cell.anchor))
    }

    pub fn cell(&self, degree: usize, index: usize) -> Option<CellId> {
        let blocks = self.blocks.get(degree)?;
        let block = blocks.iter().find(|b| index >= b.offset && index < b.offset + b.len)?;
        Some(CellId {
            axes: block.axes,
            anchor: block.anchor(index - block.offset),
        })
    }

    /// Index of the vertex at the given coordinates (row-major).
    pub fn vertex_index(&self, coords: &[usize]) -> usize {
        self.dims
            .iter()
            .zip(&coords[..self.dim])
            .fold(0, |idx, (d, x)| idx * d + x)
    }

    /// Calls `f(index, cell)` for every cell of a degree in index order.
    pub fn for_each_cell(&self, degree: usize, mut f: impl FnMut(usize, CellId)) {
        let Some(blocks) = self.blocks.get(degree) else {
            return;
        };
        for block in blocks {
            let mut anchor = [0usize; MAX_DIM];
            for i in 0..block.len {
                f(
                    block.offset + i,
                    CellId {
                        axes: block.axes,
                        anchor,
                    },
                );
                // odometer increment, last axis fastest
                for a in (0..MAX_DIM).rev() {
                    anchor[a] += 1;
                    if anchor[a] < block.extents[a] {
                        break;
                    }
                    anchor[a] = 0;
                }
            }
        }
    }

    /// Vertex indices of a cell.
    pub fn cell_vertices(&self, cell: &CellId) -> Vec<usize> {
        let axes: Vec<usize> = cell.axes.iter().collect();
        let mut out = Vec::with_capacity(1 << axes.len());
        for mask in 0..(1usize << axes.len()) {
            let mut c = cell.anchor;
            for (bit, &a) in axes.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    c[a] += 1;
                }
            }
            out.push(self.vertex_index(&c));
        }
        out
    }

    /// Indices of the top-dimensional cells containing `cell`.
    pub fn cofaces_top(&self, cell: &CellId) -> Vec<usize> {
        let top = self.blocks[self.dim][0].clone();
        let free: Vec<usize> = (0..self.dim).filter(|&a| !cell.axes.contains(a)).collect();
        let mut out = Vec::with_capacity(1 << free.len());
        'outer: for mask in 0..(1usize << free.len()) {
            let mut c = cell.anchor;
            for (bit, &a) in free.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    if c[a] == 0 {
                        continue 'outer;
                    }
                    c[a] -= 1;
                }
            }
            if top.holds(&c) {
                out.push(top.offset + top.linear(&c));
            }
        }
        out
    }

    /// Signed faces of a cell of degree `>= 1`, as `(face index, sign)`.
    pub fn boundary(&self, cell: &CellId, out: &mut Vec<(usize, f64)>) {
        out.clear();
        for (i, a) in cell.axes.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let face_axes = cell.axes.without(a);
            let block = self.block(face_axes).expect("face block exists");
            let mut upper = cell.anchor;
            upper[a] += 1;
            out.push((block.offset + block.linear(&upper), sign));
            out.push((block.offset + block.linear(&cell.anchor), -sign));
        }
    }

    /// Signed incidence matrix `D_k` mapping `k`-cochains to `(k+1)`-cochains.
    pub fn exterior_derivative(&self, k: usize) -> Result<SparseMatrix> {
        if k >= self.dim {
            return Err(Error::Degree {
                degree: k,
                dim: self.dim,
            });
        }
        let rows = self.cell_count(k + 1);
        let cols = self.cell_count(k);
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(rows * 2 * (k + 1));
        let mut data = Vec::with_capacity(rows * 2 * (k + 1));
        let mut faces = Vec::new();
        indptr.push(0);
        self.for_each_cell(k + 1, |_, cell| {
            self.boundary(&cell, &mut faces);
            faces.sort_unstable_by_key(|&(c, _)| c);
            for &(c, s) in &faces {
                indices.push(c);
                data.push(s);
            }
            indptr.push(indices.len());
        });
        Ok(CsMat::new((rows, cols), indptr, indices, data))
    }

    /// Diagonal value of the Hodge star at degree `k`: dual `(m-k)`-volume over primal `k`-volume.
    pub fn star_value(&self, k: usize) -> f64 {
        self.spacing.powi(self.dim as i32 - 2 * k as i32)
    }

    /// Diagonal Hodge star `S_k` on the full grid.
    pub fn hodge_star(&self, k: usize) -> Result<SparseMatrix> {
        self.check_degree(k)?;
        Ok(diagonal(&vec![self.star_value(k); self.cell_count(k)]))
    }
}

/// Axis sets of size `k` among the first `dim` axes, in lexicographic order.
fn axis_sets(dim: usize, k: usize) -> Vec<AxisSet> {
    let mut sets: Vec<Vec<usize>> = (0u8..(1 << dim))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..dim).filter(|&a| m & (1 << a) != 0).collect())
        .collect();
    sets.sort();
    sets.iter().map(|s| AxisSet::from_axes(s)).collect()
}

pub fn diagonal(values: &[f64]) -> SparseMatrix {
    let n = values.len();
    CsMat::new((n, n), (0..=n).collect(), (0..n).collect(), values.to_vec())
}
