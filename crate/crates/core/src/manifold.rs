//! Discrete manifold-with-boundary extracted from an image.
//!
//! The manifold is the set of grid vertices whose value reaches a threshold.
//! Two cell supports are derived from it:
//!
//! * normal: a cell is included when at least one of its vertices is inside;
//! * tangential: a cell is included when at least one vertex of its dual cell
//!   is inside. Dual vertices are the centers of top-dimensional cells, and a
//!   center counts as inside when the mean of the cell's corner values reaches
//!   the threshold (multilinear interpolation at the center).
//!
//! The normal support is closed under cofaces and the tangential support is
//! closed under faces, so both restricted derivatives still square to zero.

use serde::{Deserialize, Serialize};
use sprs::CsMat;

use crate::cochain::SupportTag;
use crate::error::{Error, Result};
use crate::grid::{diagonal, GridComplex, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Normal,
    Tangential,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 2] = [BoundaryCondition::Normal, BoundaryCondition::Tangential];

    pub fn tag(self) -> SupportTag {
        match self {
            BoundaryCondition::Normal => SupportTag::Normal,
            BoundaryCondition::Tangential => SupportTag::Tangential,
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "n" => Ok(BoundaryCondition::Normal),
            "tangential" | "t" => Ok(BoundaryCondition::Tangential),
            other => Err(Error::Parameter(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// Inside flags for grid vertices and for the centers of top-dimensional cells.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexMask {
    dims: Vec<usize>,
    inside: Vec<bool>,
    dual_inside: Vec<bool>,
}

/// Thresholds a vertex scalar field: `inside[v] = image[v] >= threshold`.
pub fn segment(grid: &GridComplex, image: &[f64], threshold: f64) -> Result<VertexMask> {
    VertexMask::from_values(grid, image, threshold)
}

impl VertexMask {
    pub fn from_values(grid: &GridComplex, values: &[f64], threshold: f64) -> Result<Self> {
        if values.len() != grid.vertex_count() {
            return Err(Error::InvalidInput(format!(
                "image has {} values but the grid has {} vertices",
                values.len(),
                grid.vertex_count()
            )));
        }
        let inside = values.iter().map(|&v| v >= threshold).collect();
        let dual_inside = top_cell_means(grid, values)
            .into_iter()
            .map(|mean| mean >= threshold)
            .collect();
        Ok(VertexMask {
            dims: grid.dims().to_vec(),
            inside,
            dual_inside,
        })
    }

    /// Mask from vertex flags alone. The flags are read as a 0/1 image with
    /// iso-level 1/2, so a cell center is inside when at least half of the
    /// cell's corners are.
    pub fn from_inside(grid: &GridComplex, inside: Vec<bool>) -> Result<Self> {
        let values: Vec<f64> = inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self::from_values(grid, &values, 0.5)
    }

    pub fn all_inside(grid: &GridComplex) -> Self {
        VertexMask {
            dims: grid.dims().to_vec(),
            inside: vec![true; grid.vertex_count()],
            dual_inside: vec![true; grid.cell_count(grid.dim())],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn dual_inside(&self) -> &[bool] {
        &self.dual_inside
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// No vertex inside; allowed, but worth flagging.
    pub fn is_empty(&self) -> bool {
        self.inside_count() == 0
    }

    fn check(&self, grid: &GridComplex) -> Result<()> {
        if self.dims != grid.dims() {
            return Err(Error::InvalidInput(format!(
                "mask dims {:?} do not match grid dims {:?}",
                self.dims,
                grid.dims()
            )));
        }
        Ok(())
    }
}

fn top_cell_means(grid: &GridComplex, values: &[f64]) -> Vec<f64> {
    let m = grid.dim();
    let mut means = vec![0.0; grid.cell_count(m)];
    let scale = 1.0 / (1usize << m) as f64;
    grid.for_each_cell(m, |i, cell| {
        let sum: f64 = grid.cell_vertices(&cell).iter().map(|&v| values[v]).sum();
        means[i] = sum * scale;
    });
    means
}

/// Cells included under one boundary condition, with the projections `P_k`.
#[derive(Clone, Debug)]
pub struct SupportSet {
    condition: BoundaryCondition,
    masks: Vec<Vec<bool>>,
    cells: Vec<Vec<usize>>,
    local: Vec<Vec<usize>>,
}

const EXCLUDED: usize = usize::MAX;

pub fn build_support(grid: &GridComplex, mask: &VertexMask, condition: BoundaryCondition) -> Result<SupportSet> {
    mask.check(grid)?;
    let m = grid.dim();
    let mut masks = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut included = vec![false; grid.cell_count(k)];
        grid.for_each_cell(k, |i, cell| {
            included[i] = match condition {
                BoundaryCondition::Normal => grid.cell_vertices(&cell).iter().any(|&v| mask.inside[v]),
                BoundaryCondition::Tangential => grid.cofaces_top(&cell).iter().any(|&c| mask.dual_inside[c]),
            };
        });
        masks.push(included);
    }
    Ok(SupportSet::from_masks(condition, masks))
}

impl SupportSet {
    fn from_masks(condition: BoundaryCondition, masks: Vec<Vec<bool>>) -> Self {
        let mut cells = Vec::with_capacity(masks.len());
        let mut local = Vec::with_capacity(masks.len());
        for mask in &masks {
            let mut list = Vec::new();
            let mut map = vec![EXCLUDED; mask.len()];
            for (i, &inc) in mask.iter().enumerate() {
                if inc {
                    map[i] = list.len();
                    list.push(i);
                }
            }
            cells.push(list);
            local.push(map);
        }
        SupportSet {
            condition,
            masks,
            cells,
            local,
        }
    }

    pub fn condition(&self) -> BoundaryCondition {
        self.condition
    }

    pub fn max_degree(&self) -> usize {
        self.masks.len() - 1
    }

    pub fn mask(&self, k: usize) -> &[bool] {
        &self.masks[k]
    }

    /// Grid indices of the included `k`-cells, ascending.
    pub fn cells(&self, k: usize) -> &[usize] {
        &self.cells[k]
    }

    pub fn len(&self, k: usize) -> usize {
        self.cells.get(k).map_or(0, Vec::len)
    }

    /// Included cell counts per degree.
    pub fn sizes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Vec::is_empty)
    }

    pub fn local_index(&self, k: usize, grid_index: usize) -> Option<usize> {
        match self.local[k][grid_index] {
            EXCLUDED => None,
            i => Some(i),
        }
    }

    /// Row-selection matrix `P_k`: one unit entry per included cell.
    pub fn projection(&self, k: usize) -> SparseMatrix {
        let rows = self.cells[k].len();
        let cols = self.masks[k].len();
        CsMat::new(
            (rows, cols),
            (0..=rows).collect(),
            self.cells[k].clone(),
            vec![1.0; rows],
        )
    }

    /// `P_k v` for a full-grid vector.
    pub fn restrict(&self, k: usize, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.masks[k].len());
        self.cells[k].iter().map(|&i| full[i]).collect()
    }

    /// `P_k^T v`: zero extension of a support vector to the full grid.
    pub fn extend(&self, k: usize, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.cells[k].len());
        let mut full = vec![0.0; self.masks[k].len()];
        for (&i, &v) in self.cells[k].iter().zip(values) {
            full[i] = v;
        }
        full
    }
}

/// `D_{k,bc} = P_{k+1} D_k P_k^T`.
pub fn restricted_derivative(grid: &GridComplex, s: &SupportSet, k: usize) -> Result<SparseMatrix> {
    if k >= grid.dim() {
        return Err(Error::Degree {
            degree: k,
            dim: grid.dim(),
        });
    }
    let rows = s.len(k + 1);
    let cols = s.len(k);
    let mut indptr = Vec::with_capacity(rows + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut faces = Vec::new();
    let mut row = Vec::new();
    indptr.push(0);
    for &ci in s.cells(k + 1) {
        let cell = grid.cell(k + 1, ci).expect("support index within grid");
        grid.boundary(&cell, &mut faces);
        row.clear();
        row.extend(
            faces
                .iter()
                .filter_map(|&(f, sign)| s.local_index(k, f).map(|l| (l, sign))),
        );
        row.sort_unstable_by_key(|&(c, _)| c);
        for &(c, v) in &row {
            indices.push(c);
            data.push(v);
        }
        indptr.push(indices.len());
    }
    Ok(CsMat::new((rows, cols), indptr, indices, data))
}

/// Diagonal of `S_{k,bc} = P_k S_k P_k^T`.
pub fn restricted_star_diagonal(grid: &GridComplex, s: &SupportSet, k: usize) -> Result<Vec<f64>> {
    grid.check_degree(k)?;
    Ok(vec![grid.star_value(k); s.len(k)])
}

pub fn restricted_star(grid: &GridComplex, s: &SupportSet, k: usize) -> Result<SparseMatrix> {
    Ok(diagonal(&restricted_star_diagonal(grid, s, k)?))
}

/// Normal and tangential supports of one mask.
#[derive(Clone, Debug)]
pub struct Supports {
    pub normal: SupportSet,
    pub tangential: SupportSet,
}

impl Supports {
    pub fn build(grid: &GridComplex, mask: &VertexMask) -> Result<Self> {
        Ok(Supports {
            normal: build_support(grid, mask, BoundaryCondition::Normal)?,
            tangential: build_support(grid, mask, BoundaryCondition::Tangential)?,
        })
    }

    pub fn get(&self, condition: BoundaryCondition) -> &SupportSet {
        match condition {
            BoundaryCondition::Normal => &self.normal,
            BoundaryCondition::Tangential => &self.tangential,
        }
    }
}
