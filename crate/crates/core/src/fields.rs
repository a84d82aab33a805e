//! Vector fields derived from images, and their conversion to edge 1-forms
//! and cube-centered vector images.
//!
//! Component `a` of a field is the coordinate along grid axis `a`, so for a
//! 2D image indexed `(i, j)` the x-component runs along rows `i`.

use serde::{Deserialize, Serialize};

use crate::cochain::Cochain;
use crate::error::{Error, Result};
use crate::grid::{build_grid, AxisSet, CellId, GridComplex};
use crate::image::Image;
use crate::laplacian::{betti_numbers, EigenOptions, Variant};
use crate::manifold::{segment, BoundaryCondition};

/// An `m`-component vector per grid vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexField {
    pub dims: Vec<usize>,
    /// `components[a][v]`, vertices in row-major order.
    pub components: Vec<Vec<f64>>,
}

/// An `m`-component vector per top-dimensional cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeField {
    /// Cube-grid extents, `dims - 1` per axis.
    pub extents: Vec<usize>,
    /// `components[a][c]`, cubes in row-major order.
    pub components: Vec<Vec<f64>>,
}

impl VertexField {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        VertexField {
            dims: dims.to_vec(),
            components: vec![vec![0.0; n]; dims.len()],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn vector(&self, v: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[v]).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Toward strictly smaller neighbors.
    #[default]
    Descend,
    /// Toward strictly larger neighbors.
    Ascend,
}

impl std::str::FromStr for FlowDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descend" => Ok(FlowDirection::Descend),
            "ascend" => Ok(FlowDirection::Ascend),
            other => Err(Error::Parameter(format!("unknown flow direction `{other}`"))),
        }
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

fn coords_of(mut idx: usize, dims: &[usize]) -> [usize; 3] {
    let mut c = [0; 3];
    for a in (0..dims.len()).rev() {
        c[a] = idx % dims[a];
        idx /= dims[a];
    }
    c
}

/// Shifted centered differences `(I(p + s e_a) - I(p - t e_a)) / 2` per axis,
/// with out-of-range samples clamped to the nearest vertex.
pub fn gradient_field(image: &[f64], dims: &[usize], s: usize, t: usize) -> Result<VertexField> {
    let n: usize = dims.iter().product();
    if image.len() != n {
        return Err(Error::InvalidInput(format!(
            "image has {} values, dims {dims:?} need {n}",
            image.len()
        )));
    }
    if s == 0 || t == 0 {
        return Err(Error::Parameter("gradient steps s and t must be at least 1".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| s >= d || t >= d) {
        return Err(Error::Parameter(format!(
            "gradient steps s={s}, t={t} must be smaller than every extent (found {d})"
        )));
    }
    let st = strides(dims);
    let mut field = VertexField::zeros(dims);
    for v in 0..n {
        let c = coords_of(v, dims);
        for a in 0..dims.len() {
            let fwd = (c[a] + s).min(dims[a] - 1);
            let bwd = c[a].saturating_sub(t);
            let base = v - c[a] * st[a];
            field.components[a][v] = 0.5 * (image[base + fwd * st[a]] - image[base + bwd * st[a]]);
        }
    }
    Ok(field)
}

/// Steepest-neighbor flow over the full (8- or 26-) neighborhood.
///
/// Among strictly smaller (or larger, for [`FlowDirection::Ascend`])
/// neighbors, the extremal ones are selected, their unit directions are
/// averaged and renormalized, and the result is scaled by the vertex value.
/// Vertices without such neighbors, or whose averaged direction cancels,
/// get the zero vector.
pub fn flow_field(image: &[f64], dims: &[usize], direction: FlowDirection) -> Result<VertexField> {
    let n: usize = dims.iter().product();
    if image.len() != n {
        return Err(Error::InvalidInput(format!(
            "image has {} values, dims {dims:?} need {n}",
            image.len()
        )));
    }
    let m = dims.len();
    let st = strides(dims);
    let offsets = neighbor_offsets(m);
    let sign = match direction {
        FlowDirection::Descend => 1.0,
        FlowDirection::Ascend => -1.0,
    };
    let mut field = VertexField::zeros(dims);
    let mut best: Vec<&[i64]> = Vec::new();
    for v in 0..n {
        let c = coords_of(v, dims);
        // compare on sign * value so both directions look for a minimum
        let here = sign * image[v];
        let mut lowest = here;
        best.clear();
        for off in &offsets {
            let mut w = v as i64;
            let mut valid = true;
            for a in 0..m {
                let x = c[a] as i64 + off[a];
                if x < 0 || x >= dims[a] as i64 {
                    valid = false;
                    break;
                }
                w += off[a] * st[a] as i64;
            }
            if !valid {
                continue;
            }
            let val = sign * image[w as usize];
            if val < lowest {
                lowest = val;
                best.clear();
                best.push(off);
            } else if val == lowest && val < here {
                best.push(off);
            }
        }
        if best.is_empty() {
            continue;
        }
        let mut dir = [0.0; 3];
        for off in &best {
            let len = off.iter().map(|&o| (o * o) as f64).sum::<f64>().sqrt();
            for (d, &o) in dir.iter_mut().zip(off.iter()) {
                *d += o as f64 / len;
            }
        }
        let len = dir[..m].iter().map(|d| d * d).sum::<f64>().sqrt();
        if len <= 1e-12 * best.len() as f64 {
            continue;
        }
        for (comp, d) in field.components.iter_mut().zip(dir) {
            comp[v] = d / len * image[v];
        }
    }
    Ok(field)
}

fn neighbor_offsets(m: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-1..=1).map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
    }
    out.retain(|o| o.iter().any(|&d| d != 0));
    out
}

/// Fields built from the channel pairs (r, g), (r, b) and (g, b) of a 2D RGB image.
pub fn channel_pair_fields(image: &Image) -> Result<[VertexField; 3]> {
    if image.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "channel-pair fields need 3 channels, got {}",
            image.channels()
        )));
    }
    if image.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "channel-pair fields need a 2D image, got {} axes",
            image.dim()
        )));
    }
    let ch: Vec<Vec<f64>> = (0..3).map(|c| image.channel(c)).collect();
    let pair = |a: usize, b: usize| VertexField {
        dims: image.dims().to_vec(),
        components: vec![ch[a].clone(), ch[b].clone()],
    };
    Ok([pair(0, 1), pair(0, 2), pair(1, 2)])
}

/// Betti numbers `(beta_0, .., beta_{m-1})` of every thresholded patch,
/// laid out on the grid of patches.
///
/// Patches are binarized with `threshold` and analyzed under the
/// tangential condition. Patches with no foreground get the zero vector.
pub fn patch_topology_field(
    image: &[f64],
    dims: &[usize],
    patch_edge: usize,
    threshold: f64,
    opts: &EigenOptions,
) -> Result<VertexField> {
    let n: usize = dims.iter().product();
    if image.len() != n {
        return Err(Error::InvalidInput(format!(
            "image has {} values, dims {dims:?} need {n}",
            image.len()
        )));
    }
    if patch_edge < 2 {
        return Err(Error::Parameter("patch edge must be at least 2".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d % patch_edge != 0) {
        return Err(Error::Parameter(format!(
            "extent {d} is not divisible by patch edge {patch_edge}"
        )));
    }
    let m = dims.len();
    let patch_dims: Vec<usize> = dims.iter().map(|d| d / patch_edge).collect();
    let local_dims = vec![patch_edge; m];
    let grid = build_grid(&local_dims, 1.0)?;
    let st = strides(dims);
    let local_n = grid.vertex_count();
    let mut field = VertexField::zeros(&patch_dims);
    let mut values = vec![0.0; local_n];
    for p in 0..field.vertex_count() {
        let pc = coords_of(p, &patch_dims);
        for (l, value) in values.iter_mut().enumerate() {
            let lc = coords_of(l, &local_dims);
            let idx: usize = (0..m).map(|a| (pc[a] * patch_edge + lc[a]) * st[a]).sum();
            *value = image[idx];
        }
        let mask = segment(&grid, &values, threshold)?;
        if mask.is_empty() {
            continue;
        }
        let betti = betti_numbers(&grid, &mask, BoundaryCondition::Tangential, Variant::Big, opts)?;
        for (a, b) in betti.into_iter().enumerate() {
            field.components[a][p] = b as f64;
        }
    }
    Ok(field)
}

/// Averages endpoint components onto edges: an edge along axis `a` gets the
/// mean of the `a`-components at its two ends.
pub fn to_one_form(field: &VertexField, grid: &GridComplex) -> Result<Cochain> {
    if field.dims != grid.dims() || field.components.len() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "field of dims {:?} does not match grid dims {:?}",
            field.dims,
            grid.dims()
        )));
    }
    let st = strides(grid.dims());
    let mut values = vec![0.0; grid.cell_count(1)];
    grid.for_each_cell(1, |i, cell| {
        let a = cell.axes.iter().next().expect("edge has one axis");
        let v = grid.vertex_index(&cell.anchor[..grid.dim()]);
        let comp = &field.components[a];
        values[i] = 0.5 * (comp[v] + comp[v + st[a]]);
    });
    Cochain::full(grid, 1, values)
}

/// Cube-centered vectors: component `a` of a cube is the mean of its
/// `2^(m-1)` edges along axis `a`.
pub fn to_cube_field(form: &Cochain, grid: &GridComplex) -> Result<CubeField> {
    if form.degree() != 1 || form.len() != grid.cell_count(1) {
        return Err(Error::InvalidInput(format!(
            "expected a full-grid 1-cochain with {} values",
            grid.cell_count(1)
        )));
    }
    let m = grid.dim();
    let values = form.values();
    let corners = 1usize << (m - 1);
    let scale = 1.0 / corners as f64;
    let mut components = vec![vec![0.0; grid.cell_count(m)]; m];
    grid.for_each_cell(m, |c, cube| {
        for (a, comp) in components.iter_mut().enumerate() {
            let others: Vec<usize> = (0..m).filter(|&b| b != a).collect();
            let mut sum = 0.0;
            for bits in 0..corners {
                let mut anchor = cube.anchor;
                for (j, &b) in others.iter().enumerate() {
                    anchor[b] += (bits >> j) & 1;
                }
                let edge = CellId::new(AxisSet::single(a), anchor);
                sum += values[grid.index_of(&edge).expect("edge of a cube is on the grid")];
            }
            comp[c] = sum * scale;
        }
    });
    Ok(CubeField {
        extents: grid.cube_extents(),
        components,
    })
}
