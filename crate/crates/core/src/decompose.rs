//! Three-component Hodge decomposition of cochains on a masked grid.
//!
//! A degree-`k` cochain `V` is split as
//!
//! ```text
//! V = P_n^T D_{k-1,n} W_n  +  P_t^T S_k^{-1} D_{k,t}^T S_{k+1} W_t  +  E
//! ```
//!
//! with the potentials solving
//!
//! ```text
//! L_{k-1,n} W_n = D_{k-1,n}^T S_{k,n} P_n V
//! L_{k+1,t} W_t = S_{k+1,t} D_{k,t} P_t V
//! ```
//!
//! Both systems are singular but consistent and are solved by conjugate
//! gradients from zero, which picks the minimal-norm potential. The first
//! term is curl-free, the second divergence-free, and the residual `E`
//! carries the harmonic part together with everything outside the supports.

use serde::{Deserialize, Serialize};

use crate::cochain::Cochain;
use crate::error::{Error, Result};
use crate::fields::{
    channel_pair_fields, flow_field, gradient_field, patch_topology_field, to_cube_field, to_one_form, CubeField,
    FlowDirection, VertexField,
};
use crate::grid::{build_grid, GridComplex};
use crate::image::Image;
use crate::laplacian::{assemble, EigenOptions, Variant};
use crate::linalg::{cosine, matvec, matvec_transpose, norm};
use crate::manifold::{restricted_derivative, restricted_star_diagonal, segment, Supports, VertexMask};
use crate::solver::{conjugate_gradient_with_floor, CgOptions, CgReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub variant: Variant,
    pub cg: CgOptions,
}

/// Solver and geometry figures for one decomposition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub normal_solve: CgReport,
    pub tangential_solve: CgReport,
    /// Cosines between components `(1,2)`, `(1,3)`, `(2,3)`; zero when a component
    /// is below `10 * tol * ||V||`.
    pub cosines: [f64; 3],
    pub norms: [f64; 3],
    pub input_norm: f64,
    pub normal_support: Vec<usize>,
    pub tangential_support: Vec<usize>,
}

impl Diagnostics {
    pub fn max_abs_cosine(&self) -> f64 {
        self.cosines.iter().fold(0.0, |a, c| a.max(c.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    /// Curl-free part, zero-extended to the full grid.
    pub exact: Cochain,
    /// Divergence-free part, zero-extended to the full grid.
    pub coexact: Cochain,
    /// Residual `V - exact - coexact`.
    pub harmonic: Cochain,
    /// Potential on the normal `(k-1)`-support; empty for `k = 0`.
    pub potential_normal: Vec<f64>,
    /// Potential on the tangential `(k+1)`-support; empty for `k = m`.
    pub potential_tangential: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl DecompositionResult {
    pub fn components(&self) -> [&Cochain; 3] {
        [&self.exact, &self.coexact, &self.harmonic]
    }
}

/// Residual level below which a right-hand side is indistinguishable from
/// cancellation error; `bound` is the rhs computed without cancellation.
fn roundoff_floor(bound: &[f64]) -> f64 {
    1e3 * f64::EPSILON * norm(bound)
}

/// Solves for `W_n` given a full-grid degree-`k` cochain (`k >= 1`).
pub fn solve_potential_normal(
    grid: &GridComplex,
    supports: &Supports,
    values: &[f64],
    k: usize,
    opts: &DecomposeOptions,
) -> Result<(Vec<f64>, CgReport)> {
    if k == 0 {
        return Err(Error::Degree {
            degree: k,
            dim: grid.dim(),
        });
    }
    let s = &supports.normal;
    let d = restricted_derivative(grid, s, k - 1)?;
    let mut v = s.restrict(k, values);
    if opts.variant == Variant::Hodge {
        let star = restricted_star_diagonal(grid, s, k)?;
        v.iter_mut().zip(&star).for_each(|(x, w)| *x *= w);
    }
    let rhs = matvec_transpose(&d, &v);
    let floor = roundoff_floor(&matvec_transpose(
        &d.map(|x| x.abs()),
        &v.iter().map(|x| x.abs()).collect::<Vec<_>>(),
    ));
    let lap = assemble(grid, s, k - 1, opts.variant)?;
    conjugate_gradient_with_floor(&lap.matrix, &rhs, &opts.cg, floor)
}

/// Solves for `W_t` given a full-grid degree-`k` cochain (`k < m`).
pub fn solve_potential_tangential(
    grid: &GridComplex,
    supports: &Supports,
    values: &[f64],
    k: usize,
    opts: &DecomposeOptions,
) -> Result<(Vec<f64>, CgReport)> {
    if k >= grid.dim() {
        return Err(Error::Degree {
            degree: k,
            dim: grid.dim(),
        });
    }
    let s = &supports.tangential;
    let d = restricted_derivative(grid, s, k)?;
    let v = s.restrict(k, values);
    let mut rhs = matvec(&d, &v);
    let mut bound = matvec(&d.map(|x| x.abs()), &v.iter().map(|x| x.abs()).collect::<Vec<_>>());
    if opts.variant == Variant::Hodge {
        let star = restricted_star_diagonal(grid, s, k + 1)?;
        rhs.iter_mut().zip(&star).for_each(|(x, w)| *x *= w);
        bound.iter_mut().zip(&star).for_each(|(x, w)| *x *= w);
    }
    let lap = assemble(grid, s, k + 1, opts.variant)?;
    conjugate_gradient_with_floor(&lap.matrix, &rhs, &opts.cg, roundoff_floor(&bound))
}

/// `P_n^T D_{k-1,n} W_n`.
fn exact_part(grid: &GridComplex, supports: &Supports, w: &[f64], k: usize) -> Result<Vec<f64>> {
    let s = &supports.normal;
    let d = restricted_derivative(grid, s, k - 1)?;
    Ok(s.extend(k, &matvec(&d, w)))
}

/// `P_t^T S_k^{-1} D_{k,t}^T S_{k+1} W_t`.
fn coexact_part(grid: &GridComplex, supports: &Supports, w: &[f64], k: usize, variant: Variant) -> Result<Vec<f64>> {
    let s = &supports.tangential;
    let d = restricted_derivative(grid, s, k)?;
    let local = match variant {
        Variant::Big => matvec_transpose(&d, w),
        Variant::Hodge => {
            let up = restricted_star_diagonal(grid, s, k + 1)?;
            let here = restricted_star_diagonal(grid, s, k)?;
            let sw: Vec<f64> = w.iter().zip(&up).map(|(x, s)| x * s).collect();
            matvec_transpose(&d, &sw)
                .into_iter()
                .zip(&here)
                .map(|(x, s)| x / s)
                .collect()
        }
    };
    Ok(s.extend(k, &local))
}

/// Decomposes a full-grid cochain against the supports of `mask`.
pub fn hodge_decompose(
    form: &Cochain,
    grid: &GridComplex,
    mask: &VertexMask,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult> {
    let supports = Supports::build(grid, mask)?;
    hodge_decompose_with(form, grid, &supports, opts)
}

/// Like [`hodge_decompose`] with prebuilt supports.
pub fn hodge_decompose_with(
    form: &Cochain,
    grid: &GridComplex,
    supports: &Supports,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult> {
    let k = form.degree();
    let n = grid.cell_count(k);
    if form.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected a full-grid {k}-cochain with {n} values, got {}",
            form.len()
        )));
    }
    let v = form.values();
    let normal = || -> Result<(Vec<f64>, Vec<f64>, CgReport)> {
        if k == 0 {
            return Ok((Vec::new(), vec![0.0; n], CgReport::default()));
        }
        let (w, rep) = solve_potential_normal(grid, supports, v, k, opts)?;
        let part = exact_part(grid, supports, &w, k)?;
        Ok((w, part, rep))
    };
    let tangential = || -> Result<(Vec<f64>, Vec<f64>, CgReport)> {
        if k >= grid.dim() {
            return Ok((Vec::new(), vec![0.0; n], CgReport::default()));
        }
        let (w, rep) = solve_potential_tangential(grid, supports, v, k, opts)?;
        let part = coexact_part(grid, supports, &w, k, opts.variant)?;
        Ok((w, part, rep))
    };
    let (nres, tres) = rayon::join(normal, tangential);
    let (w_n, omega1, rep_n) = nres?;
    let (w_t, omega2, rep_t) = tres?;
    let omega3: Vec<f64> = v
        .iter()
        .zip(&omega1)
        .zip(&omega2)
        .map(|((x, a), b)| x - a - b)
        .collect();

    // below solver accuracy a component is noise and its direction meaningless
    let negligible = 10.0 * opts.cg.tol * norm(v);
    let cos = |a: &[f64], b: &[f64]| {
        if norm(a) <= negligible || norm(b) <= negligible {
            0.0
        } else {
            cosine(a, b)
        }
    };
    let diagnostics = Diagnostics {
        normal_solve: rep_n,
        tangential_solve: rep_t,
        cosines: [cos(&omega1, &omega2), cos(&omega1, &omega3), cos(&omega2, &omega3)],
        norms: [norm(&omega1), norm(&omega2), norm(&omega3)],
        input_norm: norm(v),
        normal_support: supports.normal.sizes(),
        tangential_support: supports.tangential.sizes(),
    };
    Ok(DecompositionResult {
        exact: Cochain::full(grid, k, omega1)?,
        coexact: Cochain::full(grid, k, omega2)?,
        harmonic: Cochain::full(grid, k, omega3)?,
        potential_normal: w_n,
        potential_tangential: w_t,
        diagnostics,
    })
}

/// How a vertex vector field is derived from an image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FieldMethod {
    Gradient {
        s: usize,
        t: usize,
    },
    Flow {
        direction: FlowDirection,
    },
    /// One field per channel pair of an RGB image.
    ChannelPair,
    /// Betti numbers of `patch_edge`-sized patches.
    Patch {
        patch_edge: usize,
    },
}

impl Default for FieldMethod {
    fn default() -> Self {
        FieldMethod::Gradient { s: 1, t: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub method: FieldMethod,
    /// Foreground threshold: a pixel is inside when its intensity is at least this.
    pub threshold: f64,
    pub options: DecomposeOptions,
    pub eigen: EigenOptions,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            method: FieldMethod::default(),
            threshold: 1.0,
            options: DecomposeOptions::default(),
            eigen: EigenOptions::default(),
        }
    }
}

/// Cube-centered components of one or more decompositions.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedImage {
    pub extents: Vec<usize>,
    /// Per decomposition: curl-free, divergence-free, harmonic.
    pub parts: Vec<[CubeField; 3]>,
}

impl DecomposedImage {
    pub fn channels(&self) -> usize {
        self.parts.len() * 3 * self.extents.len()
    }

    /// `[channels, extents..]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.channels()];
        s.extend(&self.extents);
        s
    }

    /// Channel-major tensor: for each decomposition, the `m` curl-free
    /// channels, then divergence-free, then harmonic.
    pub fn tensor(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.channels() * self.extents.iter().product::<usize>());
        for part in &self.parts {
            for field in part {
                for comp in &field.components {
                    out.extend(comp.iter().map(|&v| v as f32));
                }
            }
        }
        out
    }
}

/// Field extraction, decomposition and cube averaging for one image.
///
/// 2D images may have 1 or 3 channels, 3D images 1. RGB images are reduced
/// to luminance unless the channel-pair method is selected, which yields
/// three decompositions. The patch method decomposes on the grid of patches,
/// masked by thresholding the patch means.
pub fn decomposed_image(image: &Image, params: &DecomposeParams) -> Result<(DecomposedImage, Vec<Diagnostics>)> {
    let m = image.dim();
    match (m, image.channels()) {
        (2, 1) | (2, 3) | (3, 1) => {}
        (m, c) => {
            return Err(Error::InvalidInput(format!(
                "unsupported image: {m} axes with {c} channels"
            )))
        }
    }
    if let Some(i) = image.data().iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value {} at flat index {i}",
            image.data()[i]
        )));
    }
    let dims = image.dims();
    let intensity = image.intensity()?;
    let (grid, mask_values, fields): (GridComplex, Vec<f64>, Vec<VertexField>) = match params.method {
        FieldMethod::Gradient { s, t } => (
            build_grid(dims, 1.0)?,
            intensity.clone(),
            vec![gradient_field(&intensity, dims, s, t)?],
        ),
        FieldMethod::Flow { direction } => (
            build_grid(dims, 1.0)?,
            intensity.clone(),
            vec![flow_field(&intensity, dims, direction)?],
        ),
        FieldMethod::ChannelPair => (
            build_grid(dims, 1.0)?,
            intensity.clone(),
            channel_pair_fields(image)?.to_vec(),
        ),
        FieldMethod::Patch { patch_edge } => {
            let field = patch_topology_field(&intensity, dims, patch_edge, params.threshold, &params.eigen)?;
            let grid = build_grid(&field.dims, 1.0)?;
            let means = patch_means(&intensity, dims, patch_edge);
            (grid, means, vec![field])
        }
    };
    let mask = segment(&grid, &mask_values, params.threshold)?;
    let supports = Supports::build(&grid, &mask)?;
    let mut parts = Vec::with_capacity(fields.len());
    let mut diags = Vec::with_capacity(fields.len());
    for field in &fields {
        let form = to_one_form(field, &grid)?;
        let res = hodge_decompose_with(&form, &grid, &supports, &params.options)?;
        parts.push([
            to_cube_field(&res.exact, &grid)?,
            to_cube_field(&res.coexact, &grid)?,
            to_cube_field(&res.harmonic, &grid)?,
        ]);
        diags.push(res.diagnostics);
    }
    Ok((
        DecomposedImage {
            extents: grid.cube_extents(),
            parts,
        },
        diags,
    ))
}

fn patch_means(image: &[f64], dims: &[usize], edge: usize) -> Vec<f64> {
    let m = dims.len();
    let pdims: Vec<usize> = dims.iter().map(|d| d / edge).collect();
    let mut sums = vec![0.0; pdims.iter().product()];
    for (v, &val) in image.iter().enumerate() {
        let mut rem = v;
        let mut p = 0;
        let mut stride = 1;
        for a in (0..m).rev() {
            let c = rem % dims[a];
            rem /= dims[a];
            p += (c / edge) * stride;
            stride *= pdims[a];
        }
        sums[p] += val;
    }
    let count = edge.pow(m as u32) as f64;
    sums.iter().map(|s| s / count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn zero_input_gives_zero_components() {
        let g = build_grid(&[6, 6], 1.0).unwrap();
        let res = hodge_decompose(
            &Cochain::zeros(&g, 1).unwrap(),
            &g,
            &VertexMask::all_inside(&g),
            &DecomposeOptions::default(),
        )
        .unwrap();
        for c in res.components() {
            assert!(c.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_goes_to_first_component() {
        let g = build_grid(&[6, 6], 1.0).unwrap();
        let d0 = g.exterior_derivative(0).unwrap();
        let u: Vec<f64> = (0..36).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let v = matvec(&d0, &u);
        let res = hodge_decompose(
            &Cochain::full(&g, 1, v.clone()).unwrap(),
            &g,
            &VertexMask::all_inside(&g),
            &DecomposeOptions::default(),
        )
        .unwrap();
        let err: Vec<f64> = v.iter().zip(res.exact.values()).map(|(a, b)| a - b).collect();
        assert!(norm(&err) <= 1e-8 * norm(&v));
        assert!(res.coexact.norm() <= 1e-6 * norm(&v));
    }

    #[test]
    fn components_are_orthogonal_on_a_masked_grid() {
        let g = build_grid(&[9, 9], 1.0).unwrap();
        let img: Vec<f64> = (0..81).map(|i| ((i * 29) % 17) as f64).collect();
        let mask = segment(&g, &img, 6.0).unwrap();
        let v: Vec<f64> = (0..g.cell_count(1)).map(|i| ((i * 31) % 11) as f64 - 5.0).collect();
        let res = hodge_decompose(
            &Cochain::full(&g, 1, v.clone()).unwrap(),
            &g,
            &mask,
            &DecomposeOptions::default(),
        )
        .unwrap();
        let [a, b, c] = res.components();
        assert!(dot(a.values(), b.values()).abs() <= 1e-8 * a.norm() * b.norm());
        assert!(res.diagnostics.max_abs_cosine() < 1e-8);
        for i in 0..v.len() {
            assert_eq!(c.values()[i], v[i] - a.values()[i] - b.values()[i]);
        }
    }

    #[test]
    fn rejects_non_finite_pixels() {
        let mut data = vec![1.0; 16];
        data[5] = f64::NAN;
        let img = Image::gray(vec![4, 4], data).unwrap();
        assert!(matches!(
            decomposed_image(&img, &DecomposeParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn decomposed_image_shapes() {
        let img = Image::gray(vec![8, 7], vec![0.0; 56]).unwrap();
        let (out, _) = decomposed_image(&img, &DecomposeParams::default()).unwrap();
        assert_eq!(out.shape(), vec![6, 7, 6]);
        assert!(out.tensor().iter().all(|&v| v == 0.0));

        let rgb = Image::new(vec![5, 5], 3, vec![1.0; 75]).unwrap();
        let params = DecomposeParams {
            method: FieldMethod::ChannelPair,
            ..DecomposeParams::default()
        };
        let (out, diags) = decomposed_image(&rgb, &params).unwrap();
        assert_eq!(out.shape(), vec![18, 4, 4]);
        assert_eq!(diags.len(), 3);

        let vol = Image::gray(vec![4, 4, 4], vec![1.0; 64]).unwrap();
        let (out, _) = decomposed_image(&vol, &DecomposeParams::default()).unwrap();
        assert_eq!(out.shape(), vec![9, 3, 3, 3]);

        let bad = Image::new(vec![4, 4, 4], 3, vec![0.0; 192]).unwrap();
        assert!(decomposed_image(&bad, &DecomposeParams::default()).is_err());
    }

    #[test]
    fn patch_method_uses_patch_grid() {
        let img = Image::gray(vec![12, 12], vec![1.0; 144]).unwrap();
        let params = DecomposeParams {
            method: FieldMethod::Patch { patch_edge: 4 },
            threshold: 0.5,
            ..DecomposeParams::default()
        };
        let (out, _) = decomposed_image(&img, &params).unwrap();
        assert_eq!(out.shape(), vec![6, 2, 2]);
        // constant (1, 0) field on an all-inside grid is a gradient
        let t = out.tensor();
        assert!((t[0] - 1.0).abs() < 1e-6);
    }
}
