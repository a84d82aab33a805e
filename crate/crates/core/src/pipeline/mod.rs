//! Batch processing of image archives: decomposition, Betti reports,
//! spectra and raster export.
//!
//! Images are processed on a fixed-size worker pool and results are
//! gathered in input order, so outputs do not depend on scheduling.

pub mod archive;
pub mod config;
pub mod raster;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use archive::{list_arrays, read_dataset, ArrayInfo, Dataset};
pub use config::{MethodName, PipelineConfig, WORKERS_ENV};

use crate::decompose::{decomposed_image, DecomposedImage, Diagnostics, FieldMethod};
use crate::error::{Error, Result};
use crate::fields::CubeField;
use crate::grid::{build_grid, GridComplex};
use crate::image::Image;
use crate::laplacian::{assemble, betti_numbers, harmonic_space, spectrum};
use crate::manifold::{build_support, segment, BoundaryCondition, SupportSet};

/// Component names in channel order.
pub const COMPONENTS: [&str; 3] = ["curl_free", "div_free", "harmonic"];

/// Outcome of a batch run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub processed: usize,
    /// Indices of images that failed and were left out.
    pub skipped: Vec<usize>,
    /// Files written besides the main output.
    pub written: Vec<String>,
}

impl RunSummary {
    /// 0 when every image went through, 1 when some were skipped.
    pub fn exit_code(&self) -> i32 {
        if self.skipped.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Foreground threshold for a dataset: the configured one, else 1 for
/// integer images, else 1/255 of the intensity range above the minimum.
pub fn resolve_threshold(cfg: &PipelineConfig, ds: &Dataset) -> Result<f64> {
    if let Some(t) = cfg.threshold {
        return Ok(t);
    }
    if ds.integer {
        return Ok(1.0);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for img in &ds.images {
        // non-finite pixels are reported per image later
        for v in img.intensity()?.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return Ok(0.0);
    }
    Ok(lo + (hi - lo) / 255.0)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn load(cfg: &PipelineConfig) -> Result<(Dataset, f64, PipelineConfig)> {
    cfg.validate()?;
    let ds = read_dataset(&cfg.input, cfg.split.as_deref())?;
    let threshold = resolve_threshold(cfg, &ds)?;
    let effective = PipelineConfig {
        threshold: Some(threshold),
        ..cfg.clone()
    };
    Ok((ds, threshold, effective))
}

/// Channel count and spatial extents the decomposition of an image of
/// these dims produces.
pub fn output_shape(cfg: &PipelineConfig, dims: &[usize]) -> Vec<usize> {
    let m = dims.len();
    let (grid_dims, fields): (Vec<usize>, usize) = match cfg.field_method() {
        FieldMethod::ChannelPair => (dims.to_vec(), 3),
        FieldMethod::Patch { patch_edge } => (dims.iter().map(|d| d / patch_edge).collect(), 1),
        _ => (dims.to_vec(), 1),
    };
    let mut shape = vec![3 * m * fields];
    shape.extend(grid_dims.iter().map(|d| d.saturating_sub(1)));
    shape
}

fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("json")
}

type Decomposed = (DecomposedImage, Vec<Diagnostics>);

fn decompose_all(cfg: &PipelineConfig, images: &[Image], threshold: f64) -> Result<Vec<Result<Decomposed>>> {
    let params = cfg.decompose_params(threshold);
    let results = pool(cfg.workers)?.install(|| images.par_iter().map(|img| decomposed_image(img, &params)).collect());
    Ok(results)
}

/// Decomposes every image of the input archive into the output archive.
///
/// The archive holds `decomposed` as `float32` of shape `(N, C, spatial..)`,
/// `labels` copied unchanged, and `indices` of the written images when some
/// were skipped. A JSON sidecar next to the output records the effective
/// config, its hash and per-image diagnostics.
pub fn run_decompose(cfg: &PipelineConfig) -> Result<RunSummary> {
    let (ds, threshold, effective) = load(cfg)?;
    let results = decompose_all(cfg, &ds.images, threshold)?;

    let dims = ds.images.first().map(|i| i.dims().to_vec()).unwrap_or_default();
    let per_shape = output_shape(cfg, &dims);
    let mut tensor: Vec<f32> = Vec::new();
    let mut kept: Vec<i64> = Vec::new();
    let mut records = Vec::with_capacity(results.len());
    let mut summary = RunSummary::default();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok((out, diags)) if out.shape() == per_shape => {
                tensor.extend(out.tensor());
                kept.push(i as i64);
                records.push(json!({"index": i, "status": "ok", "diagnostics": diags}));
                summary.processed += 1;
            }
            Ok((out, _)) => {
                let msg = format!("shape {:?} differs from {:?}", out.shape(), per_shape);
                records.push(json!({"index": i, "status": "skipped", "error": msg}));
                summary.skipped.push(i);
            }
            Err(e) => {
                records.push(json!({"index": i, "status": "skipped", "error": e.to_string()}));
                summary.skipped.push(i);
            }
        }
    }

    let mut shape = vec![kept.len()];
    shape.extend(&per_shape);
    let decomposed = archive::npy_bytes(tensor, &shape)?;
    let mut entries: Vec<(&str, &[u8])> = vec![("decomposed", &decomposed)];
    if let Some(labels) = &ds.labels {
        entries.push(("labels", labels));
    }
    let indices;
    if !summary.skipped.is_empty() {
        indices = archive::npy_bytes(kept.clone(), &[kept.len()])?;
        entries.push(("indices", &indices));
    }
    archive::write_archive(&cfg.output, &entries)?;

    let sidecar = json!({
        "config": effective,
        "config_hash": effective.hash()?,
        "threshold": threshold,
        "input_shape": ds.shape,
        "output_shape": shape,
        "skipped": summary.skipped,
        "images": records,
    });
    let path = sidecar_path(&cfg.output);
    write_json(&path, &sidecar)?;
    summary.written.push(path.display().to_string());
    Ok(summary)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Archive(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn image_grid(img: &Image, threshold: f64) -> Result<(GridComplex, crate::manifold::VertexMask)> {
    let grid = build_grid(img.dims(), 1.0)?;
    let mask = segment(&grid, &img.intensity()?, threshold)?;
    Ok((grid, mask))
}

/// Per-image Betti numbers under both boundary conditions; `null` for
/// images without foreground. With `k`, only `beta_k` is reported.
pub fn run_betti(cfg: &PipelineConfig, k: Option<usize>) -> Result<(Value, RunSummary)> {
    let (ds, threshold, effective) = load(cfg)?;
    let eig = cfg.eigen_options();
    let variant = cfg.variant;
    let results: Vec<Result<Option<[Vec<usize>; 2]>>> = pool(cfg.workers)?.install(|| {
        ds.images
            .par_iter()
            .map(|img| {
                let (grid, mask) = image_grid(img, threshold)?;
                if mask.is_empty() {
                    return Ok(None);
                }
                if let Some(k) = k {
                    if k >= grid.dim() {
                        return Err(Error::Degree {
                            degree: k,
                            dim: grid.dim(),
                        });
                    }
                }
                let t = betti_numbers(&grid, &mask, BoundaryCondition::Tangential, variant, &eig)?;
                let n = betti_numbers(&grid, &mask, BoundaryCondition::Normal, variant, &eig)?;
                Ok(Some([t, n]))
            })
            .collect()
    });
    let mut summary = RunSummary::default();
    let pick = |b: &Vec<usize>| match k {
        Some(k) => json!(b[k]),
        None => json!(b),
    };
    let records: Vec<Value> = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(Some([t, n])) => {
                summary.processed += 1;
                json!({"index": i, "betti": pick(&t), "betti_normal": pick(&n)})
            }
            Ok(None) => {
                summary.processed += 1;
                json!({"index": i, "betti": null, "betti_normal": null})
            }
            Err(e) => {
                summary.skipped.push(i);
                json!({"index": i, "betti": null, "error": e.to_string()})
            }
        })
        .collect();
    let report = json!({
        "config_hash": effective.hash()?,
        "threshold": threshold,
        "degree": k,
        "images": records,
    });
    Ok((report, summary))
}

/// Root-mean-square of a cochain's values over the cells touching each top
/// cell, as a one-component-per-axis field with the energy in component 0.
pub fn cochain_energy(grid: &GridComplex, support: &SupportSet, k: usize, values: &[f64]) -> CubeField {
    let m = grid.dim();
    let n = grid.cell_count(m);
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    grid.for_each_cell(k, |i, cell| {
        let v = support.local_index(k, i).map_or(0.0, |l| values[l]);
        for c in grid.cofaces_top(&cell) {
            sum[c] += v * v;
            count[c] += 1;
        }
    });
    let energy: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c == 0 { 0.0 } else { (s / c as f64).sqrt() })
        .collect();
    let mut components = vec![vec![0.0; n]; m];
    components[0] = energy;
    CubeField {
        extents: grid.cube_extents(),
        components,
    }
}

/// Options of [`run_spectra`].
#[derive(Clone, Debug)]
pub struct SpectraRequest {
    pub degree: usize,
    pub count: usize,
    pub condition: BoundaryCondition,
    /// Where to write kernel eigenvector rasters, if anywhere.
    pub export: Option<PathBuf>,
}

/// Lowest eigenvalues of `L_{k,condition}` per image, with optional
/// rasters of the kernel eigenvectors.
pub fn run_spectra(cfg: &PipelineConfig, req: &SpectraRequest) -> Result<(Value, RunSummary)> {
    let (ds, threshold, effective) = load(cfg)?;
    if let Some(dir) = &req.export {
        std::fs::create_dir_all(dir)?;
    }
    let eig = cfg.eigen_options();
    let results: Vec<Result<(Value, Vec<String>)>> = pool(cfg.workers)?.install(|| {
        ds.images
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                let (grid, mask) = image_grid(img, threshold)?;
                let support = build_support(&grid, &mask, req.condition)?;
                let op = assemble(&grid, &support, req.degree, cfg.variant)?;
                if op.size() == 0 {
                    return Ok((
                        json!({"index": i, "size": 0, "eigenvalues": [], "kernel_dim": null}),
                        vec![],
                    ));
                }
                let count = req.count.min(op.size());
                let values = spectrum(&op, count, &eig)?;
                let basis = harmonic_space(&op, 1, &eig)?;
                let mut written = Vec::new();
                if let Some(dir) = &req.export {
                    for j in 0..basis.dim() {
                        let field = cochain_energy(&grid, &support, req.degree, &basis.vector(j));
                        let stem = format!("image{i:04}_k{}_{:?}_vec{j}", req.degree, req.condition).to_lowercase();
                        written.extend(raster::write_field(&field, dir, &stem, false)?);
                    }
                }
                Ok((
                    json!({
                        "index": i,
                        "size": op.size(),
                        "eigenvalues": values,
                        "kernel_dim": basis.dim(),
                        "threshold": basis.threshold,
                        "lambda_max": basis.lambda_max,
                    }),
                    written,
                ))
            })
            .collect()
    });
    let mut summary = RunSummary::default();
    let mut records = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((rec, written)) => {
                summary.processed += 1;
                summary.written.extend(written);
                records.push(rec);
            }
            Err(e) => {
                summary.skipped.push(i);
                records.push(json!({"index": i, "error": e.to_string()}));
            }
        }
    }
    let report = json!({
        "config_hash": effective.hash()?,
        "threshold": threshold,
        "degree": req.degree,
        "condition": req.condition.tag(),
        "variant": cfg.variant,
        "images": records,
    });
    Ok((report, summary))
}

/// Writes component rasters for the first `limit` images (all when `None`).
pub fn run_export_plot(cfg: &PipelineConfig, dir: &Path, limit: Option<usize>) -> Result<RunSummary> {
    let (ds, threshold, _) = load(cfg)?;
    std::fs::create_dir_all(dir)?;
    let n = limit.map_or(ds.images.len(), |l| l.min(ds.images.len()));
    let results = decompose_all(cfg, &ds.images[..n], threshold)?;
    let mut summary = RunSummary::default();
    for (i, res) in results.into_iter().enumerate() {
        let (out, _) = match res {
            Ok(r) => r,
            Err(_) => {
                summary.skipped.push(i);
                continue;
            }
        };
        let pairs = out.parts.len();
        for (p, part) in out.parts.iter().enumerate() {
            for (name, field) in COMPONENTS.iter().zip(part) {
                let stem = if pairs == 1 {
                    format!("image{i:04}_{name}")
                } else {
                    format!("image{i:04}_pair{p}_{name}")
                };
                summary.written.extend(raster::write_field(field, dir, &stem, cfg.hsv)?);
            }
        }
        summary.processed += 1;
    }
    Ok(summary)
}

/// Array names, element types and shapes of an archive.
pub fn inspect(path: &Path) -> Result<Vec<ArrayInfo>> {
    list_arrays(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_per_method() {
        let cfg = PipelineConfig::default();
        assert_eq!(output_shape(&cfg, &[28, 28]), vec![6, 27, 27]);
        assert_eq!(output_shape(&cfg, &[64, 64, 64]), vec![9, 63, 63, 63]);
        let cfg = PipelineConfig {
            method: MethodName::ChannelPair,
            ..PipelineConfig::default()
        };
        assert_eq!(output_shape(&cfg, &[28, 28]), vec![18, 27, 27]);
        let cfg = PipelineConfig {
            method: MethodName::Patch,
            patch_edge: 4,
            ..PipelineConfig::default()
        };
        assert_eq!(output_shape(&cfg, &[28, 28]), vec![6, 6, 6]);
    }

    #[test]
    fn energy_field_covers_support() {
        let grid = build_grid(&[3, 3], 1.0).unwrap();
        let mask = crate::manifold::VertexMask::all_inside(&grid);
        let s = build_support(&grid, &mask, BoundaryCondition::Normal).unwrap();
        let f = cochain_energy(&grid, &s, 1, &[1.0; 12]);
        assert_eq!(f.components[0], vec![1.0; 4]);
    }
}
