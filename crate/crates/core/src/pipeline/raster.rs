//! 8-bit PNG rendering of cube-centered fields.
//!
//! Magnitudes are stretched to the per-image min/max; a uniform image maps
//! to mid gray. 3D data is shown as the three axis-aligned mid slices.

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::fields::CubeField;

/// A 2D view of a field: in-plane vectors on a `rows x cols` raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    /// Empty for 2D data, `_axis{a}` for the slice normal to axis `a`.
    pub suffix: String,
    pub rows: usize,
    pub cols: usize,
    /// Per pixel: full magnitude and the two in-plane components.
    pub magnitude: Vec<f64>,
    pub in_plane: Vec<[f64; 2]>,
}

/// Planes of a 2D field, or the three mid slices of a 3D one.
pub fn planes(field: &CubeField) -> Result<Vec<Plane>> {
    let e = &field.extents;
    let comps = &field.components;
    let mag = |idx: usize| comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt();
    match e.len() {
        2 => {
            let n = e[0] * e[1];
            Ok(vec![Plane {
                suffix: String::new(),
                rows: e[0],
                cols: e[1],
                magnitude: (0..n).map(mag).collect(),
                in_plane: (0..n).map(|i| [comps[0][i], comps[1][i]]).collect(),
            }])
        }
        3 => Ok((0..3)
            .map(|axis| {
                let (a, b) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let mid = e[axis] / 2;
                let mut magnitude = Vec::with_capacity(e[a] * e[b]);
                let mut in_plane = Vec::with_capacity(e[a] * e[b]);
                for i in 0..e[a] {
                    for j in 0..e[b] {
                        let mut p = [0; 3];
                        p[axis] = mid;
                        p[a] = i;
                        p[b] = j;
                        let idx = (p[0] * e[1] + p[1]) * e[2] + p[2];
                        magnitude.push(mag(idx));
                        in_plane.push([comps[a][idx], comps[b][idx]]);
                    }
                }
                Plane {
                    suffix: format!("_axis{axis}"),
                    rows: e[a],
                    cols: e[b],
                    magnitude,
                    in_plane,
                }
            })
            .collect()),
        m => Err(Error::InvalidInput(format!("cannot render a {m}-dimensional field"))),
    }
}

/// Min/max stretch to 0..=255; constant input maps to 128.
pub fn normalize(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi <= lo {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

pub fn gray_image(plane: &Plane) -> GrayImage {
    GrayImage::from_raw(plane.cols as u32, plane.rows as u32, normalize(&plane.magnitude))
        .expect("buffer matches raster size")
}

/// Direction as hue, normalized magnitude as value.
pub fn direction_image(plane: &Plane) -> RgbImage {
    let value = normalize(&plane.magnitude);
    let uniform = value.iter().all(|&v| v == 128) && plane.magnitude.iter().all(|&m| m == 0.0);
    let mut data = Vec::with_capacity(3 * value.len());
    for (v, d) in value.iter().zip(&plane.in_plane) {
        let hue = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * 6.0;
        let val = if uniform { 0.0 } else { *v as f64 / 255.0 };
        data.extend(hsv_to_rgb(hue, 1.0, val));
    }
    RgbImage::from_raw(plane.cols as u32, plane.rows as u32, data).expect("buffer matches raster size")
}

/// `hue` in sextants `[0, 6)`.
fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [u8; 3] {
    let c = val * sat;
    let x = c * (1.0 - ((hue % 2.0) - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    [r, g, b].map(|u| ((u + m) * 255.0).round() as u8)
}

/// Writes `{stem}{suffix}.png` per plane, plus `{stem}{suffix}_dir.png` when `hsv` is set.
/// Returns the written paths.
pub fn write_field(field: &CubeField, dir: &Path, stem: &str, hsv: bool) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for plane in planes(field)? {
        let path = dir.join(format!("{stem}{}.png", plane.suffix));
        gray_image(&plane)
            .save(&path)
            .map_err(|e| Error::Archive(e.to_string()))?;
        written.push(path.display().to_string());
        if hsv {
            let path = dir.join(format!("{stem}{}_dir.png", plane.suffix));
            direction_image(&plane)
                .save(&path)
                .map_err(|e| Error::Archive(e.to_string()))?;
            written.push(path.display().to_string());
        }
    }
    Ok(written)
}
