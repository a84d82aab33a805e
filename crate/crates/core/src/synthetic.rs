//! Level-set images of shapes with known homology.
//!
//! Each shape is a scalar image that is non-negative exactly on the shape,
//! so thresholding at 0 recovers it. Every shape keeps at least one layer
//! of outside vertices along the grid border.

use crate::error::Result;
use crate::grid::{build_grid, GridComplex};
use crate::manifold::{segment, VertexMask};

#[derive(Clone, Debug)]
pub struct Shape {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
    /// `beta_0 .. beta_{m-1}`.
    pub betti: Vec<usize>,
}

impl Shape {
    pub fn grid(&self) -> Result<GridComplex> {
        build_grid(&self.dims, 1.0)
    }

    pub fn mask(&self, grid: &GridComplex) -> Result<VertexMask> {
        segment(grid, &self.values, 0.0)
    }
}

fn sample(dims: &[usize], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let n: usize = dims.iter().product();
    let mut p = vec![0.0; dims.len()];
    (0..n)
        .map(|mut idx| {
            for a in (0..dims.len()).rev() {
                p[a] = (idx % dims[a]) as f64;
                idx /= dims[a];
            }
            f(&p)
        })
        .collect()
}

fn dist(p: &[f64], c: &[f64]) -> f64 {
    p.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

pub fn disk(n: usize, radius: f64) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    Shape {
        name: "disk",
        dims: vec![n, n],
        values: sample(&[n, n], |p| radius - dist(p, &[c, c])),
        betti: vec![1, 0],
    }
}

pub fn annulus(n: usize, outer: f64, inner: f64) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    Shape {
        name: "annulus",
        dims: vec![n, n],
        values: sample(&[n, n], |p| {
            let r = dist(p, &[c, c]);
            (outer - r).min(r - inner)
        }),
        betti: vec![1, 1],
    }
}

/// Centers of the three holes of [`three_holes`].
pub fn three_hole_centers(n: usize) -> [[f64; 2]; 3] {
    let c = (n as f64 - 1.0) / 2.0;
    let ring = 0.22 * n as f64;
    let mut out = [[0.0; 2]; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let angle = std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
        *o = [c + ring * angle.sin(), c + ring * angle.cos()];
    }
    out
}

/// A disk pierced by three round holes, like a cell with three loops.
pub fn three_holes(n: usize) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    let outer = 0.44 * n as f64;
    let hole = 0.1 * n as f64;
    let centers = three_hole_centers(n);
    Shape {
        name: "three-holes",
        dims: vec![n, n],
        values: sample(&[n, n], |p| {
            let mut v = outer - dist(p, &[c, c]);
            for h in &centers {
                v = v.min(dist(p, h) - hole);
            }
            v
        }),
        betti: vec![1, 3],
    }
}

pub fn two_disks(n: usize) -> Shape {
    let a = 0.3 * (n as f64 - 1.0);
    let b = 0.7 * (n as f64 - 1.0);
    let r = 0.2 * n as f64;
    Shape {
        name: "two-components",
        dims: vec![n, n],
        values: sample(&[n, n], |p| (r - dist(p, &[a, a])).max(r - dist(p, &[b, b]))),
        betti: vec![2, 0],
    }
}

pub fn ball(n: usize, radius: f64) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    Shape {
        name: "ball",
        dims: vec![n, n, n],
        values: sample(&[n, n, n], |p| radius - dist(p, &[c, c, c])),
        betti: vec![1, 0, 0],
    }
}

/// A box with a round tunnel drilled through along the last axis.
pub fn tunnel(n: usize) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    let half = c - 1.5;
    let hole = 0.15 * n as f64;
    Shape {
        name: "tunnel",
        dims: vec![n, n, n],
        values: sample(&[n, n, n], |p| {
            let boxed = p.iter().map(|x| half - (x - c).abs()).fold(f64::INFINITY, f64::min);
            boxed.min(dist(&p[..2], &[c, c]) - hole)
        }),
        betti: vec![1, 1, 0],
    }
}

/// A ball with a concentric spherical cavity.
pub fn thick_shell(n: usize) -> Shape {
    let c = (n as f64 - 1.0) / 2.0;
    let outer = c - 0.8;
    let inner = 0.2 * n as f64;
    Shape {
        name: "thick-shell",
        dims: vec![n, n, n],
        values: sample(&[n, n, n], |p| {
            let r = dist(p, &[c, c, c]);
            (outer - r).min(r - inner)
        }),
        betti: vec![1, 0, 1],
    }
}

pub fn two_balls(n: usize) -> Shape {
    let a = 0.3 * (n as f64 - 1.0);
    let b = 0.7 * (n as f64 - 1.0);
    let r = 0.22 * n as f64;
    Shape {
        name: "two-balls",
        dims: vec![n, n, n],
        values: sample(&[n, n, n], |p| (r - dist(p, &[a, a, a])).max(r - dist(p, &[b, b, b]))),
        betti: vec![2, 0, 0],
    }
}

/// The eight reference shapes: four on 2D grids up to 32², four on 12³.
pub fn library() -> Vec<Shape> {
    vec![
        disk(20, 7.0),
        annulus(24, 9.5, 4.0),
        three_holes(32),
        two_disks(24),
        ball(12, 4.5),
        tunnel(12),
        thick_shell(12),
        two_balls(12),
    ]
}
