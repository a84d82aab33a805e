use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridComplex;
use crate::manifold::SupportSet;

/// Which cell set a cochain's values are laid out over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportTag {
    Full,
    Normal,
    Tangential,
}

/// A discrete `k`-form: one value per `k`-cell of a support.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    degree: usize,
    support: SupportTag,
    values: Vec<f64>,
}

impl Cochain {
    /// Cochain over every `degree`-cell of the grid.
    pub fn full(grid: &GridComplex, degree: usize, values: Vec<f64>) -> Result<Self> {
        grid.check_degree(degree)?;
        let n = grid.cell_count(degree);
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "degree-{degree} cochain needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Cochain {
            degree,
            support: SupportTag::Full,
            values,
        })
    }

    pub fn zeros(grid: &GridComplex, degree: usize) -> Result<Self> {
        Self::full(grid, degree, vec![0.0; grid.cell_count(degree)])
    }

    /// Cochain over the cells a support includes at `degree`.
    pub fn on_support(support: &SupportSet, degree: usize, values: Vec<f64>) -> Result<Self> {
        let n = support.len(degree);
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "degree-{degree} {:?} cochain needs {n} values, got {}",
                support.condition(),
                values.len()
            )));
        }
        Ok(Cochain {
            degree,
            support: support.condition().tag(),
            values,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn support(&self) -> SupportTag {
        self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }
}
