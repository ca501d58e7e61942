//! Finite state spaces and cost kernels.
//!
//! A [`CostKernel`] is either a validated dense matrix or a callable evaluated
//! on demand, optionally restricted to a circular search window. Circle-grid
//! kernels carry a matrix of lifted displacements so that rotation numbers can
//! be read off without re-solving the lift.

mod action;
mod kernel;

pub use action::{build_action_cost, ActionDiscretization, Potential};
pub use kernel::{build_circle_cost, build_dense_cost, CostKernel};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    n: usize,
    coords: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl FiniteSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace("a space needs at least one point".into()));
        }
        Ok(Self {
            n,
            coords: None,
            labels: None,
        })
    }

    /// Uniform grid `i / grid_n` on the circle.
    pub fn circle(grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidSpace(format!("circle grid needs grid_n >= 2, got {grid_n}")));
        }
        let coords = (0..grid_n).map(|i| i as f64 / grid_n as f64).collect();
        Ok(Self {
            n: grid_n,
            coords: Some(coords),
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn is_circle(&self) -> bool {
        self.coords.is_some()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }
}

/// Representative of `d` modulo 1 in `(-1/2, 1/2]`.
pub fn wrap_displacement(d: f64) -> f64 {
    let r = d - d.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Circular index distance on a grid of size `n`.
pub fn circular_offset(i: usize, j: usize, n: usize) -> i64 {
    let d = (j as i64 - i as i64).rem_euclid(n as i64);
    if 2 * d > n as i64 {
        d - n as i64
    } else {
        d
    }
}
