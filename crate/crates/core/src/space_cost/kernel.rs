use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use super::{circular_offset, wrap_displacement, FiniteSpace};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

type CostFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Storage {
    Dense(SquareMatrix),
    Callable { f: CostFn, window: Option<usize> },
}

/// Cost `c(x, y)` of moving from `x` to `y` on a finite space.
#[derive(Clone)]
pub struct CostKernel {
    space: FiniteSpace,
    storage: Storage,
    periodic: bool,
    lifts: Option<Arc<SquareMatrix>>,
}

impl fmt::Debug for CostKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let storage = match &self.storage {
            Storage::Dense(_) => "dense".to_string(),
            Storage::Callable { window, .. } => format!("callable(window={window:?})"),
        };
        f.debug_struct("CostKernel")
            .field("n", &self.space.n())
            .field("storage", &storage)
            .field("periodic", &self.periodic)
            .finish()
    }
}

fn validate(n: usize, entry: impl Fn(usize, usize) -> f64) -> Result<()> {
    let mut col_ok = vec![false; n];
    for i in 0..n {
        let mut row_ok = false;
        for (j, ok) in col_ok.iter_mut().enumerate() {
            let v = entry(i, j);
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::NanEntry { row: i, col: j });
            }
            if v.is_finite() {
                row_ok = true;
                *ok = true;
            }
        }
        if !row_ok {
            return Err(Error::InfiniteRow(i));
        }
    }
    match col_ok.iter().position(|ok| !ok) {
        Some(j) => Err(Error::InfiniteColumn(j)),
        None => Ok(()),
    }
}

impl CostKernel {
    pub fn from_matrix(space: FiniteSpace, m: SquareMatrix) -> Result<Self> {
        if m.n() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                found: m.n(),
            });
        }
        validate(m.n(), |i, j| m[(i, j)])?;
        let periodic = space.is_circle();
        Ok(Self {
            space,
            storage: Storage::Dense(m),
            periodic,
            lifts: None,
        })
    }

    /// Callable kernel; entries outside the circular `window` (if any) are `+inf`.
    pub fn from_fn(
        space: FiniteSpace,
        f: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
        window: Option<usize>,
    ) -> Result<Self> {
        let periodic = space.is_circle();
        let k = Self {
            space,
            storage: Storage::Callable {
                f: Arc::new(f),
                window,
            },
            periodic,
            lifts: None,
        };
        validate(k.n(), |i, j| k.entry(i, j))?;
        Ok(k)
    }

    /// Attach a matrix of lifted displacements `(y - x)` used by this kernel.
    pub fn with_lifts(mut self, lifts: SquareMatrix) -> Result<Self> {
        if lifts.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: lifts.n(),
            });
        }
        self.lifts = Some(Arc::new(lifts));
        Ok(self)
    }

    /// Minimal-modulus lifts `(x_j - x_i)` wrapped into `(-1/2, 1/2]`.
    pub fn with_minimal_lifts(self) -> Result<Self> {
        let coords = self.space.coords().ok_or(Error::NotCircle)?.to_vec();
        let lifts = SquareMatrix::from_fn(self.n(), |i, j| wrap_displacement(coords[j] - coords[i]));
        self.with_lifts(lifts)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn window(&self) -> Option<usize> {
        match self.storage {
            Storage::Callable { window, .. } => window,
            Storage::Dense(_) => None,
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Callable { f, window } => match window {
                Some(w) if circular_offset(i, j, self.n()).unsigned_abs() as usize > *w => f64::INFINITY,
                _ => f(i, j),
            },
        }
    }

    pub fn lifts(&self) -> Option<&SquareMatrix> {
        self.lifts.as_deref()
    }

    pub fn lift(&self, i: usize, j: usize) -> Option<f64> {
        self.lifts.as_ref().map(|l| l[(i, j)])
    }

    /// Indices `y` for which `c(y, x)` may be finite.
    pub fn sources(&self, x: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        let n = self.n();
        match self.window() {
            Some(w) if 2 * w + 1 < n => {
                let mut idx: Vec<usize> = (0..=2 * w).map(|k| (x + n - w + k) % n).collect();
                idx.sort_unstable();
                Box::new(idx.into_iter())
            }
            _ => Box::new(0..n),
        }
    }

    /// Indices `y` for which `c(x, y)` may be finite.
    pub fn targets(&self, x: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        self.sources(x)
    }

    pub fn to_dense(&self) -> Cow<'_, SquareMatrix> {
        match &self.storage {
            Storage::Dense(m) => Cow::Borrowed(m),
            Storage::Callable { .. } => Cow::Owned(SquareMatrix::from_fn(self.n(), |i, j| self.entry(i, j))),
        }
    }

    /// Dense copy of a callable kernel (identity on dense kernels).
    pub fn materialize(&self) -> CostKernel {
        CostKernel {
            space: self.space.clone(),
            storage: Storage::Dense(self.to_dense().into_owned()),
            periodic: self.periodic,
            lifts: self.lifts.clone(),
        }
    }

    /// Kernel `(x, y) ↦ c(y, x)`; lifts are negated accordingly.
    pub fn transpose(&self) -> CostKernel {
        CostKernel {
            space: self.space.clone(),
            storage: Storage::Dense(self.to_dense().transpose()),
            periodic: self.periodic,
            lifts: self.lifts.as_ref().map(|l| Arc::new(l.transpose().map(|d| -d))),
        }
    }

    /// Largest absolute finite entry.
    pub fn sup_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.finite_sup(),
            Storage::Callable { .. } => {
                let mut s = 0.0_f64;
                for i in 0..self.n() {
                    for j in self.targets(i) {
                        let v = self.entry(i, j);
                        if v.is_finite() {
                            s = s.max(v.abs());
                        }
                    }
                }
                s
            }
        }
    }
}

pub fn build_dense_cost(n: usize, entries: Vec<Vec<f64>>) -> Result<CostKernel> {
    if entries.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: entries.len(),
        });
    }
    if let Some(r) = entries.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.len(),
        });
    }
    let m = SquareMatrix::from_rows(&entries).expect("checked square");
    CostKernel::from_matrix(FiniteSpace::new(n)?, m)
}

/// Discretize a continuous circle cost `f(x, y)` on the grid `i / grid_n`.
///
/// With a window `w`, pairs farther than `w` cells apart are absent and the
/// row minimizer must be strictly inside the window.
pub fn build_circle_cost(
    grid_n: usize,
    f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    window: Option<usize>,
) -> Result<CostKernel> {
    let space = FiniteSpace::circle(grid_n)?;
    let h = 1.0 / grid_n as f64;
    let kernel = CostKernel::from_fn(space, move |i, j| f(i as f64 * h, j as f64 * h), window)?;
    if let Some(w) = window {
        if 2 * w < grid_n {
            for i in 0..grid_n {
                let mut best = (f64::INFINITY, 0_i64);
                for j in kernel.targets(i) {
                    let v = kernel.entry(i, j);
                    let off = circular_offset(i, j, grid_n);
                    if v < best.0 || (v == best.0 && off.abs() < best.1.abs()) {
                        best = (v, off);
                    }
                }
                if best.1.unsigned_abs() as usize >= w {
                    return Err(Error::WindowBoundary { row: i, offset: best.1 });
                }
            }
        }
    }
    kernel.with_minimal_lifts()
}
