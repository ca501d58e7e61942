use std::ops::{Index, IndexMut};

/// Dense row-major square matrix of `f64`, `+inf` marking absent entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Largest absolute finite entry.
    pub fn finite_sup(&self) -> f64 {
        self.data
            .iter()
            .filter(|x| x.is_finite())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Sup-distance over entries finite in both; mismatched infinities count as `+inf`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (&a, &b)| {
                if a.is_finite() && b.is_finite() {
                    m.max((a - b).abs())
                } else if a == b {
                    m
                } else {
                    f64::INFINITY
                }
            })
    }

    /// Entrywise minimum, in place.
    pub fn min_assign(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            if b < *a {
                *a = b;
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Min-plus product `(a ⊗ b)(x, y) = min_z a(x, z) + b(z, y)`, ties to the smallest `z`.
///
/// Returns the product and the argmin `z` per entry (`usize::MAX` when infinite).
pub fn minplus_product_with_argmin(a: &SquareMatrix, b: &SquareMatrix) -> (SquareMatrix, Vec<usize>) {
    let n = a.n();
    assert_eq!(n, b.n());
    let mut out = SquareMatrix::filled(n, f64::INFINITY);
    let mut arg = vec![usize::MAX; n * n];
    for x in 0..n {
        let arow = a.row(x);
        let orow = out.row_mut(x);
        let argrow = &mut arg[x * n..(x + 1) * n];
        for (z, &axz) in arow.iter().enumerate() {
            if !axz.is_finite() {
                continue;
            }
            let brow = b.row(z);
            for y in 0..n {
                let v = axz + brow[y];
                if v < orow[y] {
                    orow[y] = v;
                    argrow[y] = z;
                }
            }
        }
    }
    (out, arg)
}

pub fn minplus_product(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    minplus_product_with_argmin(a, b).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_picks_smallest_index_on_ties() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let (p, arg) = minplus_product_with_argmin(&a, &b);
        assert_eq!(p.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 3.0]]);
        assert!(arg.iter().all(|&z| z == 0));
    }

    #[test]
    fn infinite_entries_are_absorbing() {
        let inf = f64::INFINITY;
        let a = SquareMatrix::from_rows(&[vec![inf, 0.0], vec![inf, inf]]).unwrap();
        let p = minplus_product(&a, &a);
        assert!(p.as_slice().iter().all(|x| x.is_infinite()));
    }
}
