//! Compressed sparse row matrices.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row sorted column lists.
    pub fn from_pattern(rows: Vec<Vec<usize>>, symmetric: bool) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric,
        }
    }

    /// Zero matrix with the node-to-node coupling pattern of a P1 mesh (diagonal included).
    pub fn mesh_pattern(mesh: &Mesh) -> Self {
        let rows = mesh
            .node_neighbours()
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                let pos = r.partition_point(|&c| c < i);
                r.insert(pos, i);
                r
            })
            .collect();
        Self::from_pattern(rows, true)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::from_pattern((0..d.len()).map(|i| vec![i]).collect(), true);
        m.vals.copy_from_slice(d);
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Dense row-major input; zeros are not stored.
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let rows = a
            .iter()
            .map(|r| (0..n).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(rows, false);
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.vals[k] = a[i][m.cols[k]];
            }
        }
        m.symmetric = m.asymmetry() <= 1e-12 * m.max_abs().max(1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    /// Storage position of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.vals[k] += v;
    }

    /// Storage positions of the diagonal entries (all must be present).
    pub fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.position(i, i).expect("diagonal entry missing from pattern"))
            .collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, &x) in d.iter().enumerate() {
            self.add_at(i, i, x);
        }
    }

    /// `self += alpha * other`; every stored entry of `other` must be in our pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &CsrMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Dimension(format!("{} vs {}", self.n, other.n)));
        }
        if other.row_ptr == self.row_ptr && other.cols == self.cols {
            for (a, b) in self.vals.iter_mut().zip(&other.vals) {
                *a += alpha * b;
            }
        } else {
            for i in 0..other.n {
                for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                    let j = other.cols[k];
                    let pos = self.position(i, j).ok_or_else(|| {
                        Error::Dimension(format!("entry ({i}, {j}) outside the target pattern"))
                    })?;
                    self.vals[pos] += alpha * other.vals[k];
                }
            }
        }
        self.symmetric &= other.symmetric;
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.vals.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k] * xi;
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.vals[k] * y[self.cols[k]];
            }
            s += xi * r;
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                m = m.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.cols[k]] = self.vals[k];
            }
        }
        d
    }

    /// Row sums (`A·1`).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Symmetric elimination of Dirichlet rows: `b` is corrected for the
    /// eliminated columns and each fixed row/column becomes the identity.
    pub fn apply_dirichlet(&mut self, b: &mut [f64], fixed: &[(usize, f64)]) {
        let mut value = vec![None; self.n];
        for &(i, g) in fixed {
            value[i] = Some(g);
        }
        for i in 0..self.n {
            let is_fixed = value[i].is_some();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if let Some(g) = value[j] {
                    if !is_fixed {
                        b[i] -= self.vals[k] * g;
                    }
                    self.vals[k] = if i == j { 1.0 } else { 0.0 };
                } else if is_fixed {
                    self.vals[k] = 0.0;
                }
            }
            if let Some(g) = value[i] {
                b[i] = g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_products() {
        let a = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        let m = CsrMatrix::from_dense(&a);
        assert!(m.is_symmetric());
        assert_eq!(m.nnz(), 7);
        assert_eq!(m.to_dense(), a);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(m.bilinear(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), -1.0);
    }

    #[test]
    fn transpose_product() {
        let a = vec![vec![1.0, 2.0], vec![0.0, 3.0]];
        let m = CsrMatrix::from_dense(&a);
        assert!(!m.is_symmetric());
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![1.0, 5.0]);
    }

    #[test]
    fn dirichlet_elimination_keeps_symmetry() {
        let a = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        let mut m = CsrMatrix::from_dense(&a);
        let mut b = vec![0.0, 0.0, 0.0];
        m.apply_dirichlet(&mut b, &[(0, 1.0)]);
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(b, vec![1.0, 1.0, 0.0]);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 0), 0.0);
    }
}
