use std::sync::Arc;

use super::Mesh;

/// Compressed-sparse-column pattern with `nf` interleaved fields per node
/// (`dof = node * nf + field`). The pattern is structurally symmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn for_mesh(mesh: &Mesh, nf: usize) -> Self {
        let adj = mesh.node_adjacency();
        let n = mesh.num_nodes() * nf;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for list in &adj {
            for _ in 0..nf {
                for &a in list {
                    row_idx.extend((0..nf).map(|g| a * nf + g));
                }
                col_ptr.push(row_idx.len());
            }
        }
        Self { n, col_ptr, row_idx }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Position of `(row, col)` in the value array.
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[lo..hi].binary_search(&row).ok().map(|k| lo + k)
    }
}

#[derive(Clone, Debug)]
pub struct CscMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Add to an entry; panics if the entry is outside the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.pattern.index(row, col).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.index(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Replace a row by the identity row (Dirichlet elimination).
    pub fn set_identity_row(&mut self, row: usize) {
        let p = &self.pattern;
        // Structural symmetry: the columns holding `row` are the rows of column `row`.
        for k in p.col_ptr[row]..p.col_ptr[row + 1] {
            let col = p.row_idx[k];
            let idx = p.index(row, col).expect("pattern is structurally symmetric");
            self.values[idx] = 0.0;
        }
        let d = p.index(row, row).expect("diagonal present");
        self.values[d] = 1.0;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (col, &xc) in x.iter().enumerate().take(self.dim()) {
            for k in self.pattern.col_ptr[col]..self.pattern.col_ptr[col + 1] {
                y[self.pattern.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matvec(&vec![1.0; self.dim()])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for col in 0..n {
            for k in self.pattern.col_ptr[col]..self.pattern.col_ptr[col + 1] {
                d[self.pattern.row_idx[k]][col] += self.values[k];
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, BoundaryMarkers};

    #[test]
    fn block_pattern_is_sorted_and_symmetric() {
        let m = build_rect_mesh(1.0, 1.0, 2, 3, BoundaryMarkers::default()).unwrap();
        let p = SparsityPattern::for_mesh(&m, 3);
        assert_eq!(p.dim(), 3 * m.num_nodes());
        for c in 0..p.dim() {
            let rows = &p.row_idx()[p.col_ptr()[c]..p.col_ptr()[c + 1]];
            assert!(rows.windows(2).all(|w| w[0] < w[1]));
            for &r in rows {
                assert!(p.index(c, r).is_some());
            }
        }
    }

    #[test]
    fn identity_row() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2, BoundaryMarkers::default()).unwrap();
        let mut k = m.assemble_stiffness(None).unwrap();
        k.set_identity_row(4);
        let d = k.to_dense();
        for (j, v) in d[4].iter().enumerate() {
            assert_eq!(*v, if j == 4 { 1.0 } else { 0.0 });
        }
    }
}
