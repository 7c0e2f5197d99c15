//! Direct linear solves for the Newton systems.
//!
//! Small systems go through a dense partial-pivoting LU; larger ones through
//! faer's supernodal sparse LU, with the symbolic factorization, numeric
//! storage and scratch memory cached per sparsity pattern.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, MatMut, Par};

use crate::error::{Error, Result};
use crate::mesh::{CscMatrix, SparsityPattern};

/// Systems up to this size are factorized densely.
pub const DENSE_LIMIT: usize = 192;

struct SparseCache {
    pattern: Arc<SparsityPattern>,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
    scratch: MemBuffer,
}

#[derive(Default)]
pub struct LinearSolver {
    cache: Option<SparseCache>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver").field("cached", &self.cache.is_some()).finish()
    }
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrite `rhs` with `A⁻¹ rhs`.
    pub fn solve(&mut self, a: &CscMatrix, rhs: &mut [f64]) -> Result<()> {
        let n = a.dim();
        if rhs.len() != n {
            return Err(Error::FieldLength { expected: n, got: rhs.len() });
        }
        if n <= DENSE_LIMIT {
            return solve_dense(a, rhs);
        }
        let pattern = a.pattern();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, pattern.col_ptr(), None, pattern.row_idx());
        let cached = matches!(&self.cache, Some(c) if Arc::ptr_eq(&c.pattern, pattern) || *c.pattern == **pattern);
        if !cached {
            let params = LuSymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            };
            let symbolic =
                factorize_symbolic_lu(sym, params).map_err(|e| Error::Linear(format!("symbolic LU: {e:?}")))?;
            let req = symbolic
                .factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default())
                .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
            let scratch = MemBuffer::try_new(req).map_err(|_| Error::Linear("out of memory".into()))?;
            self.cache = Some(SparseCache { pattern: pattern.clone(), symbolic, numeric: NumericLu::new(), scratch });
        }
        let c = self.cache.as_mut().expect("sparse cache initialised");
        let lu = c
            .symbolic
            .factorize_numeric_lu(
                &mut c.numeric,
                SparseColMatRef::new(sym, a.values()),
                Par::Seq,
                MemStack::new(&mut c.scratch),
                Default::default(),
            )
            .map_err(|e| Error::Linear(format!("numeric LU: {e:?}")))?;
        lu.solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(rhs, n, 1),
            Par::Seq,
            MemStack::new(&mut c.scratch),
        );
        check_finite(rhs)
    }
}

fn solve_dense(a: &CscMatrix, rhs: &mut [f64]) -> Result<()> {
    let n = a.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let p = a.pattern();
    for col in 0..n {
        for k in p.col_ptr()[col]..p.col_ptr()[col + 1] {
            m[(p.row_idx()[k], col)] = a.values()[k];
        }
    }
    m.partial_piv_lu().solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
    check_finite(rhs)
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Linear("singular or ill-conditioned system".into()))
    }
}
