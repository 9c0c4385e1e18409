//! Dense LU factorization reused across many right-hand sides.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::traits::ComplexField;
use faer::{Conj, Mat, MatMut, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalars the solvers work in.
pub trait Scalar: ComplexField + Copy {
    fn modulus(&self) -> f64;
}

impl Scalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// In-place partial-pivoting LU of a square matrix. The input storage is
/// consumed so that large systems need only one `N x N` buffer.
pub struct DenseLu<T: Scalar> {
    lu: Mat<T>,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    /// Factors `a`. `shift` is only used to label failures.
    pub fn factor(mut a: Mat<T>, shift: f64) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let par = faer::get_global_parallelism();
        let mut fwd = vec![0usize; n];
        let mut bwd = vec![0usize; n];
        let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, T>(n, n, par, Default::default()));
        factor::lu_in_place(a.as_mut(), &mut fwd, &mut bwd, par, MemStack::new(&mut mem), Default::default());
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for i in 0..n {
            let p = a[(i, i)].modulus();
            if !p.is_finite() {
                return Err(Error::Factorization { shift, reason: format!("non-finite pivot at {i}") });
            }
            max_pivot = max_pivot.max(p);
            min_pivot = min_pivot.min(p);
        }
        if n > 0 && !(min_pivot > max_pivot * 1e-15) {
            return Err(Error::Factorization {
                shift,
                reason: format!("pivot ratio {:.3e} (matrix numerically singular)", min_pivot / max_pivot),
            });
        }
        Ok(Self { lu: a, fwd, bwd })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Overwrites `rhs` with `A^{-1} rhs`.
    pub fn solve_in_place(&self, rhs: MatMut<'_, T>) {
        let n = self.dim();
        let par = Par::Seq;
        let perm = unsafe { PermRef::new_unchecked(&self.fwd, &self.bwd, n) };
        let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, T>(n, rhs.ncols(), par));
        solve::solve_in_place_with_conj(self.lu.as_ref(), self.lu.as_ref(), perm, Conj::No, rhs, par, MemStack::new(&mut mem));
    }

    /// Solves for a single vector.
    pub fn solve_vec(&self, rhs: &[T]) -> Vec<T> {
        let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_in_place(m.as_mut());
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }
}
