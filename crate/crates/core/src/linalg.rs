//! Dense helpers on top of nalgebra: Gram-based pseudoinverse, Cholesky
//! solves and symmetric spectra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // f64 math is inherent once std is linked
use num_traits::Float;

/// Pseudoinverse of a symmetric PSD Gram matrix `M Mᵀ` (or `Mᵀ M`), built from
/// its eigendecomposition.
///
/// Eigenvalues of the Gram matrix are squared singular values of `M`, so the
/// relative cutoff is applied on `sqrt(λ)`: singular values below
/// `max(rows, cols) · ε · s₁` are discarded.
#[derive(Debug, Clone)]
pub struct GramPinv {
    vectors: DMatrix<f64>,
    inv: DVector<f64>,
    rank: usize,
    s_max: f64,
    s_min_kept: f64,
}

impl GramPinv {
    /// `dims_max` is `max(N, p)` of the underlying matrix.
    pub fn new(gram: DMatrix<f64>, dims_max: usize) -> Self {
        let n = gram.nrows();
        let eig = SymmetricEigen::new(gram);
        let s_max = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.max(0.0).sqrt()));
        let cutoff = dims_max as f64 * f64::EPSILON * s_max;
        let mut rank = 0;
        let mut s_min_kept = f64::INFINITY;
        let inv = DVector::from_iterator(
            n,
            eig.eigenvalues.iter().map(|&l| {
                let s = l.max(0.0).sqrt();
                if s > cutoff && s > 0.0 {
                    rank += 1;
                    s_min_kept = s_min_kept.min(s);
                    1.0 / l
                } else {
                    0.0
                }
            }),
        );
        GramPinv {
            vectors: eig.eigenvectors,
            inv,
            rank,
            s_max,
            s_min_kept: if rank == 0 { 0.0 } else { s_min_kept },
        }
    }

    pub fn dim(&self) -> usize {
        self.inv.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim()
    }

    /// Largest singular value of the underlying matrix.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Smallest singular value kept above the cutoff.
    pub fn s_min(&self) -> f64 {
        self.s_min_kept
    }

    /// Condition number `s₁ / s_r` of the underlying matrix restricted to its
    /// numerical range.
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            f64::INFINITY
        } else {
            self.s_max / self.s_min_kept
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut c = self.vectors.tr_mul(v);
        c.component_mul_assign(&self.inv);
        &self.vectors * c
    }

    pub fn apply_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = self.vectors.transpose() * m;
        for (mut row, &w) in c.row_iter_mut().zip(self.inv.iter()) {
            row *= w;
        }
        &self.vectors * c
    }

    /// `Σ_j w_j ‖(M M ᵀ)⁺ M e_j‖²` for the matrix `M` this Gram matrix was
    /// built from, evaluated as `Σ_i λ_i⁻² Σ_j w_j (Vᵀ M)_{ij}²`.
    pub fn weighted_hs(&self, m: &DMatrix<f64>, weights: &[f64]) -> f64 {
        // An explicit transpose routes through the blocked GEMM; `tr_mul`
        // falls back to one dot product per entry.
        let c = self.vectors.transpose() * m;
        let inv_sq: Vec<f64> = self.inv.iter().map(|v| v * v).collect();
        c.column_iter()
            .zip(weights)
            .map(|(col, w)| {
                let s: f64 = col.iter().zip(&inv_sq).map(|(v, i)| i * v * v).sum();
                w * s
            })
            .sum()
    }
}

/// `M Mᵀ`.
pub fn outer_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m * m.transpose();
    symmetrize(g)
}

/// `Mᵀ M`.
pub fn inner_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m.transpose() * m;
    symmetrize(g)
}

fn symmetrize(mut g: DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let a = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = a;
            g[(j, i)] = a;
        }
    }
    g
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Columns of `m` selected by a 0-based index list.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    m.select_columns(cols.iter())
}

/// Copy of `m` with every column outside the 0-based mask zeroed.
pub fn mask_columns(m: &DMatrix<f64>, keep: &[bool]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, &k) in keep.iter().enumerate() {
        if !k {
            out.column_mut(j).fill(0.0);
        }
    }
    out
}

/// Largest absolute entry of `UᵀU − I`.
pub fn orthogonality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn norm_sq(v: &DVector<f64>) -> f64 {
    v.norm_squared()
}
