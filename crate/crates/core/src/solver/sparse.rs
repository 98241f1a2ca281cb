//! Block-sparse symmetric matrices and their envelope Cholesky factorization.
//!
//! Only the lower triangle is stored. Factorization uses the natural block
//! ordering; fill-in is confined to each block row's envelope (first nonzero
//! block column up to the diagonal), which for the time-major grid ordering is
//! a band of roughly one slice.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric matrix stored as dense `bs × bs` blocks in its lower triangle.
#[derive(Clone, Debug)]
pub struct BlockSparse {
    bs: usize,
    rows: Vec<BTreeMap<usize, DMatrix<f64>>>,
}

impl BlockSparse {
    pub fn new(n_blocks: usize, bs: usize) -> Self {
        Self {
            bs,
            rows: vec![BTreeMap::new(); n_blocks],
        }
    }

    pub fn block_size(&self) -> usize {
        self.bs
    }

    pub fn n_blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.bs * self.rows.len()
    }

    /// Accumulate `m` into block `(i, j)`; the mirrored block is implied.
    pub fn add_block(&mut self, i: usize, j: usize, m: &DMatrix<f64>) {
        let bs = self.bs;
        if i >= j {
            *self.rows[i].entry(j).or_insert_with(|| DMatrix::zeros(bs, bs)) += m;
        } else {
            *self.rows[j].entry(i).or_insert_with(|| DMatrix::zeros(bs, bs)) += m.transpose();
        }
    }

    /// Block `(i, j)` if structurally nonzero.
    pub fn block(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        if i >= j {
            self.rows[i].get(&j).cloned()
        } else {
            self.rows[j].get(&i).map(|m| m.transpose())
        }
    }

    /// Number of stored blocks in the lower triangle (diagonal included).
    pub fn stored_blocks(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(b) = row.get(&i) {
                for k in 0..self.bs {
                    d[i * self.bs + k] = b[(k, k)];
                }
            }
        }
        d
    }

    /// Add `scale·diag(A) + shift·I` to the diagonal blocks.
    pub fn regularize(&mut self, scale: f64, shift: f64) {
        let bs = self.bs;
        for (i, row) in self.rows.iter_mut().enumerate() {
            let b = row.entry(i).or_insert_with(|| DMatrix::zeros(bs, bs));
            for k in 0..bs {
                b[(k, k)] += scale * b[(k, k)] + shift;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let bs = self.bs;
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, b) in row {
                m.view_mut((i * bs, j * bs), (bs, bs)).copy_from(b);
                if i != j {
                    m.view_mut((j * bs, i * bs), (bs, bs)).copy_from(&b.transpose());
                }
            }
        }
        m
    }

    /// Block structure of a dense symmetric matrix; all-zero blocks are skipped.
    pub fn from_dense(m: &DMatrix<f64>, bs: usize) -> Self {
        assert_eq!(m.nrows() % bs, 0);
        let n = m.nrows() / bs;
        let mut out = Self::new(n, bs);
        for i in 0..n {
            for j in 0..=i {
                let b = m.view((i * bs, j * bs), (bs, bs)).into_owned();
                if b.iter().any(|v| *v != 0.0) {
                    out.rows[i].insert(j, b);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let bs = self.bs;
        let mut y = DVector::zeros(self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, b) in row {
                let xj = x.rows(j * bs, bs);
                let mut yi = y.rows_mut(i * bs, bs);
                yi.gemv(1.0, b, &xj, 1.0);
                if i != j {
                    let xi = x.rows(i * bs, bs);
                    let mut yj = y.rows_mut(j * bs, bs);
                    yj.gemv_tr(1.0, b, &xi, 1.0);
                }
            }
        }
        y
    }
}

/// Lower block Cholesky factor `A = L·Lᵀ` restricted to the row envelopes.
#[derive(Clone, Debug)]
pub struct BlockCholesky {
    bs: usize,
    first: Vec<usize>,
    // rows[i][k - first[i]] = L_ik
    rows: Vec<Vec<DMatrix<f64>>>,
}

impl BlockCholesky {
    pub fn factor(a: &BlockSparse) -> Result<Self> {
        let bs = a.bs;
        let n = a.n_blocks();
        let first: Vec<usize> = (0..n)
            .map(|i| a.rows[i].keys().next().copied().unwrap_or(i).min(i))
            .collect();
        // Blocks are held transposed so every update is a `gemm_tr`.
        let mut rows: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(n);
        let mut s = DMatrix::zeros(bs, bs);
        for i in 0..n {
            let fi = first[i];
            let mut row: Vec<DMatrix<f64>> = Vec::with_capacity(i - fi + 1);
            for k in fi..=i {
                // Lower block (i, k) of A, stored transposed.
                match a.rows[i].get(&k) {
                    Some(b) => b.transpose_to(&mut s),
                    None => s.fill(0.0),
                }
                let lo = if k == i { fi } else { fi.max(first[k]) };
                for m in lo..k {
                    let ut_im = &row[m - fi];
                    let ut_km = if k == i { ut_im } else { &rows[k][m - first[k]] };
                    // (L_im L_kmᵀ)ᵀ = L_km L_imᵀ
                    s.gemm_tr(-1.0, ut_km, ut_im, 1.0);
                }
                if k < i {
                    let lkk = &rows[k][k - first[k]];
                    // Solve L_kk X = (S)ᵀ for X = L_ikᵀ.
                    let x = lkk
                        .tr_solve_upper_triangular(&s)
                        .ok_or(Error::NotPositiveDefinite { block: k })?;
                    row.push(x);
                } else {
                    let chol = nalgebra::Cholesky::new(s.transpose()).ok_or(Error::NotPositiveDefinite { block: i })?;
                    row.push(chol.unpack().transpose());
                }
            }
            rows.push(row);
        }
        Ok(Self { bs, first, rows })
    }

    /// Factor, retrying once with `1e-10·diag(A) + 1e-12·I` added.
    pub fn factor_regularized(a: &BlockSparse) -> Result<Self> {
        match Self::factor(a) {
            Ok(f) => Ok(f),
            Err(_) => {
                let mut reg = a.clone();
                reg.regularize(1e-10, 1e-12);
                log::debug!("normal equations regularized before factorization");
                Self::factor(&reg)
            }
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.bs * self.rows.len()
    }

    // L_ikᵀ
    fn u(&self, i: usize, k: usize) -> &DMatrix<f64> {
        &self.rows[i][k - self.first[i]]
    }

    /// Solve `A·X = B` for a block of right-hand sides.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let bs = self.bs;
        let n = self.n_blocks();
        let mut y = b.clone();
        for i in 0..n {
            let mut yi = y.rows(i * bs, bs).into_owned();
            for k in self.first[i]..i {
                let yk = y.rows(k * bs, bs);
                yi.gemm_tr(-1.0, self.u(i, k), &yk, 1.0);
            }
            self.u(i, i).tr_solve_upper_triangular_mut(&mut yi);
            y.rows_mut(i * bs, bs).copy_from(&yi);
        }
        for i in (0..n).rev() {
            let mut xi = y.rows(i * bs, bs).into_owned();
            self.u(i, i).solve_upper_triangular_mut(&mut xi);
            y.rows_mut(i * bs, bs).copy_from(&xi);
            for k in self.first[i]..i {
                let mut yk = y.rows_mut(k * bs, bs);
                yk.gemm(-1.0, self.u(i, k), &xi, 1.0);
            }
        }
        y
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        DVector::from_column_slice(self.solve_matrix(&m).as_slice())
    }

    /// Block `(i, j)` of `A⁻¹` by solving against the `j`-th block column of I.
    pub fn inverse_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let bs = self.bs;
        let mut e = DMatrix::zeros(self.dim(), bs);
        for k in 0..bs {
            e[(j * bs + k, k)] = 1.0;
        }
        self.solve_matrix(&e).rows(i * bs, bs).into_owned()
    }

    /// Entries of `A⁻¹` on the factor's envelope (Takahashi recurrences).
    pub fn selected_inverse(&self) -> SelectedInverse {
        let bs = self.bs;
        let n = self.n_blocks();
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for k in 0..n {
            for rows in &mut col_rows[self.first[k]..k] {
                rows.push(k);
            }
        }
        let mut z: Vec<Vec<DMatrix<f64>>> = (0..n)
            .map(|i| vec![DMatrix::zeros(0, 0); i - self.first[i] + 1])
            .collect();
        for i in (0..n).rev() {
            let mut lii_inv = DMatrix::identity(bs, bs);
            self.u(i, i).tr_solve_upper_triangular_mut(&mut lii_inv);
            let c = &col_rows[i];
            let w: Vec<DMatrix<f64>> = c.iter().map(|&k| self.u(k, i).tr_mul(&lii_inv)).collect();
            let mut new_col: Vec<DMatrix<f64>> = Vec::with_capacity(c.len());
            for &j in c {
                let mut zji = DMatrix::zeros(bs, bs);
                for (idx, &k) in c.iter().enumerate() {
                    if j >= k {
                        zji.gemm(-1.0, &z[j][k - self.first[j]], &w[idx], 1.0);
                    } else {
                        zji.gemm_tr(-1.0, &z[k][j - self.first[k]], &w[idx], 1.0);
                    }
                }
                new_col.push(zji);
            }
            let mut zii = lii_inv.tr_mul(&lii_inv);
            for (idx, zki) in new_col.iter().enumerate() {
                zii.gemm_tr(-1.0, zki, &w[idx], 1.0);
            }
            let zii = (&zii + zii.transpose()) * 0.5;
            for (zki, &j) in new_col.into_iter().zip(c) {
                z[j][i - self.first[j]] = zki;
            }
            z[i][i - self.first[i]] = zii;
        }
        SelectedInverse {
            first: self.first.clone(),
            z,
        }
    }
}

/// The blocks of `A⁻¹` lying inside the Cholesky envelope.
#[derive(Clone, Debug)]
pub struct SelectedInverse {
    first: Vec<usize>,
    z: Vec<Vec<DMatrix<f64>>>,
}

impl SelectedInverse {
    pub fn n_blocks(&self) -> usize {
        self.z.len()
    }

    pub fn block(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        if i >= j {
            (j >= self.first[i]).then(|| self.z[i][j - self.first[i]].clone())
        } else {
            (i >= self.first[j]).then(|| self.z[j][i - self.first[j]].transpose())
        }
    }
}
