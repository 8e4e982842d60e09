//! Sparse intensity matrices stored row-wise, with the diagonal kept apart.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Intensity matrix of a finite continuous-time Markov chain.
///
/// Off-diagonal rates are stored in compressed rows; each diagonal entry is
/// minus the sum of its row's off-diagonal rates, so rows sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenerator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseGenerator {
    /// Assembles from off-diagonal `(row, col, rate)` contributions.
    ///
    /// Duplicates are summed; diagonal contributions are ignored since the
    /// diagonal is recomputed from the rows. Zero rates are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, r) in &triplets {
            if i >= dim || j >= dim {
                return Err(Error::DimensionMismatch(format!("entry ({i},{j}) outside {dim}x{dim}")));
            }
            if !r.is_finite() || (i != j && r < 0.0) {
                return Err(Error::InvalidParameter(format!("rate {r} at ({i},{j})")));
            }
        }
        triplets.retain(|&(i, j, _)| i != j);
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = alloc::vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut rates: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, r) in triplets {
            if let (Some(&li), Some(&lj)) = (rows.last(), cols.last()) {
                if li == i && lj == j {
                    *rates.last_mut().unwrap() += r;
                    continue;
                }
            }
            rows.push(i);
            cols.push(j);
            rates.push(r);
        }
        // drop entries that merged to zero
        let mut k = 0;
        for idx in 0..rates.len() {
            if rates[idx] != 0.0 {
                rows[k] = rows[idx];
                cols[k] = cols[idx];
                rates[k] = rates[idx];
                k += 1;
            }
        }
        rows.truncate(k);
        cols.truncate(k);
        rates.truncate(k);
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut diag = alloc::vec![0.0; dim];
        for (i, d) in diag.iter_mut().enumerate() {
            let s: f64 = rates[row_ptr[i]..row_ptr[i + 1]].iter().sum();
            *d = -s;
        }
        Ok(Self { dim, row_ptr, cols, rates, diag })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Off-diagonal nonzero count.
    pub fn nnz_offdiagonal(&self) -> usize {
        self.rates.len()
    }

    /// Off-diagonal `(col, rate)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Total exit rate of state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.diag[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, &d| m.max(-d))
    }

    /// Entry `(i, j)` including the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.rates[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// Every stored entry `(row, col, value)` in row-major order, diagonal included.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.rates.len() + self.dim);
        for i in 0..self.dim {
            let mut diag_done = false;
            for (j, r) in self.row(i) {
                if !diag_done && j > i {
                    out.push((i, i, self.diag[i]));
                    diag_done = true;
                }
                out.push((i, j, r));
            }
            if !diag_done {
                out.push((i, i, self.diag[i]));
            }
        }
        out
    }

    /// Row sum computed in storage order; zero by construction up to rounding.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, r)| r).sum::<f64>() + self.diag[i]
    }

    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dim).fold(0.0f64, |m, i| m.max(self.row_sum(i).abs()))
    }

    /// Whether state `i` has no exits.
    pub fn is_absorbing(&self, i: usize) -> bool {
        self.row_ptr[i] == self.row_ptr[i + 1]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m[(i, i)] = self.diag[i];
            for (j, r) in self.row(i) {
                m[(i, j)] = r;
            }
        }
        m
    }

    /// `L v` (column action).
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = self.diag[i] * v[i];
            for (j, r) in self.row(i) {
                s += r * v[j];
            }
            out[i] = s;
        }
    }

    /// `p L` (row action, i.e. the forward equation).
    pub fn vec_mul(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = p[i] * self.diag[i];
        }
        for i in 0..self.dim {
            let pi = p[i];
            if pi == 0.0 {
                continue;
            }
            for (j, r) in self.row(i) {
                out[j] += pi * r;
            }
        }
    }

    /// Matrix-market-style text: a size line then `row col rate` triples, 1-based.
    pub fn to_matrix_market(&self) -> String {
        let e = self.entries();
        let mut s = String::new();
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(s, "{} {} {}", self.dim, self.dim, e.len());
        for (i, j, v) in e {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }
}

/// Places a `local_dim`-square block as `I_left ⊗ block ⊗ I_right`, appending
/// its off-diagonal entries to `out`.
pub(crate) fn kron_place(
    block: &[f64],
    local_dim: usize,
    left_dim: usize,
    right_dim: usize,
    out: &mut Vec<(usize, usize, f64)>,
) {
    debug_assert_eq!(block.len(), local_dim * local_dim);
    for l in 0..left_dim {
        for a in 0..local_dim {
            for b in 0..local_dim {
                let v = block[a * local_dim + b];
                if a == b || v == 0.0 {
                    continue;
                }
                for r in 0..right_dim {
                    let i = (l * local_dim + a) * right_dim + r;
                    let j = (l * local_dim + b) * right_dim + r;
                    out.push((i, j, v));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn assembly_merges_and_fixes_diagonal() {
        let g = SparseGenerator::from_triplets(
            3,
            vec![(0, 1, 1.0), (0, 1, 0.5), (1, 2, 2.0), (2, 0, 0.25), (1, 1, 9.0)],
        )
        .unwrap();
        assert_eq!(g.get(0, 1), 1.5);
        assert_eq!(g.get(0, 0), -1.5);
        assert_eq!(g.get(1, 1), -2.0);
        assert_eq!(g.nnz_offdiagonal(), 3);
        assert_eq!(g.max_abs_row_sum(), 0.0);
        let e = g.entries();
        assert_eq!(e.len(), 6);
        assert!(e.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(SparseGenerator::from_triplets(2, vec![(0, 1, -1.0)]).is_err());
        assert!(SparseGenerator::from_triplets(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn actions_agree_with_dense() {
        let g = SparseGenerator::from_triplets(3, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (1, 0, 0.5)])
            .unwrap();
        let d = g.to_dense();
        let v = [0.3, -1.0, 2.0];
        let mut o = [0.0; 3];
        g.mul_vec(&v, &mut o);
        let dv = &d * nalgebra::DVector::from_row_slice(&v);
        for i in 0..3 {
            assert!((o[i] - dv[i]).abs() < 1e-15);
        }
        g.vec_mul(&v, &mut o);
        let vd = nalgebra::RowDVector::from_row_slice(&v) * &d;
        for i in 0..3 {
            assert!((o[i] - vd[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_market_is_one_based() {
        let g = SparseGenerator::from_triplets(2, vec![(0, 1, 2.0)]).unwrap();
        let s = g.to_matrix_market();
        assert!(s.contains("1 2 2e0"));
        assert!(s.lines().nth(1).unwrap().starts_with("2 2 3"));
    }
}
