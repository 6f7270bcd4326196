//! Row-major dense matrices and the blocked matrix products used by the
//! network code.
//!
//! Products are delegated to `matrixmultiply::dgemm` on disjoint row blocks
//! of the output. The block size depends only on the operand shapes, and each
//! output entry is reduced by a single dgemm call, so results are identical
//! whether blocks run sequentially or in parallel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch {
                left: rows * cols,
                right: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact would yield nothing for zero-width rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// New matrix made of the listed rows, in the listed order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Per-column sums accumulated in ascending row order.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows.max(1) as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Plain,
    Transposed,
}

impl Op {
    /// (rows, cols, row stride, col stride) of `op(m)`.
    fn layout(self, m: &Matrix) -> (usize, usize, usize, usize) {
        match self {
            Op::Plain => (m.rows, m.cols, m.cols, 1),
            Op::Transposed => (m.cols, m.rows, 1, m.cols),
        }
    }
}

const GEMM_BLOCK_ROWS: usize = 64;

/// `c = op(a) · op(b)`, or `c += op(a) · op(b)` when `accumulate` is set.
pub(crate) fn gemm(a: &Matrix, op_a: Op, b: &Matrix, op_b: Op, c: &mut Matrix, accumulate: bool) {
    let (m, k, rsa, csa) = op_a.layout(a);
    let (kb, n, rsb, csb) = op_b.layout(b);
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (m, n), "output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.data.fill(0.0);
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // Fixed row blocks (independent of the thread count) large enough that
    // dgemm's packing of `op(b)`, repeated per block, stays cheap.
    let block_rows = GEMM_BLOCK_ROWS.min(m);
    let a_data = a.data.as_slice();
    let b_data = b.data.as_slice();
    par::for_each_chunk_mut(&mut c.data, block_rows * n, |bi, c_block| {
        let i0 = bi * block_rows;
        let rows = c_block.len() / n;
        let a_off = i0 * rsa;
        // Last element touched in `a` for this block.
        let a_end = a_off + (rows - 1) * rsa + (k - 1) * csa;
        assert!(a_end < a_data.len());
        assert!((k - 1) * rsb + (n - 1) * csb < b_data.len());
        // SAFETY: the asserts above keep every index dgemm forms inside the
        // borrowed slices, and `c_block` is an exclusive row block of `c`.
        unsafe {
            matrixmultiply::dgemm(
                rows,
                k,
                n,
                1.0,
                a_data.as_ptr().add(a_off),
                rsa as isize,
                csa as isize,
                b_data.as_ptr(),
                rsb as isize,
                csb as isize,
                beta,
                c_block.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    });
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(rows: usize, cols: usize, seed: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|i| ((i as f64 + 1.0) * seed).sin())
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn naive(a: &Matrix, ta: Op, b: &Matrix, tb: Op) -> Matrix {
        let at = |i, p| {
            if ta == Op::Plain {
                a.get(i, p)
            } else {
                a.get(p, i)
            }
        };
        let bt = |p, j| {
            if tb == Op::Plain {
                b.get(p, j)
            } else {
                b.get(j, p)
            }
        };
        let (m, k, ..) = ta.layout(a);
        let (_, n, ..) = tb.layout(b);
        let mut c = Matrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += at(i, p) * bt(p, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_for_all_layouts() {
        let a = filled(37, 19, 0.7);
        let b = filled(19, 23, 1.3);
        let cases = [
            (a.clone(), Op::Plain, b.clone(), Op::Plain),
            (filled(19, 37, 0.2), Op::Transposed, b.clone(), Op::Plain),
            (a.clone(), Op::Plain, filled(23, 19, 0.9), Op::Transposed),
            (
                filled(19, 37, 0.4),
                Op::Transposed,
                filled(23, 19, 0.5),
                Op::Transposed,
            ),
        ];
        for (a, ta, b, tb) in cases {
            let (m, ..) = ta.layout(&a);
            let (_, n, ..) = tb.layout(&b);
            let mut c = Matrix::zeros(m, n);
            gemm(&a, ta, &b, tb, &mut c, false);
            let want = naive(&a, ta, &b, tb);
            for (x, y) in c.as_slice().iter().zip(want.as_slice()) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn accumulate_adds_onto_existing() {
        let a = filled(4, 3, 0.3);
        let b = filled(3, 5, 0.8);
        let mut once = Matrix::zeros(4, 5);
        gemm(&a, Op::Plain, &b, Op::Plain, &mut once, false);
        let mut twice = once.clone();
        gemm(&a, Op::Plain, &b, Op::Plain, &mut twice, true);
        for (x, y) in once.as_slice().iter().zip(twice.as_slice()) {
            assert!((2.0 * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn blocked_product_is_bit_identical_to_sequential() {
        // 200 rows with k*n large forces many blocks.
        let a = filled(200, 300, 0.11);
        let b = filled(300, 250, 0.07);
        let mut par_c = Matrix::zeros(200, 250);
        gemm(&a, Op::Plain, &b, Op::Plain, &mut par_c, false);
        let mut seq_c = Matrix::zeros(200, 250);
        par::sequential(|| gemm(&a, Op::Plain, &b, Op::Plain, &mut seq_c, false));
        assert_eq!(par_c, seq_c);
        // and a single unblocked call agrees bit for bit
        let mut whole = Matrix::zeros(200, 250);
        unsafe {
            matrixmultiply::dgemm(
                200,
                300,
                250,
                1.0,
                a.as_slice().as_ptr(),
                300,
                1,
                b.as_slice().as_ptr(),
                250,
                1,
                0.0,
                whole.as_mut_slice().as_mut_ptr(),
                250,
                1,
            );
        }
        assert_eq!(par_c, whole);
    }

    #[test]
    fn from_rows_rejects_ragged() {
        let err = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 1
            }
        ));
    }
}
