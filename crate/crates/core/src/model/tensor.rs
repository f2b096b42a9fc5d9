//! Row-major dense matrices and the handful of products the encoder needs.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: S) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match shape");
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(S::zero());
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out[n×m] = a[n×k] · b[m×k]ᵀ (+ bias[m])`.
pub fn matmul_nt<S: Scalar>(a: &[S], b: &[S], n: usize, k: usize, m: usize, bias: Option<&[S]>) -> Vec<S> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![S::zero(); n * m];
    for i in 0..n {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = bias.map_or(S::zero(), |b| b[j]);
            for (x, y) in ar.iter().zip(br) {
                acc += *x * *y;
            }
            out[i * m + j] = acc;
        }
    }
    out
}

/// `out[n×m] = a[n×k] · b[k×m]`.
pub fn matmul_nn<S: Scalar>(a: &[S], b: &[S], n: usize, k: usize, m: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut out = vec![S::zero(); n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o += av * *bv;
            }
        }
    }
    out
}

/// `acc[n×m] += a[k×n]ᵀ · b[k×m]`.
pub fn add_matmul_tn<S: Scalar>(acc: &mut [S], a: &[S], b: &[S], k: usize, n: usize, m: usize) {
    debug_assert_eq!(acc.len(), n * m);
    for p in 0..k {
        let arow = &a[p * n..(p + 1) * n];
        let brow = &b[p * m..(p + 1) * m];
        for (i, av) in arow.iter().enumerate() {
            if *av == S::zero() {
                continue;
            }
            for (o, bv) in acc[i * m..(i + 1) * m].iter_mut().zip(brow) {
                *o += *av * *bv;
            }
        }
    }
}

/// `acc[m] += Σ_rows x[n×m]`.
pub fn add_col_sums<S: Scalar>(acc: &mut [S], x: &[S], m: usize) {
    for row in x.chunks_exact(m) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree() {
        // a: 2×3, b: 3×2
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let nn = matmul_nn(&a, &b, 2, 3, 2);
        assert_eq!(nn, [58.0, 64.0, 139.0, 154.0]);
        // bᵀ as 2×3 row-major
        let bt = [7.0, 9.0, 11.0, 8.0, 10.0, 12.0];
        assert_eq!(matmul_nt(&a, &bt, 2, 3, 2, None), nn);
        assert_eq!(matmul_nt(&a, &bt, 2, 3, 2, Some(&[1.0, -1.0])), [59.0, 63.0, 140.0, 153.0]);
        // aᵀ·a = 3×3
        let mut acc = vec![0.0; 9];
        add_matmul_tn(&mut acc, &a, &a, 2, 3, 3);
        assert_eq!(acc, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        let mut cs = vec![0.0; 3];
        add_col_sums(&mut cs, &a, 3);
        assert_eq!(cs, [5.0, 7.0, 9.0]);
    }
}
