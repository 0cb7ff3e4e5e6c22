//! Dense row-major tensors over `f64`.
//!
//! Only what the fixed MLP topology needs: 1-D and 2-D tensors, GEMM
//! (delegated to `matrixmultiply`), and a few element-wise helpers.
//! Shape mismatches are programmer errors and panic via `assert!`;
//! non-finite values trip a `debug_assert` after every op.

use crate::error::{Result, SoftqError};

/// Dense tensor: a shape and a flat row-major `f64` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(SoftqError::invalid(format!(
                "shape {:?} wants {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(SoftqError::invalid("non-finite tensor entry"));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 2-D constructor from nested rows; rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(SoftqError::invalid("ragged rows"));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Tensor::from_vec(&[r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() needs a 2-D tensor");
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() needs a 2-D tensor");
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn debug_check(&self, op: &str) {
        debug_assert!(self.is_finite(), "non-finite value after {op}");
    }

    /// Horizontal concatenation of two 2-D tensors with equal row counts.
    pub fn hcat(a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.rows(), b.rows(), "hcat row mismatch");
        let (n, ca, cb) = (a.rows(), a.cols(), b.cols());
        let mut data = Vec::with_capacity(n * (ca + cb));
        for r in 0..n {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        Tensor {
            shape: vec![n, ca + cb],
            data,
        }
    }

    /// Column slice `[from, to)` of a 2-D tensor.
    pub fn col_slice(&self, from: usize, to: usize) -> Tensor {
        assert!(from <= to && to <= self.cols(), "column range out of bounds");
        let n = self.rows();
        let mut data = Vec::with_capacity(n * (to - from));
        for r in 0..n {
            data.extend_from_slice(&self.row(r)[from..to]);
        }
        Tensor {
            shape: vec![n, to - from],
            data,
        }
    }
}

/// `out = a · b` for row-major 2-D tensors, sizes `[m×k]·[k×n] = [m×n]`.
pub fn matmul_into(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(b.rows(), k, "matmul inner dimension mismatch");
    assert_eq!(out.shape(), &[m, n], "matmul output shape mismatch");
    gemm(
        m,
        k,
        n,
        a.data(),
        k as isize,
        1,
        b.data(),
        n as isize,
        1,
        0.0,
        out,
    );
    out.debug_check("matmul");
}

/// `out = a · b` allocating the output.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(&[a.rows(), b.cols()]);
    matmul_into(a, b, &mut out);
    out
}

/// `out (+)= aᵀ · b` where `a: [k×m]`, `b: [k×n]`, `out: [m×n]`.
///
/// Used for weight gradients `dW = xᵀ·δ`; `beta = 1.0` accumulates.
pub fn matmul_at_b(a: &Tensor, b: &Tensor, beta: f64, out: &mut Tensor) {
    let (k, m, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(b.rows(), k, "matmul_at_b inner dimension mismatch");
    assert_eq!(out.shape(), &[m, n], "matmul_at_b output shape mismatch");
    gemm(
        m,
        k,
        n,
        a.data(),
        1,
        m as isize,
        b.data(),
        n as isize,
        1,
        beta,
        out,
    );
    out.debug_check("matmul_at_b");
}

/// `out = a · bᵀ` where `a: [m×k]`, `b: [n×k]`, `out: [m×n]`.
///
/// Used for input gradients `dx = δ·Wᵀ`.
pub fn matmul_a_bt(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    assert_eq!(b.cols(), k, "matmul_a_bt inner dimension mismatch");
    assert_eq!(out.shape(), &[m, n], "matmul_a_bt output shape mismatch");
    gemm(
        m,
        k,
        n,
        a.data(),
        k as isize,
        1,
        b.data(),
        1,
        k as isize,
        0.0,
        out,
    );
    out.debug_check("matmul_a_bt");
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    out: &mut Tensor,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            out.data_mut().fill(0.0);
        }
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            out.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
