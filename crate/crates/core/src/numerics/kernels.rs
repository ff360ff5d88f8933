//! Row-major dense matrix kernels over strided slices.
//!
//! Every kernel computes each output row with the same fixed summation order,
//! so the row-parallel variants produce results bit-identical to the
//! sequential ones regardless of thread count.

/// Work (m·n·k) below which the dispatching kernels stay sequential.
pub const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy)]
pub struct Mat<'a> {
    pub data: &'a [f64],
    pub ld: usize,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], ld: usize) -> Self {
        Self { data, ld }
    }
}

#[inline]
fn row_nn(i: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, out: &mut [f64], accumulate: bool) {
    if !accumulate {
        out[..n].fill(0.0);
    }
    let a_row = &a.data[i * a.ld..i * a.ld + k];
    for (p, &av) in a_row.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        let b_row = &b.data[p * b.ld..p * b.ld + n];
        for (o, &bv) in out[..n].iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

#[inline]
fn row_tn(i: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, out: &mut [f64], accumulate: bool) {
    if !accumulate {
        out[..n].fill(0.0);
    }
    for p in 0..k {
        let av = a.data[p * a.ld + i];
        if av == 0.0 {
            continue;
        }
        let b_row = &b.data[p * b.ld..p * b.ld + n];
        for (o, &bv) in out[..n].iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

/// Dot product with four interleaved partial sums (a fixed order, so the
/// result does not depend on which thread computes it).
#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn row_nt(i: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, out: &mut [f64], accumulate: bool) {
    let a_row = &a.data[i * a.ld..i * a.ld + k];
    for (j, o) in out[..n].iter_mut().enumerate() {
        let b_row = &b.data[j * b.ld..j * b.ld + k];
        let dot = dot(a_row, b_row);
        if accumulate {
            *o += dot;
        } else {
            *o = dot;
        }
    }
}

type RowKernel = fn(usize, usize, usize, Mat<'_>, Mat<'_>, &mut [f64], bool);

fn output_span(m: usize, n: usize, ldc: usize) -> usize {
    if m == 0 {
        0
    } else {
        (m - 1) * ldc + n
    }
}

pub mod seq {
    use super::*;

    #[allow(clippy::too_many_arguments)]
    fn run(kernel: RowKernel, m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        let span = output_span(m, n, ldc);
        for (i, row) in c[..span].chunks_mut(ldc).enumerate() {
            kernel(i, n, k, a, b, row, acc);
        }
    }

    /// `C (+)= A·B` with A `[m×k]`, B `[k×n]`.
    #[allow(clippy::too_many_arguments)]
    pub fn gemm_nn(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_nn, m, n, k, a, b, c, ldc, acc)
    }

    /// `C (+)= Aᵀ·B` with A `[k×m]`, B `[k×n]`.
    #[allow(clippy::too_many_arguments)]
    pub fn gemm_tn(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_tn, m, n, k, a, b, c, ldc, acc)
    }

    /// `C (+)= A·Bᵀ` with A `[m×k]`, B `[n×k]`.
    #[allow(clippy::too_many_arguments)]
    pub fn gemm_nt(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_nt, m, n, k, a, b, c, ldc, acc)
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use super::*;
    use rayon::prelude::*;

    #[allow(clippy::too_many_arguments)]
    fn run(kernel: RowKernel, m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        let span = output_span(m, n, ldc);
        c[..span]
            .par_chunks_mut(ldc)
            .enumerate()
            .for_each(|(i, row)| kernel(i, n, k, a, b, row, acc));
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gemm_nn(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_nn, m, n, k, a, b, c, ldc, acc)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gemm_tn(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_tn, m, n, k, a, b, c, ldc, acc)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gemm_nt(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
        run(row_nt, m, n, k, a, b, c, ldc, acc)
    }
}

macro_rules! dispatch {
    ($name:ident) => {
        #[allow(clippy::too_many_arguments)]
        pub fn $name(m: usize, n: usize, k: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], ldc: usize, acc: bool) {
            #[cfg(feature = "parallel")]
            {
                if m > 1 && m * n * k >= PARALLEL_THRESHOLD {
                    return par::$name(m, n, k, a, b, c, ldc, acc);
                }
            }
            seq::$name(m, n, k, a, b, c, ldc, acc)
        }
    };
}

dispatch!(gemm_nn);
dispatch!(gemm_tn);
dispatch!(gemm_nt);

/// Adds `bias` to each of the `rows` rows of `x` (row stride `bias.len()`).
pub fn add_row_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Accumulates column sums of `x` (row stride `out.len()`) into `out`.
pub fn accumulate_column_sums(x: &[f64], out: &mut [f64]) {
    for row in x.chunks(out.len()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
