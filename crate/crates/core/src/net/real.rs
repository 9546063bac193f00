//! Scalar abstraction over `f32`/`f64` with a row-major GEMM.

use num_traits::Float;
use std::fmt::{Debug, Display};

pub trait Real: Float + Default + Debug + Display + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `tanh` for activations, cheaper than the standard one at this precision.
    fn tanh_fast(self) -> Self;

    /// `C ← alpha·A·B + beta·C` with explicit strides (elements).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );
}

fn check_bounds(m: usize, k: usize, n: usize, a: usize, rsa: isize, csa: isize, b: usize, rsb: isize, csb: isize, c: usize) {
    let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(span(m, k, rsa, csa) as usize <= a, "gemm: A too small");
    assert!(span(k, n, rsb, csb) as usize <= b, "gemm: B too small");
    assert!(m * n <= c, "gemm: C too small");
}

/// Odd rational minimax fit on `[-7.9, 7.9]`, max abs error ≈ 4e-7;
/// branch-free so the activation loops vectorize.
#[inline]
fn tanh_f32(x: f32) -> f32 {
    let x = x.clamp(-7.905_311, 7.905_311);
    let x2 = x * x;
    let mut p = -2.760_768_4e-16f32;
    p = p * x2 + 2.000_187_9e-13;
    p = p * x2 + -8.604_672e-11;
    p = p * x2 + 5.122_297e-8;
    p = p * x2 + 1.485_722_4e-5;
    p = p * x2 + 6.372_619_3e-4;
    p = p * x2 + 4.893_524_6e-3;
    let mut q = 1.198_258_4e-6f32;
    q = q * x2 + 1.185_347_1e-4;
    q = q * x2 + 2.268_434_6e-3;
    q = q * x2 + 4.893_525e-3;
    x * p / q
}

#[inline]
fn tanh_f64(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

macro_rules! impl_real {
    ($t:ty, $gemm:path, $tanh:path) => {
        impl Real for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn tanh_fast(self) -> Self {
                $tanh(self)
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
            ) {
                check_bounds(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len());
                // SAFETY: extents checked above; C is row-major m×n and does
                // not alias A or B (distinct borrows).
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm, tanh_f32);
impl_real!(f64, matrixmultiply::dgemm, tanh_f64);

/// `C = A·B` (`beta = 0`) or `C += A·B` (`beta = 1`), all row-major.
pub fn matmul<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, k as isize, 1, b, n as isize, 1, beta, c);
}

/// `C = Aᵀ·B` where `A` is stored `k×m` row-major.
pub fn matmul_tn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, 1, m as isize, b, n as isize, 1, beta, c);
}

/// `C = A·Bᵀ` where `B` is stored `n×k` row-major.
pub fn matmul_nt<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, k as isize, 1, b, 1, k as isize, beta, c);
}
