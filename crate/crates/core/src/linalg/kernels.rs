//! Matrix product.
//!
//! Every output element is accumulated as `((0 + a0*b0) + a1*b1) + ...` with
//! the inner index ascending, so results are bitwise identical to a naive
//! triple loop. The register tiling below only changes which elements are
//! computed together, never the summation order within one element.

use super::Matrix;
use crate::error::{Error, Result};

const KC: usize = 256;

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("{}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    Ok(product(a.data(), b.data(), m, k, n, Layout::NN))
}

/// `a * bᵀ` without forming the transpose; bitwise equal to
/// `matmul(a, &b.transpose())`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::shape(
            "matmul_nt",
            format!("{}x{} times ({}x{})ᵀ", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    Ok(product(a.data(), b.data(), m, k, n, Layout::NT))
}

/// `aᵀ * b` without forming the transpose; bitwise equal to
/// `matmul(&a.transpose(), b)`.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "matmul_tn",
            format!("({}x{})ᵀ times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (m, k, n) = (a.cols(), a.rows(), b.cols());
    Ok(product(a.data(), b.data(), m, k, n, Layout::TN))
}

fn product(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, layout: Layout) -> Matrix {
    let mut out = vec![0.0; m * n];
    gemm(&Operands { a, b, m, k, n, layout }, &mut out);
    Matrix::from_vec_unchecked(m, n, out)
}

/// Which operand is stored transposed.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Layout {
    NN,
    NT,
    TN,
}

struct Operands<'a> {
    a: &'a [f64],
    b: &'a [f64],
    m: usize,
    k: usize,
    n: usize,
    layout: Layout,
}

impl Operands<'_> {
    #[inline(always)]
    fn a_at(&self, i: usize, p: usize) -> f64 {
        match self.layout {
            Layout::TN => self.a[p * self.m + i],
            _ => self.a[i * self.k + p],
        }
    }
}

/// `c = a * b` for row-major slices; `c` must be zeroed.
///
/// Picks the widest tile the CPU supports. Every variant performs the same
/// scalar operations per element (separate multiply and add, never fused), so
/// they agree bitwise.
fn gemm(ops: &Operands<'_>, c: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { simd::gemm_avx512(ops, c) };
        }
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { simd::gemm_avx(ops, c) };
        }
    }
    gemm_packed::<4, 8>(ops, c, None)
}

/// Full-tile kernel: `c[MR x NR] += apack * bpack` over `kc` packed steps.
/// Unsafe because the caller guarantees the CPU feature and the bounds.
type Tile = unsafe fn(ap: &[f64], bp: &[f64], c: &mut [f64], ldc: usize);

/// Packed `MR x NR` register tiling.
///
/// The inner dimension is split into ascending blocks of `KC`; each block adds
/// onto the partial sums left by the previous one, which keeps the per-element
/// order intact. Within a block `A` is packed as `MR`-row strips and each `B`
/// column panel as a contiguous `KC x NR` slab, both zero padded at the edges.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gemm_packed<const MR: usize, const NR: usize>(ops: &Operands<'_>, c: &mut [f64], tile: Option<Tile>) {
    let (m, k, n) = (ops.m, ops.k, ops.n);
    let strips = m.div_ceil(MR);
    let mut apack = vec![0.0; strips * MR * KC.min(k)];
    let mut bpack = vec![0.0; KC.min(k) * NR];
    for p0 in (0..k).step_by(KC) {
        let kc = (p0 + KC).min(k) - p0;
        for s in 0..strips {
            let strip = &mut apack[s * MR * kc..(s + 1) * MR * kc];
            for r in 0..MR {
                let i = s * MR + r;
                if i < m {
                    for q in 0..kc {
                        strip[q * MR + r] = ops.a_at(i, p0 + q);
                    }
                } else {
                    for q in 0..kc {
                        strip[q * MR + r] = 0.0;
                    }
                }
            }
        }
        for j in (0..n).step_by(NR) {
            let w = NR.min(n - j);
            if ops.layout == Layout::NT {
                for t in 0..NR {
                    for q in 0..kc {
                        bpack[q * NR + t] = if t < w { ops.b[(j + t) * k + p0 + q] } else { 0.0 };
                    }
                }
            } else {
                for q in 0..kc {
                    let src = &ops.b[(p0 + q) * n + j..(p0 + q) * n + j + w];
                    let dst = &mut bpack[q * NR..(q + 1) * NR];
                    dst[..w].copy_from_slice(src);
                    dst[w..].fill(0.0);
                }
            }
            for s in 0..strips {
                let i = s * MR;
                let h = MR.min(m - i);
                let ap = &apack[i * kc..(i + MR) * kc];
                let bp = &bpack[..kc * NR];
                match tile {
                    Some(f) if h == MR && w == NR => {
                        let end = (i + MR - 1) * n + j + NR;
                        // SAFETY: the dispatcher checked the CPU feature; the
                        // tile covers rows i..i+MR and columns j..j+NR of c.
                        unsafe { f(ap, bp, &mut c[i * n + j..end], n) }
                    }
                    _ => micro_kernel::<MR, NR>(ap, bp, c, i, j, h, w, n),
                }
            }
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro_kernel<const MR: usize, const NR: usize>(ap: &[f64], bp: &[f64], c: &mut [f64], i: usize, j: usize, h: usize, w: usize, n: usize) {
    let mut acc = [[0.0f64; NR]; MR];
    for r in 0..h {
        acc[r][..w].copy_from_slice(&c[(i + r) * n + j..(i + r) * n + j + w]);
    }
    for (av, bv) in ap.chunks_exact(MR).zip(bp.chunks_exact(NR)) {
        let bv: &[f64; NR] = bv.try_into().unwrap();
        for (row, &x) in acc[..h].iter_mut().zip(av) {
            for t in 0..NR {
                row[t] += x * bv[t];
            }
        }
    }
    for r in 0..h {
        c[(i + r) * n + j..(i + r) * n + j + w].copy_from_slice(&acc[r][..w]);
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;

    use super::Operands;

    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn gemm_avx512(ops: &Operands<'_>, c: &mut [f64]) {
        super::gemm_packed::<6, 16>(ops, c, Some(tile_avx512))
    }

    #[target_feature(enable = "avx")]
    pub(super) unsafe fn gemm_avx(ops: &Operands<'_>, c: &mut [f64]) {
        super::gemm_packed::<6, 8>(ops, c, Some(tile_avx))
    }

    /// 6x16 tile in twelve zmm accumulators. `c` starts at the tile's top-left.
    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn tile_avx512(ap: &[f64], bp: &[f64], c: &mut [f64], ldc: usize) {
        let kc = bp.len() / 16;
        debug_assert!(ap.len() == 6 * kc && c.len() >= 5 * ldc + 16);
        let cp = c.as_mut_ptr();
        let mut acc = [[_mm512_setzero_pd(); 2]; 6];
        for (r, row) in acc.iter_mut().enumerate() {
            row[0] = _mm512_loadu_pd(cp.add(r * ldc));
            row[1] = _mm512_loadu_pd(cp.add(r * ldc + 8));
        }
        let (mut a, mut b) = (ap.as_ptr(), bp.as_ptr());
        for _ in 0..kc {
            let b0 = _mm512_loadu_pd(b);
            let b1 = _mm512_loadu_pd(b.add(8));
            for (r, row) in acc.iter_mut().enumerate() {
                let av = _mm512_set1_pd(*a.add(r));
                row[0] = _mm512_add_pd(row[0], _mm512_mul_pd(av, b0));
                row[1] = _mm512_add_pd(row[1], _mm512_mul_pd(av, b1));
            }
            a = a.add(6);
            b = b.add(16);
        }
        for (r, row) in acc.iter().enumerate() {
            _mm512_storeu_pd(cp.add(r * ldc), row[0]);
            _mm512_storeu_pd(cp.add(r * ldc + 8), row[1]);
        }
    }

    /// 6x8 tile in twelve ymm accumulators.
    #[target_feature(enable = "avx")]
    pub(super) unsafe fn tile_avx(ap: &[f64], bp: &[f64], c: &mut [f64], ldc: usize) {
        let kc = bp.len() / 8;
        debug_assert!(ap.len() == 6 * kc && c.len() >= 5 * ldc + 8);
        let cp = c.as_mut_ptr();
        let mut acc = [[_mm256_setzero_pd(); 2]; 6];
        for (r, row) in acc.iter_mut().enumerate() {
            row[0] = _mm256_loadu_pd(cp.add(r * ldc));
            row[1] = _mm256_loadu_pd(cp.add(r * ldc + 4));
        }
        let (mut a, mut b) = (ap.as_ptr(), bp.as_ptr());
        for _ in 0..kc {
            let b0 = _mm256_loadu_pd(b);
            let b1 = _mm256_loadu_pd(b.add(4));
            for (r, row) in acc.iter_mut().enumerate() {
                let av = _mm256_set1_pd(*a.add(r));
                row[0] = _mm256_add_pd(row[0], _mm256_mul_pd(av, b0));
                row[1] = _mm256_add_pd(row[1], _mm256_mul_pd(av, b1));
            }
            a = a.add(6);
            b = b.add(8);
        }
        for (r, row) in acc.iter().enumerate() {
            _mm256_storeu_pd(cp.add(r * ldc), row[0]);
            _mm256_storeu_pd(cp.add(r * ldc + 4), row[1]);
        }
    }
}
