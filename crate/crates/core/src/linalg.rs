//! Dense complex helpers built on real `f64` GEMM.
//!
//! nalgebra only routes `f64`/`f32` products through `matrixmultiply`; complex
//! products fall back to a naive triple loop. Every hot path here splits complex
//! matrices into real and imaginary parts and multiplies those instead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn split(m: &CMatrix) -> (RMatrix, RMatrix) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub fn join(re: &RMatrix, im: &RMatrix) -> CMatrix {
    re.zip_map(im, C64::new)
}

/// `r * m` for real `r` and complex `m`.
pub fn real_left_mul(r: &RMatrix, m: &CMatrix) -> CMatrix {
    let (re, im) = split(m);
    join(&(r * re), &(r * im))
}

/// `m * r` for complex `m` and real `r`.
pub fn real_right_mul(m: &CMatrix, r: &RMatrix) -> CMatrix {
    let (re, im) = split(m);
    join(&(re * r), &(im * r))
}

/// General complex product through four real products.
pub fn complex_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut re = &ar * &br;
    re.gemm(-1.0, &ai, &bi, 1.0);
    let mut im = &ar * &bi;
    im.gemm(1.0, &ai, &br, 1.0);
    join(&re, &im)
}

/// `tr[(A A†)^2]` for an `n x m` amplitude matrix `A`.
///
/// Uses the `m x m` Gram `A† A`, whose squared Frobenius norm is the same
/// number. Real part `ReAᵀReA + ImAᵀImA`, imaginary part `ReAᵀImA - ImAᵀReA`.
pub fn gram_purity(a: &CMatrix) -> f64 {
    let (re, im) = split(a);
    let re_t = re.transpose();
    let im_t = im.transpose();
    let mut p = &re_t * &re;
    p.gemm(1.0, &im_t, &im, 1.0);
    let mut q = &re_t * &im;
    q.gemm(-1.0, &im_t, &re, 1.0);
    p.norm_squared() + q.norm_squared()
}

/// `exp(coeff * h)` for Hermitian `h`, through its eigendecomposition.
pub fn hermitian_expm(h: &CMatrix, coeff: C64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| (coeff * l).exp()),
    );
    let w = &eig.eigenvectors;
    let mut scaled = w.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    complex_mul(&scaled, &w.adjoint())
}

/// Dense matrix exponential of an arbitrary complex matrix by scaling and
/// squaring a truncated Taylor series. Only used by small test oracles.
pub fn expm_taylor(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / C64::from(2f64.powi(squarings as i32));
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &scaled / C64::from(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |U†U - 1|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&complex_mul(&u.adjoint(), u), &CMatrix::identity(n, n))
}

pub fn real_to_complex(m: &RMatrix) -> CMatrix {
    m.map(C64::from)
}

/// Kronecker product `a ⊗ b` with the row index of `a` slowest.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn vec_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
