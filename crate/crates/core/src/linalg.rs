//! Small dense linear-algebra helpers for Hermitian matrix functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Largest entry of |A − A†|.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Eigen-decomposition of the Hermitian part of `a`, eigenvalues ascending.
pub fn eigh(a: &CMat) -> (DVector<f64>, CMat) {
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vecs = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// V diag(f(λ)) V†.
pub fn spectral_apply(vals: &DVector<f64>, vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let mut scaled = vecs.clone();
    for (k, &l) in vals.iter().enumerate() {
        let fk = f(l);
        scaled.column_mut(k).scale_mut(fk);
    }
    scaled * vecs.adjoint()
}

/// f(A) for Hermitian A.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(a);
    spectral_apply(&vals, &vecs, f)
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_opnorm(a: &CMat) -> f64 {
    eigvalsh(a).iter().fold(0.0, |m, l| m.max(l.abs()))
}

/// Re Tr(A B) without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

/// Σ |a_ij|².
pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_fn(4, 4, |i, j| {
            let (a, b) = (i as f64, j as f64);
            Complex64::new((a + b).cos(), if i == j { 0.0 } else { (a - b).sin() })
        })
    }

    #[test]
    fn function_reconstructs_matrix() {
        let a = sample();
        assert!(hermitian_defect(&a) < 1e-15);
        let back = hermitian_function(&a, |x| x);
        assert!(max_abs(&(back - &a)) < 1e-12);
    }

    #[test]
    fn square_function_is_square() {
        let a = sample();
        let sq = hermitian_function(&a, |x| x * x);
        assert!(max_abs(&(sq - &a * &a)) < 1e-12);
        assert!((trace_product_re(&a, &a) - frobenius_sq(&a)).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted() {
        let v = eigvalsh(&sample());
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!((hermitian_opnorm(&sample()) - v[0].abs().max(v[3].abs())).abs() < 1e-14);
    }
}
