//! Matsubara series, their Poisson closed forms, the ζ kernel and the ã matrix-element kernels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::foundation::{norm, BoxGrid, Potential, SampledProfile};
use crate::linalg::CMat;
use crate::tibcs::{dispersion, kt_multiplier};

/// ζ(2), ζ(4), …, ζ(18).
const ZETA_EVEN: [f64; 9] = [
    1.644_934_066_848_226_4,
    1.082_323_233_711_138_2,
    1.017_343_061_984_449,
    1.004_077_356_197_944_3,
    1.000_994_575_127_818_1,
    1.000_246_086_553_308,
    1.000_061_248_135_058_7,
    1.000_015_282_259_408_7,
    1.000_003_817_293_264_9,
];

/// expm1(y)/y, equal to 1 at y = 0.
fn expm1_ratio(y: f64) -> f64 {
    if y.abs() < 1e-5 {
        1.0 + y / 2.0 + y * y / 6.0
    } else {
        y.exp_m1() / y
    }
}

/// Partial sum of x/tanh(x/2T) = 2T + 4T Σ x²/(x² + c²n²), c = 2πT, with an integral tail bound.
///
/// The exact value lies in [approx, approx + tail].
pub fn xcoth_series(x: f64, t: f64, n: usize) -> Result<(f64, f64)> {
    if !(t > 0.0) || n == 0 {
        return Err(invalid("xcoth_series needs T > 0 and N ≥ 1"));
    }
    if x == 0.0 {
        return Ok((2.0 * t, 0.0));
    }
    let c = 2.0 * PI * t;
    let x2 = x * x;
    // Sum small terms first.
    let sum: f64 = (1..=n).rev().map(|k| x2 / (x2 + (c * k as f64).powi(2))).sum();
    let ax = x.abs();
    let tail = 4.0 * t * (ax / c) * (PI / 2.0 - (c * n as f64 / ax).atan());
    Ok((2.0 * t + 4.0 * t * sum, tail))
}

/// Fourier transform ∫ x²/((a²+x²)(b²+x²)) e^{−2πikx} dx = π/(a²−b²)(a e^{−2πa|k|} − b e^{−2πb|k|}).
pub fn lorentzian_pair_ft(a: f64, b: f64, k: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid(format!("a and b must be positive, got ({a}, {b})")));
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let lam = 2.0 * PI * k.abs();
    // [a e^{−λa} − b e^{−λb}]/(a − b) = e^{−λb}[1 − λa E₁(−λ(a−b))], E₁(y) = expm1(y)/y.
    let dd = (-lam * lo).exp() * (1.0 - lam * hi * expm1_ratio(-lam * (hi - lo)));
    Ok(PI / (a + b) * dd)
}

/// The a = b value π e^{−2πa|k|}(1 − 2πa|k|)/(2a).
pub fn lorentzian_pair_ft_limit(a: f64, k: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    let lam = 2.0 * PI * k.abs();
    Ok(PI * (-lam * a).exp() * (1.0 - lam * a) / (2.0 * a))
}

/// x/(1 − e^{−2πx}), equal to 1/(2π) at x = 0.
fn bose_ratio(x: f64) -> f64 {
    let y = 2.0 * PI * x;
    if y.abs() < 1e-4 {
        (1.0 + y / 2.0 + y * y / 12.0) / (2.0 * PI)
    } else {
        x / -(-y).exp_m1()
    }
}

/// Σ_{n≥1} n²/((a²+n²)(b²+n²)) for a, b ≥ 0.
fn matsubara_sum_unchecked(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi < 0.1 {
        // n²/((a²+n²)(b²+n²)) = Σ_k (−1)^k h_k(a², b²)/n^{2k+2}, h_k the complete symmetric polynomial.
        let (x, y) = (hi * hi, lo * lo);
        let mut s = 0.0;
        let mut hk = 1.0;
        let mut ypow = 1.0;
        for (k, z) in ZETA_EVEN.iter().enumerate() {
            if k > 0 {
                ypow *= y;
                hk = x * hk + ypow;
            }
            s += if k % 2 == 0 { hk * z } else { -hk * z };
        }
        return s;
    }
    let dd = if hi - lo > 0.25 * hi {
        (bose_ratio(hi) - bose_ratio(lo)) / (hi - lo)
    } else {
        let eb = (-2.0 * PI * lo).exp();
        let one_a = -(-2.0 * PI * hi).exp_m1();
        let one_b = -(-2.0 * PI * lo).exp_m1();
        (one_b - 2.0 * PI * lo * eb * expm1_ratio(-2.0 * PI * (hi - lo))) / (one_a * one_b)
    };
    -PI / (2.0 * (a + b)) + PI / (a + b) * dd
}

/// Closed form of Σ_{n≥1} n²/((a²+n²)(b²+n²)).
pub fn matsubara_sum(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid(format!("a and b must be positive, got ({a}, {b})")));
    }
    Ok(matsubara_sum_unchecked(a, b))
}

/// How a kernel value was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KernelMethod {
    Series { terms: usize },
    ClosedForm,
}

/// A kernel value with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub p: f64,
    pub q: f64,
    pub value: f64,
    pub method: KernelMethod,
    pub tail_bound: f64,
}

/// ζ = Σ_{n≥1} 2c²n²/((Ep² + c²n²)(Eq² + c²n²)), c = 2πT.
pub fn zeta_kernel(ep: f64, eq: f64, t: f64, method: KernelMethod) -> Result<KernelEval> {
    if !(t > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {t}")));
    }
    if !(ep >= 0.0 && eq >= 0.0) {
        return Err(invalid("energies must be nonnegative"));
    }
    let c = 2.0 * PI * t;
    let (a, b) = (ep / c, eq / c);
    let (value, tail_bound) = match method {
        KernelMethod::Series { terms } => {
            if terms == 0 {
                return Err(invalid("series needs at least one term"));
            }
            let (a2, b2) = (a * a, b * b);
            let s: f64 = (1..=terms)
                .rev()
                .map(|n| {
                    let n2 = (n * n) as f64;
                    n2 / ((a2 + n2) * (b2 + n2))
                })
                .sum();
            (2.0 / (c * c) * s, 2.0 / (c * c * terms as f64))
        }
        KernelMethod::ClosedForm => {
            let v = 2.0 / (c * c) * matsubara_sum_unchecked(a, b);
            (v, 8.0 * f64::EPSILON * v.abs())
        }
    };
    Ok(KernelEval { p: ep, q: eq, value, method, tail_bound })
}

fn zeta_closed(ep: f64, eq: f64, t: f64) -> f64 {
    let c = 2.0 * PI * t;
    2.0 / (c * c) * matsubara_sum_unchecked(ep / c, eq / c)
}

/// Inputs shared by the ã kernels.
#[derive(Debug, Clone, Copy)]
pub struct KernelModel<'a> {
    pub w: &'a Potential,
    pub delta: SampledProfile<'a>,
    pub mu: f64,
    pub t: f64,
    pub dims: usize,
}

/// (ã₁₁, ã₁₂) at momenta p, q (only the first `dims` components are used).
pub fn a_tilde_kernels(p: [f64; 3], q: [f64; 3], h: f64, model: &KernelModel) -> Result<(f64, f64)> {
    if !(model.t > 0.0) || !(h > 0.0) {
        return Err(invalid("T and h must be positive"));
    }
    model.w.check_dims(model.dims)?;
    let (pn, qn) = (norm(p), norm(q));
    let dp = model.delta.at(h * pn)?;
    let dq = model.delta.at(h * qn)?;
    let diff = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let w = h * h * model.w.fourier_nd(model.dims, norm(diff));
    if w == 0.0 {
        return Ok((0.0, 0.0));
    }
    let ep = dispersion(h * pn, model.mu).hypot(dp);
    let eq = dispersion(h * qn, model.mu).hypot(dq);
    let z = zeta_closed(ep, eq, model.t);
    let a11 = w * (dispersion(h * pn, model.mu) + dispersion(h * qn, model.mu)) * z;
    let a12 = if p == q { 0.0 } else { w * (dp - dq) * z };
    Ok((a11, a12))
}

/// Largest singular value by power iteration on B†B, stopping at relative change `rtol`.
pub fn operator_norm(b: &CMat, rtol: f64, maxiter: usize) -> Result<f64> {
    let n = b.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.01 * i as f64, 0.003 * i as f64));
    v /= Complex64::new(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..maxiter {
        let bv = b * &v;
        let next = bv.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        let w = b.adjoint() * bv;
        let wn = w.norm();
        v = w / Complex64::new(wn, 0.0);
        if (next - sigma).abs() <= rtol * next {
            return Ok(next.max(sigma));
        }
        sigma = next;
    }
    Err(Error::Numerical(format!("power iteration did not reach relative change {rtol:e} in {maxiter} steps")))
}

/// Position-space matrices (1+x²) ã_{1j} (1+x²) on one box.
pub fn weighted_kernel_matrices(bx: &BoxGrid, model: &KernelModel) -> Result<(CMat, CMat)> {
    if bx.dims != model.dims {
        return Err(invalid("box and model dimensions differ"));
    }
    let m = bx.size();
    let h = bx.h;
    let moms: Vec<[f64; 3]> = (0..m).map(|i| bx.momentum(i)).collect();
    let measure = (bx.dual_spacing() / (2.0 * PI).sqrt()).powi(bx.dims as i32);
    let rows: Vec<Result<Vec<(f64, f64)>>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| a_tilde_kernels(moms[i], moms[j], h, model)).collect())
        .collect();
    let mut a11 = CMat::zeros(m, m);
    let mut a12 = CMat::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, (x, y)) in row?.into_iter().enumerate() {
            a11[(i, j)] = Complex64::new(measure * x, 0.0);
            a12[(i, j)] = Complex64::new(measure * y, 0.0);
        }
    }
    let f = bx.dft_matrix();
    let weight: Vec<f64> = (0..m).map(|j| 1.0 + bx.position_norm(j).powi(2)).collect();
    let weighted = |a: &CMat| -> CMat {
        let mut pos = &f * a * f.adjoint();
        for i in 0..m {
            for j in 0..m {
                pos[(i, j)] *= weight[i] * weight[j];
            }
        }
        pos
    };
    Ok((weighted(&a11), weighted(&a12)))
}

/// Weighted operator norms ‖(1+x²) ã_{1j} (1+x²)‖ on one box.
pub fn weighted_kernel_norms(bx: &BoxGrid, model: &KernelModel) -> Result<(f64, f64)> {
    let (b11, b12) = weighted_kernel_matrices(bx, model)?;
    Ok((operator_norm(&b11, 1e-6, 100_000)?, operator_norm(&b12, 1e-6, 100_000)?))
}

/// Fitted exponents of the weighted ã norms against h, with the norms themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelScaling {
    pub h: Vec<f64>,
    pub norm11: Vec<f64>,
    pub norm12: Vec<f64>,
    pub e11: f64,
    pub e12: f64,
}

pub fn weighted_norm_scaling(h_list: &[f64], bx: &BoxGrid, model: &KernelModel) -> Result<KernelScaling> {
    if h_list.len() < 4 {
        return Err(invalid("the scaling fit needs at least four values of h"));
    }
    let mut norm11 = Vec::new();
    let mut norm12 = Vec::new();
    for &h in h_list {
        let (a, b) = weighted_kernel_norms(&bx.with_h(h)?, model)?;
        norm11.push(a);
        norm12.push(b);
    }
    if norm11.iter().chain(&norm12).any(|&v| v == 0.0) {
        return Err(Error::DegenerateFit("kernel norms vanish".into()));
    }
    let (e11, _) = crate::bdg::scaling_fit(h_list, &norm11)?;
    let (e12, _) = crate::bdg::scaling_fit(h_list, &norm12)?;
    Ok(KernelScaling { h: h_list.to_vec(), norm11, norm12, e11, e12 })
}

/// E/tanh(E/2T) through the series with `terms` terms, returned as approx + tail.
pub fn xcoth_estimate(x: f64, t: f64, terms: usize) -> Result<f64> {
    let (a, tail) = xcoth_series(x, t, terms)?;
    Ok(a + tail)
}

/// Closed form x/tanh(x/2T).
pub fn xcoth_closed(x: f64, t: f64) -> Result<f64> {
    kt_multiplier(x, t)
}
