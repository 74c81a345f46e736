//! Cooper-pair decomposition α = α₀ψ + ξ on a periodic box and the Fourier-splitting estimates
//! used for the quartic term.
//!
//! Pair fields are stored as kernel values α(x, y); the corresponding operator on ℓ²(sites) has
//! matrix ΔV·α with ΔV the cell volume. The reference kernel R(x, y) is the operator with symbol
//! α̂₀(h|p|), so that a translation-invariant BdG pair block is exactly R.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::foundation::{BoxGrid, RadialGrid, SampledProfile};
use crate::linalg::CMat;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_h(bx: &BoxGrid, h: f64) -> Result<()> {
    if (h - bx.h).abs() > 1e-14 * h.abs() {
        return Err(invalid(format!("h = {h} differs from the box value {}", bx.h)));
    }
    Ok(())
}

/// Index of the displacement x − y.
fn sub(bx: &BoxGrid, x: usize, y: usize) -> usize {
    bx.add(x, bx.neg(y))
}

/// A pair wave function α(x, y) on lattice pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    bx: BoxGrid,
    values: CMat,
    symmetric: bool,
}

impl PairField {
    pub fn new(bx: BoxGrid, values: CMat) -> Result<Self> {
        let m = bx.size();
        if values.nrows() != m || values.ncols() != m {
            return Err(invalid(format!("pair field must be {m}×{m}, got {}×{}", values.nrows(), values.ncols())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("pair field has non-finite entries"));
        }
        let scale = values.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
        let defect = (&values - values.transpose()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let symmetric = defect <= 1e-12 * scale;
        Ok(PairField { bx, values, symmetric })
    }

    /// From an operator matrix on ℓ²(sites), e.g. the α-block of a BdG state.
    pub fn from_operator(bx: BoxGrid, matrix: &CMat) -> Result<Self> {
        let dv = bx.cell_volume();
        Self::new(bx, matrix.map(|z| z / dv))
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.bx
    }

    pub fn values(&self) -> &CMat {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// ‖α‖ in L² of the pair space.
    pub fn l2_norm(&self) -> f64 {
        self.bx.cell_volume() * self.values.norm()
    }

    /// Reads the binary layout: dims (u32), n (u32), h (f64), then n^{2·dims} complex entries as
    /// (re, im) f32 pairs, row-major, all little-endian. The box length is not stored.
    pub fn read_binary<R: Read>(mut r: R, length: f64) -> Result<Self> {
        let mut buf4 = [0u8; 4];
        let mut buf8 = [0u8; 8];
        let io = |e: std::io::Error| invalid(format!("pair-field file: {e}"));
        r.read_exact(&mut buf4).map_err(io)?;
        let dims = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4).map_err(io)?;
        let n = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf8).map_err(io)?;
        let h = f64::from_le_bytes(buf8);
        let bx = BoxGrid::new(length, n, dims, h)?;
        let m = bx.size();
        if m > 1 << 14 {
            return Err(invalid(format!("pair field with {m} sites is too large")));
        }
        let mut raw = vec![0u8; m * m * 8];
        r.read_exact(&mut raw).map_err(io)?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(io)? != 0 {
            return Err(invalid("pair-field file has trailing bytes"));
        }
        let values = CMat::from_fn(m, m, |i, j| {
            let k = (i * m + j) * 8;
            let re = f32::from_le_bytes(raw[k..k + 4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(raw[k + 4..k + 8].try_into().expect("4 bytes"));
            Complex64::new(re as f64, im as f64)
        });
        Self::new(bx, values)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Internal(format!("writing pair field: {e}"));
        w.write_all(&(self.bx.dims as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.bx.n as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&self.bx.h.to_le_bytes()).map_err(io)?;
        let m = self.bx.size();
        for i in 0..m {
            for j in 0..m {
                let z = self.values[(i, j)];
                w.write_all(&(z.re as f32).to_le_bytes()).map_err(io)?;
                w.write_all(&(z.im as f32).to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// The order parameter ψ on lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderField {
    bx: BoxGrid,
    psi: Vec<Complex64>,
}

impl OrderField {
    pub fn new(bx: BoxGrid, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != bx.size() {
            return Err(invalid(format!("order field needs {} values, got {}", bx.size(), psi.len())));
        }
        Ok(OrderField { bx, psi })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.bx
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    /// Φ = |ψ|² − 1.
    pub fn phi(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr() - 1.0).collect()
    }

    /// η = |ψ| − 1, so that Φ = η² + 2η.
    pub fn eta(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm() - 1.0).collect()
    }

    /// Spectral gradient, one vector per axis.
    pub fn gradient(&self) -> Vec<Vec<Complex64>> {
        spectral_gradient(&self.bx, &self.psi)
    }

    pub fn l2_norm(&self) -> f64 {
        l2(&self.bx, &self.psi)
    }
}

fn l2(bx: &BoxGrid, f: &[Complex64]) -> f64 {
    (bx.cell_volume() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

fn l2_real(bx: &BoxGrid, f: &[f64]) -> f64 {
    lp_real(bx, f, 2.0)
}

fn lp_real(bx: &BoxGrid, f: &[f64], p: f64) -> f64 {
    (bx.cell_volume() * f.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Σ over axes of ‖∂_a f‖²_{L²}, square-rooted.
fn gradient_norm(bx: &BoxGrid, grad: &[Vec<Complex64>]) -> f64 {
    grad.iter().map(|g| l2(bx, g).powi(2)).sum::<f64>().sqrt()
}

/// Momentum component along `axis`, zero on the Nyquist plane so real fields keep real derivatives.
fn derivative_symbol(bx: &BoxGrid, idx: usize, axis: usize) -> f64 {
    if bx.is_nyquist(idx, axis) {
        0.0
    } else {
        bx.momentum(idx)[axis]
    }
}

/// ∂_a f via the DFT.
pub fn spectral_gradient(bx: &BoxGrid, f: &[Complex64]) -> Vec<Vec<Complex64>> {
    let fm = bx.dft_matrix();
    let v = DVector::from_column_slice(f);
    let hat = fm.adjoint() * v;
    (0..bx.dims)
        .map(|a| {
            let d = DVector::from_fn(hat.len(), |k, _| hat[k] * I * derivative_symbol(bx, k, a));
            (&fm * d).iter().copied().collect()
        })
        .collect()
}

/// Displacement profile ρ(z) of the reference kernel R(x, y) = ρ(x − y).
#[derive(Debug, Clone)]
pub struct ReferenceKernel {
    bx: BoxGrid,
    rho: Vec<f64>,
    symbol: Vec<f64>,
    norm_sq: f64,
}

impl ReferenceKernel {
    pub fn new(bx: &BoxGrid, alpha0: SampledProfile, h: f64) -> Result<Self> {
        check_h(bx, h)?;
        let m = bx.size();
        let symbol: Vec<f64> = (0..m).map(|k| alpha0.at(h * bx.momentum_norm(k))).collect::<Result<_>>()?;
        let scale = 1.0 / (bx.cell_volume() * m as f64);
        let origin = bx.flat([bx.n / 2; 3]);
        let rho: Vec<f64> = (0..m)
            .map(|z| {
                // Displacement of site z from the origin site.
                let xz = bx.position(z);
                let xo = bx.position(origin);
                let d = [xz[0] - xo[0], xz[1] - xo[1], xz[2] - xo[2]];
                let s: f64 = (0..m)
                    .map(|k| {
                        let p = bx.momentum(k);
                        symbol[k] * (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]).cos()
                    })
                    .sum();
                s * scale
            })
            .collect();
        // Re-index by displacement class rather than by site.
        let mut by_disp = vec![0.0; m];
        for (z, v) in rho.iter().enumerate() {
            by_disp[sub(bx, z, origin)] = *v;
        }
        let norm_sq = by_disp.iter().map(|v| v * v).sum::<f64>();
        if !(norm_sq > 0.0) {
            return Err(Error::DegenerateGap);
        }
        Ok(ReferenceKernel { bx: *bx, rho: by_disp, symbol, norm_sq })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.rho[sub(&self.bx, x, y)]
    }

    /// Σ_x R(x, 0)², the discrete normalization of the projection.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// ∫|α₀|² of the unscaled pair function, h^d ΔV Σ_x R(x,0)².
    pub fn alpha0_norm_sq(&self) -> f64 {
        self.bx.h.powi(self.bx.dims as i32) * self.bx.cell_volume() * self.norm_sq
    }

    /// The symbol α̂₀(h|p|) on the momentum lattice.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// R(x, y)·f(x, y) summed over x for each y, divided by Σ R².
    fn project(&self, field: &CMat) -> Vec<Complex64> {
        let m = self.bx.size();
        (0..m)
            .map(|y| (0..m).map(|x| field[(x, y)] * self.at(x, y)).sum::<Complex64>() / self.norm_sq)
            .collect()
    }

    /// The kernel α(x, y) = R(x, y)·ψ-profile given by `weight(x, y)`.
    pub fn modulated(&self, weight: impl Fn(usize, usize) -> Complex64) -> Result<PairField> {
        let m = self.bx.size();
        PairField::new(self.bx, CMat::from_fn(m, m, |x, y| weight(x, y) * self.at(x, y)))
    }
}

/// ψ(y) = Σ_x R(x,y)α(x,y) / Σ_x R(x,0)².
pub fn extract_psi(alpha: &PairField, alpha0: SampledProfile, h: f64) -> Result<OrderField> {
    let r = ReferenceKernel::new(&alpha.bx, alpha0, h)?;
    OrderField::new(alpha.bx, r.project(&alpha.values))
}

/// ξ = α − R(x,y)(ψ(x)+ψ(y))/2.
pub fn residual_xi(alpha: &PairField, alpha0: SampledProfile, psi: &OrderField, h: f64) -> Result<PairField> {
    if psi.bx != alpha.bx {
        return Err(invalid("order field and pair field live on different boxes"));
    }
    let r = ReferenceKernel::new(&alpha.bx, alpha0, h)?;
    let m = alpha.bx.size();
    let p = &psi.psi;
    let xi = CMat::from_fn(m, m, |x, y| alpha.values[(x, y)] - r.at(x, y) * (p[x] + p[y]) * 0.5);
    PairField::new(alpha.bx, xi)
}

/// One-sided residuals ξ₀ = α − Rψ(y) (projection in x) and ξ₁ = α − Rψ'(x) (projection in y).
pub fn one_sided_residuals(alpha: &PairField, alpha0: SampledProfile, h: f64) -> Result<(PairField, PairField)> {
    let r = ReferenceKernel::new(&alpha.bx, alpha0, h)?;
    let m = alpha.bx.size();
    let psi_y = r.project(&alpha.values);
    let psi_x = r.project(&alpha.values.transpose());
    let xi0 = CMat::from_fn(m, m, |x, y| alpha.values[(x, y)] - r.at(x, y) * psi_y[y]);
    let xi1 = CMat::from_fn(m, m, |x, y| alpha.values[(x, y)] - r.at(x, y) * psi_x[x]);
    Ok((PairField::new(alpha.bx, xi0)?, PairField::new(alpha.bx, xi1)?))
}

/// (∇_x + ∇_y)α along each axis, computed spectrally in both slots.
pub fn com_derivative(alpha: &PairField) -> Vec<CMat> {
    let bx = &alpha.bx;
    let f = bx.dft_matrix();
    let fc = f.map(|z| z.conj());
    // α = F Â Fᵀ.
    let hat = f.adjoint() * &alpha.values * &fc;
    let m = bx.size();
    (0..bx.dims)
        .map(|a| {
            let sym: Vec<f64> = (0..m).map(|k| derivative_symbol(bx, k, a)).collect();
            let d = CMat::from_fn(m, m, |p, q| hat[(p, q)] * I * (sym[p] + sym[q]));
            &f * d * f.transpose()
        })
        .collect()
}

/// ∇ψ(y) = Σ_x R(x,y)[(∇_x+∇_y)α](x,y) / Σ_x R(x,0)².
pub fn com_gradient(alpha: &PairField, alpha0: SampledProfile, h: f64) -> Result<Vec<Vec<Complex64>>> {
    let r = ReferenceKernel::new(&alpha.bx, alpha0, h)?;
    Ok(com_derivative(alpha).iter().map(|g| r.project(g)).collect())
}

/// h^d ‖(∇_x+∇_y)α‖²/‖α₀‖² − ‖∇ψ‖², nonnegative by Cauchy–Schwarz.
pub fn gradient_bound_gap(alpha: &PairField, alpha0: SampledProfile, h: f64) -> Result<f64> {
    let bx = &alpha.bx;
    let r = ReferenceKernel::new(bx, alpha0, h)?;
    let grads = com_derivative(alpha);
    let dv = bx.cell_volume();
    let rhs_num: f64 = grads.iter().map(|g| dv * dv * g.norm_squared()).sum();
    let rhs = h.powi(bx.dims as i32) * rhs_num / r.alpha0_norm_sq();
    let lhs: f64 = grads.iter().map(|g| l2(bx, &r.project(g)).powi(2)).sum();
    Ok(rhs - lhs)
}

/// Unitary continuum Fourier coefficients η̂(p) = (2π)^{-d/2} ΔV Σ_x η(x) e^{-ipx}.
pub fn fourier_coefficients(bx: &BoxGrid, f: &[f64]) -> Vec<Complex64> {
    let fm = bx.dft_matrix();
    let v = DVector::from_iterator(f.len(), f.iter().map(|&x| Complex64::new(x, 0.0)));
    let scale = bx.cell_volume() * (bx.size() as f64).sqrt() / (2.0 * PI).powf(bx.dims as f64 / 2.0);
    (fm.adjoint() * v).iter().map(|z| z * scale).collect()
}

fn inverse_fourier(bx: &BoxGrid, hat: &[Complex64]) -> Vec<Complex64> {
    let fm = bx.dft_matrix();
    let scale = (2.0 * PI).powf(bx.dims as f64 / 2.0) / (bx.cell_volume() * (bx.size() as f64).sqrt());
    (fm * DVector::from_iterator(hat.len(), hat.iter().map(|z| z * scale))).iter().copied().collect()
}

/// Sharp split η = η₁ + η₂ with η̂₁ = η̂ on |p| < s.
pub fn fourier_split(bx: &BoxGrid, eta: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(s > 0.0) {
        return Err(invalid(format!("split radius must be positive, got {s}")));
    }
    if eta.len() != bx.size() {
        return Err(invalid("field size does not match the box"));
    }
    let hat = fourier_coefficients(bx, eta);
    let low: Vec<Complex64> = hat
        .iter()
        .enumerate()
        .map(|(k, z)| if bx.momentum_norm(k) < s { *z } else { Complex64::new(0.0, 0.0) })
        .collect();
    let eta1: Vec<f64> = inverse_fourier(bx, &low).iter().map(|z| z.re).collect();
    let eta2 = eta.iter().zip(&eta1).map(|(a, b)| a - b).collect();
    Ok((eta1, eta2))
}

/// Measured norms of the split η = |ψ| − 1 with the bounds they are compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub s: f64,
    /// ‖η̂₁‖_{L¹} over 0 < |p| < s.
    pub l1_low: f64,
    /// Contribution of the p = 0 mode to ‖η̂₁‖_{L¹}.
    pub l1_mean: f64,
    pub l2_high: f64,
    pub l4_high: f64,
    pub l6_high: f64,
    /// ‖∇η‖ and ‖∇ψ‖ (spectral).
    pub grad_eta: f64,
    pub grad_psi: f64,
    /// ‖1/|p|‖_{L²(B_s∖0)}·‖∇η‖, the discrete form of the low-mode L¹ bound.
    pub l1_bound: f64,
    /// √(4πs)‖∇ψ‖, its three-dimensional continuum counterpart (reported only).
    pub l1_bound_continuum: f64,
    /// s⁻¹‖∇η‖ ≥ ‖η₂‖_{L²}.
    pub l2_bound: f64,
    /// ‖η₂‖_{L²}^{1/4}‖η₂‖_{L⁶}^{3/4} ≥ ‖η₂‖_{L⁴}.
    pub l4_bound: f64,
    /// Smallest bound − measured over the three asserted inequalities.
    pub min_slack: f64,
}

pub fn split_bounds_report(psi: &OrderField, s: f64) -> Result<SplitReport> {
    let bx = &psi.bx;
    let eta = psi.eta();
    let (_, eta2) = fourier_split(bx, &eta, s)?;
    let hat = fourier_coefficients(bx, &eta);
    let cell = bx.dual_spacing().powi(bx.dims as i32);
    let mut l1_low = 0.0;
    let mut l1_mean = 0.0;
    let mut inv_p2 = 0.0;
    let mut grad_sq = 0.0;
    for (k, z) in hat.iter().enumerate() {
        let p = bx.momentum_norm(k);
        if p == 0.0 {
            l1_mean = z.norm() * cell;
        } else if p < s {
            l1_low += z.norm() * cell;
            inv_p2 += cell / (p * p);
        }
        let psym: f64 = (0..bx.dims).map(|a| derivative_symbol(bx, k, a).powi(2)).sum();
        grad_sq += psym * z.norm_sqr() * cell;
    }
    let grad_eta = grad_sq.sqrt();
    let grad_psi = gradient_norm(bx, &psi.gradient());
    let l2_high = l2_real(bx, &eta2);
    let l4_high = lp_real(bx, &eta2, 4.0);
    let l6_high = lp_real(bx, &eta2, 6.0);
    let l1_bound = inv_p2.sqrt() * grad_eta;
    let l2_bound = grad_eta / s;
    let l4_bound = l2_high.powf(0.25) * l6_high.powf(0.75);
    let tol = 1e-13 * (1.0 + l2_high + l1_low);
    let min_slack = (l1_bound - l1_low).min(l2_bound - l2_high).min(l4_bound - l4_high + tol);
    Ok(SplitReport {
        s,
        l1_low,
        l1_mean,
        l2_high,
        l4_high,
        l6_high,
        grad_eta,
        grad_psi,
        l1_bound,
        l1_bound_continuum: (4.0 * PI * s).sqrt() * grad_psi,
        l2_bound,
        l4_bound,
        min_slack,
    })
}

/// Tail ‖Φ̂‖_{L²(|p| ≥ r)} against its assembled bound, with s = r/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTail {
    pub r: f64,
    pub tail: f64,
    /// 2‖η₁‖_∞‖η₂‖₂ + ‖η₂‖₄² + 2‖η₂‖₂ with ‖η₁‖_∞ ≤ (2π)^{-d/2}‖η̂₁‖_{L¹} and ‖η₂‖₂ ≤ s⁻¹‖∇η‖.
    pub bound: f64,
    /// s^{-1/2}‖∇ψ‖² + s⁻¹‖∇ψ‖, the shape of the bound up to constants (reported only).
    pub shape: f64,
    pub gap: f64,
}

pub fn phi_tail(psi: &OrderField, r: f64) -> Result<PhiTail> {
    let bx = &psi.bx;
    if !(r > 0.0) || r > bx.nyquist() {
        return Err(invalid(format!("r = {r} must lie in (0, {}] (Nyquist)", bx.nyquist())));
    }
    let s = r / 2.0;
    let phi = psi.phi();
    let hat = fourier_coefficients(bx, &phi);
    let cell = bx.dual_spacing().powi(bx.dims as i32);
    let tail = hat
        .iter()
        .enumerate()
        .filter(|(k, _)| bx.momentum_norm(*k) >= r)
        .map(|(_, z)| z.norm_sqr() * cell)
        .sum::<f64>()
        .sqrt();
    let rep = split_bounds_report(psi, s)?;
    let sup_low = (rep.l1_low + rep.l1_mean) / (2.0 * PI).powf(bx.dims as f64 / 2.0);
    let bound = 2.0 * sup_low * rep.l2_bound + rep.l4_high.powi(2) + 2.0 * rep.l2_bound;
    let shape = rep.grad_psi.powi(2) / s.sqrt() + rep.grad_psi / s;
    let tol = 1e-12 * (1.0 + bound);
    Ok(PhiTail { r, tail, bound, shape, gap: bound - tail + tol })
}

pub fn phi_tail_gap(psi: &OrderField, r: f64) -> Result<f64> {
    Ok(phi_tail(psi, r)?.gap)
}

/// Tr[(α₀Φα₀)²] evaluated as a matrix trace and through its momentum form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticOverlap {
    pub trace: f64,
    pub fourier: f64,
    /// inf_{|P|<r} c(P) · M⁻¹Σ|Φ̃(P)|², with c the lattice convolution of α̂₀².
    pub lower_bound: f64,
}

pub fn quartic_overlap(bx: &BoxGrid, phi_low: &[f64], alpha0: SampledProfile, h: f64, r: f64) -> Result<QuarticOverlap> {
    check_h(bx, h)?;
    let m = bx.size();
    if phi_low.len() != m {
        return Err(invalid("field size does not match the box"));
    }
    if !(r > 0.0) || r > bx.nyquist() {
        return Err(invalid(format!("r = {r} must lie in (0, {}] (Nyquist)", bx.nyquist())));
    }
    let f = bx.dft_matrix();
    let phi_t = f.adjoint() * DVector::from_iterator(m, phi_low.iter().map(|&v| Complex64::new(v, 0.0)));
    let scale = phi_t.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    for k in 0..m {
        if bx.momentum_norm(k) >= r && phi_t[k].norm() > 1e-10 * scale.max(1e-300) {
            return Err(invalid(format!("Φ has weight {:e} at |p| = {} ≥ r", phi_t[k].norm(), bx.momentum_norm(k))));
        }
    }
    let s2: Vec<f64> = (0..m)
        .map(|k| alpha0.at(h * bx.momentum_norm(k)).map(|v| v * v))
        .collect::<Result<_>>()?;
    // Trace path: S = F diag(α̂₀) F†, A = S Φ S.
    let s1: Vec<f64> = s2.iter().map(|v| v.sqrt()).collect();
    let mut left = f.clone();
    for (k, mut col) in left.column_iter_mut().enumerate() {
        col *= Complex64::new(s1[k], 0.0);
    }
    let smat = &left * f.adjoint();
    let mut a = smat.clone();
    for (x, mut col) in a.column_iter_mut().enumerate() {
        col *= Complex64::new(phi_low[x], 0.0);
    }
    let a = a * &smat;
    let trace = (&a * &a).trace().re;
    // Momentum path: (1/M) Σ_P |Φ̃(P)|² Σ_q α̂₀²(q+P) α̂₀²(q).
    let conv: Vec<f64> = (0..m).map(|pk| (0..m).map(|q| s2[bx.add(q, pk)] * s2[q]).sum()).collect();
    let fourier = (0..m).map(|pk| phi_t[pk].norm_sqr() * conv[pk]).sum::<f64>() / m as f64;
    let inf = (0..m)
        .filter(|&k| bx.momentum_norm(k) < r)
        .map(|k| conv[k])
        .fold(f64::INFINITY, f64::min);
    let lower_bound = inf * phi_t.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
    Ok(QuarticOverlap { trace, fourier, lower_bound })
}

/// (α̂₀² ∗ α̂₀²)(0) = ∫α̂₀⁴ over ℝ³ from radial samples.
pub fn alpha0_fourth_moment(grid: &RadialGrid, alpha: &[f64]) -> Result<f64> {
    let a4: Vec<f64> = alpha.iter().map(|a| a.powi(4)).collect();
    grid.check_samples(alpha)?;
    Ok(grid.integrate_samples(&a4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foundation::{build_radial_grid, QuadratureRule};
    use crate::rng::sample_rng;
    use rand::Rng;

    fn alpha_profile() -> (RadialGrid, Vec<f64>) {
        let g = build_radial_grid(12.0, 64, QuadratureRule::default()).unwrap();
        let a = g.nodes().iter().map(|p| -0.4 / (1.0 + p * p) * (-p * p / 8.0).exp()).collect();
        (g, a)
    }

    fn box1() -> BoxGrid {
        BoxGrid::new(10.0, 16, 1, 0.5).unwrap()
    }

    fn box2() -> BoxGrid {
        BoxGrid::new(8.0, 8, 2, 0.5).unwrap()
    }

    /// Random band-limited symmetric pair field: α = F Â Fᵀ with Â supported on low modes.
    fn random_smooth_alpha(bx: &BoxGrid, seed: u64, cut: f64) -> PairField {
        let mut rng = sample_rng(seed, 0);
        let m = bx.size();
        let mut hat = CMat::zeros(m, m);
        for p in 0..m {
            for q in 0..m {
                if bx.momentum_norm(p) < cut && bx.momentum_norm(q) < cut {
                    hat[(p, q)] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
        }
        let f = bx.dft_matrix();
        let a = &f * &hat * f.transpose();
        let a = (&a + a.transpose()) * Complex64::new(0.5, 0.0);
        PairField::new(*bx, a).unwrap()
    }

    fn random_smooth_psi(bx: &BoxGrid, seed: u64, cut: f64, amp: f64) -> OrderField {
        let mut rng = sample_rng(seed, 1);
        let m = bx.size();
        let mut hat = DVector::zeros(m);
        for k in 0..m {
            if bx.momentum_norm(k) < cut {
                hat[k] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp;
            }
        }
        let v = bx.dft_matrix() * hat;
        OrderField::new(*bx, v.iter().map(|z| z + 1.0).collect()).unwrap()
    }

    #[test]
    fn reference_kernel_gives_unit_psi() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        for bx in [box1(), box2()] {
            let r = ReferenceKernel::new(&bx, prof, 0.5).unwrap();
            let alpha = r.modulated(|_, _| Complex64::new(1.0, 0.0)).unwrap();
            assert!(alpha.is_symmetric());
            let psi = extract_psi(&alpha, prof, 0.5).unwrap();
            assert!(psi.psi().iter().all(|z| (z - 1.0).norm() < 1e-12));
            let xi = residual_xi(&alpha, prof, &psi, 0.5).unwrap();
            assert!(xi.values().iter().all(|z| z.norm() < 1e-12));
            let zero = PairField::new(bx, CMat::zeros(bx.size(), bx.size())).unwrap();
            assert!(extract_psi(&zero, prof, 0.5).unwrap().psi().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn reference_kernel_matches_operator_symbol() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = box2();
        let r = ReferenceKernel::new(&bx, prof, 0.5).unwrap();
        let f = bx.dft_matrix();
        let m = bx.size();
        let mut d = CMat::zeros(m, m);
        for k in 0..m {
            d[(k, k)] = Complex64::new(r.symbol()[k], 0.0);
        }
        let op = &f * d * f.adjoint();
        for x in 0..m {
            for y in 0..m {
                assert!((op[(x, y)].re / bx.cell_volume() - r.at(x, y)).abs() < 1e-12);
                assert!(op[(x, y)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modulated_reference_recovers_profile() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = BoxGrid::new(40.0, 256, 1, 0.5).unwrap();
        let r = ReferenceKernel::new(&bx, prof, 0.5).unwrap();
        let k0 = 2.0 * PI / bx.length;
        let c = |i: usize| (k0 * bx.position(i)[0]).cos();
        let alpha = r.modulated(|x, y| Complex64::new(0.5 * (c(x) + c(y)), 0.0)).unwrap();
        let psi = extract_psi(&alpha, prof, 0.5).unwrap();
        // Direct-sum oracle: ψ(y) = Σ_x R(x,y)²(c(x)+c(y))/2 / ΣR², which tends to c(y) as the
        // kernel width shrinks relative to the modulation wavelength.
        for y in 0..bx.size() {
            let direct: f64 = (0..bx.size()).map(|x| r.at(x, y).powi(2) * 0.5 * (c(x) + c(y))).sum::<f64>() / r.norm_sq();
            assert!((psi.psi()[y].re - direct).abs() < 1e-12);
            assert!((psi.psi()[y].re - c(y)).abs() < 5e-3);
        }
        let grad = com_gradient(&alpha, prof, 0.5).unwrap();
        for (y, g) in grad[0].iter().enumerate() {
            let exact = -k0 * (k0 * bx.position(y)[0]).sin();
            assert!((g.re - exact).abs() < 5e-3 * k0);
        }
    }

    #[test]
    fn one_sided_residuals_average_to_xi() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = box2();
        let alpha = random_smooth_alpha(&bx, 3, 2.0);
        let psi = extract_psi(&alpha, prof, 0.5).unwrap();
        let xi = residual_xi(&alpha, prof, &psi, 0.5).unwrap();
        let (xi0, xi1) = one_sided_residuals(&alpha, prof, 0.5).unwrap();
        let avg = (xi0.values() + xi1.values()) * Complex64::new(0.5, 0.0);
        assert!((avg - xi.values()).iter().all(|z| z.norm() < 1e-12));
        assert!(xi.is_symmetric());
        let r = ReferenceKernel::new(&bx, prof, 0.5).unwrap();
        let orth = r.project(xi0.values());
        let scale = alpha.values().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(orth.iter().all(|z| z.norm() < 1e-10 * scale));
        // Reconstruction.
        let m = bx.size();
        for x in 0..m {
            for y in 0..m {
                let back = r.at(x, y) * (psi.psi()[x] + psi.psi()[y]) * 0.5 + xi.values()[(x, y)];
                assert!((back - alpha.values()[(x, y)]).norm() < 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn extraction_is_linear() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = box1();
        let alpha = random_smooth_alpha(&bx, 5, 1.5);
        let scaled = PairField::new(bx, alpha.values() * Complex64::new(0.0, -2.5)).unwrap();
        let p1 = extract_psi(&alpha, prof, 0.5).unwrap();
        let p2 = extract_psi(&scaled, prof, 0.5).unwrap();
        for (u, v) in p1.psi().iter().zip(p2.psi()) {
            assert!((u * Complex64::new(0.0, -2.5) - v).norm() < 1e-12 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn com_gradient_is_spectral_gradient_of_psi() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        for (bx, cut) in [(box1(), 1.5), (box2(), 1.5)] {
            for seed in 0..5 {
                let alpha = random_smooth_alpha(&bx, seed, cut);
                let psi = extract_psi(&alpha, prof, 0.5).unwrap();
                let spectral = psi.gradient();
                let com = com_gradient(&alpha, prof, 0.5).unwrap();
                for (u, v) in spectral.iter().zip(&com) {
                    for (a, b) in u.iter().zip(v) {
                        assert!((a - b).norm() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_bound_holds() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = box2();
        for seed in 0..20 {
            let alpha = random_smooth_alpha(&bx, 100 + seed, 2.5);
            assert!(gradient_bound_gap(&alpha, prof, 0.5).unwrap() >= -1e-10);
        }
        let r = ReferenceKernel::new(&bx, prof, 0.5).unwrap();
        let alpha = r.modulated(|_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert!(gradient_bound_gap(&alpha, prof, 0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn split_edge_cases() {
        let bx = box2();
        let mut rng = sample_rng(1, 0);
        let eta: Vec<f64> = (0..bx.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (e1, e2) = fourier_split(&bx, &eta, 1e3).unwrap();
        assert!(e1.iter().zip(&eta).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(e2.iter().all(|v| v.abs() < 1e-12));
        let (e1, _) = fourier_split(&bx, &eta, 1e-3).unwrap();
        let mean = eta.iter().sum::<f64>() / eta.len() as f64;
        assert!(e1.iter().all(|v| (v - mean).abs() < 1e-12));
        let (e1, e2) = fourier_split(&bx, &eta, 1.7).unwrap();
        let lhs = l2_real(&bx, &eta).powi(2);
        let rhs = l2_real(&bx, &e1).powi(2) + l2_real(&bx, &e2).powi(2);
        assert!((lhs - rhs).abs() < 1e-12 * lhs);
        assert!(fourier_split(&bx, &eta, 0.0).is_err());
    }

    #[test]
    fn split_bounds_hold_on_random_fields() {
        let bx = BoxGrid::new(10.0, 16, 2, 0.5).unwrap();
        let one = OrderField::new(bx, vec![Complex64::new(1.0, 0.0); bx.size()]).unwrap();
        let rep = split_bounds_report(&one, 2.0).unwrap();
        assert!(rep.l1_low < 1e-12 && rep.l2_high < 1e-12 && rep.grad_psi < 1e-12);
        for seed in 0..20 {
            let psi = random_smooth_psi(&bx, seed, 3.0, 0.05);
            let rep = split_bounds_report(&psi, 1.5).unwrap();
            assert!(rep.min_slack >= -1e-10, "{rep:?}");
            assert!(phi_tail_gap(&psi, 3.0).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn single_low_mode() {
        let bx = BoxGrid::new(10.0, 16, 2, 0.5).unwrap();
        let k0 = bx.dual_spacing();
        let psi: Vec<Complex64> =
            (0..bx.size()).map(|i| Complex64::new(1.0 + 0.05 * (k0 * bx.position(i)[0]).cos(), 0.0)).collect();
        let psi = OrderField::new(bx, psi).unwrap();
        let rep = split_bounds_report(&psi, 1.5 * k0).unwrap();
        assert!(rep.l2_high < 1e-12 && rep.l1_low <= rep.l1_bound);
        let tail = phi_tail(&psi, 2.5 * k0).unwrap();
        assert!(tail.tail < 1e-12 && tail.gap >= 0.0);
        assert!(phi_tail(&psi, 100.0).is_err());
    }

    #[test]
    fn quartic_two_paths() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let bx = box2();
        let zero = vec![0.0; bx.size()];
        let q = quartic_overlap(&bx, &zero, prof, 0.5, 2.0).unwrap();
        assert_eq!((q.trace, q.fourier), (0.0, 0.0));
        let k0 = bx.dual_spacing();
        let single: Vec<f64> = (0..bx.size()).map(|i| 0.3 * (k0 * bx.position(i)[1]).cos()).collect();
        let q = quartic_overlap(&bx, &single, prof, 0.5, 1.5 * k0).unwrap();
        assert!((q.trace - q.fourier).abs() <= 1e-8 * q.trace.abs());
        assert!(q.lower_bound <= q.fourier * (1.0 + 1e-12));
        let psi = random_smooth_psi(&bx, 9, 2.0, 0.1);
        let (low, _) = fourier_split(&bx, &psi.phi(), 2.0).unwrap();
        let q = quartic_overlap(&bx, &low, prof, 0.5, 2.0).unwrap();
        assert!((q.trace - q.fourier).abs() <= 1e-8 * q.trace.abs());
        let rough: Vec<f64> = (0..bx.size()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(quartic_overlap(&bx, &rough, prof, 0.5, 2.0).is_err());
    }

    #[test]
    fn fourth_moment_positive() {
        let (g, a) = alpha_profile();
        assert!(alpha0_fourth_moment(&g, &a).unwrap() > 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let bx = box1();
        let alpha = random_smooth_alpha(&bx, 11, 1.5);
        let mut buf = Vec::new();
        alpha.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + bx.size() * bx.size() * 8);
        let back = PairField::read_binary(buf.as_slice(), bx.length).unwrap();
        assert_eq!(back.grid(), alpha.grid());
        let scale = alpha.values().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!((back.values() - alpha.values()).iter().all(|z| z.norm() <= 1e-6 * scale));
        assert!(PairField::read_binary(&buf[..buf.len() - 1], bx.length).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(PairField::read_binary(longer.as_slice(), bx.length).is_err());
    }

    #[test]
    fn mismatched_h_rejected() {
        let (g, a) = alpha_profile();
        let prof = SampledProfile::new(&g, &a).unwrap();
        let alpha = random_smooth_alpha(&box1(), 1, 1.0);
        assert!(extract_psi(&alpha, prof, 0.25).is_err());
    }
}
