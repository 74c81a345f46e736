//! Bogoliubov–de Gennes operators on a periodic box and their Gibbs states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entropy::{fermi, BlockHamiltonian, BlockState};
use crate::error::{invalid, Error, Result};
use crate::foundation::{BoxGrid, Potential, SampledProfile};
use crate::linalg::CMat;
use crate::tibcs::{dispersion, kt_multiplier};

/// Largest BdG dimension 2M handled by dense eigendecomposition.
pub const MAX_BDG_DIM: usize = 4096;

/// Inputs of H₀ʷ other than the box.
#[derive(Debug, Clone, Copy)]
pub struct BdgModel<'a> {
    pub w: &'a Potential,
    pub delta: SampledProfile<'a>,
    pub mu: f64,
    pub t: f64,
}

/// H₀ʷ = [[k(hp) + h²W, Δ̂₀(hp)], [Δ̂₀(hp), −k(hp) − h²W]] in the plane-wave basis.
///
/// W acts through its box Fourier coefficients (2π)^{d/2}L^{-d}Ŵ(k) on the dual lattice, i.e. as the
/// trigonometric interpolant of W at the lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub struct BdgOperator {
    bx: BoxGrid,
    mu: f64,
    matrix: DMatrix<f64>,
}

/// Real and imaginary parts of the unitary DFT matrix.
fn dft_parts(bx: &BoxGrid) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = bx.dft_matrix();
    (f.map(|z| z.re), f.map(|z| z.im))
}

/// F B F† for a real B invariant under p ↦ −p, where the product is real.
fn real_to_position(fr: &DMatrix<f64>, fi: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    fr * b * fr.transpose() + fi * b * fi.transpose()
}

fn block_of(m: &DMatrix<f64>, r: usize, c: usize, n: usize) -> DMatrix<f64> {
    m.view((r * n, c * n), (n, n)).into_owned()
}

pub fn build_h0w(bx: &BoxGrid, mu: f64, w: &Potential, delta: SampledProfile, h: f64) -> Result<BdgOperator> {
    let bx = bx.with_h(h)?;
    w.check_dims(bx.dims)?;
    let m = bx.size();
    if 2 * m > MAX_BDG_DIM {
        return Err(invalid(format!("BdG dimension {} exceeds the dense limit {MAX_BDG_DIM}", 2 * m)));
    }
    let reach = h * bx.max_momentum();
    if reach > delta.grid.pmax() {
        return Err(invalid(format!(
            "h·|p|max = {reach} exceeds the gap profile range {}; refine h or coarsen the lattice",
            delta.grid.pmax()
        )));
    }
    let norm = (2.0 * std::f64::consts::PI).powf(bx.dims as f64 / 2.0) / bx.volume();
    let w_box: Vec<f64> = (0..m).map(|k| h * h * norm * w.fourier_nd(bx.dims, bx.momentum_norm(k))).collect();
    let mut kin = vec![0.0; m];
    let mut gap = vec![0.0; m];
    for i in 0..m {
        let hp = h * bx.momentum_norm(i);
        kin[i] = dispersion(hp, mu);
        gap[i] = delta.at(hp)?;
    }
    let neg: Vec<usize> = (0..m).map(|j| bx.neg(j)).collect();
    let mut matrix = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let a = w_box[bx.add(i, neg[j])] + if i == j { kin[i] } else { 0.0 };
            matrix[(i, j)] = a;
            matrix[(m + i, m + j)] = -a;
        }
        matrix[(i, m + i)] = gap[i];
        matrix[(m + i, i)] = gap[i];
    }
    Ok(BdgOperator { bx, mu, matrix })
}

impl BdgOperator {
    pub fn grid(&self) -> &BoxGrid {
        &self.bx
    }

    pub fn h(&self) -> f64 {
        self.bx.h
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The 2M×2M real symmetric matrix in the plane-wave basis.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Gibbs state (1 + e^{βH})^{-1} in the plane-wave basis.
    pub fn gibbs_momentum(&self, beta: f64) -> Result<DMatrix<f64>> {
        if !(beta > 0.0) {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        let eig = self.matrix.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for (c, &l) in eig.eigenvalues.iter().enumerate() {
            scaled.column_mut(c).scale_mut(fermi(beta * l));
        }
        Ok(scaled * v.transpose())
    }

    /// H₀ʷ in the lattice-site basis.
    pub fn hamiltonian(&self) -> Result<BlockHamiltonian> {
        BlockHamiltonian::new(to_complex_blocks(&self.bx, &self.matrix))
    }
}

/// Applies blockdiag(F, F) · B · blockdiag(F†, F†) to a patterned real momentum-basis matrix.
fn to_complex_blocks(bx: &BoxGrid, b: &DMatrix<f64>) -> CMat {
    let m = bx.size();
    let (fr, fi) = dft_parts(bx);
    let mut out = CMat::zeros(2 * m, 2 * m);
    for r in 0..2 {
        for c in 0..2 {
            let pos = real_to_position(&fr, &fi, &block_of(b, r, c, m));
            out.view_mut((r * m, c * m), (m, m)).copy_from(&pos.map(|x| Complex64::new(x, 0.0)));
        }
    }
    out
}

/// Γ₀ʷ = (1 + e^{βH₀ʷ})^{-1} in the lattice-site basis.
pub fn reference_state(op: &BdgOperator, beta: f64) -> Result<BlockState> {
    let g = op.gibbs_momentum(beta)?;
    BlockState::with_pattern(BlockState::project(&to_complex_blocks(&op.bx, &g)))
}

/// α̂₀(p) = −Δ̂/(2K_T^Δ) for the translation-invariant state.
pub fn ti_pair_amplitude(k: f64, delta: f64, t: f64) -> Result<f64> {
    Ok(-delta / (2.0 * kt_multiplier(k.hypot(delta), t)?))
}

/// Norms of α − α₀ with α₀ the translation-invariant pair operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingNorms {
    pub l2: f64,
    pub h1: f64,
    pub weighted_h2: f64,
}

/// L², H¹ (derivatives h∇) and (1+|x|²+|y|²)-weighted L² norms of α − α₀ on the box.
pub fn pairing_difference_norms(
    state: &BlockState,
    model: &BdgModel,
    h: f64,
    bx: &BoxGrid,
) -> Result<PairingNorms> {
    if (h - bx.h).abs() > 1e-14 * h.abs() {
        return Err(invalid(format!("h = {h} differs from the box value {}", bx.h)));
    }
    let m = bx.size();
    if state.n() != m {
        return Err(invalid(format!("state has {} sites, box has {m}", state.n())));
    }
    let f = bx.dft_matrix();
    let mut diff = f.adjoint() * state.alpha() * &f;
    for i in 0..m {
        let hp = h * bx.momentum_norm(i);
        let a0 = ti_pair_amplitude(dispersion(hp, model.mu), model.delta.at(hp)?, model.t)?;
        diff[(i, i)] -= Complex64::new(a0, 0.0);
    }
    let p2: Vec<f64> = (0..m).map(|i| (h * bx.momentum_norm(i)).powi(2)).collect();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let s = diff[(i, j)].norm_sqr();
            l2 += s;
            h1 += s * (1.0 + p2[i] + p2[j]);
        }
    }
    let pos = &f * diff * f.adjoint();
    let x2: Vec<f64> = (0..m).map(|i| bx.position_norm(i).powi(2)).collect();
    let mut wh = 0.0;
    for i in 0..m {
        for j in 0..m {
            wh += pos[(i, j)].norm_sqr() * (1.0 + x2[i] + x2[j]).powi(2);
        }
    }
    Ok(PairingNorms { l2: l2.sqrt(), h1: h1.sqrt(), weighted_h2: wh.sqrt() })
}

/// Pairing-difference norms over an h sweep with fitted exponents for each norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdgScaling {
    pub h: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub weighted_h2: Vec<f64>,
    /// Exponent of the H¹ norm, the quantity bounded by h^{3/2} in three dimensions.
    pub exponent: f64,
    pub r2: f64,
    pub l2_exponent: f64,
    pub weighted_h2_exponent: f64,
}

pub fn bdg_scaling(h_list: &[f64], bx: &BoxGrid, model: &BdgModel) -> Result<BdgScaling> {
    let mut out = BdgScaling {
        h: h_list.to_vec(),
        l2: Vec::new(),
        h1: Vec::new(),
        weighted_h2: Vec::new(),
        exponent: f64::NAN,
        r2: f64::NAN,
        l2_exponent: f64::NAN,
        weighted_h2_exponent: f64::NAN,
    };
    for &h in h_list {
        let op = build_h0w(bx, model.mu, model.w, model.delta, h)?;
        let state = reference_state(&op, 1.0 / model.t)?;
        let n = pairing_difference_norms(&state, model, h, op.grid())?;
        log::info!("bdg h = {h}: l2 {:.6e} h1 {:.6e} weighted {:.6e}", n.l2, n.h1, n.weighted_h2);
        out.l2.push(n.l2);
        out.h1.push(n.h1);
        out.weighted_h2.push(n.weighted_h2);
    }
    if out.h1.iter().any(|&v| v <= 1e-12) {
        return Err(Error::DegenerateFit("pairing differences vanish".into()));
    }
    let (e, r2) = scaling_fit(h_list, &out.h1)?;
    out.exponent = e;
    out.r2 = r2;
    out.l2_exponent = scaling_fit(h_list, &out.l2)?.0;
    out.weighted_h2_exponent = scaling_fit(h_list, &out.weighted_h2)?.0;
    Ok(out)
}

/// Least-squares slope of log(norm) against log(h), with the coefficient of determination.
pub fn scaling_fit(h_list: &[f64], norms: &[f64]) -> Result<(f64, f64)> {
    if h_list.len() != norms.len() {
        return Err(invalid("h and norm lists differ in length"));
    }
    if h_list.len() < 3 {
        return Err(invalid("the fit needs at least three points"));
    }
    if h_list.iter().chain(norms).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(invalid("fit inputs must be positive and finite"));
    }
    let xs: Vec<f64> = h_list.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foundation::{build_radial_grid, gaussian_potential, QuadratureRule, RadialGrid};
    use crate::linalg::{eigvalsh, max_abs};
    use crate::tibcs::state_from_delta;
    use rand::Rng;

    fn profile() -> (RadialGrid, Vec<f64>) {
        let g = build_radial_grid(12.0, 64, QuadratureRule::default()).unwrap();
        let d = g.nodes().iter().map(|p| 0.8 * (-p * p / 4.0).exp()).collect();
        (g, d)
    }

    #[test]
    fn fit_exact_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let n: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        let (e, r2) = scaling_fit(&h, &n).unwrap();
        assert!((e - 1.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        let (e, r2) = scaling_fit(&h, &[2.0; 4]).unwrap();
        assert!(e.abs() < 1e-12 && r2 == 1.0);
        assert!(scaling_fit(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(scaling_fit(&h[..2], &n[..2]).is_err());
    }

    #[test]
    fn fit_noisy_power_law() {
        let mut rng = crate::rng::sample_rng(7, 0);
        let h: Vec<f64> = (0..8).map(|i| 0.4 * 0.7f64.powi(i)).collect();
        let n: Vec<f64> = h.iter().map(|h| h.powf(1.5) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).collect();
        let (e, r2) = scaling_fit(&h, &n).unwrap();
        assert!((1.4..=1.6).contains(&e) && r2 > 0.99);
    }

    #[test]
    fn translation_invariant_spectrum() {
        let (g, d) = profile();
        let prof = SampledProfile::new(&g, &d).unwrap();
        let bx = BoxGrid::new(6.0, 6, 2, 0.3).unwrap();
        let op = build_h0w(&bx, 1.0, &Potential::zero(), prof, 0.3).unwrap();
        let mut expect: Vec<f64> = (0..bx.size())
            .flat_map(|i| {
                let hp = 0.3 * bx.momentum_norm(i);
                let e = dispersion(hp, 1.0).hypot(prof.at(hp).unwrap());
                [e, -e]
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in op.eigenvalues().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = vec![0.0; g.len()];
        let op = build_h0w(&bx, 1.0, &Potential::zero(), SampledProfile::new(&g, &zero).unwrap(), 0.3).unwrap();
        let mut expect: Vec<f64> = (0..bx.size())
            .flat_map(|i| {
                let k = dispersion(0.3 * bx.momentum_norm(i), 1.0);
                [k, -k]
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in op.eigenvalues().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_pattern_with_potential() {
        let (g, d) = profile();
        let w = gaussian_potential(0.7, 0.8).unwrap();
        let bx = BoxGrid::new(6.0, 12, 2, 0.3).unwrap();
        let op = build_h0w(&bx, 1.0, &w, SampledProfile::new(&g, &d).unwrap(), 0.3).unwrap();
        let hm = op.hamiltonian().unwrap();
        let m = hm.matrix();
        assert!(m.iter().all(|z| z.im.abs() < 1e-12));
        // Diagonal of the potential part in position space reproduces h²W at the sites.
        let zero = vec![0.0; g.len()];
        let free = build_h0w(&bx, 1.0, &Potential::zero(), SampledProfile::new(&g, &zero).unwrap(), 0.3).unwrap();
        let diff = m - free.hamiltonian().unwrap().matrix();
        for i in 0..bx.size() {
            let r = bx.position_norm(i);
            // Trigonometric interpolation of W; its aliasing error is small for a width-0.8 bump.
            assert!((diff[(i, i)].re - 0.09 * w.value(2, r)).abs() < 1e-4);
        }
    }

    #[test]
    fn reference_state_commutes_and_has_pattern() {
        let (g, d) = profile();
        let w = gaussian_potential(0.5, 1.0).unwrap();
        let bx = BoxGrid::new(6.0, 6, 2, 0.25).unwrap();
        let op = build_h0w(&bx, 1.0, &w, SampledProfile::new(&g, &d).unwrap(), 0.25).unwrap();
        let gamma = reference_state(&op, 2.0).unwrap();
        let h = op.hamiltonian().unwrap();
        let comm = gamma.matrix() * h.matrix() - h.matrix() * gamma.matrix();
        assert!(max_abs(&comm) < 1e-10);
        assert!(BlockState::new(gamma.matrix().clone()).is_ok());
        let ev = eigvalsh(gamma.matrix());
        assert!(ev[0] > 0.0 && ev[ev.len() - 1] < 1.0);
    }

    #[test]
    fn low_temperature_projector() {
        let (g, d) = profile();
        let w = gaussian_potential(0.5, 1.0).unwrap();
        let bx = BoxGrid::new(6.0, 8, 1, 0.25).unwrap();
        let op = build_h0w(&bx, 1.0, &w, SampledProfile::new(&g, &d).unwrap(), 0.25).unwrap();
        let gap = op.eigenvalues().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        assert!(gap > 0.1);
        let gamma = reference_state(&op, 40.0 / gap).unwrap();
        for v in eigvalsh(gamma.matrix()) {
            assert!(v.abs() < 1e-8 || (v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pair_amplitude_matches_radial_state() {
        let (g, d) = profile();
        let st = state_from_delta(&g, &d, 0.7, 1.0).unwrap();
        for (i, &p) in g.nodes().iter().enumerate() {
            let a = ti_pair_amplitude(dispersion(p, 1.0), d[i], 0.7).unwrap();
            assert!((a - st.alpha[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn free_reference_has_no_pairing_difference() {
        let (g, d) = profile();
        let zero = Potential::zero();
        let model = BdgModel { w: &zero, delta: SampledProfile::new(&g, &d).unwrap(), mu: 1.0, t: 0.6 };
        let bx = BoxGrid::new(6.0, 6, 2, 0.3).unwrap();
        let op = build_h0w(&bx, 1.0, &zero, model.delta, 0.3).unwrap();
        let st = reference_state(&op, 1.0 / model.t).unwrap();
        let n = pairing_difference_norms(&st, &model, 0.3, op.grid()).unwrap();
        assert!(n.l2 < 1e-10 && n.h1 < 1e-10 && n.weighted_h2 < 1e-10);
        assert!(pairing_difference_norms(&st, &model, 0.2, op.grid()).is_err());
    }

    #[test]
    fn pairing_difference_shrinks_with_h() {
        let (g, d) = profile();
        let w = gaussian_potential(1.0, 1.0).unwrap();
        let model = BdgModel { w: &w, delta: SampledProfile::new(&g, &d).unwrap(), mu: 1.0, t: 0.6 };
        let bx = BoxGrid::new(8.0, 16, 1, 0.4).unwrap();
        let mut prev = f64::INFINITY;
        for h in [0.4, 0.2, 0.1] {
            let op = build_h0w(&bx, 1.0, &w, model.delta, h).unwrap();
            let st = reference_state(&op, 1.0 / model.t).unwrap();
            let n = pairing_difference_norms(&st, &model, h, op.grid()).unwrap();
            assert!(n.h1 < prev);
            prev = n.h1;
        }
    }

    #[test]
    fn rejects_oversized_and_unresolved_boxes() {
        let (g, d) = profile();
        let prof = SampledProfile::new(&g, &d).unwrap();
        let big = BoxGrid::new(8.0, 20, 3, 0.1).unwrap();
        assert!(matches!(build_h0w(&big, 1.0, &Potential::zero(), prof, 0.1), Err(Error::InvalidArgument(_))));
        let fine = BoxGrid::new(1.0, 64, 1, 1.0).unwrap();
        assert!(matches!(build_h0w(&fine, 1.0, &Potential::zero(), prof, 1.0), Err(Error::InvalidArgument(_))));
    }
}
