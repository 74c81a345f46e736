//! The free-energy difference F_β(Γ, Γ₀ʷ) on a periodic box, the Ginzburg–Landau energy of an
//! order field, the lower-bound certificate and a-priori scaling sweeps.
//!
//! States are in the lattice-site basis as produced by [`crate::bdg::reference_state`]; their
//! blocks are operator matrices, so pair kernels are α/ΔV and every integral over pairs is a plain
//! double sum of operator entries.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bdg::{build_h0w, reference_state, scaling_fit, BdgModel, BdgOperator};
use crate::decomp::{extract_psi, residual_xi, OrderField, PairField, ReferenceKernel};
use crate::entropy::{gibbs_block_state, relative_entropy, BlockHamiltonian, BlockState};
use crate::error::{invalid, Error, Result};
use crate::foundation::{BoxGrid, Potential, SampledProfile};
use crate::linalg::CMat;
use crate::tibcs::{dispersion, kt_multiplier};

pub const DEFAULT_C1: f64 = 0.01;
pub const DEFAULT_C2: f64 = 10.0;

/// Roundoff allowance when deciding F_β ≤ 0.
pub const F_TOL: f64 = 1e-10;

/// Largest lattice handled by [`ktv_form_bound_check`].
pub const MAX_KTV_SITES: usize = 32;

fn check_h(bx: &BoxGrid, h: f64) -> Result<()> {
    if (h - bx.h).abs() > 1e-14 * h.abs() {
        return Err(invalid(format!("h = {h} differs from the box value {}", bx.h)));
    }
    Ok(())
}

fn check_states(g: &BlockState, g0w: &BlockState, bx: &BoxGrid) -> Result<()> {
    let m = bx.size();
    if g.n() != m || g0w.n() != m {
        return Err(invalid(format!("states have {} and {} sites, box has {m}", g.n(), g0w.n())));
    }
    Ok(())
}

/// V((x − y)/h) on lattice pairs, with the minimal-image separation.
fn pair_potential(bx: &BoxGrid, v: &Potential, h: f64) -> DMatrix<f64> {
    let m = bx.size();
    DMatrix::from_fn(m, m, |x, y| v.value(bx.dims, bx.periodic_distance(x, y) / h))
}

/// The three contributions to F_β(Γ, Γ₀ʷ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyTerms {
    /// (1/2β)·H(Γ, Γ₀ʷ).
    pub entropy: f64,
    /// ∫V((x−y)/h)|α − α₀ʷ|².
    pub interaction: f64,
    /// 2Re∫V((x−y)/h)(α − α₀ʷ)(ᾱ₀ʷ − ᾱ₀ₕ) with α₀ₕ the reference kernel.
    pub cross: f64,
}

impl FreeEnergyTerms {
    pub fn total(&self) -> f64 {
        self.entropy + self.interaction + self.cross
    }
}

#[allow(clippy::too_many_arguments)]
pub fn free_energy_terms(
    g: &BlockState,
    g0w: &BlockState,
    v: &Potential,
    h: f64,
    beta: f64,
    bx: &BoxGrid,
    alpha0: SampledProfile,
) -> Result<FreeEnergyTerms> {
    check_h(bx, h)?;
    check_states(g, g0w, bx)?;
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let entropy = relative_entropy(g, g0w)? / (2.0 * beta);
    let r = ReferenceKernel::new(bx, alpha0, h)?;
    let dv = bx.cell_volume();
    let vp = pair_potential(bx, v, h);
    let a = g.alpha();
    let a0 = g0w.alpha();
    let m = bx.size();
    let (mut interaction, mut cross) = (0.0, 0.0);
    for x in 0..m {
        for y in 0..m {
            let d = a[(x, y)] - a0[(x, y)];
            let rest = a0[(x, y)] - dv * r.at(x, y);
            interaction += vp[(x, y)] * d.norm_sqr();
            cross += 2.0 * vp[(x, y)] * (d * rest.conj()).re;
        }
    }
    Ok(FreeEnergyTerms { entropy, interaction, cross })
}

/// F_β(Γ, Γ₀ʷ) with lattice sums for both interaction terms.
#[allow(clippy::too_many_arguments)]
pub fn free_energy_difference(
    g: &BlockState,
    g0w: &BlockState,
    v: &Potential,
    h: f64,
    beta: f64,
    bx: &BoxGrid,
    alpha0: SampledProfile,
) -> Result<f64> {
    Ok(free_energy_terms(g, g0w, v, h, beta, bx, alpha0)?.total())
}

/// ∫[∇ψ̄·B₁∇ψ + B₂W|ψ|² + B₃(1 − |ψ|²)²] with the upper-left d×d block of B₁.
pub fn gl_energy(psi: &OrderField, w: &Potential, b1: &Matrix3<f64>, b2: f64, b3: f64) -> Result<f64> {
    if (b1 - b1.transpose()).abs().max() > 1e-12 * b1.abs().max() || b1.cholesky().is_none() {
        return Err(invalid("B1 must be symmetric positive definite"));
    }
    if !b2.is_finite() || !b3.is_finite() {
        return Err(invalid("B2 and B3 must be finite"));
    }
    let bx = psi.grid();
    let grad = psi.gradient();
    let vals = psi.psi();
    let mut total = 0.0;
    for i in 0..bx.size() {
        let mut kinetic = 0.0;
        for a in 0..bx.dims {
            for b in 0..bx.dims {
                kinetic += b1[(a, b)] * (grad[a][i].conj() * grad[b][i]).re;
            }
        }
        let n2 = vals[i].norm_sqr();
        total += kinetic + b2 * w.value(bx.dims, bx.position_norm(i)) * n2 + b3 * (1.0 - n2).powi(2);
    }
    Ok(total * bx.cell_volume())
}

/// ‖f‖² + ‖h∇ₓf‖² + ‖h∇ᵧf‖² for a two-body kernel given by its operator matrix.
fn h1_sq(bx: &BoxGrid, operator: &CMat, h: f64) -> f64 {
    let f = bx.dft_matrix();
    let hat = f.adjoint() * operator * f.map(|z| z.conj());
    let m = bx.size();
    let p2: Vec<f64> = (0..m).map(|i| (h * bx.momentum_norm(i)).powi(2)).collect();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += hat[(i, j)].norm_sqr() * (1.0 + p2[i] + p2[j]);
        }
    }
    // Operator entries are ΔV times kernel values and the pair measure is ΔV².
    s
}

/// The four norms of the lower bound and its right-hand side for configured constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub f_value: f64,
    pub grad_psi_sq: f64,
    pub phi_l2_sq: f64,
    pub xi_h1_sq: f64,
    pub q_h1_sq: f64,
    pub h: f64,
    pub c1: f64,
    pub c2: f64,
    pub rhs: f64,
    /// Whether f_value ≥ rhs; absent when f_value > F_TOL, where no bound is claimed.
    pub bound_holds: Option<bool>,
}

impl Certificate {
    pub fn assemble(f_value: f64, norms: [f64; 4], h: f64, c1: f64, c2: f64) -> Self {
        let [grad_psi_sq, phi_l2_sq, xi_h1_sq, q_h1_sq] = norms;
        let rhs = rhs_of(norms, h, c1, c2);
        let bound_holds = (f_value <= F_TOL).then_some(f_value >= rhs);
        Certificate { f_value, grad_psi_sq, phi_l2_sq, xi_h1_sq, q_h1_sq, h, c1, c2, rhs, bound_holds }
    }

    /// The right-hand side recomputed from the stored fields.
    pub fn recomputed_rhs(&self) -> f64 {
        rhs_of([self.grad_psi_sq, self.phi_l2_sq, self.xi_h1_sq, self.q_h1_sq], self.h, self.c1, self.c2)
    }
}

fn rhs_of(norms: [f64; 4], h: f64, c1: f64, c2: f64) -> f64 {
    let [g, p, x, q] = norms;
    c1 * (h * g + h * p + x + q) - c2 * h
}

fn l2_sq(bx: &BoxGrid, f: impl Iterator<Item = f64>) -> f64 {
    bx.cell_volume() * f.map(|v| v * v).sum::<f64>()
}

/// The ψ, ξ and q = γ − γ₀ʷ norms entering the certificate.
fn certificate_norms(g: &BlockState, g0w: &BlockState, h: f64, bx: &BoxGrid, alpha0: SampledProfile) -> Result<[f64; 4]> {
    let alpha = PairField::from_operator(*bx, &g.alpha())?;
    let psi = extract_psi(&alpha, alpha0, h)?;
    let xi = residual_xi(&alpha, alpha0, &psi, h)?;
    let grad_psi_sq: f64 = psi.gradient().iter().map(|c| l2_sq(bx, c.iter().map(|z| z.norm()))).sum();
    let phi_l2_sq = l2_sq(bx, psi.phi().into_iter());
    let dv = bx.cell_volume();
    let xi_h1_sq = h1_sq(bx, &xi.values().map(|z| z * dv), h);
    let q_h1_sq = h1_sq(bx, &(g.gamma() - g0w.gamma()), h);
    Ok([grad_psi_sq, phi_l2_sq, xi_h1_sq, q_h1_sq])
}

#[allow(clippy::too_many_arguments)]
pub fn theorem_certificate(
    g: &BlockState,
    g0w: &BlockState,
    v: &Potential,
    h: f64,
    beta: f64,
    bx: &BoxGrid,
    alpha0: SampledProfile,
    c1: f64,
    c2: f64,
) -> Result<Certificate> {
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(invalid("certificate constants must be nonnegative"));
    }
    let f_value = free_energy_difference(g, g0w, v, h, beta, bx, alpha0)?;
    let norms = certificate_norms(g, g0w, h, bx, alpha0)?;
    Ok(Certificate::assemble(f_value, norms, h, c1, c2))
}

/// States whose norms are swept over h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateFamily {
    /// Γ = Γ₀ʷ.
    Reference,
    /// Γ = gibbs(H₀ʷ + t h²·diag(U, −U)) with U(x) = amplitude·e^{−|x|²/2} and t chosen to minimize
    /// F_β along the line, |t| ≤ 1.
    Perturbed { amplitude: f64 },
}

impl Default for StateFamily {
    fn default() -> Self {
        StateFamily::Perturbed { amplitude: 1.0 }
    }
}

/// Norms and fitted exponents of an a-priori sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriScaling {
    pub h: Vec<f64>,
    pub t: Vec<f64>,
    pub f_value: Vec<f64>,
    pub xi_h1: Vec<f64>,
    pub q_h1: Vec<f64>,
    pub xi_exponent: f64,
    /// None when q vanishes identically, as for the reference family.
    pub q_exponent: Option<f64>,
}

impl AprioriScaling {
    /// Both available exponents reach `min`.
    pub fn meets(&self, min: f64) -> bool {
        self.xi_exponent >= min && self.q_exponent.is_none_or(|e| e >= min)
    }
}

/// Position-basis perturbation h²·diag(U, −U).
fn potential_perturbation(bx: &BoxGrid, amplitude: f64, h: f64) -> CMat {
    let m = bx.size();
    let mut p = CMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        let u = h * h * amplitude * (-0.5 * bx.position_norm(i).powi(2)).exp();
        p[(i, i)] = Complex64::new(u, 0.0);
        p[(m + i, m + i)] = Complex64::new(-u, 0.0);
    }
    p
}

/// A family member at one h: the state, its line parameter and F_β.
struct Member {
    state: BlockState,
    t: f64,
    f_value: f64,
}

fn perturbed_member(
    ham: &BlockHamiltonian,
    pert: &CMat,
    f_of: &dyn Fn(&BlockState) -> Result<f64>,
    beta: f64,
) -> Result<Member> {
    let at = |t: f64| -> Result<(BlockState, f64)> {
        let h = BlockHamiltonian::new(ham.matrix() + pert * Complex64::new(t, 0.0))?;
        let s = gibbs_block_state(&h, beta)?;
        let f = f_of(&s)?;
        Ok((s, f))
    };
    let d = 1e-2;
    let (_, fp) = at(d)?;
    let (_, fm) = at(-d)?;
    let a = (fp - fm) / (2.0 * d);
    let b = (fp + fm) / (2.0 * d * d);
    let mut t = if b > 0.0 { (-a / (2.0 * b)).clamp(-1.0, 1.0) } else { -a.signum() };
    for _ in 0..40 {
        let (state, f_value) = at(t)?;
        if f_value <= F_TOL {
            return Ok(Member { state, t, f_value });
        }
        t *= 0.5;
    }
    let (state, f_value) = at(0.0)?;
    Ok(Member { state, t: 0.0, f_value })
}

/// Sweeps ‖ξ‖_{H¹} and ‖γ − γ₀ʷ‖_{H¹} over h for a family with F_β ≤ 0 at every member.
pub fn apriori_scaling(
    h_list: &[f64],
    family: StateFamily,
    bx: &BoxGrid,
    model: &BdgModel,
    v: &Potential,
    alpha0: SampledProfile,
) -> Result<AprioriScaling> {
    let beta = 1.0 / model.t;
    let mut out = AprioriScaling {
        h: h_list.to_vec(),
        t: Vec::new(),
        f_value: Vec::new(),
        xi_h1: Vec::new(),
        q_h1: Vec::new(),
        xi_exponent: f64::NAN,
        q_exponent: None,
    };
    for &h in h_list {
        let op = build_h0w(bx, model.mu, model.w, model.delta, h)?;
        let grid = *op.grid();
        let g0w = reference_state(&op, beta)?;
        let f_of = |s: &BlockState| free_energy_difference(s, &g0w, v, h, beta, &grid, alpha0);
        let member = match family {
            StateFamily::Reference => Member { f_value: f_of(&g0w)?, state: g0w.clone(), t: 0.0 },
            StateFamily::Perturbed { amplitude } => {
                let pert = potential_perturbation(&grid, amplitude, h);
                perturbed_member(&op.hamiltonian()?, &pert, &f_of, beta)?
            }
        };
        if member.f_value > F_TOL {
            return Err(Error::FamilyViolation { h, f_value: member.f_value });
        }
        let [_, _, xi, q] = certificate_norms(&member.state, &g0w, h, &grid, alpha0)?;
        log::info!("apriori h = {h}: t {:.4e} f {:.4e} xi {:.4e} q {:.4e}", member.t, member.f_value, xi.sqrt(), q.sqrt());
        out.t.push(member.t);
        out.f_value.push(member.f_value);
        out.xi_h1.push(xi.sqrt());
        out.q_h1.push(q.sqrt());
    }
    out.xi_exponent = scaling_fit(h_list, &out.xi_h1)?.0;
    if out.q_h1.iter().any(|&q| q > 0.0) {
        out.q_exponent = Some(scaling_fit(h_list, &out.q_h1)?.0);
    }
    Ok(out)
}

/// Result of the two-form comparison on symmetric pair functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtvCheck {
    /// Smallest ratio of the (K_T^Δ + V) form to the h²|(∇ₓ+∇ᵧ)Λ|² form on the range of the latter.
    pub c_star: f64,
    /// Smallest eigenvalue of the (K_T^Δ + V) form on the kernel of the gradient form.
    pub kernel_min: f64,
    pub kernel_dim: usize,
    /// Smallest Rayleigh-quotient ratio over seeded random symmetric Λ.
    pub sampled_min: f64,
}

/// Both quadratic forms as real symmetric matrices on vec(Λ), column-major, and the isometry onto
/// symmetric Λ.
pub struct KtvForms {
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    pub sym: DMatrix<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn ktv_forms(bx: &BoxGrid, t: f64, v: &Potential, mu: f64, delta: SampledProfile, h: f64) -> Result<KtvForms> {
    check_h(bx, h)?;
    if bx.dims != 1 || bx.n > MAX_KTV_SITES {
        return Err(invalid(format!("the form check needs a 1D box with n ≤ {MAX_KTV_SITES}")));
    }
    let m = bx.size();
    let f = bx.dft_matrix();
    let mut symbol = Vec::with_capacity(m);
    for k in 0..m {
        let hp = h * bx.momentum_norm(k);
        symbol.push(kt_multiplier(dispersion(hp, mu).hypot(delta.at(hp)?), t)?);
    }
    let deriv: Vec<f64> = (0..m).map(|k| if bx.is_nyquist(k, 0) { 0.0 } else { bx.momentum(k)[0] }).collect();
    let to_pos = |s: &[f64], imag: bool| -> DMatrix<f64> {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            s.iter().map(|&v| if imag { Complex64::new(0.0, v) } else { Complex64::new(v, 0.0) }),
        ));
        (&f * d * f.adjoint()).map(|z| z.re)
    };
    let kx = to_pos(&symbol, false);
    let dx = to_pos(&deriv, true);
    let id = DMatrix::<f64>::identity(m, m);
    let dv2 = bx.cell_volume().powi(2);
    // vec(KΛ) = (I ⊗ K) vec Λ and vec(ΛDᵀ) = (D ⊗ I) vec Λ.
    let mut lhs = id.kronecker(&kx);
    for y in 0..m {
        for x in 0..m {
            lhs[(y * m + x, y * m + x)] += v.value(1, bx.periodic_distance(x, y) / h);
        }
    }
    lhs *= dv2;
    let lhs = (&lhs + lhs.transpose()) * 0.5;
    let grad = id.kronecker(&dx) + dx.kronecker(&id);
    let rhs = grad.transpose() * grad * (h * h * dv2);
    let sym_dim = m * (m + 1) / 2;
    let mut sym = DMatrix::zeros(m * m, sym_dim);
    let mut c = 0;
    for y in 0..m {
        for x in y..m {
            if x == y {
                sym[(y * m + x, c)] = 1.0;
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                sym[(y * m + x, c)] = s;
                sym[(x * m + y, c)] = s;
            }
            c += 1;
        }
    }
    Ok(KtvForms { lhs, rhs, sym })
}

/// Smallest generalized eigenvalue of (K_T^Δ + V, h²|(∇ₓ+∇ᵧ)·|²) on symmetric Λ, with the
/// gradient kernel split off and examined separately.
#[allow(clippy::too_many_arguments)]
pub fn ktv_form_bound_check(
    bx: &BoxGrid,
    t: f64,
    v: &Potential,
    mu: f64,
    delta: SampledProfile,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<KtvCheck> {
    use rand::Rng;
    let forms = ktv_forms(bx, t, v, mu, delta, h)?;
    let a = forms.sym.transpose() * &forms.lhs * &forms.sym;
    let b = forms.sym.transpose() * &forms.rhs * &forms.sym;
    let eb = b.clone().symmetric_eigen();
    let top = eb.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * top.max(f64::MIN_POSITIVE);
    if eb.eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::Internal("gradient form is indefinite".into()));
    }
    let range: Vec<usize> = (0..b.nrows()).filter(|&i| eb.eigenvalues[i] > tol).collect();
    let kernel: Vec<usize> = (0..b.nrows()).filter(|&i| eb.eigenvalues[i] <= tol).collect();
    let q = eb.eigenvectors.select_columns(&range);
    let inv_sqrt: Vec<f64> = range.iter().map(|&i| 1.0 / eb.eigenvalues[i].sqrt()).collect();
    let mut ar = q.transpose() * &a * &q;
    for i in 0..ar.nrows() {
        for j in 0..ar.ncols() {
            ar[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let c_star = ar.symmetric_eigenvalues().min();
    let kernel_min = if kernel.is_empty() {
        f64::INFINITY
    } else {
        let n = eb.eigenvectors.select_columns(&kernel);
        (n.transpose() * &a * &n).symmetric_eigenvalues().min()
    };
    let mut sampled_min = f64::INFINITY;
    for s in 0..samples {
        let mut rng = crate::rng::sample_rng(seed, s as u64);
        let lam = nalgebra::DVector::from_fn(a.nrows(), |_, _| rng.random_range(-1.0..1.0));
        let den = lam.dot(&(&b * &lam));
        if den > tol * lam.norm_squared() {
            sampled_min = sampled_min.min(lam.dot(&(&a * &lam)) / den);
        }
    }
    Ok(KtvCheck { c_star, kernel_min, kernel_dim: kernel.len(), sampled_min })
}

/// The reference state and its Hamiltonian at one h, for callers assembling their own states.
pub fn reference_pair(bx: &BoxGrid, model: &BdgModel, h: f64) -> Result<(BdgOperator, BlockState)> {
    let op = build_h0w(bx, model.mu, model.w, model.delta, h)?;
    let g0w = reference_state(&op, 1.0 / model.t)?;
    Ok((op, g0w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::entropy_bound_terms_with_reference;
    use crate::foundation::{build_radial_grid, gaussian_potential, QuadratureRule, RadialGrid};
    use crate::tibcs::state_from_delta;
    use rand::Rng;

    const T: f64 = 1.0;
    const MU: f64 = 1.0;

    struct Setup {
        grid: RadialGrid,
        delta: Vec<f64>,
        alpha: Vec<f64>,
        w: Potential,
        v: Potential,
    }

    fn setup() -> Setup {
        let grid = build_radial_grid(12.0, 96, QuadratureRule::default()).unwrap();
        let delta: Vec<f64> = grid.nodes().iter().map(|p| 0.8 * (-p * p / 4.0).exp()).collect();
        let alpha = state_from_delta(&grid, &delta, T, MU).unwrap().alpha;
        Setup { grid, delta, alpha, w: gaussian_potential(1.0, 1.0).unwrap(), v: gaussian_potential(-5.0, 1.0).unwrap() }
    }

    impl Setup {
        fn model(&self) -> BdgModel<'_> {
            BdgModel { w: &self.w, delta: SampledProfile::new(&self.grid, &self.delta).unwrap(), mu: MU, t: T }
        }
        fn alpha0(&self) -> SampledProfile<'_> {
            SampledProfile::new(&self.grid, &self.alpha).unwrap()
        }
    }

    fn box1(h: f64) -> BoxGrid {
        BoxGrid::new(8.0, 16, 1, h).unwrap()
    }

    /// Rank-two BdG perturbation w w† − w′w′† with w′ = (−v̄, ū).
    fn rank_two(m: usize, seed: u64) -> CMat {
        let mut rng = crate::rng::sample_rng(seed, 0);
        let w: Vec<Complex64> =
            (0..2 * m).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let wp: Vec<Complex64> = (0..2 * m).map(|i| if i < m { -w[m + i].conj() } else { w[i - m].conj() }).collect();
        CMat::from_fn(2 * m, 2 * m, |i, j| w[i] * w[j].conj() - wp[i] * wp[j].conj())
    }

    fn perturbed(op: &BdgOperator, eps: f64, seed: u64) -> BlockState {
        let h = op.hamiltonian().unwrap();
        let p = rank_two(op.grid().size(), seed);
        let h = BlockHamiltonian::new(h.matrix() + p * Complex64::new(eps, 0.0)).unwrap();
        gibbs_block_state(&h, 1.0 / T).unwrap()
    }

    #[test]
    fn reference_state_has_zero_free_energy() {
        let s = setup();
        for h in [0.4, 0.3, 0.2] {
            let (op, g0w) = reference_pair(&box1(h), &s.model(), h).unwrap();
            let f = free_energy_difference(&g0w, &g0w, &s.v, h, 1.0 / T, op.grid(), s.alpha0()).unwrap();
            assert!(f.abs() < 1e-10, "h = {h}: {f}");
        }
    }

    #[test]
    fn zero_interaction_leaves_entropy() {
        let s = setup();
        let h = 0.3;
        let (op, g0w) = reference_pair(&box1(h), &s.model(), h).unwrap();
        let g = perturbed(&op, 0.05, 3);
        let terms = free_energy_terms(&g, &g0w, &Potential::zero(), h, 1.0 / T, op.grid(), s.alpha0()).unwrap();
        assert_eq!(terms.interaction, 0.0);
        assert_eq!(terms.cross, 0.0);
        assert!(terms.entropy > 0.0);
        let again = relative_entropy(&g, &g0w).unwrap() * T / 2.0;
        assert!((terms.total() - again).abs() < 1e-14);
    }

    #[test]
    fn matches_brute_force_pair_sums() {
        let s = setup();
        let h = 0.3;
        let bx = box1(h);
        let (op, g0w) = reference_pair(&bx, &s.model(), h).unwrap();
        let g = perturbed(&op, 0.05, 11);
        let got = free_energy_difference(&g, &g0w, &s.v, h, 1.0 / T, &bx, s.alpha0()).unwrap();

        let m = bx.size();
        let dx = bx.length / m as f64;
        let dv = dx;
        let ks: Vec<f64> = (0..m).map(|k| 2.0 * std::f64::consts::PI / bx.length * bx.signed(k) as f64).collect();
        let sym: Vec<f64> = ks.iter().map(|k| s.alpha0().at(h * k.abs()).unwrap()).collect();
        let kernel = |z: f64| -> f64 { ks.iter().zip(&sym).map(|(k, a)| a * (k * z).cos()).sum::<f64>() / (dv * m as f64) };
        let (a, a0) = (g.alpha(), g0w.alpha());
        let mut oracle = relative_entropy(&g, &g0w).unwrap() * T / 2.0;
        for x in 0..m {
            for y in 0..m {
                let mut z = (x as f64 - y as f64) * dx;
                z -= bx.length * (z / bx.length).round();
                let vv = -5.0 * (-0.5 * (z / h).powi(2)).exp();
                let al = a[(x, y)] / dv;
                let al0 = a0[(x, y)] / dv;
                oracle += dv * dv * vv * (al - al0).norm_sqr();
                oracle += 2.0 * dv * dv * vv * ((al - al0) * (al0 - kernel(z)).conj()).re;
            }
        }
        assert!((got - oracle).abs() < 1e-12 * oracle.abs().max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn entropy_term_dominates_lower_bound_terms() {
        let s = setup();
        let h = 0.3;
        let (op, g0w) = reference_pair(&box1(h), &s.model(), h).unwrap();
        let ham = op.hamiltonian().unwrap();
        for seed in 0..4 {
            let g = perturbed(&op, 0.1, seed);
            let b = entropy_bound_terms_with_reference(&g, &g0w, &ham, 1.0 / T).unwrap();
            assert!(b.slack() >= -1e-10, "seed {seed}: {b:?}");
        }
    }

    fn b1() -> Matrix3<f64> {
        Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 1.5)
    }

    #[test]
    fn gl_trivial_fields() {
        let bx = BoxGrid::new(6.0, 8, 2, 0.2).unwrap();
        let m = bx.size();
        let one = OrderField::new(bx, vec![Complex64::new(1.0, 0.0); m]).unwrap();
        assert!(gl_energy(&one, &Potential::zero(), &b1(), 1.0, 1.0).unwrap().abs() < 1e-12);
        let zero = OrderField::new(bx, vec![Complex64::new(0.0, 0.0); m]).unwrap();
        let e = gl_energy(&zero, &Potential::zero(), &b1(), 1.0, 1.0).unwrap();
        assert!((e - bx.volume()).abs() < 1e-12);
        let bad = Matrix3::new(1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(gl_energy(&one, &Potential::zero(), &bad, 1.0, 1.0).is_err());
    }

    #[test]
    fn gl_single_mode_gradient() {
        let bx = BoxGrid::new(6.0, 16, 2, 0.2).unwrap();
        let k = [2.0 * std::f64::consts::PI / 6.0 * 2.0, 2.0 * std::f64::consts::PI / 6.0];
        let amp = 0.7;
        let psi: Vec<Complex64> = (0..bx.size())
            .map(|i| {
                let x = bx.position(i);
                Complex64::new(amp * (k[0] * x[0] + k[1] * x[1]).cos(), 0.0)
            })
            .collect();
        let field = OrderField::new(bx, psi).unwrap();
        let b = b1();
        let quad = b[(0, 0)] * k[0] * k[0] + 2.0 * b[(0, 1)] * k[0] * k[1] + b[(1, 1)] * k[1] * k[1];
        let e = gl_energy(&field, &Potential::zero(), &b, 0.0, 0.0).unwrap();
        assert!((e - quad * amp * amp * bx.volume() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn gl_nonnegative_without_potential_term() {
        let bx = BoxGrid::new(5.0, 8, 1, 0.2).unwrap();
        let w = gaussian_potential(-3.0, 1.0).unwrap();
        for seed in 0..20 {
            let mut rng = crate::rng::sample_rng(seed, 0);
            let psi = (0..8).map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let f = OrderField::new(bx, psi).unwrap();
            assert!(gl_energy(&f, &w, &b1(), 0.0, 0.5).unwrap() >= 0.0);
        }
    }

    #[test]
    fn certificate_of_reference_state() {
        let s = setup();
        let h = 0.3;
        let (op, g0w) = reference_pair(&box1(h), &s.model(), h).unwrap();
        let bx = op.grid();
        let c = theorem_certificate(&g0w, &g0w, &s.v, h, 1.0 / T, bx, s.alpha0(), DEFAULT_C1, DEFAULT_C2).unwrap();
        assert!(c.f_value.abs() < 1e-10);
        assert_eq!(c.q_h1_sq, 0.0);
        assert!(c.phi_l2_sq < 0.1 * bx.volume(), "{c:?}");
        assert!((c.rhs - c.recomputed_rhs()).abs() < 1e-15);
        assert!(c.bound_holds.is_some());

        let alpha = PairField::from_operator(*bx, &g0w.alpha()).unwrap();
        let psi = extract_psi(&alpha, s.alpha0(), h).unwrap();
        assert!(psi.psi().iter().all(|z| (z.re - 1.0).abs() < 0.3 && z.im.abs() < 1e-10));

        let flipped = g0w.phase_flipped();
        let alpha = PairField::from_operator(*bx, &flipped.alpha()).unwrap();
        let psi = extract_psi(&alpha, s.alpha0(), h).unwrap();
        assert!(psi.psi().iter().all(|z| (z.re + 1.0).abs() < 0.3));
        let cf = theorem_certificate(&flipped, &g0w, &s.v, h, 1.0 / T, bx, s.alpha0(), DEFAULT_C1, DEFAULT_C2).unwrap();
        assert!((cf.phi_l2_sq - c.phi_l2_sq).abs() < 1e-12);
        assert!((cf.grad_psi_sq - c.grad_psi_sq).abs() < 1e-12);
    }

    #[test]
    fn rhs_is_monotone_in_each_norm() {
        let base = [0.3, 0.2, 0.1, 0.4];
        let c0 = Certificate::assemble(-1.0, base, 0.2, DEFAULT_C1, DEFAULT_C2);
        for k in 0..4 {
            let mut n = base;
            n[k] += 0.5;
            assert!(Certificate::assemble(-1.0, n, 0.2, DEFAULT_C1, DEFAULT_C2).rhs >= c0.rhs);
        }
        assert_eq!(Certificate::assemble(1.0, base, 0.2, 1.0, 1.0).bound_holds, None);
    }

    #[test]
    fn injected_residual_grows_rhs_quadratically() {
        let s = setup();
        let h = 0.3;
        let (op, g0w) = reference_pair(&box1(h), &s.model(), h).unwrap();
        let bx = *op.grid();
        let m = bx.size();
        let r = ReferenceKernel::new(&bx, s.alpha0(), h).unwrap();
        // Even displacement profile orthogonal to the reference profile, so ψ is unchanged.
        let z0 = 3;
        let rho_z0 = r.at(z0, 0);
        let g = |d: usize| -> f64 {
            let bump = if d == z0 || d == bx.neg(z0) { 1.0 } else { 0.0 };
            bump - 2.0 * rho_z0 * r.at(d, 0) / r.norm_sq()
        };
        let dv = bx.cell_volume();
        let rhs_at = |amp: f64| -> f64 {
            let x = CMat::from_fn(m, m, |x, y| Complex64::new(amp * dv * g(bx.add(x, bx.neg(y))), 0.0));
            let mut mat = g0w.matrix().clone();
            let a = g0w.alpha() + &x;
            mat.view_mut((0, m), (m, m)).copy_from(&a);
            mat.view_mut((m, 0), (m, m)).copy_from(&a.adjoint());
            let state = BlockState::with_pattern(mat).unwrap();
            let norms = certificate_norms(&state, &g0w, h, &bx, s.alpha0()).unwrap();
            Certificate::assemble(-1.0, norms, h, DEFAULT_C1, DEFAULT_C2).rhs
        };
        let r: Vec<f64> = [0.0, 1.0, 2.0, 3.0].iter().map(|&a| rhs_at(a)).collect();
        // Quadratic through the first three samples predicts the fourth.
        let predicted = r[0] - 3.0 * r[1] + 3.0 * r[2];
        assert!((r[3] - predicted).abs() < 1e-10 * r[3].abs().max(1.0));
        assert!(r[2] - 2.0 * r[1] + r[0] > 0.0);
    }

    #[test]
    fn reference_family_sweep() {
        let s = setup();
        let hs = [0.4, 0.3, 0.2];
        let res = apriori_scaling(&hs, StateFamily::Reference, &box1(0.4), &s.model(), &s.v, s.alpha0()).unwrap();
        assert!(res.q_exponent.is_none());
        assert!(res.f_value.iter().all(|f| f.abs() < 1e-10));
        assert!(res.xi_exponent.is_finite());
    }

    #[test]
    fn perturbed_family_keeps_free_energy_nonpositive() {
        let s = setup();
        let hs = [0.4, 0.3, 0.2];
        let res = apriori_scaling(&hs, StateFamily::default(), &box1(0.4), &s.model(), &s.v, s.alpha0()).unwrap();
        assert!(res.f_value.iter().all(|&f| f <= F_TOL));
        assert!(res.q_h1.iter().all(|&q| q > 0.0), "{res:?}");
        assert!(res.q_exponent.is_some());
    }

    #[test]
    fn synthetic_exponents() {
        let hs = [0.4, 0.2, 0.1, 0.05];
        let half: Vec<f64> = hs.iter().map(|h: &f64| 2.0 * h.sqrt()).collect();
        let (e, _) = scaling_fit(&hs, &half).unwrap();
        assert!((0.45..=0.55).contains(&e));
        let flat = AprioriScaling {
            h: hs.to_vec(),
            t: vec![0.0; 4],
            f_value: vec![0.0; 4],
            xi_h1: vec![1.0; 4],
            q_h1: vec![1.0; 4],
            xi_exponent: scaling_fit(&hs, &[1.0; 4]).unwrap().0,
            q_exponent: Some(scaling_fit(&hs, &[1.0; 4]).unwrap().0),
        };
        assert!(!flat.meets(0.4));
    }

    #[test]
    fn free_form_bound_with_zero_gap() {
        let g = build_radial_grid(12.0, 32, QuadratureRule::default()).unwrap();
        let zero = vec![0.0; 32];
        let bx = BoxGrid::new(8.0, 16, 1, 0.4).unwrap();
        let d = SampledProfile::new(&g, &zero).unwrap();
        let chk = ktv_form_bound_check(&bx, 0.5, &Potential::zero(), MU, d, 0.4, 20, 1).unwrap();
        let forms = ktv_forms(&bx, 0.5, &Potential::zero(), MU, d, 0.4).unwrap();
        let top = forms.rhs.clone().symmetric_eigenvalues().max();
        let floor = 2.0 * 0.5 * bx.cell_volume().powi(2) / top;
        assert!(chk.c_star >= floor * (1.0 - 1e-9), "{chk:?} floor {floor}");
        assert!(chk.kernel_min > 0.0 && chk.sampled_min >= chk.c_star * (1.0 - 1e-9));
    }

    #[test]
    fn relative_functions_span_gradient_kernel() {
        let s = setup();
        let h = 0.4;
        let bx = BoxGrid::new(8.0, 16, 1, h).unwrap();
        let forms = ktv_forms(&bx, T, &s.v, MU, s.model().delta, h).unwrap();
        let r = ReferenceKernel::new(&bx, s.alpha0(), h).unwrap();
        let m = bx.size();
        let lam = nalgebra::DVector::from_fn(m * m, |i, _| r.at(i % m, i / m));
        let rhs = lam.dot(&(&forms.rhs * &lam));
        let top = forms.rhs.clone().symmetric_eigenvalues().max();
        assert!(rhs.abs() < 1e-12 * top * lam.norm_squared(), "{rhs}");
        let chk = ktv_form_bound_check(&bx, T, &s.v, MU, s.model().delta, h, 10, 2).unwrap();
        assert!(chk.c_star.is_finite() && chk.kernel_dim >= m / 2);
    }
}
