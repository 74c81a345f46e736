//! Relative entropy of BCS block states and the matrix inequalities built on it.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh, eigvalsh, frobenius_sq, hermitian_defect, max_abs, spectral_apply, CMat};
use crate::rng::sample_rng;

const PATTERN_TOL: f64 = 1e-9;
const SPECTRUM_TOL: f64 = 1e-9;

fn block(m: &CMat, r: usize, c: usize, n: usize) -> CMat {
    m.view((r * n, c * n), (n, n)).into_owned()
}

fn assemble(b11: &CMat, b12: &CMat, b21: &CMat, b22: &CMat) -> CMat {
    let n = b11.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(b11);
    m.view_mut((0, n), (n, n)).copy_from(b12);
    m.view_mut((n, 0), (n, n)).copy_from(b21);
    m.view_mut((n, n), (n, n)).copy_from(b22);
    m
}

fn check_square_even(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
        return Err(invalid(format!("expected a nonempty 2n×2n matrix, got {}×{}", m.nrows(), m.ncols())));
    }
    Ok(m.nrows() / 2)
}

/// Generalized one-particle density matrix Γ = [[γ, α], [ᾱ, 1 − γ̄]] with 0 ≤ Γ ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    n: usize,
    matrix: CMat,
}

impl BlockState {
    /// Validates Hermiticity, the block pattern and the spectrum.
    pub fn new(matrix: CMat) -> Result<Self> {
        let st = Self::with_pattern(matrix)?;
        let ev = eigvalsh(&st.matrix);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
            return Err(Error::InvalidState(format!("spectrum [{lo}, {hi}] leaves [0, 1]")));
        }
        Ok(st)
    }

    /// Validates Hermiticity and the block pattern only; for matrices whose spectrum is known.
    pub(crate) fn with_pattern(matrix: CMat) -> Result<Self> {
        let n = check_square_even(&matrix)?;
        let scale = 1.0f64.max(max_abs(&matrix));
        let herm = hermitian_defect(&matrix);
        if herm > PATTERN_TOL * scale {
            return Err(Error::InvalidState(format!("matrix is not Hermitian (defect {herm:e})")));
        }
        let g = block(&matrix, 0, 0, n);
        let lr = block(&matrix, 1, 1, n);
        let expect_lr = CMat::identity(n, n) - g.map(|z| z.conj());
        let d1 = max_abs(&(lr - expect_lr));
        let ll = block(&matrix, 1, 0, n);
        let d2 = max_abs(&(ll - block(&matrix, 0, 1, n).map(|z| z.conj())));
        if d1.max(d2) > PATTERN_TOL * scale {
            return Err(Error::InvalidState(format!("block pattern violated (defect {:e})", d1.max(d2))));
        }
        Ok(BlockState { n, matrix })
    }

    /// Averages a nearly patterned Hermitian matrix onto the exact pattern.
    pub(crate) fn project(matrix: &CMat) -> CMat {
        let n = matrix.nrows() / 2;
        let h = (matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let g = (block(&h, 0, 0, n) + CMat::identity(n, n) - block(&h, 1, 1, n).map(|z| z.conj()))
            * Complex64::new(0.5, 0.0);
        let a = (block(&h, 0, 1, n) + block(&h, 1, 0, n).map(|z| z.conj())) * Complex64::new(0.5, 0.0);
        let a = (&a + a.transpose()) * Complex64::new(0.5, 0.0);
        let lr = CMat::identity(n, n) - g.map(|z| z.conj());
        let ll = a.map(|z| z.conj());
        assemble(&g, &a, &ll, &lr)
    }

    /// Builds Γ from γ and α (α must be symmetric, γ Hermitian); the spectrum is checked.
    pub fn from_blocks(gamma: &CMat, alpha: &CMat) -> Result<Self> {
        let n = gamma.nrows();
        if gamma.ncols() != n || alpha.nrows() != n || alpha.ncols() != n {
            return Err(invalid("γ and α must be square of equal size"));
        }
        let lr = CMat::identity(n, n) - gamma.map(|z| z.conj());
        Self::new(assemble(gamma, alpha, &alpha.map(|z| z.conj()), &lr))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn gamma(&self) -> CMat {
        block(&self.matrix, 0, 0, self.n)
    }

    pub fn alpha(&self) -> CMat {
        block(&self.matrix, 0, 1, self.n)
    }

    /// Same state with α replaced by −α.
    pub fn phase_flipped(&self) -> Self {
        let mut m = self.matrix.clone();
        let n = self.n;
        m.view_mut((0, n), (n, n)).scale_mut(-1.0);
        m.view_mut((n, 0), (n, n)).scale_mut(-1.0);
        BlockState { n, matrix: m }
    }
}

/// BdG Hamiltonian H = [[h, Δ], [Δ̄, −h̄]].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHamiltonian {
    n: usize,
    matrix: CMat,
}

impl BlockHamiltonian {
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = check_square_even(&matrix)?;
        let scale = 1.0f64.max(max_abs(&matrix));
        let herm = hermitian_defect(&matrix);
        if herm > 1e-12 * scale {
            return Err(invalid(format!("Hamiltonian is not Hermitian (defect {herm:e})")));
        }
        let h = block(&matrix, 0, 0, n);
        let d1 = max_abs(&(block(&matrix, 1, 1, n) + h.map(|z| z.conj())));
        let d2 = max_abs(&(block(&matrix, 1, 0, n) - block(&matrix, 0, 1, n).map(|z| z.conj())));
        if d1.max(d2) > 1e-12 * scale {
            return Err(invalid(format!("Hamiltonian block pattern violated (defect {:e})", d1.max(d2))));
        }
        Ok(BlockHamiltonian { n, matrix })
    }

    /// From h (Hermitian) and Δ (symmetric).
    pub fn from_blocks(h: &CMat, delta: &CMat) -> Result<Self> {
        let lr = -h.map(|z| z.conj());
        Self::new(assemble(h, delta, &delta.map(|z| z.conj()), &lr))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

/// 1/(1 + e^x) without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// x / tanh(x/2), equal to 2 at x = 0.
pub fn f_ratio(x: f64) -> f64 {
    let y = 0.5 * x.abs();
    if y < 1e-4 {
        let y2 = y * y;
        2.0 * (1.0 + y2 / 3.0 - y2 * y2 / 45.0)
    } else {
        2.0 * y / y.tanh()
    }
}

/// ln((1−y)/y)/(1−2y), equal to 2 at y = ½.
pub fn g_ratio(y: f64) -> f64 {
    let t = 1.0 - 2.0 * y;
    if t.abs() < 1e-4 {
        let t2 = t * t;
        2.0 * (1.0 + t2 / 3.0 + t2 * t2 / 5.0)
    } else {
        2.0 * t.atanh() / t
    }
}

/// φ(x) = x ln x + (1−x) ln(1−x) with 0 ln 0 = 0.
pub fn phi(x: f64) -> f64 {
    let a = if x > 0.0 { x * x.ln() } else { 0.0 };
    let b = if x < 1.0 { (1.0 - x) * (1.0 - x).ln() } else { 0.0 };
    a + b
}

/// Γ = (1 + e^{βH})^{-1}.
pub fn gibbs_block_state(h: &BlockHamiltonian, beta: f64) -> Result<BlockState> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let (vals, vecs) = eigh(&h.matrix);
    let g = spectral_apply(&vals, &vecs, |l| fermi(beta * l));
    BlockState::with_pattern(BlockState::project(&g))
}

/// Tr[φ(A) − φ(B) − φ′(B)(A − B)] for Hermitian A with spectrum in [0,1] and B in (0,1).
pub fn relative_entropy_matrices(a: &CMat, b: &CMat) -> Result<f64> {
    let (mu, w) = eigh(b);
    for &m in mu.iter() {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::SingularReference(m));
        }
    }
    let la = eigvalsh(a);
    let tr_a: f64 = la.iter().map(|&l| phi(l.clamp(0.0, 1.0))).sum();
    let tr_b: f64 = mu.iter().map(|&m| phi(m)).sum();
    // Diagonal of W†(A − B)W in the eigenbasis of B.
    let aw = a * &w;
    let mut cross = 0.0;
    for (k, &m) in mu.iter().enumerate() {
        let akk: f64 = w.column(k).iter().zip(aw.column(k).iter()).map(|(x, y)| (x.conj() * y).re).sum();
        cross += (m / (1.0 - m)).ln() * (akk - m);
    }
    Ok(tr_a - tr_b - cross)
}

/// H(Γ, Γ′) = Tr[φ(Γ) − φ(Γ′) − φ′(Γ′)(Γ − Γ′)].
pub fn relative_entropy(g: &BlockState, gp: &BlockState) -> Result<f64> {
    if g.n != gp.n {
        return Err(invalid("states have different dimensions"));
    }
    relative_entropy_matrices(&g.matrix, &gp.matrix)
}

/// LHS − RHS of the scalar inequality x ln(x/y) + (1−x) ln((1−x)/(1−y)) ≥ g(y)(x−y)² + (4/3)(x(1−x) − y(1−y))².
pub fn scalar_entropy_inequality_gap(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(invalid(format!("arguments must lie in (0, 1), got ({x}, {y})")));
    }
    let lhs = x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    let q = x * (1.0 - x) - y * (1.0 - y);
    Ok(lhs - g_ratio(y) * (x - y).powi(2) - 4.0 / 3.0 * q * q)
}

/// The three terms of the entropy lower bound with Γ′ = gibbs(H, β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBound {
    pub lhs: f64,
    pub kinetic: f64,
    pub quartic: f64,
}

impl EntropyBound {
    pub fn slack(&self) -> f64 {
        self.lhs - self.kinetic - self.quartic
    }
}

fn one_minus(m: &CMat) -> CMat {
    CMat::identity(m.nrows(), m.ncols()) - m
}

/// Tr[(Γ−Γ′) f(βH) (Γ−Γ′)] with f(x) = x/tanh(x/2).
fn kinetic_term(g: &CMat, gp: &CMat, h: &CMat, beta: f64) -> f64 {
    let (vals, vecs) = eigh(h);
    let d = g - gp;
    let dv = vecs.adjoint() * &d;
    // Σ_k f(βλ_k) ‖(V†D)_k‖².
    vals.iter()
        .enumerate()
        .map(|(k, &l)| f_ratio(beta * l) * dv.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

/// (4/3) Tr[(Γ(1−Γ) − Γ′(1−Γ′))²].
fn quartic_term(g: &CMat, gp: &CMat) -> f64 {
    let y = g * one_minus(g) - gp * one_minus(gp);
    4.0 / 3.0 * frobenius_sq(&y)
}

pub fn entropy_bound_terms(g: &BlockState, h: &BlockHamiltonian, beta: f64) -> Result<EntropyBound> {
    if g.n != h.n {
        return Err(invalid("state and Hamiltonian have different dimensions"));
    }
    let gp = gibbs_block_state(h, beta)?;
    Ok(EntropyBound {
        lhs: relative_entropy(g, &gp)?,
        kinetic: kinetic_term(&g.matrix, &gp.matrix, &h.matrix, beta),
        quartic: quartic_term(&g.matrix, &gp.matrix),
    })
}

/// Same terms with the reference state already available as Γ′ = gibbs(H, β).
pub fn entropy_bound_terms_with_reference(
    g: &BlockState,
    gp: &BlockState,
    h: &BlockHamiltonian,
    beta: f64,
) -> Result<EntropyBound> {
    Ok(EntropyBound {
        lhs: relative_entropy(g, gp)?,
        kinetic: kinetic_term(&g.matrix, &gp.matrix, &h.matrix, beta),
        quartic: quartic_term(&g.matrix, &gp.matrix),
    })
}

/// ‖ln((1−Γ′)/Γ′)/(1−2Γ′) − βH/tanh(βH/2)‖_op with Γ′ = gibbs(H, β).
pub fn operator_identity_defect(h: &BlockHamiltonian, beta: f64) -> Result<f64> {
    let gp = gibbs_block_state(h, beta)?;
    let (gv, gw) = eigh(&gp.matrix);
    for &m in gv.iter() {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::SingularReference(m));
        }
    }
    let lhs = spectral_apply(&gv, &gw, g_ratio);
    let (hv, hw) = eigh(&h.matrix);
    let rhs = spectral_apply(&hv, &hw, |l| f_ratio(beta * l));
    let diff = lhs - rhs;
    Ok(eigvalsh(&diff).iter().fold(0.0, |m, l| m.max(l.abs())))
}

fn check_unit_interval(m: &CMat, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!("{name} is not square")));
    }
    if hermitian_defect(m) > 1e-12 * 1.0f64.max(max_abs(m)) {
        return Err(invalid(format!("{name} is not Hermitian")));
    }
    let ev = eigvalsh(m);
    if ev.first().is_some_and(|&l| l < -1e-12) || ev.last().is_some_and(|&l| l > 1.0 + 1e-12) {
        return Err(invalid(format!("{name} has spectrum outside [0, 1]")));
    }
    Ok(())
}

/// Tr(g − g₀)² − Tr(g(1−g) − g₀(1−g₀))².
pub fn klein_contraction_gap(g: &CMat, g0: &CMat) -> Result<f64> {
    check_unit_interval(g, "g")?;
    check_unit_interval(g0, "g0")?;
    if g.nrows() != g0.nrows() {
        return Err(invalid("matrices differ in size"));
    }
    let y = g * one_minus(g) - g0 * one_minus(g0);
    Ok(frobenius_sq(&(g - g0)) - frobenius_sq(&y))
}

/// γ(1−γ) − αᾱ − [γ₀(1−γ₀) − α₀ᾱ₀], the upper-left block of Γ(1−Γ) − Γ₀(1−Γ₀).
fn pair_block_difference(g: &BlockState, g0: &BlockState) -> CMat {
    let f = |s: &BlockState| {
        let gm = s.gamma();
        let a = s.alpha();
        &gm * one_minus(&gm) - &a * a.map(|z| z.conj())
    };
    f(g) - f(g0)
}

/// Tr[Γ(1−Γ) − Γ₀(1−Γ₀)]² − 2 Tr[γ(1−γ) − γ₀(1−γ₀) − αᾱ + α₀ᾱ₀]².
pub fn block_trace_inequality_gap(g: &BlockState, g0: &BlockState) -> Result<f64> {
    if g.n != g0.n {
        return Err(invalid("states have different dimensions"));
    }
    let y = &g.matrix * one_minus(&g.matrix) - &g0.matrix * one_minus(&g0.matrix);
    Ok(frobenius_sq(&y) - 2.0 * frobenius_sq(&pair_block_difference(g, g0)))
}

/// 2Tr(γ−γ₀)² + (4/3)Tr[γ(1−γ) − γ₀(1−γ₀) − αᾱ + α₀ᾱ₀]² − (4/5)Tr(αᾱ − α₀ᾱ₀)².
pub fn hs_chain_gap(g: &BlockState, g0: &BlockState) -> Result<f64> {
    if g.n != g0.n {
        return Err(invalid("states have different dimensions"));
    }
    let dg = g.gamma() - g0.gamma();
    let aa = |s: &BlockState| {
        let a = s.alpha();
        &a * a.map(|z| z.conj())
    };
    let da = aa(g) - aa(g0);
    Ok(2.0 * frobenius_sq(&dg) + 4.0 / 3.0 * frobenius_sq(&pair_block_difference(g, g0)) - 0.8 * frobenius_sq(&da))
}

/// Relative entropy of the compressions Q_r† Γ Q_r, Q_r† Γ′ Q_r for the leading `ranks` columns of `basis`.
pub fn compressed_entropy_profile(g: &BlockState, gp: &BlockState, basis: &CMat, ranks: &[usize]) -> Result<Vec<f64>> {
    ranks
        .iter()
        .map(|&r| {
            if r == 0 || r > basis.ncols() {
                return Err(invalid(format!("rank {r} out of range")));
            }
            let q = basis.columns(0, r);
            let a = q.adjoint() * &g.matrix * q;
            let b = q.adjoint() * &gp.matrix * q;
            relative_entropy_matrices(&a, &b)
        })
        .collect()
}

pub mod random {
    //! Seeded random Hermitian matrices, BdG Hamiltonians and block states.

    use super::*;

    fn gaussian_like<R: Rng>(rng: &mut R) -> f64 {
        // Sum of uniforms: adequate spread for test ensembles, no extra dependency.
        (0..4).map(|_| rng.random::<f64>() - 0.5).sum::<f64>()
    }

    fn random_complex<R: Rng>(n: usize, rng: &mut R) -> CMat {
        CMat::from_fn(n, n, |_, _| Complex64::new(gaussian_like(rng), gaussian_like(rng)))
    }

    fn rescale(m: CMat, norm: f64) -> CMat {
        let current = crate::linalg::hermitian_opnorm(&m);
        if current == 0.0 {
            m
        } else {
            m * Complex64::new(norm / current, 0.0)
        }
    }

    /// Random Hermitian n×n matrix with operator norm `norm`.
    pub fn hermitian<R: Rng>(n: usize, norm: f64, rng: &mut R) -> CMat {
        let a = random_complex(n, rng);
        rescale((&a + a.adjoint()) * Complex64::new(0.5, 0.0), norm)
    }

    /// Random BdG Hamiltonian of half-dimension n with operator norm `norm`.
    pub fn bdg_hamiltonian<R: Rng>(n: usize, norm: f64, rng: &mut R) -> BlockHamiltonian {
        let h = hermitian(n, 1.0, rng);
        let b = random_complex(n, rng);
        let d = (&b + b.transpose()) * Complex64::new(0.5, 0.0);
        let m = assemble(&h, &d, &d.map(|z| z.conj()), &-h.map(|z| z.conj()));
        BlockHamiltonian { n, matrix: rescale(m, norm) }
    }

    /// Gibbs state of a random BdG Hamiltonian with spectral spread `spread` (β = 1).
    pub fn block_state<R: Rng>(n: usize, spread: f64, rng: &mut R) -> BlockState {
        let h = bdg_hamiltonian(n, spread, rng);
        gibbs_block_state(&h, 1.0).expect("beta is positive")
    }

    /// Random n×n Hermitian matrix with spectrum in (0, 1).
    pub fn unit_interval_matrix<R: Rng>(n: usize, spread: f64, rng: &mut R) -> CMat {
        let a = hermitian(n, spread, rng);
        crate::linalg::hermitian_function(&a, fermi)
    }
}

/// Identifier of a randomized inequality suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityId {
    Scalar,
    EntropyBound,
    OperatorIdentity,
    Klein,
    BlockTrace,
    HsChain,
}

impl std::str::FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scalar" => Self::Scalar,
            "entropy-bound" | "entropy" => Self::EntropyBound,
            "operator-identity" => Self::OperatorIdentity,
            "klein" => Self::Klein,
            "block-trace" => Self::BlockTrace,
            "hs-chain" => Self::HsChain,
            other => return Err(invalid(format!("unknown inequality suite '{other}'"))),
        })
    }
}

/// Outcome of a randomized suite; `argmin_seed` is the sample stream index attaining `min_slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub inequality_id: InequalityId,
    pub samples: usize,
    pub min_slack: f64,
    pub argmin_seed: u64,
}

/// Slack of one sample; the operator identity reports the negated defect.
pub fn suite_sample(id: InequalityId, dim: usize, seed: u64, index: u64) -> Result<f64> {
    let mut rng = sample_rng(seed, index);
    let spread = |rng: &mut rand_chacha::ChaCha8Rng| 0.5 + 4.5 * rng.random::<f64>();
    match id {
        InequalityId::Scalar => {
            let x = 1e-3 + (1.0 - 2e-3) * rng.random::<f64>();
            let y = 1e-3 + (1.0 - 2e-3) * rng.random::<f64>();
            scalar_entropy_inequality_gap(x, y)
        }
        InequalityId::EntropyBound => {
            let s = spread(&mut rng);
            let g = random::block_state(dim, s, &mut rng);
            let beta = 0.5 + 1.5 * rng.random::<f64>();
            let norm = (0.1 + 2.4 * rng.random::<f64>()) / beta * 2.0;
            let h = random::bdg_hamiltonian(dim, norm.min(5.0 / beta), &mut rng);
            Ok(entropy_bound_terms(&g, &h, beta)?.slack())
        }
        InequalityId::OperatorIdentity => {
            let beta = 0.5 + 1.5 * rng.random::<f64>();
            let h = random::bdg_hamiltonian(dim, 5.0 / beta * rng.random::<f64>(), &mut rng);
            Ok(-operator_identity_defect(&h, beta)?)
        }
        InequalityId::Klein => {
            let (s1, s2) = (spread(&mut rng), spread(&mut rng));
            let g = random::unit_interval_matrix(dim, s1, &mut rng);
            let g0 = random::unit_interval_matrix(dim, s2, &mut rng);
            klein_contraction_gap(&g, &g0)
        }
        InequalityId::BlockTrace | InequalityId::HsChain => {
            let (s1, s2) = (spread(&mut rng), spread(&mut rng));
            let g = random::block_state(dim, s1, &mut rng);
            let g0 = random::block_state(dim, s2, &mut rng);
            if id == InequalityId::BlockTrace {
                block_trace_inequality_gap(&g, &g0)
            } else {
                hs_chain_gap(&g, &g0)
            }
        }
    }
}

/// Runs `samples` seeded instances in parallel and reports the smallest slack.
pub fn run_suite(id: InequalityId, samples: usize, dim: usize, seed: u64) -> Result<SuiteReport> {
    if samples == 0 || dim == 0 {
        return Err(invalid("samples and dim must be positive"));
    }
    let results: Vec<Result<f64>> =
        (0..samples as u64).into_par_iter().map(|i| suite_sample(id, dim, seed, i)).collect();
    let mut best = (f64::INFINITY, 0u64);
    for (i, r) in results.into_iter().enumerate() {
        let s = r?;
        if s < best.0 {
            best = (s, i as u64);
        }
    }
    Ok(SuiteReport { inequality_id: id, samples, min_slack: best.0, argmin_seed: best.1 })
}

/// Minimum of the scalar gap over the k×k grid {1/(k+1), …, k/(k+1)}².
pub fn scalar_grid_sweep(k: usize) -> (f64, (f64, f64)) {
    let pts: Vec<f64> = (1..=k).map(|i| i as f64 / (k + 1) as f64).collect();
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for &x in &pts {
        for &y in &pts {
            let v = scalar_entropy_inequality_gap(x, y).expect("grid points lie inside (0, 1)");
            if v < best.0 {
                best = (v, (x, y));
            }
        }
    }
    best
}

/// Diagonal state diag(x_1..x_n, 1−x_1..1−x_n).
pub fn diagonal_state(xs: &[f64]) -> Result<BlockState> {
    let n = xs.len();
    let d = DVector::from_iterator(2 * n, xs.iter().copied().chain(xs.iter().map(|x| 1.0 - x)));
    BlockState::new(CMat::from_diagonal(&d.map(|x| Complex64::new(x, 0.0))))
}
