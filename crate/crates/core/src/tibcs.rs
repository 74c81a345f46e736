//! Translation-invariant BCS theory on a radial momentum grid: the multiplier K_T^Δ, the
//! critical temperature, the gap equation and the free-energy functional.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::foundation::{
    build_radial_grid, radial_transform, shell_kernel, Potential, QuadratureRule, RadialGrid, FT3,
};

/// k(p) = p² − μ.
pub fn dispersion(p: f64, mu: f64) -> f64 {
    p * p - mu
}

/// E(p) = √(k(p)² + Δ̂(p)²).
pub fn quasiparticle_energy(p: f64, mu: f64, delta_at_p: f64) -> f64 {
    dispersion(p, mu).hypot(delta_at_p)
}

/// y / tanh(y), even, equal to 1 at y = 0.
pub(crate) fn y_coth_y(y: f64) -> f64 {
    let y = y.abs();
    if y < 1e-4 {
        let y2 = y * y;
        1.0 + y2 / 3.0 - y2 * y2 / 45.0
    } else {
        y / y.tanh()
    }
}

/// E / tanh(E/2T), with value 2T at E = 0.
pub fn kt_multiplier(e: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {t}")));
    }
    Ok(2.0 * t * y_coth_y(e / (2.0 * t)))
}

fn kt(e: f64, t: f64) -> f64 {
    2.0 * t * y_coth_y(e / (2.0 * t))
}

/// Translation-invariant state (γ̂, α̂) sampled on the nodes of a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiState {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub mu: f64,
}

impl TiState {
    /// Largest violation of 0 ≤ γ̂ ≤ 1 and α̂² ≤ γ̂(1 − γ̂).
    pub fn constraint_defect(&self) -> f64 {
        self.gamma
            .iter()
            .zip(&self.alpha)
            .map(|(&g, &a)| (-g).max(g - 1.0).max(a * a - g * (1.0 - g)).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Gibbs state of H₀(p) = [[k, Δ̂], [Δ̂, −k]] at each node.
pub fn state_from_delta(grid: &RadialGrid, delta: &[f64], t: f64, mu: f64) -> Result<TiState> {
    grid.check_samples(delta)?;
    if !(t > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {t}")));
    }
    let (gamma, alpha) = grid
        .nodes()
        .iter()
        .zip(delta)
        .map(|(&p, &d)| {
            let k = dispersion(p, mu);
            let big_k = kt(k.hypot(d), t);
            (0.5 - k / (2.0 * big_k), -d / (2.0 * big_k))
        })
        .unzip();
    Ok(TiState { gamma, alpha, t, mu })
}

/// Converged (or abandoned) gap-equation iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub delta: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Tc")]
    pub tc: Option<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GapSolution {
    pub fn is_normal(&self) -> bool {
        self.delta.iter().all(|&d| d == 0.0)
    }

    /// JSON record {T, Tc, residual, iterations, nodes[], delta[]}.
    pub fn to_json(&self, grid: &RadialGrid) -> serde_json::Value {
        serde_json::json!({
            "T": self.t,
            "Tc": self.tc,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "iterations": self.iterations,
            "converged": self.converged,
            "nodes": grid.nodes(),
            "delta": self.delta,
        })
    }

    /// CSV rows (p, Δ̂, γ̂, α̂).
    pub fn to_csv(&self, grid: &RadialGrid, mu: f64) -> Result<String> {
        let st = state_from_delta(grid, &self.delta, self.t, mu)?;
        let mut out = String::from("p,delta,gamma,alpha\n");
        for i in 0..grid.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                grid.nodes()[i],
                self.delta[i],
                st.gamma[i],
                st.alpha[i]
            ));
        }
        Ok(out)
    }
}

/// Starting profile of the gap iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GapInit {
    /// Lowest eigenvector of K_T⁰ + V scaled by √(−λ); zero if λ ≥ 0.
    #[default]
    Auto,
    Constant(f64),
    Profile(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapOptions {
    pub init: GapInit,
    pub damping: f64,
    pub tol: f64,
    pub maxiter: usize,
    /// History depth for Anderson mixing; `None` runs the plain damped iteration.
    pub anderson: Option<usize>,
    /// Reported with the solution when known.
    pub tc: Option<f64>,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions { init: GapInit::Auto, damping: 0.5, tol: 1e-10, maxiter: 200_000, anderson: None, tc: None }
    }
}

/// The s-wave gap equation for one potential, chemical potential and grid.
///
/// Precomputes C with (C g)_i = (2π)^{-3/2}(V̂ ∗ g)(p_i).
#[derive(Debug, Clone)]
pub struct GapProblem<'a> {
    grid: &'a RadialGrid,
    mu: f64,
    conv: DMatrix<f64>,
    sym: DMatrix<f64>,
}

impl<'a> GapProblem<'a> {
    pub fn new(potential: &Potential, mu: f64, grid: &'a RadialGrid) -> Result<Self> {
        potential.check_dims(3)?;
        let n = grid.len();
        let p = grid.nodes();
        let w = grid.weights();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| shell_kernel(potential, p[i], p[j])).collect())
            .collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let scale = FT3 / (4.0 * std::f64::consts::PI);
        let conv = DMatrix::from_fn(n, n, |i, j| scale * w[j] * a[(i, j)]);
        let sym = DMatrix::from_fn(n, n, |i, j| scale * (w[i] * w[j]).sqrt() * a[(i, j)]);
        let defect = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (sym[(i, j)] - sym[(j, i)]).abs())
            .fold(0.0, f64::max);
        let size = sym.amax().max(f64::MIN_POSITIVE);
        if defect > 1e-12 * size {
            return Err(Error::Internal(format!("convolution kernel asymmetric by {defect:e}")));
        }
        Ok(GapProblem { grid, mu, conv, sym })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// (2π)^{-3/2}(V̂ ∗ g) at the nodes.
    pub fn convolve(&self, g: &[f64]) -> Vec<f64> {
        (&self.conv * DVector::from_column_slice(g)).iter().copied().collect()
    }

    fn ktv_matrix(&self, t: f64) -> DMatrix<f64> {
        let mut m = self.sym.clone();
        for (i, &p) in self.grid.nodes().iter().enumerate() {
            m[(i, i)] += kt(dispersion(p, self.mu).abs(), t);
        }
        m
    }

    /// Smallest eigenvalue of the symmetrized discretization of K_T⁰ + V.
    pub fn lowest_eigenvalue(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid(format!("temperature must be positive, got {t}")));
        }
        let vals = self.ktv_matrix(t).symmetric_eigenvalues();
        Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Lowest eigenpair; the vector is returned as nodal values of α̂ (not weight-symmetrized).
    pub fn lowest_mode(&self, t: f64) -> Result<(f64, Vec<f64>)> {
        if !(t > 0.0) {
            return Err(invalid(format!("temperature must be positive, got {t}")));
        }
        let eig = self.ktv_matrix(t).symmetric_eigen();
        let k = eig.eigenvalues.imin();
        let w = self.grid.weights();
        let v = eig.eigenvectors.column(k).iter().zip(w).map(|(u, w)| u / w.sqrt()).collect();
        Ok((eig.eigenvalues[k], v))
    }

    /// Bisection for the sign change of the lowest eigenvalue; `tol` is relative.
    pub fn critical_temperature(&self, bracket: (f64, f64), tol: f64) -> Result<f64> {
        let (mut lo, mut hi) = bracket;
        if !(lo > 0.0 && hi > lo) || !(tol > 0.0) {
            return Err(invalid("bracket must satisfy 0 < Tlo < Thi and tol > 0"));
        }
        let f_lo = self.lowest_eigenvalue(lo)?;
        let f_hi = self.lowest_eigenvalue(hi)?;
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return Err(Error::Bracket { lo, hi, f_lo, f_hi });
        }
        while hi - lo > tol * hi {
            let mid = 0.5 * (lo + hi);
            if self.lowest_eigenvalue(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Finds temperatures on both sides of Tc by doubling/halving from T = 1.
    pub fn tc_bracket(&self) -> Result<(f64, f64)> {
        let mut t = 1.0;
        let f1 = self.lowest_eigenvalue(t)?;
        if f1 < 0.0 {
            for _ in 0..60 {
                let next = 2.0 * t;
                if self.lowest_eigenvalue(next)? > 0.0 {
                    return Ok((t, next));
                }
                t = next;
            }
        } else {
            for _ in 0..60 {
                let next = 0.5 * t;
                if self.lowest_eigenvalue(next)? < 0.0 {
                    return Ok((next, t));
                }
                t = next;
            }
        }
        Err(Error::Bracket { lo: t.min(1.0), hi: t.max(1.0), f_lo: f1, f_hi: f1 })
    }

    /// G(Δ) = −(2π)^{-3/2} V̂ ∗ (Δ̂ / K_T^Δ).
    pub fn gap_map(&self, delta: &[f64], t: f64) -> Vec<f64> {
        let ratio: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(delta)
            .map(|(&p, &d)| -d / kt(quasiparticle_energy(p, self.mu, d), t))
            .collect();
        self.convolve(&ratio)
    }

    pub fn solve(&self, t: f64, opts: &GapOptions) -> Result<GapSolution> {
        if !(t > 0.0) {
            return Err(invalid(format!("temperature must be positive, got {t}")));
        }
        if !(opts.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if !(opts.damping > 0.0 && opts.damping <= 1.0) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        let n = self.grid.len();
        let mut x = match &opts.init {
            GapInit::Auto => {
                let (lambda, alpha) = self.lowest_mode(t)?;
                if lambda >= 0.0 {
                    vec![0.0; n]
                } else {
                    let d: Vec<f64> = self
                        .grid
                        .nodes()
                        .iter()
                        .zip(&alpha)
                        .map(|(&p, &a)| -2.0 * kt(dispersion(p, self.mu).abs(), t) * a)
                        .collect();
                    let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let s = (-lambda).sqrt() / peak;
                    d.into_iter().map(|v| v * s).collect()
                }
            }
            GapInit::Constant(c) => vec![*c; n],
            GapInit::Profile(v) => {
                self.grid.check_samples(v)?;
                v.clone()
            }
        };
        let beta = opts.damping;
        let mut hist_x: Vec<DVector<f64>> = Vec::new();
        let mut hist_f: Vec<DVector<f64>> = Vec::new();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut rejected = 0;
        while iterations < opts.maxiter {
            let g = self.gap_map(&x, t);
            iterations += 1;
            let f = DVector::from_iterator(n, g.iter().zip(&x).map(|(g, x)| g - x));
            residual = f.amax();
            if !residual.is_finite() {
                return Err(Error::Numerical(format!("gap iteration produced {residual} at step {iterations}")));
            }
            if residual <= opts.tol {
                break;
            }
            let xv = DVector::from_column_slice(&x);
            // Mixing starts near a fixed point; from afar it can be drawn to the trivial solution.
            let near = residual <= 1e-2 * xv.amax();
            let plain = &xv + &f * beta;
            let next = match opts.anderson {
                Some(depth) if depth > 0 && near && rejected < 3 => {
                    hist_x.push(xv.clone());
                    hist_f.push(f.clone());
                    if hist_x.len() > depth + 1 {
                        hist_x.remove(0);
                        hist_f.remove(0);
                    }
                    let mixed = anderson_step(&hist_x, &hist_f, beta);
                    // A mixed step that shrinks the iterate sharply is heading for Δ = 0; after
                    // repeated rejections the plain iteration finishes alone.
                    if mixed.amax() < 0.5 * plain.amax() {
                        rejected += 1;
                        hist_x.clear();
                        hist_f.clear();
                        plain
                    } else {
                        mixed
                    }
                }
                _ => plain,
            };
            x = next.iter().copied().collect();
        }
        fix_phase(&mut x);
        Ok(GapSolution {
            delta: x,
            t,
            tc: opts.tc,
            residual,
            tolerance: opts.tol,
            iterations,
            converged: residual <= opts.tol,
        })
    }

    /// ∫ V(x)|α(x)|² dx, with α recovered by the inverse radial transform.
    pub fn interaction_energy(&self, potential: &Potential, alpha: &[f64]) -> Result<f64> {
        interaction_energy(potential, alpha, self.grid)
    }

    /// The same interaction energy evaluated in momentum space, Σ w α̂ (2π)^{-3/2}(V̂ ∗ α̂).
    pub fn interaction_energy_momentum(&self, alpha: &[f64]) -> f64 {
        let c = self.convolve(alpha);
        self.grid.weights().iter().zip(alpha).zip(c).map(|((w, a), c)| w * a * c).sum()
    }
}

fn anderson_step(xs: &[DVector<f64>], fs: &[DVector<f64>], beta: f64) -> DVector<f64> {
    let k = xs.len() - 1;
    let xk = &xs[k];
    let fk = &fs[k];
    if k == 0 {
        return xk + fk * beta;
    }
    let n = xk.len();
    let df = DMatrix::from_fn(n, k, |r, c| fs[c + 1][r] - fs[c][r]);
    let dx = DMatrix::from_fn(n, k, |r, c| xs[c + 1][r] - xs[c][r]);
    let svd = df.clone().svd(true, true);
    match svd.solve(fk, 1e-12 * svd.singular_values.max()) {
        Ok(gamma) => xk + fk * beta - (dx + df * beta) * gamma,
        Err(_) => xk + fk * beta,
    }
}

/// Makes the entry of largest modulus (first such node) nonnegative.
fn fix_phase(delta: &mut [f64]) {
    let mut best = 0;
    for (i, v) in delta.iter().enumerate() {
        if v.abs() > delta[best].abs() {
            best = i;
        }
    }
    if delta.get(best).is_some_and(|&v| v < 0.0) {
        delta.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Smallest eigenvalue of K_T⁰ + V in the s-wave sector.
pub fn lowest_eigenvalue_ktv(t: f64, potential: &Potential, mu: f64, grid: &RadialGrid) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {t}")));
    }
    GapProblem::new(potential, mu, grid)?.lowest_eigenvalue(t)
}

/// Critical temperature by bisection inside `bracket` to relative tolerance `tol`.
pub fn critical_temperature(
    potential: &Potential,
    mu: f64,
    grid: &RadialGrid,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    GapProblem::new(potential, mu, grid)?.critical_temperature(bracket, tol)
}

/// Solves the gap equation at temperature `t`.
pub fn solve_gap(t: f64, potential: &Potential, mu: f64, grid: &RadialGrid, opts: &GapOptions) -> Result<GapSolution> {
    GapProblem::new(potential, mu, grid)?.solve(t, opts)
}

fn phi(x: f64) -> f64 {
    let a = if x > 0.0 { x * x.ln() } else { 0.0 };
    let b = if x < 1.0 { (1.0 - x) * (1.0 - x).ln() } else { 0.0 };
    a + b
}

/// Entropy S = −½ Σ_j w_j Tr φ(Γ̂(p_j)), with the 2×2 eigenvalues ½ ± √((γ̂−½)² + α̂²).
pub fn ti_entropy(state: &TiState, grid: &RadialGrid) -> Result<f64> {
    grid.check_samples(&state.gamma)?;
    grid.check_samples(&state.alpha)?;
    let mut s = 0.0;
    for ((&g, &a), &w) in state.gamma.iter().zip(&state.alpha).zip(grid.weights()) {
        let r = (g - 0.5).hypot(a);
        let (lo, hi) = (0.5 - r, 0.5 + r);
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!("mode eigenvalues ({lo}, {hi}) leave [0, 1]")));
        }
        s -= 0.5 * w * (phi(lo.clamp(0.0, 1.0)) + phi(hi.clamp(0.0, 1.0)));
    }
    Ok(s)
}

fn position_grid(potential: &Potential) -> Result<RadialGrid> {
    let rmax = if potential.table.is_none() { 12.0 * potential.width } else { 30.0 };
    build_radial_grid(rmax, 256, QuadratureRule::default())
}

/// ∫ V(x)|α(x)|² dx with α(x) the inverse radial transform of α̂.
pub fn interaction_energy(potential: &Potential, alpha: &[f64], grid: &RadialGrid) -> Result<f64> {
    potential.check_dims(3)?;
    if potential.is_zero() {
        return Ok(0.0);
    }
    let rg = position_grid(potential)?;
    let ax = radial_transform(grid, alpha, rg.nodes())?;
    Ok(rg.nodes().iter().zip(rg.weights()).zip(ax).map(|((&r, &w), a)| w * potential.value(3, r) * a * a).sum())
}

/// F^ti = ∫ k γ̂ + ∫ V|α|² − T S.
pub fn ti_free_energy(state: &TiState, potential: &Potential, grid: &RadialGrid) -> Result<f64> {
    let entropy = ti_entropy(state, grid)?;
    let kinetic: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(&state.gamma)
        .map(|((&p, &w), &g)| w * dispersion(p, state.mu) * g)
        .sum();
    Ok(kinetic + interaction_energy(potential, &state.alpha, grid)? - state.t * entropy)
}

/// ‖α̂‖_{L²} = (Σ w α̂²)^{1/2}.
pub fn l2_norm(grid: &RadialGrid, values: &[f64]) -> f64 {
    grid.weights().iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

/// ‖p^m α̂‖_{L²} for m = 0..=max_m.
pub fn moment_norms(grid: &RadialGrid, alpha: &[f64], max_m: u32) -> Vec<f64> {
    (0..=max_m)
        .map(|m| {
            grid.nodes()
                .iter()
                .zip(grid.weights())
                .zip(alpha)
                .map(|((&p, &w), &a)| w * (p.powi(m as i32) * a).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Result of [`order_parameter_scaling`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterFit {
    pub exponent: f64,
    pub r2: f64,
    #[serde(rename = "Tc")]
    pub tc: f64,
    pub temperatures: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Fits log‖α₀‖ against log(Tc − T) over `temperatures`.
pub fn order_parameter_scaling(
    potential: &Potential,
    mu: f64,
    grid: &RadialGrid,
    temperatures: &[f64],
    opts: &GapOptions,
) -> Result<OrderParameterFit> {
    if temperatures.len() < 3 {
        return Err(invalid("the fit needs at least three temperatures"));
    }
    let problem = GapProblem::new(potential, mu, grid)?;
    let tc = match problem.tc_bracket() {
        Ok(b) => problem.critical_temperature(b, 1e-10)?,
        Err(Error::Bracket { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let mut norms = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let sol = problem.solve(t, &GapOptions { tc: Some(tc), ..opts.clone() })?;
        if !sol.converged {
            return Err(Error::NonConverged { iterations: sol.iterations, residual: sol.residual });
        }
        let st = state_from_delta(grid, &sol.delta, t, mu)?;
        norms.push(l2_norm(grid, &st.alpha));
    }
    if norms.contains(&0.0) || temperatures.iter().any(|&t| t >= tc) {
        return Err(Error::DegenerateFit("pair amplitude vanishes at some temperature (T ≥ Tc)".into()));
    }
    let gaps: Vec<f64> = temperatures.iter().map(|t| tc - t).collect();
    let (exponent, r2) = crate::bdg::scaling_fit(&gaps, &norms)?;
    Ok(OrderParameterFit { exponent, r2, tc, temperatures: temperatures.to_vec(), norms })
}
