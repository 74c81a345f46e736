//! Radial momentum grids, radial Fourier transforms and the radial convolution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::{barycentric_eval, barycentric_weights, gauss_legendre};
use crate::error::{invalid, Error, Result};

/// (2π)^{-3/2}, the unitary Fourier prefactor in three dimensions.
pub const FT3: f64 = 0.063_493_635_934_240_97;

/// Quadrature rule used to build a [`RadialGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite Gauss–Legendre with equal panels of `panel_nodes` nodes each.
    GaussLegendre { panel_nodes: usize },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::GaussLegendre { panel_nodes: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Panels {
    count: usize,
    width: f64,
    reference: Vec<f64>,
    bary: Vec<f64>,
}

/// Radial momentum grid. `weights` integrate against d³p, i.e. include 4πp².
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    pmax: f64,
    panels: Option<Panels>,
}

/// Builds a composite Gauss–Legendre grid on [0, pmax].
pub fn build_radial_grid(pmax: f64, count: usize, rule: QuadratureRule) -> Result<RadialGrid> {
    if !(pmax > 0.0) || !pmax.is_finite() {
        return Err(invalid(format!("pmax must be positive, got {pmax}")));
    }
    if count < 8 {
        return Err(invalid(format!("count must be at least 8, got {count}")));
    }
    let QuadratureRule::GaussLegendre { panel_nodes } = rule;
    if panel_nodes == 0 || !count.is_multiple_of(panel_nodes) {
        return Err(invalid(format!("count {count} is not a multiple of the panel size {panel_nodes}")));
    }
    let (t, w) = gauss_legendre(panel_nodes);
    let npan = count / panel_nodes;
    let width = pmax / npan as f64;
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for m in 0..npan {
        let lo = width * m as f64;
        for (tj, wj) in t.iter().zip(&w) {
            let p = lo + 0.5 * width * (tj + 1.0);
            nodes.push(p);
            weights.push(4.0 * PI * p * p * 0.5 * width * wj);
        }
    }
    let bary = barycentric_weights(&t);
    Ok(RadialGrid {
        nodes,
        weights,
        pmax,
        panels: Some(Panels { count: npan, width, reference: t, bary }),
    })
}

impl RadialGrid {
    /// Grid from explicit nodes and d³p weights; such grids support quadrature but not interpolation.
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>, pmax: f64) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(invalid("nodes and weights must be nonempty and of equal length"));
        }
        if nodes.iter().any(|&p| !(p > 0.0)) || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("nodes must be positive and strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(invalid("weights must be positive"));
        }
        if *nodes.last().unwrap() > pmax {
            return Err(invalid("nodes exceed pmax"));
        }
        Ok(RadialGrid { nodes, weights, pmax, panels: None })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pmax(&self) -> f64 {
        self.pmax
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w_j f(p_j), approximating ∫ f(|p|) d³p.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    /// Σ w_j v_j for samples `values` on the nodes.
    pub fn integrate_samples(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Panel boundaries 0 = b_0 < ... < b_m = pmax, if the grid is composite.
    pub fn panel_edges(&self) -> Option<Vec<f64>> {
        self.panels
            .as_ref()
            .map(|pn| (0..=pn.count).map(|m| pn.width * m as f64).collect())
    }

    /// Piecewise-polynomial interpolation of nodal `values` at `p` ∈ [0, pmax].
    pub fn interpolate(&self, values: &[f64], p: f64) -> Result<f64> {
        self.check_samples(values)?;
        let pn = self
            .panels
            .as_ref()
            .ok_or_else(|| invalid("grid built from explicit nodes does not support interpolation"))?;
        if !(p >= 0.0) || p > self.pmax * (1.0 + 1e-12) {
            return Err(Error::Extrapolation { at: p, max: self.pmax });
        }
        let k = pn.reference.len();
        let m = ((p / pn.width) as usize).min(pn.count - 1);
        let t = 2.0 * (p - pn.width * m as f64) / pn.width - 1.0;
        Ok(barycentric_eval(&pn.reference, &pn.bary, &values[m * k..(m + 1) * k], t))
    }

    pub(crate) fn check_samples(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.nodes.len() {
            return Err(invalid(format!(
                "profile has {} samples but the grid has {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(())
    }
}

/// A real radial function of |p|.
pub trait RadialFunction {
    fn eval(&self, p: f64) -> f64;

    /// ∫_a^b s f(s) ds.
    fn shell_moment(&self, a: f64, b: f64) -> f64 {
        let rule = shell_rule();
        let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
        super::quadrature::integrate(|s| s * self.eval(s), a, b, panels, rule)
    }

    /// The grid this function is sampled on, if any.
    fn sampled_on(&self) -> Option<&RadialGrid> {
        None
    }
}

fn shell_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Nodal samples on a grid viewed as a function; zero beyond pmax.
#[derive(Debug, Clone, Copy)]
pub struct SampledProfile<'a> {
    pub grid: &'a RadialGrid,
    pub values: &'a [f64],
}

impl<'a> SampledProfile<'a> {
    pub fn new(grid: &'a RadialGrid, values: &'a [f64]) -> Result<Self> {
        grid.check_samples(values)?;
        if grid.panels.is_none() {
            return Err(invalid("sampled profiles need a composite grid"));
        }
        Ok(SampledProfile { grid, values })
    }

    /// Interpolated value; errors outside [0, pmax].
    pub fn at(&self, p: f64) -> Result<f64> {
        self.grid.interpolate(self.values, p)
    }
}

impl RadialFunction for SampledProfile<'_> {
    fn eval(&self, p: f64) -> f64 {
        if p > self.grid.pmax {
            0.0
        } else {
            self.grid.interpolate(self.values, p).unwrap_or(0.0)
        }
    }

    fn shell_moment(&self, a: f64, b: f64) -> f64 {
        let b = b.min(self.grid.pmax);
        if b <= a {
            return 0.0;
        }
        let rule = shell_rule();
        let edges = self.grid.panel_edges().unwrap_or_default();
        let mut cuts = vec![a];
        cuts.extend(edges.into_iter().filter(|&e| e > a && e < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| super::quadrature::integrate(|s| s * self.eval(s), w[0], w[1], 1, rule))
            .sum()
    }

    fn sampled_on(&self) -> Option<&RadialGrid> {
        Some(self.grid)
    }
}

/// sin(x)/x.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Unitary 3D Fourier transform of radial samples, evaluated at each of `points`.
/// The transform is its own inverse for radial functions.
pub fn radial_transform(grid: &RadialGrid, values: &[f64], points: &[f64]) -> Result<Vec<f64>> {
    grid.check_samples(values)?;
    Ok(points
        .iter()
        .map(|&r| {
            FT3 * grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .zip(values)
                .map(|((&p, &w), &v)| w * v * sinc(p * r))
                .sum::<f64>()
        })
        .collect())
}

/// The angular-averaged kernel A(p,q) = (2π/(pq)) ∫_{|p−q|}^{p+q} s f(s) ds, so that
/// (f ∗ g)(p) = ∫₀^∞ q² g(q) A(p,q) dq.
pub fn shell_kernel<F: RadialFunction + ?Sized>(f: &F, p: f64, q: f64) -> f64 {
    let pq = p * q;
    if pq <= 1e-300 {
        return 4.0 * PI * f.eval(p + q);
    }
    2.0 * PI / pq * f.shell_moment((p - q).abs(), p + q)
}

/// (2π)^{-3/2} (f ∗ g)(p) for radial `f` and nodal samples `g` on `grid`.
pub fn radial_convolution<F: RadialFunction + ?Sized>(grid: &RadialGrid, f: &F, g: &[f64], p: f64) -> Result<f64> {
    grid.check_samples(g)?;
    if let Some(other) = f.sampled_on() {
        if other != grid {
            return Err(invalid("profiles are sampled on different grids"));
        }
    }
    if !(p >= 0.0) || p > grid.pmax * (1.0 + 1e-12) {
        return Err(Error::Extrapolation { at: p, max: grid.pmax });
    }
    let sum: f64 = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .zip(g)
        .filter(|(_, &gj)| gj != 0.0)
        .map(|((&q, &w), &gj)| w / (4.0 * PI) * gj * shell_kernel(f, p, q))
        .sum();
    Ok(FT3 * sum)
}
