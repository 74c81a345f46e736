//! Radial model potentials with analytic or tabulated Fourier profiles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, integrate};
use super::radial::RadialFunction;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    GaussianWell,
    UserTable,
}

/// Tabulated radial Fourier profile V̂(p) in `dims` dimensions, linear between samples, zero beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    pub dims: usize,
    pub momenta: Vec<f64>,
    pub values: Vec<f64>,
}

/// An even potential V(x) = V(|x|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub depth: f64,
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<FourierTable>,
}

/// V(x) = depth · exp(−x²/(2 width²)).
pub fn gaussian_potential(depth: f64, width: f64) -> Result<Potential> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(invalid(format!("width must be positive, got {width}")));
    }
    if !depth.is_finite() {
        return Err(invalid("depth must be finite"));
    }
    Ok(Potential { kind: PotentialKind::GaussianWell, depth, width, table: None })
}

/// Potential given by its tabulated Fourier profile.
pub fn table_potential(table: FourierTable) -> Result<Potential> {
    if table.dims != 1 && table.dims != 3 {
        return Err(invalid("tabulated potentials are supported in 1 or 3 dimensions"));
    }
    if table.momenta.len() < 2 || table.momenta.len() != table.values.len() {
        return Err(invalid("table needs at least two (momentum, value) pairs of equal length"));
    }
    if table.momenta[0] != 0.0 || table.momenta.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("table momenta must start at 0 and increase strictly"));
    }
    if table.values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("table values must be finite"));
    }
    Ok(Potential { kind: PotentialKind::UserTable, depth: 0.0, width: 0.0, table: Some(table) })
}

impl Potential {
    /// Re-validates a deserialized potential.
    pub fn validated(self) -> Result<Self> {
        match self.kind {
            PotentialKind::GaussianWell => gaussian_potential(self.depth, self.width),
            PotentialKind::UserTable => {
                table_potential(self.table.ok_or_else(|| invalid("user-table potential needs a table"))?)
            }
        }
    }

    pub fn zero() -> Self {
        Potential { kind: PotentialKind::GaussianWell, depth: 0.0, width: 1.0, table: None }
    }

    pub fn is_zero(&self) -> bool {
        match &self.table {
            Some(t) => t.values.iter().all(|&v| v == 0.0),
            None => self.depth == 0.0,
        }
    }

    /// Errors unless the Fourier profile is available in `dims` dimensions.
    pub fn check_dims(&self, dims: usize) -> Result<()> {
        if !(1..=3).contains(&dims) {
            return Err(invalid(format!("dims must be 1, 2 or 3, got {dims}")));
        }
        match &self.table {
            Some(t) if t.dims != dims => Err(invalid(format!(
                "tabulated potential is {}-dimensional, requested {dims}",
                t.dims
            ))),
            _ => Ok(()),
        }
    }

    /// Unitary Fourier transform in three dimensions.
    pub fn fourier(&self, p: f64) -> f64 {
        self.fourier_nd(3, p)
    }

    /// Unitary Fourier transform (2π)^{-d/2}∫V e^{-ipx} dx in `dims` dimensions.
    pub fn fourier_nd(&self, dims: usize, p: f64) -> f64 {
        match &self.table {
            Some(t) => table_lookup(t, p.abs()),
            None => {
                let w = self.width;
                self.depth * w.powi(dims as i32) * (-0.5 * w * w * p * p).exp()
            }
        }
    }

    /// V(r) for |x| = r in `dims` dimensions.
    pub fn value(&self, _dims: usize, r: f64) -> f64 {
        match &self.table {
            None => self.depth * (-0.5 * r * r / (self.width * self.width)).exp(),
            Some(t) => table_inverse(t, r),
        }
    }

    /// ∫_{ℝ³} |V|^q dx.
    pub fn lp_integral(&self, q: f64) -> Result<f64> {
        match self.table {
            None => Ok(self.depth.abs().powf(q) * (2.0 * PI * self.width * self.width / q).powf(1.5)),
            Some(_) => Err(invalid("Lᵖ integrals are only available in closed form for Gaussian wells")),
        }
    }
}

fn table_lookup(t: &FourierTable, p: f64) -> f64 {
    let m = &t.momenta;
    if p >= *m.last().unwrap() {
        return 0.0;
    }
    let i = m.partition_point(|&x| x <= p) - 1;
    let s = (p - m[i]) / (m[i + 1] - m[i]);
    t.values[i] * (1.0 - s) + t.values[i + 1] * s
}

fn table_inverse(t: &FourierTable, r: f64) -> f64 {
    let rule = gauss_legendre(8);
    let f = |p: f64| -> f64 {
        let v = table_lookup(t, p);
        match t.dims {
            1 => v * (p * r).cos(),
            _ => 4.0 * PI * p * p * v * super::radial::sinc(p * r),
        }
    };
    let total: f64 = t.momenta.windows(2).map(|w| integrate(f, w[0], w[1], 1, &rule)).sum();
    match t.dims {
        1 => 2.0 * total / (2.0 * PI).sqrt(),
        _ => total * super::radial::FT3,
    }
}

impl RadialFunction for Potential {
    fn eval(&self, p: f64) -> f64 {
        self.fourier(p)
    }

    fn shell_moment(&self, a: f64, b: f64) -> f64 {
        match self.table {
            None => {
                let w = self.width;
                let ea = (-0.5 * w * w * a * a).exp();
                // e^{-w²a²/2} − e^{-w²b²/2} without cancellation.
                self.depth * w * ea * -(-0.5 * w * w * (b - a) * (b + a)).exp_m1()
            }
            Some(_) => {
                let rule = gauss_legendre(16);
                let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
                integrate(|s| s * self.eval(s), a, b, panels, &rule)
            }
        }
    }
}
