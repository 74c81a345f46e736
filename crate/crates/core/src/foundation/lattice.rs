//! Periodic box lattices and their discrete Fourier conventions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A periodic box [−L/2, L/2)^dims with n points per dimension, carrying the scale ratio h.
///
/// Positions are centered, x_j = (j − n/2)·L/n. Momenta are 2π/L·s with s ∈ [−n/2, n/2);
/// the Nyquist mode s = −n/2 is its own negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub dims: usize,
    pub h: f64,
}

impl BoxGrid {
    pub fn new(length: f64, n: usize, dims: usize, h: f64) -> Result<Self> {
        BoxGrid { length, n, dims, h }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(invalid(format!("box length must be positive, got {}", self.length)));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(invalid(format!("points per dimension must be even and ≥ 2, got {}", self.n)));
        }
        if !(1..=3).contains(&self.dims) {
            return Err(invalid(format!("dims must be 1, 2 or 3, got {}", self.dims)));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid(format!("h must be positive, got {}", self.h)));
        }
        Ok(self)
    }

    pub fn with_h(self, h: f64) -> Result<Self> {
        BoxGrid { h, ..self }.validated()
    }

    /// Number of lattice sites M = n^dims.
    pub fn size(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dims as i32)
    }

    /// Spacing of the dual lattice.
    pub fn dual_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Largest |p| on the momentum lattice.
    pub fn max_momentum(&self) -> f64 {
        (self.dims as f64).sqrt() * self.nyquist()
    }

    /// Row-major multi-index of a flat site index; unused axes are 0.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rem = idx;
        for a in (0..self.dims).rev() {
            c[a] = rem % self.n;
            rem /= self.n;
        }
        c
    }

    pub fn flat(&self, c: [usize; 3]) -> usize {
        (0..self.dims).fold(0, |acc, a| acc * self.n + c[a] % self.n)
    }

    /// Signed frequency of lattice index i along one axis.
    pub fn signed(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let dx = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dims {
            x[a] = (c[a] as f64 - (self.n / 2) as f64) * dx;
        }
        x
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let dk = self.dual_spacing();
        let mut p = [0.0; 3];
        for a in 0..self.dims {
            p[a] = self.signed(c[a]) as f64 * dk;
        }
        p
    }

    pub fn momentum_norm(&self, idx: usize) -> f64 {
        norm(self.momentum(idx))
    }

    pub fn position_norm(&self, idx: usize) -> f64 {
        norm(self.position(idx))
    }

    /// Index of −p (mod n).
    pub fn neg(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        let mut d = [0; 3];
        for a in 0..self.dims {
            d[a] = (self.n - c[a]) % self.n;
        }
        self.flat(d)
    }

    /// Index of p + q (mod n).
    pub fn add(&self, a: usize, b: usize) -> usize {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let mut d = [0; 3];
        for ax in 0..self.dims {
            d[ax] = (ca[ax] + cb[ax]) % self.n;
        }
        self.flat(d)
    }

    /// Whether momentum `idx` has a Nyquist component along `axis`.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        self.coords(idx)[axis] == self.n / 2
    }

    /// Unitary DFT matrix F with F[x, p] = e^{ip·x}/√M.
    pub fn dft_matrix(&self) -> DMatrix<Complex64> {
        let m = self.size();
        let scale = 1.0 / (m as f64).sqrt();
        let xs: Vec<[f64; 3]> = (0..m).map(|i| self.position(i)).collect();
        let ps: Vec<[f64; 3]> = (0..m).map(|i| self.momentum(i)).collect();
        DMatrix::from_fn(m, m, |x, p| {
            let phase: f64 = (0..self.dims).map(|a| xs[x][a] * ps[p][a]).sum();
            Complex64::from_polar(scale, phase)
        })
    }

    /// Minimal-image separation |x − y| on the periodic box.
    pub fn periodic_distance(&self, a: usize, b: usize) -> f64 {
        let xa = self.position(a);
        let xb = self.position(b);
        let l = self.length;
        let mut s = 0.0;
        for ax in 0..self.dims {
            let mut d = xa[ax] - xb[ax];
            d -= l * (d / l).round();
            s += d * d;
        }
        s.sqrt()
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
