//! Grids, quadrature, Fourier conventions and model potentials.

mod lattice;
mod potential;
pub mod quadrature;
mod radial;

pub use lattice::BoxGrid;
pub(crate) use lattice::norm;

pub use potential::{gaussian_potential, table_potential, FourierTable, Potential, PotentialKind};
pub use radial::{
    build_radial_grid, radial_convolution, radial_transform, shell_kernel, sinc, QuadratureRule, RadialFunction,
    RadialGrid, SampledProfile, FT3,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Serialized description of a potential together with its radial and box grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: PotentialKind,
    pub depth: f64,
    pub width: f64,
    pub pmax: f64,
    pub count: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub dims: usize,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<FourierTable>,
}

impl ModelSpec {
    pub fn potential(&self) -> Result<Potential> {
        Potential { kind: self.kind, depth: self.depth, width: self.width, table: self.table.clone() }.validated()
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        build_radial_grid(self.pmax, self.count, QuadratureRule::default())
    }

    pub fn box_grid(&self) -> Result<BoxGrid> {
        BoxGrid::new(self.length, self.n, self.dims, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_round_trip() {
        let json = r#"{"kind":"gaussian-well","depth":-5.0,"width":1.0,"pmax":10.0,"count":256,"L":8.0,"n":8,"dims":3,"h":0.2}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.potential().unwrap(), gaussian_potential(-5.0, 1.0).unwrap());
        assert_eq!(spec.radial_grid().unwrap().len(), 256);
        assert_eq!(spec.box_grid().unwrap().size(), 512);
        let again: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        assert!(serde_json::from_str::<ModelSpec>(&json.replace("\"h\"", "\"hh\"")).is_err());
    }
}
