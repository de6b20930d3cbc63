//! Scalar and vector grid fields.

use crate::grid::Grid;
use crate::spectral::{require_odd_odd, SpectralEngine, SpectralOp, Workspace};
use crate::{Error, Result};

/// A scalar field in the odd-odd class with dual physical/spectral
/// representation. When both are present they agree; the sine-sine spectrum
/// is the authoritative one during time stepping.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Option<Vec<f64>>,
    spectrum: Option<Vec<f64>>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n() * grid.n());
        ScalarField {
            grid,
            values: Some(values),
            spectrum: None,
        }
    }

    pub fn from_spectrum(grid: Grid, spectrum: Vec<f64>) -> Self {
        assert_eq!(spectrum.len(), grid.modes() * grid.modes());
        ScalarField {
            grid,
            values: None,
            spectrum: Some(spectrum),
        }
    }

    /// Builds a field carrying both representations. The caller asserts they
    /// agree (as produced by the transforms in this crate).
    pub fn from_parts(grid: Grid, values: Vec<f64>, spectrum: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n() * grid.n());
        assert_eq!(spectrum.len(), grid.modes() * grid.modes());
        ScalarField {
            grid,
            values: Some(values),
            spectrum: Some(spectrum),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn spectrum(&self) -> Option<&[f64]> {
        self.spectrum.as_deref()
    }

    /// Populates the spectrum from the values. The values must be odd-odd
    /// symmetric to the stated tolerance; the error reports the measured
    /// violation.
    pub fn to_spectral(&self, engine: &SpectralEngine) -> Result<ScalarField> {
        let values = self.values.as_ref().ok_or(Error::MissingValues)?;
        require_odd_odd(engine, values)?;
        let nh = self.grid.modes();
        let mut spectrum = vec![0.0; nh * nh];
        let mut ws = engine.workspace();
        engine.analyze(values, &mut spectrum, &mut ws);
        Ok(ScalarField {
            grid: self.grid,
            values: Some(values.clone()),
            spectrum: Some(spectrum),
        })
    }

    /// Populates the values from the spectrum.
    pub fn to_physical(&self, engine: &SpectralEngine) -> Result<ScalarField> {
        let spectrum = self.spectrum.as_ref().ok_or(Error::MissingSpectrum)?;
        let n = self.grid.n();
        let mut values = vec![0.0; n * n];
        let mut ws = engine.workspace();
        engine.synthesize(spectrum, SpectralOp::Value, &mut values, &mut ws);
        Ok(ScalarField {
            grid: self.grid,
            values: Some(values),
            spectrum: Some(spectrum.clone()),
        })
    }

    /// Ensures values are present, synthesizing them if needed.
    pub fn with_values(&self, engine: &SpectralEngine) -> Result<ScalarField> {
        if self.values.is_some() {
            Ok(self.clone())
        } else {
            self.to_physical(engine)
        }
    }

    /// Sup norm over grid nodes. Requires values.
    pub fn linf(&self) -> Result<f64> {
        let values = self.values.as_ref().ok_or(Error::MissingValues)?;
        Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// Discrete L2 norm `sqrt(h^2 sum v^2)`. Requires values.
    pub fn l2(&self) -> Result<f64> {
        let values = self.values.as_ref().ok_or(Error::MissingValues)?;
        let h = self.grid.h();
        Ok((h * h * values.iter().map(|v| v * v).sum::<f64>()).sqrt())
    }

    /// L2 norm computed from the spectrum via Parseval
    /// (`l2^2 = sum a_{jk}^2` in this basis normalization).
    pub fn l2_spectral(&self) -> Result<f64> {
        let spectrum = self.spectrum.as_ref().ok_or(Error::MissingSpectrum)?;
        Ok(spectrum.iter().map(|a| a * a).sum::<f64>().sqrt())
    }
}

/// A velocity-like pair of grid component fields.
///
/// When produced by [`crate::velocity::biot_savart`] from an odd-odd
/// vorticity, `u1` is odd in `x1`/even in `x2` and `u2` even in `x1`/odd in
/// `x2`, so `u1` vanishes on the axis `x1 = 0` and `u2` on `x2 = 0`.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, u1: Vec<f64>, u2: Vec<f64>) -> Self {
        assert_eq!(u1.len(), grid.n() * grid.n());
        assert_eq!(u2.len(), grid.n() * grid.n());
        VectorField { grid, u1, u2 }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Max pointwise speed `max sqrt(u1^2 + u2^2)` over nodes.
    pub fn linf(&self) -> f64 {
        self.u1
            .iter()
            .zip(self.u2.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Discrete L2 norm `sqrt(h^2 sum (u1^2 + u2^2))`.
    pub fn l2(&self) -> f64 {
        let h = self.grid.h();
        (h * h
            * self
                .u1
                .iter()
                .zip(self.u2.iter())
                .map(|(a, b)| a * a + b * b)
                .sum::<f64>())
        .sqrt()
    }
}

/// Samples a closed-form function at the grid nodes.
pub fn sample(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = grid.n();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        let x = grid.node(i);
        for m in 0..n {
            v[grid.idx(i, m)] = f(x, grid.node(m));
        }
    }
    v
}

/// Scratch holder so hot paths can reuse one workspace.
pub struct FieldOps {
    pub engine: SpectralEngine,
    pub ws: Workspace,
}

impl FieldOps {
    pub fn new(grid: Grid) -> Self {
        let engine = SpectralEngine::new(grid);
        let ws = engine.workspace();
        FieldOps { engine, ws }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linf_and_l2_of_basis_mode() {
        let grid = Grid::new(128).unwrap();
        let values = sample(grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let f = ScalarField::from_values(grid, values);
        // grid max is near (+-1/2, +-1/2), attained exactly at nodes
        assert!((f.linf().unwrap() - 1.0).abs() < 1e-4);
        // int_{-1}^{1} sin^2(pi x) dx = 1 per dimension, so l2 = 1
        assert!((f.l2().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_norms() {
        let grid = Grid::new(32).unwrap();
        let f = ScalarField::from_values(grid, vec![0.0; 32 * 32]);
        assert_eq!(f.linf().unwrap(), 0.0);
        assert_eq!(f.l2().unwrap(), 0.0);
    }

    #[test]
    fn parseval_identity() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let values = sample(grid, |x, y| {
            0.7 * (PI * x).sin() * (2.0 * PI * y).sin() - 1.3 * (5.0 * PI * x).sin() * (PI * y).sin()
        });
        let f = ScalarField::from_values(grid, values)
            .to_spectral(&engine)
            .unwrap();
        let grid_norm = f.l2().unwrap();
        let spec_norm = f.l2_spectral().unwrap();
        assert!(
            (grid_norm - spec_norm).abs() / grid_norm < 1e-12,
            "grid {grid_norm} vs spectral {spec_norm}"
        );
    }

    #[test]
    fn to_spectral_requires_values() {
        let grid = Grid::new(32).unwrap();
        let engine = SpectralEngine::new(grid);
        let f = ScalarField::from_spectrum(grid, vec![0.0; 16 * 16]);
        assert!(matches!(f.to_spectral(&engine), Err(Error::MissingValues)));
    }
}
