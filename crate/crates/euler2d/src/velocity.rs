//! Velocity recovery from vorticity and off-grid spectral evaluation.
//!
//! The solver's orientation convention follows the near-origin velocity
//! decomposition it diagnoses: `psi = (-Laplacian)^{-1} omega` and
//! `u = (-d2 psi, d1 psi)`. Under this convention `d2 u1 - d1 u2` recovers
//! `omega`, and a vorticity that is positive on the open first quadrant
//! drives material points toward the `x2`-axis (`u1 < 0`, `u2 > 0` there).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::spectral::{poisson_scale, SpectralEngine, SpectralOp, Workspace};
use crate::{Error, Result};

/// Inverts the Biot-Savart law spectrally: `a_{jk} -> a_{jk}/(pi^2 (j^2+k^2))`
/// gives the stream function, whose rotated gradient is the velocity.
pub fn biot_savart(omega: &ScalarField, engine: &SpectralEngine) -> Result<VectorField> {
    let spectrum = omega.spectrum().ok_or(Error::MissingSpectrum)?;
    let mut ws = engine.workspace();
    Ok(biot_savart_raw(spectrum, omega.grid(), engine, &mut ws))
}

/// Workspace-reusing variant used by the time stepper.
pub fn biot_savart_raw(
    spectrum: &[f64],
    grid: Grid,
    engine: &SpectralEngine,
    ws: &mut Workspace,
) -> VectorField {
    let nh = grid.modes();
    let mut psi = vec![0.0; nh * nh];
    poisson_scale(spectrum, grid, &mut psi);
    let n = grid.n();
    let mut u1 = vec![0.0; n * n];
    let mut u2 = vec![0.0; n * n];
    engine.synthesize2(&psi, SpectralOp::Dy, &psi, SpectralOp::Dx, &mut u1, &mut u2, ws);
    for v in u1.iter_mut() {
        *v = -*v;
    }
    VectorField::new(grid, u1, u2)
}

/// Spectral gradient `(d1 f, d2 f)` at the grid nodes.
pub fn gradient(f: &ScalarField, engine: &SpectralEngine) -> Result<VectorField> {
    let spectrum = f.spectrum().ok_or(Error::MissingSpectrum)?;
    let grid = f.grid();
    let n = grid.n();
    let mut ws = engine.workspace();
    let mut d1 = vec![0.0; n * n];
    let mut d2 = vec![0.0; n * n];
    engine.synthesize2(spectrum, SpectralOp::Dx, spectrum, SpectralOp::Dy, &mut d1, &mut d2, &mut ws);
    Ok(VectorField::new(grid, d1, d2))
}

/// Vorticity of a velocity field under this solver's orientation convention,
/// `d2 u1 - d1 u2`, computed with full-torus DFT derivatives so it stays
/// independent of the sine-sine machinery (`curl(biot_savart(w)) = w` for
/// resolved modes).
pub fn curl(u: &VectorField) -> ScalarField {
    let grid = u.grid();
    let d2u1 = full_dft_derivative(&u.u1, grid, false);
    let d1u2 = full_dft_derivative(&u.u2, grid, true);
    let w: Vec<f64> = d2u1
        .iter()
        .zip(d1u2.iter())
        .map(|(a, b)| a - b)
        .collect();
    ScalarField::from_values(grid, w)
}

/// Discrete spectral divergence of a velocity field (sup norm over nodes).
pub fn divergence_linf(u: &VectorField) -> f64 {
    let grid = u.grid();
    let d1u1 = full_dft_derivative(&u.u1, grid, true);
    let d2u2 = full_dft_derivative(&u.u2, grid, false);
    d1u1.iter()
        .zip(d2u2.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()))
}

/// Derivative of a general periodic grid function along one axis via the
/// full-torus DFT (wavenumbers `pi * p~` on the period-2 domain). Exact for
/// trigonometric data; used by independent cross-checks, not the hot path.
fn full_dft_derivative(values: &[f64], grid: Grid, in_x1: bool) -> Vec<f64> {
    let n = grid.n();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut scratch =
        vec![Complex::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    if in_x1 {
        transpose(&mut buf, n);
    }
    for row in buf.chunks_exact_mut(n) {
        fwd.process_with_scratch(row, &mut scratch);
        for (q, v) in row.iter_mut().enumerate() {
            let freq = if q < n / 2 {
                q as f64
            } else if q == n / 2 {
                0.0
            } else {
                q as f64 - n as f64
            };
            *v *= Complex::new(0.0, PI * freq);
        }
        inv.process_with_scratch(row, &mut scratch);
    }
    if in_x1 {
        transpose(&mut buf, n);
    }
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for m in (i + 1)..n {
            buf.swap(i * n + m, m * n + i);
        }
    }
}

/// Evaluates velocity (and optionally its gradient) off-grid by direct
/// summation of the stream-function sine series. Exact for resolved modes;
/// cost O((n/2)^2) per point.
pub struct VelocityEval<'a> {
    psi: &'a [f64],
    nh: usize,
}

impl<'a> VelocityEval<'a> {
    /// `psi` are stream-function sine coefficients (see [`poisson_scale`]).
    pub fn new(psi: &'a [f64], grid: Grid) -> Self {
        VelocityEval {
            psi,
            nh: grid.modes(),
        }
    }

    fn tables(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let mut s = Vec::with_capacity(self.nh);
        let mut c = Vec::with_capacity(self.nh);
        for j in 1..=self.nh {
            let (sj, cj) = (j as f64 * PI * x).sin_cos();
            s.push(sj);
            c.push(cj);
        }
        (s, c)
    }

    /// Velocity `(u1, u2)` at an arbitrary point.
    pub fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        let (sx, cx) = self.tables(p[0]);
        let (sy, cy) = self.tables(p[1]);
        let nh = self.nh;
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        for j in 1..=nh {
            let row = &self.psi[(j - 1) * nh..j * nh];
            let mut acc_kc = 0.0; // sum_k psi * k * cos(k pi y)
            let mut acc_s = 0.0; // sum_k psi * sin(k pi y)
            for k in 1..=nh {
                let a = row[k - 1];
                acc_kc += a * k as f64 * cy[k - 1];
                acc_s += a * sy[k - 1];
            }
            u1 -= PI * sx[j - 1] * acc_kc;
            u2 += PI * j as f64 * cx[j - 1] * acc_s;
        }
        [u1, u2]
    }

    /// Velocity and velocity-gradient matrix `G[i][j] = d u_i / d x_j` at an
    /// arbitrary point. The matrix is trace-free by incompressibility.
    pub fn velocity_and_gradient(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (sx, cx) = self.tables(p[0]);
        let (sy, cy) = self.tables(p[1]);
        let nh = self.nh;
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        let mut g11 = 0.0; // d1 u1
        let mut g12 = 0.0; // d2 u1
        let mut g21 = 0.0; // d1 u2
        for j in 1..=nh {
            let row = &self.psi[(j - 1) * nh..j * nh];
            let jf = j as f64;
            let mut acc_kc = 0.0;
            let mut acc_s = 0.0;
            let mut acc_k2s = 0.0;
            for k in 1..=nh {
                let a = row[k - 1];
                let kf = k as f64;
                acc_kc += a * kf * cy[k - 1];
                acc_s += a * sy[k - 1];
                acc_k2s += a * kf * kf * sy[k - 1];
            }
            u1 -= PI * sx[j - 1] * acc_kc;
            u2 += PI * jf * cx[j - 1] * acc_s;
            g11 -= PI * PI * jf * cx[j - 1] * acc_kc;
            g12 += PI * PI * sx[j - 1] * acc_k2s;
            g21 -= PI * PI * jf * jf * sx[j - 1] * acc_s;
        }
        ([u1, u2], [[g11, g12], [g21, -g11]])
    }
}

/// Off-grid velocity from a vorticity field (requires the spectrum).
pub fn velocity_at(omega: &ScalarField, point: [f64; 2]) -> Result<[f64; 2]> {
    let spectrum = omega.spectrum().ok_or(Error::MissingSpectrum)?;
    let grid = omega.grid();
    let nh = grid.modes();
    let mut psi = vec![0.0; nh * nh];
    poisson_scale(spectrum, grid, &mut psi);
    Ok(VelocityEval::new(&psi, grid).velocity(point))
}

/// Max over nodes of the spectral (l2 operator) norm of the velocity-gradient
/// matrix, plus the max speed, from one stream function. Used by the stepper
/// for the CFL bound, the blow-up guard and the Gronwall accumulator.
pub fn speed_and_grad_linf(
    spectrum: &[f64],
    grid: Grid,
    engine: &SpectralEngine,
    ws: &mut Workspace,
) -> (f64, f64) {
    let nh = grid.modes();
    let mut psi = vec![0.0; nh * nh];
    poisson_scale(spectrum, grid, &mut psi);
    let n = grid.n();
    let n2 = n * n;
    let mut u1 = vec![0.0; n2];
    let mut u2 = vec![0.0; n2];
    engine.synthesize2(&psi, SpectralOp::Dy, &psi, SpectralOp::Dx, &mut u1, &mut u2, ws);
    let mut speed: f64 = 0.0;
    for i in 0..n2 {
        speed = speed.max(u1[i].hypot(u2[i]));
    }
    // velocity gradient: [du1/dx du1/dy; du2/dx du2/dy]
    //   = [-psi_xy, -psi_yy; psi_xx, psi_xy]
    let mut pxy = vec![0.0; n2];
    let mut pyy = vec![0.0; n2];
    let mut pxx = vec![0.0; n2];
    engine.synthesize2(&psi, SpectralOp::Dxy, &psi, SpectralOp::Dyy, &mut pxy, &mut pyy, ws);
    engine.synthesize(&psi, SpectralOp::Dxx, &mut pxx, ws);
    let mut grad: f64 = 0.0;
    for i in 0..n2 {
        let a = -pxy[i]; // g11 = -g22
        let b = -pyy[i]; // g12
        let c = pxx[i]; // g21
        grad = grad.max(spectral_norm_tracefree(a, b, c));
    }
    (speed, grad)
}

/// l2 operator norm of the trace-free matrix [[a, b], [c, -a]].
#[inline]
pub fn spectral_norm_tracefree(a: f64, b: f64, c: f64) -> f64 {
    // singular values of M: sqrt of eigenvalues of M^T M
    let f = 2.0 * a * a + b * b + c * c; // Frobenius^2
    let det = -(a * a) - b * c; // det M
    let disc = (f * f - 4.0 * det * det).max(0.0).sqrt();
    ((f + disc) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample;
    use crate::spectral::SpectralEngine;

    fn eigenfunction_field(grid: Grid, engine: &SpectralEngine) -> ScalarField {
        let values = sample(grid, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        ScalarField::from_values(grid, values)
            .to_spectral(engine)
            .unwrap()
    }

    #[test]
    fn eigenfunction_velocity_closed_form() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let omega = eigenfunction_field(grid, &engine);
        let u = biot_savart(&omega, &engine).unwrap();
        let n = grid.n();
        for i in (0..n).step_by(5) {
            for m in (0..n).step_by(9) {
                let (x, y) = (grid.node(i), grid.node(m));
                let e1 = -PI * (PI * x).sin() * (PI * y).cos();
                let e2 = PI * (PI * x).cos() * (PI * y).sin();
                assert!((u.u1[i * n + m] - e1).abs() < 1e-11);
                assert!((u.u2[i * n + m] - e2).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn zero_vorticity_zero_velocity() {
        let grid = Grid::new(32).unwrap();
        let engine = SpectralEngine::new(grid);
        let omega = ScalarField::from_spectrum(grid, vec![0.0; 16 * 16]);
        let u = biot_savart(&omega, &engine).unwrap();
        assert_eq!(u.linf(), 0.0);
    }

    fn random_spectrum(grid: Grid, seed: u64) -> Vec<f64> {
        let nh = grid.modes();
        let mut a = vec![0.0; nh * nh];
        let mut state = seed;
        for j in 1..nh {
            for k in 1..nh {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let r = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[(j - 1) * nh + (k - 1)] = r / ((j * j + k * k) as f64);
            }
        }
        a
    }

    #[test]
    fn curl_round_trip_recovers_vorticity() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let a = random_spectrum(grid, 7);
        let omega = ScalarField::from_spectrum(grid, a)
            .to_physical(&engine)
            .unwrap();
        let u = biot_savart(&omega, &engine).unwrap();
        let w2 = curl(&u);
        let wv = omega.values().unwrap();
        let cv = w2.values().unwrap();
        let linf = omega.linf().unwrap();
        let err = wv
            .iter()
            .zip(cv.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err / linf < 1e-10, "curl round trip rel err {}", err / linf);
    }

    #[test]
    fn biot_savart_divergence_free() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let a = random_spectrum(grid, 99);
        let omega = ScalarField::from_spectrum(grid, a);
        let u = biot_savart(&omega, &engine).unwrap();
        assert!(divergence_linf(&u) < 1e-10);
    }

    #[test]
    fn velocity_symmetry_class_on_axes() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let a = random_spectrum(grid, 1234);
        let omega = ScalarField::from_spectrum(grid, a);
        let u = biot_savart(&omega, &engine).unwrap();
        let n = grid.n();
        let i0 = n / 2; // x = 0 node
        for m in 0..n {
            assert!(u.u1[i0 * n + m].abs() < 1e-12, "u1 on x1=0 axis");
            assert!(u.u2[m * n + i0].abs() < 1e-12, "u2 on x2=0 axis");
        }
        // odd/even component symmetry: u1(-x1, x2) = -u1(x1, x2),
        // u1(x1, -x2) = u1(x1, x2); mirrored for u2
        for i in 1..n {
            for m in (1..n).step_by(7) {
                let (ir, mr) = (n - i, n - m);
                assert!((u.u1[i * n + m] + u.u1[ir * n + m]).abs() < 1e-12);
                assert!((u.u1[i * n + m] - u.u1[i * n + mr]).abs() < 1e-12);
                assert!((u.u2[i * n + m] - u.u2[ir * n + m]).abs() < 1e-12);
                assert!((u.u2[i * n + m] + u.u2[i * n + mr]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn off_grid_velocity_matches_grid_at_nodes() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let a = random_spectrum(grid, 5);
        let omega = ScalarField::from_spectrum(grid, a);
        let u = biot_savart(&omega, &engine).unwrap();
        let n = grid.n();
        for &(i, m) in &[(3usize, 40usize), (17, 9), (32, 32), (50, 21)] {
            let p = [grid.node(i), grid.node(m)];
            let v = velocity_at(&omega, p).unwrap();
            assert!((v[0] - u.u1[i * n + m]).abs() < 1e-12);
            assert!((v[1] - u.u2[i * n + m]).abs() < 1e-12);
        }
    }

    #[test]
    fn off_grid_velocity_at_origin_and_closed_form() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let omega = eigenfunction_field(grid, &engine);
        let v = velocity_at(&omega, [0.0, 0.0]).unwrap();
        assert!(v[0].abs() < 1e-13 && v[1].abs() < 1e-13);
        let v = velocity_at(&omega, [0.25, 0.25]).unwrap();
        assert!((v[0] + PI / 2.0).abs() < 1e-10, "u1 = {}", v[0]);
        assert!((v[1] - PI / 2.0).abs() < 1e-10, "u2 = {}", v[1]);
    }

    #[test]
    fn off_grid_gradient_matches_finite_difference() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let a = random_spectrum(grid, 2024);
        let omega = ScalarField::from_spectrum(grid, a);
        let spectrum = omega.spectrum().unwrap();
        let nh = grid.modes();
        let mut psi = vec![0.0; nh * nh];
        poisson_scale(spectrum, grid, &mut psi);
        let ev = VelocityEval::new(&psi, grid);
        let p = [0.31, -0.12];
        let (_, g) = ev.velocity_and_gradient(p);
        let eps = 1e-6;
        for col in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[col] += eps;
            pm[col] -= eps;
            let up = ev.velocity(pp);
            let um = ev.velocity(pm);
            for row in 0..2 {
                let fd = (up[row] - um[row]) / (2.0 * eps);
                assert!(
                    (g[row][col] - fd).abs() < 1e-7,
                    "g[{row}][{col}] = {} vs fd {}",
                    g[row][col],
                    fd
                );
            }
        }
    }

    #[test]
    fn operator_norm_tracefree() {
        // diag(a, -a): norm |a|
        assert!((spectral_norm_tracefree(3.0, 0.0, 0.0) - 3.0).abs() < 1e-14);
        // pure shear [[0, b], [0, 0]]: norm |b|
        assert!((spectral_norm_tracefree(0.0, 2.0, 0.0) - 2.0).abs() < 1e-14);
        // rotation-like [[0, 1], [-1, 0]]: norm 1
        assert!((spectral_norm_tracefree(0.0, 1.0, -1.0) - 1.0).abs() < 1e-14);
    }
}
