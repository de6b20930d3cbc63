//! Sine-sine spectral engine.
//!
//! Fields live in the odd-odd symmetry class on the torus `[-1,1]^2` and are
//! represented by coefficients `a_{jk}` of `sin(j pi x1) sin(k pi x2)` with
//! `1 <= j,k <= n/2` (wavenumbers are `j pi` because the period is 2). The
//! coefficient array is stored row-major, j-major, with unit-amplitude basis
//! functions so that Parseval reads `l2(f)^2 = sum a_{jk}^2` exactly.
//!
//! Transforms go through a full complex 2D FFT of the odd-periodic extension.
//! At the grid nodes `x_i = -1 + 2i/n` one has
//! `sin(j pi x_i) = (-1)^j sin(2 pi i j / n)`, so the sine coefficients sit in
//! four entries of the DFT with alternating signs. The Nyquist sine mode
//! `j = n/2` vanishes at every node and is kept structurally zero.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::grid::Grid;
use crate::{Error, Result};

/// Spectral multiplier applied during synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralOp {
    /// Plain reconstruction of the field values.
    Value,
    /// d/dx1 (sine -> cosine in x1).
    Dx,
    /// d/dx2.
    Dy,
    /// d2/dx1^2.
    Dxx,
    /// d2/dx2^2.
    Dyy,
    /// d2/dx1 dx2.
    Dxy,
}

/// Scratch buffers for the 2D FFT passes; confine one workspace to one
/// execution context.
pub struct Workspace {
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

/// FFT plans and mode bookkeeping for one grid size.
pub struct SpectralEngine {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralEngine {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        SpectralEngine { grid, fwd, inv }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.grid.n();
        let scratch = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex::new(0.0, 0.0); n * n],
            scratch: vec![Complex::new(0.0, 0.0); scratch],
        }
    }

    fn fft2(&self, plan: &Arc<dyn Fft<f64>>, ws: &mut Workspace) {
        let n = self.grid.n();
        for row in ws.buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut ws.scratch);
        }
        transpose_square(&mut ws.buf, n);
        for row in ws.buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut ws.scratch);
        }
        transpose_square(&mut ws.buf, n);
    }

    /// Projects grid values onto the sine-sine basis.
    ///
    /// This is a pure projection: any even-symmetric component of `values`
    /// (e.g. rounding noise from earlier syntheses) is annihilated.
    pub fn analyze(&self, values: &[f64], spectrum: &mut [f64], ws: &mut Workspace) {
        let n = self.grid.n();
        let nh = self.grid.modes();
        debug_assert_eq!(values.len(), n * n);
        debug_assert_eq!(spectrum.len(), nh * nh);
        for (b, &v) in ws.buf.iter_mut().zip(values.iter()) {
            *b = Complex::new(v, 0.0);
        }
        self.fft2(&self.fwd, ws);
        let scale = -4.0 / (n as f64 * n as f64);
        spectrum.fill(0.0);
        for j in 1..nh {
            let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..nh {
                let parity = if k % 2 == 0 { sj } else { -sj };
                spectrum[(j - 1) * nh + (k - 1)] = scale * parity * ws.buf[j * n + k].re;
            }
        }
    }

    fn scatter(&self, spectrum: &[f64], op: SpectralOp, as_imag: bool, ws: &mut Workspace) {
        let n = self.grid.n();
        let nh = self.grid.modes();
        for j in 1..nh {
            let kappa_x = PI * j as f64;
            let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..nh {
                let amp = spectrum[(j - 1) * nh + (k - 1)];
                if amp == 0.0 {
                    continue;
                }
                let kappa_y = PI * k as f64;
                let parity = if k % 2 == 0 { sj } else { -sj };
                // F~[j][k] entry of the normalized DFT for a unit sine mode.
                let base = -0.25 * parity * amp;
                // Sign patterns over the four conjugate slots
                // (j,k), (n-j,k), (j,n-k), (n-j,n-k).
                let (mag, imag, s1, s2, s3, s4) = match op {
                    SpectralOp::Value => (base, false, 1.0, -1.0, -1.0, 1.0),
                    SpectralOp::Dx => (kappa_x * base, true, 1.0, 1.0, -1.0, -1.0),
                    SpectralOp::Dy => (kappa_y * base, true, 1.0, -1.0, 1.0, -1.0),
                    SpectralOp::Dxx => (-kappa_x * kappa_x * base, false, 1.0, -1.0, -1.0, 1.0),
                    SpectralOp::Dyy => (-kappa_y * kappa_y * base, false, 1.0, -1.0, -1.0, 1.0),
                    SpectralOp::Dxy => (-kappa_x * kappa_y * base, false, 1.0, 1.0, 1.0, 1.0),
                };
                let idx = [
                    j * n + k,
                    (n - j) * n + k,
                    j * n + (n - k),
                    (n - j) * n + (n - k),
                ];
                let signs = [s1, s2, s3, s4];
                for (&slot, &s) in idx.iter().zip(signs.iter()) {
                    // entry = (i if imag)*s*mag, multiplied by i when the
                    // field is packed on the imaginary lane
                    if imag != as_imag {
                        ws.buf[slot].im += s * mag;
                    } else if imag {
                        ws.buf[slot].re -= s * mag;
                    } else {
                        ws.buf[slot].re += s * mag;
                    }
                }
            }
        }
    }

    /// Synthesizes one real field `op(f)` at the grid nodes.
    pub fn synthesize(&self, spectrum: &[f64], op: SpectralOp, out: &mut [f64], ws: &mut Workspace) {
        ws.buf.fill(Complex::new(0.0, 0.0));
        self.scatter(spectrum, op, false, ws);
        self.fft2(&self.inv, ws);
        for (o, b) in out.iter_mut().zip(ws.buf.iter()) {
            *o = b.re;
        }
    }

    /// Synthesizes two real fields with a single inverse transform, reading
    /// the first from the real lane and the second from the imaginary lane.
    #[allow(clippy::too_many_arguments)]
    pub fn synthesize2(
        &self,
        spec_a: &[f64],
        op_a: SpectralOp,
        spec_b: &[f64],
        op_b: SpectralOp,
        out_a: &mut [f64],
        out_b: &mut [f64],
        ws: &mut Workspace,
    ) {
        ws.buf.fill(Complex::new(0.0, 0.0));
        self.scatter(spec_a, op_a, false, ws);
        self.scatter(spec_b, op_b, true, ws);
        self.fft2(&self.inv, ws);
        for ((a, b), c) in out_a.iter_mut().zip(out_b.iter_mut()).zip(ws.buf.iter()) {
            *a = c.re;
            *b = c.im;
        }
    }

    /// Measures the odd-odd symmetry residual of grid values (sup norm of
    /// `f(x) + f(-x1, x2)` and `f(x) + f(x1, -x2)` over nodes).
    pub fn oddness_residual(&self, values: &[f64]) -> f64 {
        let n = self.grid.n();
        let mut res: f64 = 0.0;
        for i in 0..n {
            let ir = (n - i) % n;
            for m in 0..n {
                let mr = (n - m) % n;
                let v = values[i * n + m];
                res = res.max((v + values[ir * n + m]).abs());
                res = res.max((v + values[i * n + mr]).abs());
            }
        }
        res
    }
}

/// Zeroes modes with `j > n/3` or `k > n/3` (2/3-rule truncation for the
/// quadratic nonlinearity).
pub fn dealias(spectrum: &mut [f64], grid: Grid) {
    let nh = grid.modes();
    let cut = grid.n() / 3;
    for j in 1..=nh {
        for k in 1..=nh {
            if j > cut || k > cut {
                spectrum[(j - 1) * nh + (k - 1)] = 0.0;
            }
        }
    }
}

/// Number of modes that survive [`dealias`] per dimension.
pub fn dealias_cutoff(grid: Grid) -> usize {
    grid.n() / 3
}

/// Optional exponential high-mode filter: multiplies `a_{jk}` by
/// `exp(-36 ((j/c)^36 + (k/c)^36))` with `c = n/3`. Off by default in the
/// time stepper; it damps the retained band's top octave and departs from
/// inviscid dynamics.
pub fn exponential_filter(spectrum: &mut [f64], grid: Grid) {
    let nh = grid.modes();
    let cut = dealias_cutoff(grid) as f64;
    for j in 1..=nh {
        for k in 1..=nh {
            let rj = (j as f64 / cut).powi(36);
            let rk = (k as f64 / cut).powi(36);
            spectrum[(j - 1) * nh + (k - 1)] *= (-36.0 * (rj + rk)).exp();
        }
    }
}

/// Scales vorticity coefficients into stream-function coefficients:
/// `psi_{jk} = a_{jk} / (pi^2 (j^2 + k^2))`, the inverse of `-Laplacian`.
pub fn poisson_scale(spectrum: &[f64], grid: Grid, out: &mut [f64]) {
    let nh = grid.modes();
    for j in 1..=nh {
        for k in 1..=nh {
            let lam = PI * PI * (j * j + k * k) as f64;
            out[(j - 1) * nh + (k - 1)] = spectrum[(j - 1) * nh + (k - 1)] / lam;
        }
    }
}

/// Fraction of spectral energy (`sum a^2`) carried by modes in the upper half
/// of the retained band (`max(j,k) > cutoff/2`). A resolution monitor: large
/// values mean the cascade is hitting the grid scale.
pub fn tail_energy_fraction(spectrum: &[f64], grid: Grid) -> f64 {
    let nh = grid.modes();
    let half = dealias_cutoff(grid) / 2;
    let mut total = 0.0;
    let mut tail = 0.0;
    for j in 1..=nh {
        for k in 1..=nh {
            let a = spectrum[(j - 1) * nh + (k - 1)];
            let e = a * a;
            total += e;
            if j.max(k) > half {
                tail += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for m in (i + 1)..n {
            buf.swap(i * n + m, m * n + i);
        }
    }
}

/// Checks the `to_spectral` symmetry precondition and returns the residual.
pub fn require_odd_odd(engine: &SpectralEngine, values: &[f64]) -> Result<f64> {
    let res = engine.oddness_residual(values);
    let linf = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-10 * linf.max(1.0);
    if res > tolerance {
        Err(Error::SymmetryViolation {
            residual: res,
            tolerance,
        })
    } else {
        Ok(res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = grid.n();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for m in 0..n {
                v[i * n + m] = f(grid.node(i), grid.node(m));
            }
        }
        v
    }

    #[test]
    fn basis_function_transforms_to_unit_coefficient() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let values = sample(grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let nh = grid.modes();
        let mut a = vec![0.0; nh * nh];
        engine.analyze(&values, &mut a, &mut ws);
        assert!((a[0] - 1.0).abs() < 1e-12, "a_11 = {}", a[0]);
        let off: f64 = a
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert!(off < 1e-12, "off-mode leakage {off}");
    }

    #[test]
    fn linear_combination_of_modes() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let values = sample(grid, |x, y| {
            (2.0 * PI * x).sin() * (3.0 * PI * y).sin() + 0.5 * (PI * x).sin() * (PI * y).sin()
        });
        let nh = grid.modes();
        let mut a = vec![0.0; nh * nh];
        engine.analyze(&values, &mut a, &mut ws);
        assert!((a[(2 - 1) * nh + (3 - 1)] - 1.0).abs() < 1e-12);
        assert!((a[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_field_zero_spectrum() {
        let grid = Grid::new(32).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let values = vec![0.0; grid.n() * grid.n()];
        let nh = grid.modes();
        let mut a = vec![1.0; nh * nh];
        engine.analyze(&values, &mut a, &mut ws);
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_identity() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let nh = grid.modes();
        // deterministic pseudo-random spectrum with decay
        let mut a = vec![0.0; nh * nh];
        let mut state = 0x9e3779b97f4a7c15u64;
        for j in 1..nh {
            for k in 1..nh {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let r = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[(j - 1) * nh + (k - 1)] = r / ((j * j + k * k) as f64);
            }
        }
        let n = grid.n();
        let mut values = vec![0.0; n * n];
        engine.synthesize(&a, SpectralOp::Value, &mut values, &mut ws);
        let mut b = vec![0.0; nh * nh];
        engine.analyze(&values, &mut b, &mut ws);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(err / norm < 1e-12, "round trip error {err}");
    }

    #[test]
    fn spectral_derivative_matches_symbolic() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let values = sample(grid, |x, y| (3.0 * PI * x).sin() * (PI * y).sin());
        let nh = grid.modes();
        let mut a = vec![0.0; nh * nh];
        engine.analyze(&values, &mut a, &mut ws);
        let n = grid.n();
        let mut dx = vec![0.0; n * n];
        let mut dy = vec![0.0; n * n];
        engine.synthesize2(&a, SpectralOp::Dx, &a, SpectralOp::Dy, &mut dx, &mut dy, &mut ws);
        // d1 f at node (0, h) is 3*pi*sin(pi*h)
        let h = grid.h();
        let i0 = n / 2;
        let expect = 3.0 * PI * (PI * h).sin();
        let got = dx[i0 * n + (i0 + 1)];
        assert!((got - expect).abs() < 1e-12, "got {got}, expect {expect}");
        // full-field check against closed forms
        for i in (0..n).step_by(7) {
            for m in (0..n).step_by(11) {
                let (x, y) = (grid.node(i), grid.node(m));
                let ex = 3.0 * PI * (3.0 * PI * x).cos() * (PI * y).sin();
                let ey = PI * (3.0 * PI * x).sin() * (PI * y).cos();
                assert!((dx[i * n + m] - ex).abs() < 1e-11);
                assert!((dy[i * n + m] - ey).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn second_derivatives_match_symbolic() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let mut ws = engine.workspace();
        let values = sample(grid, |x, y| (2.0 * PI * x).sin() * (3.0 * PI * y).sin());
        let nh = grid.modes();
        let mut a = vec![0.0; nh * nh];
        engine.analyze(&values, &mut a, &mut ws);
        let n = grid.n();
        let mut dxx = vec![0.0; n * n];
        let mut dxy = vec![0.0; n * n];
        let mut dyy = vec![0.0; n * n];
        engine.synthesize2(&a, SpectralOp::Dxx, &a, SpectralOp::Dxy, &mut dxx, &mut dxy, &mut ws);
        engine.synthesize(&a, SpectralOp::Dyy, &mut dyy, &mut ws);
        for i in (1..n).step_by(13) {
            for m in (1..n).step_by(17) {
                let (x, y) = (grid.node(i), grid.node(m));
                let sx = (2.0 * PI * x).sin();
                let cx = (2.0 * PI * x).cos();
                let sy = (3.0 * PI * y).sin();
                let cy = (3.0 * PI * y).cos();
                let exx = -(2.0 * PI) * (2.0 * PI) * sx * sy;
                let exy = (2.0 * PI) * (3.0 * PI) * cx * cy;
                let eyy = -(3.0 * PI) * (3.0 * PI) * sx * sy;
                assert!((dxx[i * n + m] - exx).abs() < 1e-10);
                assert!((dxy[i * n + m] - exy).abs() < 1e-10);
                assert!((dyy[i * n + m] - eyy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dealias_zeroes_high_modes() {
        let grid = Grid::new(128).unwrap();
        let nh = grid.modes();
        let mut a = vec![1.0; nh * nh];
        dealias(&mut a, grid);
        let cut = dealias_cutoff(grid);
        assert_eq!(cut, 42);
        assert_eq!(a[(40 - 1) * nh + (1 - 1)], 1.0);
        assert_eq!(a[(43 - 1) * nh + (1 - 1)], 0.0);
        assert_eq!(a[(1 - 1) * nh + (43 - 1)], 0.0);
        // mode (1,1) untouched
        assert_eq!(a[0], 1.0);
    }

    #[test]
    fn dealias_surviving_mode_count_n32() {
        let grid = Grid::new(32).unwrap();
        let nh = grid.modes();
        let mut a = vec![1.0; nh * nh];
        dealias(&mut a, grid);
        let survivors = a.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(survivors, 100); // floor(32/3) = 10 per dimension
    }

    #[test]
    fn oddness_check_flags_even_field() {
        let grid = Grid::new(32).unwrap();
        let engine = SpectralEngine::new(grid);
        let values = sample(grid, |x, y| (PI * x).cos() * (PI * y).sin());
        assert!(require_odd_odd(&engine, &values).is_err());
        let odd = sample(grid, |x, y| (PI * x).sin() * (PI * y).sin());
        assert!(require_odd_odd(&engine, &odd).is_ok());
    }
}
