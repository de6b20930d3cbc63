//! Material-point tracking, backward characteristics, and gradient transport
//! along the inverse flow map.
//!
//! Velocity fields are stored at step boundaries; RK4 substage velocities use
//! linear interpolation in time between the two bracketing fields (an O(dt^2)
//! interpolation inside the O(dt^4) scheme, acceptable at CFL-limited dt).
//! Off-grid evaluation is direct summation of the stream-function sine
//! series, exact for resolved modes.

use crate::grid::Grid;
use crate::initial_data::Omega0Spec;
use crate::spectral::poisson_scale;
use crate::velocity::VelocityEval;
use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// A material point `X(t, alpha)` with optional forward-flow Jacobian
/// (`det = 1` under incompressible transport) and its time history.
#[derive(Debug, Clone)]
pub struct Tracer {
    pub alpha: [f64; 2],
    pub x: [f64; 2],
    pub jacobian: Option<Mat2>,
    pub history: Vec<(f64, [f64; 2])>,
}

impl Tracer {
    pub fn new(t0: f64, alpha: [f64; 2], with_jacobian: bool) -> Self {
        Tracer {
            alpha,
            x: alpha,
            jacobian: with_jacobian.then_some(IDENTITY),
            history: vec![(t0, alpha)],
        }
    }

    /// Restores a tracer mid-run (checkpoint path).
    pub fn restore(alpha: [f64; 2], x: [f64; 2], jacobian: Option<Mat2>, t: f64) -> Self {
        Tracer {
            alpha,
            x,
            jacobian,
            history: vec![(t, x)],
        }
    }

    pub fn det_jacobian(&self) -> Option<f64> {
        self.jacobian
            .map(|j| j[0][0] * j[1][1] - j[0][1] * j[1][0])
    }
}

/// Time-ordered stream-function snapshots retained for characteristics.
pub struct SnapshotStore {
    grid: Grid,
    times: Vec<f64>,
    psis: Vec<Vec<f64>>,
}

impl SnapshotStore {
    pub fn new(grid: Grid) -> Self {
        SnapshotStore {
            grid,
            times: Vec::new(),
            psis: Vec::new(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Stores the stream function of a vorticity spectrum at time `t`.
    /// Times must be strictly increasing.
    pub fn push_omega_spectrum(&mut self, t: f64, spectrum: &[f64]) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "snapshot times must increase: {t} after {last}");
        }
        let nh = self.grid.modes();
        let mut psi = vec![0.0; nh * nh];
        poisson_scale(spectrum, self.grid, &mut psi);
        self.times.push(t);
        self.psis.push(psi);
    }

    /// Evaluator for the stored field closest below/above `t` with the
    /// interpolation fraction.
    fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        let eps = 1e-9;
        if self.times.is_empty()
            || t < self.times[0] - eps
            || t > *self.times.last().unwrap() + eps
        {
            return Err(Error::SnapshotCoverage {
                t_from: t,
                t_to: t,
            });
        }
        if self.times.len() == 1 {
            return Ok((0, 0, 0.0));
        }
        let idx = self.times.partition_point(|&x| x <= t);
        let hi = idx.clamp(1, self.times.len() - 1);
        let lo = hi - 1;
        let span = self.times[hi] - self.times[lo];
        let frac = ((t - self.times[lo]) / span).clamp(0.0, 1.0);
        Ok((lo, hi, frac))
    }

    /// Velocity at time `t` and point `p`, linearly interpolated between the
    /// bracketing snapshots.
    pub fn velocity(&self, t: f64, p: [f64; 2]) -> Result<[f64; 2]> {
        let (lo, hi, frac) = self.bracket(t)?;
        let a = VelocityEval::new(&self.psis[lo], self.grid).velocity(p);
        if lo == hi || frac == 0.0 {
            return Ok(a);
        }
        let b = VelocityEval::new(&self.psis[hi], self.grid).velocity(p);
        Ok([a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])])
    }

    /// Velocity and velocity gradient at `(t, p)`, interpolated like
    /// [`SnapshotStore::velocity`].
    pub fn velocity_and_gradient(&self, t: f64, p: [f64; 2]) -> Result<([f64; 2], Mat2)> {
        let (lo, hi, frac) = self.bracket(t)?;
        let (ua, ga) = VelocityEval::new(&self.psis[lo], self.grid).velocity_and_gradient(p);
        if lo == hi || frac == 0.0 {
            return Ok((ua, ga));
        }
        let (ub, gb) = VelocityEval::new(&self.psis[hi], self.grid).velocity_and_gradient(p);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            u[i] = ua[i] + frac * (ub[i] - ua[i]);
            for j in 0..2 {
                g[i][j] = ga[i][j] + frac * (gb[i][j] - ga[i][j]);
            }
        }
        Ok((u, g))
    }

    fn segment_times(&self, t_from: f64, t_to: f64) -> Result<Vec<f64>> {
        // strictly decreasing node sequence from t_from down to t_to drawn
        // from the snapshot grid
        let eps = 1e-9;
        if self.times.is_empty()
            || t_to < self.times[0] - eps
            || t_from > *self.times.last().unwrap() + eps
            || t_to > t_from + eps
        {
            return Err(Error::SnapshotCoverage { t_from, t_to });
        }
        let mut nodes = vec![t_from];
        for &t in self.times.iter().rev() {
            if t < t_from - eps && t > t_to + eps {
                nodes.push(t);
            }
        }
        nodes.push(t_to);
        Ok(nodes)
    }
}

/// One RK4 step of the flow ODE `dx/dt = u(t, x)` (optionally coupled with
/// the Jacobian ODE `dJ/dt = grad_u(t, x) . J`) against an arbitrary
/// space-time velocity. `dt` may be negative for backward characteristics.
pub fn rk4_flow_step<F>(x: [f64; 2], j: Option<Mat2>, t: f64, dt: f64, mut field: F) -> Result<([f64; 2], Option<Mat2>)>
where
    F: FnMut(f64, [f64; 2], bool) -> Result<([f64; 2], Option<Mat2>)>,
{
    let with_j = j.is_some();
    let stage_t = [t, t + 0.5 * dt, t + 0.5 * dt, t + dt];
    let mut kx = [[0.0; 2]; 4];
    let mut kj = [[[0.0; 2]; 2]; 4];
    let mut xs = x;
    let mut js = j.unwrap_or(IDENTITY);
    for s in 0..4 {
        let (u, g) = field(stage_t[s], xs, with_j)?;
        kx[s] = u;
        if with_j {
            let g = g.expect("field must supply a gradient when tracking J");
            // dJ/dt = G J
            for r in 0..2 {
                for c in 0..2 {
                    kj[s][r][c] = g[r][0] * js[0][c] + g[r][1] * js[1][c];
                }
            }
        }
        if s < 3 {
            let w = if s == 2 { dt } else { 0.5 * dt };
            xs = [x[0] + w * kx[s][0], x[1] + w * kx[s][1]];
            if with_j {
                let j0 = j.unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        js[r][c] = j0[r][c] + w * kj[s][r][c];
                    }
                }
            }
        }
    }
    let xf = [
        x[0] + dt / 6.0 * (kx[0][0] + 2.0 * kx[1][0] + 2.0 * kx[2][0] + kx[3][0]),
        x[1] + dt / 6.0 * (kx[0][1] + 2.0 * kx[1][1] + 2.0 * kx[2][1] + kx[3][1]),
    ];
    let jf = j.map(|j0| {
        let mut out = j0;
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = j0[r][c]
                    + dt / 6.0
                        * (kj[0][r][c] + 2.0 * kj[1][r][c] + 2.0 * kj[2][r][c] + kj[3][r][c]);
            }
        }
        out
    });
    Ok((xf, jf))
}

/// Advances a tracer across one accepted solver step `[t, t+dt]` using the
/// two bracketing velocity fields (`psi_a` at `t`, `psi_b` at `t+dt`) with
/// linear interpolation at substage times. Appends to the history.
pub fn advance_tracer(
    tracer: &mut Tracer,
    psi_a: &[f64],
    psi_b: &[f64],
    grid: Grid,
    t: f64,
    dt: f64,
) -> Result<()> {
    let ev_a = VelocityEval::new(psi_a, grid);
    let ev_b = VelocityEval::new(psi_b, grid);
    let with_j = tracer.jacobian.is_some();
    let (x, j) = rk4_flow_step(tracer.x, tracer.jacobian, t, dt, |tau, p, need_j| {
        let frac = ((tau - t) / dt).clamp(0.0, 1.0);
        if need_j {
            let (ua, ga) = ev_a.velocity_and_gradient(p);
            let (ub, gb) = ev_b.velocity_and_gradient(p);
            let mut u = [0.0; 2];
            let mut g = [[0.0; 2]; 2];
            for i in 0..2 {
                u[i] = ua[i] + frac * (ub[i] - ua[i]);
                for c in 0..2 {
                    g[i][c] = ga[i][c] + frac * (gb[i][c] - ga[i][c]);
                }
            }
            Ok((u, Some(g)))
        } else {
            let ua = ev_a.velocity(p);
            let ub = ev_b.velocity(p);
            Ok(([ua[0] + frac * (ub[0] - ua[0]), ua[1] + frac * (ub[1] - ua[1])], None))
        }
    })?;
    debug_assert!(with_j == j.is_some());
    tracer.x = x;
    tracer.jacobian = j;
    tracer.history.push((t + dt, x));
    Ok(())
}

/// Integrates the inverse flow map: starting from `point` at `t_from`, runs
/// `dx/ds = u(s, x)` backward to `t_to` (one RK4 step per retained snapshot
/// segment). Returns `X^{-1}`.
pub fn backtrack(point: [f64; 2], t_from: f64, t_to: f64, store: &SnapshotStore) -> Result<[f64; 2]> {
    let (x, _, _) = backtrack_with_jacobian_impl(point, t_from, t_to, store, false)?;
    Ok(x)
}

/// Statistics of the Jacobian along a backtracked path.
#[derive(Debug, Clone, Copy)]
pub struct BacktrackPath {
    pub endpoint: [f64; 2],
    pub det_min: f64,
    pub det_max: f64,
}

fn backtrack_with_jacobian_impl(
    point: [f64; 2],
    t_from: f64,
    t_to: f64,
    store: &SnapshotStore,
    with_j: bool,
) -> Result<([f64; 2], Mat2, (f64, f64))> {
    let nodes = store.segment_times(t_from, t_to)?;
    let mut x = point;
    let mut j = IDENTITY;
    let mut det_min = 1.0f64;
    let mut det_max = 1.0f64;
    for w in nodes.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let dt = tb - ta; // negative
        if dt == 0.0 {
            continue;
        }
        let (xn, jn) = rk4_flow_step(x, with_j.then_some(j), ta, dt, |tau, p, need_j| {
            if need_j {
                let (u, g) = store.velocity_and_gradient(tau, p)?;
                Ok((u, Some(g)))
            } else {
                Ok((store.velocity(tau, p)?, None))
            }
        })?;
        x = xn;
        if let Some(jn) = jn {
            j = jn;
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            det_min = det_min.min(det);
            det_max = det_max.max(det);
        }
    }
    Ok((x, j, (det_min, det_max)))
}

/// Evaluates `grad omega(t, x)` via the transport identity: backtracks to
/// t = `t_to` while integrating the inverse-map Jacobian
/// (`dG/ds = grad_u(s, X^{-1}) G` along decreasing s, `G(t_from) = I`), then
/// returns `G^T grad omega0(X^{-1})`.
pub fn gradient_via_backtracking(
    point: [f64; 2],
    t_from: f64,
    t_to: f64,
    store: &SnapshotStore,
    omega0: &Omega0Spec,
) -> Result<([f64; 2], BacktrackPath)> {
    let (y, g, (det_min, det_max)) =
        backtrack_with_jacobian_impl(point, t_from, t_to, store, true)?;
    let g0 = omega0.eval_gradient(y[0], y[1]);
    let grad = [
        g[0][0] * g0[0] + g[1][0] * g0[1],
        g[0][1] * g0[0] + g[1][1] * g0[1],
    ];
    Ok((
        grad,
        BacktrackPath {
            endpoint: y,
            det_min,
            det_max,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample;
    use crate::{Grid, ScalarField, SpectralEngine};
    use std::f64::consts::PI;

    #[test]
    fn stagnation_point_stays_fixed() {
        let grid = Grid::new(64).unwrap();
        let engine = SpectralEngine::new(grid);
        let values = sample(grid, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let omega = ScalarField::from_values(grid, values).to_spectral(&engine).unwrap();
        let nh = grid.modes();
        let mut psi = vec![0.0; nh * nh];
        poisson_scale(omega.spectrum().unwrap(), grid, &mut psi);
        let mut tracer = Tracer::new(0.0, [0.0, 0.0], true);
        for s in 0..50 {
            advance_tracer(&mut tracer, &psi, &psi, grid, s as f64 * 0.01, 0.01).unwrap();
        }
        assert_eq!(tracer.x, [0.0, 0.0]);
        assert!((tracer.det_jacobian().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(tracer.history.len(), 51);
        // history times strictly increasing
        for w in tracer.history.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
    }

    #[test]
    fn manufactured_rotation_traces_circle() {
        // u = (-x2, x1) injected directly; radius drift <= 1e-10 after one
        // revolution, det J stays 1
        let steps = 1000usize;
        let dt = 2.0 * PI / steps as f64;
        let mut x = [0.5, 0.0];
        let mut j = Some(IDENTITY);
        for s in 0..steps {
            let (xn, jn) = rk4_flow_step(x, j, s as f64 * dt, dt, |_, p, need_j| {
                let g = need_j.then_some([[0.0, -1.0], [1.0, 0.0]]);
                Ok(([-p[1], p[0]], g))
            })
            .unwrap();
            x = xn;
            j = jn;
        }
        let r = x[0].hypot(x[1]);
        assert!((r - 0.5).abs() < 1e-10, "radius drift {}", (r - 0.5).abs());
        assert!((x[0] - 0.5).abs() < 1e-8 && x[1].abs() < 1e-8, "period error");
        let jm = j.unwrap();
        let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
        assert!((det - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_order_four_self_convergence() {
        let run = |steps: usize| -> [f64; 2] {
            let dt = 1.0 / steps as f64;
            let mut x = [0.5, 0.0];
            for s in 0..steps {
                let (xn, _) = rk4_flow_step(x, None, s as f64 * dt, dt, |_, p, _| {
                    Ok(([-p[1], p[0]], None))
                })
                .unwrap();
                x = xn;
            }
            x
        };
        let exact = [0.5 * 1.0f64.cos(), 0.5 * 1.0f64.sin()];
        let e1 = {
            let x = run(50);
            ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt()
        };
        let e2 = {
            let x = run(100);
            ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt()
        };
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn backtrack_identity_and_coverage() {
        let grid = Grid::new(64).unwrap();
        let mut store = SnapshotStore::new(grid);
        let nh = grid.modes();
        let spec = vec![0.0; nh * nh];
        store.push_omega_spectrum(0.0, &spec);
        store.push_omega_spectrum(0.1, &spec);
        // t_from == t_to: identity
        let x = backtrack([0.3, 0.4], 0.1, 0.1, &store).unwrap();
        assert_eq!(x, [0.3, 0.4]);
        // insufficient coverage
        assert!(matches!(
            backtrack([0.3, 0.4], 0.5, 0.0, &store),
            Err(Error::SnapshotCoverage { .. })
        ));
        // zero field: backtracking anywhere returns the same point
        let x = backtrack([0.3, 0.4], 0.1, 0.0, &store).unwrap();
        assert_eq!(x, [0.3, 0.4]);
    }

    #[test]
    fn gradient_transport_at_time_zero_returns_initial_gradient() {
        let grid = Grid::new(64).unwrap();
        let mut store = SnapshotStore::new(grid);
        let nh = grid.modes();
        store.push_omega_spectrum(0.0, &vec![0.0; nh * nh]);
        let spec = Omega0Spec::new(0.1).unwrap();
        let p = [0.31, 0.17];
        let (g, path) = gradient_via_backtracking(p, 0.0, 0.0, &store, &spec).unwrap();
        let g0 = spec.eval_gradient(p[0], p[1]);
        assert_eq!(g, g0);
        assert_eq!(path.endpoint, p);
        assert_eq!(path.det_min, 1.0);
        assert_eq!(path.det_max, 1.0);
    }
}
