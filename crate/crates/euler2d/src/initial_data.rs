//! Initial vorticity construction.
//!
//! On `[0,1]^2` the profile satisfies five constraints: `0 <= w0 <= 1`,
//! `w0 = 1` on the plateau `[delta, 1-delta]^2`, odd-odd extension to the
//! torus, the diagonal law `w0(s,s) = s/ln(-ln s)` for `s <= delta/2`, and
//! `sup |grad w0| <= 20/delta`.
//!
//! Concretely, with `M(s) = s/ln(-ln s)` and `Q` the quintic smoothstep:
//!
//! * near the origin (`r <= delta/sqrt(2)`) the profile is polar,
//!   `M(r/sqrt 2) sin(2 phi)`, which restricts to the diagonal law exactly
//!   (the radial argument is the diagonal coordinate `s = r/sqrt 2`);
//! * a radial blend over `delta/sqrt2 <= r <= delta*sqrt2` crossfades to the
//!   axis-ramp plateau `Q(x1/delta) Q(x2/delta)`;
//! * a seam cut `1 - Q((xi - (1-delta))/delta)` per coordinate takes the
//!   profile back to zero at `x_i = 1` so the odd periodic extension stays
//!   C^1.
//!
//! All pieces are C^1 with gradients O(1/delta), measured (not assumed) to
//! respect the `20/delta` budget by [`verify_constraints`].

use crate::field::{sample, ScalarField};
use crate::grid::Grid;
use crate::spectral::{SpectralEngine, SpectralOp};
use crate::theory::{self, Delta1Branch};
use crate::{Error, Result};

/// The construction's parameter set shared by simulation-facing code.
/// `log_s` is kept in log space; the theoretical `s` underflows f64 for any
/// interesting horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionParams {
    pub a: f64,
    pub c3: f64,
    pub delta: f64,
    pub delta1: f64,
    pub delta1_branch: Delta1Branch,
    pub k_const: f64,
    pub log_s: Option<f64>,
    pub mode: ParamMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    /// Constants from the theoretical chain; simulation is not meaningful at
    /// these scales.
    Theoretical,
    /// User-supplied resolvable overrides for actual simulation.
    Resolvable,
}

impl ConstructionParams {
    /// Parameters from the theoretical chain (f64 downcast; see
    /// [`crate::theory`] for the high-precision version).
    pub fn theoretical(a: f64, c3: f64) -> Result<Self> {
        if !(a >= 2.0) {
            return Err(Error::InvalidParameter {
                name: "A",
                detail: format!("A = {a} but the construction requires A >= 2"),
            });
        }
        if !(c3 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "C3",
                detail: format!("C3 = {c3} must be positive"),
            });
        }
        let delta = theory::delta_to_f64(a, c3);
        let cand = (2f64.sqrt() / 4.0) * (-2.0 * 3f64.sqrt() * (a + 2.0 * c3)).exp();
        let (delta1, branch) = if cand <= delta / 2.0 {
            (cand, Delta1Branch::Exponential)
        } else {
            (delta / 2.0, Delta1Branch::HalfDelta)
        };
        Ok(ConstructionParams {
            a,
            c3,
            delta,
            delta1,
            delta1_branch: branch,
            k_const: theory::k_to_f64(c3),
            log_s: None,
            mode: ParamMode::Theoretical,
        })
    }

    /// Resolvable-mode parameters with explicit `delta`, `delta1` and tracer
    /// start `s`.
    pub fn resolvable(a: f64, c3: f64, delta: f64, delta1: f64, s: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(Error::InvalidParameter {
                name: "delta",
                detail: format!("delta = {delta} must lie in (0, 1/4)"),
            });
        }
        if !(delta1 > 0.0 && delta1 <= 0.25) {
            return Err(Error::InvalidParameter {
                name: "delta1",
                detail: format!("delta1 = {delta1} must lie in (0, 1/4]"),
            });
        }
        if !(s > 0.0) || s > delta1 / 2.0 {
            return Err(Error::InvalidParameter {
                name: "s",
                detail: format!("s = {s} must lie in (0, delta1/2 = {}]", delta1 / 2.0),
            });
        }
        Ok(ConstructionParams {
            a,
            c3,
            delta,
            delta1,
            delta1_branch: Delta1Branch::HalfDelta,
            k_const: theory::k_to_f64(c3),
            log_s: Some(s.ln()),
            mode: ParamMode::Resolvable,
        })
    }

    /// Chooses the tracer start for a horizon `T`, storing and returning
    /// `log s`.
    pub fn choose_s(&mut self, t_horizon: f64, c2: f64) -> f64 {
        let ls = theory::choose_s_log_f64(t_horizon, c2, self.delta.ln(), self.delta1.ln());
        self.log_s = Some(ls);
        ls
    }
}

/// Specification of the initial vorticity profile; `delta` is the plateau
/// margin. The diagonal profile region ends at `blend_inner() = delta/2` (in
/// the diagonal coordinate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega0Spec {
    pub delta: f64,
}

/// Quintic smoothstep on [0,1]: `6t^5 - 15t^4 + 10t^3`, clamped outside.
#[inline]
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Derivative of [`smoothstep`] (zero outside [0,1]).
#[inline]
fn smoothstep_d(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

/// Double-log radial modulus `M(s) = s / ln(-ln s)` for `s in (0, 1/4]`.
#[inline]
fn modulus(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    s / (-s.ln()).ln()
}

/// `M'(s) = 1/L + 1/((-ln s) L^2)` with `L = ln(-ln s)`.
#[inline]
fn modulus_d(s: f64) -> f64 {
    let nl = -s.ln();
    let l = nl.ln();
    1.0 / l + 1.0 / (nl * l * l)
}

impl Omega0Spec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(Error::InvalidParameter {
                name: "delta",
                detail: format!("delta = {delta} must lie in (0, 1/4)"),
            });
        }
        Ok(Omega0Spec { delta })
    }

    /// Radius (in the diagonal coordinate `s`) where the pure diagonal
    /// profile region ends.
    pub fn blend_inner(&self) -> f64 {
        self.delta / 2.0
    }

    /// Profile on the closed first-quadrant cell `[0,1]^2`.
    fn quadrant(&self, x1: f64, x2: f64) -> f64 {
        let d = self.delta;
        let r = x1.hypot(x2);
        if r == 0.0 {
            return 0.0;
        }
        let r_in = d / 2f64.sqrt();
        let r_out = d * 2f64.sqrt();
        let ramp = smoothstep(x1 / d) * smoothstep(x2 / d);
        let bulk = if r >= r_out {
            ramp
        } else {
            let polar = modulus(r / 2f64.sqrt()) * (2.0 * x1 * x2) / (r * r);
            let beta = smoothstep((r - r_in) / (r_out - r_in));
            (1.0 - beta) * polar + beta * ramp
        };
        let cut1 = 1.0 - smoothstep((x1 - (1.0 - d)) / d);
        let cut2 = 1.0 - smoothstep((x2 - (1.0 - d)) / d);
        bulk * cut1 * cut2
    }

    /// Gradient of [`Omega0Spec::quadrant`].
    fn quadrant_gradient(&self, x1: f64, x2: f64) -> [f64; 2] {
        let d = self.delta;
        let r = x1.hypot(x2);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let r_in = d / 2f64.sqrt();
        let r_out = d * 2f64.sqrt();
        let u1 = smoothstep(x1 / d);
        let u2 = smoothstep(x2 / d);
        let du1 = smoothstep_d(x1 / d) / d;
        let du2 = smoothstep_d(x2 / d) / d;
        let ramp = u1 * u2;
        let dramp = [du1 * u2, u1 * du2];
        let (bulk, dbulk) = if r >= r_out {
            (ramp, dramp)
        } else {
            let s = r / 2f64.sqrt();
            let m = modulus(s);
            let md = modulus_d(s);
            let sig = (2.0 * x1 * x2) / (r * r);
            let r4 = r * r * r * r;
            let dsig = [
                2.0 * x2 * (x2 * x2 - x1 * x1) / r4,
                2.0 * x1 * (x1 * x1 - x2 * x2) / r4,
            ];
            let polar = m * sig;
            let dr = [x1 / r, x2 / r];
            let dpolar = [
                md / 2f64.sqrt() * dr[0] * sig + m * dsig[0],
                md / 2f64.sqrt() * dr[1] * sig + m * dsig[1],
            ];
            let span = r_out - r_in;
            let beta = smoothstep((r - r_in) / span);
            let dbeta = smoothstep_d((r - r_in) / span) / span;
            let bulk = (1.0 - beta) * polar + beta * ramp;
            let dbulk = [
                dbeta * dr[0] * (ramp - polar) + (1.0 - beta) * dpolar[0] + beta * dramp[0],
                dbeta * dr[1] * (ramp - polar) + (1.0 - beta) * dpolar[1] + beta * dramp[1],
            ];
            (bulk, dbulk)
        };
        let c1 = 1.0 - smoothstep((x1 - (1.0 - d)) / d);
        let c2 = 1.0 - smoothstep((x2 - (1.0 - d)) / d);
        let dc1 = -smoothstep_d((x1 - (1.0 - d)) / d) / d;
        let dc2 = -smoothstep_d((x2 - (1.0 - d)) / d) / d;
        [
            dbulk[0] * c1 * c2 + bulk * dc1 * c2,
            dbulk[1] * c1 * c2 + bulk * c1 * dc2,
        ]
    }

    /// Pointwise value anywhere on the torus cell `[-1,1]^2` (odd-odd
    /// extension of the quadrant profile).
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        if x1 == 0.0 || x2 == 0.0 {
            return 0.0;
        }
        let s1 = if x1 < 0.0 { -1.0 } else { 1.0 };
        let s2 = if x2 < 0.0 { -1.0 } else { 1.0 };
        s1 * s2 * self.quadrant(x1.abs(), x2.abs())
    }

    /// Pointwise gradient anywhere on `[-1,1]^2`.
    pub fn eval_gradient(&self, x1: f64, x2: f64) -> [f64; 2] {
        if x1 == 0.0 && x2 == 0.0 {
            return [0.0, 0.0];
        }
        // the odd extension makes d1 w even in x1 / odd in x2, and vice versa
        let s1 = if x1 < 0.0 { -1.0 } else { 1.0 };
        let s2 = if x2 < 0.0 { -1.0 } else { 1.0 };
        let g = self.quadrant_gradient(x1.abs(), x2.abs());
        [s2 * g[0], s1 * g[1]]
    }

    /// The diagonal law `M(s) = s / ln(-ln s)`.
    pub fn diagonal_value(&self, s: f64) -> f64 {
        modulus(s)
    }
}

/// Builds the initial vorticity at the grid nodes, populating both
/// representations, and enforces the gradient budget `sup|grad| <= 20/delta`.
pub fn build_omega0(spec: &Omega0Spec, grid: Grid, engine: &SpectralEngine) -> Result<ScalarField> {
    let min_delta = 8.0 * grid.h();
    if spec.delta < min_delta {
        return Err(Error::UnresolvableDelta {
            delta: spec.delta,
            min: min_delta,
        });
    }
    let values = sample(grid, |x, y| spec.eval(x, y));
    let field = ScalarField::from_values(grid, values).to_spectral(engine)?;
    let sup = spectral_sup_grad(&field, engine)?;
    let bound = 20.0 / spec.delta;
    if sup > bound {
        return Err(Error::ConstraintViolation {
            constraint: "gradient_bound".into(),
            detail: format!("sup|grad w0| = {sup:.6} exceeds 20/delta = {bound:.6}"),
        });
    }
    Ok(field)
}

fn spectral_sup_grad(field: &ScalarField, engine: &SpectralEngine) -> Result<f64> {
    let spectrum = field.spectrum().ok_or(Error::MissingSpectrum)?;
    let n = field.grid().n();
    let mut ws = engine.workspace();
    let mut dx = vec![0.0; n * n];
    let mut dy = vec![0.0; n * n];
    engine.synthesize2(spectrum, SpectralOp::Dx, spectrum, SpectralOp::Dy, &mut dx, &mut dy, &mut ws);
    Ok(dx
        .iter()
        .zip(dy.iter())
        .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b))))
}

/// One verified constraint: measured value against its bound.
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
}

/// Verification report for the five construction constraints.
#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// Measures the five constraints on a built field: range, plateau, oddness,
/// diagonal profile, gradient budget. Purely reporting; never errors on a
/// failed constraint.
pub fn verify_constraints(
    field: &ScalarField,
    spec: &Omega0Spec,
    engine: &SpectralEngine,
) -> Result<ConstraintReport> {
    let grid = field.grid();
    let values = field.values().ok_or(Error::MissingValues)?;
    let n = grid.n();
    let d = spec.delta;

    // range on [0,1]^2: measured = worst excursion outside [0,1]
    let mut range_violation: f64 = 0.0;
    // plateau deviation on [delta, 1-delta]^2
    let mut plateau_dev: f64 = 0.0;
    for i in 0..n {
        let x = grid.node(i);
        if x < 0.0 {
            continue;
        }
        for m in 0..n {
            let y = grid.node(m);
            if y < 0.0 {
                continue;
            }
            let v = values[grid.idx(i, m)];
            range_violation = range_violation.max((-v).max(v - 1.0)).max(0.0);
            if x >= d && x <= 1.0 - d && y >= d && y <= 1.0 - d {
                plateau_dev = plateau_dev.max((v - 1.0).abs());
            }
        }
    }

    let oddness = engine.oddness_residual(values);

    let mut diag_dev: f64 = 0.0;
    for i in (n / 2 + 1)..n {
        let s = grid.node(i);
        if s > d / 2.0 {
            break;
        }
        let v = values[grid.idx(i, i)];
        diag_dev = diag_dev.max((v - spec.diagonal_value(s)).abs());
    }

    let sup = spectral_sup_grad(field, engine)?;
    let bound = 20.0 / d;

    let tol = 1e-12;
    Ok(ConstraintReport {
        checks: vec![
            ConstraintCheck {
                name: "range",
                pass: range_violation <= tol,
                measured: range_violation,
                bound: tol,
            },
            ConstraintCheck {
                name: "plateau",
                pass: plateau_dev <= tol,
                measured: plateau_dev,
                bound: tol,
            },
            ConstraintCheck {
                name: "oddness",
                pass: oddness <= tol,
                measured: oddness,
                bound: tol,
            },
            ConstraintCheck {
                name: "diagonal_profile",
                pass: diag_dev <= tol,
                measured: diag_dev,
                bound: tol,
            },
            ConstraintCheck {
                name: "gradient_bound",
                pass: sup <= bound,
                measured: sup,
                bound,
            },
        ],
    })
}

/// The chain's lower bound for the key integral,
/// `(sqrt3/12) * (-ln(4 delta1^2 + 48 delta / pi))`; errors when the log
/// argument reaches 1 and the bound becomes vacuous.
pub fn key_integral_lower_bound(delta: f64, delta1: f64) -> Result<f64> {
    let arg = 4.0 * delta1 * delta1 + 48.0 * delta / std::f64::consts::PI;
    if arg >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            detail: format!("4 delta1^2 + 48 delta/pi = {arg} >= 1; the lower bound is vacuous"),
        });
    }
    Ok(3f64.sqrt() / 12.0 * (-arg.ln()))
}
