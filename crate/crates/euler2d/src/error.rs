use thiserror::Error;

/// Errors surfaced by the solver and its diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {n} is invalid: n must be a power of two and >= 32")]
    GridSize { n: usize },

    #[error("grids do not match: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("field has no physical values")]
    MissingValues,

    #[error("field has no spectrum; call to_spectral first")]
    MissingSpectrum,

    #[error("field violates odd-odd symmetry: residual {residual:.3e} exceeds {tolerance:.1e}")]
    SymmetryViolation { residual: f64, tolerance: f64 },

    #[error("delta = {delta:.6e} is unresolvable on this grid (requires delta >= 8h = {min:.6e}); use a finer grid or resolvable-mode parameters")]
    UnresolvableDelta { delta: f64, min: f64 },

    #[error("initial-data constraint '{constraint}' violated: {detail}")]
    ConstraintViolation { constraint: String, detail: String },

    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("point ({x1}, {x2}) outside the valid region: {detail}")]
    PointOutsideRegion { x1: f64, x2: f64, detail: String },

    #[error("velocity blow-up guard tripped at t = {t}: |u|_inf = {linf_u:.3e} > {threshold:.3e}; the run is under-resolved")]
    BlowUp { t: f64, linf_u: f64, threshold: f64 },

    #[error("snapshot store does not cover [{t_to}, {t_from}]")]
    SnapshotCoverage { t_from: f64, t_to: f64 },

    #[error("series contains a non-positive value {value} at t = {t}; cannot fit in log space")]
    NonPositiveSeries { t: f64, value: f64 },

    #[error("fit window [{a}, {b}] is degenerate or holds fewer than 3 points")]
    DegenerateWindow { a: f64, b: f64 },

    #[error("high-precision arithmetic failed: {0}")]
    BigFloat(String),
}
