//! High-precision evaluation of the construction's constant chain.
//!
//! The plateau margin `delta`, the trajectory box `delta1` and the gradient
//! constant `K` are doubly exponentially small/large in `A + 2 C3`, so the
//! chain and the inequality it must satisfy are evaluated with arbitrary
//! precision arithmetic (>= 50 decimal digits) rather than in f64:
//!
//! * `delta  = (pi/96) exp(-4 sqrt(3) (A + 2 C3))`
//! * `delta1 = min{ (sqrt(2)/4) exp(-2 sqrt(3) (A + 2 C3)), delta/2 }`
//! * `K      = (1920/pi) exp(8 sqrt(3) C3)`
//! * margin  `= (sqrt(3)/12) (-ln(4 delta1^2 + 48 delta / pi)) - (A + 2 C3)`,
//!   which must be nonnegative,
//! * identity `20/delta = K exp(4 sqrt(3) A)`, exact at precision.
//!
//! The tracer start is chosen in log space,
//! `log s = min{ ln(delta/20) + 2 - 2 e^{C2 T}, ln(delta1/2) + 1 - e^{C2 T} }`,
//! and the growth prefactor is `C1 = 1/(2 C4)` with
//! `C4 = log(-log s) / (1 + T)` at the given horizon.

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

use crate::{Error, Result};

/// Which branch of the `delta1` minimum was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta1Branch {
    /// `(sqrt(2)/4) exp(-2 sqrt(3)(A + 2 C3))`
    Exponential,
    /// `delta / 2`
    HalfDelta,
}

/// Arbitrary-precision scratch context. Create one per call chain; it is not
/// shared across threads.
struct Ctx {
    p: usize,
    rm: RoundingMode,
    cc: Consts,
}

impl Ctx {
    fn new(digits: usize) -> Result<Self> {
        let p = (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 64;
        let cc = Consts::new().map_err(|e| Error::BigFloat(format!("{e:?}")))?;
        Ok(Ctx {
            p,
            rm: RoundingMode::ToEven,
            cc,
        })
    }

    fn f(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.p)
    }

    fn int(&self, v: i64) -> BigFloat {
        BigFloat::from_i64(v, self.p)
    }

    fn pi(&mut self) -> BigFloat {
        self.cc.pi(self.p, self.rm)
    }

    fn sqrt_of(&mut self, v: i64) -> BigFloat {
        self.int(v).sqrt(self.p, self.rm)
    }

    fn exp(&mut self, v: &BigFloat) -> BigFloat {
        v.exp(self.p, self.rm, &mut self.cc)
    }

    fn ln(&mut self, v: &BigFloat) -> BigFloat {
        v.ln(self.p, self.rm, &mut self.cc)
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, self.rm)
    }

    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, self.rm)
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, self.rm)
    }

    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, self.rm)
    }

    fn dec(&mut self, v: &BigFloat) -> String {
        v.format(Radix::Dec, self.rm, &mut self.cc)
            .unwrap_or_else(|e| format!("<format error: {e:?}>"))
    }
}

fn min_bf(a: BigFloat, b: BigFloat) -> (BigFloat, bool) {
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => (b, false),
        _ => (a, true),
    }
}

/// The constant chain at a requested decimal precision, with decimal-string
/// renderings for reporting.
#[derive(Debug, Clone)]
pub struct ConstantChain {
    pub a: f64,
    pub c3: f64,
    pub digits: usize,
    pub delta: String,
    pub delta1: String,
    pub delta1_branch: Delta1Branch,
    pub k_const: String,
    pub b3_margin: String,
    pub b3_margin_nonnegative: bool,
    /// `|20/delta - K exp(4 sqrt(3) A)| / (20/delta)`; zero at precision.
    pub grad_identity_rel: String,
    pub grad_identity_ok: bool,
    /// f64 downcasts (underflow to 0 is possible and expected for large A).
    pub delta_f64: f64,
    pub delta1_f64: f64,
    pub k_f64: f64,
    pub b3_margin_f64: f64,
}

/// Computes `delta`, `delta1`, `K` and the inequality margin at `digits`
/// decimal digits. `A >= 2` is the theorem hypothesis; `digits >= 50` because
/// the chain underflows double precision for moderate `A`.
pub fn theoretical_constants(a: f64, c3: f64, digits: usize) -> Result<ConstantChain> {
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
    if digits < 50 {
        return Err(Error::InvalidParameter {
            name: "precision",
            detail: format!("{digits} digits requested; need >= 50"),
        });
    }
    let mut cx = Ctx::new(digits)?;
    let pi = cx.pi();
    let s3 = cx.sqrt_of(3);
    let s2 = cx.sqrt_of(2);
    let a_big = cx.f(a);
    let c3_big = cx.f(c3);

    // S = A + 2 C3
    let s_sum = cx.add(&a_big, &cx.mul(&cx.int(2), &c3_big));
    // delta = (pi/96) exp(-4 sqrt3 S)
    let x4 = cx.mul(&cx.mul(&cx.int(4), &s3), &s_sum);
    let delta = cx.mul(&cx.div(&pi, &cx.int(96)), &cx.exp(&x4.neg()));
    // branch candidates for delta1
    let x2 = cx.mul(&cx.mul(&cx.int(2), &s3), &s_sum);
    let cand_exp = cx.mul(&cx.div(&s2, &cx.int(4)), &cx.exp(&x2.neg()));
    let cand_half = cx.div(&delta, &cx.int(2));
    let (delta1, exp_taken) = min_bf(cand_exp, cand_half);
    let delta1_branch = if exp_taken {
        Delta1Branch::Exponential
    } else {
        Delta1Branch::HalfDelta
    };
    // K = (1920/pi) exp(8 sqrt3 C3)
    let x8 = cx.mul(&cx.mul(&cx.int(8), &s3), &c3_big);
    let k_const = cx.mul(&cx.div(&cx.int(1920), &pi), &cx.exp(&x8));
    // margin = (sqrt3/12)(-ln(4 d1^2 + 48 d / pi)) - S
    let arg = cx.add(
        &cx.mul(&cx.int(4), &cx.mul(&delta1, &delta1)),
        &cx.div(&cx.mul(&cx.int(48), &delta), &pi),
    );
    let neg_ln = cx.ln(&arg).neg();
    let margin = cx.sub(&cx.mul(&cx.div(&s3, &cx.int(12)), &neg_ln), &s_sum);
    let margin_nonneg = margin.sign() != Some(Sign::Neg) || margin.is_zero();
    // identity: 20/delta vs K exp(4 sqrt3 A)
    let lhs = cx.div(&cx.int(20), &delta);
    let xa = cx.mul(&cx.mul(&cx.int(4), &s3), &a_big);
    let rhs = cx.mul(&k_const, &cx.exp(&xa));
    let rel = cx.div(&cx.sub(&lhs, &rhs), &lhs).abs();
    // ok when the relative residual is far below the requested precision
    let tol = {
        let e = -((digits as i64) - 8);
        let ten = cx.int(10);
        let lt = cx.mul(&cx.f(e as f64), &cx.ln(&ten));
        cx.exp(&lt)
    };
    let identity_ok = rel < tol;

    Ok(ConstantChain {
        a,
        c3,
        digits,
        delta: cx.dec(&delta),
        delta1: cx.dec(&delta1),
        delta1_branch,
        k_const: cx.dec(&k_const),
        b3_margin: cx.dec(&margin),
        b3_margin_nonnegative: margin_nonneg,
        grad_identity_rel: cx.dec(&rel),
        grad_identity_ok: identity_ok,
        delta_f64: delta_to_f64(a, c3),
        delta1_f64: delta1_to_f64(a, c3),
        k_f64: k_to_f64(c3),
        b3_margin_f64: b3_margin_f64(a, c3),
    })
}

/// f64 evaluation of `delta` (underflows to 0 for large arguments).
pub fn delta_to_f64(a: f64, c3: f64) -> f64 {
    let s = a + 2.0 * c3;
    (std::f64::consts::PI / 96.0) * (-4.0 * 3f64.sqrt() * s).exp()
}

/// `ln delta` formed without underflow.
pub fn ln_delta_f64(a: f64, c3: f64) -> f64 {
    let s = a + 2.0 * c3;
    (std::f64::consts::PI / 96.0).ln() - 4.0 * 3f64.sqrt() * s
}

/// `ln delta1` formed without underflow.
pub fn ln_delta1_f64(a: f64, c3: f64) -> f64 {
    let s = a + 2.0 * c3;
    let cand = (2f64.sqrt() / 4.0).ln() - 2.0 * 3f64.sqrt() * s;
    cand.min(ln_delta_f64(a, c3) - 2f64.ln())
}

/// f64 evaluation of `delta1` with the same min as the chain.
pub fn delta1_to_f64(a: f64, c3: f64) -> f64 {
    let s = a + 2.0 * c3;
    let cand = (2f64.sqrt() / 4.0) * (-2.0 * 3f64.sqrt() * s).exp();
    cand.min(delta_to_f64(a, c3) / 2.0)
}

/// f64 evaluation of `K`.
pub fn k_to_f64(c3: f64) -> f64 {
    (1920.0 / std::f64::consts::PI) * (8.0 * 3f64.sqrt() * c3).exp()
}

/// f64 margin via the algebraically reduced form
/// `(sqrt3/12)(ln 2 - ln(1 + 2 delta^2 e^X))` with `X = 4 sqrt3 (A + 2C3)`,
/// valid on the half-delta branch; falls back to the direct form otherwise.
fn b3_margin_f64(a: f64, c3: f64) -> f64 {
    let s = a + 2.0 * c3;
    let x = 4.0 * 3f64.sqrt() * s;
    let delta = delta_to_f64(a, c3);
    let d1 = delta1_to_f64(a, c3);
    if d1 == delta / 2.0 {
        let corr = 2.0 * delta * delta * x.exp();
        (3f64.sqrt() / 12.0) * (2f64.ln() - corr.ln_1p())
    } else {
        let arg = 4.0 * d1 * d1 + 48.0 * delta / std::f64::consts::PI;
        (3f64.sqrt() / 12.0) * (-arg.ln()) - s
    }
}

/// The `s`-selection and the growth prefactor at a horizon `T`, evaluated at
/// the chain's precision. All quantities live in log space.
#[derive(Debug, Clone)]
pub struct SChoice {
    pub c2: f64,
    pub t_horizon: f64,
    pub log_s: String,
    pub log_s_f64: f64,
    pub log_minus_log_s: String,
    pub c4: String,
    pub c4_f64: f64,
    pub c1: String,
    pub c1_f64: f64,
}

/// Evaluates `log s`, `C4` and `C1 = 1/(2 C4)` for a given `(C2, T)` against
/// a computed chain.
pub fn choose_s_chain(a: f64, c3: f64, digits: usize, c2: f64, t: f64) -> Result<SChoice> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "T",
            detail: format!("horizon T = {t} must be positive"),
        });
    }
    if !(c2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "C2",
            detail: format!("C2 = {c2} must be positive"),
        });
    }
    let _ = theoretical_constants(a, c3, digits)?; // validates inputs
    let mut cx = Ctx::new(digits)?;
    let pi = cx.pi();
    let s3 = cx.sqrt_of(3);
    let s2 = cx.sqrt_of(2);
    let s_sum = cx.add(&cx.f(a), &cx.mul(&cx.int(2), &cx.f(c3)));
    let x4 = cx.mul(&cx.mul(&cx.int(4), &s3), &s_sum);
    let delta = cx.mul(&cx.div(&pi, &cx.int(96)), &cx.exp(&x4.neg()));
    let x2 = cx.mul(&cx.mul(&cx.int(2), &s3), &s_sum);
    let cand_exp = cx.mul(&cx.div(&s2, &cx.int(4)), &cx.exp(&x2.neg()));
    let cand_half = cx.div(&delta, &cx.int(2));
    let (delta1, _) = min_bf(cand_exp, cand_half);

    let ect = {
        let e = cx.mul(&cx.f(c2), &cx.f(t));
        cx.exp(&e)
    };
    // branch 1: ln(delta/20) + 2 - 2 e^{C2 T}
    let b1 = {
        let l = cx.ln(&cx.div(&delta, &cx.int(20)));
        let two_ect = cx.mul(&cx.int(2), &ect);
        cx.sub(&cx.add(&l, &cx.int(2)), &two_ect)
    };
    // branch 2: ln(delta1/2) + 1 - e^{C2 T}
    let b2 = {
        let l = cx.ln(&cx.div(&delta1, &cx.int(2)));
        cx.sub(&cx.add(&l, &cx.int(1)), &ect)
    };
    let (log_s, _) = min_bf(b1, b2);
    let lml = cx.ln(&log_s.neg());
    let one_plus_t = cx.add(&cx.int(1), &cx.f(t));
    let c4 = cx.div(&lml, &one_plus_t);
    let c1 = cx.div(&cx.int(1), &cx.mul(&cx.int(2), &c4));

    Ok(SChoice {
        c2,
        t_horizon: t,
        log_s: cx.dec(&log_s),
        log_s_f64: choose_s_log_f64(t, c2, ln_delta_f64(a, c3), ln_delta1_f64(a, c3)),
        log_minus_log_s: cx.dec(&lml),
        c4: cx.dec(&c4),
        c4_f64: parse_dec(&cx.dec(&c4)),
        c1: cx.dec(&c1),
        c1_f64: parse_dec(&cx.dec(&c1)),
    })
}

fn parse_dec(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Log-space `s` selection for arbitrary (possibly resolvable) `delta`,
/// `delta1`; never underflows because only logarithms are formed:
/// `log s = min{ ln(delta/20) + 2 - 2 e^{C2 T}, ln(delta1/2) + 1 - e^{C2 T} }`.
pub fn choose_s_log_f64(t: f64, c2: f64, ln_delta: f64, ln_delta1: f64) -> f64 {
    let ect = (c2 * t).exp();
    let b1 = ln_delta - 20f64.ln() + 2.0 - 2.0 * ect;
    let b2 = ln_delta1 - 2f64.ln() + 1.0 - ect;
    b1.min(b2)
}
