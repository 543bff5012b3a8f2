//! Closed-form Black-Scholes building blocks: the normal distribution,
//! asset-or-nothing and cash-or-nothing binaries over one interval, and the
//! value one interval before maturity of a piecewise-linear payoff.
//!
//! Volatility-smile adjustments of the binaries would plug in here; none are
//! applied.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{PricingError, Result};
use crate::market_model::IntervalParams;
use crate::product::{ObservationLeg, OptionSide, TerminalPayoff};

/// Standard normal CDF through the complementary error function, so the
/// lower tail keeps full relative accuracy.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`norm_cdf`] on `(0, 1)`: rational initial guess refined by one
/// Halley step against the erfc-based CDF.
pub fn norm_inv_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley step; work with the smaller tail to avoid cancellation
    let e = if x < 0.0 { norm_cdf(x) - p } else { (1.0 - p) - norm_cdf(-x) };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Sign selecting the call (`+1`) or put (`-1`) side of a binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epsilon {
    Plus,
    Minus,
}

impl Epsilon {
    fn sign(self) -> f64 {
        match self {
            Epsilon::Plus => 1.0,
            Epsilon::Minus => -1.0,
        }
    }
}

/// Inputs of a one-interval binary option.
#[derive(Debug, Clone, Copy)]
pub struct BinaryQuote {
    pub s: f64,
    pub k: f64,
    pub epsilon: Epsilon,
    pub params: IntervalParams,
}

impl BinaryQuote {
    fn check(&self) -> Result<()> {
        if !(self.s > 0.0) || !(self.k > 0.0) {
            return Err(PricingError::Domain(format!(
                "binary needs positive S and K, got S = {}, K = {}",
                self.s, self.k
            )));
        }
        Ok(())
    }
}

fn d1(p: &IntervalParams, s: f64, k: f64) -> f64 {
    let sd = p.sigma * p.dt.sqrt();
    ((s / k).ln() + (p.r - p.q + 0.5 * p.sigma * p.sigma) * p.dt) / sd
}

/// Asset-or-nothing value without argument checks. `k = 0` or `k = inf`
/// give the limiting values.
pub(crate) fn asset_or_nothing(p: &IntervalParams, s: f64, k: f64, eps: Epsilon) -> f64 {
    s * p.dividend_discount() * norm_cdf(eps.sign() * d1(p, s, k))
}

pub(crate) fn cash_or_nothing(p: &IntervalParams, s: f64, k: f64, eps: Epsilon) -> f64 {
    let d2 = d1(p, s, k) - p.sigma * p.dt.sqrt();
    p.discount() * norm_cdf(eps.sign() * d2)
}

/// Value at `t_{m-1}` of receiving `S(t_m)` on the `epsilon` side of `K`.
pub fn binary_asset(q: &BinaryQuote) -> Result<f64> {
    q.check()?;
    Ok(asset_or_nothing(&q.params, q.s, q.k, q.epsilon))
}

/// Value at `t_{m-1}` of receiving one unit of cash on the `epsilon` side of `K`.
pub fn binary_cash(q: &BinaryQuote) -> Result<f64> {
    q.check()?;
    Ok(cash_or_nothing(&q.params, q.s, q.k, q.epsilon))
}

/// Closed-form early-exercise part of one backward step: the value at
/// `t_{m-1}` of the payoffs collected when the leg's levels are hit at `t_m`.
pub fn early_exercise_value(s: f64, leg: &ObservationLeg, p: &IntervalParams) -> f64 {
    let mut v = 0.0;
    if let Some(k) = leg.k_plus {
        if leg.a_plus != 0.0 {
            v += leg.a_plus * asset_or_nothing(p, s, k, Epsilon::Plus);
        }
        if leg.b_plus != 0.0 {
            v += leg.b_plus * cash_or_nothing(p, s, k, Epsilon::Plus);
        }
    }
    if leg.has_lower() {
        if leg.a_minus != 0.0 {
            v += leg.a_minus * asset_or_nothing(p, s, leg.k_minus, Epsilon::Minus);
        }
        if leg.b_minus != 0.0 {
            v += leg.b_minus * cash_or_nothing(p, s, leg.k_minus, Epsilon::Minus);
        }
    }
    v
}

/// Replaces a missing level of the maturity leg by the finite level `anchor`
/// with the side's coefficients set to the terminal ones. The payoff is
/// unchanged.
pub fn normalize_terminal_leg(
    leg: &ObservationLeg,
    terminal: &TerminalPayoff,
    anchor: f64,
) -> ObservationLeg {
    let mut out = *leg;
    if !leg.has_lower() {
        out.k_minus = anchor.min(leg.k_plus.unwrap_or(anchor));
        out.a_minus = terminal.a;
        out.b_minus = terminal.b;
    }
    if !leg.has_upper() {
        out.k_plus = Some(anchor.max(out.k_minus));
        out.a_plus = terminal.a;
        out.b_plus = terminal.b;
    }
    out
}

/// Value one interval before maturity of the payoff made of the maturity
/// leg's exercise payoffs and the terminal payoff in between. Both levels of
/// `leg` must be finite and positive (see [`normalize_terminal_leg`]).
pub fn terminal_value(
    s: f64,
    leg: &ObservationLeg,
    terminal: &TerminalPayoff,
    p: &IntervalParams,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(PricingError::Domain(format!("terminal value needs S > 0, got {s}")));
    }
    let (lo, hi) = match leg.k_plus {
        Some(hi) if leg.k_minus > 0.0 => (leg.k_minus, hi),
        _ => {
            return Err(PricingError::Domain(
                "maturity levels must be finite and positive; normalize the leg first".into(),
            ))
        }
    };
    Ok(terminal_value_unchecked(s, lo, hi, leg, terminal, p))
}

pub(crate) fn terminal_value_unchecked(
    s: f64,
    lo: f64,
    hi: f64,
    leg: &ObservationLeg,
    terminal: &TerminalPayoff,
    p: &IntervalParams,
) -> f64 {
    use Epsilon::{Minus, Plus};
    let a_lo_up = asset_or_nothing(p, s, lo, Plus);
    let a_hi_up = asset_or_nothing(p, s, hi, Plus);
    let b_lo_up = cash_or_nothing(p, s, lo, Plus);
    let b_hi_up = cash_or_nothing(p, s, hi, Plus);
    leg.a_minus * asset_or_nothing(p, s, lo, Minus)
        + leg.b_minus * cash_or_nothing(p, s, lo, Minus)
        + terminal.a * (a_lo_up - a_hi_up)
        + terminal.b * (b_lo_up - b_hi_up)
        + leg.a_plus * a_hi_up
        + leg.b_plus * b_hi_up
}

/// European call or put over the single aggregated interval `p`.
pub fn vanilla_price(side: OptionSide, s: f64, k: f64, p: &IntervalParams) -> f64 {
    use Epsilon::{Minus, Plus};
    match side {
        OptionSide::Call => {
            asset_or_nothing(p, s, k, Plus) - k * cash_or_nothing(p, s, k, Plus)
        }
        OptionSide::Put => {
            k * cash_or_nothing(p, s, k, Minus) - asset_or_nothing(p, s, k, Minus)
        }
    }
}

/// Closed-form spot delta of [`vanilla_price`].
pub fn vanilla_delta(side: OptionSide, s: f64, k: f64, p: &IntervalParams) -> f64 {
    let n = norm_cdf(d1(p, s, k));
    match side {
        OptionSide::Call => p.dividend_discount() * n,
        OptionSide::Put => p.dividend_discount() * (n - 1.0),
    }
}
