//! Time-dependent market curves and their reduction to per-interval constants.
//!
//! Only the integrals of `r`, `q` and `sigma^2` over each observation interval
//! enter the price, so each interval can be replaced by its averages without
//! changing the law of the asset at the observation dates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, PricingError, Result};

/// One constant piece of a curve, valid on `(previous end, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub end: f64,
    pub value: f64,
}

/// A piecewise-constant function of time starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    start: f64,
    segments: Vec<Segment>,
}

impl PiecewiseConstant {
    /// Builds a curve from `(end, value)` pairs; piece `k` covers
    /// `(end_{k-1}, end_k]` with `end_{-1} = start`.
    pub fn new(start: f64, pieces: &[(f64, f64)]) -> Result<Self> {
        if !start.is_finite() {
            return config("curve start must be finite");
        }
        if pieces.is_empty() {
            return config("curve needs at least one segment");
        }
        let mut prev = start;
        let mut segments = Vec::with_capacity(pieces.len());
        for &(end, value) in pieces {
            if !(end > prev) || !end.is_finite() {
                return config(format!(
                    "curve breakpoints must be strictly increasing (got {end} after {prev})"
                ));
            }
            if !value.is_finite() {
                return config(format!("curve value at breakpoint {end} is not finite"));
            }
            segments.push(Segment { end, value });
            prev = end;
        }
        Ok(Self { start, segments })
    }

    pub fn flat(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(start, &[(end, value)])
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Value on the segment containing `t` (right-closed pieces).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < self.start || t > self.end() {
            return None;
        }
        self.segments.iter().find(|s| t <= s.end).map(|s| s.value)
    }

    /// Exact integral of `f(value)` over `[a, b]`.
    fn integral_by(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut lo = self.start;
        let mut acc = 0.0;
        for seg in &self.segments {
            let l = lo.max(a);
            let r = seg.end.min(b);
            if r > l {
                acc += f(seg.value) * (r - l);
            }
            lo = seg.end;
        }
        acc
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integral_by(a, b, |v| v)
    }

    pub fn integral_of_square(&self, a: f64, b: f64) -> f64 {
        self.integral_by(a, b, |v| v * v)
    }

    fn covers(&self, a: f64, b: f64) -> bool {
        self.start <= a && self.end() >= b
    }

    fn shifted(&self, delta: f64) -> Self {
        Self {
            start: self.start,
            segments: self
                .segments
                .iter()
                .map(|s| Segment { end: s.end, value: s.value + delta })
                .collect(),
        }
    }
}

/// Risk-free rate, dividend yield and volatility curves (decimal, per year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCurves {
    pub rate: PiecewiseConstant,
    pub dividend_yield: PiecewiseConstant,
    pub volatility: PiecewiseConstant,
}

impl MarketCurves {
    pub fn new(
        rate: PiecewiseConstant,
        dividend_yield: PiecewiseConstant,
        volatility: PiecewiseConstant,
    ) -> Result<Self> {
        if let Some(s) = volatility.segments().iter().find(|s| !(s.value > 0.0)) {
            return config(format!(
                "volatility must be positive (segment ending at {} has {})",
                s.end, s.value
            ));
        }
        Ok(Self { rate, dividend_yield, volatility })
    }

    /// Flat curves on `[start, end]`.
    pub fn constant(start: f64, end: f64, r: f64, q: f64, sigma: f64) -> Result<Self> {
        Self::new(
            PiecewiseConstant::flat(start, end, r)?,
            PiecewiseConstant::flat(start, end, q)?,
            PiecewiseConstant::flat(start, end, sigma)?,
        )
    }

    /// Copy with every volatility segment shifted by `bump` (absolute).
    pub fn with_volatility_bump(&self, bump: f64) -> Result<Self> {
        Self::new(
            self.rate.clone(),
            self.dividend_yield.clone(),
            self.volatility.shifted(bump),
        )
    }
}

/// Constant market parameters over one observation interval `(t_{m-1}, t_m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalParams {
    pub r: f64,
    pub q: f64,
    pub sigma: f64,
    pub dt: f64,
    /// Half the variance of the log-return, `sigma^2 dt / 2`.
    pub tau: f64,
    /// `(r - q - sigma^2/2) / sigma^2`.
    pub alpha: f64,
    /// `alpha^2 + 2 r / sigma^2`.
    pub beta: f64,
}

impl IntervalParams {
    pub fn new(r: f64, q: f64, sigma: f64, dt: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return config(format!("interval volatility must be positive, got {sigma}"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return config(format!("interval length must be positive, got {dt}"));
        }
        if !r.is_finite() || !q.is_finite() {
            return config("interval rate and yield must be finite");
        }
        let s2 = sigma * sigma;
        let alpha = (r - q - 0.5 * s2) / s2;
        Ok(Self {
            r,
            q,
            sigma,
            dt,
            tau: 0.5 * s2 * dt,
            alpha,
            beta: alpha * alpha + 2.0 * r / s2,
        })
    }

    /// Discount factor over the interval, `exp(-r dt)`.
    pub fn discount(&self) -> f64 {
        (-self.r * self.dt).exp()
    }

    pub fn dividend_discount(&self) -> f64 {
        (-self.q * self.dt).exp()
    }

    /// Mean of the log-return over the interval, `2 alpha tau`.
    pub fn log_drift(&self) -> f64 {
        2.0 * self.alpha * self.tau
    }
}

/// Averages the curves over each interval between consecutive `dates`
/// (`dates[0]` is the valuation time).
pub fn reduce_curves(curves: &MarketCurves, dates: &[f64]) -> Result<Vec<IntervalParams>> {
    if dates.len() < 2 {
        return config("need a valuation date and at least one observation date");
    }
    if let Some(w) = dates.windows(2).find(|w| !(w[1] > w[0])) {
        return config(format!(
            "observation dates must be strictly increasing ({} then {})",
            w[0], w[1]
        ));
    }
    let (t0, tm) = (dates[0], dates[dates.len() - 1]);
    for (name, curve) in [
        ("rate", &curves.rate),
        ("yield", &curves.dividend_yield),
        ("volatility", &curves.volatility),
    ] {
        if !curve.covers(t0, tm) {
            return config(format!(
                "{name} curve covers [{}, {}] but the horizon is [{t0}, {tm}]",
                curve.start(),
                curve.end()
            ));
        }
    }
    dates
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let dt = b - a;
            IntervalParams::new(
                curves.rate.integral(a, b) / dt,
                curves.dividend_yield.integral(a, b) / dt,
                (curves.volatility.integral_of_square(a, b) / dt).sqrt(),
                dt,
            )
        })
        .collect()
}

/// Transition density of `S(t_m) = y` given `S(t_{m-1}) = s`.
pub fn lognormal_density(params: &IntervalParams, y: f64, s: f64) -> Result<f64> {
    if !(y > 0.0) || !(s > 0.0) {
        return Err(PricingError::Domain(format!(
            "density needs positive prices, got y = {y}, S = {s}"
        )));
    }
    let tau = params.tau;
    let z = (y / s).ln() - params.log_drift();
    Ok((-z * z / (4.0 * tau)).exp() / (2.0 * (PI * tau).sqrt() * y))
}

/// Convolution weight `exp(-x^2 / (4 tau) - alpha x)`.
pub fn kernel_w(params: &IntervalParams, x: f64) -> f64 {
    (-x * x / (4.0 * params.tau) - params.alpha * x).exp()
}

/// Natural log of the prefactor `exp(-beta tau) / (2 sqrt(pi tau))` that
/// turns `kernel_w` into the discounted density in log-price.
pub fn log_kernel_prefactor(params: &IntervalParams) -> f64 {
    -params.beta * params.tau - (2.0 * (PI * params.tau).sqrt()).ln()
}
