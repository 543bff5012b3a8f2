//! Generic two-sided knock-out product and constructors for named products.
//!
//! At each observation date `t_m` the product is exercised when
//! `S <= k_minus` (paying `a_minus * S + b_minus`) or `S >= k_plus` (paying
//! `a_plus * S + b_plus`). If it survives to maturity and the last date does
//! not exercise it, it pays `a * S + b`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Terms of one observation date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationLeg {
    pub t: f64,
    /// Lower exercise level; `0` means no lower level.
    pub k_minus: f64,
    /// Upper exercise level; `None` means no upper level.
    pub k_plus: Option<f64>,
    pub a_minus: f64,
    pub b_minus: f64,
    pub a_plus: f64,
    pub b_plus: f64,
}

impl ObservationLeg {
    /// A date with no exercise region at all.
    pub fn unbounded(t: f64) -> Self {
        Self {
            t,
            k_minus: 0.0,
            k_plus: None,
            a_minus: 0.0,
            b_minus: 0.0,
            a_plus: 0.0,
            b_plus: 0.0,
        }
    }

    pub fn has_lower(&self) -> bool {
        self.k_minus > 0.0
    }

    pub fn has_upper(&self) -> bool {
        self.k_plus.is_some()
    }

    /// Payoff if exercised at `s`, or `None` if `s` lies strictly between the levels.
    pub fn exercise_payoff(&self, s: f64) -> Option<f64> {
        if self.has_lower() && s <= self.k_minus {
            return Some(self.a_minus * s + self.b_minus);
        }
        match self.k_plus {
            Some(k) if s >= k => Some(self.a_plus * s + self.b_plus),
            _ => None,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        let coeffs = [self.a_minus, self.b_minus, self.a_plus, self.b_plus];
        if !self.t.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return config(format!("leg {m}: time and payoff coefficients must be finite"));
        }
        if !(self.k_minus >= 0.0) || !self.k_minus.is_finite() {
            return config(format!("leg {m}: k_minus must be finite and >= 0"));
        }
        if let Some(k) = self.k_plus {
            if !(k > 0.0) || !k.is_finite() {
                return config(format!("leg {m}: k_plus must be positive (use None for no level)"));
            }
            if self.k_minus > k {
                return config(format!("leg {m}: k_minus {} exceeds k_plus {k}", self.k_minus));
            }
        }
        Ok(())
    }
}

/// Payoff `a * S + b` at maturity between the last date's levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalPayoff {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionSide {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExerciseStyle {
    /// All exercise levels are part of the contract.
    Scheduled,
    /// Levels before maturity are optimal exercise boundaries solved by the engine.
    Bermudan { side: OptionSide, strike: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSchedule {
    pub t0: f64,
    pub spot: f64,
    pub legs: Vec<ObservationLeg>,
    pub terminal: TerminalPayoff,
    pub style: ExerciseStyle,
}

impl ProductSchedule {
    pub fn new(
        t0: f64,
        spot: f64,
        legs: Vec<ObservationLeg>,
        terminal: TerminalPayoff,
        style: ExerciseStyle,
    ) -> Result<Self> {
        let s = Self { t0, spot, legs, terminal, style };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return config(format!("spot must be positive, got {}", self.spot));
        }
        if self.legs.is_empty() {
            return config("product needs at least one observation date");
        }
        if !self.t0.is_finite() || !(self.legs[0].t > self.t0) {
            return config("first observation date must be after the valuation date");
        }
        if let Some(w) = self.legs.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return config(format!(
                "observation dates must be strictly increasing ({} then {})",
                w[0].t, w[1].t
            ));
        }
        for (i, leg) in self.legs.iter().enumerate() {
            leg.validate(i + 1)?;
        }
        if !self.terminal.a.is_finite() || !self.terminal.b.is_finite() {
            return config("terminal payoff coefficients must be finite");
        }
        if let ExerciseStyle::Bermudan { strike, .. } = self.style {
            if !(strike > 0.0) || !strike.is_finite() {
                return config(format!("strike must be positive, got {strike}"));
            }
        }
        Ok(())
    }

    pub fn num_dates(&self) -> usize {
        self.legs.len()
    }

    pub fn maturity(&self) -> f64 {
        self.legs[self.legs.len() - 1].t
    }

    /// Valuation date followed by all observation dates.
    pub fn dates(&self) -> Vec<f64> {
        std::iter::once(self.t0).chain(self.legs.iter().map(|l| l.t)).collect()
    }

    pub fn is_bermudan(&self) -> bool {
        matches!(self.style, ExerciseStyle::Bermudan { .. })
    }

    /// Copy with a different spot, used for bump-and-reprice.
    pub fn with_spot(&self, spot: f64) -> Result<Self> {
        let mut s = self.clone();
        s.spot = spot;
        s.validate()?;
        Ok(s)
    }

    /// Freezes solved Bermudan boundaries into a scheduled product.
    /// `levels[m]` is the level at date `m + 1`; `None` means no early exercise.
    pub fn with_exercise_levels(&self, levels: &[Option<f64>]) -> Result<Self> {
        let ExerciseStyle::Bermudan { side, .. } = self.style else {
            return config("exercise levels can only be fixed on a Bermudan product");
        };
        if levels.len() + 1 != self.legs.len() && levels.len() != self.legs.len() {
            return config("one exercise level per date before maturity is required");
        }
        let mut s = self.clone();
        for (leg, level) in s.legs.iter_mut().zip(levels) {
            match side {
                OptionSide::Put => leg.k_minus = level.unwrap_or(0.0),
                OptionSide::Call => leg.k_plus = *level,
            }
        }
        s.style = ExerciseStyle::Scheduled;
        s.validate()?;
        Ok(s)
    }
}

/// Side of the autocall barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

fn check_lengths(what: &str, n: usize, other: usize) -> Result<()> {
    if n != other {
        return config(format!("{what} has {other} entries but there are {n} dates"));
    }
    Ok(())
}

/// Autocallable that pays `coupons[m]` when the barrier is touched at date
/// `m` and `final_premium` if it never is.
pub fn make_autocallable(
    t0: f64,
    spot: f64,
    dates: &[f64],
    barriers: &[f64],
    coupons: &[f64],
    final_premium: f64,
    direction: Direction,
) -> Result<ProductSchedule> {
    check_lengths("barriers", dates.len(), barriers.len())?;
    check_lengths("coupons", dates.len(), coupons.len())?;
    if let Some(b) = barriers.iter().find(|b| !(**b > 0.0)) {
        return config(format!("barriers must be positive, got {b}"));
    }
    let legs = dates
        .iter()
        .zip(barriers)
        .zip(coupons)
        .map(|((&t, &barrier), &coupon)| {
            let mut leg = ObservationLeg::unbounded(t);
            match direction {
                Direction::Up => {
                    leg.k_plus = Some(barrier);
                    leg.b_plus = coupon;
                }
                Direction::Down => {
                    leg.k_minus = barrier;
                    leg.b_minus = coupon;
                }
            }
            leg
        })
        .collect();
    ProductSchedule::new(
        t0,
        spot,
        legs,
        TerminalPayoff { a: 0.0, b: final_premium },
        ExerciseStyle::Scheduled,
    )
}

/// Payoff of a barrier option that survives to maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TerminalKind {
    Call { strike: f64 },
    Put { strike: f64 },
    Cash { amount: f64 },
    Asset,
}

/// Terms of a discretely monitored knock-out option. `lower[m]`/`upper[m]`
/// are the barriers at `dates[m]` (`None` for no barrier on that side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierTerms {
    pub t0: f64,
    pub spot: f64,
    pub dates: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub terminal: TerminalKind,
}

impl BarrierTerms {
    pub fn knock_out(&self) -> Result<ProductSchedule> {
        make_barrier(self.t0, self.spot, &self.dates, &self.lower, &self.upper, self.terminal)
    }

    /// Same dates and terminal payoff without any barrier.
    pub fn vanilla(&self) -> Result<ProductSchedule> {
        let none = vec![None; self.dates.len()];
        make_barrier(self.t0, self.spot, &self.dates, &none, &none, self.terminal)
    }
}

/// Knock-out barrier option.
pub fn make_barrier(
    t0: f64,
    spot: f64,
    dates: &[f64],
    lower: &[Option<f64>],
    upper: &[Option<f64>],
    terminal: TerminalKind,
) -> Result<ProductSchedule> {
    check_lengths("lower barriers", dates.len(), lower.len())?;
    check_lengths("upper barriers", dates.len(), upper.len())?;
    if dates.is_empty() {
        return config("product needs at least one observation date");
    }
    let mut legs = Vec::with_capacity(dates.len());
    for (m, ((&t, lo), hi)) in dates.iter().zip(lower).zip(upper).enumerate() {
        let lo = lo.unwrap_or(0.0);
        if let Some(hi) = hi {
            if lo >= *hi {
                return config(format!(
                    "date {}: lower barrier {lo} must be below upper barrier {hi}",
                    m + 1
                ));
            }
        }
        if lo < 0.0 || hi.is_some_and(|h| h <= 0.0) {
            return config(format!("date {}: barriers must be positive", m + 1));
        }
        let mut leg = ObservationLeg::unbounded(t);
        leg.k_minus = lo;
        leg.k_plus = *hi;
        legs.push(leg);
    }

    // Region (lo, hi) of the last date where the terminal payoff applies;
    // outside it the option pays nothing.
    let last = legs.last_mut().expect("nonempty");
    let (mut lo, mut hi) = (last.k_minus, last.k_plus);
    let payoff = match terminal {
        TerminalKind::Call { strike } => {
            if !(strike > 0.0) {
                return config("call strike must be positive");
            }
            lo = lo.max(strike);
            TerminalPayoff { a: 1.0, b: -strike }
        }
        TerminalKind::Put { strike } => {
            if !(strike > 0.0) {
                return config("put strike must be positive");
            }
            hi = Some(hi.map_or(strike, |h| h.min(strike)));
            TerminalPayoff { a: -1.0, b: strike }
        }
        TerminalKind::Cash { amount } => TerminalPayoff { a: 0.0, b: amount },
        TerminalKind::Asset => TerminalPayoff { a: 1.0, b: 0.0 },
    };
    let payoff = match hi {
        Some(h) if h <= lo => {
            // empty region: worthless at maturity
            hi = Some(lo.max(h));
            TerminalPayoff { a: 0.0, b: 0.0 }
        }
        _ => payoff,
    };
    last.k_minus = lo;
    last.k_plus = hi;
    ProductSchedule::new(t0, spot, legs, payoff, ExerciseStyle::Scheduled)
}

/// Bermudan option exercisable at every date in `dates`.
pub fn make_bermudan(
    t0: f64,
    spot: f64,
    dates: &[f64],
    strike: f64,
    side: OptionSide,
) -> Result<ProductSchedule> {
    if !(strike > 0.0) {
        return config(format!("strike must be positive, got {strike}"));
    }
    let m = dates.len();
    let legs = dates
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut leg = ObservationLeg::unbounded(t);
            match side {
                OptionSide::Put => {
                    leg.a_minus = -1.0;
                    leg.b_minus = strike;
                    // the maturity level is the strike itself
                    if i + 1 == m {
                        leg.k_minus = strike;
                    }
                }
                OptionSide::Call => {
                    leg.a_plus = 1.0;
                    leg.b_plus = -strike;
                    if i + 1 == m {
                        leg.k_plus = Some(strike);
                    }
                }
            }
            leg
        })
        .collect();
    ProductSchedule::new(
        t0,
        spot,
        legs,
        TerminalPayoff { a: 0.0, b: 0.0 },
        ExerciseStyle::Bermudan { side, strike },
    )
}
