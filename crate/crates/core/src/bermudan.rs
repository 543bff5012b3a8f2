//! Optimal exercise levels of Bermudan calls and puts.
//!
//! For a put the continuation value minus the intrinsic value `K - S` changes
//! sign exactly once on `(0, inf)` when yields are nonnegative, so the level
//! is bracketed between two neighbouring grid nodes and refined there. The
//! call side mirrors this with `S - K`.

use serde::{Deserialize, Serialize};

use crate::engine::Grid;
use crate::error::{PricingError, Result};
use crate::product::OptionSide;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootFinder {
    #[default]
    Bisection,
    /// Secant steps, falling back to bisection when a step leaves the bracket.
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySolve {
    /// Exercise level, or `None` when early exercise is never optimal on the grid.
    pub level: Option<f64>,
    /// Neighbouring zero-based grid nodes bracketing the level.
    pub bracket: Option<(usize, usize)>,
    pub iterations: usize,
    pub tolerance_met: bool,
    /// Price tolerance used for the bracket width.
    pub tolerance: f64,
}

/// Price tolerance of the root: `max(h^4 S0, 1e-12 S0)`.
pub fn root_tolerance(h: f64, s0: f64) -> f64 {
    (h.powi(4) * s0).max(1e-12 * s0)
}

const MAX_ITERATIONS: usize = 200;

/// Solves `V~_m(K_m) = intrinsic(K_m)` for one date. `continuation` evaluates
/// `V~_m` at any price and `u` holds its values on the grid.
pub fn find_exercise_level(
    continuation: impl Fn(f64) -> f64,
    u: &[f64],
    grid: &Grid,
    s0: f64,
    strike: f64,
    side: OptionSide,
    method: RootFinder,
) -> Result<BoundarySolve> {
    let tol = root_tolerance(grid.h, s0);
    let price = |i: usize| s0 * grid.x[i].exp();
    let (lo, hi) = match side {
        OptionSide::Put => {
            let p = (0..grid.n).find(|&i| u[i] > strike - price(i));
            match p {
                Some(0) => return Ok(none(tol)),
                Some(p) => (p - 1, p),
                None => {
                    return Err(PricingError::Internal(
                        "continuation value never exceeds the put payoff on the grid".into(),
                    ))
                }
            }
        }
        OptionSide::Call => {
            let p = (0..grid.n).rev().find(|&i| u[i] > price(i) - strike);
            match p {
                Some(p) if p + 1 == grid.n => return Ok(none(tol)),
                Some(p) => (p, p + 1),
                None => {
                    return Err(PricingError::Internal(
                        "continuation value never exceeds the call payoff on the grid".into(),
                    ))
                }
            }
        }
    };
    // f < 0 where exercising is optimal
    let f = |s: f64| match side {
        OptionSide::Put => continuation(s) - (strike - s),
        OptionSide::Call => continuation(s) - (s - strike),
    };
    let (level, iterations, met) = match method {
        RootFinder::Bisection => bisect(&f, price(lo), price(hi), side, tol),
        RootFinder::Secant => secant(&f, price(lo), price(hi), side, tol),
    };
    Ok(BoundarySolve { level: Some(level), bracket: Some((lo, hi)), iterations, tolerance_met: met, tolerance: tol })
}

fn none(tol: f64) -> BoundarySolve {
    BoundarySolve { level: None, bracket: None, iterations: 0, tolerance_met: true, tolerance: tol }
}

fn bisect(f: &impl Fn(f64) -> f64, a: f64, b: f64, side: OptionSide, tol: f64) -> (f64, usize, bool) {
    // put: exercise on the left; call: exercise on the right
    let (mut ex, mut cont) = match side {
        OptionSide::Put => (a, b),
        OptionSide::Call => (b, a),
    };
    let mut it = 0;
    while (cont - ex).abs() >= tol && it < MAX_ITERATIONS {
        let mid = 0.5 * (ex + cont);
        if f(mid) <= 0.0 {
            ex = mid;
        } else {
            cont = mid;
        }
        it += 1;
    }
    (0.5 * (ex + cont), it, (cont - ex).abs() < tol)
}

fn secant(f: &impl Fn(f64) -> f64, a: f64, b: f64, side: OptionSide, tol: f64) -> (f64, usize, bool) {
    let (mut ex, mut cont) = match side {
        OptionSide::Put => (a, b),
        OptionSide::Call => (b, a),
    };
    let (mut x0, mut x1) = (a, b);
    let (mut f0, mut f1) = (f(a), f(b));
    let mut it = 0;
    while it < MAX_ITERATIONS {
        let (lo, hi) = (ex.min(cont), ex.max(cont));
        let mut x2 = if f1 != f0 { x1 - f1 * (x1 - x0) / (f1 - f0) } else { f64::NAN };
        if !(x2 > lo && x2 < hi) {
            x2 = 0.5 * (lo + hi);
        }
        let f2 = f(x2);
        it += 1;
        if f2 <= 0.0 {
            ex = x2;
        } else {
            cont = x2;
        }
        let step = (x2 - x1).abs();
        (x0, f0, x1, f1) = (x1, f1, x2, f2);
        if (cont - ex).abs() < tol || step < 0.25 * tol || f2 == 0.0 {
            return (x2, it, true);
        }
    }
    (x1, it, false)
}
