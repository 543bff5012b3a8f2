//! Independent checks on the quadrature engine: a Monte Carlo pricer with
//! antithetic variates, the truncation-error bound and convergence studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{norm_cdf, norm_inv_cdf};
use crate::engine::{price, truncation_half_width};
use crate::error::{config, Result};
use crate::market_model::{reduce_curves, IntervalParams, MarketCurves};
use crate::product::ProductSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_pairs: u64,
    pub seed: u64,
}

/// Pairs simulated from one RNG stream.
const BLOCK: u64 = 1 << 14;

/// Uniform on the open interval `(0, 1)`.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }
}

/// Discounted payoff of one path driven by the normals `z` (times `sign`).
fn path_payoff(schedule: &ProductSchedule, steps: &[(f64, f64, f64)], z: &[f64], sign: f64) -> f64 {
    let mut s = schedule.spot;
    let mut disc = 1.0;
    for (m, (leg, &(drift, vol, df))) in schedule.legs.iter().zip(steps).enumerate() {
        s *= (drift + vol * sign * z[m]).exp();
        disc *= df;
        if let Some(p) = leg.exercise_payoff(s) {
            return disc * p;
        }
    }
    disc * (schedule.terminal.a * s + schedule.terminal.b)
}

/// Monte Carlo price with exact lognormal steps between observation dates and
/// antithetic pairs. The result depends only on `seed`, not on the number of
/// threads.
pub fn mc_price(schedule: &ProductSchedule, curves: &MarketCurves, n_pairs: u64, seed: u64) -> Result<McResult> {
    schedule.validate()?;
    if n_pairs == 0 {
        return config("Monte Carlo needs at least one pair");
    }
    if schedule.is_bermudan() {
        return config("fix the Bermudan exercise levels before simulating");
    }
    let intervals = reduce_curves(curves, &schedule.dates())?;
    let steps: Vec<(f64, f64, f64)> = intervals
        .iter()
        .map(|p| ((p.r - p.q - 0.5 * p.sigma * p.sigma) * p.dt, p.sigma * p.dt.sqrt(), p.discount()))
        .collect();
    let m = steps.len();
    let blocks = n_pairs.div_ceil(BLOCK);
    let per_block: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BLOCK.min(n_pairs - b * BLOCK);
            let mut z = vec![0.0; m];
            let mut acc = Moments::default();
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = norm_inv_cdf(open_uniform(&mut rng)));
                let pair = 0.5 * (path_payoff(schedule, &steps, &z, 1.0) + path_payoff(schedule, &steps, &z, -1.0));
                acc.push(pair);
            }
            acc
        })
        .collect();
    let total = per_block.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if total.n > 1.0 { (total.m2 / (total.n - 1.0) / total.n).sqrt() } else { 0.0 };
    Ok(McResult { estimate: total.mean, std_error, n_pairs, seed })
}

/// Certified bound on the error from truncating the integrals to
/// `[S0/C, S0 C]`, with the constants it is built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationBound {
    /// Largest absolute asset coefficient.
    pub a: f64,
    /// Largest absolute cash coefficient.
    pub b: f64,
    /// `min(r_m, 0)`.
    pub r: f64,
    /// `min(q_m, 0)`.
    pub q: f64,
    pub log_c: f64,
    /// Smallest and largest of `d3..d6` over the dates.
    pub d_range: Option<(f64, f64)>,
    pub q0: f64,
}

impl TruncationBound {
    /// Pointwise bound on any continuation value at time `t`.
    pub fn value_bound(&self, t: f64, maturity: f64, s: f64) -> f64 {
        (self.q * (t - maturity)).exp() * self.a * s + (self.r * (t - maturity)).exp() * self.b
    }
}

/// Coefficient maxima and rate minima bounding every continuation value.
fn payoff_constants(schedule: &ProductSchedule, intervals: &[IntervalParams]) -> (f64, f64, f64, f64) {
    let mut a = schedule.terminal.a.abs();
    let mut b = schedule.terminal.b.abs();
    for leg in &schedule.legs {
        a = a.max(leg.a_minus.abs()).max(leg.a_plus.abs());
        b = b.max(leg.b_minus.abs()).max(leg.b_plus.abs());
    }
    let r = intervals.iter().map(|p| p.r).fold(0.0, f64::min);
    let q = intervals.iter().map(|p| p.q).fold(0.0, f64::min);
    (a, b, r, q)
}

/// Truncation-error bound `Q~_0(S0)` for the half-width `log_c`.
pub fn truncation_bound(schedule: &ProductSchedule, curves: &MarketCurves, log_c: f64) -> Result<TruncationBound> {
    schedule.validate()?;
    let intervals = reduce_curves(curves, &schedule.dates())?;
    let (a, b, r, q) = payoff_constants(schedule, &intervals);
    let s0 = schedule.spot;
    let horizon = schedule.maturity() - schedule.t0;
    let (mut asset_sum, mut cash_sum) = (0.0, 0.0);
    let mut d_range: Option<(f64, f64)> = None;
    let (mut int_r, mut int_q, mut int_v, mut elapsed) = (0.0, 0.0, 0.0, 0.0);
    for p in &intervals[..intervals.len() - 1] {
        int_r += p.r * p.dt;
        int_q += p.q * p.dt;
        int_v += p.sigma * p.sigma * p.dt;
        elapsed += p.dt;
        let sd = int_v.sqrt();
        let (carry_plus, carry_minus) = (int_r - int_q + 0.5 * int_v, int_r - int_q - 0.5 * int_v);
        let d = [
            (-log_c + carry_plus) / sd,
            (-log_c - carry_plus) / sd,
            (-log_c + carry_minus) / sd,
            (-log_c - carry_minus) / sd,
        ];
        for v in d {
            d_range = Some(d_range.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
        }
        asset_sum += s0 * (-int_q).exp() * (norm_cdf(d[0]) + norm_cdf(d[1]));
        cash_sum += (-int_r).exp() * (norm_cdf(d[2]) + norm_cdf(d[3]));
    }
    debug_assert!(elapsed <= horizon + 1e-12);
    let q0 = (-q * horizon).exp() * a * asset_sum + (-r * horizon).exp() * b * cash_sum;
    Ok(TruncationBound { a, b, r, q, log_c, d_range, q0 })
}

/// Truncation bound at the engine's default half-width.
pub fn default_truncation_bound(schedule: &ProductSchedule, curves: &MarketCurves) -> Result<TruncationBound> {
    let intervals = reduce_curves(curves, &schedule.dates())?;
    truncation_bound(schedule, curves, truncation_half_width(&intervals, schedule.maturity() - schedule.t0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub reference_n: usize,
    pub reference: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-log(error)` against `log N`, over errors above
    /// the round-off floor; `None` with fewer than two usable points.
    pub order: Option<f64>,
}

/// Errors at or below this are treated as round-off.
const ROUND_OFF_FLOOR: f64 = 100.0 * f64::EPSILON;

pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.rel_error > ROUND_OFF_FLOOR)
        .map(|r| ((r.n as f64).ln(), r.rel_error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Prices at each `N` against a finer reference grid.
pub fn convergence_study(
    schedule: &ProductSchedule,
    curves: &MarketCurves,
    n_list: &[usize],
    reference_n: usize,
) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return config("n-list must not be empty");
    }
    if let Some(n) = n_list.iter().find(|&&n| n >= reference_n) {
        return config(format!("reference N {reference_n} must exceed every N in the list (got {n})"));
    }
    let reference = price(schedule, curves, reference_n)?.price;
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let value = price(schedule, curves, n)?.price;
            let rel_error = if reference != 0.0 { ((value - reference) / reference).abs() } else { (value - reference).abs() };
            Ok(ConvergenceRow { n, value, rel_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let order = fitted_order(&rows);
    Ok(ConvergenceStudy { reference_n, reference, rows, order })
}
