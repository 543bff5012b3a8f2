#![allow(dead_code)]

use discrete_quad::market_model::{MarketCurves, PiecewiseConstant};
use discrete_quad::product::{make_autocallable, make_barrier, BarrierTerms, Direction, ProductSchedule, TerminalKind};

pub const TABLE1_DATES: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const TABLE2_DATES: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

fn steps(dates: &[f64], pct: &[f64]) -> Vec<(f64, f64)> {
    dates.iter().zip(pct).map(|(&t, &r)| (t, r / 100.0)).collect()
}

/// Up-and-out autocallable: 4% * t when above the barrier, -1% otherwise.
pub fn table1() -> (ProductSchedule, MarketCurves) {
    let coupons: Vec<f64> = TABLE1_DATES.iter().map(|t| 0.04 * t).collect();
    let sched = make_autocallable(
        0.0,
        3000.0,
        &TABLE1_DATES,
        &[3050.0, 3100.0, 3150.0, 3200.0, 3250.0],
        &coupons,
        -0.01,
        Direction::Up,
    )
    .unwrap();
    let curves = MarketCurves::new(
        PiecewiseConstant::new(0.0, &steps(&TABLE1_DATES, &[2.0, 2.1, 2.2, 2.3, 2.4])).unwrap(),
        PiecewiseConstant::flat(0.0, 1.0, 0.0).unwrap(),
        PiecewiseConstant::flat(0.0, 1.0, 0.2).unwrap(),
    )
    .unwrap();
    (sched, curves)
}

pub fn table2_curves() -> MarketCurves {
    MarketCurves::new(
        PiecewiseConstant::new(0.0, &steps(&TABLE2_DATES, &[1.0, 1.1, 1.2, 1.3, 1.2, 1.3, 1.4, 1.5])).unwrap(),
        PiecewiseConstant::flat(0.0, 2.0, 0.0).unwrap(),
        PiecewiseConstant::flat(0.0, 2.0, 0.25).unwrap(),
    )
    .unwrap()
}

/// Double knock-out with barriers on the first seven dates.
pub fn table2_terms(terminal: TerminalKind) -> BarrierTerms {
    let mut lower: Vec<Option<f64>> =
        [2200.0, 2100.0, 2000.0, 1900.0, 1800.0, 1700.0, 1600.0].iter().map(|&v| Some(v)).collect();
    let mut upper: Vec<Option<f64>> =
        [2800.0, 2900.0, 3000.0, 3100.0, 3200.0, 3300.0, 3400.0].iter().map(|&v| Some(v)).collect();
    lower.push(None);
    upper.push(None);
    BarrierTerms { t0: 0.0, spot: 2500.0, dates: TABLE2_DATES.to_vec(), lower, upper, terminal }
}

/// Double knock-out put struck at 2600.
pub fn table2() -> (ProductSchedule, MarketCurves) {
    (table2_terms(TerminalKind::Put { strike: 2600.0 }).knock_out().unwrap(), table2_curves())
}

pub fn european(terminal: TerminalKind, dates: &[f64], spot: f64) -> ProductSchedule {
    let none = vec![None; dates.len()];
    make_barrier(0.0, spot, dates, &none, &none, terminal).unwrap()
}

/// Standard normal CDF from the complementary error function.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes call and put with constant parameters.
pub fn black_scholes(call: bool, s: f64, k: f64, r: f64, q: f64, sigma: f64, t: f64) -> f64 {
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r - q) * t) / sd + 0.5 * sd;
    let d2 = d1 - sd;
    if call {
        s * (-q * t).exp() * phi(d1) - k * (-r * t).exp() * phi(d2)
    } else {
        k * (-r * t).exp() * phi(-d2) - s * (-q * t).exp() * phi(-d1)
    }
}
