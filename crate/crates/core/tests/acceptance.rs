//! Acceptance criteria, one report line each. Runs without the libtest
//! harness so the report is always printed; exits nonzero if any line fails.

mod common;

use std::time::Instant;

use common::*;
use discrete_quad::bermudan::RootFinder;
use discrete_quad::engine::{fft_convolve, price, price_knock_in, price_with, Pricing, PricingOptions};
use discrete_quad::market_model::{kernel_w, IntervalParams, MarketCurves};
use discrete_quad::product::{make_bermudan, OptionSide, ProductSchedule, TerminalKind, TerminalPayoff};
use discrete_quad::validation::{convergence_study, default_truncation_bound, mc_price, truncation_bound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn keep() -> PricingOptions {
    PricingOptions { keep_values: true, ..Default::default() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn table_reproduction(sched: &ProductSchedule, curves: &MarketCurves, ns: &[usize], reference_n: usize) -> Outcome {
    let reference = price(sched, curves, reference_n).map_err(|e| e.to_string())?.price;
    let mut worst: f64 = 0.0;
    let mut detail = format!("reference(N={reference_n}) = {reference:.12e};");
    for &n in ns {
        let e = rel(price(sched, curves, n).unwrap().price, reference);
        worst = worst.max(e);
        detail += &format!(" N={n}: {e:.2e}");
    }
    check(worst < 1e-5, detail)
}

fn criterion_1() -> Outcome {
    let (sched, curves) = table1();
    let errors = table_reproduction(&sched, &curves, &[501, 1001, 2001], 70001);
    let times: Vec<f64> = (0..15)
        .map(|_| {
            let t = Instant::now();
            price(&sched, &curves, 501).unwrap();
            t.elapsed().as_secs_f64()
        })
        .collect();
    let t = median(times);
    match errors {
        Ok(d) => check(t < 0.1, format!("{d}; runtime(N=501) = {:.3} ms", t * 1e3)),
        Err(d) => Err(format!("{d}; runtime(N=501) = {:.3} ms", t * 1e3)),
    }
}

fn criterion_2() -> Outcome {
    let (sched, curves) = table2();
    table_reproduction(&sched, &curves, &[701, 1401], 50001)
}

fn criterion_3() -> Outcome {
    let (s1, c1) = table1();
    let (s2, c2) = table2();
    let o1 = convergence_study(&s1, &c1, &[501, 1001, 2001, 4001], 70001).unwrap().order.unwrap_or(f64::NAN);
    let o2 = convergence_study(&s2, &c2, &[701, 1401, 2801], 50001).unwrap().order.unwrap_or(f64::NAN);
    // barrier-free call: errors against the closed form, above the round-off floor
    let curves = MarketCurves::constant(0.0, 1.0, 0.03, 0.01, 0.25).unwrap();
    let call = european(TerminalKind::Call { strike: 105.0 }, &[0.25, 0.5, 0.75, 1.0], 100.0);
    let exact = black_scholes(true, 100.0, 105.0, 0.03, 0.01, 0.25, 1.0);
    let rows: Vec<discrete_quad::validation::ConvergenceRow> = [61, 81, 101, 121]
        .iter()
        .map(|&n| {
            let value = price(&call, &curves, n).unwrap().price;
            discrete_quad::validation::ConvergenceRow { n, value, rel_error: rel(value, exact) }
        })
        .collect();
    let o3 = discrete_quad::validation::fitted_order(&rows).unwrap_or(f64::NAN);
    let in_band = |o: f64| (2.5..=4.5).contains(&o);
    check(
        in_band(o1) && in_band(o2) && o3 >= 3.5,
        format!("order table 1 = {o1:.2}, table 2 = {o2:.2}, European call = {o3:.2}"),
    )
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for (name, (sched, curves), seed) in [("table 1", table1(), 101), ("table 2", table2(), 202)] {
        let engine = price(&sched, &curves, 70001).unwrap().price;
        let mc = mc_price(&sched, &curves, 10_000_000, seed).unwrap();
        let z = (engine - mc.estimate) / mc.std_error;
        let rel_se = mc.std_error / mc.estimate.abs();
        let magnitude = rel_se.log10();
        ok &= z.abs() <= 3.0 && (-4.0..=-2.0).contains(&magnitude);
        detail += &format!(
            "{name}: engine {engine:.8e}, MC {:.8e} +- {:.2e} (z = {z:+.2}, rel se = {rel_se:.1e}); ",
            mc.estimate, mc.std_error
        );
    }
    check(ok, detail)
}

fn criterion_5() -> Outcome {
    let (r, q, sigma) = (0.03, 0.01, 0.25);
    let curves = MarketCurves::constant(0.0, 1.0, r, q, sigma).unwrap();
    let dates = [0.25, 0.5, 0.75, 1.0];
    let call = price(&european(TerminalKind::Call { strike: 105.0 }, &dates, 100.0), &curves, 4001).unwrap().price;
    let put = price(&european(TerminalKind::Put { strike: 95.0 }, &dates, 100.0), &curves, 4001).unwrap().price;
    let e_call = rel(call, black_scholes(true, 100.0, 105.0, r, q, sigma, 1.0));
    let e_put = rel(put, black_scholes(false, 100.0, 95.0, r, q, sigma, 1.0));
    // single-date cash-or-nothing call and asset-or-nothing put
    let digital = european(TerminalKind::Cash { amount: 1.0 }, &[1.0], 100.0);
    let mut cash_call = digital.clone();
    cash_call.legs[0].k_minus = 104.0;
    let mut asset_put = digital;
    asset_put.legs[0].k_plus = Some(97.0);
    asset_put.terminal = TerminalPayoff { a: 1.0, b: 0.0 };
    let sd = sigma;
    let d = |k: f64| ((100.0f64 / k).ln() + (r - q) + 0.5 * sd * sd) / sd;
    let cash_exact = (-r).exp() * phi(d(104.0) - sd);
    let asset_exact = 100.0 * (-q).exp() * phi(-d(97.0));
    let e_cash = rel(price(&cash_call, &curves, 11).unwrap().price, cash_exact);
    let e_asset = rel(price(&asset_put, &curves, 11).unwrap().price, asset_exact);
    check(
        e_call < 1e-8 && e_put < 1e-8 && e_cash < 1e-10 && e_asset < 1e-10,
        format!("call {e_call:.1e}, put {e_put:.1e}, cash digital {e_cash:.1e}, asset digital {e_asset:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for n in [33usize, 64, 257, 501] {
        for _ in 0..5 {
            let p = IntervalParams::new(rng.random_range(-0.02..0.08), rng.random_range(0.0..0.05),
                rng.random_range(0.1..0.6), rng.random_range(0.05..1.0)).unwrap();
            let log_c = rng.random_range(1.0..5.0);
            let h = 2.0 * log_c / (n - 1) as f64;
            let zhat: Vec<f64> = (0..2 * n - 1).map(|i| kernel_w(&p, -2.0 * log_c + i as f64 * h)).collect();
            let lo = rng.random_range(0..n / 2);
            let hi = rng.random_range(n / 2..n);
            let mut weighted = vec![0.0; 2 * n - 1];
            for v in &mut weighted[lo..=hi] {
                *v = rng.random_range(-1.0..1.0);
            }
            let fft = fft_convolve(&zhat, &weighted).unwrap();
            let direct: Vec<f64> = (0..n)
                .map(|j| (lo..=hi).map(|i| kernel_w(&p, (j as f64 - i as f64) * h) * weighted[i]).sum())
                .collect();
            let scale = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = fft.iter().zip(&direct).fold(0.0f64, |a, (f, d)| a.max((f - d).abs()));
            worst = worst.max(err / scale);
        }
    }
    let (sched, curves) = table1();
    let ns = [1001usize, 2001, 4001, 8001, 16001, 32001, 64001];
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let t = median(
                (0..5)
                    .map(|_| {
                        let t = Instant::now();
                        price(&sched, &curves, n).unwrap();
                        t.elapsed().as_secs_f64()
                    })
                    .collect(),
            );
            ((n as f64).ln(), t.ln())
        })
        .collect();
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    check(
        worst <= 1e-12 && slope < 2.0,
        format!("max FFT/direct relative deviation {worst:.1e}; runtime log-log slope {slope:.2} over N = 1001..64001"),
    )
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for (name, (sched, curves), n) in [("table 1", table1(), 501usize), ("table 2", table2(), 701)] {
        let bound = default_truncation_bound(&sched, &curves).unwrap();
        let limit = 1e-15 * (sched.spot + 1.0);
        let base = price(&sched, &curves, n).unwrap();
        let log_c = base.diagnostics.log_c;
        // twice the half-width at the same spacing
        let wide = price_with(&sched, &curves, 2 * n - 1, &PricingOptions { log_c: Some(2.0 * log_c), ..Default::default() })
            .unwrap();
        let same_h = (wide.diagnostics.h - base.diagnostics.h).abs() <= 1e-15 * base.diagnostics.h;
        let noise = 1e-12 * base.price.abs();
        let diff = (wide.price - base.price).abs();
        let halved = truncation_bound(&sched, &curves, 0.5 * log_c).unwrap().q0;
        ok &= bound.q0 <= limit && same_h && diff <= 10.0 * bound.q0 + noise && halved > bound.q0;
        detail += &format!(
            "{name}: Q0 = {:.1e} (limit {limit:.1e}), |price(2 logC) - price| = {diff:.1e}, Q0(logC/2) = {halved:.1e}; ",
            bound.q0
        );
    }
    check(ok, detail)
}

fn bermudan_setup() -> (ProductSchedule, MarketCurves) {
    let dates: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let curves = MarketCurves::constant(0.0, 1.0, 0.05, 0.0, 0.2).unwrap();
    (make_bermudan(0.0, 100.0, &dates, 100.0, OptionSide::Put).unwrap(), curves)
}

fn criterion_8() -> Outcome {
    let (sched, curves) = bermudan_setup();
    let n = 2001;
    let bis = price_with(&sched, &curves, n, &keep()).unwrap();
    let sec = price_with(&sched, &curves, n, &PricingOptions { root_finder: RootFinder::Secant, ..keep() }).unwrap();
    let european = black_scholes(false, 100.0, 100.0, 0.05, 0.0, 0.2, 1.0);
    let a = bis.price >= european;

    let levels = bis.exercise_levels.clone().unwrap();
    let grid_s = bis.grid_prices(100.0);
    let values = bis.values.as_ref().unwrap();
    let mut crossings = 0usize;
    let mut b = true;
    for v in values {
        let level = levels[v.date - 1];
        for (s, u) in grid_s.iter().zip(&v.u) {
            let above = *u > 100.0 - s;
            let expect = level.is_none_or(|k| *s > k);
            b &= above == expect;
            crossings += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut c = true;
    for _ in 0..10_000 {
        let v = &values[rng.random_range(0..values.len())];
        let (mut i, mut j) = (rng.random_range(0..n), rng.random_range(0..n));
        while i == j {
            j = rng.random_range(0..n);
        }
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let drop = v.u[i] - v.u[j];
        c &= drop > -1e-12 && drop < grid_s[j] - grid_s[i] + 1e-12;
    }

    let mut d = true;
    let mut max_gap: f64 = 0.0;
    for (x, y) in bis.diagnostics.steps.iter().zip(&sec.diagnostics.steps) {
        let (bx, by) = (x.boundary.unwrap(), y.boundary.unwrap());
        match (bx.level, by.level) {
            (Some(p), Some(q)) => {
                max_gap = max_gap.max((p - q).abs() / bx.tolerance);
                d &= (p - q).abs() <= 10.0 * bx.tolerance;
            }
            (None, None) => {}
            _ => d = false,
        }
    }

    let one = make_bermudan(0.0, 100.0, &[1.0], 100.0, OptionSide::Put).unwrap();
    let e_one = rel(price(&one, &curves, 501).unwrap().price, european);
    let e = e_one < 1e-9;

    check(
        a && b && c && d && e,
        format!(
            "(a) Bermudan {:.8} >= European {european:.8}: {a}; (b) single crossing on {crossings} grid values: {b}; \
             (c) near-contraction on 10000 pairs: {c}; (d) secant vs bisection max gap {max_gap:.2} tol: {d}; \
             (e) M = 1 vs European {e_one:.1e}: {e}",
            bis.price
        ),
    )
}

fn bounded(pricing: &Pricing, sched: &ProductSchedule, curves: &MarketCurves) -> (bool, usize) {
    let bound = truncation_bound(sched, curves, pricing.diagnostics.log_c).unwrap();
    let grid_s = pricing.grid_prices(sched.spot);
    let maturity = sched.maturity();
    let mut ok = pricing.price.abs() <= bound.value_bound(sched.t0, maturity, sched.spot) * (1.0 + 1e-12);
    let mut count = 1;
    for v in pricing.values.as_ref().unwrap() {
        for (s, u) in grid_s.iter().zip(&v.u) {
            ok &= u.abs() <= bound.value_bound(v.t, maturity, *s) * (1.0 + 1e-12) + 1e-300;
            count += 1;
        }
    }
    (ok, count)
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    let runs: Vec<(&str, (ProductSchedule, MarketCurves), Vec<usize>)> = vec![
        ("table 1", table1(), vec![501, 1001, 2001]),
        ("table 2", table2(), vec![701, 1401]),
        ("Bermudan put", bermudan_setup(), vec![2001]),
    ];
    for (name, (sched, curves), ns) in runs {
        let mut checked = 0;
        for n in ns {
            let p = price_with(&sched, &curves, n, &keep()).unwrap();
            let (good, count) = bounded(&p, &sched, &curves);
            ok &= good;
            checked += count;
        }
        detail += &format!("{name}: {checked} values; ");
    }
    check(ok, detail)
}

fn criterion_10() -> Outcome {
    let curves = table2_curves();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut detail = String::new();
    for terminal in [
        TerminalKind::Put { strike: 2600.0 },
        TerminalKind::Call { strike: 2400.0 },
        TerminalKind::Cash { amount: 100.0 },
        TerminalKind::Asset,
    ] {
        let terms = table2_terms(terminal);
        let vanilla = price(&terms.vanilla().unwrap(), &curves, 1401).unwrap().price;
        let knock_out = price(&terms.knock_out().unwrap(), &curves, 1401).unwrap().price;
        let knock_in = price_knock_in(&terms, &curves, 1401).unwrap();
        worst = worst.max(rel(knock_out + knock_in, vanilla));
        ok &= knock_out <= vanilla && knock_in >= -1e-12 * vanilla;
    }
    // knock-in of the put against a direct simulation of the knock-in payoff
    let terms = table2_terms(TerminalKind::Put { strike: 2600.0 });
    let knock_in = price_knock_in(&terms, &curves, 1401).unwrap();
    let (mc, se) = knock_in_mc(&terms, &curves, 2_000_000, 10);
    let z = (knock_in - mc) / se;
    ok &= worst < 1e-10 && z.abs() <= 4.0;
    detail += &format!("max parity deviation {worst:.1e}; put knock-in {knock_in:.6} vs simulated {mc:.6} (z = {z:+.2})");
    check(ok, detail)
}

/// Knock-in put simulated path by path: the put pays only if some barrier was breached.
fn knock_in_mc(terms: &discrete_quad::product::BarrierTerms, curves: &MarketCurves, pairs: usize, seed: u64) -> (f64, f64) {
    let TerminalKind::Put { strike } = terms.terminal else { unreachable!() };
    let mut dates = vec![terms.t0];
    dates.extend(&terms.dates);
    let params = discrete_quad::market_model::reduce_curves(curves, &dates).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut z = vec![0.0; params.len()];
    for _ in 0..pairs {
        for v in z.iter_mut() {
            // Box-Muller, independent of the library's inverse CDF
            let (u1, u2): (f64, f64) = (1.0 - rng.random::<f64>(), rng.random());
            *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
        let mut pair = 0.0;
        for sign in [1.0, -1.0] {
            let (mut s, mut df, mut hit) = (terms.spot, 1.0, false);
            for (m, p) in params.iter().enumerate() {
                s *= ((p.r - p.q - 0.5 * p.sigma * p.sigma) * p.dt + sign * p.sigma * p.dt.sqrt() * z[m]).exp();
                df *= (-p.r * p.dt).exp();
                hit |= terms.lower[m].is_some_and(|b| s <= b) || terms.upper[m].is_some_and(|b| s >= b);
            }
            if hit {
                pair += 0.5 * df * (strike - s).max(0.0);
            }
        }
        sum += pair;
        sum2 += pair * pair;
    }
    let n = pairs as f64;
    let mean = sum / n;
    (mean, ((sum2 / n - mean * mean) / (n - 1.0)).sqrt())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 table 1 reproduction", criterion_1),
        ("2 table 2 reproduction", criterion_2),
        ("3 convergence order", criterion_3),
        ("4 Monte Carlo cross-check", criterion_4),
        ("5 closed-form limits", criterion_5),
        ("6 FFT correctness and scaling", criterion_6),
        ("7 truncation bound", criterion_7),
        ("8 Bermudan invariants", criterion_8),
        ("9 boundedness", criterion_9),
        ("10 in-out parity", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {name} [{secs:.1}s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
