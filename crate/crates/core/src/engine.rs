//! Backward induction on a fixed uniform log-price grid.
//!
//! With `u_m(x) = V~_m(S0 e^x)` the continuation value one date earlier is
//!
//! ```text
//! u_{m-1}(x) = E_{m-1}(S0 e^x) + (e^{-beta tau} / (2 sqrt(pi tau))) * int_{B-}^{B+} w(x - z) u_m(z) dz
//! ```
//!
//! where `E` collects the closed-form exercise payoffs at `t_m` and
//! `[B-, B+]` is the continuation region of date `m` clipped to the grid. The
//! integral is split at the first and last grid nodes inside the region: the
//! grid part uses composite Simpson weights and is evaluated at every grid
//! node with one FFT convolution, the two leftover pieces use 3-point Simpson
//! rules through the region bound and the midpoint. Those four off-grid
//! values are carried from one date to the next.
//!
//! Grid indices in this module are zero-based.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::analytic::{early_exercise_value, normalize_terminal_leg, terminal_value_unchecked};
use crate::bermudan::{find_exercise_level, BoundarySolve, RootFinder};
use crate::error::{config, PricingError, Result};
use crate::market_model::{kernel_w, log_kernel_prefactor, reduce_curves, IntervalParams, MarketCurves};
use crate::product::{BarrierTerms, ExerciseStyle, ObservationLeg, ProductSchedule, TerminalPayoff};

/// Half-width `log C` of the log-price domain: ten standard deviations of
/// the most volatile interval over the whole horizon plus a drift margin.
pub fn truncation_half_width(intervals: &[IntervalParams], horizon: f64) -> f64 {
    let sigma0 = intervals.iter().map(|p| p.sigma).fold(0.0, f64::max);
    10.0 * sigma0 * horizon.sqrt() + (1.0 + 0.5 * sigma0 * sigma0) * horizon
}

/// Uniform grid `x_i = -log C + i h`, `i = 0..n`, on `[-log C, log C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub log_c: f64,
    pub h: f64,
    pub x: Vec<f64>,
}

pub fn build_grid(log_c: f64, n: usize) -> Result<Grid> {
    if n < 5 {
        return config(format!("grid needs at least 5 points, got {n}"));
    }
    if !(log_c > 0.0) || !log_c.is_finite() {
        return config(format!("log C must be positive, got {log_c}"));
    }
    let h = 2.0 * log_c / (n - 1) as f64;
    let half = (n - 1) as f64 / 2.0;
    let mut x: Vec<f64> = (0..n).map(|i| (i as f64 - half) * h).collect();
    x[0] = -log_c;
    x[n - 1] = log_c;
    Ok(Grid { n, log_c, h, x })
}

/// Integration window of one date on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepWindow {
    pub l_minus: f64,
    pub l_plus: f64,
    pub b_minus: f64,
    pub b_plus: f64,
    /// First node with `x >= b_minus`.
    pub p_minus: usize,
    /// Last node with `x < b_plus`.
    pub p_plus: usize,
    /// Pads the node range to an even number of Simpson panels.
    pub p0: usize,
    pub xi_minus: f64,
    pub xi_plus: f64,
}

impl StepWindow {
    /// Last node of the Simpson range, `p_plus + p0`.
    pub fn last(&self) -> usize {
        self.p_plus + self.p0
    }

    /// Signed lengths of the two edge intervals `[B-, x_{p-}]` and `[x_last, B+]`.
    fn edge_lengths(&self, grid: &Grid) -> (f64, f64) {
        (grid.x[self.p_minus] - self.b_minus, self.b_plus - grid.x[self.last()])
    }

    /// Log-prices where the next-earlier value function has to be known
    /// off the grid: `[B-, xi-, B+, xi+]`.
    pub fn off_grid_nodes(&self) -> [f64; 4] {
        [self.b_minus, self.xi_minus, self.b_plus, self.xi_plus]
    }
}

/// Window of the continuation region `(k_minus, k_plus)` clipped to
/// `[S0/C, S0 C]`, or `None` when the clipped region is empty.
pub fn locate_window(leg: &ObservationLeg, grid: &Grid, s0: f64) -> Option<StepWindow> {
    let c = grid.log_c.exp();
    let (lo_cut, hi_cut) = (s0 / c, s0 * c);
    if leg.k_minus >= hi_cut || leg.k_plus.is_some_and(|k| k <= lo_cut) {
        return None;
    }
    let (l_minus, b_minus) = if leg.k_minus <= lo_cut {
        (lo_cut, -grid.log_c)
    } else {
        (leg.k_minus, (leg.k_minus / s0).ln().max(-grid.log_c))
    };
    let (l_plus, b_plus) = match leg.k_plus {
        Some(k) if k < hi_cut => (k, (k / s0).ln().min(grid.log_c)),
        _ => (hi_cut, grid.log_c),
    };
    if !(l_minus < l_plus) || !(b_minus < b_plus) {
        return None;
    }
    let p_minus = grid.x.partition_point(|&x| x < b_minus);
    let p_plus = grid.x.partition_point(|&x| x < b_plus) - 1;
    let p0 = (p_plus as i64 - p_minus as i64).rem_euclid(2) as usize;
    let last = p_plus + p0;
    Some(StepWindow {
        l_minus,
        l_plus,
        b_minus,
        b_plus,
        p_minus,
        p_plus,
        p0,
        xi_minus: 0.5 * (grid.x[p_minus] + b_minus),
        xi_plus: 0.5 * (grid.x[last] + b_plus),
    })
}

/// Composite Simpson weights `1, 4, 2, ..., 4, 1` times `u` on nodes
/// `lo..=hi`. An empty range (`lo == hi`) carries no weight.
pub fn simpson_weighted_values(u: &[f64], lo: usize, hi: usize) -> Result<Vec<f64>> {
    if hi < lo || (hi - lo) % 2 != 0 || hi >= u.len() {
        return Err(PricingError::Internal(format!(
            "Simpson range {lo}..={hi} must have an even number of panels inside {} nodes",
            u.len()
        )));
    }
    if hi == lo {
        return Ok(vec![0.0]);
    }
    Ok((lo..=hi)
        .map(|i| {
            let w = if i == lo || i == hi {
                1.0
            } else if (i - lo) % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * u[i]
        })
        .collect())
}

/// Circular convolution against a kernel sampled at lags `-(n-1)h..(n-1)h`,
/// carried out with FFTs of a length `>= 2n - 1` so no lag wraps.
pub struct Convolver {
    n: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("n", &self.n).field("len", &self.len).finish()
    }
}

impl Convolver {
    pub fn new(n: usize) -> Self {
        Self::with_len(n, (2 * n - 1).next_power_of_two()).expect("power of two >= 2n - 1")
    }

    pub fn with_len(n: usize, len: usize) -> Result<Self> {
        if n == 0 || len < 2 * n - 1 {
            return Err(PricingError::Internal(format!(
                "transform length {len} would alias a grid of {n} points"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Transform of the kernel; `kernel(k)` is its value at lag `k` nodes.
    pub fn kernel_spectrum(&self, kernel: impl Fn(isize) -> f64) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for k in 0..self.n {
            buf[k].re = kernel(k as isize);
            if k > 0 {
                buf[self.len - k].re = kernel(-(k as isize));
            }
        }
        self.forward.process(&mut buf);
        buf
    }

    /// `out[j] = sum_i kernel(j - i) * weighted[i]` for `j, i < n`.
    pub fn convolve(&self, spectrum: &[Complex<f64>], weighted: &[f64]) -> Result<Vec<f64>> {
        if spectrum.len() != self.len || weighted.len() != self.n {
            return Err(PricingError::Internal("convolution length mismatch".into()));
        }
        let mut buf: Vec<Complex<f64>> =
            (0..self.len).map(|i| Complex::new(weighted.get(i).copied().unwrap_or(0.0), 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        Ok(buf[..self.n].iter().map(|c| c.re * scale).collect())
    }
}

/// Convolution in the `(2N-1)`-periodic indexing of the algorithm statement:
/// `kernel_zhat[k]` is the kernel at `-2 log C + k h` (lag `k - (N-1)`),
/// `weighted_hat` holds the Simpson-weighted values on nodes `0..N` and zeros
/// beyond. Returns the `N` values at the grid nodes.
pub fn fft_convolve(kernel_zhat: &[f64], weighted_hat: &[f64]) -> Result<Vec<f64>> {
    let len = kernel_zhat.len();
    if len % 2 == 0 || weighted_hat.len() != len {
        return Err(PricingError::Internal(format!(
            "expected two vectors of odd length 2N-1, got {} and {}",
            len,
            weighted_hat.len()
        )));
    }
    let n = (len + 1) / 2;
    if weighted_hat[n..].iter().any(|&v| v != 0.0) {
        return Err(PricingError::Internal("weighted values must vanish beyond the grid".into()));
    }
    let conv = Convolver::new(n);
    let spectrum = conv.kernel_spectrum(|k| kernel_zhat[(k + n as isize - 1) as usize]);
    conv.convolve(&spectrum, &weighted_hat[..n])
}

/// Discounted transition density in log-price: prefactor times `w`,
/// evaluated in log space.
#[derive(Debug, Clone, Copy)]
struct ScaledKernel {
    log_prefactor: f64,
    inv_4tau: f64,
    alpha: f64,
}

impl ScaledKernel {
    fn new(p: &IntervalParams) -> Self {
        Self { log_prefactor: log_kernel_prefactor(p), inv_4tau: 0.25 / p.tau, alpha: p.alpha }
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        (self.log_prefactor - d * d * self.inv_4tau - self.alpha * d).exp()
    }
}

/// Values of `u_m` at the window's off-grid nodes `B-, xi-, B+, xi+`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeValues {
    pub at_b_minus: f64,
    pub at_xi_minus: f64,
    pub at_b_plus: f64,
    pub at_xi_plus: f64,
}

/// A continuation value `u_m` on the grid, with its values at the off-grid
/// nodes of date `m`'s window.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub u: Vec<f64>,
    pub window: Option<StepWindow>,
    pub edges: EdgeValues,
}

/// Three-point Simpson rule over one edge interval of signed length.
#[derive(Debug, Clone, Copy)]
struct EdgeRule {
    sixth_len: f64,
    nodes: [f64; 3],
    values: [f64; 3],
}

impl EdgeRule {
    fn eval(&self, kernel: impl Fn(f64) -> f64, x: f64) -> f64 {
        let [a, m, b] = self.nodes;
        let [ua, um, ub] = self.values;
        self.sixth_len * (kernel(x - a) * ua + 4.0 * kernel(x - m) * um + kernel(x - b) * ub)
    }
}

fn edge_rules(vf: &ValueFunction, window: &StepWindow, grid: &Grid) -> (Option<EdgeRule>, Option<EdgeRule>) {
    let (len_lo, len_hi) = window.edge_lengths(grid);
    let lower = (len_lo != 0.0).then(|| EdgeRule {
        sixth_len: len_lo / 6.0,
        nodes: [window.b_minus, window.xi_minus, grid.x[window.p_minus]],
        values: [vf.edges.at_b_minus, vf.edges.at_xi_minus, vf.u[window.p_minus]],
    });
    let upper = (len_hi != 0.0).then(|| EdgeRule {
        sixth_len: len_hi / 6.0,
        nodes: [window.b_plus, window.xi_plus, grid.x[window.last()]],
        values: [vf.edges.at_b_plus, vf.edges.at_xi_plus, vf.u[window.last()]],
    });
    (lower, upper)
}

/// The two edge integrals of `w(x - z) u(z)` over `[B-, x_{p-}]` and
/// `[x_{p+ + p0}, B+]` by 3-point Simpson rules, using the raw weight `w`.
pub fn edge_integrals(
    vf: &ValueFunction,
    window: &StepWindow,
    params: &IntervalParams,
    grid: &Grid,
    x_eval: f64,
) -> (f64, f64) {
    let (lower, upper) = edge_rules(vf, window, grid);
    let w = |d: f64| kernel_w(params, d);
    (
        lower.map_or(0.0, |r| r.eval(w, x_eval)),
        upper.map_or(0.0, |r| r.eval(w, x_eval)),
    )
}

#[derive(Debug, Clone)]
struct Quadrature {
    window: StepWindow,
    /// Simpson-weighted values on `p_minus..=last`.
    weighted: Vec<f64>,
    lower: Option<EdgeRule>,
    upper: Option<EdgeRule>,
}

/// `u_{m-1}` as a function of log-price, built from `u_m`.
#[derive(Debug, Clone)]
struct Step<'g> {
    grid: &'g Grid,
    s0: f64,
    leg: ObservationLeg,
    params: IntervalParams,
    kernel: ScaledKernel,
    quad: Option<Quadrature>,
}

impl<'g> Step<'g> {
    fn new(grid: &'g Grid, s0: f64, vf: &ValueFunction, leg: ObservationLeg, params: IntervalParams) -> Result<Self> {
        let quad = match vf.window {
            None => None,
            Some(window) => {
                let weighted = simpson_weighted_values(&vf.u, window.p_minus, window.last())?;
                let (lower, upper) = edge_rules(vf, &window, grid);
                Some(Quadrature { window, weighted, lower, upper })
            }
        };
        Ok(Self { grid, s0, leg, params, kernel: ScaledKernel::new(&params), quad })
    }

    fn edges_at(&self, q: &Quadrature, x: f64) -> f64 {
        let k = |d| self.kernel.eval(d);
        q.lower.map_or(0.0, |r| r.eval(k, x)) + q.upper.map_or(0.0, |r| r.eval(k, x))
    }

    /// Direct O(N) evaluation at an arbitrary log-price.
    fn value_at(&self, x: f64) -> f64 {
        let mut v = early_exercise_value(self.s0 * x.exp(), &self.leg, &self.params);
        if let Some(q) = &self.quad {
            let xs = &self.grid.x[q.window.p_minus..=q.window.last()];
            let sum: f64 = xs.iter().zip(&q.weighted).map(|(&xi, &ui)| self.kernel.eval(x - xi) * ui).sum();
            v += self.grid.h / 3.0 * sum + self.edges_at(q, x);
        }
        v
    }

    /// Values at every grid node; the Simpson sums come from one FFT.
    fn values_on_grid(&self, conv: &Convolver) -> Result<Vec<f64>> {
        let grid = self.grid;
        let mut out: Vec<f64> = grid
            .x
            .iter()
            .map(|&x| early_exercise_value(self.s0 * x.exp(), &self.leg, &self.params))
            .collect();
        if let Some(q) = &self.quad {
            let h = grid.h;
            let spectrum = conv.kernel_spectrum(|k| self.kernel.eval(k as f64 * h));
            let mut weighted = vec![0.0; grid.n];
            weighted[q.window.p_minus..=q.window.last()].copy_from_slice(&q.weighted);
            let sums = conv.convolve(&spectrum, &weighted)?;
            for ((o, s), &x) in out.iter_mut().zip(sums).zip(&grid.x) {
                *o += h / 3.0 * s + self.edges_at(q, x);
            }
        }
        Ok(out)
    }
}

/// Continuation value at date `m` viewed as a function of log-price.
enum Continuation<'g> {
    /// One interval before maturity, in closed form.
    Terminal { s0: f64, lo: f64, hi: f64, leg: ObservationLeg, terminal: TerminalPayoff, params: IntervalParams },
    Quadrature(Step<'g>),
}

impl Continuation<'_> {
    fn value_at(&self, x: f64) -> f64 {
        match self {
            Continuation::Terminal { s0, lo, hi, leg, terminal, params } => {
                terminal_value_unchecked(s0 * x.exp(), *lo, *hi, leg, terminal, params)
            }
            Continuation::Quadrature(step) => step.value_at(x),
        }
    }
}

fn edge_values(window: Option<&StepWindow>, grid: &Grid, value_at: impl Fn(f64) -> f64) -> EdgeValues {
    let Some(w) = window else { return EdgeValues::default() };
    let (len_lo, len_hi) = w.edge_lengths(grid);
    let mut e = EdgeValues::default();
    if len_lo != 0.0 {
        e.at_b_minus = value_at(w.b_minus);
        e.at_xi_minus = value_at(w.xi_minus);
    }
    if len_hi != 0.0 {
        e.at_b_plus = value_at(w.b_plus);
        e.at_xi_plus = value_at(w.xi_plus);
    }
    e
}

fn check_finite(u: &[f64], m: usize) -> Result<f64> {
    let mut max = 0.0f64;
    for v in u {
        if !v.is_finite() {
            return Err(PricingError::Numeric(format!("non-finite continuation value at date {m}")));
        }
        max = max.max(v.abs());
    }
    Ok(max)
}

/// One backward step: `u_{m-1}` on the grid from `u_m`, with its off-grid
/// values at `next_leg`'s window when there is an earlier date.
pub fn step_back(
    vf: &ValueFunction,
    leg: &ObservationLeg,
    params: &IntervalParams,
    grid: &Grid,
    s0: f64,
    next_leg: Option<&ObservationLeg>,
) -> Result<ValueFunction> {
    let step = Step::new(grid, s0, vf, *leg, *params)?;
    let u = step.values_on_grid(&Convolver::new(grid.n))?;
    check_finite(&u, 0)?;
    let window = next_leg.and_then(|l| locate_window(l, grid, s0));
    let edges = edge_values(window.as_ref(), grid, |x| step.value_at(x));
    Ok(ValueFunction { u, window, edges })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PricingOptions {
    /// Overrides the default truncation half-width.
    pub log_c: Option<f64>,
    pub root_finder: RootFinder,
    /// Keep every intermediate continuation value on the grid.
    pub keep_values: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Observation date index `m` (1-based) whose window was integrated.
    pub date: usize,
    pub t: f64,
    pub window: Option<StepWindow>,
    /// `max |u_m|` over the grid.
    pub max_abs_value: f64,
    pub boundary: Option<BoundarySolve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub n: usize,
    pub log_c: f64,
    pub h: f64,
    pub intervals: Vec<IntervalParams>,
    pub steps: Vec<StepDiagnostics>,
}

/// Continuation value `V~_m` on the grid at observation date `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredValues {
    pub date: usize,
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pricing {
    pub price: f64,
    pub diagnostics: Diagnostics,
    /// Present when [`PricingOptions::keep_values`] is set, latest date first.
    pub values: Option<Vec<StoredValues>>,
    /// Solved exercise levels of a Bermudan product for dates `1..M`.
    pub exercise_levels: Option<Vec<Option<f64>>>,
}

impl Pricing {
    /// Grid nodes as prices, `S0 e^{x_i}`.
    pub fn grid_prices(&self, spot: f64) -> Vec<f64> {
        build_grid(self.diagnostics.log_c, self.diagnostics.n)
            .map(|g| g.x.iter().map(|x| spot * x.exp()).collect())
            .unwrap_or_default()
    }
}

pub fn price(schedule: &ProductSchedule, curves: &MarketCurves, n: usize) -> Result<Pricing> {
    price_with(schedule, curves, n, &PricingOptions::default())
}

pub fn price_with(
    schedule: &ProductSchedule,
    curves: &MarketCurves,
    n: usize,
    opts: &PricingOptions,
) -> Result<Pricing> {
    schedule.validate()?;
    let intervals = reduce_curves(curves, &schedule.dates())?;
    if schedule.is_bermudan() {
        if let Some((m, p)) = intervals.iter().enumerate().find(|(_, p)| p.q < 0.0) {
            return config(format!(
                "Bermudan exercise levels need a nonnegative yield; interval {} has {}",
                m + 1,
                p.q
            ));
        }
    }
    let log_c = opts
        .log_c
        .unwrap_or_else(|| truncation_half_width(&intervals, schedule.maturity() - schedule.t0));
    let grid = build_grid(log_c, n)?;
    let s0 = schedule.spot;
    let big_m = schedule.num_dates();
    let mut legs = schedule.legs.clone();

    let last = normalize_terminal_leg(&legs[big_m - 1], &schedule.terminal, s0);
    let mut cont = Continuation::Terminal {
        s0,
        lo: last.k_minus,
        hi: last.k_plus.expect("normalized"),
        leg: last,
        terminal: schedule.terminal,
        params: intervals[big_m - 1],
    };
    let mut diagnostics = Diagnostics { n, log_c, h: grid.h, intervals: intervals.clone(), steps: Vec::new() };
    let mut stored = opts.keep_values.then(Vec::new);
    let mut levels = schedule.is_bermudan().then(|| vec![None; big_m - 1]);

    if big_m == 1 {
        let price = cont.value_at(0.0);
        if !price.is_finite() {
            return Err(PricingError::Numeric("non-finite price".into()));
        }
        return Ok(Pricing { price, diagnostics, values: stored, exercise_levels: levels });
    }

    let conv = Convolver::new(n);
    let mut u: Vec<f64> = grid.x.iter().map(|&x| cont.value_at(x)).collect();
    let mut m = big_m - 1;
    loop {
        // `cont` and `u` hold V~_m
        let max_abs_value = check_finite(&u, m)?;
        let mut boundary = None;
        if let ExerciseStyle::Bermudan { side, strike } = schedule.style {
            let solve = find_exercise_level(
                |s| cont.value_at((s / s0).ln()),
                &u,
                &grid,
                s0,
                strike,
                side,
                opts.root_finder,
            )?;
            match side {
                crate::product::OptionSide::Put => legs[m - 1].k_minus = solve.level.unwrap_or(0.0),
                crate::product::OptionSide::Call => legs[m - 1].k_plus = solve.level,
            }
            if let Some(l) = levels.as_mut() {
                l[m - 1] = solve.level;
            }
            boundary = Some(solve);
        }
        let window = locate_window(&legs[m - 1], &grid, s0);
        let edges = edge_values(window.as_ref(), &grid, |x| cont.value_at(x));
        let vf = ValueFunction { u, window, edges };
        diagnostics.steps.push(StepDiagnostics { date: m, t: legs[m - 1].t, window, max_abs_value, boundary });
        let step = Step::new(&grid, s0, &vf, legs[m - 1], intervals[m - 1])?;
        if let Some(s) = stored.as_mut() {
            s.push(StoredValues { date: m, t: legs[m - 1].t, u: vf.u });
        }
        if m == 1 {
            let price = step.value_at(0.0);
            if !price.is_finite() {
                return Err(PricingError::Numeric("non-finite price".into()));
            }
            return Ok(Pricing { price, diagnostics, values: stored, exercise_levels: levels });
        }
        u = step.values_on_grid(&conv)?;
        cont = Continuation::Quadrature(step);
        m -= 1;
    }
}

/// Knock-in value by in-out parity: vanilla minus knock-out.
pub fn price_knock_in(terms: &BarrierTerms, curves: &MarketCurves, n: usize) -> Result<f64> {
    let vanilla = price(&terms.vanilla()?, curves, n)?.price;
    let knock_out = price(&terms.knock_out()?, curves, n)?.price;
    Ok(vanilla - knock_out)
}
