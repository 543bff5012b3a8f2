//! Python bindings: market curves, product constructors, pricing, Monte
//! Carlo, the truncation bound and convergence studies.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use discrete_quad::bermudan::RootFinder;
use discrete_quad::config::{Instrument, RunConfig};
use discrete_quad::engine::{self, PricingOptions};
use discrete_quad::market_model::{self, PiecewiseConstant};
use discrete_quad::product::{self, Direction, OptionSide, TerminalKind};
use discrete_quad::validation;
use discrete_quad::PricingError;

fn to_py(e: PricingError) -> PyErr {
    match e {
        PricingError::Config(_) | PricingError::Domain(_) => PyValueError::new_err(e.to_string()),
        PricingError::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        PricingError::Internal(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn side(s: &str) -> PyResult<OptionSide> {
    match s {
        "call" => Ok(OptionSide::Call),
        "put" => Ok(OptionSide::Put),
        _ => Err(PyValueError::new_err(format!("side must be 'call' or 'put', got {s:?}"))),
    }
}

/// Piecewise-constant rate, yield and volatility curves (decimals, not percent).
#[pyclass(name = "MarketCurves", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMarketCurves {
    inner: market_model::MarketCurves,
}

#[pymethods]
impl PyMarketCurves {
    /// Curves from `[(end, value), ...]` segments starting at `start`.
    #[new]
    #[pyo3(signature = (start, rate, dividend_yield, volatility))]
    fn new(start: f64, rate: Vec<(f64, f64)>, dividend_yield: Vec<(f64, f64)>, volatility: Vec<(f64, f64)>) -> PyResult<Self> {
        let curve = |s: &[(f64, f64)]| PiecewiseConstant::new(start, s).map_err(to_py);
        let inner = market_model::MarketCurves::new(curve(&rate)?, curve(&dividend_yield)?, curve(&volatility)?)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn constant(start: f64, end: f64, rate: f64, dividend_yield: f64, volatility: f64) -> PyResult<Self> {
        let inner = market_model::MarketCurves::constant(start, end, rate, dividend_yield, volatility).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Time-averaged `(r, q, sigma)` over each interval between `dates`.
    fn interval_averages(&self, dates: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
        let p = market_model::reduce_curves(&self.inner, &dates).map_err(to_py)?;
        Ok(p.iter().map(|p| (p.r, p.q, p.sigma)).collect())
    }
}

/// A priceable product: observation dates, exercise levels and payoffs.
#[pyclass(name = "Product", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProduct {
    inner: Instrument,
}

impl PyProduct {
    fn schedule(&self) -> PyResult<&product::ProductSchedule> {
        match &self.inner {
            Instrument::Schedule(s) => Ok(s),
            Instrument::KnockIn(_) => Err(PyValueError::new_err("not available for knock-in products")),
        }
    }
}

fn terminal_kind(kind: &str, strike: Option<f64>, amount: Option<f64>) -> PyResult<TerminalKind> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| PyValueError::new_err(format!("terminal {kind:?} needs {name}")));
    Ok(match kind {
        "call" => TerminalKind::Call { strike: need(strike, "strike")? },
        "put" => TerminalKind::Put { strike: need(strike, "strike")? },
        "cash" => TerminalKind::Cash { amount: need(amount, "amount")? },
        "asset" => TerminalKind::Asset,
        _ => return Err(PyValueError::new_err(format!("unknown terminal payoff {kind:?}"))),
    })
}

#[pymethods]
impl PyProduct {
    /// Autocallable paying `coupons[m]` when the barrier is reached at date `m`.
    #[staticmethod]
    #[pyo3(signature = (t0, spot, dates, barriers, coupons, final_premium, direction = "up"))]
    fn autocallable(
        t0: f64,
        spot: f64,
        dates: Vec<f64>,
        barriers: Vec<f64>,
        coupons: Vec<f64>,
        final_premium: f64,
        direction: &str,
    ) -> PyResult<Self> {
        let direction = match direction {
            "up" => Direction::Up,
            "down" => Direction::Down,
            _ => return Err(PyValueError::new_err("direction must be 'up' or 'down'")),
        };
        let s = product::make_autocallable(t0, spot, &dates, &barriers, &coupons, final_premium, direction).map_err(to_py)?;
        Ok(Self { inner: Instrument::Schedule(s) })
    }

    /// Knock-out (or, with `knock_in=True`, knock-in) barrier option. `None`
    /// entries mean no barrier on that date.
    #[staticmethod]
    #[pyo3(signature = (t0, spot, dates, lower, upper, terminal, strike = None, amount = None, knock_in = false))]
    #[allow(clippy::too_many_arguments)]
    fn barrier(
        t0: f64,
        spot: f64,
        dates: Vec<f64>,
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
        terminal: &str,
        strike: Option<f64>,
        amount: Option<f64>,
        knock_in: bool,
    ) -> PyResult<Self> {
        let terms = product::BarrierTerms { t0, spot, dates, lower, upper, terminal: terminal_kind(terminal, strike, amount)? };
        let knock_out = terms.knock_out().map_err(to_py)?;
        let inner = if knock_in { Instrument::KnockIn(terms) } else { Instrument::Schedule(knock_out) };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn bermudan(t0: f64, spot: f64, dates: Vec<f64>, strike: f64, side: &str) -> PyResult<Self> {
        let s = product::make_bermudan(t0, spot, &dates, strike, self::side(side)?).map_err(to_py)?;
        Ok(Self { inner: Instrument::Schedule(s) })
    }

    #[getter]
    fn spot(&self) -> f64 {
        match &self.inner {
            Instrument::Schedule(s) => s.spot,
            Instrument::KnockIn(t) => t.spot,
        }
    }

    #[getter]
    fn dates(&self) -> Vec<f64> {
        match &self.inner {
            Instrument::Schedule(s) => s.legs.iter().map(|l| l.t).collect(),
            Instrument::KnockIn(t) => t.dates.clone(),
        }
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            Instrument::Schedule(s) => format!("Product(spot={}, dates={}, style={:?})", s.spot, s.legs.len(), s.style),
            Instrument::KnockIn(t) => format!("Product(spot={}, dates={}, knock_in)", t.spot, t.dates.len()),
        }
    }
}

/// Price with the quadrature engine. Returns a dict with the price, `log_c`,
/// `h` and, for Bermudan products, the solved exercise levels.
#[pyfunction]
#[pyo3(signature = (product, curves, n = 1001, log_c = None, root_finder = "bisection"))]
fn price<'py>(
    py: Python<'py>,
    product: &PyProduct,
    curves: &PyMarketCurves,
    n: usize,
    log_c: Option<f64>,
    root_finder: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let root_finder = match root_finder {
        "bisection" => RootFinder::Bisection,
        "secant" => RootFinder::Secant,
        _ => return Err(PyValueError::new_err("root_finder must be 'bisection' or 'secant'")),
    };
    let opts = PricingOptions { log_c, root_finder, keep_values: false };
    let out = PyDict::new(py);
    match &product.inner {
        Instrument::Schedule(s) => {
            let p = py.detach(|| engine::price_with(s, &curves.inner, n, &opts)).map_err(to_py)?;
            out.set_item("price", p.price)?;
            out.set_item("log_c", p.diagnostics.log_c)?;
            out.set_item("h", p.diagnostics.h)?;
            out.set_item("n", n)?;
            out.set_item("exercise_levels", p.exercise_levels)?;
        }
        Instrument::KnockIn(t) => {
            let v = py.detach(|| engine::price_knock_in(t, &curves.inner, n)).map_err(to_py)?;
            out.set_item("price", v)?;
            out.set_item("n", n)?;
        }
    }
    Ok(out)
}

/// Antithetic Monte Carlo estimate. Bermudan levels are solved first at `n` points.
#[pyfunction]
#[pyo3(signature = (product, curves, n_pairs, seed = 1, n = 1001))]
fn mc_price<'py>(
    py: Python<'py>,
    product: &PyProduct,
    curves: &PyMarketCurves,
    n_pairs: u64,
    seed: u64,
    n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let s = product.schedule()?;
    let mc = py
        .detach(|| {
            let frozen = if s.is_bermudan() {
                let levels = engine::price(s, &curves.inner, n)?.exercise_levels.unwrap_or_default();
                s.with_exercise_levels(&levels)?
            } else {
                s.clone()
            };
            validation::mc_price(&frozen, &curves.inner, n_pairs, seed)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("estimate", mc.estimate)?;
    out.set_item("std_error", mc.std_error)?;
    out.set_item("n_pairs", mc.n_pairs)?;
    out.set_item("seed", mc.seed)?;
    Ok(out)
}

/// Truncation-error bound; `log_c` defaults to the engine's half-width.
#[pyfunction]
#[pyo3(signature = (product, curves, log_c = None))]
fn truncation_bound<'py>(
    py: Python<'py>,
    product: &PyProduct,
    curves: &PyMarketCurves,
    log_c: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = product.schedule()?;
    let b = match log_c {
        Some(l) => validation::truncation_bound(s, &curves.inner, l),
        None => validation::default_truncation_bound(s, &curves.inner),
    }
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("A", b.a)?;
    out.set_item("B", b.b)?;
    out.set_item("R", b.r)?;
    out.set_item("Q", b.q)?;
    out.set_item("log_c", b.log_c)?;
    out.set_item("d_range", b.d_range)?;
    out.set_item("q0", b.q0)?;
    Ok(out)
}

/// Relative errors at each `n` against `reference_n`, with the fitted order.
#[pyfunction]
fn convergence_study<'py>(
    py: Python<'py>,
    product: &PyProduct,
    curves: &PyMarketCurves,
    n_list: Vec<usize>,
    reference_n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let s = product.schedule()?;
    let study = py
        .detach(|| validation::convergence_study(s, &curves.inner, &n_list, reference_n))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("reference", study.reference)?;
    out.set_item("reference_n", study.reference_n)?;
    let rows: Vec<(usize, f64, f64)> = study.rows.iter().map(|r| (r.n, r.value, r.rel_error)).collect();
    out.set_item("rows", rows)?;
    out.set_item("order", study.order)?;
    Ok(out)
}

/// Product and curves from a TOML run configuration.
#[pyfunction]
fn load_config(text: &str) -> PyResult<(PyProduct, PyMarketCurves, usize)> {
    let cfg = RunConfig::from_toml(text).map_err(to_py)?;
    let inner = cfg.instrument().map_err(to_py)?;
    let curves = cfg.curves().map_err(to_py)?;
    Ok((PyProduct { inner }, PyMarketCurves { inner: curves }, cfg.engine.n))
}

/// Black-Scholes call or put over one interval with constant parameters.
#[pyfunction]
fn black_scholes(side: &str, spot: f64, strike: f64, rate: f64, dividend_yield: f64, volatility: f64, t: f64) -> PyResult<f64> {
    let p = market_model::IntervalParams::new(rate, dividend_yield, volatility, t).map_err(to_py)?;
    Ok(discrete_quad::analytic::vanilla_price(self::side(side)?, spot, strike, &p))
}

#[pymodule]
#[pyo3(name = "discrete_quad")]
fn discrete_quad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarketCurves>()?;
    m.add_class::<PyProduct>()?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(mc_price, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(black_scholes, m)?)?;
    Ok(())
}
