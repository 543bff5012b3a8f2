//! TOML run configuration shared by the command-line tool and the Python
//! bindings. Rates, yields and volatilities are given in percent.

use serde::{Deserialize, Serialize};

use crate::bermudan::RootFinder;
use crate::engine::PricingOptions;
use crate::error::{config, PricingError, Result};
use crate::market_model::{MarketCurves, PiecewiseConstant};
use crate::product::{
    make_autocallable, make_bermudan, BarrierTerms, Direction, ExerciseStyle, ObservationLeg,
    OptionSide, ProductSchedule, TerminalKind, TerminalPayoff,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub product: ProductConfig,
    pub market: MarketConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knock {
    #[default]
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProductConfig {
    /// Coupons are either listed or `coupon_rate * t`.
    Autocallable {
        direction: Direction,
        dates: Vec<f64>,
        barriers: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupons: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupon_rate: Option<f64>,
        final_premium: f64,
    },
    /// `lower = 0` and `upper = inf` mean no barrier on that date.
    Barrier {
        dates: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        terminal: TerminalKind,
        #[serde(default)]
        knock: Knock,
    },
    Bermudan { dates: Vec<f64>, strike: f64, side: OptionSide },
    /// Raw legs; `k_minus = 0` and `k_plus = inf` mean no level.
    Custom { legs: Vec<LegConfig>, terminal: TerminalPayoff },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegConfig {
    pub t: f64,
    #[serde(default)]
    pub k_minus: f64,
    #[serde(default = "infinity")]
    pub k_plus: f64,
    #[serde(default)]
    pub a_minus: f64,
    #[serde(default)]
    pub b_minus: f64,
    #[serde(default)]
    pub a_plus: f64,
    #[serde(default)]
    pub b_plus: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

/// A flat percentage or `[[end, value], ...]` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveConfig {
    Flat(f64),
    Segments(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub spot: f64,
    #[serde(default)]
    pub start: f64,
    pub rate_pct: CurveConfig,
    #[serde(default = "zero_curve")]
    pub yield_pct: CurveConfig,
    pub volatility_pct: CurveConfig,
}

fn zero_curve() -> CurveConfig {
    CurveConfig::Flat(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_c: Option<f64>,
    #[serde(default)]
    pub root_finder: RootFinder,
}

fn default_n() -> usize {
    1001
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { n: default_n(), log_c: None, root_finder: RootFinder::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_pairs")]
    pub pairs: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_pairs() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    20240101
}

impl Default for McConfig {
    fn default() -> Self {
        Self { pairs: default_pairs(), seed: default_seed() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Product as it will be priced.
#[derive(Debug, Clone, PartialEq)]
pub enum Instrument {
    Schedule(ProductSchedule),
    /// Priced as vanilla minus knock-out.
    KnockIn(BarrierTerms),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PricingError::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PricingError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| PricingError::Internal(e.to_string()))
    }

    fn last_date(&self) -> Option<f64> {
        match &self.product {
            ProductConfig::Autocallable { dates, .. }
            | ProductConfig::Barrier { dates, .. }
            | ProductConfig::Bermudan { dates, .. } => dates.last().copied(),
            ProductConfig::Custom { legs, .. } => legs.last().map(|l| l.t),
        }
    }

    pub fn curves(&self) -> Result<MarketCurves> {
        let m = &self.market;
        let end = self.last_date().ok_or_else(|| PricingError::Config("product.dates is empty".into()))?;
        let build = |name: &str, c: &CurveConfig| -> Result<PiecewiseConstant> {
            let curve = match c {
                CurveConfig::Flat(v) => PiecewiseConstant::flat(m.start, end, v / 100.0),
                CurveConfig::Segments(s) => {
                    let s: Vec<(f64, f64)> = s.iter().map(|&(t, v)| (t, v / 100.0)).collect();
                    PiecewiseConstant::new(m.start, &s)
                }
            };
            curve.map_err(|e| PricingError::Config(format!("market.{name}: {e}")))
        };
        MarketCurves::new(
            build("rate_pct", &m.rate_pct)?,
            build("yield_pct", &m.yield_pct)?,
            build("volatility_pct", &m.volatility_pct)?,
        )
        .map_err(|e| PricingError::Config(format!("market.volatility_pct: {e}")))
    }

    pub fn instrument(&self) -> Result<Instrument> {
        let (t0, spot) = (self.market.start, self.market.spot);
        let named = |field: &str, r: Result<ProductSchedule>| {
            r.map_err(|e| PricingError::Config(format!("product.{field}: {e}")))
        };
        let schedule = match &self.product {
            ProductConfig::Autocallable { direction, dates, barriers, coupons, coupon_rate, final_premium } => {
                let coupons = match (coupons, coupon_rate) {
                    (Some(c), None) => c.clone(),
                    (None, Some(rate)) => dates.iter().map(|t| rate * (t - t0)).collect(),
                    _ => return config("product: give exactly one of `coupons` and `coupon_rate`"),
                };
                named("barriers", make_autocallable(t0, spot, dates, barriers, &coupons, *final_premium, *direction))?
            }
            ProductConfig::Barrier { dates, lower, upper, terminal, knock } => {
                let lower: Vec<Option<f64>> = lower.iter().map(|&v| (v > 0.0).then_some(v)).collect();
                let upper: Vec<Option<f64>> = upper.iter().map(|&v| v.is_finite().then_some(v)).collect();
                let terms = BarrierTerms { t0, spot, dates: dates.clone(), lower, upper, terminal: *terminal };
                let knock_out = named("lower", terms.knock_out())?;
                if *knock == Knock::In {
                    return Ok(Instrument::KnockIn(terms));
                }
                knock_out
            }
            ProductConfig::Bermudan { dates, strike, side } => {
                named("strike", make_bermudan(t0, spot, dates, *strike, *side))?
            }
            ProductConfig::Custom { legs, terminal } => {
                let legs = legs
                    .iter()
                    .map(|l| ObservationLeg {
                        t: l.t,
                        k_minus: l.k_minus,
                        k_plus: l.k_plus.is_finite().then_some(l.k_plus),
                        a_minus: l.a_minus,
                        b_minus: l.b_minus,
                        a_plus: l.a_plus,
                        b_plus: l.b_plus,
                    })
                    .collect();
                named("legs", ProductSchedule::new(t0, spot, legs, *terminal, ExerciseStyle::Scheduled))?
            }
        };
        Ok(Instrument::Schedule(schedule))
    }

    pub fn pricing_options(&self) -> PricingOptions {
        PricingOptions { log_c: self.engine.log_c, root_finder: self.engine.root_finder, keep_values: false }
    }
}
