use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use discrete_quad::config::{Instrument, OutputFormat, RunConfig};
use discrete_quad::engine::{price_knock_in, price_with, truncation_half_width, Diagnostics, Pricing};
use discrete_quad::market_model::{reduce_curves, MarketCurves};
use discrete_quad::product::{BarrierTerms, ProductSchedule};
use discrete_quad::validation::{convergence_study, mc_price, truncation_bound};
use discrete_quad::PricingError;

#[derive(Parser)]
#[command(name = "dquad", version, about = "Quadrature pricer for discretely monitored options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the configured product.
    Price(Common),
    /// Relative errors over a list of grid sizes against a finer reference.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        reference_n: usize,
    },
    /// Compare the engine price with a Monte Carlo estimate (fails if |z| > 4).
    McCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pairs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Truncation-error bound for the configured half-width.
    Bound(Common),
    /// Delta, gamma and vega by central differences at each bump size.
    Greeks {
        #[command(flatten)]
        common: Common,
        /// Spot bumps relative to spot; the same numbers are used as absolute volatility bumps.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.005])]
        bumps: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Grid size; overrides the config.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

enum Failure {
    Check(String),
    Pricing(PricingError),
    Io(String),
}

impl From<PricingError> for Failure {
    fn from(e: PricingError) -> Self {
        Failure::Pricing(e)
    }
}

type CmdResult = Result<String, Failure>;

struct Run {
    cfg: RunConfig,
    curves: MarketCurves,
    instrument: Instrument,
    n: usize,
    format: Format,
    out: Option<PathBuf>,
}

impl Run {
    fn load(c: &Common) -> Result<Self, Failure> {
        let cfg = RunConfig::from_path(&c.config)?;
        let curves = cfg.curves()?;
        let instrument = cfg.instrument()?;
        let n = c.n.unwrap_or(cfg.engine.n);
        let format = c.format.unwrap_or_else(|| cfg.output.format.into());
        let out = c.out.clone().or_else(|| cfg.output.path.clone().map(PathBuf::from));
        Ok(Run { cfg, curves, instrument, n, format, out })
    }

    fn spot(&self) -> f64 {
        self.cfg.market.spot
    }

    /// Full pricing, or the parity value for a knock-in.
    fn price(&self, instrument: &Instrument, curves: &MarketCurves, n: usize) -> Result<(f64, Option<Pricing>), PricingError> {
        match instrument {
            Instrument::Schedule(s) => {
                let p = price_with(s, curves, n, &self.cfg.pricing_options())?;
                Ok((p.price, Some(p)))
            }
            Instrument::KnockIn(terms) => Ok((price_knock_in(terms, curves, n)?, None)),
        }
    }

    fn with_spot(&self, spot: f64) -> Result<Instrument, PricingError> {
        Ok(match &self.instrument {
            Instrument::Schedule(s) => Instrument::Schedule(s.with_spot(spot)?),
            Instrument::KnockIn(t) => Instrument::KnockIn(BarrierTerms { spot, ..t.clone() }),
        })
    }

    fn dates(&self) -> Vec<f64> {
        match &self.instrument {
            Instrument::Schedule(s) => s.dates(),
            Instrument::KnockIn(t) => std::iter::once(t.t0).chain(t.dates.iter().copied()).collect(),
        }
    }

    fn schedule(&self, what: &str) -> Result<&ProductSchedule, Failure> {
        match &self.instrument {
            Instrument::Schedule(s) => Ok(s),
            Instrument::KnockIn(_) => {
                Err(PricingError::Config(format!("product.knock: {what} is not available for knock-in products")).into())
            }
        }
    }
}

/// `v` with 12 significant digits.
fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, v)
    } else {
        format!("{v:.11e}")
    }
}

fn diagnostics_json(d: &Diagnostics, dates: &[f64]) -> Value {
    let intervals: Vec<Value> = d
        .intervals
        .iter()
        .zip(dates.windows(2))
        .map(|(p, w)| {
            json!({
                "start": w[0], "end": w[1],
                "rate": p.r, "rate_pct": p.r * 100.0,
                "yield": p.q, "yield_pct": p.q * 100.0,
                "volatility": p.sigma, "volatility_pct": p.sigma * 100.0,
            })
        })
        .collect();
    let steps: Vec<Value> = d
        .steps
        .iter()
        .map(|s| {
            json!({
                "date": s.date,
                "t": s.t,
                "window": s.window.map(|w| json!({
                    "L_minus": w.l_minus, "L_plus": w.l_plus, "B_minus": w.b_minus, "B_plus": w.b_plus,
                    "p_minus": w.p_minus, "p_plus": w.p_plus, "p0": w.p0,
                })),
                "max_abs_value": s.max_abs_value,
                "exercise_level": s.boundary.and_then(|b| b.level),
            })
        })
        .collect();
    json!({ "h": d.h, "intervals": intervals, "steps": steps })
}

fn cmd_price(run: &Run) -> CmdResult {
    let started = Instant::now();
    let (value, pricing) = run.price(&run.instrument, &run.curves, run.n)?;
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let intervals = reduce_curves(&run.curves, &run.dates())?;
    let log_c = match run.cfg.engine.log_c {
        Some(l) => l,
        None => truncation_half_width(&intervals, run.dates().last().unwrap() - run.dates()[0]),
    };
    let h = 2.0 * log_c / (run.n - 1) as f64;
    Ok(match run.format {
        Format::Text => {
            let mut s = format!("price: {}\nN: {}\nlogC: {log_c:.6}\nh: {h:.6e}\nruntime_ms: {runtime_ms:.3}\n", sig12(value), run.n);
            for (i, p) in intervals.iter().enumerate() {
                s += &format!(
                    "interval {}: r = {:.4}% ({:.6}), q = {:.4}% ({:.6}), sigma = {:.4}% ({:.6})\n",
                    i + 1, p.r * 100.0, p.r, p.q * 100.0, p.q, p.sigma * 100.0, p.sigma
                );
            }
            if let Some(levels) = pricing.as_ref().and_then(|p| p.exercise_levels.as_ref()) {
                for (m, l) in levels.iter().enumerate() {
                    s += &format!("exercise level {}: {}\n", m + 1, l.map_or("none".into(), sig12));
                }
            }
            s
        }
        Format::Json => {
            let diagnostics = match &pricing {
                Some(p) => diagnostics_json(&p.diagnostics, &run.dates()),
                None => json!({ "h": h, "knock_in": "vanilla minus knock-out" }),
            };
            let v = json!({ "price": value, "N": run.n, "logC": log_c, "runtime_ms": runtime_ms, "diagnostics": diagnostics });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Format::Csv => csv_text(&["N", "price", "logC", "h", "runtime_ms"], &[vec![
            run.n.to_string(), sig12(value), log_c.to_string(), h.to_string(), format!("{runtime_ms:.3}"),
        ]]),
    })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("csv");
    for r in rows {
        w.write_record(r).expect("csv");
    }
    String::from_utf8(w.into_inner().expect("csv")).expect("utf8")
}

fn cmd_converge(run: &Run, n_list: &[usize], reference_n: usize) -> CmdResult {
    let sched = run.schedule("converge")?;
    let study = convergence_study(sched, &run.curves, n_list, reference_n)?;
    let order = study.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
    Ok(match run.format {
        Format::Csv => {
            eprintln!("observed order: {order}");
            let rows: Vec<Vec<String>> = study
                .rows
                .iter()
                .map(|r| vec![r.n.to_string(), sig12(r.value), format!("{:.6e}", r.rel_error)])
                .collect();
            csv_text(&["N", "value", "rel_error"], &rows)
        }
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&study).expect("json")),
        Format::Text => {
            let mut s = format!("reference N = {reference_n}: {}\n{:>8}  {:>20}  {:>12}\n", sig12(study.reference), "N", "value", "rel_error");
            for r in &study.rows {
                s += &format!("{:>8}  {:>20}  {:>12.4e}\n", r.n, sig12(r.value), r.rel_error);
            }
            s + &format!("observed order: {order}\n")
        }
    })
}

fn cmd_mc_check(run: &Run, pairs: Option<u64>, seed: Option<u64>) -> CmdResult {
    let sched = run.schedule("mc-check")?;
    let pricing = price_with(sched, &run.curves, run.n, &run.cfg.pricing_options())?;
    let simulated = match &pricing.exercise_levels {
        Some(levels) => sched.with_exercise_levels(levels)?,
        None => sched.clone(),
    };
    let pairs = pairs.unwrap_or(run.cfg.mc.pairs);
    let seed = seed.unwrap_or(run.cfg.mc.seed);
    let mc = mc_price(&simulated, &run.curves, pairs, seed)?;
    let diff = pricing.price - mc.estimate;
    let z = if mc.std_error > 0.0 { diff / mc.std_error } else if diff.abs() <= 1e-12 * mc.estimate.abs().max(1.0) { 0.0 } else { f64::INFINITY };
    let report = match run.format {
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({
                "price": pricing.price, "N": run.n, "mc_estimate": mc.estimate, "std_error": mc.std_error,
                "pairs": mc.n_pairs, "seed": mc.seed, "z": z,
            }))
            .expect("json")
        ),
        Format::Csv => csv_text(&["N", "price", "mc_estimate", "std_error", "pairs", "seed", "z"], &[vec![
            run.n.to_string(), sig12(pricing.price), sig12(mc.estimate), format!("{:.6e}", mc.std_error),
            pairs.to_string(), seed.to_string(), format!("{z:.4}"),
        ]]),
        Format::Text => format!(
            "engine price (N = {}): {}\nMonte Carlo ({} pairs, seed {}): {} +- {:.3e}\nz: {z:.4}\n",
            run.n, sig12(pricing.price), mc.n_pairs, mc.seed, sig12(mc.estimate), mc.std_error
        ),
    };
    if z.abs() <= 4.0 {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

fn cmd_bound(run: &Run) -> CmdResult {
    let sched = run.schedule("bound")?;
    let intervals = reduce_curves(&run.curves, &sched.dates())?;
    let log_c = run.cfg.engine.log_c.unwrap_or_else(|| truncation_half_width(&intervals, sched.maturity() - sched.t0));
    let b = truncation_bound(sched, &run.curves, log_c)?;
    Ok(match run.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&b).expect("json")),
        Format::Csv => csv_text(&["logC", "A", "B", "R", "Q", "d_min", "d_max", "Q0"], &[vec![
            log_c.to_string(), b.a.to_string(), b.b.to_string(), b.r.to_string(), b.q.to_string(),
            b.d_range.map_or(String::new(), |d| d.0.to_string()), b.d_range.map_or(String::new(), |d| d.1.to_string()),
            format!("{:e}", b.q0),
        ]]),
        Format::Text => {
            let d = b.d_range.map_or("none".into(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
            format!(
                "logC: {log_c:.6}\nA: {}\nB: {}\nR: {}\nQ: {}\nd3..d6 range: {d}\nQ0(S0): {:e}\nrelative to S0 + 1: {:e}\n",
                b.a, b.b, b.r, b.q, b.q0, b.q0 / (sched.spot + 1.0)
            )
        }
    })
}

struct Greeks {
    bump: f64,
    delta: f64,
    gamma: f64,
    vega: f64,
}

fn cmd_greeks(run: &Run, bumps: &[f64]) -> CmdResult {
    if bumps.is_empty() || bumps.iter().any(|b| !(*b > 0.0)) {
        return Err(PricingError::Config("--bumps must be positive".into()).into());
    }
    let s0 = run.spot();
    let (base, _) = run.price(&run.instrument, &run.curves, run.n)?;
    let mut out = Vec::new();
    for &b in bumps {
        let ds = b * s0;
        let (up, _) = run.price(&run.with_spot(s0 + ds)?, &run.curves, run.n)?;
        let (down, _) = run.price(&run.with_spot(s0 - ds)?, &run.curves, run.n)?;
        let (vup, _) = run.price(&run.instrument, &run.curves.with_volatility_bump(b)?, run.n)?;
        let (vdown, _) = run.price(&run.instrument, &run.curves.with_volatility_bump(-b)?, run.n)?;
        out.push(Greeks {
            bump: b,
            delta: (up - down) / (2.0 * ds),
            gamma: (up - 2.0 * base + down) / (ds * ds),
            vega: (vup - vdown) / (2.0 * b),
        });
    }
    // Richardson extrapolation of the two smallest bumps; central differences are second order
    let richardson = if out.len() >= 2 {
        let (a, c) = (&out[out.len() - 2], &out[out.len() - 1]);
        let w = (a.bump / c.bump).powi(2);
        let ex = |x: f64, y: f64| (w * y - x) / (w - 1.0);
        Some((ex(a.delta, c.delta), ex(a.gamma, c.gamma), ex(a.vega, c.vega), (a.delta - c.delta).abs(), (a.gamma - c.gamma).abs()))
    } else {
        None
    };
    Ok(match run.format {
        Format::Json => {
            let rows: Vec<Value> =
                out.iter().map(|g| json!({"bump": g.bump, "delta": g.delta, "gamma": g.gamma, "vega": g.vega})).collect();
            let r = richardson.map(|(d, g, v, dd, dg)| {
                json!({"delta": d, "gamma": g, "vega": v, "delta_spread": dd, "gamma_spread": dg})
            });
            format!("{}\n", serde_json::to_string_pretty(&json!({"price": base, "N": run.n, "bumps": rows, "richardson": r})).expect("json"))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = out
                .iter()
                .map(|g| vec![g.bump.to_string(), sig12(g.delta), sig12(g.gamma), sig12(g.vega)])
                .collect();
            csv_text(&["bump", "delta", "gamma", "vega"], &rows)
        }
        Format::Text => {
            let mut s = format!("price: {}\n", sig12(base));
            for g in &out {
                s += &format!("bump {}: delta {}, gamma {}, vega {}\n", g.bump, sig12(g.delta), sig12(g.gamma), sig12(g.vega));
            }
            if let Some((d, g, v, dd, dg)) = richardson {
                s += &format!(
                    "richardson: delta {}, gamma {}, vega {}; bump spread delta {dd:.3e}, gamma {dg:.3e}\n",
                    sig12(d), sig12(g), sig12(v)
                );
            }
            s
        }
    })
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Price(c) | Command::Bound(c) => c,
        Command::Converge { common, .. } | Command::McCheck { common, .. } | Command::Greeks { common, .. } => common,
    };
    let result = Run::load(common).and_then(|run| {
        let text = match &cli.command {
            Command::Price(_) => cmd_price(&run),
            Command::Converge { n_list, reference_n, .. } => cmd_converge(&run, n_list, *reference_n),
            Command::McCheck { pairs, seed, .. } => cmd_mc_check(&run, *pairs, *seed),
            Command::Bound(_) => cmd_bound(&run),
            Command::Greeks { bumps, .. } => cmd_greeks(&run, bumps),
        };
        match text {
            Ok(t) => emit(&t, run.out.as_ref()),
            Err(Failure::Check(t)) => {
                emit(&t, run.out.as_ref())?;
                Err(Failure::Check("Monte Carlo estimate differs by more than 4 standard errors".into()))
            }
            Err(e) => Err(e),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Pricing(e @ (PricingError::Config(_) | PricingError::Domain(_)))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Pricing(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
