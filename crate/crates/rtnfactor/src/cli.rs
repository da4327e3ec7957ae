//! Command-line frontend wiring ingest → decomposition → analysis and
//! optimization, with deterministic file outputs.
//!
//! Input is a price file (`date` header), a returns file (`period_end`
//! header), or a decomposition JSON (`.json` or a `{`-leading stream);
//! `-` reads stdin. Exit codes: 0 success, 2 validation failure,
//! 3 numerical failure.

use crate::analysis::{self, Portfolio};
use crate::decomp::{self, Decomposition};
use crate::ingest::{PricePanel, ReturnPanel, WeightSpec};
use crate::optimizer::{self, FactorRows};
use crate::{Error, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use std::io::{IsTerminal, Read, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "rtnfactor",
    about = "Decompose periodic returns into orthogonal risk factors and compute portfolio paths",
    version
)]
pub struct Cli {
    /// Print a version banner to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct InputOpts {
    /// Price file, returns file, or decomposition JSON; `-` for stdin.
    #[arg(short, long)]
    pub input: String,
    /// Normalize prices so this date's value equals the level (price input).
    #[arg(long)]
    pub anchor: Option<NaiveDate>,
    /// Normalization level used with --anchor.
    #[arg(long, default_value_t = 100.0)]
    pub level: f64,
    /// Keep only the last M return periods.
    #[arg(long)]
    pub window: Option<usize>,
    /// Restrict to a comma-separated ticker subset.
    #[arg(long)]
    pub tickers: Option<String>,
    /// Weight system: uniform, late-heavy[:h,t,hl,tl], a comma list, or @file.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    /// Periods per unit time (e.g. 252 market days per year).
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Args, Clone)]
pub struct OutputOpt {
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Form normalized linear returns from a price file.
    Returns {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Use comma instead of tab as the output delimiter.
        #[arg(long)]
        csv: bool,
        /// Also write the weight vector to this path.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Decompose returns into orthogonal risk factors (JSON export).
    Decompose {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Print the fixed-layout table as well.
        #[arg(long)]
        table: bool,
    },
    /// Minimum-variance corner portfolios (CSV export).
    Frontier {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Number of factor rows in the covariance (default: all).
        #[arg(long)]
        rows: Option<usize>,
        /// Keep only the efficient part, from p_E to the maximum-e vertex.
        #[arg(long)]
        efficient: bool,
    },
    /// Minimum-|y| path from the two-row factor projection (CSV export).
    Minypath {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Productive-risk range as `lo,hi` (default: full attainable range).
        #[arg(long)]
        x_range: Option<String>,
    },
    /// Plot data: factor-plane coordinates of securities and portfolios.
    Project {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Portfolio `T1=w1,T2=w2,…`; may be repeated.
        #[arg(long)]
        portfolio: Vec<String>,
        /// Negate the y column for visual parity with upward-y plots.
        #[arg(long)]
        flip_y: bool,
    },
    /// Risk components of one portfolio.
    Riskof {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        /// Portfolio `T1=w1,T2=w2,…`.
        #[arg(long)]
        portfolio: String,
        /// Output format (default: table on a terminal, json otherwise).
        #[arg(long)]
        format: Option<Format>,
    },
    /// Variance breakdown of the whole system.
    Variance {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        output: OutputOpt,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Share counts per 100 currency units: s_j = 100 p_j / a_j.
    Shares {
        /// Price file providing the closing prices a_j.
        #[arg(short, long)]
        input: String,
        #[command(flatten)]
        output: OutputOpt,
        /// Portfolio `T1=w1,T2=w2,…`.
        #[arg(long)]
        portfolio: String,
        /// Pricing date (default: last date in the file).
        #[arg(long)]
        date: Option<NaiveDate>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

/// Runs the CLI and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if cli.verbose {
        eprintln!("rtnfactor {}", env!("CARGO_PKG_VERSION"));
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Returns {
            input,
            output,
            csv,
            weights_out,
        } => cmd_returns(&input, &output, csv, weights_out.as_deref()),
        Command::Decompose {
            input,
            output,
            table,
        } => cmd_decompose(&input, &output, table),
        Command::Frontier {
            input,
            output,
            rows,
            efficient,
        } => cmd_frontier(&input, &output, rows, efficient),
        Command::Minypath {
            input,
            output,
            x_range,
        } => cmd_minypath(&input, &output, x_range.as_deref()),
        Command::Project {
            input,
            output,
            portfolio,
            flip_y,
        } => cmd_project(&input, &output, &portfolio, flip_y),
        Command::Riskof {
            input,
            output,
            portfolio,
            format,
        } => cmd_riskof(&input, &output, &portfolio, format),
        Command::Variance {
            input,
            output,
            format,
        } => cmd_variance(&input, &output, format),
        Command::Shares {
            input,
            output,
            portfolio,
            date,
        } => cmd_shares(&input, &output, &portfolio, date),
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Error::Validation(format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{path}: {e}")))
    }
}

fn write_output(out: &OutputOpt, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::Validation(format!("stdout: {e}")))?;
            Ok(())
        }
    }
}

enum InputKind {
    Prices(PricePanel),
    Returns(ReturnPanel),
    Factors(Decomposition),
}

fn classify_input(path: &str, text: &str) -> Result<InputKind> {
    let trimmed = text.trim_start();
    if path.ends_with(".json") || trimmed.starts_with('{') {
        return Ok(InputKind::Factors(Decomposition::from_json(text)?));
    }
    let header = text.lines().next().unwrap_or("");
    let first = header
        .split(['\t', ','])
        .next()
        .unwrap_or("")
        .trim();
    match first {
        "date" => Ok(InputKind::Prices(PricePanel::parse(text)?)),
        "period_end" => Ok(InputKind::Returns(ReturnPanel::parse(text)?)),
        other => Err(Error::Validation(format!(
            "cannot classify input: first header field {other:?} (expected date, period_end, or JSON)"
        ))),
    }
}

fn ticker_list(arg: &Option<String>) -> Option<Vec<String>> {
    arg.as_ref().map(|s| {
        s.split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect()
    })
}

/// Builds a weighted return panel from price or returns input.
fn load_panel(opts: &InputOpts) -> Result<ReturnPanel> {
    let text = read_input(&opts.input)?;
    let panel = match classify_input(&opts.input, &text)? {
        InputKind::Prices(p) => {
            let p = match ticker_list(&opts.tickers) {
                Some(t) => p.select(&t)?,
                None => p,
            };
            let p = match opts.anchor {
                Some(anchor) => p.normalize(anchor, opts.level)?,
                None => p,
            };
            p.linear_returns()?
        }
        InputKind::Returns(r) => {
            if opts.anchor.is_some() {
                return Err(Error::Validation(
                    "--anchor applies to price input only".into(),
                ));
            }
            match ticker_list(&opts.tickers) {
                Some(t) => r.select(&t)?,
                None => r,
            }
        }
        InputKind::Factors(_) => {
            return Err(Error::Validation(
                "this command needs price or returns input, not a decomposition file".into(),
            ))
        }
    };
    let panel = match opts.window {
        Some(m) => panel.window_last(m)?,
        None => panel,
    };
    let spec = WeightSpec::parse(&opts.weights)?;
    panel.with_weights(&spec)?.with_rho(opts.rho)
}

/// Loads a decomposition either directly from a factor file or by running
/// the pipeline on price/returns input.
fn load_decomposition(opts: &InputOpts) -> Result<Decomposition> {
    let text = read_input(&opts.input)?;
    match classify_input(&opts.input, &text)? {
        InputKind::Factors(d) => {
            if opts.window.is_some() || opts.anchor.is_some() || opts.tickers.is_some() {
                return Err(Error::Validation(
                    "pipeline flags do not apply to a decomposition file".into(),
                ));
            }
            Ok(d)
        }
        _ => decomp::decompose(&load_panel(opts)?),
    }
}

fn cmd_returns(
    opts: &InputOpts,
    out: &OutputOpt,
    csv: bool,
    weights_out: Option<&std::path::Path>,
) -> Result<()> {
    let panel = load_panel(opts)?;
    let delim = if csv { ',' } else { '\t' };
    write_output(out, &panel.to_delimited(delim))?;
    if let Some(path) = weights_out {
        std::fs::write(path, panel.weights_file())
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_decompose(opts: &InputOpts, out: &OutputOpt, table: bool) -> Result<()> {
    let d = load_decomposition(opts)?;
    if d.eflag() {
        eprintln!("note: eflag is true; E = e0 + eF*x holds only approximately");
    }
    let json = d.to_json();
    match (&out.output, table) {
        (Some(_), true) => {
            write_output(out, &json)?;
            print!("{}", analysis::render_table(&d));
        }
        (None, true) => print!("{}", analysis::render_table(&d)),
        _ => {
            write_output(out, &json)?;
            if out.output.is_none() {
                println!();
            }
        }
    }
    Ok(())
}

fn cmd_frontier(
    opts: &InputOpts,
    out: &OutputOpt,
    rows: Option<usize>,
    efficient: bool,
) -> Result<()> {
    let d = load_decomposition(opts)?;
    let rows = match rows {
        Some(k) => FactorRows::First(k),
        None => FactorRows::All,
    };
    let path = optimizer::minvar_corners(&d, rows)?;
    let path = if efficient { path.efficient() } else { path };
    write_output(out, &optimizer::path_to_csv(&d, &path))
}

fn cmd_minypath(opts: &InputOpts, out: &OutputOpt, x_range: Option<&str>) -> Result<()> {
    let d = load_decomposition(opts)?;
    let range = match x_range {
        Some(s) => {
            let (a, b) = s
                .split_once(',')
                .ok_or_else(|| Error::InvalidRange(format!("expected lo,hi: {s:?}")))?;
            let lo: f64 = a
                .trim()
                .parse()
                .map_err(|e| Error::InvalidRange(format!("{a:?}: {e}")))?;
            let hi: f64 = b
                .trim()
                .parse()
                .map_err(|e| Error::InvalidRange(format!("{b:?}: {e}")))?;
            (lo, hi)
        }
        None => {
            let x = d.factors().row(0);
            (
                x.iter().cloned().fold(f64::INFINITY, f64::min),
                x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let path = optimizer::min_abs_y_path(&d, range)?;
    write_output(out, &optimizer::path_to_csv(&d, &path))
}

fn parse_portfolios(specs: &[String], d: &Decomposition) -> Result<Vec<(String, Portfolio)>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((format!("P{}", i + 1), Portfolio::parse(s, d.tickers())?)))
        .collect()
}

fn cmd_project(
    opts: &InputOpts,
    out: &OutputOpt,
    portfolios: &[String],
    flip_y: bool,
) -> Result<()> {
    let d = load_decomposition(opts)?;
    let named = parse_portfolios(portfolios, &d)?;
    write_output(out, &analysis::plot_data_csv(&d, &named, flip_y)?)
}

fn pick_format(format: Option<Format>) -> Format {
    match format {
        Some(f) => f,
        None => {
            if std::io::stdout().is_terminal() {
                Format::Table
            } else {
                Format::Json
            }
        }
    }
}

fn cmd_riskof(opts: &InputOpts, out: &OutputOpt, portfolio: &str, format: Option<Format>) -> Result<()> {
    let d = load_decomposition(opts)?;
    let p = Portfolio::parse(portfolio, d.tickers())?;
    let rc = analysis::risk_decomposition(&d, &p)?;
    let text = match pick_format(format) {
        Format::Json => format!(
            "{}\n",
            serde_json::json!({
                "e": rc.e,
                "systemic": rc.systemic,
                "productive": rc.productive,
                "major_nonproductive": rc.major_nonproductive,
                "other_nonproductive": rc.other_nonproductive,
                "total": rc.total,
            })
        ),
        Format::Csv => format!(
            "component,value\ne,{}\nsystemic,{}\nproductive,{}\nmajor_nonproductive,{}\nother_nonproductive,{}\ntotal,{}\n",
            rc.e, rc.systemic, rc.productive, rc.major_nonproductive, rc.other_nonproductive, rc.total
        ),
        Format::Table => format!(
            "expected return (e)          {:>10.2}\n\
             systemic risk (f0)           {:>10.2}\n\
             productive risk (|x|)        {:>10.2}\n\
             major nonproductive (|y|)    {:>10.2}\n\
             other nonproductive          {:>10.2}\n\
             total risk (sigma)           {:>10.2}\n",
            rc.e, rc.systemic, rc.productive, rc.major_nonproductive, rc.other_nonproductive, rc.total
        ),
    };
    write_output(out, &text)
}

fn cmd_variance(opts: &InputOpts, out: &OutputOpt, format: Option<Format>) -> Result<()> {
    let d = load_decomposition(opts)?;
    let bd = analysis::variance_breakdown(&d);
    let pct = bd.percentages();
    let text = match pick_format(format) {
        Format::Json => {
            let per: Vec<serde_json::Value> = d
                .tickers()
                .iter()
                .zip(&bd.per_security)
                .map(|(t, v)| serde_json::json!({"ticker": t, "nonsystemic_variance": v}))
                .collect();
            format!(
                "{}\n",
                serde_json::json!({
                    "systemic": bd.systemic,
                    "productive": bd.productive,
                    "major_nonproductive": bd.major_nonproductive,
                    "other_nonproductive": bd.other_nonproductive,
                    "total": bd.total,
                    "per_security": per,
                })
            )
        }
        Format::Csv => {
            let mut s = String::from("component,variance,percent\n");
            s.push_str(&format!("systemic,{},{}\n", bd.systemic, pct[0]));
            s.push_str(&format!("productive,{},{}\n", bd.productive, pct[1]));
            s.push_str(&format!(
                "major_nonproductive,{},{}\n",
                bd.major_nonproductive, pct[2]
            ));
            s.push_str(&format!(
                "other_nonproductive,{},{}\n",
                bd.other_nonproductive, pct[3]
            ));
            s.push_str(&format!("total,{},100\n", bd.total));
            s
        }
        Format::Table => format!(
            "systemic variance (n*f0^2)     {:>10.2} {:>6.1}%\n\
             productive variance            {:>10.2} {:>6.1}%\n\
             major nonproductive variance   {:>10.2} {:>6.1}%\n\
             other nonproductive variance   {:>10.2} {:>6.1}%\n\
             total variance                 {:>10.2} {:>6.1}%\n",
            bd.systemic,
            pct[0],
            bd.productive,
            pct[1],
            bd.major_nonproductive,
            pct[2],
            bd.other_nonproductive,
            pct[3],
            bd.total,
            100.0
        ),
    };
    write_output(out, &text)
}

fn cmd_shares(
    input: &str,
    out: &OutputOpt,
    portfolio: &str,
    date: Option<NaiveDate>,
) -> Result<()> {
    let text = read_input(input)?;
    let prices = PricePanel::parse(&text)?;
    let p = Portfolio::parse(portfolio, prices.tickers())?;
    let row = match date {
        Some(d) => prices
            .dates()
            .iter()
            .position(|&x| x == d)
            .ok_or_else(|| Error::MissingAnchor(d.to_string()))?,
        None => prices.dates().len() - 1,
    };
    let mut s = String::from("ticker,shares\n");
    for (j, t) in prices.tickers().iter().enumerate() {
        let shares = 100.0 * p.weights()[j] / prices.prices().get(row, j);
        s.push_str(&format!("{t},{shares}\n"));
    }
    write_output(out, &s)
}
