//! Reporting artifacts derived from a decomposition: variance breakdowns,
//! factor-plane projections of portfolios, relative risk components, and the
//! fixed-layout text table.

use crate::decomp::Decomposition;
use crate::mat;
use crate::{Error, Result};

/// A point on the notional portfolio simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    /// Validates that the weights lie on the simplex: they must sum to 1
    /// within 1e−10 and be nonnegative (entries above −1e−12 are clamped
    /// to zero).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPortfolio("no weights".into()));
        }
        let mut w = weights;
        for x in &mut w {
            if !x.is_finite() {
                return Err(Error::InvalidPortfolio("non-finite weight".into()));
            }
            if *x < 0.0 {
                if *x < -1e-12 {
                    return Err(Error::InvalidPortfolio(format!(
                        "negative weight {x}"
                    )));
                }
                *x = 0.0;
            }
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPortfolio(format!(
                "weights sum to {s}, not 1"
            )));
        }
        Ok(Portfolio { weights: w })
    }

    /// Unit portfolio concentrated on security `j`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Portfolio { weights: w }
    }

    /// Parses `T1=w1,T2=w2,…` against a ticker list. Weights must sum to 1
    /// within 1e−6 and are then renormalized exactly.
    pub fn parse(text: &str, tickers: &[String]) -> Result<Self> {
        let mut w = vec![0.0; tickers.len()];
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (name, val) = part.split_once('=').ok_or_else(|| {
                Error::InvalidPortfolio(format!("expected TICKER=weight, got {part:?}"))
            })?;
            let idx = tickers
                .iter()
                .position(|t| t == name.trim())
                .ok_or_else(|| Error::UnknownTicker(name.trim().to_string()))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|e| Error::InvalidPortfolio(format!("{val:?}: {e}")))?;
            w[idx] += v;
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPortfolio(format!(
                "weights sum to {s}, not 1"
            )));
        }
        for x in &mut w {
            *x /= s;
        }
        Portfolio::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Image of a portfolio in factor coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Productive coordinate `F(1,:)·p`.
    pub x: f64,
    /// Major nonproductive coordinate `F(2,:)·p` (0 when m = 1).
    pub y: f64,
    /// Norm of the whole nonproductive block `‖F(2:m,:)·p‖`.
    pub ynorm: f64,
    /// Expected return `E·p`.
    pub e: f64,
    /// Variance `f0² + x² + ynorm²`.
    pub v: f64,
    /// Standard deviation `√v`.
    pub sigma: f64,
}

/// Projects a portfolio into the factor coordinates of a decomposition.
pub fn project(d: &Decomposition, p: &Portfolio) -> Result<Projection> {
    let n = d.num_securities();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let f = d.factors();
    let coords = f.matvec(p.weights());
    let x = coords[0];
    let y = if coords.len() > 1 { coords[1] } else { 0.0 };
    let ynorm = mat::norm(&coords[1..]);
    let e = mat::dot(d.expected(), p.weights());
    let v = d.f0() * d.f0() + x * x + ynorm * ynorm;
    Ok(Projection {
        x,
        y,
        ynorm,
        e,
        v,
        sigma: v.sqrt(),
    })
}

/// Four-way split of a portfolio's risk, all in per-√unit-time units.
#[derive(Debug, Clone, Copy)]
pub struct RiskComponents {
    pub e: f64,
    /// Systemic risk f0, shared by every portfolio in the universe.
    pub systemic: f64,
    /// |x|: risk along the productive direction.
    pub productive: f64,
    /// |y|: risk along the major nonproductive direction.
    pub major_nonproductive: f64,
    /// √(ynorm² − y²): the rest of the nonproductive block.
    pub other_nonproductive: f64,
    /// Total σ = √(f0² + x² + ynorm²).
    pub total: f64,
}

/// Splits the total risk of a portfolio into systemic, productive, major
/// nonproductive, and other components; the total is the square root of the
/// sum of squares of the four.
pub fn risk_decomposition(d: &Decomposition, p: &Portfolio) -> Result<RiskComponents> {
    let pr = project(d, p)?;
    let other_sq = (pr.ynorm * pr.ynorm - pr.y * pr.y).max(0.0);
    Ok(RiskComponents {
        e: pr.e,
        systemic: d.f0(),
        productive: pr.x.abs(),
        major_nonproductive: pr.y.abs(),
        other_nonproductive: other_sq.sqrt(),
        total: pr.sigma,
    })
}

/// System-level variance totals in per-unit-time² units.
#[derive(Debug, Clone)]
pub struct VarianceBreakdown {
    /// n·f0².
    pub systemic: f64,
    /// τ₁² (nonproductive too when eF = 0).
    pub productive: f64,
    /// τ₂².
    pub major_nonproductive: f64,
    /// Σ_{i≥3} τ_i².
    pub other_nonproductive: f64,
    /// Total variance of the system.
    pub total: f64,
    /// Nonsystemic column variances v̂_jj, one per security.
    pub per_security: Vec<f64>,
}

impl VarianceBreakdown {
    pub fn nonsystemic_total(&self) -> f64 {
        self.productive + self.major_nonproductive + self.other_nonproductive
    }

    /// (systemic, productive, major, other) as percentages of the total.
    pub fn percentages(&self) -> [f64; 4] {
        let t = self.total;
        [
            100.0 * self.systemic / t,
            100.0 * self.productive / t,
            100.0 * self.major_nonproductive / t,
            100.0 * self.other_nonproductive / t,
        ]
    }
}

/// Decomposes total system variance into systemic, productive, major
/// nonproductive, and other nonproductive parts, with per-security
/// nonsystemic columns.
pub fn variance_breakdown(d: &Decomposition) -> VarianceBreakdown {
    let f = d.factors();
    let n = d.num_securities();
    let m = d.num_factors();
    let row_sq = |i: usize| -> f64 { f.row(i).iter().map(|v| v * v).sum() };
    let productive = row_sq(0);
    let major = if m > 1 { row_sq(1) } else { 0.0 };
    let other: f64 = (2..m).map(row_sq).sum();
    let systemic = n as f64 * d.f0() * d.f0();
    let per_security: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| f.get(i, j).powi(2)).sum())
        .collect();
    VarianceBreakdown {
        systemic,
        productive,
        major_nonproductive: major,
        other_nonproductive: other,
        total: systemic + productive + major + other,
        per_security,
    }
}

/// Renders the decomposition as a fixed-layout text table: the E row (and
/// the approx row when the affine law is approximate), the F rows with
/// their variance margins, per-security nonsystemic variance columns, and a
/// footer with f0, e0, eF. Values print at 2 decimals (eF at 3),
/// percentages at 1.
pub fn render_table(d: &Decomposition) -> String {
    let n = d.num_securities();
    let m = d.num_factors();
    let f = d.factors();
    let bd = variance_breakdown(d);
    let vhat_t = bd.nonsystemic_total();

    let width = d
        .tickers()
        .iter()
        .map(|t| t.len())
        .chain(std::iter::once(7))
        .max()
        .unwrap()
        .max(8);
    let label_w = 8usize;

    let mut out = String::new();
    let fmt_cell = |v: f64| format!("{v:>width$.2}");

    out.push_str(&format!("{:<label_w$}", "fund"));
    for t in d.tickers() {
        out.push_str(&format!("{t:>width$}"));
    }
    out.push('\n');

    out.push_str(&format!("{:<label_w$}", "E"));
    for &e in d.expected() {
        out.push_str(&fmt_cell(e));
    }
    out.push('\n');

    if d.eflag() {
        out.push_str(&format!("{:<label_w$}", "approx"));
        for a in d.approx_expected() {
            out.push_str(&fmt_cell(a));
        }
        out.push('\n');
    }

    let row_sq: Vec<f64> = (0..m)
        .map(|i| f.row(i).iter().map(|v| v * v).sum())
        .collect();
    for i in 0..m {
        let label = if i == 0 { "F" } else { "" };
        out.push_str(&format!("{label:<label_w$}"));
        for j in 0..n {
            out.push_str(&fmt_cell(f.get(i, j)));
        }
        if vhat_t > 0.0 {
            out.push_str(&format!(
                "  {:>10.2} {:>6.1}%",
                row_sq[i],
                100.0 * row_sq[i] / vhat_t
            ));
        }
        out.push('\n');
    }

    out.push_str(&format!("{:<label_w$}", "Vhat_T"));
    for v in &bd.per_security {
        out.push_str(&fmt_cell(*v));
    }
    out.push_str(&format!("  {vhat_t:>10.2} {:>6.1}%", 100.0));
    out.push('\n');
    if vhat_t > 0.0 {
        out.push_str(&format!("{:<label_w$}", ""));
        for v in &bd.per_security {
            let cell = format!("{:.1}%", 100.0 * v / vhat_t);
            out.push_str(&format!("{cell:>width$}"));
        }
        out.push('\n');
    }

    out.push_str(&format!(
        "with f0 = {:.2}, e0 = {:.2}, eF = {:.3}\n",
        d.f0(),
        d.e0(),
        d.e_f()
    ));
    out
}

/// Plot-data export: `ticker,x,y,e,sigma` for every security, then one row
/// per supplied portfolio. `flip_y` negates the y column for visual parity
/// with plots that draw the major nonproductive axis upward.
pub fn plot_data_csv(
    d: &Decomposition,
    portfolios: &[(String, Portfolio)],
    flip_y: bool,
) -> Result<String> {
    let n = d.num_securities();
    let mut out = String::from("ticker,x,y,e,sigma\n");
    let sign = if flip_y { -1.0 } else { 1.0 };
    for j in 0..n {
        let p = Portfolio::unit(n, j);
        let pr = project(d, &p)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.tickers()[j],
            fmt(pr.x),
            fmt(sign * pr.y),
            fmt(pr.e),
            fmt(pr.sigma)
        ));
    }
    for (name, p) in portfolios {
        let pr = project(d, p)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            name,
            fmt(pr.x),
            fmt(sign * pr.y),
            fmt(pr.e),
            fmt(pr.sigma)
        ));
    }
    Ok(out)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}
