//! Price-file parsing, normalization, return formation, windowing, and
//! weight generation.
//!
//! Price files are tab- or comma-separated with a header row naming the date
//! column and one ticker per remaining column. Returns are plain differences
//! of successive prices; with prices normalized at 100 on an anchor date they
//! are percent-of-anchor-price per period, which keeps portfolio returns
//! linear in the proportions.

use crate::mat::Mat;
use crate::{Error, Result};
use chrono::NaiveDate;

/// Dated matrix of adjusted closing prices for `n` labeled securities.
#[derive(Debug, Clone)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Mat,
}

/// M×n matrix of normalized linear periodic returns plus the weight vector
/// and periods-per-unit-time carried along to the decomposition.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    period_ends: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Mat,
    weights: Vec<f64>,
    rho: f64,
}

/// Weight system over the M return periods.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// Every period weighted 1/M.
    Uniform,
    /// A flat head, a linear ramp, and a flat tail; later periods count
    /// more. Levels are per-period weights before normalization.
    LateHeavy {
        head_len: usize,
        tail_len: usize,
        head_level: f64,
        tail_level: f64,
    },
    /// Explicit per-period weights, normalized to sum 1.
    Explicit(Vec<f64>),
}

impl WeightSpec {
    /// The 200-market-day system used throughout the reference examples:
    /// 70 head periods at 1/280, 30 tail periods at 1/140, linear ramp
    /// between.
    pub fn late_heavy_default() -> Self {
        WeightSpec::LateHeavy {
            head_len: 70,
            tail_len: 30,
            head_level: 1.0 / 280.0,
            tail_level: 1.0 / 140.0,
        }
    }

    /// Generates the normalized M-vector of weights.
    pub fn weights(&self, m: usize) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(Error::InvalidWeights("zero periods".into()));
        }
        let mut w = match self {
            WeightSpec::Uniform => vec![1.0 / m as f64; m],
            WeightSpec::LateHeavy {
                head_len,
                tail_len,
                head_level,
                tail_level,
            } => {
                if *head_level <= 0.0 || *tail_level <= 0.0 {
                    return Err(Error::InvalidWeights("levels must be positive".into()));
                }
                if *head_level >= *tail_level {
                    return Err(Error::InvalidWeights(
                        "head level must be below tail level".into(),
                    ));
                }
                if head_len + tail_len > m {
                    return Err(Error::InvalidWeights(format!(
                        "head {head_len} + tail {tail_len} exceed {m} periods"
                    )));
                }
                let ramp = m - head_len - tail_len;
                let mut w = Vec::with_capacity(m);
                w.extend(std::iter::repeat_n(*head_level, *head_len));
                for i in 1..=ramp {
                    w.push(head_level + (tail_level - head_level) * i as f64 / (ramp + 1) as f64);
                }
                w.extend(std::iter::repeat_n(*tail_level, *tail_len));
                w
            }
            WeightSpec::Explicit(raw) => {
                if raw.len() != m {
                    return Err(Error::InvalidWeights(format!(
                        "expected {m} weights, got {}",
                        raw.len()
                    )));
                }
                raw.clone()
            }
        };
        if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::InvalidWeights("weights must be positive".into()));
        }
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        Ok(w)
    }

    /// Parses the CLI grammar: `uniform`,
    /// `late-heavy[:head_len,tail_len,head_level,tail_level]`, a comma list
    /// of explicit weights, or `@file` with one weight per line (an optional
    /// `weight` header is allowed).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(WeightSpec::Uniform);
        }
        if let Some(rest) = s.strip_prefix("late-heavy") {
            if rest.is_empty() {
                return Ok(WeightSpec::late_heavy_default());
            }
            let rest = rest.strip_prefix(':').ok_or_else(|| {
                Error::InvalidWeights(format!("malformed late-heavy spec {s:?}"))
            })?;
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::InvalidWeights(
                    "late-heavy takes head_len,tail_len,head_level,tail_level".into(),
                ));
            }
            let head_len = parts[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidWeights(e.to_string()))?;
            let tail_len = parts[1]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidWeights(e.to_string()))?;
            let head_level = parse_level(parts[2])?;
            let tail_level = parse_level(parts[3])?;
            return Ok(WeightSpec::LateHeavy {
                head_len,
                tail_len,
                head_level,
                tail_level,
            });
        }
        if let Some(path) = s.strip_prefix('@') {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidWeights(format!("{path}: {e}")))?;
            let mut vals = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.eq_ignore_ascii_case("weight") {
                    continue;
                }
                vals.push(
                    line.parse::<f64>()
                        .map_err(|e| Error::InvalidWeights(format!("{line:?}: {e}")))?,
                );
            }
            return Ok(WeightSpec::Explicit(vals));
        }
        let vals = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidWeights(format!("{s:?}: {e}")))?;
        Ok(WeightSpec::Explicit(vals))
    }
}

/// Accepts plain numbers or `1/280`-style fractions.
fn parse_level(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num = a
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidWeights(e.to_string()))?;
        let den = b
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidWeights(e.to_string()))?;
        return Ok(num / den);
    }
    s.parse::<f64>()
        .map_err(|e| Error::InvalidWeights(e.to_string()))
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| Error::BadField {
        line,
        msg: format!("bad ISO date {s:?}"),
    })
}

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

impl PricePanel {
    /// Builds a panel from parts, validating the invariants.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || dates.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if rows.len() != dates.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: rows.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NonIncreasingDates { line: 0 });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tickers {
            if !seen.insert(t.clone()) {
                return Err(Error::DuplicateTicker(t.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != tickers.len() {
                return Err(Error::MalformedRow {
                    line: i + 2,
                    expected: tickers.len(),
                    found: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::NonPositivePrice {
                        line: i + 2,
                        ticker: tickers[j].clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(PricePanel {
            dates,
            tickers,
            prices: Mat::from_rows(&rows),
        })
    }

    /// Parses a price file. The delimiter (tab or comma) is auto-detected
    /// from the header row; dates must be ISO-8601 and strictly increasing;
    /// missing or non-positive values are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyPanel)?;
        let delim = detect_delimiter(header);
        let head: Vec<&str> = header.split(delim).map(str::trim).collect();
        if head.len() < 2 {
            return Err(Error::BadField {
                line: 1,
                msg: "header needs a date column and at least one ticker".into(),
            });
        }
        let tickers: Vec<String> = head[1..].iter().map(|s| s.to_string()).collect();
        let n = tickers.len();

        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (i, raw) in lines {
            let line_no = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(delim).map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(Error::MalformedRow {
                    line: line_no,
                    expected: n + 1,
                    found: fields.len(),
                });
            }
            let date = parse_date(fields[0], line_no)?;
            if let Some(&last) = dates.last() {
                if date <= last {
                    return Err(Error::NonIncreasingDates { line: line_no });
                }
            }
            let mut row = Vec::with_capacity(n);
            for (j, f) in fields[1..].iter().enumerate() {
                if f.is_empty() {
                    return Err(Error::BadField {
                        line: line_no,
                        msg: format!("missing value for {}", tickers[j]),
                    });
                }
                let v: f64 = f.parse().map_err(|e| Error::BadField {
                    line: line_no,
                    msg: format!("{f:?}: {e}"),
                })?;
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::NonPositivePrice {
                        line: line_no,
                        ticker: tickers[j].clone(),
                        value: v,
                    });
                }
                row.push(v);
            }
            dates.push(date);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tickers {
            if !seen.insert(t.clone()) {
                return Err(Error::DuplicateTicker(t.clone()));
            }
        }
        Ok(PricePanel {
            dates,
            tickers,
            prices: Mat::from_rows(&rows),
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &Mat {
        &self.prices
    }

    /// Rescales every column so its value on the anchor date equals `level`.
    pub fn normalize(&self, anchor: NaiveDate, level: f64) -> Result<PricePanel> {
        if !level.is_finite() || level <= 0.0 {
            return Err(Error::Validation(format!(
                "normalization level must be positive, got {level}"
            )));
        }
        let row = self
            .dates
            .iter()
            .position(|&d| d == anchor)
            .ok_or_else(|| Error::MissingAnchor(anchor.to_string()))?;
        let mut out = self.prices.clone();
        for j in 0..out.cols() {
            let s = level / self.prices.get(row, j);
            for i in 0..out.rows() {
                out.set(i, j, self.prices.get(i, j) * s);
            }
        }
        Ok(PricePanel {
            dates: self.dates.clone(),
            tickers: self.tickers.clone(),
            prices: out,
        })
    }

    /// Linear periodic returns: row i is `prices[i+1] − prices[i]`.
    /// Weights default to uniform and ρ to 1 until set.
    pub fn linear_returns(&self) -> Result<ReturnPanel> {
        let m1 = self.prices.rows();
        if m1 < 2 {
            return Err(Error::TooFewRows);
        }
        let m = m1 - 1;
        let n = self.prices.cols();
        let mut r = Mat::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                r.set(i, j, self.prices.get(i + 1, j) - self.prices.get(i, j));
            }
        }
        Ok(ReturnPanel {
            period_ends: self.dates[1..].to_vec(),
            tickers: self.tickers.clone(),
            weights: vec![1.0 / m as f64; m],
            returns: r,
            rho: 1.0,
        })
    }

    /// Restricts the panel to the named tickers, in the order given.
    pub fn select(&self, tickers: &[String]) -> Result<PricePanel> {
        let idx = ticker_indices(&self.tickers, tickers)?;
        Ok(PricePanel {
            dates: self.dates.clone(),
            tickers: tickers.to_vec(),
            prices: self.prices.select_cols(&idx),
        })
    }

    /// Serializes in the input format with the given delimiter.
    pub fn to_delimited(&self, delim: char) -> String {
        let mut out = String::from("date");
        for t in &self.tickers {
            out.push(delim);
            out.push_str(t);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for j in 0..self.prices.cols() {
                out.push(delim);
                out.push_str(&format_num(self.prices.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

fn ticker_indices(have: &[String], want: &[String]) -> Result<Vec<usize>> {
    want.iter()
        .map(|t| {
            have.iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::UnknownTicker(t.clone()))
        })
        .collect()
}

/// Full-precision shortest-roundtrip formatting, shared by all exports.
pub(crate) fn format_num(v: f64) -> String {
    format!("{v}")
}

impl ReturnPanel {
    pub fn new(
        period_ends: Vec<NaiveDate>,
        tickers: Vec<String>,
        rows: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        rho: f64,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if period_ends.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: period_ends.len(),
            });
        }
        let m = rows.len();
        let panel = ReturnPanel {
            period_ends,
            tickers,
            returns: Mat::from_rows(&rows),
            weights: vec![1.0 / m as f64; m],
            rho: 1.0,
        };
        let panel = match weights {
            Some(w) => panel.with_weights(&WeightSpec::Explicit(w))?,
            None => panel,
        };
        panel.with_rho(rho)
    }

    /// Parses a returns file (`period_end` header, same layout as prices
    /// otherwise). Values may be any finite reals.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyPanel)?;
        let delim = detect_delimiter(header);
        let head: Vec<&str> = header.split(delim).map(str::trim).collect();
        if head.len() < 2 {
            return Err(Error::BadField {
                line: 1,
                msg: "header needs a period_end column and at least one ticker".into(),
            });
        }
        let tickers: Vec<String> = head[1..].iter().map(|s| s.to_string()).collect();
        let n = tickers.len();
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (i, raw) in lines {
            let line_no = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(delim).map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(Error::MalformedRow {
                    line: line_no,
                    expected: n + 1,
                    found: fields.len(),
                });
            }
            let date = parse_date(fields[0], line_no)?;
            if let Some(&last) = dates.last() {
                if date <= last {
                    return Err(Error::NonIncreasingDates { line: line_no });
                }
            }
            let mut row = Vec::with_capacity(n);
            for f in &fields[1..] {
                let v: f64 = f.parse().map_err(|e| Error::BadField {
                    line: line_no,
                    msg: format!("{f:?}: {e}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadField {
                        line: line_no,
                        msg: format!("non-finite return {f:?}"),
                    });
                }
                row.push(v);
            }
            dates.push(date);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let m = rows.len();
        Ok(ReturnPanel {
            period_ends: dates,
            tickers,
            returns: Mat::from_rows(&rows),
            weights: vec![1.0 / m as f64; m],
            rho: 1.0,
        })
    }

    pub fn period_ends(&self) -> &[NaiveDate] {
        &self.period_ends
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &Mat {
        &self.returns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn num_periods(&self) -> usize {
        self.returns.rows()
    }

    pub fn num_securities(&self) -> usize {
        self.returns.cols()
    }

    /// Keeps only the last `m` return rows.
    pub fn window_last(&self, m: usize) -> Result<ReturnPanel> {
        let have = self.returns.rows();
        if m == 0 || m > have {
            return Err(Error::WindowTooLarge {
                wanted: m,
                available: have,
            });
        }
        let from = have - m;
        let rows: Vec<Vec<f64>> = (from..have).map(|i| self.returns.row(i).to_vec()).collect();
        Ok(ReturnPanel {
            period_ends: self.period_ends[from..].to_vec(),
            tickers: self.tickers.clone(),
            returns: Mat::from_rows(&rows),
            weights: vec![1.0 / m as f64; m],
            rho: self.rho,
        })
    }

    /// Replaces the weight system.
    pub fn with_weights(&self, spec: &WeightSpec) -> Result<ReturnPanel> {
        let w = spec.weights(self.returns.rows())?;
        Ok(ReturnPanel {
            weights: w,
            ..self.clone()
        })
    }

    /// Sets the periods-per-unit-time scale (ρ ≥ 1).
    pub fn with_rho(&self, rho: f64) -> Result<ReturnPanel> {
        if !rho.is_finite() || rho < 1.0 {
            return Err(Error::InvalidRho(rho));
        }
        Ok(ReturnPanel {
            rho,
            ..self.clone()
        })
    }

    /// Restricts the panel to the named tickers, in the order given.
    pub fn select(&self, tickers: &[String]) -> Result<ReturnPanel> {
        let idx = ticker_indices(&self.tickers, tickers)?;
        Ok(ReturnPanel {
            period_ends: self.period_ends.clone(),
            tickers: tickers.to_vec(),
            returns: self.returns.select_cols(&idx),
            weights: self.weights.clone(),
            rho: self.rho,
        })
    }

    /// Serializes with a `period_end` column followed by the return matrix.
    pub fn to_delimited(&self, delim: char) -> String {
        let mut out = String::from("period_end");
        for t in &self.tickers {
            out.push(delim);
            out.push_str(t);
        }
        out.push('\n');
        for (i, d) in self.period_ends.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for j in 0..self.returns.cols() {
                out.push(delim);
                out.push_str(&format_num(self.returns.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    /// Single-column weight export with a `weight` header.
    pub fn weights_file(&self) -> String {
        let mut out = String::from("weight\n");
        for w in &self.weights {
            out.push_str(&format_num(*w));
            out.push('\n');
        }
        out
    }
}
