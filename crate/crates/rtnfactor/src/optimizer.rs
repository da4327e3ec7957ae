//! Portfolio paths over the simplex: the minimum-variance corner path
//! (a critical-line trace over the factor covariance) and the minimum-|y|
//! path read off the two-row factor projection, plus path statistics.

use crate::analysis::{project, Portfolio};
use crate::decomp::Decomposition;
use crate::mat::{self, Mat};
use crate::{Error, Result};

/// Which factor rows enter the covariance `F(1:k,:)ᵀF(1:k,:)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRows {
    /// All m rows: the exact minimum-variance set.
    All,
    /// The first k rows (2 ≤ k ≤ m): successively better approximations;
    /// k = 2 coincides with the minimum-|y| criterion.
    First(usize),
}

/// One breakpoint of a piecewise-linear portfolio path. `x`, `e`, `sigma`
/// always come from the full decomposition, so `sigma² = f0² + x² + ‖y‖²`
/// regardless of how many rows the optimizer used.
#[derive(Debug, Clone)]
pub struct PathCorner {
    pub portfolio: Portfolio,
    pub x: f64,
    pub e: f64,
    pub sigma: f64,
}

/// Piecewise-linear path of corner portfolios, ordered by increasing x;
/// segments interpolate linearly in portfolio space.
#[derive(Debug, Clone)]
pub struct PortfolioPath {
    corners: Vec<PathCorner>,
    /// Index of the absolute-minimum-variance corner, when the path is a
    /// minimum-variance trace.
    efficient_start: Option<usize>,
}

impl PortfolioPath {
    pub fn corners(&self) -> &[PathCorner] {
        &self.corners
    }

    /// Index of p_E within the corner list, for minimum-variance paths.
    pub fn efficient_start(&self) -> Option<usize> {
        self.efficient_start
    }

    /// The sub-path from the absolute-minimum-variance corner to the
    /// maximum-return end.
    pub fn efficient(&self) -> PortfolioPath {
        let from = self.efficient_start.unwrap_or(0);
        PortfolioPath {
            corners: self.corners[from..].to_vec(),
            efficient_start: Some(0),
        }
    }

    /// Portfolio at coordinate `x`, interpolating linearly between corners.
    pub fn portfolio_at(&self, x: f64) -> Option<Portfolio> {
        let c = &self.corners;
        if c.is_empty() {
            return None;
        }
        if x <= c[0].x {
            return Some(c[0].portfolio.clone());
        }
        if x >= c[c.len() - 1].x {
            return Some(c[c.len() - 1].portfolio.clone());
        }
        for w in c.windows(2) {
            if x >= w[0].x && x <= w[1].x {
                let span = w[1].x - w[0].x;
                let t = if span == 0.0 { 0.0 } else { (x - w[0].x) / span };
                let mixed: Vec<f64> = w[0]
                    .portfolio
                    .weights()
                    .iter()
                    .zip(w[1].portfolio.weights())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                return Portfolio::new(mixed).ok();
            }
        }
        None
    }
}

/// Mean expected return and root-mean-square risk over a path's x-range.
#[derive(Debug, Clone, Copy)]
pub struct PathStats {
    pub avg_e: f64,
    pub rms_sigma: f64,
}

const FEAS_TOL: f64 = 1e-9;

/// Corner portfolios of the minimum-variance set for expected returns `E`
/// and covariance `f0² + F(1:k,:)ᵀF(1:k,:)` (the `f0²` term does not move
/// the minimizers). The path runs from the minimum-return end to the
/// maximum-return vertex with the absolute-minimum-variance portfolio p_E
/// included as a corner; [`PortfolioPath::efficient`] restricts to the
/// efficient part.
pub fn minvar_corners(d: &Decomposition, rows: FactorRows) -> Result<PortfolioPath> {
    let m = d.num_factors();
    let n = d.num_securities();
    let k = match rows {
        FactorRows::All => m,
        FactorRows::First(k) => {
            if k < 2 || k > m {
                return Err(Error::RowCountOutOfRange { k, m });
            }
            k
        }
    };
    let e = d.expected();
    let emin = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let emax = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if emax - emin <= 1e-12 * emax.abs().max(emin.abs()).max(1.0) {
        return Err(Error::ConstantExpectedReturns);
    }

    let fk = d.factors().select_rows(&(0..k).collect::<Vec<_>>());
    let v = fk.gram();
    // The factor covariance has rank ≤ m and can be singular on an active
    // set. A first pass solves the KKT systems unshifted (retrying each
    // solve with a tiny diagonal shift on singularity), which keeps
    // nondegenerate corner portfolios exact. When the covariance is so
    // rank-deficient that the parametric coefficients blow up and the trace
    // leaves the simplex, rerun the whole trace with a progressively larger
    // shift; the minimizing set is flat in those directions, so the value
    // function is unaffected.
    let mean_diag = (0..n).map(|i| v.get(i, i)).sum::<f64>() / n as f64;
    let mut last_err = None;
    for extra in [0.0, 1e-9, 1e-6] {
        let mut vs = v.clone();
        if extra > 0.0 {
            let shift = extra * (1.0 + mean_diag);
            for i in 0..n {
                let val = vs.get(i, i) + shift;
                vs.set(i, i, val);
            }
        }
        match trace_critical_lines(&vs, e, n).and_then(|trace| build_path(d, trace)) {
            Ok(path) => return Ok(path),
            Err(err) => last_err = Some(err),
        }
    }
    Err(last_err.expect("at least one attempt ran"))
}

struct CriticalTrace {
    /// (λ, weights) breakpoints in decreasing λ (decreasing e).
    corners: Vec<(f64, Vec<f64>)>,
    /// Weights of the λ = 0 solution.
    p_e: Vec<f64>,
}

fn trace_critical_lines(v: &Mat, e: &[f64], n: usize) -> Result<CriticalTrace> {
    // Start from the maximum-return vertex (lowest index on ties) and
    // decrease λ in  min pᵀVp − λEᵀp  through every active-set change.
    let mut start = 0usize;
    for j in 1..n {
        if e[j] > e[start] {
            start = j;
        }
    }
    let mut inset: Vec<usize> = vec![start];
    let mut lambda = f64::INFINITY;
    let mut corners: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut p_e: Option<Vec<f64>> = None;

    let mut p0 = vec![0.0; n];
    p0[start] = 1.0;
    corners.push((lambda, p0));

    let max_iter = 4 * n * n + 16;
    for _ in 0..max_iter {
        inset.sort_unstable();
        let idx = inset.clone();
        let kk = idx.len();

        // KKT on the active set: p(λ) = a + λ·b, multiplier γ(λ) = γa + λ·γb.
        // The factor covariance can be singular on the active set; when the
        // plain solve fails, retry with a small diagonal shift (scaled by
        // the covariance diagonal so it survives pivot checks at any data
        // scale).
        let mut kkt = Mat::zeros(kk + 1, kk + 1);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                kkt.set(r, c, 2.0 * v.get(i, j));
            }
            kkt.set(r, kk, 1.0);
            kkt.set(kk, r, 1.0);
        }
        let mut rhs_a = vec![0.0; kk + 1];
        rhs_a[kk] = 1.0;
        let mut rhs_b = vec![0.0; kk + 1];
        for (r, &i) in idx.iter().enumerate() {
            rhs_b[r] = e[i];
        }
        let solve_pair = |kkt: &Mat, tol: f64| -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((mat::lu_solve(kkt, &rhs_a, tol)?, mat::lu_solve(kkt, &rhs_b, tol)?))
        };
        let (sol_a, sol_b) = match solve_pair(&kkt, 1e-14) {
            Ok(pair) => pair,
            Err(_) => {
                let mean_diag = (0..n).map(|i| v.get(i, i)).sum::<f64>() / n as f64;
                let shift = 1e-12 * (1.0 + mean_diag);
                let mut shifted = kkt.clone();
                for r in 0..kk {
                    let val = shifted.get(r, r) + 2.0 * shift;
                    shifted.set(r, r, val);
                }
                solve_pair(&shifted, 1e-18)?
            }
        };
        let (a, ga) = (&sol_a[..kk], sol_a[kk]);
        let (b, gb) = (&sol_b[..kk], sol_b[kk]);
        // Coefficients at 1/shift scale mean the active covariance is
        // degenerate beyond this shift's reach; fail into the caller's
        // escalation.
        if sol_a.iter().chain(sol_b.iter()).any(|x| !x.is_finite() || x.abs() > 1e10) {
            return Err(Error::Numerical(
                "ill-conditioned critical-line segment".into(),
            ));
        }

        // Next event below the current λ: a free weight hitting zero or an
        // outside variable's reduced gradient hitting zero. Ties break to
        // the lowest security index.
        let mut best: Option<(f64, bool, usize)> = None; // (λ, is_leave, index)
        let mut consider = |lam_ev: f64, is_leave: bool, who: usize| {
            if !lam_ev.is_finite() || lam_ev >= lambda - 1e-12 {
                return;
            }
            match best {
                None => best = Some((lam_ev, is_leave, who)),
                Some((bl, _, bw)) => {
                    if lam_ev > bl + 1e-12 || ((lam_ev - bl).abs() <= 1e-12 && who < bw) {
                        best = Some((lam_ev, is_leave, who));
                    }
                }
            }
        };
        if kk > 1 {
            for (pos, &i) in idx.iter().enumerate() {
                if b[pos] > 1e-14 {
                    consider(-a[pos] / b[pos], true, i);
                }
            }
        }
        for j in 0..n {
            if idx.contains(&j) {
                continue;
            }
            let vj: Vec<f64> = idx.iter().map(|&i| v.get(j, i)).collect();
            let c = 2.0 * mat::dot(&vj, a) + ga;
            let dslope = 2.0 * mat::dot(&vj, b) + gb - e[j];
            if dslope > 1e-14 {
                consider(-c / dslope, false, j);
            }
        }

        let crossed_zero = match best {
            None => lambda > 0.0,
            Some((bl, _, _)) => lambda > 0.0 && bl <= 0.0,
        };
        if crossed_zero && p_e.is_none() {
            let mut p = vec![0.0; n];
            for (pos, &i) in idx.iter().enumerate() {
                p[i] = a[pos];
            }
            p_e = Some(p);
        }

        match best {
            None => {
                // No further events: the terminal segment is constant.
                let mut p = vec![0.0; n];
                for (pos, &i) in idx.iter().enumerate() {
                    p[i] = a[pos];
                }
                corners.push((f64::NEG_INFINITY, p));
                let p_e = p_e.ok_or_else(|| {
                    Error::Numerical("critical-line trace never reached λ = 0".into())
                })?;
                return Ok(CriticalTrace { corners, p_e });
            }
            Some((lam_ev, is_leave, who)) => {
                let mut p = vec![0.0; n];
                for (pos, &i) in idx.iter().enumerate() {
                    p[i] = a[pos] + lam_ev * b[pos];
                }
                corners.push((lam_ev, p));
                lambda = lam_ev;
                if is_leave {
                    inset.retain(|&i| i != who);
                } else {
                    inset.push(who);
                }
            }
        }
    }
    Err(Error::Numerical(
        "critical-line trace exceeded its iteration budget".into(),
    ))
}

fn clean_weights(mut w: Vec<f64>) -> Result<Portfolio> {
    for x in &mut w {
        if *x < 0.0 && *x >= -FEAS_TOL {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        return Err(Error::Numerical("corner weights sum to zero".into()));
    }
    for x in &mut w {
        *x /= s;
    }
    Portfolio::new(w).map_err(|e| Error::Numerical(format!("infeasible corner: {e}")))
}

fn build_path(d: &Decomposition, trace: CriticalTrace) -> Result<PortfolioPath> {
    // Reverse to increasing e, dedupe consecutive repeats, splice p_E in.
    let mut ordered: Vec<(f64, Vec<f64>)> = trace.corners;
    ordered.reverse(); // now λ ascending = e ascending
    let mut weights: Vec<(f64, Vec<f64>)> = Vec::new();
    for (lam, w) in ordered {
        if let Some((_, last)) = weights.last() {
            if max_abs_diff(last, &w) <= 1e-10 {
                continue;
            }
        }
        weights.push((lam, w));
    }
    let pe_pos = weights
        .iter()
        .position(|(lam, _)| *lam > 0.0)
        .unwrap_or(weights.len());
    let mut efficient_start = pe_pos;
    let duplicate_of_neighbor = (pe_pos > 0
        && max_abs_diff(&weights[pe_pos - 1].1, &trace.p_e) <= 1e-10)
        || (pe_pos < weights.len() && max_abs_diff(&weights[pe_pos].1, &trace.p_e) <= 1e-10);
    if duplicate_of_neighbor {
        if pe_pos > 0 && max_abs_diff(&weights[pe_pos - 1].1, &trace.p_e) <= 1e-10 {
            efficient_start = pe_pos - 1;
        }
    } else {
        weights.insert(pe_pos, (0.0, trace.p_e));
    }

    let mut corners = Vec::with_capacity(weights.len());
    for (_, w) in weights {
        let portfolio = clean_weights(w)?;
        let pr = project(d, &portfolio)?;
        corners.push(PathCorner {
            portfolio,
            x: pr.x,
            e: pr.e,
            sigma: pr.sigma,
        });
    }
    Ok(PortfolioPath {
        corners,
        efficient_start: Some(efficient_start),
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// For each x in the range, the portfolio minimizing `|F(2,:)·p|` subject to
/// `F(1,:)·p = x` on the simplex. Corners are vertices and axis crossings of
/// the convex polygon of security points in the (x, y)-plane; where the
/// x-axis cuts the polygon the path interpolates linearly between the two
/// axis-crossing edge portfolios.
pub fn min_abs_y_path(d: &Decomposition, x_range: (f64, f64)) -> Result<PortfolioPath> {
    if d.num_factors() < 2 {
        return Err(Error::Validation(
            "minimum-|y| path needs at least two factor rows".into(),
        ));
    }
    let n = d.num_securities();
    let f = d.factors();
    let xs: Vec<f64> = f.row(0).to_vec();
    let ys: Vec<f64> = f.row(1).to_vec();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = x_range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidRange(format!("{lo} > {hi}")));
    }
    let slack = 1e-9 * (x_max - x_min).abs().max(1.0);
    if lo < x_min - slack || hi > x_max + slack {
        return Err(Error::InvalidRange(format!(
            "[{lo}, {hi}] outside attainable [{x_min}, {x_max}]"
        )));
    }
    let lo = lo.max(x_min);
    let hi = hi.min(x_max);

    // Degenerate: every portfolio has the same x.
    if x_max - x_min <= 1e-14 * x_max.abs().max(1.0) {
        let p = min_abs_y_at_fixed_x(&ys, n)?;
        let pr = project(d, &p)?;
        return Ok(PortfolioPath {
            corners: vec![PathCorner {
                portfolio: p,
                x: pr.x,
                e: pr.e,
                sigma: pr.sigma,
            }],
            efficient_start: None,
        });
    }

    // Convex hull chains of the security points. `lower` carries y_min(x),
    // `upper` carries y_max(x); both run from x_min to x_max.
    let pts = dedupe_points(&xs, &ys);
    let lower = hull_chain(&pts, false);
    let upper = hull_chain(&pts, true);

    // Axis interval: where y_min ≤ 0 ≤ y_max.
    let lower_fn = ChainFn::new(&lower, &pts);
    let upper_fn = ChainFn::new(&upper, &pts);
    let below = lower_fn.nonpositive_interval();
    let above = upper_fn.nonnegative_interval();
    let axis = match (below, above) {
        (Some((l1, l2)), Some((u1, u2))) => {
            let a = l1.max(u1);
            let b = l2.min(u2);
            if a <= b + 1e-12 {
                Some((a.min(b), b))
            } else {
                None
            }
        }
        _ => None,
    };

    let mut breakpoints: Vec<(f64, Portfolio)> = Vec::new();
    match axis {
        Some((ax_l, ax_r)) => {
            // Crossing portfolios sit on whichever chain actually touches
            // the axis at each end of the interval.
            let crossing = |x: f64| {
                if lower_fn.value_at(x).abs() <= upper_fn.value_at(x).abs() {
                    lower_fn.portfolio_at(x, n)
                } else {
                    upper_fn.portfolio_at(x, n)
                }
            };
            let p_l = crossing(ax_l);
            let p_r = crossing(ax_r);
            let a2 = lo.max(ax_l);
            let b2 = hi.min(ax_r);

            if lo < ax_l {
                // hull is strictly one-sided left of the interval
                let chain = if lower_fn.value_at(midpoint(lo, ax_l)) > 0.0 {
                    &lower_fn
                } else {
                    &upper_fn
                };
                chain.walk(lo, ax_l.min(hi), n, &mut breakpoints);
            }
            if a2 <= b2 {
                push_corner(&mut breakpoints, a2, axis_portfolio(ax_l, ax_r, &p_l, &p_r, a2));
                if b2 > a2 {
                    push_corner(&mut breakpoints, b2, axis_portfolio(ax_l, ax_r, &p_l, &p_r, b2));
                }
            }
            if hi > ax_r {
                let chain = if lower_fn.value_at(midpoint(ax_r, hi)) > 0.0 {
                    &lower_fn
                } else {
                    &upper_fn
                };
                chain.walk(ax_r.max(lo), hi, n, &mut breakpoints);
            }
        }
        None => {
            // Entirely above or below the axis.
            let chain = if lower_fn.value_at(midpoint(lo, hi)) > 0.0 {
                &lower_fn
            } else {
                &upper_fn
            };
            chain.walk(lo, hi, n, &mut breakpoints);
        }
    }

    breakpoints.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    breakpoints.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12);
    let mut corners = Vec::with_capacity(breakpoints.len());
    for (x, p) in breakpoints {
        let pr = project(d, &p)?;
        corners.push(PathCorner {
            portfolio: p,
            x,
            e: pr.e,
            sigma: pr.sigma,
        });
    }
    if corners.is_empty() {
        return Err(Error::InvalidRange("empty x-range".into()));
    }
    Ok(PortfolioPath {
        corners,
        efficient_start: None,
    })
}

fn midpoint(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

fn push_corner(list: &mut Vec<(f64, Portfolio)>, x: f64, p: Portfolio) {
    list.push((x, p));
}

fn axis_portfolio(ax_l: f64, ax_r: f64, p_l: &Portfolio, p_r: &Portfolio, x: f64) -> Portfolio {
    let span = ax_r - ax_l;
    if span <= 0.0 {
        return p_l.clone();
    }
    let t = ((x - ax_l) / span).clamp(0.0, 1.0);
    let w: Vec<f64> = p_l
        .weights()
        .iter()
        .zip(p_r.weights())
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    Portfolio::new(w).expect("axis interpolation stays on the simplex")
}

fn min_abs_y_at_fixed_x(ys: &[f64], n: usize) -> Result<Portfolio> {
    let mut lo = 0usize;
    let mut hi = 0usize;
    for j in 1..n {
        if ys[j] < ys[lo] {
            lo = j;
        }
        if ys[j] > ys[hi] {
            hi = j;
        }
    }
    if ys[lo] > 0.0 {
        return Ok(Portfolio::unit(n, lo));
    }
    if ys[hi] < 0.0 {
        return Ok(Portfolio::unit(n, hi));
    }
    let span = ys[hi] - ys[lo];
    let t = if span == 0.0 { 0.0 } else { -ys[lo] / span };
    let mut w = vec![0.0; n];
    w[lo] += 1.0 - t;
    w[hi] += t;
    Portfolio::new(w)
}

/// A security point in the (x, y)-plane; `sec` is the lowest security index
/// mapping there.
#[derive(Debug, Clone, Copy)]
struct Pt {
    x: f64,
    y: f64,
    sec: usize,
}

fn dedupe_points(xs: &[f64], ys: &[f64]) -> Vec<Pt> {
    let mut pts: Vec<Pt> = Vec::new();
    'outer: for j in 0..xs.len() {
        for p in &pts {
            if (p.x - xs[j]).abs() <= 1e-14 && (p.y - ys[j]).abs() <= 1e-14 {
                continue 'outer;
            }
        }
        pts.push(Pt {
            x: xs[j],
            y: ys[j],
            sec: j,
        });
    }
    pts
}

fn cross(o: &Pt, a: &Pt, b: &Pt) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Monotone-chain hull. `flip = false` builds the lower chain (y_min as a
/// function of x), `flip = true` the upper chain. Interior collinear points
/// are dropped. Returns indices into `pts`.
fn hull_chain(pts: &[Pt], flip: bool) -> Vec<usize> {
    let sign = if flip { -1.0 } else { 1.0 };
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        (pts[a].x, sign * pts[a].y, pts[a].sec)
            .partial_cmp(&(pts[b].x, sign * pts[b].y, pts[b].sec))
            .unwrap()
    });
    let mut chain: Vec<usize> = Vec::new();
    for &i in &order {
        let p = Pt {
            x: pts[i].x,
            y: sign * pts[i].y,
            sec: pts[i].sec,
        };
        while chain.len() >= 2 {
            let o = &pts[chain[chain.len() - 2]];
            let a = &pts[chain[chain.len() - 1]];
            let oo = Pt { x: o.x, y: sign * o.y, sec: o.sec };
            let aa = Pt { x: a.x, y: sign * a.y, sec: a.sec };
            if cross(&oo, &aa, &p) <= 0.0 {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(i);
    }
    // Drop a leading vertical step (same x): keep the extreme-y start.
    while chain.len() >= 2 && (pts[chain[0]].x - pts[chain[1]].x).abs() <= 1e-14 {
        chain.remove(0);
    }
    while chain.len() >= 2 {
        let l = chain.len();
        if (pts[chain[l - 1]].x - pts[chain[l - 2]].x).abs() <= 1e-14 {
            chain.pop();
        } else {
            break;
        }
    }
    chain
}

/// Piecewise-linear function over a hull chain, with portfolio readout.
struct ChainFn<'a> {
    chain: &'a [usize],
    pts: &'a [Pt],
}

impl<'a> ChainFn<'a> {
    fn new(chain: &'a [usize], pts: &'a [Pt]) -> Self {
        ChainFn { chain, pts }
    }

    fn value_at(&self, x: f64) -> f64 {
        let c = self.chain;
        let p = self.pts;
        if c.len() == 1 || x <= p[c[0]].x {
            return p[c[0]].y;
        }
        for w in c.windows(2) {
            let (a, b) = (&p[w[0]], &p[w[1]]);
            if x <= b.x {
                let t = if b.x == a.x { 0.0 } else { (x - a.x) / (b.x - a.x) };
                return a.y + t * (b.y - a.y);
            }
        }
        p[*c.last().unwrap()].y
    }

    fn portfolio_at(&self, x: f64, n: usize) -> Portfolio {
        let c = self.chain;
        let p = self.pts;
        if c.len() == 1 || x <= p[c[0]].x {
            return Portfolio::unit(n, p[c[0]].sec);
        }
        for w in c.windows(2) {
            let (a, b) = (&p[w[0]], &p[w[1]]);
            if x <= b.x {
                let t = if b.x == a.x { 0.0 } else { ((x - a.x) / (b.x - a.x)).clamp(0.0, 1.0) };
                let mut weights = vec![0.0; n];
                weights[a.sec] += 1.0 - t;
                weights[b.sec] += t;
                return Portfolio::new(weights).expect("edge mix is on the simplex");
            }
        }
        Portfolio::unit(n, p[*c.last().unwrap()].sec)
    }

    /// Interval where the chain value is ≤ 0, if any.
    fn nonpositive_interval(&self) -> Option<(f64, f64)> {
        self.sign_interval(-1.0)
    }

    /// Interval where the chain value is ≥ 0, if any.
    fn nonnegative_interval(&self) -> Option<(f64, f64)> {
        self.sign_interval(1.0)
    }

    fn sign_interval(&self, want: f64) -> Option<(f64, f64)> {
        let c = self.chain;
        let p = self.pts;
        let ok = |y: f64| want * y >= 0.0;
        let mut left: Option<f64> = None;
        let mut right: Option<f64> = None;
        if ok(p[c[0]].y) {
            left = Some(p[c[0]].x);
        }
        for w in c.windows(2) {
            let (a, b) = (&p[w[0]], &p[w[1]]);
            if ok(a.y) != ok(b.y) {
                let t = a.y / (a.y - b.y);
                let xc = a.x + t * (b.x - a.x);
                if left.is_none() {
                    left = Some(xc);
                } else if right.is_none() {
                    right = Some(xc);
                }
            }
        }
        let last = &p[*c.last().unwrap()];
        let left = left?;
        let right = right.unwrap_or(if ok(last.y) { last.x } else { left });
        Some((left, right))
    }

    /// Appends corners covering `[a, b]`: the endpoints plus every chain
    /// vertex strictly inside.
    fn walk(&self, a: f64, b: f64, n: usize, out: &mut Vec<(f64, Portfolio)>) {
        if b < a {
            return;
        }
        out.push((a, self.portfolio_at(a, n)));
        for &i in self.chain {
            let x = self.pts[i].x;
            if x > a + 1e-12 && x < b - 1e-12 {
                out.push((x, Portfolio::unit(n, self.pts[i].sec)));
            }
        }
        if b > a {
            out.push((b, self.portfolio_at(b, n)));
        }
    }
}

/// Closed-form path statistics: avg e is the x-average of the piecewise
/// linear e(x) (the average of the end values when e is affine in x), and
/// rms σ = √(avg v) with v(x) integrated exactly per segment, where it is
/// quadratic.
pub fn path_stats(d: &Decomposition, path: &PortfolioPath) -> Result<PathStats> {
    let c = path.corners();
    if c.is_empty() {
        return Err(Error::Validation("path has no corners".into()));
    }
    if c.len() == 1 {
        return Ok(PathStats {
            avg_e: c[0].e,
            rms_sigma: c[0].sigma,
        });
    }
    let span = c[c.len() - 1].x - c[0].x;
    if span <= 0.0 {
        return Err(Error::Validation(
            "zero-length x-range with multiple corners".into(),
        ));
    }
    let f = d.factors();
    let ff = d.f0() * d.f0();
    let mut int_e = 0.0;
    let mut int_v = 0.0;
    for w in c.windows(2) {
        let dx = w[1].x - w[0].x;
        if dx == 0.0 {
            continue;
        }
        if dx < 0.0 {
            // Happens only when the affine return law is approximate and
            // corner x-coordinates reorder; the x-average is undefined then.
            return Err(Error::Validation(
                "path statistics need corners monotone in x".into(),
            ));
        }
        int_e += dx * 0.5 * (w[0].e + w[1].e);
        let z0 = f.matvec(w[0].portfolio.weights());
        let z1 = f.matvec(w[1].portfolio.weights());
        let dz: Vec<f64> = z1.iter().zip(&z0).map(|(a, b)| a - b).collect();
        // ∫₀¹ ‖z0 + t·dz‖² dt = ‖z0‖² + ⟨z0, dz⟩ + ‖dz‖²/3
        let seg = ff + mat::dot(&z0, &z0) + mat::dot(&z0, &dz) + mat::dot(&dz, &dz) / 3.0;
        int_v += dx * seg;
    }
    Ok(PathStats {
        avg_e: int_e / span,
        rms_sigma: (int_v / span).sqrt(),
    })
}

/// CSV export: `corner_index`, one weight column per ticker, then x, e,
/// sigma; path statistics appended as comment footer lines.
pub fn path_to_csv(d: &Decomposition, path: &PortfolioPath) -> String {
    let mut out = String::from("corner_index");
    for t in d.tickers() {
        out.push(',');
        out.push_str(t);
    }
    out.push_str(",x,e,sigma\n");
    for (i, c) in path.corners().iter().enumerate() {
        out.push_str(&i.to_string());
        for w in c.portfolio.weights() {
            out.push(',');
            out.push_str(&format!("{w}"));
        }
        out.push_str(&format!(",{},{},{}\n", c.x, c.e, c.sigma));
    }
    if let Ok(stats) = path_stats(d, path) {
        out.push_str(&format!("# avg_e = {}\n", stats.avg_e));
        out.push_str(&format!("# rms_sigma = {}\n", stats.rms_sigma));
    }
    out
}
