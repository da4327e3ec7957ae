//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).

#![allow(clippy::needless_range_loop)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtnfactor::analysis::{project, risk_decomposition, variance_breakdown, Portfolio};
use rtnfactor::decomp::{covariance, decompose, expected_returns, Decomposition};
use rtnfactor::ingest::{PricePanel, ReturnPanel, WeightSpec};
use rtnfactor::mat::{dot, Mat};
use rtnfactor::optimizer::{
    min_abs_y_path, minvar_corners, path_stats, FactorRows, PortfolioPath,
};
use std::time::Instant;

fn criterion<F>(n: u32, desc: &str, body: F)
where
    F: FnOnce() + std::panic::UnwindSafe,
{
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("criterion {n}: PASS - {desc}"),
        Err(cause) => {
            println!("criterion {n}: FAIL - {desc}");
            std::panic::resume_unwind(cause);
        }
    }
}

const QUARTERLY_PRICES: &str = "\
date\tIEF\tIWB\tIWM\tEFA\tEEM
2010-03-31\t92.925\t91.157\t85.766\t93.619\t87.102
2010-06-30\t100.196\t80.605\t77.316\t79.141\t77.686
2010-09-30\t104.498\t89.958\t85.884\t93.452\t93.194
2010-12-31\t100.000\t100.000\t100.000\t100.000\t100.000
";

const QUARTERLY_RETURNS: [[f64; 5]; 3] = [
    [7.271, -10.552, -8.450, -14.478, -9.416],
    [4.302, 9.353, 8.568, 14.311, 15.508],
    [-4.498, 10.042, 14.116, 6.548, 6.806],
];

fn quarterly_panel() -> ReturnPanel {
    PricePanel::parse(QUARTERLY_PRICES)
        .unwrap()
        .linear_returns()
        .unwrap()
        .with_weights(&WeightSpec::Explicit(vec![2.0, 3.0, 4.0]))
        .unwrap()
        .with_rho(4.0)
        .unwrap()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

#[test]
fn acceptance_1_quarterly_pipeline_golden() {
    criterion(1, "quarterly prices form the published returns exactly", || {
        let start = Instant::now();
        let panel = PricePanel::parse(QUARTERLY_PRICES).unwrap();
        let returns = panel.linear_returns().unwrap();
        let elapsed = start.elapsed();
        for (i, row) in QUARTERLY_RETURNS.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                let got = returns.returns().get(i, j);
                assert_eq!(round3(got), *want, "returns[{i}][{j}] = {got}");
            }
        }
        assert!(
            elapsed.as_micros() < 1000,
            "runtime {elapsed:?} exceeds 1 ms"
        );
    });
}

#[test]
fn acceptance_2_quarterly_decomposition_golden() {
    criterion(2, "quarterly decomposition reproduces the published factors", || {
        let panel = quarterly_panel();
        let start = Instant::now();
        let d = decompose(&panel).unwrap();
        let elapsed = start.elapsed();

        let e_want = [4.20, 20.94, 29.01, 17.85, 24.41];
        for (g, w) in d.expected().iter().zip(&e_want) {
            assert!((g - w).abs() <= 0.01, "E: {g} vs {w}");
        }
        let f_want: [&[f64]; 2] = [
            &[-10.13, 12.42, 15.34, 9.63, 6.45],
            &[-0.78, -11.44, -8.37, -19.06, -17.07],
        ];
        assert_eq!(d.num_factors(), 2);
        for (i, want) in f_want.iter().enumerate() {
            let row = d.factors().row(i);
            let direct = row.iter().zip(*want).all(|(a, b)| (a - b).abs() <= 0.02);
            let negated = row.iter().zip(*want).all(|(a, b)| (a + b).abs() <= 0.02);
            assert!(direct || negated, "F row {i}: {row:?}");
        }
        assert!(d.f0() <= 0.01, "f0 = {}", d.f0());
        assert!((d.e0() - 13.51).abs() <= 0.01, "e0 = {}", d.e0());
        assert!((d.e_f() - 0.856).abs() <= 0.001, "eF = {}", d.e_f());
        assert!(d.eflag(), "eflag should be true");
        let approx_want = [4.84, 24.15, 26.64, 21.75, 19.03];
        for (g, w) in d.approx_expected().iter().zip(&approx_want) {
            assert!((g - w).abs() <= 0.02, "approx: {g} vs {w}");
        }
        let bd = variance_breakdown(&d);
        assert!((bd.productive - 626.0).abs() <= 1.0);
        assert!((bd.major_nonproductive - 856.0).abs() <= 1.0);
        assert!(
            elapsed.as_millis() < 10,
            "runtime {elapsed:?} exceeds 10 ms"
        );
    });
}

/// Random panel with mixed weight systems and ρ values.
fn random_panel(rng: &mut ChaCha8Rng, m_range: (usize, usize), n_range: (usize, usize)) -> ReturnPanel {
    let m = rng.gen_range(m_range.0..=m_range.1);
    let n = rng.gen_range(n_range.0..=n_range.1);
    let mut rows = Vec::with_capacity(m);
    let drift: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..m {
        rows.push(
            (0..n)
                .map(|j| drift[j] + rng.gen_range(-2.0..2.0))
                .collect::<Vec<f64>>(),
        );
    }
    let weights = match rng.gen_range(0..3) {
        0 => None,
        1 => Some((1..=m).map(|i| i as f64).collect::<Vec<f64>>()),
        _ => Some((0..m).map(|_| rng.gen_range(0.1..1.0)).collect()),
    };
    let rho = [1.0, 4.0, 12.0, 252.0][rng.gen_range(0..4)];
    let dates: Vec<NaiveDate> = (0..m)
        .map(|i| {
            NaiveDate::from_ymd_opt(2010, 1, 1)
                .unwrap()
                .checked_add_days(chrono::Days::new(i as u64))
                .unwrap()
        })
        .collect();
    let tickers: Vec<String> = (0..n).map(|j| format!("S{j}")).collect();
    ReturnPanel::new(dates, tickers, rows, weights, rho).unwrap()
}

#[test]
fn acceptance_3_relationship_suite() {
    criterion(3, "factor relationships hold on 200 random panels", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let start = Instant::now();
        for trial in 0..200 {
            let panel = random_panel(&mut rng, (3, 60), (1, 10));
            let m_periods = panel.num_periods();
            let n = panel.num_securities();
            let d = decompose(&panel).unwrap();
            let v = covariance(&panel);

            // Covariance reconstruction.
            if m_periods > n {
                let rec = d.reconstruct_covariance();
                let mut err = 0.0f64;
                let mut scale = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        err += (v.get(i, j) - rec.get(i, j)).powi(2);
                        scale += v.get(i, j).powi(2);
                    }
                }
                assert!(
                    err.sqrt() <= 1e-8 * scale.sqrt(),
                    "trial {trial}: reconstruction error {} vs {}",
                    err.sqrt(),
                    scale.sqrt()
                );
            }

            // Affine law / mean identity.
            let approx = d.approx_expected();
            if !d.eflag() {
                let emax = d.expected().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                for (a, e) in approx.iter().zip(d.expected()) {
                    assert!((a - e).abs() <= 1e-8 * emax.max(1e-300), "trial {trial}: affine law");
                }
            }
            let mean_e: f64 = d.expected().iter().sum::<f64>() / n as f64;
            let mean_a: f64 = approx.iter().sum::<f64>() / n as f64;
            assert!(
                (mean_e - mean_a).abs() <= 1e-8 * (1.0 + mean_e.abs()),
                "trial {trial}: mean identity"
            );

            // Row orthogonality and τ ordering.
            let taus = d.taus();
            let i0 = if d.e_f() > 0.0 { 1 } else { 0 };
            for i in i0..d.num_factors() {
                for j in (i + 1)..d.num_factors() {
                    let g = dot(d.factors().row(i), d.factors().row(j)).abs();
                    assert!(
                        g <= 1e-8 * taus[i] * taus[j] + 1e-300,
                        "trial {trial}: rows {i},{j} not orthogonal"
                    );
                }
            }
            for w in taus[i0..].windows(2) {
                assert!(w[0] >= w[1] - 1e-12 * w[0].abs(), "trial {trial}: tau order");
            }

            // Total-variance budget.
            let trace: f64 = (0..n).map(|j| v.get(j, j)).sum();
            let budget = n as f64 * d.f0().powi(2) + taus.iter().map(|t| t * t).sum::<f64>();
            assert!(
                (trace - budget).abs() <= 1e-8 * trace.abs().max(1e-300),
                "trial {trial}: variance budget {trace} vs {budget}"
            );

            // Nonnegativity.
            assert!(d.f0() >= 0.0 && d.e_f() >= 0.0);

            // Factor-count bound (zero factor matrices excepted).
            let m_out = d.num_factors();
            let zero_f = d.taus().iter().all(|&t| t == 0.0);
            assert!(m_out >= 1);
            if !zero_f {
                assert!(
                    m_out <= (m_periods - 1).min(n).max(1),
                    "trial {trial}: m = {m_out} for {m_periods}x{n}"
                );
            }

            // Scaling law against the ρ = 1 decomposition.
            let rho = panel.rho();
            let d1 = decompose(&panel.with_rho(1.0).unwrap()).unwrap();
            assert_eq!(d.eflag(), d1.eflag(), "trial {trial}: eflag changed with rho");
            let s = rho.sqrt();
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300);
            for j in 0..n {
                assert!(rel(d.expected()[j], rho * d1.expected()[j]), "trial {trial}: E scaling");
            }
            assert!(rel(d.e0(), rho * d1.e0()), "trial {trial}: e0 scaling");
            assert!(rel(d.e_f(), s * d1.e_f()), "trial {trial}: eF scaling");
            assert!(rel(d.f0(), s * d1.f0()), "trial {trial}: f0 scaling");
            for i in 0..d.num_factors() {
                for j in 0..n {
                    let a = d.factors().get(i, j);
                    let b = s * d1.factors().get(i, j);
                    assert!(
                        (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                        "trial {trial}: F scaling at ({i},{j})"
                    );
                }
            }

            // And E itself.
            let e_direct = expected_returns(&panel);
            for (a, b) in d.expected().iter().zip(&e_direct) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?} exceeds 5 s");
    });
}

fn example1() -> Decomposition {
    Decomposition::from_parts(
        vec!["A".into(), "B".into(), "C".into()],
        1.0,
        vec![6.0, 12.0, 14.0],
        vec![vec![-4.0, 2.0, 4.0], vec![2.0, -2.0, 3.0]],
        0.0,
        10.0,
        1.0,
        false,
    )
    .unwrap()
}

#[test]
fn acceptance_4_example1_geometry() {
    criterion(4, "worked three-security geometry is reproduced", || {
        let d = example1();
        let path = minvar_corners(&d, FactorRows::All).unwrap();
        let find = |want: &[f64]| -> bool {
            path.corners().iter().any(|c| {
                c.portfolio
                    .weights()
                    .iter()
                    .zip(want)
                    .all(|(g, w)| (g - w).abs() <= 1e-9)
            })
        };
        assert!(find(&[0.5, 0.5, 0.0]), "corner P missing");
        assert!(find(&[0.0, 0.6, 0.4]), "corner Q missing");
        let pe = 14.0 / 19.0;
        let qe = 5.0 / 19.0;
        assert!(
            find(&[pe * 0.5, pe * 0.5 + qe * 0.6, qe * 0.4]),
            "corner p_E missing"
        );
        let pr_p = project(&d, &Portfolio::new(vec![0.5, 0.5, 0.0]).unwrap()).unwrap();
        assert!((pr_p.x - -1.0).abs() <= 1e-12 && pr_p.y.abs() <= 1e-12);
        let pr_q = project(&d, &Portfolio::new(vec![0.0, 0.6, 0.4]).unwrap()).unwrap();
        assert!((pr_q.x - 2.8).abs() <= 1e-12 && pr_q.y.abs() <= 1e-12);
    });
}

/// Visits every grid portfolio with `steps` subdivisions of the simplex,
/// passing (x, |y|, e, v̂) to the callback, where v̂ = ‖F·p‖² over the rows
/// of `f`. Coordinates accumulate incrementally so the leaf cost stays flat.
fn for_each_grid_point<V: FnMut(f64, f64, f64, f64)>(f: &Mat, e: &[f64], steps: usize, visit: &mut V) {
    #[allow(clippy::too_many_arguments)]
    fn rec<V: FnMut(f64, f64, f64, f64)>(
        f: &Mat,
        e: &[f64],
        steps: usize,
        level: usize,
        remaining: usize,
        z: &mut [Vec<f64>],
        e_part: &mut [f64],
        visit: &mut V,
    ) {
        let n = f.cols();
        let k = f.rows();
        if level == n - 1 {
            let w = remaining as f64 / steps as f64;
            let mut v = 0.0;
            let mut x = 0.0;
            let mut y = 0.0;
            for i in 0..k {
                let zi = z[level][i] + w * f.get(i, level);
                v += zi * zi;
                if i == 0 {
                    x = zi;
                }
                if i == 1 {
                    y = zi;
                }
            }
            let ee = e_part[level] + w * e[level];
            visit(x, y.abs(), ee, v);
            return;
        }
        for c in 0..=remaining {
            let w = c as f64 / steps as f64;
            for i in 0..k {
                z[level + 1][i] = z[level][i] + w * f.get(i, level);
            }
            e_part[level + 1] = e_part[level] + w * e[level];
            rec(f, e, steps, level + 1, remaining - c, z, e_part, visit);
        }
    }
    let n = f.cols();
    let k = f.rows();
    let mut z = vec![vec![0.0; k]; n + 1];
    let mut e_part = vec![0.0; n + 1];
    rec(f, e, steps, 0, steps, &mut z, &mut e_part, visit);
}

/// Piecewise-linear scalar function sampled at breakpoints, for fast
/// pointwise evaluation of a path's |y|(x).
struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    fn from_path(d: &Decomposition, path: &PortfolioPath) -> Self {
        let xs: Vec<f64> = path.corners().iter().map(|c| c.x).collect();
        let ys: Vec<f64> = path
            .corners()
            .iter()
            .map(|c| dot(d.factors().row(1), c.portfolio.weights()).abs())
            .collect();
        PiecewiseLinear { xs, ys }
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ys[0];
        }
        let last = self.xs.len() - 1;
        if x >= self.xs[last] {
            return self.ys[last];
        }
        let mut i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p => p - 1,
        };
        if i >= last {
            i = last - 1;
        }
        let span = self.xs[i + 1] - self.xs[i];
        let t = if span == 0.0 { 0.0 } else { (x - self.xs[i]) / span };
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }
}

/// Piecewise-quadratic value function v̂(e) of a minimum-variance path:
/// on each segment v̂(t) = a + b·t + c·t² with t linear in e.
struct PiecewiseQuadratic {
    es: Vec<f64>,
    coef: Vec<(f64, f64, f64)>,
}

impl PiecewiseQuadratic {
    fn from_path(fk: &Mat, path: &PortfolioPath) -> Self {
        let es: Vec<f64> = path.corners().iter().map(|c| c.e).collect();
        let zs: Vec<Vec<f64>> = path
            .corners()
            .iter()
            .map(|c| fk.matvec(c.portfolio.weights()))
            .collect();
        let coef = zs
            .windows(2)
            .map(|w| {
                let dz: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
                (dot(&w[0], &w[0]), 2.0 * dot(&w[0], &dz), dot(&dz, &dz))
            })
            .collect();
        PiecewiseQuadratic { es, coef }
    }

    fn eval(&self, e: f64) -> f64 {
        let last = self.es.len() - 1;
        let seg = if e <= self.es[0] {
            0
        } else if e >= self.es[last] {
            last - 1
        } else {
            match self.es.partition_point(|&v| v <= e) {
                0 => 0,
                p => (p - 1).min(last - 1),
            }
        };
        let span = self.es[seg + 1] - self.es[seg];
        let t = if span == 0.0 {
            0.0
        } else {
            ((e - self.es[seg]) / span).clamp(0.0, 1.0)
        };
        let (a, b, c) = self.coef[seg];
        a + b * t + c * t * t
    }
}

#[test]
fn acceptance_5_path_oracles() {
    criterion(5, "paths match simplex grid search on 50 random instances", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let start = Instant::now();
        let steps = 500; // 0.002 grid
        for trial in 0..50 {
            // Panels with M > n keep eflag false and m = n − 1.
            let n = rng.gen_range(2..=4usize);
            let panel = random_panel(&mut rng, (8, 14), (n, n));
            let panel = panel.with_rho(1.0).unwrap();
            let d = decompose(&panel).unwrap();
            let f = d.factors();
            let m = d.num_factors();

            // Grid resolution in x and in the objectives.
            let xs = f.row(0);
            let x_spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let h = 1.0 / steps as f64;
            let tol_x = h * x_spread.max(1e-9);

            // Minimum-|y| path over the full range (needs two factor rows).
            let miny = if m >= 2 {
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Some(min_abs_y_path(&d, (lo, hi)).unwrap())
            } else {
                None
            };
            let ys = if m >= 2 { f.row(1).to_vec() } else { vec![0.0] };
            let y_spread = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol_y = 2.0 * h * y_spread.max(1e-9);

            // Full minimum-variance path; compare in v̂ = ‖Fp‖².
            let path = minvar_corners(&d, FactorRows::All).unwrap();
            let vk = f.gram();
            let v_fn = PiecewiseQuadratic::from_path(f, &path);
            let vmax = (0..d.num_securities()).map(|j| vk.get(j, j)).fold(0.0f64, f64::max);
            let tol_v = 4.0 * h * vmax.max(1e-9);

            let y_fn = miny.as_ref().map(|mp| {
                let lo = mp.corners()[0].x;
                let hi = mp.corners().last().unwrap().x;
                (PiecewiseLinear::from_path(&d, mp), lo, hi)
            });
            let mut worst_y = 0.0f64;
            let mut worst_v = 0.0f64;
            for_each_grid_point(f, d.expected(), steps, &mut |x, yabs, e, vhat| {
                if let Some((yf, lo, hi)) = &y_fn {
                    if x >= lo - tol_x && x <= hi + tol_x {
                        worst_y = worst_y.max(yf.eval(x.clamp(*lo, *hi)) - yabs);
                    }
                }
                worst_v = worst_v.max(v_fn.eval(e) - vhat);
            });
            assert!(
                worst_y <= tol_y,
                "trial {trial}: grid beats min-|y| path by {worst_y} (tol {tol_y})"
            );
            assert!(
                worst_v <= tol_v,
                "trial {trial}: grid beats minvar path by {worst_v} (tol {tol_v})"
            );
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?} exceeds 30 s");
    });
}

#[test]
fn acceptance_6_path_statistics_quadrature() {
    criterion(6, "closed-form path statistics match trapezoid quadrature", || {
        let check = |d: &Decomposition, path: &PortfolioPath| {
            let c = path.corners();
            if c.len() < 2 {
                return;
            }
            let (x_lo, x_hi) = (c[0].x, c[c.len() - 1].x);
            if x_hi - x_lo <= 0.0 {
                return;
            }
            let stats = path_stats(d, path).unwrap();
            let n_pts = 10_000usize;
            let f = d.factors();
            let ff = d.f0() * d.f0();
            let mut sum = 0.0;
            for i in 0..=n_pts {
                let x = x_lo + (x_hi - x_lo) * i as f64 / n_pts as f64;
                let p = path.portfolio_at(x).unwrap();
                let z = f.matvec(p.weights());
                let v = ff + dot(&z, &z);
                let w = if i == 0 || i == n_pts { 0.5 } else { 1.0 };
                sum += w * v;
            }
            let avg_v = sum / n_pts as f64;
            let rel = (stats.rms_sigma.powi(2) - avg_v).abs() / avg_v;
            assert!(rel <= 1e-6, "quadrature mismatch: rel err {rel}");
        };

        let d = example1();
        let eff = minvar_corners(&d, FactorRows::All).unwrap().efficient();
        check(&d, &eff);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut done = 0;
        while done < 20 {
            let n = rng.gen_range(2..=5usize);
            let panel = random_panel(&mut rng, (8, 20), (n, n));
            let d = decompose(&panel).unwrap();
            let path = minvar_corners(&d, FactorRows::All).unwrap();
            check(&d, &path);
            check(&d, &path.efficient());
            done += 1;
        }
    });
}

// ---------------------------------------------------------------------------
// Criterion 7: golden tables against the 2010–2011 adjusted-close file.
// The file ships alongside the original data set and is not bundled; the
// test skips (with a SKIP line) when it is absent. Override the location
// with RTNFACTOR_PRICES_2010_2011.
// ---------------------------------------------------------------------------

const FIVE_ETFS: [&str; 5] = ["IEF", "IWB", "IWM", "EFA", "EEM"];
const EM_18: [&str; 18] = [
    "BKF", "ECH", "EEM", "EMIF", "EPU", "ESR", "EWM", "EWT", "EWW", "EWY", "EWZ", "EZA", "FCHI",
    "FXI", "ILF", "INDY", "THD", "TUR",
];
const EM_4: [&str; 4] = ["ECH", "EPU", "EWM", "EWT"];

struct GoldenDecomp {
    e: &'static [f64],
    f: &'static [&'static [f64]],
    f0: f64,
    e0: f64,
    e_f: f64,
    per_security: &'static [f64],
}

const TABLE2_LATE_HEAVY: GoldenDecomp = GoldenDecomp {
    e: &[2.86, 18.77, 27.12, 13.84, 21.79],
    f: &[
        &[-2.79, 7.80, 13.36, 4.52, 9.81],
        &[4.14, -11.81, -13.48, -19.57, -16.81],
        &[2.30, -2.15, -5.06, 0.01, 6.12],
        &[-4.14, 2.02, -2.26, -0.89, 0.40],
    ],
    f0: 5.07,
    e0: 7.05,
    e_f: 1.502,
    per_security: &[47.0, 209.0, 391.0, 404.0, 416.0],
};

const TABLE3_UNIFORM: GoldenDecomp = GoldenDecomp {
    e: &[7.79, 11.62, 17.47, 8.12, 17.27],
    f: &[
        &[0.00, 3.02, 7.62, 0.27, 7.46],
        &[5.41, -15.08, -18.63, -20.92, -19.15],
        &[-1.74, 2.31, 6.80, -2.94, -5.71],
        &[-3.33, 2.09, -1.48, -2.17, 1.22],
    ],
    f0: 4.86,
    e0: 7.78,
    e_f: 1.271,
    per_security: &[43.0, 246.0, 453.0, 451.0, 456.0],
};

const TABLE10_2011_FIVE: GoldenDecomp = GoldenDecomp {
    e: &[15.65, 1.24, -4.43, -12.23, -18.79],
    f: &[
        &[1.59, -6.29, -9.39, -13.66, -17.26],
        &[-6.91, 21.05, 27.09, 22.92, 21.30],
        &[-1.80, 0.21, -5.70, 7.11, -1.19],
        &[-1.84, 1.27, -3.35, -2.36, 4.96],
    ],
    f0: 4.62,
    e0: 12.74,
    e_f: 1.827,
    per_security: &[57.0, 484.0, 866.0, 768.0, 777.0],
};

const TABLE11_2011_FOUR: GoldenDecomp = GoldenDecomp {
    e: &[-26.45, -21.78, -2.60, -21.78],
    f: &[
        &[-10.85, -8.00, 3.70, -8.01],
        &[4.02, -19.66, 3.58, 7.08],
        &[9.09, -1.70, -0.84, -9.46],
    ],
    f0: 19.88,
    e0: -8.66,
    e_f: 1.639,
    per_security: &[217.0, 453.0, 27.0, 204.0],
};

fn assert_golden_decomp(d: &Decomposition, want: &GoldenDecomp, label: &str) {
    for (g, w) in d.expected().iter().zip(want.e) {
        assert!((g - w).abs() <= 0.05, "{label}: E {g} vs {w}");
    }
    assert_eq!(d.num_factors(), want.f.len(), "{label}: m");
    for (i, row) in want.f.iter().enumerate() {
        let got = d.factors().row(i);
        let direct = got.iter().zip(*row).all(|(a, b)| (a - b).abs() <= 0.05);
        let negated = got.iter().zip(*row).all(|(a, b)| (a + b).abs() <= 0.05);
        assert!(direct || negated, "{label}: F row {i}: {got:?}");
    }
    assert!((d.f0() - want.f0).abs() <= 0.05, "{label}: f0 {}", d.f0());
    assert!((d.e0() - want.e0).abs() <= 0.05, "{label}: e0 {}", d.e0());
    assert!((d.e_f() - want.e_f).abs() <= 0.002, "{label}: eF {}", d.e_f());
    let bd = variance_breakdown(d);
    for (g, w) in bd.per_security.iter().zip(want.per_security) {
        assert!((g - w).abs() <= 2.0, "{label}: per-security {g} vs {w}");
    }
}

fn find_prices_file() -> Option<std::path::PathBuf> {
    if let Ok(p) = std::env::var("RTNFACTOR_PRICES_2010_2011") {
        let p = std::path::PathBuf::from(p);
        if p.exists() {
            return Some(p);
        }
    }
    for cand in [
        "testdata/AdjustedClosingPrices_2010-2011.csv",
        "../testdata/AdjustedClosingPrices_2010-2011.csv",
        "../../testdata/AdjustedClosingPrices_2010-2011.csv",
        "AdjustedClosingPrices_2010-2011.csv",
    ] {
        let p = std::path::PathBuf::from(cand);
        if p.exists() {
            return Some(p);
        }
    }
    None
}

fn truncate_prices(panel: &PricePanel, last: NaiveDate) -> PricePanel {
    let keep = panel.dates().iter().filter(|&&d| d <= last).count();
    let rows: Vec<Vec<f64>> = (0..keep).map(|i| panel.prices().row(i).to_vec()).collect();
    PricePanel::new(
        panel.dates()[..keep].to_vec(),
        panel.tickers().to_vec(),
        rows,
    )
    .unwrap()
}

fn from_date(panel: &PricePanel, first: NaiveDate) -> PricePanel {
    let skip = panel.dates().iter().filter(|&&d| d < first).count();
    let rows: Vec<Vec<f64>> = (skip..panel.dates().len())
        .map(|i| panel.prices().row(i).to_vec())
        .collect();
    PricePanel::new(
        panel.dates()[skip..].to_vec(),
        panel.tickers().to_vec(),
        rows,
    )
    .unwrap()
}

#[test]
fn acceptance_7_full_scale_golden_tables() {
    let Some(path) = find_prices_file() else {
        println!("criterion 7: SKIP - ancillary 2010-2011 price file not present");
        return;
    };
    criterion(7, "full-scale golden tables from the 2010-2011 price file", || {
        let start = Instant::now();
        let text = std::fs::read_to_string(&path).unwrap();
        let all = PricePanel::parse(&text).unwrap();
        let anchor = NaiveDate::from_ymd_opt(2010, 12, 31).unwrap();
        let all = all.normalize(anchor, 100.0).unwrap();
        let sel = |names: &[&str]| -> Vec<String> { names.iter().map(|s| s.to_string()).collect() };

        // --- 2010: last 200 market-day returns ---
        let p2010 = truncate_prices(&all, anchor);
        let make_2010 = |names: &[&str], spec: &WeightSpec| -> Decomposition {
            let panel = p2010
                .select(&sel(names))
                .unwrap()
                .linear_returns()
                .unwrap()
                .window_last(200)
                .unwrap()
                .with_weights(spec)
                .unwrap()
                .with_rho(252.0)
                .unwrap();
            decompose(&panel).unwrap()
        };
        let late = WeightSpec::late_heavy_default();
        let d5_late = make_2010(&FIVE_ETFS, &late);
        assert_golden_decomp(&d5_late, &TABLE2_LATE_HEAVY, "five-ETF late-heavy");
        let d5_uni = make_2010(&FIVE_ETFS, &WeightSpec::Uniform);
        assert_golden_decomp(&d5_uni, &TABLE3_UNIFORM, "five-ETF uniform");

        // Total-variance breakdowns (late-heavy and uniform; plus 18-fund).
        let bd_late = variance_breakdown(&d5_late);
        for (got, want) in [
            (bd_late.systemic, 128.0),
            (bd_late.productive, 364.0),
            (bd_late.major_nonproductive, 1004.0),
            (bd_late.other_nonproductive, 100.0),
            (bd_late.total, 1596.0),
        ] {
            assert!((got - want).abs() <= 2.0, "late-heavy breakdown {got} vs {want}");
        }
        let bd_uni = variance_breakdown(&d5_uni);
        for (got, want) in [
            (bd_uni.systemic, 118.0),
            (bd_uni.productive, 123.0),
            (bd_uni.major_nonproductive, 1408.0),
            (bd_uni.other_nonproductive, 120.0),
            (bd_uni.total, 1769.0),
        ] {
            assert!((got - want).abs() <= 2.0, "uniform breakdown {got} vs {want}");
        }
        let d18 = make_2010(&EM_18, &late);
        let bd18 = variance_breakdown(&d18);
        for (got, want) in [
            (bd18.systemic, 1131.0),
            (bd18.productive, 1090.0),
            (bd18.major_nonproductive, 4427.0),
            (bd18.other_nonproductive, 1512.0),
            (bd18.total, 8160.0),
        ] {
            assert!((got - want).abs() <= 2.0, "18-fund breakdown {got} vs {want}");
        }

        // Five-ETF optimal paths.
        let path5 = minvar_corners(&d5_late, FactorRows::All).unwrap();
        let eff5 = path5.efficient();
        let eff_w: [&[f64]; 4] = [
            &[0.690, 0.310, 0.0, 0.0, 0.0],
            &[0.618, 0.382, 0.0, 0.0, 0.0],
            &[0.550, 0.0, 0.450, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        assert_eq!(eff5.corners().len(), 4, "five-ETF efficient corner count");
        for (c, want) in eff5.corners().iter().zip(eff_w) {
            for (g, w) in c.portfolio.weights().iter().zip(want) {
                assert!((g - w).abs() <= 0.005, "five-ETF efficient corner weights");
            }
        }
        let st5 = path_stats(&d5_late, &eff5).unwrap();
        assert!((st5.avg_e - 17.45).abs() <= 0.05);
        assert!((st5.rms_sigma - 12.70).abs() <= 0.05);
        let x_e = eff5.corners()[0].x;
        let x_max = eff5.corners().last().unwrap().x;
        let miny5 = min_abs_y_path(&d5_late, (x_e, x_max)).unwrap();
        let miny_w: [&[f64]; 3] = [
            &[0.777, 0.0, 0.187, 0.036, 0.0],
            &[0.765, 0.0, 0.235, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        assert_eq!(miny5.corners().len(), 3, "five-ETF min-|y| corner count");
        for (c, want) in miny5.corners().iter().zip(miny_w) {
            for (g, w) in c.portfolio.weights().iter().zip(want) {
                assert!((g - w).abs() <= 0.005, "five-ETF min-|y| corner weights");
            }
        }
        let stm5 = path_stats(&d5_late, &miny5).unwrap();
        assert!((stm5.avg_e - 17.45).abs() <= 0.05);
        assert!((stm5.rms_sigma - 12.74).abs() <= 0.05);

        // Four-EM-fund paths.
        let d4 = make_2010(&EM_4, &late);
        let path4 = minvar_corners(&d4, FactorRows::All).unwrap();
        let eff4 = path4.efficient();
        let eff4_w: [&[f64]; 4] = [
            &[0.395, 0.130, 0.416, 0.059],
            &[0.464, 0.503, 0.0, 0.033],
            &[0.455, 0.545, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ];
        assert_eq!(eff4.corners().len(), 4, "four-fund efficient corner count");
        for (c, want) in eff4.corners().iter().zip(eff4_w) {
            for (g, w) in c.portfolio.weights().iter().zip(want) {
                assert!((g - w).abs() <= 0.005, "four-fund efficient corner weights");
            }
        }
        let st4 = path_stats(&d4, &eff4).unwrap();
        assert!((st4.avg_e - 44.77).abs() <= 0.05);
        assert!((st4.rms_sigma - 13.73).abs() <= 0.05);
        let miny4 = min_abs_y_path(&d4, (eff4.corners()[0].x, eff4.corners().last().unwrap().x))
            .unwrap();
        let miny4_w: [&[f64]; 3] = [
            &[0.371, 0.156, 0.473, 0.0],
            &[0.456, 0.544, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ];
        assert_eq!(miny4.corners().len(), 3, "four-fund min-|y| corner count");
        for (c, want) in miny4.corners().iter().zip(miny4_w) {
            for (g, w) in c.portfolio.weights().iter().zip(want) {
                assert!((g - w).abs() <= 0.005, "four-fund min-|y| corner weights");
            }
        }
        let stm4 = path_stats(&d4, &miny4).unwrap();
        assert!((stm4.avg_e - 44.77).abs() <= 0.05);
        assert!((stm4.rms_sigma - 13.73).abs() <= 0.05);

        // Relative risk decompositions (EEM and the four-fund p_E, in two
        // universes each).
        let idx_eem_18 = EM_18.iter().position(|t| *t == "EEM").unwrap();
        let rc18 = risk_decomposition(&d18, &Portfolio::unit(18, idx_eem_18)).unwrap();
        for (got, want) in [
            (rc18.e, 21.79),
            (rc18.systemic, 7.93),
            (rc18.productive, 8.30),
            (rc18.major_nonproductive, 17.37),
            (rc18.other_nonproductive, 2.96),
            (rc18.total, 21.03),
        ] {
            assert!((got - want).abs() <= 0.05, "EEM in 18-fund: {got} vs {want}");
        }
        let rc5 = risk_decomposition(&d5_late, &Portfolio::unit(5, 4)).unwrap();
        for (got, want) in [
            (rc5.e, 21.79),
            (rc5.systemic, 5.07),
            (rc5.productive, 9.81),
            (rc5.major_nonproductive, 16.81),
            (rc5.other_nonproductive, 6.13),
            (rc5.total, 21.03),
        ] {
            assert!((got - want).abs() <= 0.05, "EEM in 5-fund: {got} vs {want}");
        }
        // p_E of the four-fund universe, expanded into the 18-fund universe.
        let pe4 = eff4.corners()[0].portfolio.clone();
        let mut pe18_w = vec![0.0; 18];
        for (j, t) in EM_4.iter().enumerate() {
            let pos = EM_18.iter().position(|u| u == t).unwrap();
            pe18_w[pos] = pe4.weights()[j];
        }
        let rc_pe18 = risk_decomposition(&d18, &Portfolio::new(pe18_w).unwrap()).unwrap();
        for (got, want) in [
            (rc_pe18.e, 37.47),
            (rc_pe18.systemic, 7.93),
            (rc_pe18.productive, 4.01),
            (rc_pe18.major_nonproductive, 7.83),
            (rc_pe18.other_nonproductive, 4.37),
            (rc_pe18.total, 12.62),
        ] {
            assert!((got - want).abs() <= 0.05, "p_E in 18-fund: {got} vs {want}");
        }
        let rc_pe4 = risk_decomposition(&d4, &pe4).unwrap();
        for (got, want) in [
            (rc_pe4.e, 37.47),
            (rc_pe4.systemic, 12.62),
            (rc_pe4.productive, 0.0),
            (rc_pe4.major_nonproductive, 0.0),
            (rc_pe4.other_nonproductive, 0.0),
            (rc_pe4.total, 12.62),
        ] {
            assert!((got - want).abs() <= 0.05, "p_E in 4-fund: {got} vs {want}");
        }

        // --- 2011: full-year uniform, ρ = M = 252 ---
        let p2011 = from_date(&all, anchor);
        let make_2011 = |names: &[&str]| -> (Decomposition, PricePanel) {
            let prices = p2011.select(&sel(names)).unwrap();
            let panel = prices
                .linear_returns()
                .unwrap()
                .with_weights(&WeightSpec::Uniform)
                .unwrap()
                .with_rho(252.0)
                .unwrap();
            assert_eq!(panel.num_periods(), 252, "2011 should have 252 returns");
            (decompose(&panel).unwrap(), prices)
        };
        let (d5_2011, px5) = make_2011(&FIVE_ETFS);
        assert_golden_decomp(&d5_2011, &TABLE10_2011_FIVE, "five-ETF 2011");
        let (d4_2011, px4) = make_2011(&EM_4);
        assert_golden_decomp(&d4_2011, &TABLE11_2011_FOUR, "four-fund 2011");

        // Total-return identity: with prices normalized at 100 on the
        // anchor and ρ = M uniform, E equals the final price minus 100.
        for (d, px) in [(&d5_2011, &px5), (&d4_2011, &px4)] {
            let last = px.dates().len() - 1;
            for j in 0..d.num_securities() {
                let want = px.prices().get(last, j) - 100.0;
                let got = d.expected()[j];
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1.0),
                    "total-return identity: {got} vs {want}"
                );
            }
        }

        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?} exceeds 10 s");
    });
}
