//! The return decomposition: from a weighted return panel produce expected
//! returns `E`, the factor matrix `F`, systemic risk `f0`, and the affine
//! law `e = e0 + eF·x` linking expected return to productive risk.
//!
//! The computation runs at one period per unit time and rescales once on
//! exit: `E` and `e0` by ρ, `F`, `f0` and `eF` by √ρ. The output satisfies
//!
//! * `V = f0² + FᵀF` where `V` is the (ρ-scaled) covariance of returns,
//! * `E = e0 + eF·F(1,:)` exactly when `eflag` is false, and
//!   `mean(E) = e0 + eF·mean(F(1,:))` always,
//! * rows `2..m` of `F` pairwise orthogonal with non-increasing norms
//!   τ₂ ≥ … ≥ τ_m (rows `1..m` when `eF = 0` and `F ≠ 0`).
//!
//! `eflag` is true exactly when a constant vector is parallel to the
//! returns flat, which makes the affine law approximate; the gradient is
//! then the least-squares fit anchored at the mean risk component.

use crate::ingest::ReturnPanel;
use crate::mat::{self, Mat};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Precision floor used for rank truncation and the consistency tests.
pub(crate) const EPS0: f64 = f64::EPSILON * 1e2;

/// The decomposition quintuple `(E, F, f0, e0, eF)` plus `eflag`, with the
/// tickers and ρ carried through for reporting.
#[derive(Debug, Clone)]
pub struct Decomposition {
    tickers: Vec<String>,
    rho: f64,
    e: Vec<f64>,
    f: Mat,
    f0: f64,
    e0: f64,
    e_f: f64,
    eflag: bool,
}

impl Decomposition {
    /// Assembles a decomposition from raw parts (for example a factor file
    /// produced elsewhere), validating shapes and sign constraints.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tickers: Vec<String>,
        rho: f64,
        e: Vec<f64>,
        f_rows: Vec<Vec<f64>>,
        f0: f64,
        e0: f64,
        e_f: f64,
        eflag: bool,
    ) -> Result<Self> {
        let n = tickers.len();
        if e.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: e.len(),
            });
        }
        if f_rows.is_empty() {
            return Err(Error::Validation("factor matrix needs at least one row".into()));
        }
        for r in &f_rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
        }
        if !rho.is_finite() || rho < 1.0 {
            return Err(Error::InvalidRho(rho));
        }
        if f0 < 0.0 || e_f < 0.0 {
            return Err(Error::Validation("f0 and eF must be nonnegative".into()));
        }
        Ok(Decomposition {
            tickers,
            rho,
            e,
            f: Mat::from_rows(&f_rows),
            f0,
            e0,
            e_f,
            eflag,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Expected returns, percent per unit time.
    pub fn expected(&self) -> &[f64] {
        &self.e
    }

    /// The m×n factor matrix. Row 0 is productive risk; the remaining rows
    /// are the principal nonproductive risks.
    pub fn factors(&self) -> &Mat {
        &self.f
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn e_f(&self) -> f64 {
        self.e_f
    }

    pub fn eflag(&self) -> bool {
        self.eflag
    }

    pub fn num_factors(&self) -> usize {
        self.f.rows()
    }

    pub fn num_securities(&self) -> usize {
        self.f.cols()
    }

    /// Row norms τ_i of the factor matrix.
    pub fn taus(&self) -> Vec<f64> {
        (0..self.f.rows()).map(|i| mat::norm(self.f.row(i))).collect()
    }

    /// `e0 + eF·F(1,:)` — equals `E` exactly when `eflag` is false.
    pub fn approx_expected(&self) -> Vec<f64> {
        self.f
            .row(0)
            .iter()
            .map(|&x| self.e0 + self.e_f * x)
            .collect()
    }

    /// `f0² + FᵀF`, the covariance implied by the factors (the scalar `f0²`
    /// is added to every coefficient).
    pub fn reconstruct_covariance(&self) -> Mat {
        let mut v = self.f.gram();
        let ff = self.f0 * self.f0;
        for i in 0..v.rows() {
            for j in 0..v.cols() {
                let val = v.get(i, j) + ff;
                v.set(i, j, val);
            }
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DecompositionDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DecompositionDoc =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("bad decomposition file: {e}")))?;
        doc.try_into()
    }
}

/// Wire format for decomposition files.
#[derive(Serialize, Deserialize)]
struct DecompositionDoc {
    tickers: Vec<String>,
    rho: f64,
    m: usize,
    n: usize,
    #[serde(rename = "E")]
    e: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    f0: f64,
    e0: f64,
    #[serde(rename = "eF")]
    e_f: f64,
    eflag: bool,
}

impl From<&Decomposition> for DecompositionDoc {
    fn from(d: &Decomposition) -> Self {
        DecompositionDoc {
            tickers: d.tickers.clone(),
            rho: d.rho,
            m: d.f.rows(),
            n: d.f.cols(),
            e: d.e.clone(),
            f: d.f.to_rows(),
            f0: d.f0,
            e0: d.e0,
            e_f: d.e_f,
            eflag: d.eflag,
        }
    }
}

impl TryFrom<DecompositionDoc> for Decomposition {
    type Error = Error;
    fn try_from(doc: DecompositionDoc) -> Result<Self> {
        if doc.f.len() != doc.m || doc.tickers.len() != doc.n {
            return Err(Error::Validation(
                "decomposition file dimensions are inconsistent".into(),
            ));
        }
        Decomposition::from_parts(
            doc.tickers, doc.rho, doc.e, doc.f, doc.f0, doc.e0, doc.e_f, doc.eflag,
        )
    }
}

/// Expected returns `E = ρ·ωᵀR`, percent per unit time.
pub fn expected_returns(panel: &ReturnPanel) -> Vec<f64> {
    let r = panel.returns();
    let w = panel.weights();
    let rho = panel.rho();
    (0..r.cols())
        .map(|j| rho * (0..r.rows()).map(|i| w[i] * r.get(i, j)).sum::<f64>())
        .collect()
}

/// The ω-weighted covariance of returns, scaled by ρ, computed directly
/// from the deviation vectors. This is the independent check the factor
/// reconstruction is tested against.
pub fn covariance(panel: &ReturnPanel) -> Mat {
    let r = panel.returns();
    let w = panel.weights();
    let rho = panel.rho();
    let m = r.rows();
    let n = r.cols();
    let e: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[i] * r.get(i, j)).sum::<f64>())
        .collect();
    let mut v = Mat::zeros(n, n);
    for i in 0..m {
        for j in 0..n {
            let zj = r.get(i, j) - e[j];
            for k in j..n {
                let zk = r.get(i, k) - e[k];
                let val = v.get(j, k) + rho * w[i] * zj * zk;
                v.set(j, k, val);
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            v.set(j, k, v.get(k, j));
        }
    }
    v
}

/// Initial setup: per-period expected returns and the β-scaled risk matrix
/// `Z = diag(β)R − βE` with `β = √ω`, whose Gram matrix is the per-period
/// covariance. `sig_z` is its Frobenius norm, the square root of total
/// variance.
pub(crate) struct RiskSetup {
    pub e_period: Vec<f64>,
    pub z: Mat,
    pub sig_z: f64,
}

pub(crate) fn risk_setup(r: &Mat, w: &[f64]) -> RiskSetup {
    let m = r.rows();
    let n = r.cols();
    let e: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[i] * r.get(i, j)).sum::<f64>())
        .collect();
    let mut z = Mat::zeros(m, n);
    for i in 0..m {
        let b = w[i].sqrt();
        for j in 0..n {
            z.set(i, j, b * r.get(i, j) - b * e[j]);
        }
    }
    let sig_z = z.frobenius();
    RiskSetup {
        e_period: e,
        z,
        sig_z,
    }
}

/// Decomposes a return panel into orthogonal factors of expected return and
/// systemic, productive, and nonproductive risk.
pub fn decompose(panel: &ReturnPanel) -> Result<Decomposition> {
    let r = panel.returns();
    let m_periods = r.rows();
    let n = r.cols();
    let rho = panel.rho();
    if !rho.is_finite() || rho < 1.0 {
        return Err(Error::InvalidRho(rho));
    }
    let mut w = panel.weights().to_vec();
    if w.len() != m_periods {
        return Err(Error::InvalidWeights(format!(
            "expected {m_periods} weights, got {}",
            w.len()
        )));
    }
    if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    let ws: f64 = w.iter().sum();
    for x in &mut w {
        *x /= ws;
    }
    let sqrt_rho = rho.sqrt();

    let setup = risk_setup(r, &w);
    let e_per = setup.e_period;
    let eps_z = EPS0 * setup.sig_z;

    // Compact QR of Z with column pivoting; drop trailing rows with
    // negligible norm.
    let qr = mat::qr_pivot(&setup.z);
    let mut f = qr.r;
    let perm = qr.perm;
    let mut m = f.rows();
    while m > 1 && mat::norm(&f.row(m - 1)[m - 1..]) <= eps_z {
        f.truncate_rows(m - 1);
        m -= 1;
    }
    let mut inv = vec![0usize; n];
    for (k, &orig) in perm.iter().enumerate() {
        inv[orig] = k;
    }

    let scaled_e: Vec<f64> = e_per.iter().map(|&x| x * rho).collect();

    if n == 1 {
        let f0 = f.get(0, 0).abs() * sqrt_rho;
        return Decomposition::from_parts(
            panel.tickers().to_vec(),
            rho,
            scaled_e.clone(),
            vec![vec![0.0]],
            f0,
            scaled_e[0],
            0.0,
            false,
        );
    }

    if m == 1 {
        let row = f.row(0);
        let fmin = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let fmax = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // <= so that an all-zero risk row (single period, or a zero panel)
        // lands here too instead of falling through with an empty tangent.
        if fmax - fmin <= EPS0 * fmin.abs().max(fmax.abs()) {
            let e0 = e_per.iter().sum::<f64>() / n as f64;
            let f0 = ((fmin + fmax) / 2.0).abs();
            let ee: f64 = e_per.iter().map(|x| x * x).sum();
            let eflag = ee - n as f64 * e0 * e0 > EPS0 * ee;
            return Decomposition::from_parts(
                panel.tickers().to_vec(),
                rho,
                scaled_e,
                vec![vec![0.0; n]],
                f0 * sqrt_rho,
                e0 * rho,
                0.0,
                eflag,
            );
        }
    }

    // Z-flat tangent space: columns 2..n now represent z_j − z_1.
    let e1 = e_per[perm[0]];
    let b_diff: Vec<f64> = (1..n).map(|j| e_per[perm[j]] - e1).collect();
    let f00 = f.get(0, 0);
    for j in 1..n {
        let v = f.get(0, j) - f00;
        f.set(0, j, v);
    }

    // Givens sweep restoring triangular form in the tangent block.
    for j in 1..m {
        let a = f.get(j - 1, j);
        let b = f.get(j, j);
        let r_h = a.hypot(b);
        let (cs, sn) = if r_h == 0.0 { (1.0, 0.0) } else { (a / r_h, b / r_h) };
        let rotate = |f: &mut Mat, col: usize| {
            let x = f.get(j - 1, col);
            let y = f.get(j, col);
            f.set(j - 1, col, cs * x + sn * y);
            f.set(j, col, -sn * x + cs * y);
        };
        rotate(&mut f, 0);
        for col in j..n {
            rotate(&mut f, col);
        }
        f.set(j, j, 0.0);
    }

    // Systemic risk: if the last tangent row is negligible the Z-flat
    // tangent space has dimension m−1 and the last basis direction carries
    // the offset of the flat from the origin.
    let tail = &f.row(m - 1)[m..];
    let mut f0 = 0.0;
    if mat::norm(tail) <= eps_z {
        f0 = f.get(m - 1, 0).abs();
        f.truncate_rows(m - 1);
        m -= 1;
    }

    // Constant expected returns: no productive direction, every row is
    // principal nonproductive risk.
    let emin = e_per.iter().cloned().fold(f64::INFINITY, f64::min);
    let emax = e_per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if emax - emin <= EPS0 * emin.abs().max(emax.abs()) {
        for i in 0..m {
            let base = f.get(i, 0);
            for j in 1..n {
                let v = f.get(i, j) + base;
                f.set(i, j, v);
            }
        }
        let mut fu = f.select_cols(&inv);
        mat::orthogonalize_rows(&mut fu, 0);
        fu.scale(sqrt_rho);
        let e0 = e_per.iter().sum::<f64>() / n as f64;
        return Decomposition::from_parts(
            panel.tickers().to_vec(),
            rho,
            scaled_e,
            fu.to_rows(),
            f0 * sqrt_rho,
            e0 * rho,
            0.0,
            false,
        );
    }

    // Gradient of expected return over the tangent space. The exact solve
    // succeeds iff no constant vector parallels the returns flat; otherwise
    // fall back to the least-squares fit anchored at the mean risk
    // component.
    let tangent = f.select_cols(&(1..n).collect::<Vec<_>>());
    let tangent_t = transpose(&tangent);
    let (g0, resid) = mat::lstsq(&tangent_t, &b_diff)?;
    let norm_b = mat::norm(&b_diff);
    let eflag = resid / norm_b > EPS0;
    let (g, e0_per, e_f_per);
    if !eflag {
        let col0: Vec<f64> = f.col(0);
        e0_per = e1 - mat::dot(&g0, &col0);
        e_f_per = mat::norm(&g0);
        g = g0;
    } else {
        for i in 0..m {
            let base = f.get(i, 0);
            for j in 1..n {
                let v = f.get(i, j) + base;
                f.set(i, j, v);
            }
        }
        let v_mean: Vec<f64> = (0..m)
            .map(|i| f.row(i).iter().sum::<f64>() / n as f64)
            .collect();
        let mut centered = f.clone();
        for i in 0..m {
            for j in 0..n {
                let val = centered.get(i, j) - v_mean[i];
                centered.set(i, j, val);
            }
        }
        let e_mean = e_per.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = (0..n).map(|j| e_per[perm[j]] - e_mean).collect();
        let centered_t = transpose(&centered);
        let (g1, _) = mat::lstsq(&centered_t, &c)?;
        e0_per = e_mean - mat::dot(&g1, &v_mean);
        e_f_per = mat::norm(&g1);
        g = g1;
    }

    // Householder reflection sending the gradient to the first coordinate
    // axis, with the productive row signed so eF ≥ 0 means increasing x
    // increases e.
    let norm_g = mat::norm(&g);
    if norm_g > 0.0 {
        let alpha = if g[0] >= 0.0 { -norm_g } else { norm_g };
        let mut v = g.clone();
        v[0] -= alpha;
        let vtv = mat::dot(&v, &v);
        if vtv > 0.0 {
            let beta = 2.0 / vtv;
            for j in 0..n {
                let mut s = 0.0;
                for i in 0..m {
                    s += v[i] * f.get(i, j);
                }
                s *= beta;
                for i in 0..m {
                    let val = f.get(i, j) - s * v[i];
                    f.set(i, j, val);
                }
            }
        }
        let signx = if alpha >= 0.0 { 1.0 } else { -1.0 };
        if signx < 0.0 {
            for x in f.row_mut(0) {
                *x = -*x;
            }
        }
    }
    if !eflag {
        for i in 0..m {
            let base = f.get(i, 0);
            for j in 1..n {
                let v = f.get(i, j) + base;
                f.set(i, j, v);
            }
        }
    }

    // Principal components of nonproductive risk.
    if m > 1 {
        mat::orthogonalize_rows(&mut f, 1);
    }

    // Unpermute columns and scale per ρ.
    let mut f_final = f.select_cols(&inv);
    f_final.scale(sqrt_rho);

    Decomposition::from_parts(
        panel.tickers().to_vec(),
        rho,
        scaled_e,
        f_final.to_rows(),
        f0 * sqrt_rho,
        e0_per * rho,
        e_f_per * sqrt_rho,
        eflag,
    )
}

fn transpose(a: &Mat) -> Mat {
    let mut t = Mat::zeros(a.cols(), a.rows());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            t.set(j, i, a.get(i, j));
        }
    }
    t
}
