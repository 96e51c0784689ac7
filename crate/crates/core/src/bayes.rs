//! Evidence that a selection is more anomalous than the rest of the data:
//! the JZS two-sample Bayes factor on the pooled-variance t statistic.
//!
//! Under the alternative the standardized effect size has a Cauchy prior
//! with scale `r`, written as a normal mixture over a variance `g` with an
//! inverse-χ²(1) weight. The factor is
//!
//! ```text
//!        ∫ (1+Ngr²)^(-1/2) (1 + t²/((1+Ngr²)ν))^(-(ν+1)/2) (2π)^(-1/2) g^(-3/2) e^(-1/(2g)) dg
//! bf10 = ---------------------------------------------------------------------------------------
//!                                     (1 + t²/ν)^(-(ν+1)/2)
//! ```
//!
//! with `N = n1·n2/(n1+n2)` and `ν = n1+n2-2`. The integral is taken in
//! log space after substituting `g = u/(1-u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scoring::ScoreVector;
use crate::selection::Selection;

/// Default Cauchy prior scale on the effect size.
pub const DEFAULT_PRIOR_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    NoneOrBare,
    Substantial,
    Strong,
    Decisive,
}

impl Evidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Evidence::NoneOrBare => "none-or-bare",
            Evidence::Substantial => "substantial",
            Evidence::Strong => "strong",
            Evidence::Decisive => "decisive",
        }
    }
}

impl std::fmt::Display for Evidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_evidence(bf10: f64) -> Evidence {
    if bf10 >= 100.0 {
        Evidence::Decisive
    } else if bf10 >= 10.0 {
        Evidence::Strong
    } else if bf10 >= 3.2 {
        Evidence::Substantial
    } else {
        Evidence::NoneOrBare
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    #[serde(with = "crate::jsonfloat")]
    pub bf10: f64,
    #[serde(with = "crate::jsonfloat")]
    pub log_bf10: f64,
    pub category: Evidence,
}

/// Pooled-variance two-sample t statistic, inside minus outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleStat {
    /// `±∞` when the pooled variance is zero but the means differ.
    #[serde(with = "crate::jsonfloat")]
    pub t: f64,
    pub n1: usize,
    pub n2: usize,
    pub mean1: f64,
    pub mean2: f64,
}

impl TwoSampleStat {
    pub fn from_groups(inside: &[f64], outside: &[f64]) -> Result<TwoSampleStat> {
        Self::from_iters(|| inside.iter().copied(), || outside.iter().copied())
    }

    /// Compare the selected rows against all other rows.
    pub fn from_selection(sv: &ScoreVector, sel: &Selection) -> Result<TwoSampleStat> {
        let s = sv.as_slice();
        let rest = sel.complement();
        Self::from_iters(|| sel.rows().map(|r| s[r]), || rest.rows().map(|r| s[r]))
    }

    fn from_iters<I, J>(inside: impl Fn() -> I, outside: impl Fn() -> J) -> Result<TwoSampleStat>
    where
        I: Iterator<Item = f64>,
        J: Iterator<Item = f64>,
    {
        let (n1, mean1, ss1) = moments(inside);
        let (n2, mean2, ss2) = moments(outside);
        if n1 < 2 || n2 < 2 {
            return Err(Error::InsufficientData(format!(
                "both groups need at least 2 rows, got {n1} inside and {n2} outside"
            )));
        }
        let nu = (n1 + n2 - 2) as f64;
        let pooled = (ss1 + ss2) / nu;
        let diff = mean1 - mean2;
        let t = if pooled > 0.0 {
            diff / (pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt()
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Ok(TwoSampleStat {
            t,
            n1,
            n2,
            mean1,
            mean2,
        })
    }

    pub fn degrees_of_freedom(&self) -> f64 {
        (self.n1 + self.n2 - 2) as f64
    }

    /// Effective sample size `n1·n2/(n1+n2)`.
    pub fn effective_n(&self) -> f64 {
        (self.n1 * self.n2) as f64 / (self.n1 + self.n2) as f64
    }
}

/// Count, mean and sum of squared deviations, in two passes.
fn moments<I: Iterator<Item = f64>>(values: impl Fn() -> I) -> (usize, f64, f64) {
    let (n, sum) = values().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = sum / n as f64;
    let ss = values().map(|x| (x - mean) * (x - mean)).sum();
    (n, mean, ss)
}

/// `ln(1 + e^x)` without overflow.
fn ln1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// The integrand pieces for one `(t, ν, N, r)`.
struct Integrand {
    a: f64,
    log_t2_over_nu: Option<f64>,
    half_nu1: f64,
}

impl Integrand {
    fn new(t: f64, nu: f64, n: f64, r: f64) -> Integrand {
        Integrand {
            a: (n * r * r).ln(),
            log_t2_over_nu: (t != 0.0).then(|| 2.0 * t.abs().ln() - nu.ln()),
            half_nu1: 0.5 * (nu + 1.0),
        }
    }

    /// Log of the integrand in `g`, taking `y = ln g`.
    fn log_f(&self, y: f64) -> f64 {
        let l = ln1p_exp(self.a + y);
        let q = self.log_t2_over_nu.map_or(0.0, |k| ln1p_exp(k - l));
        -0.5 * l - self.half_nu1 * q - 0.5 * (2.0 * std::f64::consts::PI).ln() - 1.5 * y - 0.5 * (-y).exp()
    }

    /// Log of the integrand in `u = g/(1+g)`: `f(g)·(1+g)²`.
    fn log_h_u(&self, y: f64) -> f64 {
        self.log_f(y) + 2.0 * ln1p_exp(y)
    }

    /// Log of the integrand in `y = ln g`: `f(g)·g`.
    fn log_h_y(&self, y: f64) -> f64 {
        self.log_f(y) + y
    }

    fn log_null(&self) -> f64 {
        -self.half_nu1 * self.log_t2_over_nu.map_or(0.0, ln1p_exp)
    }
}

const GRID_LO: f64 = -40.0;
const GRID_HI: f64 = 120.0;
const GRID_STEP: f64 = 0.25;
/// Break points bracket the region where the integrand is within `e^-40` of its peak.
const BRACKET_DROP: f64 = 40.0;

/// Location and value of the maximum of `h` over the log-`g` grid, refined
/// by golden-section search.
fn peak(h: impl Fn(f64) -> f64) -> (f64, f64) {
    let steps = ((GRID_HI - GRID_LO) / GRID_STEP) as usize;
    let (mut best_y, mut best) = (GRID_LO, f64::NEG_INFINITY);
    for i in 0..=steps {
        let y = GRID_LO + i as f64 * GRID_STEP;
        let v = h(y);
        if v > best {
            best = v;
            best_y = y;
        }
    }
    let (mut lo, mut hi) = (best_y - GRID_STEP, best_y + GRID_STEP);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let y1 = hi - ratio * (hi - lo);
        let y2 = lo + ratio * (hi - lo);
        if h(y1) >= h(y2) {
            hi = y2;
        } else {
            lo = y1;
        }
    }
    let y = 0.5 * (lo + hi);
    let v = h(y);
    if v >= best {
        (y, v)
    } else {
        (best_y, best)
    }
}

/// Walk outward from `y0` until `h` falls `BRACKET_DROP` below `top`.
fn bracket(h: &impl Fn(f64) -> f64, y0: f64, top: f64, step: f64, limit: f64) -> f64 {
    let mut y = y0;
    loop {
        let next = y + step;
        if (step < 0.0 && next < limit) || (step > 0.0 && next > limit) {
            return limit;
        }
        y = next;
        if h(y) < top - BRACKET_DROP {
            return y;
        }
    }
}

fn logistic(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// `ln ∫ f(g) dg` for the alternative's marginal likelihood.
fn log_marginal(ig: &Integrand) -> Result<f64> {
    let h_u = |y: f64| ig.log_h_u(y);
    let (y_peak, top) = peak(h_u);
    // Beyond g ≈ e^30 the u scale runs out of resolution near 1.
    if y_peak < 30.0 {
        let y_lo = bracket(&h_u, y_peak, top, -0.5, GRID_LO);
        let y_hi = bracket(&h_u, y_peak, top, 0.5, 36.0);
        let mut points = vec![0.0, logistic(y_lo), logistic(y_peak), logistic(y_hi), 1.0];
        points.dedup();
        let integrand = |u: f64| {
            if u <= 0.0 || u >= 1.0 {
                return 0.0;
            }
            let y = u.ln() - (-u).ln_1p();
            (ig.log_h_u(y) - top).exp()
        };
        let (v, _) = integrate(integrand, &points, Tolerance::default())?;
        return Ok(top + v.ln());
    }
    let h_y = |y: f64| ig.log_h_y(y);
    let (y_peak, top) = peak(h_y);
    let y_lo = bracket(&h_y, y_peak, top, -0.5, GRID_LO);
    let y_hi = bracket(&h_y, y_peak, top, 0.5, 1400.0);
    let integrand = |y: f64| (ig.log_h_y(y) - top).exp();
    let (v, _) = integrate(integrand, &[y_lo, y_peak, y_hi], Tolerance::default())?;
    Ok(top + v.ln())
}

/// JZS Bayes factor for the alternative over the point null.
pub fn jzs_bayes_factor(stat: &TwoSampleStat, r: f64) -> Result<BayesResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("prior scale must be positive, got {r}")));
    }
    if stat.n1 < 2 || stat.n2 < 2 {
        return Err(Error::InsufficientData("both groups need at least 2 rows".into()));
    }
    jzs_bayes_factor_from_parts(stat.t, stat.degrees_of_freedom(), stat.effective_n(), r)
}

/// JZS Bayes factor from a t statistic, its degrees of freedom `nu` and the
/// effective sample size `n_eff`, which need not be integers.
pub fn jzs_bayes_factor_from_parts(t: f64, nu: f64, n_eff: f64, r: f64) -> Result<BayesResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("prior scale must be positive, got {r}")));
    }
    if !(nu > 0.0 && n_eff > 0.0) || t.is_nan() {
        return Err(Error::Config(format!(
            "need t, nu > 0 and n_eff > 0, got t = {t}, nu = {nu}, n_eff = {n_eff}"
        )));
    }
    if t.is_infinite() {
        return Ok(BayesResult {
            bf10: f64::INFINITY,
            log_bf10: f64::INFINITY,
            category: Evidence::Decisive,
        });
    }
    let ig = Integrand::new(t, nu, n_eff, r);
    let log_bf10 = log_marginal(&ig)? - ig.log_null();
    let bf10 = log_bf10.exp();
    Ok(BayesResult {
        bf10,
        log_bf10,
        category: classify_evidence(bf10),
    })
}

/// Bayes factor for a selection against the remaining rows, default prior.
pub fn selection_bayes(sv: &ScoreVector, sel: &Selection) -> Result<BayesResult> {
    jzs_bayes_factor(&TwoSampleStat::from_selection(sv, sel)?, DEFAULT_PRIOR_SCALE)
}
