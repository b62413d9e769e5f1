//! Concave moduli of continuity and the compatibility checks between a pair of moduli
//! and the dynamics near the indifferent fixed point.

mod legendre;

pub use legendre::{build_omega_legendre, conjugate, double_conjugate, upper_hull, DoubleConjugate, LegendreOmega};

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::circle::circle_dist;
use crate::error::{Error, Result};
use crate::maps::{iterated_log_inv, CircleMap};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Upper end of every concavity window.
pub const WINDOW_CAP: f64 = 0.1353352832366127; // e^{-2}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Provenance {
    /// `x^α (-log x)^{-β}`.
    OmegaAb { alpha: f64, beta: f64 },
    /// `Π_j (log^{depth_j} 1/x)^{-power_j}`.
    IlogComposite { terms: Vec<(u32, f64)> },
    LegendreBuilt { tau: f64 },
    Custom { name: String },
}

/// A concave modulus of continuity, truncated to a constant beyond its window.
#[derive(Clone)]
pub struct Modulus {
    provenance: Provenance,
    window: f64,
    raw: RealFn,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modulus").field("provenance", &self.provenance).field("window", &self.window).finish()
    }
}

impl Modulus {
    /// `raw` is evaluated on `(0, window]`; `eval` is `0` at `0` and `raw(window)` beyond.
    pub fn from_fn<F>(provenance: Provenance, window: f64, raw: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(window > 0.0) {
            return Err(Error::InvalidParameters(format!("concavity window {window} must be positive")));
        }
        Ok(Modulus { provenance, window, raw: Arc::new(raw) })
    }

    /// A custom modulus whose window is found by the concavity sweep.
    pub fn custom<F>(name: &str, raw: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let raw: RealFn = Arc::new(raw);
        let window = dyadic_concavity_window(&*raw, WINDOW_CAP).ok_or_else(|| {
            Error::InvalidParameters(format!("custom modulus '{name}' is not concave on any tested window"))
        })?;
        Ok(Modulus { provenance: Provenance::Custom { name: name.to_string() }, window, raw })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (self.raw)(x.min(self.window))
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Sampled check of the modulus invariants (zero at zero, monotone, midpoint-concave
    /// on the window), returning the first offending point.
    pub fn check_invariants(&self, samples: usize) -> std::result::Result<(), f64> {
        if self.eval(0.0) != 0.0 {
            return Err(0.0);
        }
        let xs = log_space(self.window * 1e-12, self.window, samples);
        let mut prev = 0.0;
        for &x in &xs {
            let v = self.eval(x);
            if v < prev {
                return Err(x);
            }
            prev = v;
        }
        for (i, &a) in xs.iter().enumerate().step_by(7) {
            for &b in xs[i..].iter().step_by(13) {
                if self.eval(0.5 * (a + b)) < 0.5 * (self.eval(a) + self.eval(b)) - 1e-12 {
                    return Err(0.5 * (a + b));
                }
            }
        }
        Ok(())
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive, ascending.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Discrete concavity and monotonicity of `raw` on `(0, x0]` along a log-spaced sample.
fn concave_on(raw: &dyn Fn(f64) -> f64, x0: f64) -> bool {
    let mut xs = vec![0.0];
    xs.extend(log_space(x0 * 1e-15, x0, 1500));
    let vals: Vec<f64> = xs.iter().map(|&x| if x == 0.0 { 0.0 } else { raw(x) }).collect();
    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return false;
    }
    if vals.windows(2).any(|w| w[1] < w[0]) {
        return false;
    }
    xs.windows(3).zip(vals.windows(3)).all(|(x, v)| {
        let chord = v[0] + (v[2] - v[0]) * (x[1] - x[0]) / (x[2] - x[0]);
        v[1] >= chord - 1e-14 - 1e-12 * v[1].abs()
    })
}

/// Largest dyadic `x0 <= cap` on which `raw` passes the concavity sweep.
fn dyadic_concavity_window(raw: &dyn Fn(f64) -> f64, cap: f64) -> Option<f64> {
    let mut x0 = 2f64.powi(cap.log2().floor() as i32);
    while x0 >= 2f64.powi(-60) {
        if concave_on(raw, x0) {
            return Some(x0);
        }
        x0 *= 0.5;
    }
    None
}

/// Truncation point of `ω_{α,β}`: `e^{-2}` for pure powers, otherwise the largest
/// dyadic `x0 <= e^{-2}` passing the concavity sweep (smallest tested if none does).
pub fn concavity_threshold(alpha: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return WINDOW_CAP;
    }
    let raw = move |x: f64| x.powf(alpha) * (-x.ln()).powf(-beta);
    dyadic_concavity_window(&raw, WINDOW_CAP).unwrap_or(2f64.powi(-60))
}

/// The modulus `x^α (-log x)^{-β}`, constant beyond `x0(α, β)`.
pub fn omega_ab(alpha: f64, beta: f64) -> Result<Modulus> {
    if !(0.0..1.0).contains(&alpha) || !(beta >= 0.0) || !(alpha + beta > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "omega_ab needs 0 <= alpha < 1, beta >= 0, alpha + beta > 0; got ({alpha}, {beta})"
        )));
    }
    let window = concavity_threshold(alpha, beta);
    Modulus::from_fn(Provenance::OmegaAb { alpha, beta }, window, move |x| {
        x.powf(alpha) * (-x.ln()).powf(-beta)
    })
}

/// `Π_j (log^{d_j} 1/x)^{-p_j}`, e.g. `[(1, 2.0), (2, 2.0)]` is
/// `(log 1/x)^{-2} (log log 1/x)^{-2}`. Window from the concavity sweep.
pub fn ilog_composite(terms: &[(u32, f64)]) -> Result<Modulus> {
    if terms.is_empty() || terms.iter().any(|&(d, p)| d == 0 || !(p > 0.0)) {
        return Err(Error::InvalidParameters("ilog terms need depth >= 1 and positive powers".into()));
    }
    let owned: Vec<(u32, f64)> = terms.to_vec();
    let raw = {
        let owned = owned.clone();
        move |x: f64| owned.iter().map(|&(d, p)| iterated_log_inv(d, x).powf(-p)).product::<f64>()
    };
    let window = dyadic_concavity_window(&raw, WINDOW_CAP)
        .ok_or_else(|| Error::InvalidParameters(format!("ilog composite {owned:?} is not concave near 0")))?;
    Modulus::from_fn(Provenance::IlogComposite { terms: owned }, window, raw)
}

/// The potential modulus `(log^k 1/x)^{-1} (log 1/x)^{-1} (log^2 1/x)^{-2}`.
pub fn ilog_potential_omega(k: u32) -> Result<Modulus> {
    let mut terms: Vec<(u32, f64)> = Vec::new();
    for (d, p) in [(k, 1.0), (1, 1.0), (2, 2.0)] {
        match terms.iter_mut().find(|t| t.0 == d) {
            Some(t) => t.1 += p,
            None => terms.push((d, p)),
        }
    }
    terms.sort_by_key(|t| t.0);
    ilog_composite(&terms)
}

/// The eigenfunction modulus `(log^2 1/x)^{-1}`.
pub fn ilog_eigen_omega() -> Result<Modulus> {
    ilog_composite(&[(2, 1.0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PositiveEvidence,
    Vanishing,
    Inconclusive,
}

/// Samples of `(V(x)/ω(x)) (Ω((1+c)x) - Ω(x))` toward `0`.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub c: f64,
    /// Strictly decreasing sample points.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Minimum over the last two decades of the grid.
    pub liminf_estimate: f64,
    /// Half the liminf estimate.
    pub c1: f64,
    pub verdict: Verdict,
    /// Minima over the last and the previous decade.
    pub last_decade_min: f64,
    pub previous_decade_min: f64,
}

pub const COMPAT_POSITIVE_FLOOR: f64 = 1e-8;
const COMPAT_POINTS_PER_DECADE: usize = 20;

/// `c = min(0.1, 2^{-(σ+2)})`.
pub fn default_c(map: &CircleMap) -> f64 {
    0.1f64.min(2f64.powf(-(map.sigma() + 2.0)))
}

pub fn check_compatibility(
    map: &CircleMap,
    omega: &Modulus,
    omega_big: &Modulus,
    c: f64,
    x_min: f64,
) -> Result<CompatibilityReport> {
    let c_max = 2f64.powf(-(map.sigma() + 2.0));
    if !(c > 0.0 && c <= c_max) {
        return Err(Error::InvalidParameters(format!("c = {c} must lie in (0, {c_max}]")));
    }
    if !(x_min > 0.0) {
        return Err(Error::InvalidParameters(format!("x_min = {x_min} must be positive")));
    }
    let x_top = 0.1f64.min(omega_big.window() / (1.0 + c)).min(omega.window());
    if x_top <= x_min {
        return Err(Error::Window { x: (1.0 + c) * x_min, window: omega_big.window() });
    }
    let decades = (x_top / x_min).log10();
    let n = ((decades * COMPAT_POINTS_PER_DECADE as f64).ceil() as usize).max(2) + 1;
    let mut grid = log_space(x_min, x_top, n);
    grid.reverse();
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| map.v().eval(x) / omega.eval(x) * (omega_big.eval((1.0 + c) * x) - omega_big.eval(x)))
        .collect();

    let decade_min = |lo: f64, hi: f64| {
        grid.iter()
            .zip(&values)
            .filter(|(x, _)| **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12))
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min)
    };
    let last = decade_min(x_min, 10.0 * x_min);
    let previous = decade_min(10.0 * x_min, 100.0 * x_min);
    let liminf_estimate = last.min(previous);
    let verdict = if decades < 2.0 || values.iter().any(|v| !v.is_finite()) {
        Verdict::Inconclusive
    } else if liminf_estimate > COMPAT_POSITIVE_FLOOR && last >= 0.5 * previous {
        Verdict::PositiveEvidence
    } else {
        Verdict::Vanishing
    };
    Ok(CompatibilityReport {
        c,
        grid,
        values,
        liminf_estimate,
        c1: 0.5 * liminf_estimate,
        verdict,
        last_decade_min: last,
        previous_decade_min: previous,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioConditionReport {
    pub holds: bool,
    /// `(ξ, inf_x [ω(ξx)/V(ξx)] / [ω(x)/V(x)])`.
    pub table: Vec<(f64, f64)>,
}

/// Infima below this margin above 1 count as `c(ξ) = 1`.
pub const RATIO_MARGIN: f64 = 1e-12;

/// Samples the ratio `[ω(ξx)/V(ξx)] / [ω(x)/V(x)]` over `x ∈ (0, η)`.
pub fn check_ratio_condition(map: &CircleMap, omega: &Modulus, xi_grid: &[f64], eta: f64) -> Result<RatioConditionReport> {
    if xi_grid.iter().any(|&xi| !(xi > 1.0)) {
        return Err(Error::InvalidParameters("every xi must exceed 1".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameters(format!("eta = {eta} must be positive")));
    }
    let xs = log_space(eta * 1e-10, eta * (1.0 - 1e-12), 2000);
    let theta = |x: f64| omega.eval(x) / map.v().eval(x);
    let table: Vec<(f64, f64)> = xi_grid
        .iter()
        .map(|&xi| {
            let inf = xs.iter().map(|&x| theta(xi * x) / theta(x)).fold(f64::INFINITY, f64::min);
            (xi, inf)
        })
        .collect();
    let holds = table.iter().all(|&(_, c)| c > 1.0 + RATIO_MARGIN);
    Ok(RatioConditionReport { holds, table })
}

/// `max_k [Ω(d_k) + C₁ Σ_{j=1..k} ω(d_j) - Ω(d_0)]` along paired pre-orbits,
/// with `d_k = d(x_k, y_k)`. Non-positive when the compatibility inequality holds.
pub fn compatibility_defect(omega: &Modulus, omega_big: &Modulus, c1: f64, xs: &[f64], ys: &[f64]) -> f64 {
    let d0 = circle_dist(xs[0], ys[0]);
    let head = omega_big.eval(d0);
    let mut running = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for (x, y) in xs.iter().zip(ys).skip(1) {
        let d = circle_dist(*x, *y);
        running += omega.eval(d);
        worst = worst.max(omega_big.eval(d) + c1 * running - head);
    }
    worst
}
