//! Equilibrium-state checks: Jacobian, entropy, pressure identity, Gibbs property.

use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{compensated_sum, signed_offset, wrap, DiscreteMeasure, GridFunction};
use crate::error::{Error, Result};
use crate::maps::{CircleMap, DEFAULT_INVERSE_TOL};
use crate::moduli::Modulus;
use crate::spectral::{birkhoff_sum, cover_size, PotentialFn, SpectralData};

/// `J_μ(T)(x) = χ h(Tx) / h(x) e^{-f(x)}`.
pub fn jacobian(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData, x: f64) -> f64 {
    let x = wrap(x);
    data.chi * data.h.eval(map.apply(x)) / data.h.eval(x) * (-f.value(x)).exp()
}

/// `Σ_{Ty = x} 1 / J(y)`.
pub fn reciprocal_jacobian_sum(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData, x: f64) -> Result<f64> {
    let ys = map.preimages(wrap(x), DEFAULT_INVERSE_TOL)?;
    Ok(ys.iter().map(|&y| 1.0 / jacobian(map, f, data, y)).sum())
}

/// `∫ log J_μ dμ`.
pub fn rokhlin_entropy(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData) -> f64 {
    entropy_of(map, f, data, &data.mu)
}

fn entropy_of(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData, m: &DiscreteMeasure) -> f64 {
    let grid = m.grid();
    let terms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let w = m.weights()[i];
            if w == 0.0 {
                0.0
            } else {
                w * jacobian(map, f, data, grid.node(i)).ln()
            }
        })
        .collect();
    compensated_sum(terms)
}

fn integral_of(f: &dyn PotentialFn, m: &DiscreteMeasure) -> f64 {
    let grid = m.grid();
    compensated_sum((0..grid.len()).map(|i| f.value(grid.node(i)) * m.weights()[i]))
}

/// `(f(0) < log χ, log χ - f(0))`.
pub fn dirac_exclusion_check(f0: f64, chi: f64) -> Result<(bool, f64)> {
    if !(chi > 0.0) {
        return Err(Error::Domain(format!("eigenvalue {chi} is not positive")));
    }
    let margin = chi.ln() - f0;
    Ok((margin > 0.0, margin))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermoReport {
    pub pressure: f64,
    pub entropy: f64,
    pub f_integral: f64,
    pub identity_gap: f64,
    pub dirac_margin: f64,
    /// `min_n (1/n) log p_n` over the computed cover depths.
    pub cover_pressure_lower: Option<f64>,
    /// `5 (eigen_residual + invariance_residual)`.
    #[serde(skip)]
    pub residual_budget: f64,
    #[serde(skip)]
    pub cover_pressure: Vec<(usize, f64)>,
}

/// Pressure, entropy and the variational identity; `cover_depth = 0` skips the cover sums.
pub fn thermo_report(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData, cover_depth: usize) -> Result<ThermoReport> {
    let pressure = data.pressure();
    let entropy = rokhlin_entropy(map, f, data);
    let f_integral = integral_of(f, &data.mu);
    let (_, dirac_margin) = dirac_exclusion_check(f.value(0.0), data.chi)?;
    let cover_pressure = if cover_depth > 0 { cover_pressure(map, f, cover_depth, 65)? } else { Vec::new() };
    let cover_pressure_lower = cover_pressure.iter().map(|(_, p)| *p).reduce(f64::min);
    Ok(ThermoReport {
        pressure,
        entropy,
        f_integral,
        identity_gap: (entropy + f_integral - pressure).abs(),
        dirac_margin,
        cover_pressure_lower,
        residual_budget: 5.0 * (data.eigen_residual + data.invariance_residual),
        cover_pressure,
    })
}

/// `(n, (1/n) log p_n)` for `n = 1..=depth`, where `p_n = Σ_C exp(sup_C S_n f)` over the
/// `N_V^n` cylinders of the branch-arc cover, with the supremum taken over `samples`
/// points per cylinder.
pub fn cover_pressure(map: &CircleMap, f: &dyn PotentialFn, depth: usize, samples: usize) -> Result<Vec<(usize, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidParameters("cover pressure needs at least 2 samples per cylinder".into()));
    }
    let b = map.branch_count();
    let zs: Vec<f64> =
        (0..samples).map(|i| if i + 1 == samples { 1.0 - 1e-12 } else { i as f64 / (samples - 1) as f64 }).collect();
    // level arrays indexed by cylinder * samples + sample
    let mut points = zs.clone();
    let mut sums = vec![0.0; samples];
    let mut out = Vec::with_capacity(depth);
    for n in 1..=depth {
        let cylinders = points.len() / samples;
        let next: Vec<Result<Vec<(f64, f64)>>> = (0..cylinders)
            .into_par_iter()
            .map(|c| {
                let mut block = vec![(0.0, 0.0); b * samples];
                let mut roots = Vec::with_capacity(b);
                for s in 0..samples {
                    let z = points[c * samples + s];
                    map.preimages_into(z, DEFAULT_INVERSE_TOL, &mut roots)?;
                    if roots.len() != b {
                        return Err(Error::InvalidMap(format!("{} pre-images of {z}, expected {b}", roots.len())));
                    }
                    for (k, &y) in roots.iter().enumerate() {
                        block[k * samples + s] = (y, sums[c * samples + s] + f.value(y));
                    }
                }
                Ok(block)
            })
            .collect();
        let mut new_points = Vec::with_capacity(points.len() * b);
        let mut new_sums = Vec::with_capacity(points.len() * b);
        for block in next {
            for (y, s) in block? {
                new_points.push(y);
                new_sums.push(s);
            }
        }
        points = new_points;
        sums = new_sums;
        let maxima: Vec<f64> =
            sums.chunks(samples).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let top = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_p = top + compensated_sum(maxima.iter().map(|m| (m - top).exp())).ln();
        out.push((n, log_p / n as f64));
    }
    Ok(out)
}

/// `B(x, n, r)` as the arc `(x + left, x + right)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicBall {
    pub center: f64,
    pub n: usize,
    pub r: f64,
    /// Offset of the left endpoint from the center, in `[-r, 0)`.
    pub left: f64,
    /// Offset of the right endpoint from the center, in `(0, r]`.
    pub right: f64,
}

impl DynamicBall {
    pub fn endpoints(&self) -> (f64, f64) {
        (wrap(self.center + self.left), wrap(self.center + self.right))
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

fn orbit(map: &CircleMap, x: f64, n: usize) -> Vec<f64> {
    let mut o = Vec::with_capacity(n + 1);
    o.push(wrap(x));
    for j in 0..n {
        o.push(map.apply(o[j]));
    }
    o
}

/// Follows `z` (near `orbit[n]`) back along the branch chain of the orbit.
fn pull_back(map: &CircleMap, orbit: &[f64], z: f64) -> Result<Vec<f64>> {
    let n = orbit.len() - 1;
    let mut chain = vec![0.0; n + 1];
    chain[n] = wrap(z);
    for j in (0..n).rev() {
        chain[j] = map.nearest_preimage(chain[j + 1], orbit[j], DEFAULT_INVERSE_TOL)?.0;
    }
    Ok(chain)
}

/// Pulls the radius-`r` arc around `T^n x` back through the branch chain of the orbit
/// of `x`, intersecting with the radius-`r` arc at each level.
pub fn dynamic_ball(map: &CircleMap, x: f64, n: usize, r: f64, rho1: f64) -> Result<DynamicBall> {
    if !(r > 0.0) || r >= rho1 {
        return Err(Error::Radius { r, rho1 });
    }
    let o = orbit(map, x, n);
    let (mut a, mut b) = (-r, r);
    for j in (0..n).rev() {
        let ya = map.nearest_preimage(wrap(o[j + 1] + a), o[j], DEFAULT_INVERSE_TOL)?.0;
        let yb = map.nearest_preimage(wrap(o[j + 1] + b), o[j], DEFAULT_INVERSE_TOL)?.0;
        a = signed_offset(o[j], ya).max(-r);
        b = signed_offset(o[j], yb).min(r);
    }
    Ok(DynamicBall { center: o[0], n, r, left: a, right: b })
}

/// Minimum number of grid cells a ball (or its image) must cover to count as resolved.
pub const RESOLUTION_CELLS: f64 = 10.0;

/// Points of the transported integrand per ball.
const TRANSPORT_SAMPLES: usize = 33;

/// `μ(B)` and whether it was resolved. For `n ≥ 1` the mass is read on the image arc
/// `T^n B` through `μ(B) = ∫_{T^n B} e^{S_n f̃(y(z))} dμ(z)`, `y(z)` the pre-image of `z`
/// in `B`; this keeps the measurement on an arc of macroscopic length. Balls whose
/// image covers fewer than [`RESOLUTION_CELLS`] cells fall back to pro-rated cell
/// weights on `B` itself, resolved only if `B` covers enough cells.
pub fn ball_mass(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData, ball: &DynamicBall) -> Result<(f64, bool)> {
    let (lo, hi) = ball.endpoints();
    let mu = &data.mu;
    let direct = || (mu.arc_mass(lo, hi), mu.cells_in_arc(lo, hi) >= RESOLUTION_CELLS);
    if ball.n == 0 {
        return Ok(direct());
    }
    let o = orbit(map, ball.center, ball.n);
    let xn = o[ball.n];
    let alpha = signed_offset(xn, map.iterate(ball.center + ball.left, ball.n));
    let beta = signed_offset(xn, map.iterate(ball.center + ball.right, ball.n));
    if !(beta > alpha) {
        return Err(Error::Domain(format!("image of ball at x = {} is not an arc", ball.center)));
    }
    if mu.cells_in_arc(wrap(xn + alpha), wrap(xn + beta)) < RESOLUTION_CELLS {
        return Ok(direct());
    }
    let log_chi = data.chi.ln();
    let mut g = Vec::with_capacity(TRANSPORT_SAMPLES);
    for k in 0..TRANSPORT_SAMPLES {
        let t = k as f64 / (TRANSPORT_SAMPLES - 1) as f64;
        let chain = pull_back(map, &o, xn + alpha + t * (beta - alpha))?;
        let s: f64 = chain[..ball.n].iter().map(|&y| f.value(y)).sum();
        g.push(s + data.h.eval(chain[0]).ln() - data.h.eval(chain[ball.n]).ln() - ball.n as f64 * log_chi);
    }
    let weight = |t: f64| {
        let u = t * (TRANSPORT_SAMPLES - 1) as f64;
        let i = (u.floor() as usize).min(TRANSPORT_SAMPLES - 2);
        let s = u - i as f64;
        ((1.0 - s) * g[i] + s * g[i + 1]).exp()
    };
    Ok((arc_integral(mu, xn + alpha, beta - alpha, weight), true))
}

/// `∫_{arc} w dμ` with `w` a function of the relative position `t ∈ [0,1]` along the arc
/// `(start, start + length)`, boundary cells pro-rated.
fn arc_integral<W: Fn(f64) -> f64>(mu: &DiscreteMeasure, start: f64, length: f64, w: W) -> f64 {
    let grid = mu.grid();
    let n = grid.len();
    let start = wrap(start);
    let (mut i, _) = grid.locate(start);
    let mut lap = 0.0;
    let mut terms = Vec::new();
    let end = start + length;
    loop {
        let left = grid.node(i) + lap;
        let right = grid.cell_right(i) + lap;
        let u = left.max(start);
        let v = right.min(end);
        if v > u {
            let t = ((u + v) / 2.0 - start) / length;
            terms.push(mu.weights()[i] * (v - u) / (right - left) * w(t));
        }
        if right >= end {
            break;
        }
        i += 1;
        if i == n {
            i = 0;
            lap += 1.0;
        }
    }
    compensated_sum(terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsRow {
    pub x: f64,
    pub n: usize,
    pub r: f64,
    pub ball_left: f64,
    pub ball_right: f64,
    pub ball_mass: f64,
    pub birkhoff: f64,
    pub ratio: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone)]
pub struct GibbsReport {
    pub r: f64,
    pub rows: Vec<GibbsRow>,
    pub k_low: f64,
    pub k_high: f64,
    /// `e^{(L+1) κ_f Ω(1/2)}` when `κ_f` and `Ω` are supplied.
    pub proof_ceiling: Option<f64>,
}

impl GibbsReport {
    /// `max ratio / min ratio` over resolved rows at depth `n`.
    pub fn spread_at(&self, n: usize) -> Option<f64> {
        let rs: Vec<f64> = self.rows.iter().filter(|r| r.n == n && r.resolved).map(|r| r.ratio).collect();
        if rs.is_empty() {
            return None;
        }
        let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().copied().fold(0.0, f64::max);
        Some(hi / lo)
    }

    pub fn resolved_count(&self) -> usize {
        self.rows.iter().filter(|r| r.resolved).count()
    }
}

/// Bounds on the constant relating the Gibbs property.
pub struct GibbsConstants<'a> {
    pub rho1: f64,
    pub kappa_f: Option<f64>,
    pub omega_big: Option<&'a Modulus>,
}

/// Rows `(x, n)` for every sample center and `n = 0..=n_max`, ratio
/// `μ(B(x,n,r)) / e^{S_n f(x) - nP}`.
pub fn gibbs_report(
    map: &CircleMap,
    f: &dyn PotentialFn,
    data: &SpectralData,
    r: f64,
    x_samples: &[f64],
    n_max: usize,
    constants: &GibbsConstants,
) -> Result<GibbsReport> {
    if !(r > 0.0) || r >= constants.rho1 {
        return Err(Error::Radius { r, rho1: constants.rho1 });
    }
    let pressure = data.pressure();
    let per_x: Vec<Result<Vec<GibbsRow>>> = x_samples
        .par_iter()
        .map(|&x| {
            (0..=n_max)
                .map(|n| {
                    let ball = dynamic_ball(map, x, n, r, constants.rho1)?;
                    let (mass, resolved) = ball_mass(map, f, data, &ball)?;
                    let birkhoff = birkhoff_sum(map, f, x, n);
                    let ratio = mass / (birkhoff - n as f64 * pressure).exp();
                    let (ball_left, ball_right) = ball.endpoints();
                    Ok(GibbsRow { x: wrap(x), n, r, ball_left, ball_right, ball_mass: mass, birkhoff, ratio, resolved })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(x_samples.len() * (n_max + 1));
    for block in per_x {
        rows.extend(block?);
    }
    let resolved = rows.iter().filter(|r| r.resolved).map(|r| r.ratio);
    let k_low = resolved.clone().fold(f64::INFINITY, f64::min);
    let k_high = resolved.fold(0.0, f64::max);
    let proof_ceiling = match (constants.kappa_f, constants.omega_big) {
        (Some(k), Some(w)) => Some(((cover_size(constants.rho1) + 1) as f64 * k * w.eval(0.5)).exp()),
        _ => None,
    };
    Ok(GibbsReport { r, rows, k_low, k_high, proof_ceiling })
}

/// `h_m + ∫ f dm` for the equilibrium state `m` of another potential `g`, against `log χ_f`.
#[derive(Debug, Clone, Serialize)]
pub struct VariationalProbe {
    pub entropy_m: f64,
    pub f_integral_m: f64,
    pub free_energy: f64,
    pub pressure: f64,
    /// `P - (h_m + ∫ f dm)`; positive when `m` is not the equilibrium state of `f`.
    pub margin: f64,
}

/// `m` is `other.mu`, its entropy taken with `other`'s own Jacobian for `g`.
pub fn variational_probe(
    map: &CircleMap,
    g: &dyn PotentialFn,
    other: &SpectralData,
    f: &dyn PotentialFn,
    data: &SpectralData,
) -> VariationalProbe {
    let entropy_m = rokhlin_entropy(map, g, other);
    let f_integral_m = integral_of(f, &other.mu);
    let free_energy = entropy_m + f_integral_m;
    let pressure = data.pressure();
    VariationalProbe { entropy_m, f_integral_m, free_energy, pressure, margin: pressure - free_energy }
}

/// Node values of `log J_μ(T)`.
pub fn log_jacobian_grid(map: &CircleMap, f: &dyn PotentialFn, data: &SpectralData) -> GridFunction {
    GridFunction::sample(data.h.grid(), |x| jacobian(map, f, data, x).ln())
}
