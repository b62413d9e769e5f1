//! Circle maps `T(x) = x(1 + V(x)) mod 1` with an indifferent fixed point at `0`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::circle::{circle_dist, wrap};
use crate::error::{Error, Result};

/// Default absolute tolerance on `|g(root) - target|` for branch inversion.
pub const DEFAULT_INVERSE_TOL: f64 = 1e-13;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub enum VaryingFamily {
    /// `V(x) = x^s`.
    Power { s: f64 },
    /// `V(x) = A / log^k(1/x)` on `(0, x_c]`, linear from `1/2` to `1` on `[x_c, 1]`.
    IteratedLog { k: u32, a: f64, x_c: f64 },
    Custom { name: String },
}

/// The increasing function `V` with `V(0) = 0` and `V(1) ∈ Z_+`.
#[derive(Clone)]
pub struct VaryingFunction {
    family: VaryingFamily,
    sigma: f64,
    eval: RealFn,
}

impl fmt::Debug for VaryingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VaryingFunction")
            .field("family", &self.family)
            .field("sigma", &self.sigma)
            .finish()
    }
}

/// `log^k(1/x)`, the k-fold iterated logarithm of `1/x`.
pub fn iterated_log_inv(k: u32, x: f64) -> f64 {
    let mut l = -x.ln();
    for _ in 1..k {
        l = l.ln();
    }
    l
}

impl VaryingFunction {
    pub fn power(s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameters(format!("power exponent s = {s} must be positive")));
        }
        Ok(VaryingFunction {
            family: VaryingFamily::Power { s },
            sigma: s,
            eval: Arc::new(move |x: f64| if x <= 0.0 { 0.0 } else { x.powf(s) }),
        })
    }

    /// Slowly varying `A_k (log^k 1/x)^{-1}` near the origin. The junction `x_c` is
    /// where this branch reaches `1/2`; beyond it `V` is affine up to `V(1) = 1`.
    pub fn iterated_log(k: u32, a: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameters("iterated-log depth k must be >= 1".into()));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameters(format!("iterated-log constant A = {a} must be positive")));
        }
        // log^k(1/x_c) = 2A  <=>  x_c = exp(-exp^{k-1}(2A))
        let mut e = 2.0 * a;
        for _ in 1..k {
            e = e.exp();
        }
        let x_c = (-e).exp();
        if !(x_c > 0.0) || !x_c.is_finite() || x_c >= 1.0 {
            return Err(Error::InvalidParameters(format!(
                "iterated-log junction underflows for k = {k}, A = {a}"
            )));
        }
        let eval = move |x: f64| {
            if x <= 0.0 {
                0.0
            } else if x <= x_c {
                a / iterated_log_inv(k, x)
            } else {
                0.5 + 0.5 * (x - x_c) / (1.0 - x_c)
            }
        };
        Ok(VaryingFunction { family: VaryingFamily::IteratedLog { k, a, x_c }, sigma: 0.0, eval: Arc::new(eval) })
    }

    /// A user-supplied `V` with declared index `sigma`. Checked on a sample grid.
    pub fn custom<F>(name: &str, sigma: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameters(format!("varying index sigma = {sigma} must be >= 0")));
        }
        let v = VaryingFunction { family: VaryingFamily::Custom { name: name.to_string() }, sigma, eval: Arc::new(f) };
        v.validate()?;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidMap(format!("V(0) = {} is not 0", self.eval(0.0))));
        }
        let v1 = self.eval(1.0);
        if !(v1 >= 1.0 - 1e-12) || (v1 - v1.round()).abs() > 1e-12 {
            return Err(Error::InvalidMap(format!("V(1) = {v1} is not a positive integer")));
        }
        let n = 10_000;
        let mut prev = 0.0;
        for i in 1..=n {
            let v = self.eval(i as f64 / n as f64);
            if !v.is_finite() || v < prev {
                return Err(Error::InvalidMap(format!("V is not non-decreasing near x = {}", i as f64 / n as f64)));
            }
            prev = v;
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn family(&self) -> &VaryingFamily {
        &self.family
    }
}

/// A member of the map family, with `N_V = 1 + V(1)` inverse branches.
#[derive(Debug, Clone)]
pub struct CircleMap {
    v: VaryingFunction,
    branches: usize,
}

impl CircleMap {
    pub fn new(v: VaryingFunction) -> Result<Self> {
        v.validate()?;
        let branches = 1 + v.eval(1.0).round() as usize;
        Ok(CircleMap { v, branches })
    }

    /// Manneville-Pomeau map `x + x^{1+s} mod 1`.
    pub fn manneville_pomeau(s: f64) -> Result<Self> {
        CircleMap::new(VaryingFunction::power(s)?)
    }

    pub fn iterated_log(k: u32, a: f64) -> Result<Self> {
        CircleMap::new(VaryingFunction::iterated_log(k, a)?)
    }

    pub fn v(&self) -> &VaryingFunction {
        &self.v
    }

    pub fn sigma(&self) -> f64 {
        self.v.sigma
    }

    pub fn branch_count(&self) -> usize {
        self.branches
    }

    /// The lift `g(x) = x(1 + V(x))` on `[0, 1]`.
    #[inline]
    pub fn lift(&self, x: f64) -> f64 {
        x * (1.0 + self.v.eval(x))
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        wrap(self.lift(wrap(x)))
    }

    pub fn iterate(&self, x: f64, n: usize) -> f64 {
        (0..n).fold(wrap(x), |p, _| self.apply(p))
    }

    /// All `N_V` pre-images of `y`, ascending; root `k` solves `g(x) = y + k`.
    pub fn preimages(&self, y: f64, tol: f64) -> Result<Vec<f64>> {
        let mut roots = Vec::with_capacity(self.branches);
        self.preimages_into(y, tol, &mut roots)?;
        Ok(roots)
    }

    pub fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) -> Result<()> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameters(format!("inverse tolerance {tol} must be positive")));
        }
        out.clear();
        let y = wrap(y);
        let mut lo = 0.0;
        for k in 0..self.branches {
            let root = self.invert_lift(y + k as f64, lo, tol)?;
            if let Some(&prev) = out.last() {
                if root <= prev {
                    return Err(Error::InvalidMap(format!("branch roots not increasing at y = {y}")));
                }
            }
            out.push(root);
            lo = root;
        }
        Ok(())
    }

    /// Bisection for `g(x) = target` on `[lo, 1]`.
    fn invert_lift(&self, target: f64, mut lo: f64, tol: f64) -> Result<f64> {
        let mut hi = 1.0;
        let mut g_lo = self.lift(lo);
        let mut g_hi = self.lift(hi);
        if g_lo == target {
            return Ok(lo);
        }
        if !(g_lo <= target && target <= g_hi) {
            return Err(Error::InvalidMap(format!(
                "cannot bracket g(x) = {target}: g({lo}) = {g_lo}, g(1) = {g_hi}"
            )));
        }
        for _ in 0..200 {
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g_mid = self.lift(mid);
            if g_mid < g_lo || g_mid > g_hi {
                return Err(Error::InvalidMap(format!("lift is not monotone near x = {mid}")));
            }
            if g_mid < target {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
                g_hi = g_mid;
            }
        }
        let (root, residual) =
            if target - g_lo <= g_hi - target { (lo, target - g_lo) } else { (hi, g_hi - target) };
        if residual > tol {
            return Err(Error::InvalidMap(format!(
                "branch inversion residual {residual:e} exceeds tolerance {tol:e} at target {target}"
            )));
        }
        Ok(root)
    }

    /// Pre-image of `y` closest to `near`, with the distance to the runner-up.
    pub fn nearest_preimage(&self, y: f64, near: f64, tol: f64) -> Result<(f64, f64)> {
        let roots = self.preimages(y, tol)?;
        let mut best = (f64::INFINITY, 0.0);
        let mut second = f64::INFINITY;
        for r in roots {
            let d = circle_dist(r, near);
            if d < best.0 {
                second = best.0;
                best = (d, r);
            } else if d < second {
                second = d;
            }
        }
        Ok((best.1, second))
    }

    /// Follows the pre-orbit of `y0` that shadows `x_preorbit` (`T(x_{k+1}) = x_k`).
    ///
    /// At each depth the pre-image of `y_{k-1}` closest to `x_k` is taken; away from
    /// branch endpoints this is the pre-image in the branch of `x_k`.
    pub fn paired_preorbit(&self, x_preorbit: &[f64], y0: f64, depth: usize, rho1: f64) -> Result<PairedPreorbit> {
        if x_preorbit.len() < depth + 1 {
            return Err(Error::InvalidParameters(format!(
                "x pre-orbit has {} points, depth {depth} needs {}",
                x_preorbit.len(),
                depth + 1
            )));
        }
        let d0 = circle_dist(x_preorbit[0], y0);
        if d0 >= rho1 {
            return Err(Error::InvalidParameters(format!("d(x0, y0) = {d0} is not below rho1 = {rho1}")));
        }
        let mut points = Vec::with_capacity(depth + 1);
        points.push(wrap(y0));
        let mut violations = Vec::new();
        for k in 1..=depth {
            let xk = x_preorbit[k];
            if circle_dist(self.apply(xk), x_preorbit[k - 1]) > 1e-9 {
                return Err(Error::InvalidParameters(format!("x pre-orbit breaks at depth {k}")));
            }
            let (yk, runner_up) = self.nearest_preimage(points[k - 1], xk, DEFAULT_INVERSE_TOL)?;
            if runner_up < rho1 {
                return Err(Error::Pairing {
                    depth: k,
                    reason: format!("two pre-images within rho1 = {rho1} of x_k = {xk}"),
                });
            }
            if circle_dist(xk, yk) > d0 + 1e-12 {
                violations.push(k);
            }
            points.push(yk);
        }
        Ok(PairedPreorbit { points, violations })
    }

    /// A random pre-orbit of `x0` of the given depth (branch chosen uniformly each step).
    pub fn random_preorbit<R: Rng>(&self, x0: f64, depth: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut orbit = Vec::with_capacity(depth + 1);
        orbit.push(wrap(x0));
        let mut roots = Vec::with_capacity(self.branches);
        for _ in 0..depth {
            self.preimages_into(*orbit.last().unwrap(), DEFAULT_INVERSE_TOL, &mut roots)?;
            orbit.push(roots[rng.gen_range(0..roots.len())]);
        }
        Ok(orbit)
    }

    /// `d(T x, T y)`.
    pub fn image_dist(&self, x: f64, y: f64) -> f64 {
        circle_dist(self.apply(x), self.apply(y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedPreorbit {
    /// `y_0, y_1, ..., y_depth`.
    pub points: Vec<f64>,
    /// Depths `k` where `d(x_k, y_k) > d(x_0, y_0)`.
    pub violations: Vec<usize>,
}

/// Empirical expansion radii of a map.
#[derive(Debug, Clone)]
pub struct ExpansionConstants {
    /// Largest dyadic radius on which the near-diagonal expansion inequality held.
    pub rho0_hat: f64,
    /// Largest dyadic `r` with `r N_V + sup |V(x) - V(y)| < 1/2` for `|x - y| < r`.
    pub rho_v_hat: f64,
    /// Pairs tested.
    pub samples: usize,
    map: CircleMap,
}

impl ExpansionConstants {
    /// `λ(ε) = 1 + V(ε)`.
    pub fn lambda(&self, eps: f64) -> f64 {
        1.0 + self.map.v.eval(eps)
    }

    /// Working radius `ρ₁ = ρ̂₀ / 2`.
    pub fn default_rho1(&self) -> f64 {
        0.5 * self.rho0_hat
    }
}

/// Right-hand side factor `1 + V(d) / 2^{σ+2}` of the near-diagonal expansion inequality.
pub fn expansion_factor(map: &CircleMap, d: f64) -> f64 {
    1.0 + map.v.eval(d) / 2f64.powf(map.sigma() + 2.0)
}

/// Whether `d(Tx, Ty) >= d(x, y)(1 + V(d(x,y)) / 2^{σ+2})`.
pub fn expansion_holds(map: &CircleMap, x: f64, y: f64) -> bool {
    let d = circle_dist(x, y);
    map.image_dist(x, y) >= d * expansion_factor(map, d)
}

/// Random pairs `(x, y)` with `0 < d(x, y) < r_max`: distances half uniform, half
/// log-uniform down to `1e-9`; one pair in ten straddles the fixed point (`d >= 1e-6`).
pub fn sample_close_pairs<R: Rng>(rng: &mut R, count: usize, r_max: f64) -> Vec<(f64, f64)> {
    let log_lo = 1e-9f64.ln();
    (0..count)
        .map(|i| {
            let straddle = i % 10 == 9 && r_max > 1e-6;
            let d = if straddle {
                (rng.gen_range(1e-6f64.ln()..r_max.ln())).exp()
            } else if i % 2 == 0 {
                rng.gen_range(0.0..r_max).max(1e-9)
            } else {
                rng.gen_range(log_lo..r_max.ln()).exp()
            };
            if straddle {
                let x = rng.gen_range(0.0..1.0) * d;
                (x, wrap(x - d))
            } else {
                let x: f64 = rng.gen_range(0.0..1.0);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (x, wrap(x + sign * d))
            }
        })
        .filter(|(x, y)| {
            let d = circle_dist(*x, *y);
            d > 0.0 && d < r_max
        })
        .collect()
}

/// Estimates `ρ₀` (largest dyadic `r ≤ 1/4` with no sampled violation among pairs
/// closer than `r`) and `ρ_V`.
pub fn estimate_rho0<R: Rng>(map: &CircleMap, samples: usize, rng: &mut R) -> Result<ExpansionConstants> {
    if samples < 1000 {
        return Err(Error::InvalidParameters(format!("estimate_rho0 needs >= 1000 samples, got {samples}")));
    }
    let pairs = sample_close_pairs(rng, samples, 0.25);
    let first_violation = pairs
        .iter()
        .filter(|(x, y)| !expansion_holds(map, *x, *y))
        .map(|(x, y)| circle_dist(*x, *y))
        .fold(f64::INFINITY, f64::min);
    let mut r = 0.25;
    while r > first_violation {
        r *= 0.5;
        if r < 1e-6 {
            return Err(Error::DegenerateMap(format!(
                "expansion inequality fails at distance {first_violation:e}"
            )));
        }
    }
    Ok(ExpansionConstants { rho0_hat: r, rho_v_hat: estimate_rho_v(map), samples: pairs.len(), map: map.clone() })
}

fn estimate_rho_v(map: &CircleMap) -> f64 {
    let n = 4096;
    let nv = map.branch_count() as f64;
    let mut r = 0.25;
    while r > 1e-12 {
        let max_jump = (0..=n)
            .map(|i| {
                let x = (1.0 - r) * i as f64 / n as f64;
                map.v.eval(x + r) - map.v.eval(x)
            })
            .fold(0.0, f64::max);
        if r * nv + max_jump < 0.5 {
            return r;
        }
        r *= 0.5;
    }
    r
}

/// Counts sampled pairs in `[ε, 1)` with `d < radius` that violate `d(Tx,Ty) >= (1+V(ε)) d`.
pub fn local_expansion_violations<R: Rng>(
    map: &CircleMap,
    eps: f64,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> usize {
    let lambda = 1.0 + map.v.eval(eps);
    let mut bad = 0;
    for _ in 0..samples {
        let x = rng.gen_range(eps..1.0);
        let d = rng.gen_range(0.0..radius);
        let y = x + if rng.gen_bool(0.5) { d } else { -d };
        if !(eps..1.0).contains(&y) || d == 0.0 {
            continue;
        }
        if map.image_dist(x, y) < lambda * circle_dist(x, y) {
            bad += 1;
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mp() -> CircleMap {
        CircleMap::manneville_pomeau(0.5).unwrap()
    }

    /// Independent bisection for x + x^1.5 = 1, written without the map type.
    fn oracle_root() -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.powf(1.5) < 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    }

    #[test]
    fn apply_examples() {
        let t = mp();
        assert_abs_diff_eq!(t.apply(0.25), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(t.apply(0.81), 0.539, epsilon = 1e-12);
        assert_eq!(t.apply(0.0), 0.0);
        assert_eq!(CircleMap::iterated_log(1, 1.0).unwrap().apply(0.0), 0.0);
    }

    #[test]
    fn preimage_examples() {
        let t = mp();
        let roots = t.preimages(0.0, DEFAULT_INVERSE_TOL).unwrap();
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[0], 0.0);
        assert_abs_diff_eq!(roots[1], oracle_root(), epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1], 0.569840, epsilon = 1e-6);
        let roots = t.preimages(0.375, DEFAULT_INVERSE_TOL).unwrap();
        assert!(roots.iter().any(|r| (r - 0.25).abs() < 1e-12));
        assert!(t.preimages(0.3, 0.0).is_err());
    }

    #[test]
    fn branch_counts() {
        assert_eq!(mp().branch_count(), 2);
        assert_eq!(CircleMap::iterated_log(1, 1.0).unwrap().branch_count(), 2);
        let v = VaryingFunction::custom("triple", 1.0, |x| 2.0 * x).unwrap();
        let t = CircleMap::new(v).unwrap();
        assert_eq!(t.branch_count(), 3);
        assert_eq!(t.preimages(0.42, DEFAULT_INVERSE_TOL).unwrap().len(), 3);
    }

    #[test]
    fn invalid_v_rejected() {
        assert!(VaryingFunction::custom("bad1", 0.0, |x| 0.5 * x).is_err());
        assert!(VaryingFunction::custom("bad0", 0.0, |x| x + 0.1).is_err());
        assert!(VaryingFunction::custom("dip", 1.0, |x| if (0.4..0.5).contains(&x) { 0.1 } else { x }).is_err());
        assert!(VaryingFunction::power(-1.0).is_err());
        assert!(VaryingFunction::iterated_log(0, 1.0).is_err());
    }

    #[test]
    fn iterated_log_junction() {
        let v = VaryingFunction::iterated_log(1, 1.0).unwrap();
        let VaryingFamily::IteratedLog { x_c, .. } = *v.family() else { panic!() };
        assert_abs_diff_eq!(x_c, (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.eval(x_c), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.eval(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.eval(1e-10), 1.0 / 1e10f64.ln(), epsilon = 1e-15);
        let v2 = VaryingFunction::iterated_log(2, 1.0).unwrap();
        assert!(v2.eval(1e-5) > 0.0 && v2.eval(1e-5) < 0.5);
    }

    #[test]
    fn paired_preorbit_examples() {
        let t = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = t.random_preorbit(0.3, 30, &mut rng).unwrap();
        let same = t.paired_preorbit(&xs, xs[0], 30, 0.1).unwrap();
        for (a, b) in same.points.iter().zip(&xs) {
            assert!(circle_dist(*a, *b) < 1e-12);
        }
        let empty = t.paired_preorbit(&xs, 0.301, 0, 0.1).unwrap();
        assert_eq!(empty.points, vec![0.301]);

        // branch 0 all the way down
        let mut branch0 = vec![0.3];
        for _ in 0..30 {
            branch0.push(t.preimages(*branch0.last().unwrap(), DEFAULT_INVERSE_TOL).unwrap()[0]);
        }
        let paired = t.paired_preorbit(&branch0, 0.301, 30, 0.1).unwrap();
        assert!(paired.violations.is_empty());
        let dists: Vec<f64> = paired.points.iter().zip(&branch0).map(|(y, x)| circle_dist(*x, *y)).collect();
        assert!(dists.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{dists:?}");
        assert!(t.paired_preorbit(&branch0, 0.5, 3, 0.1).is_err());
    }

    #[test]
    fn rho0_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let c = estimate_rho0(&mp(), 20_000, &mut rng).unwrap();
        assert!(c.rho0_hat > 0.0 && c.rho0_hat <= 0.25);
        assert!(c.rho_v_hat > 0.0 && c.rho_v_hat < 0.5);
        assert_abs_diff_eq!(c.rho_v_hat, 1.0 / 16.0);
        assert!(c.lambda(0.01) > 1.0);
        let pairs = sample_close_pairs(&mut rng, 20_000, c.rho0_hat);
        assert!(pairs.iter().all(|(x, y)| expansion_holds(&mp(), *x, *y)));

        // T(x) = 2x mod 1 written as x(1 + V(x)) with V = 1 on (0, 1]
        let doubling = CircleMap::new(VaryingFunction::custom("doubling", 0.0, |x| if x > 0.0 { 1.0 } else { 0.0 }).unwrap()).unwrap();
        let c = estimate_rho0(&doubling, 5_000, &mut rng).unwrap();
        assert_eq!(c.rho0_hat, 0.25);
        assert!(estimate_rho0(&doubling, 10, &mut rng).is_err());
    }

    #[test]
    fn local_expansion_away_from_zero() {
        let t = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho_v = estimate_rho_v(&t);
        for eps in [0.01, 0.1, 0.3] {
            assert_eq!(local_expansion_violations(&t, eps, rho_v, 20_000, &mut rng), 0);
        }
    }

    #[test]
    fn pairing_is_injective() {
        let t = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = Vec::new();
        for _ in 0..20 {
            let xs = t.random_preorbit(0.4, 8, &mut rng).unwrap();
            let ys = t.paired_preorbit(&xs, 0.41, 8, 0.1).unwrap().points;
            seen.push((xs, ys));
        }
        for i in 0..seen.len() {
            for j in 0..seen.len() {
                let x_same = seen[i].0.iter().zip(&seen[j].0).all(|(a, b)| (a - b).abs() < 1e-12);
                let y_same = seen[i].1.iter().zip(&seen[j].1).all(|(a, b)| (a - b).abs() < 1e-12);
                assert_eq!(x_same, y_same);
            }
        }
    }

    proptest! {
        #[test]
        fn preimages_round_trip(y in 0.0..1.0f64, s in 0.1..0.95f64) {
            let t = CircleMap::manneville_pomeau(s).unwrap();
            let roots = t.preimages(y, DEFAULT_INVERSE_TOL).unwrap();
            prop_assert_eq!(roots.len(), 2);
            prop_assert!(roots[0] < roots[1]);
            let a1 = t.preimages(0.0, DEFAULT_INVERSE_TOL).unwrap()[1];
            prop_assert!(roots[0] <= a1 + 1e-12 && roots[1] >= a1 - 1e-12);
            for r in roots {
                prop_assert!(circle_dist(t.apply(r), y) <= 2.0 * DEFAULT_INVERSE_TOL);
            }
        }

        #[test]
        fn ilog_round_trip(y in 0.0..1.0f64) {
            let t = CircleMap::iterated_log(1, 1.0).unwrap();
            for r in t.preimages(y, DEFAULT_INVERSE_TOL).unwrap() {
                prop_assert!(circle_dist(t.apply(r), y) <= 2.0 * DEFAULT_INVERSE_TOL);
            }
        }
    }
}
