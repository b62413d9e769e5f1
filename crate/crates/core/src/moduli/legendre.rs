//! Building the eigenfunction modulus `Ω` from `ω / V` by a double concave
//! Legendre transform, with an upper-hull cross-check.

use rayon::prelude::*;

use super::{log_space, Modulus, Provenance};
use crate::error::{Error, Result};
use crate::maps::CircleMap;

/// Concave conjugate `f*(p) = min_i [p y_i - f_i]` at every slope `p`, by explicit
/// minimization over all sample points.
pub fn conjugate(ys: &[f64], vals: &[f64], ps: &[f64]) -> Vec<f64> {
    debug_assert_eq!(ys.len(), vals.len());
    ps.par_iter()
        .map(|&p| ys.iter().zip(vals).map(|(&y, &v)| p * y - v).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Upper concave hull of points with increasing abscissae (monotone chain),
/// evaluated back at every abscissa.
pub fn upper_hull(xs: &[f64], vals: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b if it lies on or below the chord from a to i
            let cross = (xs[b] - xs[a]) * (vals[i] - vals[a]) - (vals[b] - vals[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut seg = 0;
    for (i, &x) in xs.iter().enumerate() {
        while seg + 1 < hull.len() && hull[seg + 1] < i {
            seg += 1;
        }
        let a = hull[seg];
        if a == i || seg + 1 == hull.len() {
            out.push(vals[a].max(vals[i]));
        } else {
            let b = hull[seg + 1];
            let t = (x - xs[a]) / (xs[b] - xs[a]);
            out.push(vals[a] + t * (vals[b] - vals[a]));
        }
    }
    out
}

/// Intermediates of `f ↦ f** + max f*` on a sample grid.
#[derive(Debug, Clone)]
pub struct DoubleConjugate {
    pub slopes: Vec<f64>,
    /// `f*` at each slope.
    pub star: Vec<f64>,
    /// `f**` at each abscissa.
    pub star_star: Vec<f64>,
    pub max_star: f64,
    /// `f** + max f*`.
    pub result: Vec<f64>,
}

/// Double conjugate of non-negative samples `vals` on `ys` (with `ys[0] = 0`), taking
/// slopes `{0} ∪` `slope_count` log-spaced values up to the steepest chord from the origin.
pub fn double_conjugate(ys: &[f64], vals: &[f64], slope_count: usize) -> DoubleConjugate {
    let p_max = ys
        .iter()
        .zip(vals)
        .skip(1)
        .map(|(&y, &v)| v / y)
        .fold(0.0, f64::max);
    let mut slopes = vec![0.0];
    if p_max > 0.0 {
        slopes.extend(log_space(p_max * 1e-12, p_max, slope_count.max(2)));
    }
    let star = conjugate(ys, vals, &slopes);
    let star_star = conjugate(&slopes, &star, ys);
    let max_star = star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let result = star_star.iter().map(|v| v + max_star).collect();
    DoubleConjugate { slopes, star, star_star, max_star, result }
}

/// `Ω` with every intermediate of its construction.
#[derive(Debug, Clone)]
pub struct LegendreOmega {
    pub modulus: Modulus,
    pub tau: f64,
    /// `0` followed by log-spaced points up to `tau`.
    pub ys: Vec<f64>,
    /// `ω / V`, set to `0` at `0`.
    pub theta0: Vec<f64>,
    /// Running maximum of `theta0`.
    pub theta1: Vec<f64>,
    pub transform: DoubleConjugate,
    /// Monotone-chain upper hull of `theta1`, for cross-checking.
    pub hull: Vec<f64>,
}

impl LegendreOmega {
    /// `Ω` at the grid points.
    pub fn values(&self) -> &[f64] {
        &self.transform.result
    }

    /// `sup |Ω - hull(θ₁)|` over the grid.
    pub fn hull_gap(&self) -> f64 {
        self.values().iter().zip(&self.hull).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Smallest positive grid abscissa.
pub const LEGENDRE_Y_MIN: f64 = 1e-8;

/// Builds `Ω` on `[0, tau]` from `ω / V` and extends it by the constant `Ω(tau)`.
pub fn build_omega_legendre(map: &CircleMap, omega: &super::Modulus, tau: f64, grid_size: usize) -> Result<LegendreOmega> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameters(format!("tau = {tau} must be positive")));
    }
    if grid_size < 1000 {
        return Err(Error::InvalidParameters(format!("grid_size = {grid_size} must be >= 1000")));
    }
    let y_min = LEGENDRE_Y_MIN.min(tau * 1e-3);
    let mut ys = vec![0.0];
    ys.extend(log_space(y_min, tau, grid_size));
    let mut theta0 = Vec::with_capacity(ys.len());
    theta0.push(0.0);
    for &y in &ys[1..] {
        let v = map.v().eval(y);
        if !(v > 0.0) {
            return Err(Error::Division(y));
        }
        theta0.push(omega.eval(y) / v);
    }
    let mut theta1 = theta0.clone();
    for i in 1..theta1.len() {
        theta1[i] = theta1[i].max(theta1[i - 1]);
    }
    let transform = double_conjugate(&ys, &theta1, 2 * grid_size);
    let hull = upper_hull(&ys, &theta1);

    let nodes = ys.clone();
    let values = transform.result.clone();
    let modulus = Modulus::from_fn(Provenance::LegendreBuilt { tau }, tau, move |x| interpolate(&nodes, &values, x))?;
    Ok(LegendreOmega { modulus, tau, ys, theta0, theta1, transform, hull })
}

fn interpolate(xs: &[f64], vals: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&node| node <= x);
    if i == 0 {
        return vals[0];
    }
    if i == xs.len() {
        return vals[xs.len() - 1];
    }
    let (a, b) = (i - 1, i);
    let t = (x - xs[a]) / (xs[b] - xs[a]);
    vals[a] + t * (vals[b] - vals[a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::{omega_ab, WINDOW_CAP};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mp() -> CircleMap {
        CircleMap::manneville_pomeau(0.5).unwrap()
    }

    fn brute_force_conjugate(ys: &[f64], vals: &[f64], p: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..ys.len() {
            let v = p * ys[i] - vals[i];
            if v < best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn reproduces_power_modulus() {
        let built = build_omega_legendre(&mp(), &omega_ab(0.75, 0.0).unwrap(), WINDOW_CAP, 4000).unwrap();
        let target = omega_ab(0.25, 0.0).unwrap();
        let err = built.ys.iter().zip(built.values()).map(|(y, v)| (v - target.eval(*y)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "sup error {err}");
        assert!(built.hull_gap() < 1e-6);
        assert_eq!(built.modulus.eval(0.0), 0.0);
        assert!(built.values()[0].abs() < 1e-10);
        assert!(built.modulus.check_invariants(400).is_ok());
    }

    #[test]
    fn intermediates_have_expected_shape() {
        let built = build_omega_legendre(&mp(), &omega_ab(0.9, 1.0).unwrap(), 0.01, 2000).unwrap();
        let t = &built.transform;
        // f* is non-decreasing, non-positive, concave in p
        assert!(t.star.iter().all(|v| *v <= 0.0));
        assert!(t.star.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        for i in 1..t.slopes.len() - 1 {
            let (a, b, c) = (t.slopes[i - 1], t.slopes[i], t.slopes[i + 1]);
            let chord = t.star[i - 1] + (t.star[i + 1] - t.star[i - 1]) * (b - a) / (c - a);
            assert!(t.star[i] >= chord - 1e-12);
        }
        for i in 0..built.ys.len() {
            assert!(built.theta1[i] >= built.theta0[i]);
            assert!(t.star_star[i] >= built.theta1[i] - 1e-12);
            assert!(built.values()[i] >= built.theta0[i] - 1e-12);
        }
        assert!(built.hull_gap() < 1e-5);
    }

    #[test]
    fn degenerate_zero_input() {
        let ys: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let dc = double_conjugate(&ys, &vec![0.0; 50], 100);
        assert!(dc.result.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn idempotent_on_concave_input() {
        let mut ys = vec![0.0];
        ys.extend(log_space(1e-6, 0.1, 1500));
        let vals: Vec<f64> = ys.iter().map(|y| y.sqrt()).collect();
        let once = double_conjugate(&ys, &vals, 3000);
        let twice = double_conjugate(&ys, &once.result, 3000);
        for (a, b) in once.result.iter().zip(&twice.result) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in once.result.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn vanishing_v_is_a_division_error() {
        let v = crate::maps::VaryingFunction::custom("late", 1.0, |x| ((x - 0.01) / 0.99).max(0.0)).unwrap();
        let map = CircleMap::new(v).unwrap();
        let r = build_omega_legendre(&map, &omega_ab(0.75, 0.0).unwrap(), 0.1, 1000);
        assert!(matches!(r, Err(Error::Division(_))));
    }

    #[test]
    fn hull_of_step() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(upper_hull(&xs, &[0.0, 3.0, 3.0, 3.0]), vec![0.0, 3.0, 3.0, 3.0]);
        assert_eq!(upper_hull(&xs, &[0.0, 0.0, 0.0, 3.0]), vec![0.0, 1.0, 2.0, 3.0]);
    }

    proptest! {
        #[test]
        fn conjugate_matches_brute_force(vals in prop::collection::vec(0.0..1.0f64, 2..60), p in 0.0..50.0f64) {
            let ys: Vec<f64> = (0..vals.len()).map(|i| (i as f64 / vals.len() as f64).powi(2)).collect();
            let fast = conjugate(&ys, &vals, &[p]);
            prop_assert_eq!(fast[0], brute_force_conjugate(&ys, &vals, p));
        }

        #[test]
        fn double_conjugate_majorizes_and_matches_hull(vals in prop::collection::vec(0.0..1.0f64, 3..40)) {
            let ys: Vec<f64> = (0..vals.len()).map(|i| i as f64 / vals.len() as f64).collect();
            let mut vals = vals;
            vals[0] = 0.0;
            for i in 1..vals.len() {
                vals[i] = vals[i].max(vals[i - 1]);
            }
            let dc = double_conjugate(&ys, &vals, 4000);
            let hull = upper_hull(&ys, &vals);
            for i in 0..ys.len() {
                prop_assert!(dc.star_star[i] >= vals[i] - 1e-12);
                prop_assert!(hull[i] >= vals[i] - 1e-12);
                prop_assert!((dc.result[i] - hull[i]).abs() < 1e-2 * (1.0 + hull[i]));
            }
        }
    }

    #[test]
    fn matches_hull_on_rough_input() {
        let ys: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let mut vals: Vec<f64> = ys.iter().map(|y| (y * 37.0).sin().abs() * y).collect();
        for i in 1..vals.len() {
            vals[i] = vals[i].max(vals[i - 1]);
        }
        let dc = double_conjugate(&ys, &vals, 20_000);
        let hull = upper_hull(&ys, &vals);
        for i in 0..ys.len() {
            assert_abs_diff_eq!(dc.result[i], hull[i], epsilon = 1e-3);
        }
    }
}
