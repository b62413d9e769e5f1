//! Circle arithmetic, grid-sampled functions and discrete measures.
//!
//! Functions live on nodes and are read by piecewise-linear interpolation that
//! wraps from the last node back to `0`. Measures live on cells: weight `i` is
//! attached to the cell `[x_i, x_{i+1})` (the last cell ends at `1`), and the
//! pairing `∫ φ dm` uses the node value `φ(x_i)` as the representative of cell `i`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A point of the circle `R/Z`, stored in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(x: f64) -> Self {
        CirclePoint(wrap(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

/// Reduces `x` modulo 1 into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid of a tiny negative number rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// The standard metric `min{|x-y|, |x-y±1|}`.
#[inline]
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Signed displacement from `from` to `to`, taken in `(-1/2, 1/2]`.
#[inline]
pub fn signed_offset(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(1.0);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Node layout on the circle. Node `0` is always the point `0`.
#[derive(Debug, Clone)]
pub enum Grid {
    /// `n` equispaced nodes `i/n`.
    Uniform(usize),
    /// Strictly increasing nodes in `[0, 1)` starting at `0`.
    Nodes(Arc<[f64]>),
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Grid::Uniform(a), Grid::Uniform(b)) => a == b,
            (Grid::Nodes(a), Grid::Nodes(b)) => Arc::ptr_eq(a, b) || a[..] == b[..],
            _ => false,
        }
    }
}

impl Grid {
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameters(format!("grid resolution {n} < 2")));
        }
        Ok(Grid::Uniform(n))
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameters("grid needs at least 2 nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidParameters("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || *nodes.last().unwrap() >= 1.0 {
            return Err(Error::InvalidParameters(
                "nodes must be strictly increasing in [0, 1)".into(),
            ));
        }
        Ok(Grid::Nodes(nodes.into()))
    }

    /// Geometric refinement toward the fixed point: spacing `1/n` on `[1/2, 1)`,
    /// halved on every dyadic scale `[2^{-j-1}, 2^{-j})` for `j = 1..=levels`,
    /// and kept at the finest spacing on `[0, 2^{-levels-1})`.
    pub fn refined(n: usize, levels: u32) -> Result<Self> {
        if !n.is_power_of_two() || n < (2usize << levels) {
            return Err(Error::InvalidParameters(format!(
                "refined grid needs n a power of two with n >= 2^(levels+1), got n = {n}, levels = {levels}"
            )));
        }
        let mut nodes = Vec::with_capacity(n / 2 * (levels as usize + 2));
        let finest = 1.0 / (n as f64 * (1u64 << levels) as f64);
        let inner_end = 0.5f64.powi(levels as i32 + 1);
        let inner_count = (inner_end / finest).round() as usize;
        nodes.extend((0..inner_count).map(|i| i as f64 * finest));
        for j in (0..=levels).rev() {
            let lo = 0.5f64.powi(j as i32 + 1);
            let h = 0.5f64.powi(j as i32) / n as f64;
            let count = (lo / h).round() as usize;
            nodes.extend((0..count).map(|i| lo + i as f64 * h));
        }
        Grid::from_nodes(nodes)
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Uniform(n) => *n,
            Grid::Nodes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        match self {
            Grid::Uniform(n) => i as f64 / *n as f64,
            Grid::Nodes(v) => v[i],
        }
    }

    /// Right end of cell `i` as a real number (`1.0` for the last cell).
    #[inline]
    pub fn cell_right(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            1.0
        } else {
            self.node(i + 1)
        }
    }

    #[inline]
    pub fn cell_width(&self, i: usize) -> f64 {
        self.cell_right(i) - self.node(i)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.len()).map(|i| self.cell_width(i)).fold(0.0, f64::max)
    }

    /// Cell index `i` and barycentric offset `t ∈ [0, 1)` with
    /// `x = x_i + t (x_{i+1} - x_i)`, for `x` already in `[0, 1)`.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        match self {
            Grid::Uniform(n) => {
                let s = x * *n as f64;
                let i = (s.floor() as usize).min(n - 1);
                (i, (s - i as f64).clamp(0.0, 1.0))
            }
            Grid::Nodes(v) => {
                let i = v.partition_point(|&node| node <= x).saturating_sub(1);
                let left = v[i];
                let right = if i + 1 == v.len() { 1.0 } else { v[i + 1] };
                (i, ((x - left) / (right - left)).clamp(0.0, 1.0))
            }
        }
    }

    /// Interpolation stencil `[(i, 1-t), (i+1 mod n, t)]` for a circle point.
    #[inline]
    pub fn stencil(&self, x: f64) -> [(usize, f64); 2] {
        let (i, t) = self.locate(wrap(x));
        let j = if i + 1 == self.len() { 0 } else { i + 1 };
        [(i, 1.0 - t), (j, t)]
    }
}

/// A real function on a circle grid, read by wrapping piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(grid.len(), values.len()));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidParameters("grid resolution < 2".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn sample<F: Fn(f64) -> f64>(grid: &Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        GridFunction { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        GridFunction { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let [(i, wi), (j, wj)] = self.grid.stencil(x);
        if wj == 0.0 {
            self.values[i]
        } else {
            wi * self.values[i] + wj * self.values[j]
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |self - other|` over nodes.
    pub fn sup_dist(&self, other: &GridFunction) -> Result<f64> {
        self.check_grid(other.grid())?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::Dimension(self.grid.len(), grid.len()));
        }
        Ok(())
    }
}

/// Non-negative cell weights on a circle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::Dimension(grid.len(), weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("measure weight {w} is not a finite non-negative number")));
        }
        Ok(DiscreteMeasure { grid, weights })
    }

    /// Builds a probability measure, rescaling the weights to sum to one.
    pub fn probability(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        let mut m = DiscreteMeasure::new(grid, weights)?;
        let total = m.total();
        if !(total > 0.0) {
            return Err(Error::Domain("measure has zero total mass".into()));
        }
        m.weights.iter_mut().for_each(|w| *w /= total);
        Ok(m)
    }

    /// Lebesgue measure: each cell weighted by its width.
    pub fn lebesgue(grid: &Grid) -> Self {
        let weights = (0..grid.len()).map(|i| grid.cell_width(i)).collect();
        DiscreteMeasure { grid: grid.clone(), weights }
    }

    pub fn dirac(grid: &Grid, cell: usize) -> Result<Self> {
        if cell >= grid.len() {
            return Err(Error::Dimension(grid.len(), cell));
        }
        let mut weights = vec![0.0; grid.len()];
        weights[cell] = 1.0;
        Ok(DiscreteMeasure { grid: grid.clone(), weights })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn resolution(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol
    }

    /// Total-variation distance `½ Σ |m_i - m'_i|`.
    pub fn tv_distance(&self, other: &DiscreteMeasure) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Dimension(self.resolution(), other.resolution()));
        }
        Ok(0.5 * compensated_sum(self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs())))
    }

    /// Mass of the arc from `left` to `right` (counter-clockwise, length `< 1`),
    /// pro-rating the two boundary cells by overlap length.
    pub fn arc_mass(&self, left: f64, right: f64) -> f64 {
        let length = (right - left).rem_euclid(1.0);
        if length == 0.0 {
            return 0.0;
        }
        let start = wrap(left);
        let end = start + length;
        if end <= 1.0 {
            self.interval_mass(start, end)
        } else {
            self.interval_mass(start, 1.0) + self.interval_mass(0.0, end - 1.0)
        }
    }

    /// Number of (possibly partial) cells met by the arc, used as a resolution measure.
    pub fn cells_in_arc(&self, left: f64, right: f64) -> f64 {
        let length = (right - left).rem_euclid(1.0);
        let start = wrap(left);
        let end = start + length;
        let count = |a: f64, b: f64| -> f64 {
            let (i, ta) = self.grid.locate(a);
            let (j, tb) = self.grid.locate(b.min(1.0 - f64::EPSILON));
            (j as f64 + tb) - (i as f64 + ta)
        };
        if end <= 1.0 {
            count(start, end)
        } else {
            count(start, 1.0) + count(0.0, end - 1.0)
        }
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (i, _) = self.grid.locate(a);
        let mut terms = Vec::new();
        let mut k = i;
        while k < self.grid.len() {
            let left = self.grid.node(k);
            if left >= b {
                break;
            }
            let right = self.grid.cell_right(k);
            let overlap = right.min(b) - left.max(a);
            if overlap > 0.0 {
                terms.push(self.weights[k] * overlap / (right - left));
            }
            k += 1;
        }
        compensated_sum(terms)
    }
}

/// `∫ f dm = Σ f(x_i) m_i`, node value as the representative of cell `i`.
pub fn integrate(f: &GridFunction, m: &DiscreteMeasure) -> Result<f64> {
    if f.grid() != m.grid() {
        return Err(Error::Dimension(f.resolution(), m.resolution()));
    }
    Ok(compensated_sum(f.values().iter().zip(m.weights()).map(|(a, b)| a * b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn dist_examples() {
        assert_abs_diff_eq!(circle_dist(0.1, 0.9), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(circle_dist(0.25, 0.75), 0.5, epsilon = 1e-15);
        assert_eq!(circle_dist(0.3, 0.3), 0.0);
    }

    #[test]
    fn wrap_stays_below_one() {
        assert_eq!(CirclePoint::new(-1e-20).value(), 0.0);
        assert_eq!(CirclePoint::new(1.0).value(), 0.0);
        assert_abs_diff_eq!(CirclePoint::new(2.25).value(), 0.25);
        assert_abs_diff_eq!(CirclePoint::new(-0.25).value(), 0.75);
    }

    #[test]
    fn eval_examples() {
        let f = GridFunction::new(Grid::uniform(2).unwrap(), vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(f.eval(0.25), 0.5);
        assert_abs_diff_eq!(f.eval(0.75), 0.5);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(1.0), 0.0);
        let c = GridFunction::constant(&Grid::uniform(7).unwrap(), 3.5);
        for x in [0.0, 0.1, 0.77, 0.999] {
            assert_eq!(c.eval(x), 3.5);
        }
    }

    #[test]
    fn tiny_grid_rejected() {
        assert!(Grid::uniform(1).is_err());
        assert!(GridFunction::new(Grid::Uniform(4), vec![0.0; 3]).is_err());
    }

    #[test]
    fn integrate_examples() {
        let grid = Grid::uniform(4096).unwrap();
        let one = GridFunction::constant(&grid, 1.0);
        let leb = DiscreteMeasure::lebesgue(&grid);
        assert_abs_diff_eq!(integrate(&one, &leb).unwrap(), 1.0, epsilon = 1e-14);
        let cos = GridFunction::sample(&grid, |x| (2.0 * PI * x).cos());
        assert!(integrate(&cos, &leb).unwrap().abs() < 1e-10);
        let dirac = DiscreteMeasure::dirac(&grid, 17).unwrap();
        assert_eq!(integrate(&cos, &dirac).unwrap(), cos.values()[17]);
        let other = DiscreteMeasure::lebesgue(&Grid::uniform(8).unwrap());
        assert!(matches!(integrate(&cos, &other), Err(Error::Dimension(..))));
    }

    #[test]
    fn refined_grid_layout() {
        let g = Grid::refined(64, 3).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes[0], 0.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        // spacing 1/64 on [1/2, 1), 1/512 near 0
        let (i, _) = g.locate(0.75);
        assert_abs_diff_eq!(g.cell_width(i), 1.0 / 64.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.cell_width(0), 1.0 / 512.0, epsilon = 1e-15);
        assert_eq!(g.len(), 32 * 5);
        let f = GridFunction::sample(&g, |x| 3.0 * x - 1.0);
        assert_abs_diff_eq!(f.eval(0.3), -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(DiscreteMeasure::lebesgue(&g).total(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn arc_mass_prorates_and_wraps() {
        let grid = Grid::uniform(10).unwrap();
        let leb = DiscreteMeasure::lebesgue(&grid);
        assert_abs_diff_eq!(leb.arc_mass(0.15, 0.42), 0.27, epsilon = 1e-14);
        assert_abs_diff_eq!(leb.arc_mass(0.95, 0.05), 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(leb.cells_in_arc(0.95, 0.05), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn dist_is_a_metric(x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64) {
            let dxy = circle_dist(x, y);
            prop_assert!(dxy <= 0.5);
            prop_assert_eq!(dxy, circle_dist(y, x));
            prop_assert!(circle_dist(x, z) <= dxy + circle_dist(y, z) + 1e-15);
        }

        #[test]
        fn eval_is_periodic(x in -3.0..3.0f64) {
            let f = GridFunction::sample(&Grid::Uniform(33), |t| (2.0 * PI * t).sin());
            prop_assert!((f.eval(x) - f.eval(x + 1.0)).abs() < 1e-12);
        }

        #[test]
        fn interpolant_respects_modulus(x in 0.0..1.0f64, y in 0.0..1.0f64) {
            // sin(2πx) has modulus 2π·d; interpolation adds at most twice the sampling error
            let n = 64;
            let f = GridFunction::sample(&Grid::Uniform(n), |t| (2.0 * PI * t).sin());
            let c = 2.0 * PI;
            let bound = c * circle_dist(x, y) + 2.0 * c / n as f64;
            prop_assert!((f.eval(x) - f.eval(y)).abs() <= bound);
        }

        #[test]
        fn integrate_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, seed in 0u64..1000) {
            let grid = Grid::Uniform(50);
            let f = GridFunction::sample(&grid, |x| (x * seed as f64).sin());
            let g = GridFunction::sample(&grid, |x| x * x - 0.3);
            let m = DiscreteMeasure::probability(grid.clone(), (0..50).map(|i| ((i * 7 + seed as usize) % 13) as f64 + 0.5).collect()).unwrap();
            let m2 = DiscreteMeasure::lebesgue(&grid);
            let combo = GridFunction::new(grid.clone(), f.values().iter().zip(g.values()).map(|(u, v)| a * u + b * v).collect()).unwrap();
            let lhs = integrate(&combo, &m).unwrap();
            let rhs = a * integrate(&f, &m).unwrap() + b * integrate(&g, &m).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let mix = DiscreteMeasure::new(grid.clone(), m.weights().iter().zip(m2.weights()).map(|(p, q)| 0.25 * p + 0.75 * q).collect()).unwrap();
            let lhs = integrate(&f, &mix).unwrap();
            let rhs = 0.25 * integrate(&f, &m).unwrap() + 0.75 * integrate(&f, &m2).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
