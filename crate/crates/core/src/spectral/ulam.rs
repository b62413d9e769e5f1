//! Stationary law of the normalized operator matrix.

use crate::circle::{DiscreteMeasure, GridFunction};
use crate::error::{Error, Result};

use super::TransferOperator;

/// Row-stochastic matrix sending node `j` to the cells of its pre-images `y` with
/// weights `e^{f(y)} h(y) / (χ h(x_j))`, and its stationary vector.
#[derive(Debug, Clone)]
pub struct UlamResult {
    pub mu: DiscreteMeasure,
    pub iterations: usize,
    /// TV distance between the last two iterates.
    pub tv_defect: f64,
    pub converged: bool,
    /// Largest `|(L h)(x_j) / (χ h_j) - 1|` before row normalization.
    pub row_defect: f64,
    stride: usize,
    cols: Vec<u32>,
    probs: Vec<f64>,
}

impl UlamResult {
    fn row(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = j * self.stride..(j + 1) * self.stride;
        self.cols[r.clone()].iter().zip(&self.probs[r]).map(|(c, p)| (*c as usize, *p))
    }

    fn len(&self) -> usize {
        self.mu.resolution()
    }
}

/// Invariant measure of `L_{f̃}`: the left fixed vector of the Doob transform of `op`
/// by `(χ, h)`.
pub fn ulam_invariant_measure(
    op: &TransferOperator,
    h: &GridFunction,
    chi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<UlamResult> {
    h.check_grid(op.grid())?;
    if !(h.min() > 0.0) || !(chi > 0.0) {
        return Err(Error::Domain(format!("need h > 0 and χ > 0, got min h = {} and χ = {chi}", h.min())));
    }
    let n = op.len();
    let hv = h.values();
    let grid = op.grid().clone();
    let branches = op.table().branches();
    let stride = branches;
    let mut cols = Vec::with_capacity(n * stride);
    let mut probs = Vec::with_capacity(n * stride);
    let mut row_defect = 0.0f64;
    for j in 0..n {
        let start = probs.len();
        let entries: Vec<(usize, f64)> = op.row(j).collect();
        for (k, &y) in op.table().of(j).iter().enumerate() {
            // e^{f(y)} h(y) from the two interpolation entries of pre-image k
            let mass: f64 = entries[2 * k..2 * k + 2].iter().map(|(m, a)| a * hv[*m]).sum();
            let (cell, t) = grid.locate(y);
            // roots a rounding error below a node belong to the next cell
            let cell = if t > 1.0 - 1e-9 { (cell + 1) % n } else { cell };
            cols.push(cell as u32);
            probs.push(mass / (chi * hv[j]));
        }
        let s: f64 = probs[start..].iter().sum();
        row_defect = row_defect.max((s - 1.0).abs());
        probs[start..].iter_mut().for_each(|p| *p /= s);
    }
    if row_defect > 0.05 {
        return Err(Error::Domain(format!("normalized operator rows deviate from 1 by {row_defect}")));
    }

    let mut pi: Vec<f64> = (0..n).map(|i| grid.cell_width(i)).collect();
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut tv = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let pj = pi[j];
            let r = j * stride..(j + 1) * stride;
            for (c, p) in cols[r.clone()].iter().zip(&probs[r]) {
                next[*c as usize] += pj * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        tv = 0.5 * pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
        if tv < tol {
            converged = true;
            break;
        }
    }
    Ok(UlamResult {
        mu: DiscreteMeasure::probability(grid, pi)?,
        iterations,
        tv_defect: tv,
        converged,
        row_defect,
        stride,
        cols,
        probs,
    })
}

/// `ν ∝ μ / h`, normalized to a probability.
pub fn eigenmeasure(mu: &DiscreteMeasure, h: &GridFunction) -> Result<DiscreteMeasure> {
    if mu.grid() != h.grid() {
        return Err(Error::Dimension(mu.resolution(), h.resolution()));
    }
    let w = mu.weights().iter().zip(h.values()).map(|(m, v)| m / v).collect();
    DiscreteMeasure::probability(mu.grid().clone(), w)
}

/// Second eigenvalue modulus of the normalized matrix by power iteration on the
/// complement of constants, from a deterministic start vector.
pub fn spectral_gap_estimate(ulam: &UlamResult, iterations: usize) -> f64 {
    let n = ulam.len();
    let pi = ulam.mu.weights();
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * 2.399_963).sin() + 0.3 * (i as f64 / n as f64)).collect();
    let project = |v: &mut Vec<f64>| {
        let mean: f64 = v.iter().zip(pi).map(|(a, b)| a * b).sum();
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        norm
    };
    project(&mut v);
    let mut logs = Vec::with_capacity(iterations);
    let mut next = vec![0.0; n];
    for _ in 0..iterations {
        for (j, o) in next.iter_mut().enumerate() {
            *o = ulam.row(j).map(|(m, p)| p * v[m]).sum();
        }
        std::mem::swap(&mut v, &mut next);
        let norm = project(&mut v);
        if !(norm > 0.0) {
            return 0.0;
        }
        logs.push(norm.ln());
    }
    let tail = &logs[logs.len() / 2..];
    if tail.is_empty() {
        return f64::NAN;
    }
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::Grid;
    use crate::maps::CircleMap;
    use crate::spectral::{power_iterate, PowerOptions};
    use std::f64::consts::PI;

    #[test]
    fn doubling_map_keeps_lebesgue() {
        let v = crate::maps::VaryingFunction::custom("one", 0.0, |x| if x > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let t = CircleMap::new(v).unwrap();
        let grid = Grid::uniform(256).unwrap();
        let op = TransferOperator::new(&t, &|_x: f64| 0.0, &grid).unwrap();
        let h = GridFunction::constant(&grid, 1.0);
        let r = ulam_invariant_measure(&op, &h, 2.0, 1e-13, 10_000).unwrap();
        assert!(r.converged);
        let leb = DiscreteMeasure::lebesgue(&grid);
        assert!(r.mu.tv_distance(&leb).unwrap() < 1e-6);
        let nu = eigenmeasure(&r.mu, &h).unwrap();
        assert!(nu.is_probability(1e-14));
    }

    #[test]
    fn rejects_bad_eigendata() {
        let t = CircleMap::manneville_pomeau(0.5).unwrap();
        let grid = Grid::uniform(128).unwrap();
        let op = TransferOperator::new(&t, &|_x: f64| 0.0, &grid).unwrap();
        let h = GridFunction::constant(&grid, 1.0);
        assert!(ulam_invariant_measure(&op, &h, 3.0, 1e-10, 100).is_err());
        assert!(ulam_invariant_measure(&op, &h, -1.0, 1e-10, 100).is_err());
    }

    #[test]
    fn stationary_law_is_probability_with_gap() {
        let t = CircleMap::manneville_pomeau(0.5).unwrap();
        let grid = Grid::uniform(1024).unwrap();
        let f = |x: f64| 0.2 * (2.0 * PI * x).cos();
        let op = TransferOperator::new(&t, &f, &grid).unwrap();
        let p = power_iterate(&op, PowerOptions::default()).unwrap();
        let r = ulam_invariant_measure(&op, &p.h, p.chi, 1e-12, 20_000).unwrap();
        assert!(r.converged, "tv {}", r.tv_defect);
        assert!(r.mu.is_probability(1e-12));
        assert!(r.mu.weights().iter().all(|w| *w > 0.0));
        let lam = spectral_gap_estimate(&r, 300);
        assert!(lam < 1.0 && lam > 0.0, "lambda2 {lam}");
    }
}
