//! The transfer operator `L_f φ(x) = Σ_{Ty=x} e^{f(y)} φ(y)` on a circle grid and
//! its maximal eigendata.
//!
//! The operator is discretized by evaluating `e^{f}φ` at the exact pre-images of each
//! node, with `φ` read by linear interpolation. The resulting sparse matrix is
//! non-negative; its Perron eigendata `(χ, h)` come from power iteration, and its
//! left eigenvector `ν` from the stationary law `μ = hν` of the Doob-normalized matrix.

mod ulam;

pub use ulam::{eigenmeasure, spectral_gap_estimate, ulam_invariant_measure, UlamResult};

use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{circle_dist, compensated_sum, integrate, DiscreteMeasure, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::maps::{CircleMap, DEFAULT_INVERSE_TOL};
use crate::moduli::Modulus;

/// Anything that can be evaluated as a potential on the circle.
pub trait PotentialFn: Sync {
    fn value(&self, x: f64) -> f64;
}

impl PotentialFn for GridFunction {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

impl<F: Fn(f64) -> f64 + Sync> PotentialFn for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A grid-sampled potential with its declared regularity class.
#[derive(Debug, Clone)]
pub struct Potential {
    pub f: GridFunction,
    pub omega: Modulus,
    /// Largest sampled `|f(x) - f(y)| / ω(d(x,y))`.
    pub omega_seminorm_est: f64,
    /// `|f|_ω / C₁`, once `C₁` is known.
    pub kappa_f: Option<f64>,
}

impl PotentialFn for Potential {
    fn value(&self, x: f64) -> f64 {
        self.f.eval(x)
    }
}

impl Potential {
    pub fn new(f: GridFunction, omega: Modulus) -> Self {
        let omega_seminorm_est = seminorm_estimate(&f, &omega);
        Potential { f, omega, omega_seminorm_est, kappa_f: None }
    }

    pub fn sample<F: Fn(f64) -> f64>(grid: &Grid, f: F, omega: Modulus) -> Self {
        Potential::new(GridFunction::sample(grid, f), omega)
    }

    pub fn with_c1(mut self, c1: f64) -> Self {
        self.kappa_f = Some(self.omega_seminorm_est / c1);
        self
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }
}

/// `sup |f_i - f_j| / ω(d(x_i, x_j))` over node pairs at geometrically spaced index offsets.
pub fn seminorm_estimate(f: &GridFunction, omega: &Modulus) -> f64 {
    let n = f.resolution();
    let grid = f.grid();
    let mut offsets = Vec::new();
    let mut o = 1.0f64;
    while (o as usize) <= n / 2 {
        let k = o as usize;
        if offsets.last() != Some(&k) {
            offsets.push(k);
        }
        o *= 1.15;
        o = o.max(k as f64 + 1.0);
    }
    if n >= 2 && offsets.last() != Some(&(n / 2)) {
        offsets.push(n / 2);
    }
    let vals = f.values();
    offsets
        .par_iter()
        .map(|&k| {
            (0..n)
                .map(|i| {
                    let j = (i + k) % n;
                    let d = circle_dist(grid.node(i), grid.node(j));
                    let w = omega.eval(d);
                    if w > 0.0 {
                        (vals[i] - vals[j]).abs() / w
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Pre-images of every node of a grid, `branches` per node in ascending order.
#[derive(Debug, Clone)]
pub struct PreimageTable {
    grid: Grid,
    branches: usize,
    points: Vec<f64>,
}

impl PreimageTable {
    pub fn new(map: &CircleMap, grid: &Grid) -> Result<Self> {
        let branches = map.branch_count();
        let rows: Vec<Result<Vec<f64>>> =
            (0..grid.len()).into_par_iter().map(|j| map.preimages(grid.node(j), DEFAULT_INVERSE_TOL)).collect();
        let mut points = Vec::with_capacity(grid.len() * branches);
        for row in rows {
            points.extend(row?);
        }
        Ok(PreimageTable { grid: grid.clone(), branches, points })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn of(&self, node: usize) -> &[f64] {
        &self.points[node * self.branches..(node + 1) * self.branches]
    }
}

/// The discretized operator as a sparse non-negative matrix, two interpolation
/// entries per pre-image.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    table: PreimageTable,
    cols: Vec<u32>,
    weights: Vec<f64>,
    stride: usize,
}

impl TransferOperator {
    pub fn new(map: &CircleMap, potential: &dyn PotentialFn, grid: &Grid) -> Result<Self> {
        Ok(TransferOperator::from_table(PreimageTable::new(map, grid)?, potential))
    }

    pub fn from_table(table: PreimageTable, potential: &dyn PotentialFn) -> Self {
        let stride = 2 * table.branches;
        let n = table.grid.len();
        let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut cols = Vec::with_capacity(stride);
                let mut ws = Vec::with_capacity(stride);
                for &y in table.of(j) {
                    let e = potential.value(y).exp();
                    for (m, w) in table.grid.stencil(y) {
                        cols.push(m as u32);
                        ws.push(e * w);
                    }
                }
                (cols, ws)
            })
            .collect();
        let mut cols = Vec::with_capacity(n * stride);
        let mut weights = Vec::with_capacity(n * stride);
        for (c, w) in rows {
            cols.extend(c);
            weights.extend(w);
        }
        TransferOperator { table, cols, weights, stride }
    }

    /// Same pre-images, different potential.
    pub fn with_potential(&self, potential: &dyn PotentialFn) -> Self {
        TransferOperator::from_table(self.table.clone(), potential)
    }

    pub fn grid(&self) -> &Grid {
        &self.table.grid
    }

    pub fn table(&self) -> &PreimageTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(column, weight)` entries of row `j`.
    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = j * self.stride..(j + 1) * self.stride;
        self.cols[r.clone()].iter().zip(&self.weights[r]).map(|(c, w)| (*c as usize, *w))
    }

    pub fn apply_into(&self, phi: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(j, o)| {
            let r = j * self.stride..(j + 1) * self.stride;
            let mut acc = 0.0;
            for (c, w) in self.cols[r.clone()].iter().zip(&self.weights[r]) {
                acc += w * phi[*c as usize];
            }
            *o = acc;
        });
    }

    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        phi.check_grid(self.grid())?;
        let mut out = vec![0.0; self.len()];
        self.apply_into(phi.values(), &mut out);
        GridFunction::new(self.grid().clone(), out)
    }
}

/// One application of `L_f` to `phi` on `phi`'s grid.
pub fn transfer_apply(map: &CircleMap, f: &dyn PotentialFn, phi: &GridFunction) -> Result<GridFunction> {
    TransferOperator::new(map, f, phi.grid())?.apply(phi)
}

/// `S_n f(x) = Σ_{j<n} f(T^j x)`.
pub fn birkhoff_sum(map: &CircleMap, f: &dyn PotentialFn, x: f64, n: usize) -> f64 {
    let mut p = crate::circle::wrap(x);
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        terms.push(f.value(p));
        p = map.apply(p);
    }
    compensated_sum(terms)
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Window for stagnation detection.
    pub stagnation_window: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-10, max_iter: 5000, stagnation_window: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    pub chi: f64,
    /// Sup-normalized eigenfunction.
    pub h: GridFunction,
    /// `sup |χ^{-1} L h - h| / sup h`.
    pub eigen_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `min (L h / h)` and `max (L h / h)`; bracket `χ` for positive `h`.
    pub collatz_bounds: (f64, f64),
}

/// Power iteration `φ ← L φ / sup L φ` from `φ ≡ 1`.
pub fn power_iterate(op: &TransferOperator, opts: PowerOptions) -> Result<PowerResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameters(format!("power tolerance {} must be positive", opts.tol)));
    }
    let n = op.len();
    let mut phi = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        op.apply_into(&phi, &mut next);
        iterations += 1;
        let s = next.iter().copied().fold(0.0, f64::max);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("operator iterate has sup {s}")));
        }
        let mut diff = 0.0f64;
        for (p, q) in phi.iter_mut().zip(&next) {
            let v = q / s;
            diff = diff.max((v - *p).abs());
            *p = v;
        }
        history.push(diff);
        if diff < opts.tol {
            converged = true;
            break;
        }
        let w = opts.stagnation_window;
        if w > 0 && history.len() > w {
            let before = history[history.len() - 1 - w];
            if before - diff < 1e-3 * opts.tol {
                break;
            }
        }
    }
    op.apply_into(&phi, &mut next);
    let chi = next.iter().copied().fold(0.0, f64::max);
    let sup = phi.iter().copied().fold(0.0, f64::max);
    let eigen_residual = phi.iter().zip(&next).map(|(p, q)| (q / chi - p).abs()).fold(0.0, f64::max) / sup;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (p, q) in phi.iter().zip(&next) {
        if *p > 0.0 {
            lo = lo.min(q / p);
            hi = hi.max(q / p);
        }
    }
    Ok(PowerResult {
        chi,
        h: GridFunction::new(op.grid().clone(), phi)?,
        eigen_residual,
        iterations,
        converged,
        collatz_bounds: (lo, hi),
    })
}

/// `f̃ = f + log h - log h∘T - log χ`, evaluated pointwise.
#[derive(Debug, Clone)]
pub struct NormalizedPotential<'a> {
    map: &'a CircleMap,
    f: &'a GridFunction,
    h: &'a GridFunction,
    log_chi: f64,
}

impl PotentialFn for NormalizedPotential<'_> {
    fn value(&self, x: f64) -> f64 {
        self.f.eval(x) + self.h.eval(x).ln() - self.h.eval(self.map.apply(x)).ln() - self.log_chi
    }
}

impl NormalizedPotential<'_> {
    /// Node values of `f̃`.
    pub fn to_grid(&self) -> GridFunction {
        GridFunction::sample(self.h.grid(), |x| self.value(x))
    }
}

pub fn normalized_potential<'a>(
    map: &'a CircleMap,
    f: &'a GridFunction,
    h: &'a GridFunction,
    chi: f64,
) -> Result<NormalizedPotential<'a>> {
    if !(h.min() > 0.0) {
        return Err(Error::Domain(format!("eigenfunction minimum {} is not positive", h.min())));
    }
    if !(chi > 0.0) {
        return Err(Error::Domain(format!("eigenvalue {chi} is not positive")));
    }
    Ok(NormalizedPotential { map, f, h, log_chi: chi.ln() })
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    pub power: PowerOptions,
    /// Total-variation tolerance for the stationary law.
    pub ulam_tol: f64,
    pub ulam_max_iter: usize,
    /// Iterations of the deflated power method for `|λ₂|`; `0` skips it.
    pub gap_iterations: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { power: PowerOptions::default(), ulam_tol: 1e-12, ulam_max_iter: 20_000, gap_iterations: 400 }
    }
}

/// `(χ, h, ν, μ)` with `∫ h dν = 1` and `μ = hν`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub chi: f64,
    pub h: GridFunction,
    pub nu: DiscreteMeasure,
    pub mu: DiscreteMeasure,
    pub eigen_residual: f64,
    /// `max_j |μ(T^{-1}A_j) - μ(A_j)|` over grid cells.
    pub invariance_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ulam_iterations: usize,
    /// Estimated second-largest eigenvalue modulus of the normalized matrix.
    pub spectral_gap_est: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub chi: f64,
    pub eigen_residual: f64,
    pub invariance_residual: f64,
    pub iterations: usize,
    pub spectral_gap_est: Option<f64>,
}

impl SpectralData {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            chi: self.chi,
            eigen_residual: self.eigen_residual,
            invariance_residual: self.invariance_residual,
            iterations: self.iterations,
            spectral_gap_est: self.spectral_gap_est,
        }
    }

    pub fn pressure(&self) -> f64 {
        self.chi.ln()
    }
}

/// Full pipeline: power iteration, normalized stationary law, eigenmeasure, residuals.
pub fn solve(map: &CircleMap, op: &TransferOperator, opts: &SpectralOptions) -> Result<SpectralData> {
    let power = power_iterate(op, opts.power)?;
    let ulam = ulam_invariant_measure(op, &power.h, power.chi, opts.ulam_tol, opts.ulam_max_iter)?;
    let nu = eigenmeasure(&ulam.mu, &power.h)?;
    // rescale h so that ∫ h dν = 1
    let z = integrate(&power.h, &nu)?;
    let h = power.h.map(|v| v / z);
    let invariance_residual = invariance_defect(op.table(), &ulam.mu);
    let spectral_gap_est =
        if opts.gap_iterations > 0 { Some(spectral_gap_estimate(&ulam, opts.gap_iterations)) } else { None };
    let _ = map;
    Ok(SpectralData {
        chi: power.chi,
        h,
        nu,
        mu: ulam.mu,
        eigen_residual: power.eigen_residual,
        invariance_residual,
        iterations: power.iterations,
        converged: power.converged,
        ulam_iterations: ulam.iterations,
        spectral_gap_est,
    })
}

/// `|μ(T^{-1} A_j) - μ(A_j)|` for every grid cell `A_j`, with pre-image intervals
/// read from the node pre-image table.
fn cell_invariance_defects(table: &PreimageTable, mu: &DiscreteMeasure) -> Vec<f64> {
    let n = table.grid().len();
    let b = table.branches();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let left = table.of(j);
            let pulled: f64 = (0..b)
                .map(|k| {
                    let right = if j + 1 < n {
                        table.of(j + 1)[k]
                    } else if k + 1 < b {
                        table.of(0)[k + 1]
                    } else {
                        1.0
                    };
                    mu.arc_mass(left[k], right)
                })
                .sum();
            (pulled - mu.weights()[j]).abs()
        })
        .collect()
}

/// `max_j |μ(T^{-1} A_j) - μ(A_j)|` over grid cells `A_j`.
pub fn invariance_defect(table: &PreimageTable, mu: &DiscreteMeasure) -> f64 {
    cell_invariance_defects(table, mu).into_iter().fold(0.0, f64::max)
}

/// `½ Σ_j |μ(T^{-1} A_j) - μ(A_j)|`, the defect over unions of cells. Root-cell
/// transitions alias at the cell scale, so this stays of order `0.1` under refinement
/// while coarse observables converge.
pub fn invariance_tv_defect(table: &PreimageTable, mu: &DiscreteMeasure) -> f64 {
    0.5 * compensated_sum(cell_invariance_defects(table, mu))
}

/// `sup |χ^{-n} L^n φ - h ∫ φ dν|` for each `n` in `n_list` (ascending).
pub fn iterate_convergence(op: &TransferOperator, phi: &GridFunction, data: &SpectralData, n_list: &[usize]) -> Result<Vec<f64>> {
    phi.check_grid(op.grid())?;
    let target_scale = integrate(phi, &data.nu)?;
    let target: Vec<f64> = data.h.values().iter().map(|h| h * target_scale).collect();
    let mut cur = phi.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut done = 0;
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n < done {
            return Err(Error::InvalidParameters("n_list must be ascending".into()));
        }
        while done < n {
            op.apply_into(&cur, &mut next);
            for v in next.iter_mut() {
                *v /= data.chi;
            }
            std::mem::swap(&mut cur, &mut next);
            done += 1;
        }
        out.push(cur.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok(out)
}

/// Maxima of `ψ, L ψ, L² ψ, …` (`steps + 1` values).
pub fn iterate_maxima(op: &TransferOperator, psi: &GridFunction, steps: usize) -> Vec<f64> {
    let mut cur = psi.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut out = vec![cur.iter().copied().fold(f64::NEG_INFINITY, f64::max)];
    for _ in 0..steps {
        op.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        out.push(cur.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

/// Number of arcs of length `rho1` in a cover whose consecutive centers are closer than `rho1`.
pub fn cover_size(rho1: f64) -> usize {
    (1.0 / rho1).floor() as usize + 1
}

/// `L κ_f Ω(1/2)`, the logarithm of the bound on `sup h / min h` and on `χ^{-n} L^n 1`.
pub fn lambda_log_bound(rho1: f64, kappa_f: f64, omega_big: &Modulus) -> f64 {
    cover_size(rho1) as f64 * kappa_f * omega_big.eval(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::omega_ab;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mp() -> CircleMap {
        CircleMap::manneville_pomeau(0.5).unwrap()
    }

    #[test]
    fn transfer_examples() {
        let grid = Grid::uniform(512).unwrap();
        let one = GridFunction::constant(&grid, 1.0);
        let out = transfer_apply(&mp(), &|_x: f64| 0.0, &one).unwrap();
        assert!(out.values().iter().all(|v| (v - 2.0).abs() < 1e-15));
        let out = transfer_apply(&mp(), &|_x: f64| 0.3, &one).unwrap();
        assert!(out.values().iter().all(|v| (v - 2.0 * 0.3f64.exp()).abs() < 1e-14));
    }

    #[test]
    fn transfer_is_linear_and_positive() {
        let grid = Grid::uniform(256).unwrap();
        let f = |x: f64| 0.2 * (2.0 * PI * x).cos();
        let op = TransferOperator::new(&mp(), &f, &grid).unwrap();
        let phi = GridFunction::sample(&grid, |x| (6.0 * x).sin());
        let psi = GridFunction::sample(&grid, |x| x * x);
        let combo = GridFunction::sample(&grid, |x| 1.5 * (6.0 * x).sin() - 0.5 * x * x);
        let lhs = op.apply(&combo).unwrap();
        let (a, b) = (op.apply(&phi).unwrap(), op.apply(&psi).unwrap());
        for i in 0..256 {
            assert!((lhs.values()[i] - (1.5 * a.values()[i] - 0.5 * b.values()[i])).abs() < 1e-12);
        }
        let pos = GridFunction::sample(&grid, |x| 0.1 + x);
        assert!(op.apply(&pos).unwrap().min() > 0.0);
        assert!(op.apply(&GridFunction::constant(&Grid::Uniform(8), 1.0)).is_err());
    }

    #[test]
    fn birkhoff_examples() {
        let t = mp();
        let f = |x: f64| (2.0 * PI * x).cos() + x;
        assert_eq!(birkhoff_sum(&t, &f, 0.3, 0), 0.0);
        assert_abs_diff_eq!(birkhoff_sum(&t, &|_x: f64| 0.7, 0.3, 5), 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(birkhoff_sum(&t, &f, 0.0, 9), 9.0, epsilon = 1e-15);
        let direct = f(0.3) + f(t.apply(0.3)) + f(t.apply(t.apply(0.3)));
        assert_abs_diff_eq!(birkhoff_sum(&t, &f, 0.3, 3), direct, epsilon = 1e-15);
    }

    #[test]
    fn power_iteration_trivial_potential() {
        let grid = Grid::uniform(1024).unwrap();
        let op = TransferOperator::new(&mp(), &|_x: f64| 0.0, &grid).unwrap();
        let r = power_iterate(&op, PowerOptions::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.chi, 2.0, epsilon = 1e-12);
        assert!(r.h.sup() / r.h.min() - 1.0 < 1e-12);
        let op = TransferOperator::new(&mp(), &|_x: f64| -0.4, &grid).unwrap();
        let r = power_iterate(&op, PowerOptions::default()).unwrap();
        assert_abs_diff_eq!(r.chi, 2.0 * (-0.4f64).exp(), epsilon = 1e-12);
        assert!(power_iterate(&op, PowerOptions { tol: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn power_iteration_stops_on_budget() {
        let grid = Grid::uniform(512).unwrap();
        let f = |x: f64| 0.2 * (2.0 * PI * x).cos();
        let op = TransferOperator::new(&mp(), &f, &grid).unwrap();
        let r = power_iterate(&op, PowerOptions { tol: 1e-300, max_iter: 7, stagnation_window: 0 }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 7);
        assert!(r.eigen_residual.is_finite());
    }

    #[test]
    fn normalized_potential_examples() {
        let t = mp();
        let grid = Grid::uniform(1024).unwrap();
        let f = GridFunction::constant(&grid, 0.0);
        let h = GridFunction::constant(&grid, 3.0);
        let nf = normalized_potential(&t, &f, &h, 2.0).unwrap();
        assert!(nf.to_grid().values().iter().all(|v| (v + 2f64.ln()).abs() < 1e-15));

        let f = GridFunction::sample(&grid, |x| 0.2 * (2.0 * PI * x).cos());
        let op = TransferOperator::new(&t, &f, &grid).unwrap();
        let r = power_iterate(&op, PowerOptions::default()).unwrap();
        let nf = normalized_potential(&t, &f, &r.h, r.chi).unwrap();
        assert_abs_diff_eq!(nf.value(0.0), 0.2 - r.chi.ln(), epsilon = 1e-14);
        let one = op.with_potential(&nf).apply(&GridFunction::constant(&grid, 1.0)).unwrap();
        let defect = one.values().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        assert!(defect <= 10.0 * r.eigen_residual.max(1e-15), "defect {defect} residual {}", r.eigen_residual);

        let bad = GridFunction::sample(&grid, |x| x - 0.5);
        assert!(normalized_potential(&t, &f, &bad, 2.0).is_err());
        assert!(normalized_potential(&t, &f, &h, 0.0).is_err());
    }

    #[test]
    fn seminorm_estimate_of_cosine() {
        let grid = Grid::uniform(2048).unwrap();
        let w = omega_ab(0.75, 0.0).unwrap();
        let p = Potential::sample(&grid, |x| 0.2 * (2.0 * PI * x).cos(), w.clone());
        // brute force over all node pairs from node 0 and a few others
        let mut brute = 0.0f64;
        for i in (0..2048).step_by(97) {
            for j in 0..2048 {
                let d = circle_dist(grid.node(i), grid.node(j));
                if d > 0.0 {
                    brute = brute.max((p.f.values()[i] - p.f.values()[j]).abs() / w.eval(d));
                }
            }
        }
        assert!(p.omega_seminorm_est >= 0.97 * brute && p.omega_seminorm_est <= 1.0 + 1e-12 + brute.max(p.omega_seminorm_est));
        assert!(p.omega_seminorm_est > 0.0);
        let p = p.with_c1(0.5);
        assert_abs_diff_eq!(p.kappa_f.unwrap(), 2.0 * p.omega_seminorm_est);
    }

    #[test]
    fn cover_and_bound() {
        assert_eq!(cover_size(0.125), 9);
        assert_eq!(cover_size(0.3), 4);
        let w = omega_ab(0.25, 0.0).unwrap();
        assert_abs_diff_eq!(lambda_log_bound(0.125, 2.0, &w), 9.0 * 2.0 * w.eval(0.5));
    }

    #[test]
    fn cell_invariance_defect_shrinks_under_refinement() {
        let zero = |_x: f64| 0.0;
        let defects = |n: usize| {
            let op = TransferOperator::new(&mp(), &zero, &Grid::Uniform(n)).unwrap();
            let d = solve(&mp(), &op, &SpectralOptions { gap_iterations: 0, ..Default::default() }).unwrap();
            let tv = invariance_tv_defect(op.table(), &d.mu);
            assert_abs_diff_eq!(d.invariance_residual, invariance_defect(op.table(), &d.mu));
            (d.invariance_residual, tv)
        };
        let (coarse, tv) = defects(1024);
        let (fine, _) = defects(4096);
        assert!(tv >= coarse);
        assert!(fine < coarse && fine < 2e-3, "{coarse} -> {fine}");
    }

    proptest! {
        #[test]
        fn sampled_pairs_respect_seminorm(x in 0.0..1.0f64, y in 0.0..1.0f64) {
            let grid = Grid::Uniform(1024);
            let w = omega_ab(0.75, 0.0).unwrap();
            let p = Potential::sample(&grid, |t| 0.2 * (2.0 * PI * t).cos(), w.clone());
            let d = circle_dist(x, y);
            let slack = 2.0 * 0.2 * 2.0 * PI / 1024.0;
            prop_assert!((p.f.eval(x) - p.f.eval(y)).abs() <= p.omega_seminorm_est * w.eval(d) + slack);
        }

        #[test]
        fn operator_preserves_positivity(c in -1.0..1.0f64, k in 1u32..4) {
            let grid = Grid::Uniform(128);
            let op = TransferOperator::new(&mp(), &move |x: f64| c * (2.0 * PI * k as f64 * x).sin(), &grid).unwrap();
            let phi = GridFunction::sample(&grid, |x| (x - 0.5).abs());
            prop_assert!(op.apply(&phi).unwrap().min() >= 0.0);
            let strict = GridFunction::sample(&grid, |x| 0.01 + x);
            prop_assert!(op.apply(&strict).unwrap().min() > 0.0);
        }
    }
}
