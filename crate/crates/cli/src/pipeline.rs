//! Pipeline stages and the run summary.
//!
//! | stage    | reads                                   | writes                                          |
//! |----------|-----------------------------------------|-------------------------------------------------|
//! | `compat` | config                                  | `compat.json`, `compat.csv`, `expansion.json`   |
//! | `omega`  | config                                  | `omega.csv`                                     |
//! | `rpf`    | config                                  | `h.csv`, `f_tilde.csv`, `nu.csv`, `mu.csv`, `diagnostics.json` |
//! | `thermo` | `rpf` artifacts                         | `thermo.json`, `variational.json`               |
//! | `gibbs`  | `rpf` artifacts, `compat.json`, `expansion.json` | `gibbs.csv`                            |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use circle_rpf::circle::{DiscreteMeasure, Grid, GridFunction};
use circle_rpf::maps::{estimate_rho0, CircleMap};
use circle_rpf::moduli::{build_omega_legendre, check_compatibility, upper_hull, CompatibilityReport, LegendreOmega, Modulus, Verdict};
use circle_rpf::spectral::{
    iterate_convergence, normalized_potential, solve, PowerOptions, SpectralData, SpectralOptions, TransferOperator,
};
use circle_rpf::thermo::{gibbs_report, thermo_report, variational_probe, GibbsConstants};
use circle_rpf::Potential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{ArtifactDir, CompatEntry, DiagnosticsFile, ExpansionFile};
use crate::config::{OmegaBigSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Compat,
    Omega,
    Rpf,
    Thermo,
    Gibbs,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Compat, Stage::Omega, Stage::Rpf, Stage::Thermo, Stage::Gibbs];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Compat => "compat",
            Stage::Omega => "omega",
            Stage::Rpf => "rpf",
            Stage::Thermo => "thermo",
            Stage::Gibbs => "gibbs",
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }

    fn needs_compat(self) -> bool {
        matches!(self, Stage::Rpf | Stage::Thermo | Stage::Gibbs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum Status {
    Passed,
    PropertyFailed(String),
    Skipped(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: &'static str,
    #[serde(flatten)]
    pub status: Status,
    pub metrics: BTreeMap<&'static str, f64>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub grid: usize,
    pub stages: Vec<StageRecord>,
    pub exit_code: i32,
}

impl RunSummary {
    fn text(&self) -> String {
        let mut s = format!("seed {} grid {}\n", self.seed, self.grid);
        for r in &self.stages {
            let (status, reason) = match &r.status {
                Status::Passed => ("passed", String::new()),
                Status::PropertyFailed(why) => ("property-failed", format!(" ({why})")),
                Status::Skipped(why) => ("skipped", format!(" ({why})")),
            };
            let _ = write!(s, "{:<7} {status}{reason} {:.3}s", r.stage, r.seconds);
            for (k, v) in &r.metrics {
                let _ = write!(s, " {k}={v}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "exit code {}", self.exit_code);
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub plot_data: bool,
}

struct Outcome {
    status: Status,
    metrics: BTreeMap<&'static str, f64>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { status: Status::Passed, metrics: BTreeMap::new() }
    }

    fn metric(&mut self, k: &'static str, v: f64) {
        self.metrics.insert(k, v);
    }

    /// Records the first failed check.
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.status == Status::Passed {
            self.status = Status::PropertyFailed(what());
        }
    }
}

const EXPANSION_SAMPLES: usize = 100_000;
const CONVERGENCE_STEPS: [usize; 8] = [1, 2, 5, 10, 20, 50, 100, 200];

pub struct Pipeline {
    cfg: RunConfig,
    opts: RunOptions,
    dir: ArtifactDir,
    map: CircleMap,
    omega: Modulus,
    f: Expr,
    grid: Grid,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let map = cfg.build_map()?;
        let omega = cfg.build_omega()?;
        let f = cfg.potential_expr()?;
        let grid = if cfg.refine_levels > 0 { Grid::refined(cfg.grid, cfg.refine_levels)? } else { Grid::uniform(cfg.grid)? };
        let dir = ArtifactDir::create(&opts.out)?;
        Ok(Pipeline { cfg, opts, dir, map, omega, f, grid })
    }

    fn rng(&self, stage: Stage) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(stage.stream());
        rng
    }

    /// Runs `stages` in order, skipping stages past a failed compatibility check, and
    /// writes `summary.json` and `summary.txt`.
    pub fn run(&self, stages: &[Stage]) -> Result<RunSummary> {
        let mut records = Vec::new();
        let mut compat_failure: Option<String> = None;
        for &stage in stages {
            let start = Instant::now();
            let outcome = match (&compat_failure, stage.needs_compat()) {
                (Some(why), true) => Outcome { status: Status::Skipped(format!("compat: {why}")), metrics: BTreeMap::new() },
                _ => self.run_stage(stage)?,
            };
            if stage == Stage::Compat {
                if let Status::PropertyFailed(why) = &outcome.status {
                    compat_failure = Some(why.clone());
                }
            }
            records.push(StageRecord {
                stage: stage.name(),
                status: outcome.status,
                metrics: outcome.metrics,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        let failed = records.iter().any(|r| r.status != Status::Passed);
        let summary = RunSummary { seed: self.opts.seed, grid: self.grid.len(), stages: records, exit_code: if failed { 2 } else { 0 } };
        self.dir.write_json("summary.json", &summary)?;
        self.dir.write_text("summary.txt", &summary.text())?;
        Ok(summary)
    }

    fn run_stage(&self, stage: Stage) -> Result<Outcome> {
        match stage {
            Stage::Compat => self.compat(),
            Stage::Omega => self.omega_stage(),
            Stage::Rpf => self.rpf(),
            Stage::Thermo => self.thermo(),
            Stage::Gibbs => self.gibbs(),
        }
    }

    fn legendre(&self) -> Result<LegendreOmega> {
        let (tau, size) = match &self.cfg.omega_big {
            OmegaBigSpec::Legendre { tau, grid_size } => (tau.unwrap_or(self.omega.window()), *grid_size),
            _ => (self.omega.window(), 10_000),
        };
        Ok(build_omega_legendre(&self.map, &self.omega, tau, size)?)
    }

    fn omega_big(&self) -> Result<Modulus> {
        match self.cfg.explicit_omega_big()? {
            Some(m) => Ok(m),
            None => Ok(self.legendre()?.modulus),
        }
    }

    fn compat(&self) -> Result<Outcome> {
        let mut out = Outcome::new();
        let omega_big = self.omega_big()?;
        let x_min = self.cfg.x_min_value();
        let reports: Vec<CompatibilityReport> = self
            .cfg
            .c_values(&self.map)
            .into_iter()
            .map(|c| check_compatibility(&self.map, &self.omega, &omega_big, c, x_min))
            .collect::<circle_rpf::Result<_>>()?;
        self.dir.write_json("compat.json", &reports)?;
        self.dir.write_csv(
            "compat.csv",
            &["c", "x", "value"],
            reports.iter().flat_map(|r| {
                r.grid.iter().zip(&r.values).map(move |(x, v)| vec![r.c.to_string(), x.to_string(), v.to_string()])
            }),
        )?;
        for r in &reports {
            out.check(r.verdict == Verdict::PositiveEvidence, || {
                format!("verdict {:?} for c = {} (liminf estimate {:e})", r.verdict, r.c, r.liminf_estimate)
            });
        }
        out.metric("liminf", reports[0].liminf_estimate);
        out.metric("c1", reports[0].c1);

        let consts = estimate_rho0(&self.map, EXPANSION_SAMPLES, &mut self.rng(Stage::Compat))?;
        let expansion =
            ExpansionFile { rho0_hat: consts.rho0_hat, rho_v_hat: consts.rho_v_hat, rho1: consts.default_rho1() };
        self.dir.write_json("expansion.json", &expansion)?;
        out.metric("rho0_hat", expansion.rho0_hat);
        Ok(out)
    }

    fn omega_stage(&self) -> Result<Outcome> {
        let mut out = Outcome::new();
        let leg = self.legendre()?;
        let explicit = self.cfg.explicit_omega_big()?;
        let big: Vec<f64> = match &explicit {
            Some(m) => leg.ys.iter().map(|&y| m.eval(y)).collect(),
            None => leg.values().to_vec(),
        };
        let hull = upper_hull(&leg.ys, &leg.theta1);
        let rows = (0..leg.ys.len()).map(|i| {
            [leg.ys[i], leg.theta0[i], leg.theta1[i], big[i], hull[i]].iter().map(|v| v.to_string()).collect()
        });
        self.dir.write_csv("omega.csv", &["y", "theta0", "theta1", "Omega", "hull"], rows)?;

        let legendre_built = explicit.is_none();
        let modulus = explicit.unwrap_or_else(|| leg.modulus.clone());
        if let Err(defect) = modulus.check_invariants(2000) {
            out.check(false, || format!("Omega is not a concave modulus (defect {defect:e})"));
        }
        if legendre_built {
            let scale = leg.theta1.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let deficit = big.iter().zip(&leg.theta1).map(|(o, t)| t - o).fold(0.0, f64::max);
            out.check(deficit <= 1e-9 * scale, || format!("Omega falls below omega/V by {deficit:e}"));
            out.metric("hull_gap", leg.hull_gap());
        }
        out.metric("omega_big_half", modulus.eval(0.5));
        Ok(out)
    }

    fn rpf(&self) -> Result<Outcome> {
        let mut out = Outcome::new();
        let tol = &self.cfg.tolerances;
        let opts = SpectralOptions {
            power: PowerOptions { tol: tol.power_tol, max_iter: tol.max_iter, ..PowerOptions::default() },
            ulam_tol: tol.ulam_tol,
            ..SpectralOptions::default()
        };
        let op = TransferOperator::new(&self.map, &self.f, &self.grid)?;
        let data = solve(&self.map, &op, &opts)?;
        let nodes = self.grid.nodes();
        let f_grid = GridFunction::sample(&self.grid, |x| self.f.eval(x));
        let f_tilde = normalized_potential(&self.map, &f_grid, &data.h, data.chi)?.to_grid();
        self.dir.write_pairs("h.csv", ["x", "value"], &nodes, data.h.values())?;
        self.dir.write_pairs("f_tilde.csv", ["x", "value"], &nodes, f_tilde.values())?;
        self.dir.write_pairs("nu.csv", ["cell_left", "weight"], &nodes, data.nu.weights())?;
        self.dir.write_pairs("mu.csv", ["cell_left", "weight"], &nodes, data.mu.weights())?;
        self.dir.write_json("diagnostics.json", &data.diagnostics())?;

        out.check(data.converged, || format!("power iteration stopped after {} iterations", data.iterations));
        out.check(data.eigen_residual <= 1e-2, || format!("eigen residual {:e} exceeds 1e-2", data.eigen_residual));
        out.check(data.invariance_residual <= 1e-2, || {
            format!("cell invariance defect {:e} exceeds 1e-2", data.invariance_residual)
        });
        out.check(data.h.min() > 0.0, || "eigenfunction is not positive".into());
        out.check(data.mu.is_probability(1e-9), || "mu is not a probability".into());
        out.metric("chi", data.chi);
        out.metric("eigen_residual", data.eigen_residual);
        out.metric("invariance_residual", data.invariance_residual);

        if self.opts.plot_data {
            let phi = GridFunction::sample(&self.grid, |x| (2.0 * std::f64::consts::PI * x).cos());
            let errs = iterate_convergence(&op, &phi, &data, &CONVERGENCE_STEPS)?;
            let ns: Vec<f64> = CONVERGENCE_STEPS.iter().map(|&n| n as f64).collect();
            self.dir.write_pairs("plot_convergence.csv", ["n", "sup_error"], &ns, &errs)?;
            let density: Vec<f64> =
                (0..self.grid.len()).map(|i| data.mu.weights()[i] / self.grid.cell_width(i)).collect();
            self.dir.write_csv(
                "plot_h.csv",
                &["x", "h", "mu_density"],
                (0..nodes.len()).map(|i| vec![nodes[i].to_string(), data.h.values()[i].to_string(), density[i].to_string()]),
            )?;
        }
        Ok(out)
    }

    /// Rebuilds the `rpf` output from its artifacts.
    fn load_spectral(&self, stage: Stage) -> Result<SpectralData> {
        let name = stage.name();
        let h = self.dir.read_columns(name, "h.csv", &["x", "value"])?;
        let nodes = self.grid.nodes();
        if h[0] != nodes {
            return Err(CliError::Dependency {
                stage: name.into(),
                file: "h.csv".into(),
                msg: format!("grid of {} nodes does not match the configured grid of {}", h[0].len(), nodes.len()),
            });
        }
        let measure = |file: &str| -> Result<DiscreteMeasure> {
            let cols = self.dir.read_columns(name, file, &["cell_left", "weight"])?;
            if cols[0] != nodes {
                return Err(CliError::Dependency {
                    stage: name.into(),
                    file: file.into(),
                    msg: "cells do not match the configured grid".into(),
                });
            }
            Ok(DiscreteMeasure::new(self.grid.clone(), cols[1].clone())?)
        };
        let nu = measure("nu.csv")?;
        let mu = measure("mu.csv")?;
        let diag: DiagnosticsFile = self.dir.read_json(name, "diagnostics.json")?;
        Ok(SpectralData {
            chi: diag.chi,
            h: GridFunction::new(self.grid.clone(), h[1].clone())?,
            nu,
            mu,
            eigen_residual: diag.eigen_residual,
            invariance_residual: diag.invariance_residual,
            iterations: diag.iterations,
            converged: true,
            ulam_iterations: 0,
            spectral_gap_est: diag.spectral_gap_est,
        })
    }

    fn thermo(&self) -> Result<Outcome> {
        let mut out = Outcome::new();
        let data = self.load_spectral(Stage::Thermo)?;
        let rep = thermo_report(&self.map, &self.f, &data, self.cfg.cover_depth)?;
        self.dir.write_json("thermo.json", &rep)?;
        out.check(rep.identity_gap <= 5e-2, || format!("identity gap {:e} exceeds 5e-2", rep.identity_gap));
        out.check(rep.dirac_margin > 0.0, || format!("dirac margin {} is not positive", rep.dirac_margin));
        let worst_cover = rep.cover_pressure.iter().map(|(_, p)| p - rep.pressure).fold(f64::INFINITY, f64::min);
        if !rep.cover_pressure.is_empty() {
            out.check(worst_cover >= -0.05, || format!("cover pressure falls {:e} below log chi", -worst_cover));
            out.metric("cover_margin", worst_cover);
        }

        let zero = |_x: f64| 0.0;
        let op0 = TransferOperator::new(&self.map, &zero, &self.grid)?;
        let data0 = solve(&self.map, &op0, &SpectralOptions { gap_iterations: 0, ..SpectralOptions::default() })?;
        let probe = variational_probe(&self.map, &zero, &data0, &self.f, &data);
        self.dir.write_json("variational.json", &probe)?;
        let f_grid = GridFunction::sample(&self.grid, |x| self.f.eval(x));
        if f_grid.sup() - f_grid.min() > 1e-12 {
            out.check(probe.margin >= 1e-3, || format!("variational margin {:e} below 1e-3", probe.margin));
        }
        out.metric("pressure", rep.pressure);
        out.metric("entropy", rep.entropy);
        out.metric("identity_gap", rep.identity_gap);
        out.metric("variational_margin", probe.margin);
        Ok(out)
    }

    fn gibbs(&self) -> Result<Outcome> {
        let mut out = Outcome::new();
        let data = self.load_spectral(Stage::Gibbs)?;
        let expansion: ExpansionFile = self.dir.read_json("gibbs", "expansion.json")?;
        let compat: Vec<CompatEntry> = self.dir.read_json("gibbs", "compat.json")?;
        let c1 = compat.first().map(|c| c.c1).unwrap_or(0.0);
        let omega_big = self.omega_big()?;
        let kappa_f = if c1 > 0.0 {
            let f_grid = GridFunction::sample(&self.grid, |x| self.f.eval(x));
            Potential::new(f_grid, self.omega.clone()).with_c1(c1).kappa_f
        } else {
            None
        };
        let g = &self.cfg.gibbs;
        let mut rng = self.rng(Stage::Gibbs);
        let xs: Vec<f64> = (0..g.samples).map(|_| rng.gen::<f64>()).collect();
        let consts = GibbsConstants { rho1: expansion.rho1, kappa_f, omega_big: Some(&omega_big) };
        let rep = gibbs_report(&self.map, &self.f, &data, g.r, &xs, g.n_max, &consts)?;
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for row in &rep.rows {
            w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.dir.write_text("gibbs.csv", &String::from_utf8_lossy(&bytes))?;

        out.check(rep.k_low > 0.0 && rep.k_high.is_finite(), || {
            format!("ratios leave (0, inf): K_low = {}, K_high = {}", rep.k_low, rep.k_high)
        });
        if g.n_max >= 4 {
            let (early, late) = (rep.spread_at(4), rep.spread_at(g.n_max));
            out.check(matches!((early, late), (Some(a), Some(b)) if b <= 3.0 * a), || {
                format!("spread grows from {early:?} at n = 4 to {late:?} at n = {}", g.n_max)
            });
        }
        out.metric("k_low", rep.k_low);
        out.metric("k_high", rep.k_high);
        out.metric("resolved", rep.resolved_count() as f64);
        if let Some(c) = rep.proof_ceiling {
            out.metric("proof_ceiling", c);
        }

        if self.opts.plot_data {
            let rows = (0..=g.n_max).map(|n| {
                let ratios = rep.rows.iter().filter(|r| r.n == n && r.resolved).map(|r| r.ratio);
                let lo = ratios.clone().fold(f64::INFINITY, f64::min);
                let hi = ratios.fold(0.0, f64::max);
                vec![n.to_string(), lo.to_string(), hi.to_string(), (hi / lo).to_string()]
            });
            self.dir.write_csv("plot_gibbs_spread.csv", &["n", "min_ratio", "max_ratio", "spread"], rows)?;
        }
        Ok(out)
    }
}
