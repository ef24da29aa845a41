//! Refinement studies under the coupling k ≤ C·h^σ, regularity probes, and
//! their CSV reports.
//!
//! Configurations are flat `key = value` text. Every run can echo its fully
//! resolved configuration, and rerunning from the echo reproduces the CSV
//! byte for byte.

use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{self, ErrorTriple, RegularityRatios};
use crate::dg0::{self, SolverOptions};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::CgOptions;
use crate::mesh::build_unit_square_mesh;
use crate::mms::{ExactSolution, MmsProblem};
use crate::nonlinearity::Nonlinearity;
use crate::time_grid::TimeGrid;

pub const PROBLEM_NAMES: [&str; 6] = ["zero", "eigen", "cubic_mms", "allen_cahn_mms", "allen_cahn_time", "regularity"];

pub const CSV_HEADER: &str = "level,h,k,M,ndof,err_l2l2,err_linfl2,err_linflinf,eoc_l2l2,eoc_linfl2,eoc_linflinf,max_abs_ukh,newton_max_iters,cg_max_iters";

pub const PROBE_HEADER: &str = "level,h,k,M,ndof,b,lemma1_ratio,lemma2_ratio,lemma4_ratio,deltah_linf_l2,deltah_l2_l1";

const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: String,
    pub nonlinearity: String,
    pub alpha: f64,
    pub exact: String,
    pub t_final: f64,
    pub base_level: usize,
    pub levels: usize,
    /// Number of time steps on the base level.
    pub base_steps: usize,
    pub sigma: f64,
    /// C in k ≤ C·h^σ; `None` means k_base / h_base^σ.
    pub coupling_constant: Option<f64>,
    /// Keep this mesh level and double M per row instead of refining space.
    pub fixed_level: Option<usize>,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub rho: f64,
    pub time_quad_points: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub probe: bool,
    /// Constant reaction coefficients b used by the probe.
    pub probe_b: Vec<f64>,
}

impl StudyConfig {
    /// Defaults of a named problem.
    pub fn preset(problem: &str) -> Result<Self> {
        let mut c = StudyConfig {
            problem: problem.to_string(),
            nonlinearity: "zero".into(),
            alpha: 0.5,
            exact: "heat_mode".into(),
            t_final: 0.1,
            base_level: 2,
            levels: 4,
            base_steps: 16,
            sigma: 2.0,
            coupling_constant: None,
            fixed_level: None,
            newton_tol: 1e-10,
            newton_max_iters: 50,
            cg_tol: 1e-10,
            cg_max_iters: 10_000,
            rho: 0.9,
            time_quad_points: 3,
            seed: 1,
            out: PathBuf::from(format!("{problem}.csv")),
            probe: false,
            probe_b: vec![0.0, -0.5, 1.0],
        };
        match problem {
            "eigen" => {}
            "zero" => {
                c.exact = "zero".into();
                c.t_final = 1.0;
            }
            "cubic_mms" => {
                c.nonlinearity = "cubic".into();
                c.exact = "decay_mode".into();
                c.t_final = 1.0;
            }
            "allen_cahn_mms" => {
                c.nonlinearity = "allen_cahn".into();
                c.exact = "decay_mode".into();
                c.t_final = 1.0;
            }
            "allen_cahn_time" => {
                c.nonlinearity = "allen_cahn".into();
                c.exact = "decay_mode".into();
                c.t_final = 1.0;
                c.fixed_level = Some(5);
                c.base_steps = 8;
            }
            "regularity" => {
                c.probe = true;
                c.t_final = 1.0;
                c.base_level = 1;
                c.out = PathBuf::from("regularity_probe.csv");
            }
            other => return Err(Error::Config(format!("unknown problem '{other}' (known: {})", PROBLEM_NAMES.join(", ")))),
        }
        Ok(c)
    }

    /// Builds a config from ordered key/value pairs: the last `problem`
    /// picks the preset, then every other pair is applied in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let problem = pairs.iter().rev().find(|(k, _)| k == "problem").map_or("eigen", |(_, v)| v.as_str());
        let mut c = Self::preset(problem)?;
        for (k, v) in pairs.iter().filter(|(k, _)| k != "problem") {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&Self::parse_pairs(text)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
        }
        match key {
            "problem" => self.problem = value.to_string(),
            "nonlinearity" => self.nonlinearity = value.to_string(),
            "alpha" => self.alpha = num(key, value)?,
            "exact" => self.exact = value.to_string(),
            "t_final" => self.t_final = num(key, value)?,
            "base_level" => self.base_level = num(key, value)?,
            "levels" => self.levels = num(key, value)?,
            "base_steps" => self.base_steps = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "coupling_constant" => {
                self.coupling_constant = if value == "auto" { None } else { Some(num(key, value)?) }
            }
            "fixed_level" => self.fixed_level = if value == "none" { None } else { Some(num(key, value)?) },
            "newton_tol" => self.newton_tol = num(key, value)?,
            "newton_max_iters" => self.newton_max_iters = num(key, value)?,
            "cg_tol" => self.cg_tol = num(key, value)?,
            "cg_max_iters" => self.cg_max_iters = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "time_quad_points" => self.time_quad_points = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "probe" => self.probe = num(key, value)?,
            "probe_b" => {
                self.probe_b = value.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?;
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.levels < 2 {
            return bad(format!("levels must be at least 2, got {}", self.levels));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if self.base_steps == 0 || self.time_quad_points == 0 || self.newton_max_iters == 0 || self.cg_max_iters == 0 {
            return bad("base_steps, time_quad_points and iteration limits must be positive".into());
        }
        if !(self.newton_tol > 0.0) || !(self.cg_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let Some(c) = self.coupling_constant {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("coupling_constant must be positive, got {c}"));
            }
        }
        let top = self.fixed_level.unwrap_or(self.base_level + self.levels - 1);
        if top > MAX_LEVEL {
            return bad(format!("finest level {top} exceeds {MAX_LEVEL}"));
        }
        if self.fixed_level.is_some() && self.probe {
            return bad("fixed_level is not supported by the probe".into());
        }
        if self.probe && self.probe_b.is_empty() {
            return bad("probe_b must list at least one value".into());
        }
        Nonlinearity::builtin(&self.nonlinearity, self.alpha).map_err(|e| Error::Config(e.to_string()))?;
        ExactSolution::by_name(&self.exact).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Fully resolved configuration as `key = value` text.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.clone());
        kv("nonlinearity", self.nonlinearity.clone());
        kv("alpha", self.alpha.to_string());
        kv("exact", self.exact.clone());
        kv("t_final", self.t_final.to_string());
        kv("base_level", self.base_level.to_string());
        kv("levels", self.levels.to_string());
        kv("base_steps", self.base_steps.to_string());
        kv("sigma", self.sigma.to_string());
        kv("coupling_constant", self.coupling_constant.map_or("auto".into(), |c| c.to_string()));
        kv("fixed_level", self.fixed_level.map_or("none".into(), |l| l.to_string()));
        kv("newton_tol", self.newton_tol.to_string());
        kv("newton_max_iters", self.newton_max_iters.to_string());
        kv("cg_tol", self.cg_tol.to_string());
        kv("cg_max_iters", self.cg_max_iters.to_string());
        kv("rho", self.rho.to_string());
        kv("time_quad_points", self.time_quad_points.to_string());
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("probe", self.probe.to_string());
        kv("probe_b", self.probe_b.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        s
    }

    /// Path of the configuration echo written next to the CSV.
    pub fn echo_path(&self) -> PathBuf {
        let mut p = self.out.clone().into_os_string();
        p.push(".cfg");
        PathBuf::from(p)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            newton_tol: self.newton_tol,
            newton_max_iters: self.newton_max_iters,
            cg: CgOptions { tol: self.cg_tol, max_iters: self.cg_max_iters },
            rho: self.rho,
            time_quad_points: self.time_quad_points,
            ..SolverOptions::default()
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::builtin(&self.nonlinearity, self.alpha)
    }

    pub fn mms_problem(&self) -> Result<MmsProblem> {
        MmsProblem::new(ExactSolution::by_name(&self.exact)?, self.nonlinearity()?, self.t_final)
    }

    /// The coupling constant C actually used.
    pub fn coupling(&self) -> f64 {
        self.coupling_constant
            .unwrap_or_else(|| (self.t_final / self.base_steps as f64) / mesh_size(self.base_level).powf(self.sigma))
    }

    /// (mesh level, number of steps) for each row of the study.
    pub fn level_plan(&self) -> Result<Vec<(usize, usize)>> {
        if let Some(level) = self.fixed_level {
            return Ok((0..self.levels).map(|i| (level, self.base_steps << i)).collect());
        }
        let c = self.coupling();
        (self.base_level..self.base_level + self.levels)
            .map(|level| {
                let bound = c * mesh_size(level).powf(self.sigma);
                let steps = ((self.t_final / bound) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let k = self.t_final / steps as f64;
                if k > bound * (1.0 + 1e-12) {
                    return Err(Error::Config(format!("level {level}: k = {k} violates k <= C h^sigma = {bound}")));
                }
                Ok((level, steps))
            })
            .collect()
    }
}

/// h = √2 / 2^{ℓ+1} of the structured mesh on level ℓ.
pub fn mesh_size(level: usize) -> f64 {
    2f64.sqrt() / (1u64 << (level + 1)) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub k: f64,
    pub steps: usize,
    pub ndof: usize,
    pub errors: Option<ErrorTriple>,
    pub max_abs_ukh: f64,
    pub bounded: bool,
    pub newton_max_iters: usize,
    pub cg_max_iters: usize,
    pub min_weight: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<StudyRow>,
    /// Rates into each row from the previous one (None on the first row).
    pub eocs: Vec<Option<[f64; 3]>>,
    /// Rates are taken with respect to k instead of h.
    pub rates_in_k: bool,
    /// Relative defect of the manufactured forcing against finite differences.
    pub consistency_defect: f64,
}

impl ConvergenceReport {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }

    /// Rate of column `col` (0 = L²L², 1 = L∞L², 2 = L∞L∞) into the last row.
    pub fn final_eoc(&self, col: usize) -> Option<f64> {
        self.eocs.last().copied().flatten().map(|e| e[col])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for (row, eoc) in self.rows.iter().zip(&self.eocs) {
            let _ = write!(s, "{},{:.16e},{:.16e},{},{}", row.level, row.h, row.k, row.steps, row.ndof);
            match (&row.errors, &row.failure) {
                (Some(e), None) => {
                    let _ = write!(s, ",{:.16e},{:.16e},{:.16e}", e.l2l2, e.linf_l2, e.linf_linf);
                    match eoc {
                        Some(r) => {
                            let _ = write!(s, ",{:.16e},{:.16e},{:.16e}", r[0], r[1], r[2]);
                        }
                        None => s.push_str(",,,"),
                    }
                    let _ = write!(s, ",{:.16e},{},{}", row.max_abs_ukh, row.newton_max_iters, row.cg_max_iters);
                }
                _ => s.push_str(&",NaN".repeat(9)),
            }
            s.push('\n');
        }
        s
    }
}

fn run_level(cfg: &StudyConfig, problem: &MmsProblem, level: usize, steps: usize) -> StudyRow {
    let space = FeSpace::new(build_unit_square_mesh(level));
    let mut row = StudyRow {
        level,
        h: space.mesh().h,
        k: cfg.t_final / steps as f64,
        steps,
        ndof: space.num_dofs(),
        errors: None,
        max_abs_ukh: f64::NAN,
        bounded: false,
        newton_max_iters: 0,
        cg_max_iters: 0,
        min_weight: f64::NAN,
        failure: None,
    };
    let outcome = TimeGrid::uniform(cfg.t_final, steps).and_then(|grid| {
        let f: Option<dg0::SpaceTimeFn> = if problem.is_unforced() { None } else { Some(&*problem.f) };
        let (traj, report) = dg0::march(&space, &grid, &problem.d, f, &|x| problem.u0(x), &cfg.solver_options())?;
        let errors = analysis::error_norms(&space, &grid, &traj, &*problem.exact.u, cfg.time_quad_points);
        Ok((traj, report, errors))
    });
    match outcome {
        Ok((traj, report, errors)) => {
            let (max_abs, bounded) = analysis::boundedness_check(&traj, problem.exact.sup);
            row.errors = Some(errors);
            row.max_abs_ukh = max_abs;
            row.bounded = bounded;
            row.newton_max_iters = report.max_iterations();
            row.cg_max_iters = report.max_cg_iterations();
            row.min_weight = report.min_weight();
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

/// Runs every level of the study (levels in parallel, rows in level order).
/// Rows after the first failing level are dropped.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let problem = cfg.mms_problem().map_err(|e| Error::Config(e.to_string()))?;
    let plan = cfg.level_plan()?;
    let mut rows: Vec<StudyRow> = plan.par_iter().map(|&(level, steps)| run_level(cfg, &problem, level, steps)).collect();
    if let Some(first) = rows.iter().position(|r| r.failure.is_some()) {
        rows.truncate(first + 1);
    }
    let rates_in_k = cfg.fixed_level.is_some();
    let mut eocs = vec![None];
    for w in rows.windows(2) {
        let (Some(a), Some(b)) = (&w[0].errors, &w[1].errors) else {
            eocs.push(None);
            continue;
        };
        let (xa, xb) = if rates_in_k { (w[0].k, w[1].k) } else { (w[0].h, w[1].h) };
        let rate = |ea: f64, eb: f64| analysis::eoc(&[ea, eb], &[xa, xb]).map_or(f64::NAN, |r| r[0]);
        eocs.push(Some([rate(a.l2l2, b.l2l2), rate(a.linf_l2, b.linf_l2), rate(a.linf_linf, b.linf_linf)]));
    }
    Ok(ConvergenceReport { rows, eocs, rates_in_k, consistency_defect: problem.consistency_defect(20, cfg.seed) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub level: usize,
    pub h: f64,
    pub k: f64,
    pub steps: usize,
    pub ndof: usize,
    pub b: f64,
    pub ratios: Option<RegularityRatios>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }

    /// Rows for one value of b, in level order.
    pub fn column(&self, b: f64) -> Vec<&ProbeRow> {
        self.rows.iter().filter(|r| r.b == b).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(PROBE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{:.16e},{:.16e},{},{},{:.16e}", r.level, r.h, r.k, r.steps, r.ndof, r.b);
            match &r.ratios {
                Some(q) => {
                    let _ = write!(
                        s,
                        ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        q.lemma1_ratio, q.lemma2_ratio, q.lemma4_ratio, q.deltah_linf_l2, q.deltah_l2_l1
                    );
                }
                None => s.push_str(&",NaN".repeat(5)),
            }
            s.push('\n');
        }
        s
    }
}

/// Regularity probe with source g = sin(πx) sin(πy), constant in time, and
/// each constant reaction coefficient in `probe_b`.
pub fn run_probe(cfg: &StudyConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let plan = cfg.level_plan()?;
    let jobs: Vec<(usize, usize, f64)> = plan.iter().flat_map(|&(l, m)| cfg.probe_b.iter().map(move |&b| (l, m, b))).collect();
    let opts = cfg.solver_options();
    let g = |_: f64, x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let rows = jobs
        .par_iter()
        .map(|&(level, steps, b)| {
            let space = FeSpace::new(build_unit_square_mesh(level));
            let outcome = TimeGrid::uniform(cfg.t_final, steps)
                .and_then(|grid| analysis::regularity_probe(&space, &grid, &move |_, _| b, &g, &opts));
            let (ratios, failure) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ProbeRow { level, h: space.mesh().h, k: cfg.t_final / steps as f64, steps, ndof: space.num_dofs(), b, ratios, failure }
        })
        .collect();
    Ok(ProbeReport { rows })
}

/// Writes `csv` to `cfg.out` and the configuration echo next to it.
pub fn write_outputs(cfg: &StudyConfig, csv: &str) -> Result<()> {
    write_file(&cfg.out, csv)?;
    write_file(&cfg.echo_path(), &cfg.echo())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
