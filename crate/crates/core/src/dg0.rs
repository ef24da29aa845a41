//! Piecewise-constant-in-time Galerkin stepping.
//!
//! On each slab `I_m` the value `u_m ∈ V_h` solves
//!
//! ```text
//! k_m (∇u_m, ∇φ) + (u_m + k_m d̄_m(·, u_m), φ) = (u_{m−1} + k_m f̄_m, φ)   ∀φ ∈ V_h
//! ```
//!
//! with `u_0 = P_h u₀` and slab means `d̄_m`, `f̄_m`. The same machinery drives
//! the linear auxiliary problem with a reaction coefficient `b ≥ −γ` and its
//! backward dual.

use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace};
use crate::linalg::{self, CgOptions, CsrMatrix};
use crate::nonlinearity::Nonlinearity;
use crate::time_grid::{TimeGrid, DEFAULT_RHO, DEFAULT_TIME_QUAD_POINTS};

/// Space-time callable (t, x) ↦ value.
pub type SpaceTimeFn<'a> = &'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Newton stops once ‖F(U)‖ ≤ newton_tol·(1 + ‖rhs‖).
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Backtracking halvings per Newton update.
    pub max_halvings: usize,
    pub cg: CgOptions,
    /// Margin in k ≤ ρ/γ; the per-step weight must stay ≥ 1 − ρ.
    pub rho: f64,
    pub time_quad_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            newton_max_iters: 50,
            max_halvings: 30,
            cg: CgOptions::default(),
            rho: DEFAULT_RHO,
            time_quad_points: DEFAULT_TIME_QUAD_POINTS,
        }
    }
}

/// A function in the dG(0)–P1 space: one [`FeFunction`] per slab, plus the
/// initial value u_{kh,0} that the first jump refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeDG0 {
    pub initial: FeFunction,
    pub slabs: Vec<FeFunction>,
}

impl SpaceTimeDG0 {
    pub fn num_slabs(&self) -> usize {
        self.slabs.len()
    }

    /// Value on slab m (1-based).
    pub fn slab(&self, m: usize) -> &FeFunction {
        &self.slabs[m - 1]
    }

    /// max over slabs of the nodal maximum.
    pub fn max_abs(&self) -> f64 {
        self.slabs.iter().map(FeFunction::max_abs).fold(0.0, f64::max)
    }

    /// Point value at (t, x); slabs are left-open and right-closed.
    pub fn eval(&self, space: &FeSpace, grid: &TimeGrid, t: f64, x: [f64; 2]) -> Option<f64> {
        space.eval_at(self.slab(grid.slab_of(t)), x)
    }
}

/// Jumps `[u]_{m−1} = u_m − u_{m−1}` for m = 1..M, using the initial value
/// for m = 1.
pub fn jumps(u: &SpaceTimeDG0) -> Vec<FeFunction> {
    let mut prev = &u.initial;
    u.slabs
        .iter()
        .map(|s| {
            let j = s - prev;
            prev = s;
            j
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub iterations: usize,
    pub residual: f64,
    /// Number of step-length halvings performed.
    pub damping_activations: usize,
    /// Smallest per-step weight 1 + k_m ∂_u d̄_m seen at a quadrature point.
    pub min_weight: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonReport {
    pub steps: Vec<StepReport>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn max_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).max().unwrap_or(0)
    }

    pub fn max_cg_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.cg_iterations).max().unwrap_or(0)
    }

    pub fn min_weight(&self) -> f64 {
        self.steps.iter().map(|s| s.min_weight).fold(f64::INFINITY, f64::min)
    }

    pub fn total_damping(&self) -> usize {
        self.steps.iter().map(|s| s.damping_activations).sum()
    }
}

/// Load vector of the slab mean f̄_m.
pub fn slab_mean_load(space: &FeSpace, grid: &TimeGrid, m: usize, f: SpaceTimeFn, quad_points: usize) -> Result<Vec<f64>> {
    let rule = grid.mean_rule(m, quad_points)?;
    Ok(space.assemble_load(|x| rule.iter().map(|&(t, w)| w * f(t, x)).sum()))
}

/// Weighted mass matrix of the slab mean b̄_m together with min b̄_m.
fn slab_mean_weighted_mass(space: &FeSpace, grid: &TimeGrid, m: usize, b: SpaceTimeFn, quad_points: usize) -> Result<(CsrMatrix, f64, [f64; 2])> {
    let rule = grid.mean_rule(m, quad_points)?;
    let a = space.weighted_mass(|x| rule.iter().map(|&(t, w)| w * b(t, x)).sum())?;
    Ok((a.jacobian, a.min_derivative, a.min_derivative_at))
}

fn check_weight(k: f64, min_derivative: f64, at: [f64; 2], rho: f64) -> Result<f64> {
    let weight = 1.0 + k * min_derivative;
    if weight < 1.0 - rho {
        return Err(Error::MonotonicityViolated { weight, bound: 1.0 - rho, x: at[0], y: at[1] });
    }
    Ok(weight)
}

struct Evaluation {
    residual: Vec<f64>,
    norm: f64,
    jacobian_part: Option<CsrMatrix>,
    min_weight: f64,
}

/// Solves one nonlinear step for u_m given u_{m−1} and the assembled f̄_m load.
pub fn step_solve(
    space: &FeSpace,
    grid: &TimeGrid,
    m: usize,
    u_prev: &FeFunction,
    d: &Nonlinearity,
    fbar_load: &[f64],
    opts: &SolverOptions,
) -> Result<(FeFunction, StepReport)> {
    let k = grid.step(m)?;
    let dbar = d.slab_mean(grid, m, opts.time_quad_points)?;
    let mass = space.mass();
    let base = CsrMatrix::linear_combination(&[(1.0, mass), (k, space.stiffness())]);
    let mut rhs = mass.mul_vec(&u_prev.coefficients);
    linalg::axpy(k, fbar_load, &mut rhs);
    let tol = opts.newton_tol * (1.0 + linalg::norm(&rhs));

    let evaluate = |u: &FeFunction| -> Result<Evaluation> {
        let mut residual = base.mul_vec(&u.coefficients);
        linalg::axpy(-1.0, &rhs, &mut residual);
        let (jacobian_part, min_weight) = if dbar.is_zero() {
            (None, 1.0)
        } else {
            let a = space.assemble_semilinear(u, |x, v| dbar.eval(x, v))?;
            let w = check_weight(k, a.min_derivative, a.min_derivative_at, opts.rho)?;
            linalg::axpy(k, &a.residual, &mut residual);
            (Some(a.jacobian), w)
        };
        let norm = linalg::norm(&residual);
        Ok(Evaluation { residual, norm, jacobian_part, min_weight })
    };

    let mut u = u_prev.clone();
    let mut eval = evaluate(&u)?;
    let mut report = StepReport {
        step: m,
        iterations: 0,
        residual: eval.norm,
        damping_activations: 0,
        min_weight: eval.min_weight,
        cg_iterations: 0,
    };
    while eval.norm > tol {
        if report.iterations >= opts.newton_max_iters {
            return Err(Error::NewtonNotConverged { step: m, iterations: report.iterations, residual: eval.norm });
        }
        let jacobian = match &eval.jacobian_part {
            Some(j) => CsrMatrix::linear_combination(&[(1.0, &base), (k, j)]),
            None => base.clone(),
        };
        let neg: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
        let sol = linalg::solve_spd(&jacobian, &neg, opts.cg)?;
        report.cg_iterations = report.cg_iterations.max(sol.iterations);

        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = u.clone();
            linalg::axpy(step, &sol.x, &mut trial.coefficients);
            // Non-finite trial values count as a failed decrease.
            let accepted = match evaluate(&trial) {
                Ok(e) if e.norm < eval.norm => Some(e),
                Ok(_) | Err(Error::NonFinite { .. }) => None,
                Err(other) => return Err(other),
            };
            if let Some(e) = accepted {
                u = trial;
                eval = e;
                break;
            }
            if halvings >= opts.max_halvings {
                return Err(Error::NewtonNotConverged { step: m, iterations: report.iterations + 1, residual: eval.norm });
            }
            step *= 0.5;
            halvings += 1;
        }
        report.damping_activations += halvings;
        report.iterations += 1;
        report.residual = eval.norm;
        report.min_weight = report.min_weight.min(eval.min_weight);
    }
    Ok((u, report))
}

/// Marches the fully discrete scheme from u_{kh,0} = P_h u₀ over every slab.
///
/// `f = None` means zero forcing.
pub fn march(
    space: &FeSpace,
    grid: &TimeGrid,
    d: &Nonlinearity,
    f: Option<SpaceTimeFn>,
    u0: &(dyn Fn([f64; 2]) -> f64 + Sync),
    opts: &SolverOptions,
) -> Result<(SpaceTimeDG0, NewtonReport)> {
    let validity = grid.validate(d.gamma(), opts.rho)?;
    if !validity.smallness_ok {
        return Err(Error::StepTooLarge { k: grid.k(), gamma: d.gamma(), rho: opts.rho });
    }
    let initial = space.l2_project(u0, opts.cg)?;
    let mut slabs: Vec<FeFunction> = Vec::with_capacity(grid.num_slabs());
    let mut report = NewtonReport::default();
    let zero_load = vec![0.0; space.num_dofs()];
    for m in 1..=grid.num_slabs() {
        let load = match f {
            Some(f) => slab_mean_load(space, grid, m, f, opts.time_quad_points)?,
            None => zero_load.clone(),
        };
        let prev = slabs.last().unwrap_or(&initial);
        let (u, step) = step_solve(space, grid, m, prev, d, &load, opts)
            .map_err(|e| Error::Step { step: m, source: Box::new(e) })?;
        slabs.push(u);
        report.steps.push(step);
    }
    report.converged = true;
    Ok((SpaceTimeDG0 { initial, slabs }, report))
}

/// Per-slab Euclidean norms of the Galerkin residual of the discrete
/// problem tested with every basis function, with `(u₀, φ)` assembled from
/// u₀ itself rather than from its projection.
pub fn galerkin_residuals(
    space: &FeSpace,
    grid: &TimeGrid,
    u: &SpaceTimeDG0,
    d: &Nonlinearity,
    f: Option<SpaceTimeFn>,
    u0: &(dyn Fn([f64; 2]) -> f64 + Sync),
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(u.num_slabs());
    for m in 1..=u.num_slabs() {
        let k = grid.step(m)?;
        let um = u.slab(m);
        let mut r = space.stiffness().mul_vec(&um.coefficients);
        r.iter_mut().for_each(|v| *v *= k);
        linalg::axpy(1.0, &space.mass().mul_vec(&um.coefficients), &mut r);
        let prev_load = if m == 1 {
            space.assemble_load(u0)
        } else {
            space.mass().mul_vec(&u.slab(m - 1).coefficients)
        };
        linalg::axpy(-1.0, &prev_load, &mut r);
        if !d.is_zero() {
            let dbar = d.slab_mean(grid, m, opts.time_quad_points)?;
            let a = space.assemble_semilinear(um, |x, v| dbar.eval(x, v))?;
            linalg::axpy(k, &a.residual, &mut r);
        }
        if let Some(f) = f {
            linalg::axpy(-k, &slab_mean_load(space, grid, m, f, opts.time_quad_points)?, &mut r);
        }
        out.push(linalg::norm(&r));
    }
    Ok(out)
}

/// Linear auxiliary problem with reaction coefficient `b ≥ −γ`, source `g`
/// and zero initial value.
pub fn solve_linear_aux(space: &FeSpace, grid: &TimeGrid, b: SpaceTimeFn, g: SpaceTimeFn, opts: &SolverOptions) -> Result<SpaceTimeDG0> {
    let initial = space.zero();
    let mut slabs: Vec<FeFunction> = Vec::with_capacity(grid.num_slabs());
    for m in 1..=grid.num_slabs() {
        let k = grid.step(m)?;
        let system = linear_system(space, grid, m, k, b, opts)?;
        let prev = slabs.last().unwrap_or(&initial);
        let mut rhs = space.mass().mul_vec(&prev.coefficients);
        linalg::axpy(k, &slab_mean_load(space, grid, m, g, opts.time_quad_points)?, &mut rhs);
        let sol = linalg::solve_spd(&system, &rhs, opts.cg).map_err(|e| Error::Step { step: m, source: Box::new(e) })?;
        slabs.push(FeFunction::new(sol.x));
    }
    Ok(SpaceTimeDG0 { initial, slabs })
}

/// M + k_m K + k_m B̄_m, after checking the weight bound.
fn linear_system(space: &FeSpace, grid: &TimeGrid, m: usize, k: f64, b: SpaceTimeFn, opts: &SolverOptions) -> Result<CsrMatrix> {
    let (bm, min_b, at) = slab_mean_weighted_mass(space, grid, m, b, opts.time_quad_points)?;
    check_weight(k, min_b, at, opts.rho).map_err(|e| Error::Step { step: m, source: Box::new(e) })?;
    Ok(CsrMatrix::linear_combination(&[(1.0, space.mass()), (k, space.stiffness()), (k, &bm)]))
}

/// Data of the backward dual problem.
pub enum DualData<'a> {
    /// z_{kh,M} given; slabs M−1, …, 1 are computed.
    Terminal(FeFunction),
    /// Distributed source ψ tested on every slab; z_{kh,M+1} = 0.
    Distributed(SpaceTimeFn<'a>),
}

/// Backward march of the dual scheme
/// `(M + k_m K + k_m B̄_m) z_m = M z_{m+1} (+ k_m ψ̄_m)`.
pub fn solve_dual(space: &FeSpace, grid: &TimeGrid, b: SpaceTimeFn, data: DualData<'_>, opts: &SolverOptions) -> Result<SpaceTimeDG0> {
    let count = grid.num_slabs();
    let mut slabs = vec![space.zero(); count];
    let (mut next, last) = match &data {
        DualData::Terminal(z) => {
            if z.len() != space.num_dofs() {
                return Err(Error::InvalidArgument("terminal data does not match the space".into()));
            }
            slabs[count - 1] = z.clone();
            (z.clone(), count - 1)
        }
        DualData::Distributed(_) => (space.zero(), count),
    };
    for m in (1..=last).rev() {
        let k = grid.step(m)?;
        let system = linear_system(space, grid, m, k, b, opts)?;
        let mut rhs = space.mass().mul_vec(&next.coefficients);
        if let DualData::Distributed(psi) = &data {
            linalg::axpy(k, &slab_mean_load(space, grid, m, *psi, opts.time_quad_points)?, &mut rhs);
        }
        let sol = linalg::solve_spd(&system, &rhs, opts.cg).map_err(|e| Error::Step { step: m, source: Box::new(e) })?;
        next = FeFunction::new(sol.x);
        slabs[m - 1] = next.clone();
    }
    Ok(SpaceTimeDG0 { initial: space.zero(), slabs })
}

/// B(u, φ) in primal form:
/// Σ k_m (∇u_m, ∇φ_m) + Σ_{m≥2} ([u]_{m−1}, φ_m) + (u_1, φ_1).
pub fn bilinear_primal(space: &FeSpace, grid: &TimeGrid, u: &SpaceTimeDG0, phi: &SpaceTimeDG0) -> f64 {
    let count = u.num_slabs();
    let mut total = 0.0;
    for m in 1..=count {
        total += grid.steps()[m - 1] * space.h1_inner(u.slab(m), phi.slab(m));
    }
    for m in 2..=count {
        total += space.l2_inner(&(u.slab(m) - u.slab(m - 1)), phi.slab(m));
    }
    total + space.l2_inner(u.slab(1), phi.slab(1))
}

/// B(u, φ) in dual form:
/// Σ k_m (∇u_m, ∇φ_m) − Σ_{m≤M−1} (u_m, [φ]_m) + (u_M, φ_M).
pub fn bilinear_dual(space: &FeSpace, grid: &TimeGrid, u: &SpaceTimeDG0, phi: &SpaceTimeDG0) -> f64 {
    let count = u.num_slabs();
    let mut total = 0.0;
    for m in 1..=count {
        total += grid.steps()[m - 1] * space.h1_inner(u.slab(m), phi.slab(m));
    }
    for m in 1..count {
        total -= space.l2_inner(u.slab(m), &(phi.slab(m + 1) - phi.slab(m)));
    }
    total + space.l2_inner(u.slab(count), phi.slab(count))
}
