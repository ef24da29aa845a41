//! Manufactured solutions: an exact u with its derivatives and the forcing
//! f = ∂_t u − Δu + d(t, x, u) that makes it solve the semilinear problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

pub type ScalarField = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
pub type PairField = Arc<dyn Fn(f64, [f64; 2]) -> (f64, f64) + Send + Sync>;

pub const EXACT_NAMES: [&str; 3] = ["zero", "heat_mode", "decay_mode"];

/// Exact solution with analytic ∂_t u, ∇u and Δu, plus sup |u| over I×Ω.
#[derive(Clone)]
pub struct ExactSolution {
    pub name: String,
    pub u: ScalarField,
    pub u_t: ScalarField,
    pub grad: VectorField,
    pub laplacian: ScalarField,
    /// (u, ∂_t u − Δu) in one evaluation.
    pub heat_residual: PairField,
    pub sup: f64,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("name", &self.name).field("sup", &self.sup).finish()
    }
}

impl ExactSolution {
    pub fn zero() -> Self {
        ExactSolution {
            name: "zero".into(),
            u: Arc::new(|_, _| 0.0),
            u_t: Arc::new(|_, _| 0.0),
            grad: Arc::new(|_, _| [0.0, 0.0]),
            laplacian: Arc::new(|_, _| 0.0),
            heat_residual: Arc::new(|_, _| (0.0, 0.0)),
            sup: 0.0,
        }
    }

    /// Builds the fused evaluator from separate u, ∂_t u and Δu.
    pub fn new(name: &str, u: ScalarField, u_t: ScalarField, grad: VectorField, laplacian: ScalarField, sup: f64) -> Self {
        let (uu, ut, lap) = (u.clone(), u_t.clone(), laplacian.clone());
        ExactSolution {
            name: name.into(),
            u,
            u_t,
            grad,
            laplacian,
            heat_residual: Arc::new(move |t, x| (uu(t, x), ut(t, x) - lap(t, x))),
            sup,
        }
    }

    /// e^{rate·t} sin(πx) sin(πy) with rate ≤ 0.
    pub fn sine_mode(name: &str, rate: f64) -> Self {
        let s = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        ExactSolution {
            name: name.into(),
            u: Arc::new(move |t, x| (rate * t).exp() * s(x)),
            u_t: Arc::new(move |t, x| rate * (rate * t).exp() * s(x)),
            grad: Arc::new(move |t, x| {
                let a = (rate * t).exp() * PI;
                [a * (PI * x[0]).cos() * (PI * x[1]).sin(), a * (PI * x[0]).sin() * (PI * x[1]).cos()]
            }),
            laplacian: Arc::new(move |t, x| -2.0 * PI * PI * (rate * t).exp() * s(x)),
            heat_residual: Arc::new(move |t, x| {
                let u = (rate * t).exp() * s(x);
                (u, (rate + 2.0 * PI * PI) * u)
            }),
            sup: 1.0,
        }
    }

    /// `zero`, `heat_mode` (rate −2π², so f = 0 without reaction) or
    /// `decay_mode` (rate −1).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "heat_mode" => Ok(Self::sine_mode(name, -2.0 * PI * PI)),
            "decay_mode" => Ok(Self::sine_mode(name, -1.0)),
            other => Err(Error::InvalidArgument(format!("unknown exact solution '{other}'"))),
        }
    }

    /// Largest |u| over 41 points per edge of ∂Ω at times 0, T/2, T.
    pub fn boundary_trace(&self, t_final: f64) -> (f64, [f64; 2]) {
        let mut worst = (0.0, [0.0, 0.0]);
        for t in [0.0, 0.5 * t_final, t_final] {
            for i in 0..=40 {
                let s = i as f64 / 40.0;
                for p in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                    let v = (self.u)(t, p).abs();
                    if v > worst.0 {
                        worst = (v, p);
                    }
                }
            }
        }
        worst
    }
}

/// f = ∂_t u − Δu + d(t, x, u) from the analytic derivatives, after checking
/// that u vanishes on sampled boundary points.
pub fn mms_source(exact: &ExactSolution, d: &Nonlinearity, t_final: f64) -> Result<ScalarField> {
    let (trace, at) = exact.boundary_trace(t_final);
    if trace > 1e-12 {
        return Err(Error::BoundaryTrace { x: at[0], y: at[1], value: trace });
    }
    if exact.name == "zero" {
        return Ok(Arc::new(|_, _| 0.0));
    }
    let (pair, d) = (exact.heat_residual.clone(), d.clone());
    Ok(Arc::new(move |t, x| {
        let (u, r) = pair(t, x);
        r + d.eval(t, x, u)
    }))
}

/// A complete manufactured problem on (0, T].
#[derive(Clone)]
pub struct MmsProblem {
    pub exact: ExactSolution,
    pub d: Nonlinearity,
    pub f: ScalarField,
    pub t_final: f64,
}

impl fmt::Debug for MmsProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MmsProblem")
            .field("exact", &self.exact)
            .field("d", &self.d)
            .field("t_final", &self.t_final)
            .finish()
    }
}

impl MmsProblem {
    pub fn new(exact: ExactSolution, d: Nonlinearity, t_final: f64) -> Result<Self> {
        let f = mms_source(&exact, &d, t_final)?;
        Ok(MmsProblem { exact, d, f, t_final })
    }

    pub fn is_unforced(&self) -> bool {
        self.exact.name == "zero" || (self.exact.name == "heat_mode" && self.d.is_zero())
    }

    pub fn u0(&self, x: [f64; 2]) -> f64 {
        (self.exact.u)(0.0, x)
    }

    /// Largest |f − (D_t u − D_xx u + d(u))| over `samples` seeded interior
    /// points, relative to 1 + |f|, where D_t and D_xx are Richardson
    /// extrapolated central differences (5-point stencil in space).
    pub fn consistency_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = &self.exact.u;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let t = rng.gen_range(0.1..0.9) * self.t_final;
            let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let dt = |h: f64| (u(t + h, x) - u(t - h, x)) / (2.0 * h);
            let lap = |h: f64| {
                (u(t, [x[0] + h, x[1]]) + u(t, [x[0] - h, x[1]]) + u(t, [x[0], x[1] + h]) + u(t, [x[0], x[1] - h])
                    - 4.0 * u(t, x))
                    / (h * h)
            };
            let ht = 1e-3 * self.t_final;
            let hx = 2e-3;
            let ut = (4.0 * dt(0.5 * ht) - dt(ht)) / 3.0;
            let uxx = (4.0 * lap(0.5 * hx) - lap(hx)) / 3.0;
            let f = (self.f)(t, x);
            let fd = ut - uxx + self.d.eval(t, x, u(t, x));
            worst = worst.max((f - fd).abs() / (1.0 + f.abs()));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PTS: [[f64; 2]; 3] = [[0.3, 0.6], [0.5, 0.5], [0.9, 0.15]];

    #[test]
    fn heat_mode_is_unforced() {
        let p = MmsProblem::new(ExactSolution::by_name("heat_mode").unwrap(), Nonlinearity::zero(), 0.1).unwrap();
        for x in PTS {
            assert!((p.f)(0.05, x).abs() < 1e-12);
        }
        assert!(p.is_unforced());
    }

    #[test]
    fn stationary_cubic_source() {
        let e = ExactSolution::sine_mode("steady", 0.0);
        let d = Nonlinearity::builtin("cubic", 0.0).unwrap();
        let p = MmsProblem::new(e.clone(), d, 1.0).unwrap();
        for x in PTS {
            let u = (e.u)(0.3, x);
            let expected = 2.0 * PI * PI * u + u.powi(3);
            assert!(((p.f)(0.3, x) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn allen_cahn_decay_source() {
        let alpha = 0.5;
        let e = ExactSolution::by_name("decay_mode").unwrap();
        let p = MmsProblem::new(e.clone(), Nonlinearity::builtin("allen_cahn", alpha).unwrap(), 1.0).unwrap();
        for x in PTS {
            let u = (e.u)(0.7, x);
            let expected = (-1.0 + 2.0 * PI * PI - alpha) * u + u.powi(3);
            assert!(((p.f)(0.7, x) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_trace_is_rejected() {
        let e = ExactSolution::new(
            "shifted",
            Arc::new(|_, x| 1.0 + x[0]),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| [1.0, 0.0]),
            Arc::new(|_, _| 0.0),
            2.0,
        );
        let err = MmsProblem::new(e, Nonlinearity::zero(), 1.0).unwrap_err();
        assert!(matches!(err, Error::BoundaryTrace { .. }));
        assert!(ExactSolution::by_name("bogus").is_err());
    }

    #[test]
    fn sources_match_finite_differences() {
        for (exact, d, t) in [
            ("heat_mode", "zero", 0.1),
            ("decay_mode", "cubic", 1.0),
            ("decay_mode", "allen_cahn", 1.0),
            ("decay_mode", "exp_m1", 1.0),
            ("zero", "quintic", 1.0),
        ] {
            let p = MmsProblem::new(ExactSolution::by_name(exact).unwrap(), Nonlinearity::builtin(d, 0.5).unwrap(), t).unwrap();
            let defect = p.consistency_defect(50, 7);
            assert!(defect < 1e-8, "{exact}/{d}: {defect}");
        }
    }

    #[test]
    fn fused_residual_matches_parts() {
        let modes = ExactSolution::by_name("decay_mode").unwrap();
        let e = ExactSolution::new("copy", modes.u.clone(), modes.u_t.clone(), modes.grad.clone(), modes.laplacian.clone(), 1.0);
        for x in PTS {
            let (a, b) = ((modes.heat_residual)(0.3, x), (e.heat_residual)(0.3, x));
            assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-13);
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let e = ExactSolution::by_name("decay_mode").unwrap();
        let h = 1e-6;
        for x in PTS {
            let g = (e.grad)(0.4, x);
            let gx = ((e.u)(0.4, [x[0] + h, x[1]]) - (e.u)(0.4, [x[0] - h, x[1]])) / (2.0 * h);
            let gy = ((e.u)(0.4, [x[0], x[1] + h]) - (e.u)(0.4, [x[0], x[1] - h])) / (2.0 * h);
            assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
        }
    }
}
