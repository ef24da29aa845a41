//! Reaction terms d(t, x, u) with their u-derivatives, the declared
//! monotonicity defect γ (∂_u d ≥ −γ), truncation to a globally Lipschitz
//! d_R, and slab means d̄_m.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::time_grid::TimeGrid;

/// Pointwise map (t, x, u) ↦ value.
pub type PointFn = Arc<dyn Fn(f64, [f64; 2], f64) -> f64 + Send + Sync>;

/// Names accepted by [`Nonlinearity::builtin`].
pub const BUILTIN_NAMES: [&str; 6] = ["zero", "cubic", "quintic", "cubic_abs", "exp_m1", "allen_cahn"];

#[derive(Clone)]
enum Kind {
    Zero,
    Cubic,
    Quintic,
    CubicAbs,
    ExpM1,
    AllenCahn { alpha: f64 },
    Custom { eval: PointFn, deriv: PointFn, autonomous: bool },
    Truncated { inner: Box<Nonlinearity>, radius: f64, bound: f64 },
}

#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    gamma: f64,
    kind: Kind,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("gamma", &self.gamma)
            .field("truncation", &self.truncation())
            .finish()
    }
}

impl Nonlinearity {
    /// Built-in nonlinearity by name. `alpha` is only read by `allen_cahn`.
    pub fn builtin(name: &str, alpha: f64) -> Result<Self> {
        let (kind, gamma) = match name {
            "zero" => (Kind::Zero, 0.0),
            "cubic" => (Kind::Cubic, 0.0),
            "quintic" => (Kind::Quintic, 0.0),
            "cubic_abs" => (Kind::CubicAbs, 0.0),
            "exp_m1" => (Kind::ExpM1, 0.0),
            "allen_cahn" => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::InvalidArgument(format!("allen_cahn needs alpha > 0, got {alpha}")));
                }
                (Kind::AllenCahn { alpha }, alpha)
            }
            other => return Err(Error::InvalidArgument(format!("unknown nonlinearity '{other}'"))),
        };
        Ok(Nonlinearity { name: name.to_string(), gamma, kind })
    }

    pub fn zero() -> Self {
        Nonlinearity { name: "zero".into(), gamma: 0.0, kind: Kind::Zero }
    }

    /// User-supplied nonlinearity with a declared defect γ. The declaration is
    /// checked on the deterministic sample grid of [`Self::sample_check`].
    pub fn custom(name: &str, gamma: f64, eval: PointFn, deriv: PointFn, autonomous: bool) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")));
        }
        let d = Nonlinearity { name: name.to_string(), gamma, kind: Kind::Custom { eval, deriv, autonomous } };
        let report = d.sample_check(0);
        if report.max_abs_at_zero > 1e-14 {
            return Err(Error::InvalidArgument(format!(
                "nonlinearity '{name}' does not vanish at u = 0 (|d| = {:e})",
                report.max_abs_at_zero
            )));
        }
        if report.min_deriv < -gamma - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "nonlinearity '{name}' has derivative {} below -gamma = {}",
                report.min_deriv, -gamma
            )));
        }
        Ok(d)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared γ with ∂_u d ≥ −γ.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Radius R and derivative bound C_R when truncated.
    pub fn truncation(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Truncated { radius, bound, .. } => Some((*radius, *bound)),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// True when d does not depend on t.
    pub fn is_autonomous(&self) -> bool {
        match &self.kind {
            Kind::Custom { autonomous, .. } => *autonomous,
            Kind::Truncated { inner, .. } => inner.is_autonomous(),
            _ => true,
        }
    }

    pub fn eval(&self, t: f64, x: [f64; 2], u: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Cubic => u * u * u,
            Kind::Quintic => u.powi(5),
            Kind::CubicAbs => u * u * u * u.abs(),
            Kind::ExpM1 => u.exp_m1(),
            Kind::AllenCahn { alpha } => u * u * u - alpha * u,
            Kind::Custom { eval, .. } => eval(t, x, u),
            Kind::Truncated { inner, radius, .. } => {
                let r = *radius;
                if u > r {
                    inner.eval(t, x, r) + (u - r) * inner.deriv(t, x, r)
                } else if u < -r {
                    inner.eval(t, x, -r) + (u + r) * inner.deriv(t, x, -r)
                } else {
                    inner.eval(t, x, u)
                }
            }
        }
    }

    /// ∂_u d(t, x, u).
    pub fn deriv(&self, t: f64, x: [f64; 2], u: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Cubic => 3.0 * u * u,
            Kind::Quintic => 5.0 * u.powi(4),
            Kind::CubicAbs => 4.0 * u * u * u.abs(),
            Kind::ExpM1 => u.exp(),
            Kind::AllenCahn { alpha } => 3.0 * u * u - alpha,
            Kind::Custom { deriv, .. } => deriv(t, x, u),
            Kind::Truncated { inner, radius, .. } => inner.deriv(t, x, u.clamp(-*radius, *radius)),
        }
    }

    /// The truncated nonlinearity d_R: unchanged on |u| ≤ R and extended
    /// linearly with the boundary slope outside. Inherits γ.
    pub fn truncate(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("truncation radius must be positive, got {radius}")));
        }
        let bound = sampled_derivative_bound(self, radius);
        Ok(Nonlinearity {
            name: format!("{}_R{}", self.name, radius),
            gamma: self.gamma,
            kind: Kind::Truncated { inner: Box::new(self.clone()), radius, bound },
        })
    }

    /// Slab mean d̄_m(x, u) = (1/k_m) ∫_{I_m} d(t, x, u) dt by Gauss quadrature.
    pub fn slab_mean(&self, grid: &TimeGrid, m: usize, quad_points: usize) -> Result<SlabMean<'_>> {
        let rule = if self.is_autonomous() {
            let (_, tm) = grid.slab(m)?;
            vec![(tm, 1.0)]
        } else {
            grid.mean_rule(m, quad_points)?
        };
        Ok(SlabMean { d: self, rule })
    }

    /// Evaluates the structural conditions on the deterministic sample grid
    /// u ∈ {−10, −9.9, …, 10} × five seeded (t, x) points with t ∈ [0, 1].
    pub fn sample_check(&self, seed: u64) -> SampleReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, [f64; 2])> =
            (0..5).map(|_| (rng.gen::<f64>(), [rng.gen::<f64>(), rng.gen::<f64>()])).collect();
        let mut report = SampleReport { min_deriv: f64::INFINITY, max_abs_deriv: 0.0, max_abs_at_zero: 0.0 };
        for &(t, x) in &points {
            report.max_abs_at_zero = report.max_abs_at_zero.max(self.eval(t, x, 0.0).abs());
            for u in sample_u_grid() {
                let du = self.deriv(t, x, u);
                report.min_deriv = report.min_deriv.min(du);
                report.max_abs_deriv = report.max_abs_deriv.max(du.abs());
            }
        }
        report
    }
}

/// u ∈ {−10, −9.9, …, 10}.
pub fn sample_u_grid() -> impl Iterator<Item = f64> {
    (-100..=100).map(|i| i as f64 / 10.0)
}

/// Result of [`Nonlinearity::sample_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleReport {
    pub min_deriv: f64,
    pub max_abs_deriv: f64,
    pub max_abs_at_zero: f64,
}

/// max |∂_u d| over |u| ≤ R, sampled on 2001 points (endpoints included)
/// at the seeded (t, x) sample points.
fn sampled_derivative_bound(d: &Nonlinearity, radius: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let points: Vec<(f64, [f64; 2])> =
        (0..5).map(|_| (rng.gen::<f64>(), [rng.gen::<f64>(), rng.gen::<f64>()])).collect();
    let mut bound = 0.0f64;
    for &(t, x) in &points {
        for i in 0..=2000 {
            let u = -radius + 2.0 * radius * i as f64 / 2000.0;
            bound = bound.max(d.deriv(t, x, u).abs());
        }
    }
    bound
}

/// d̄_m frozen on one slab.
pub struct SlabMean<'a> {
    d: &'a Nonlinearity,
    rule: Vec<(f64, f64)>,
}

impl SlabMean<'_> {
    /// (d̄_m(x, u), ∂_u d̄_m(x, u)).
    pub fn eval(&self, x: [f64; 2], u: f64) -> (f64, f64) {
        self.rule.iter().fold((0.0, 0.0), |(v, dv), &(t, w)| {
            (v + w * self.d.eval(t, x, u), dv + w * self.d.deriv(t, x, u))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.d.is_zero()
    }
}
