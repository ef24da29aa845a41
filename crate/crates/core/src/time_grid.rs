//! Temporal partitions `0 = t₀ < t₁ < … < t_M = T` with left-open,
//! right-closed slabs `I_m = (t_{m−1}, t_m]`, plus the slab projections.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Default number of Gauss points per slab for temporal means.
pub const DEFAULT_TIME_QUAD_POINTS: usize = 3;

/// Default smallness margin in k ≤ ρ/γ.
pub const DEFAULT_RHO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    steps: Vec<f64>,
}

impl TimeGrid {
    /// `M` equal steps of size `T/M`.
    pub fn uniform(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        let k = t_final / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|m| m as f64 * k).collect();
        nodes[steps] = t_final;
        Ok(TimeGrid { steps: vec![k; steps], nodes })
    }

    /// Grid from an explicit, strictly increasing node list starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("time grid needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("time grid must start at 0, got {}", nodes[0])));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("time nodes must be finite and strictly increasing".into()));
        }
        let steps = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(TimeGrid { nodes, steps })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Number of slabs M.
    pub fn num_slabs(&self) -> usize {
        self.steps.len()
    }

    pub fn t_final(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Maximal step k.
    pub fn k(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    pub fn k_min(&self) -> f64 {
        self.steps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Step k_m of slab m (1-based).
    pub fn step(&self, m: usize) -> Result<f64> {
        self.check_slab(m)?;
        Ok(self.steps[m - 1])
    }

    /// Endpoints (t_{m−1}, t_m) of slab m (1-based).
    pub fn slab(&self, m: usize) -> Result<(f64, f64)> {
        self.check_slab(m)?;
        Ok((self.nodes[m - 1], self.nodes[m]))
    }

    /// Slab containing `t`; `t = t_m` belongs to slab m, `t ≤ 0` to slab 1.
    pub fn slab_of(&self, t: f64) -> usize {
        let m = self.nodes[1..].partition_point(|&tm| tm < t) + 1;
        m.min(self.num_slabs())
    }

    fn check_slab(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.num_slabs() {
            return Err(Error::SlabOutOfRange { index: m, count: self.num_slabs() });
        }
        Ok(())
    }

    /// Gauss points and weights on slab m, weights normalized to sum to one.
    pub fn mean_rule(&self, m: usize, quad_points: usize) -> Result<Vec<(f64, f64)>> {
        let (a, b) = self.slab(m)?;
        let k = b - a;
        Ok(GaussLegendre::new(quad_points).on_interval(a, b).map(|(t, w)| (t, w / k)).collect())
    }

    /// Checks the time-mesh conditions for a given defect γ and margin ρ.
    pub fn validate(&self, gamma: f64, rho: f64) -> Result<GridValidityReport> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")));
        }
        let k = self.k();
        let c_observed = self
            .steps
            .windows(2)
            .map(|w| (w[0] / w[1]).max(w[1] / w[0]))
            .fold(1.0, f64::max);
        Ok(GridValidityReport {
            ratio_ok: c_observed.is_finite(),
            c_observed,
            quarter_ok: k <= 0.25 * self.t_final(),
            smallness_ok: gamma == 0.0 || k <= rho / gamma,
            k_min_over_k: self.k_min() / k,
        })
    }
}

/// Outcome of [`TimeGrid::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridValidityReport {
    /// Neighbouring step ratios are bounded (always true for finite grids).
    pub ratio_ok: bool,
    /// Observed max over m of max(k_m/k_{m+1}, k_{m+1}/k_m).
    pub c_observed: f64,
    /// k ≤ T/4.
    pub quarter_ok: bool,
    /// k ≤ ρ/γ, vacuous for γ = 0.
    pub smallness_ok: bool,
    /// Observed k_min / k.
    pub k_min_over_k: f64,
}

impl GridValidityReport {
    pub fn all_ok(&self) -> bool {
        self.ratio_ok && self.quarter_ok && self.smallness_ok
    }
}

/// Gauss approximation of (1/k_m) ∫_{I_m} v dt.
pub fn temporal_mean(grid: &TimeGrid, v: impl Fn(f64) -> f64, m: usize, quad_points: usize) -> Result<f64> {
    if quad_points == 0 {
        return Err(Error::InvalidArgument("temporal mean needs at least one quadrature point".into()));
    }
    Ok(grid.mean_rule(m, quad_points)?.into_iter().map(|(t, w)| w * v(t)).sum())
}

/// Right-endpoint value v(t_m).
pub fn nodal_value(grid: &TimeGrid, v: impl Fn(f64) -> f64, m: usize) -> Result<f64> {
    let (_, tm) = grid.slab(m)?;
    Ok(v(tm))
}
