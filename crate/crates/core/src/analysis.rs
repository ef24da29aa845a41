//! Error norms, convergence orders, boundedness monitoring and empirical
//! regularity ratios for the linear auxiliary problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::dg0::{self, jumps, SolverOptions, SpaceTimeDG0, SpaceTimeFn};
use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace};
use crate::linalg::{self, CgOptions};
use crate::quadrature::GaussLegendre;
use crate::time_grid::TimeGrid;

/// Errors in L²(I×Ω), L∞(I;L²(Ω)) and L∞(I×Ω).
///
/// Both sup-norms are maxima over a finite sample set and therefore lower
/// bounds of the true suprema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    pub l2l2: f64,
    pub linf_l2: f64,
    pub linf_linf: f64,
    pub samples: SampleSet,
}

/// Sample set behind the sup-norms of an [`ErrorTriple`]: per slab, the
/// temporal Gauss points plus the right endpoint; in space, every
/// quadrature point plus every vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSet {
    pub times_per_slab: usize,
    pub space_points: usize,
}

impl std::fmt::Display for SampleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} Gauss points + t_m per slab; {} spatial points (quadrature + vertices)",
            self.times_per_slab - 1,
            self.space_points
        )
    }
}

/// Samples one time level: returns (‖e‖²_{L²}, max |e|).
fn spatial_error(space: &FeSpace, uh_quad: &[f64], uh_vert: &[f64], t: f64, u_exact: SpaceTimeFn) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut sup: f64 = 0.0;
    for ((x, w), v) in space.quadrature().zip(uh_quad) {
        let e = u_exact(t, x) - v;
        l2 += w * e * e;
        sup = sup.max(e.abs());
    }
    for (p, v) in space.mesh().vertices.iter().zip(uh_vert) {
        sup = sup.max((u_exact(t, *p) - v).abs());
    }
    (l2, sup)
}

/// Error of a dG(0) trajectory against an exact solution.
pub fn error_norms(space: &FeSpace, grid: &TimeGrid, traj: &SpaceTimeDG0, u_exact: SpaceTimeFn, time_quad_points: usize) -> ErrorTriple {
    let gauss = GaussLegendre::new(time_quad_points);
    let per_slab: Vec<(f64, f64, f64)> = (1..=traj.num_slabs())
        .into_par_iter()
        .map(|m| {
            let (a, b) = (grid.nodes()[m - 1], grid.nodes()[m]);
            let uq = space.values_at_quadrature(traj.slab(m));
            let uv = space.vertex_values(traj.slab(m));
            let mut l2l2 = 0.0;
            let mut linf_l2: f64 = 0.0;
            let mut linf_linf: f64 = 0.0;
            let samples = gauss.on_interval(a, b).chain(std::iter::once((b, 0.0)));
            for (t, wt) in samples {
                let (sq, sup) = spatial_error(space, &uq, &uv, t, u_exact);
                l2l2 += wt * sq;
                linf_l2 = linf_l2.max(sq.sqrt());
                linf_linf = linf_linf.max(sup);
            }
            (l2l2, linf_l2, linf_linf)
        })
        .collect();
    let l2l2 = per_slab.iter().map(|p| p.0).sum::<f64>().sqrt();
    let linf_l2 = per_slab.iter().map(|p| p.1).fold(0.0, f64::max);
    let linf_linf = per_slab.iter().map(|p| p.2).fold(0.0, f64::max);
    debug_assert!(linf_l2 <= linf_linf * (1.0 + 1e-12) + 1e-300);
    ErrorTriple {
        l2l2,
        linf_l2,
        linf_linf,
        samples: SampleSet {
            times_per_slab: time_quad_points + 1,
            space_points: space.mesh().num_cells() * space.rule().len() + space.mesh().num_vertices(),
        },
    }
}

/// Rates log(e_i/e_{i+1}) / log(h_i/h_{i+1}).
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument("eoc needs two equally long lists of length >= 2".into()));
    }
    if errors.iter().chain(hs).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("eoc needs positive finite errors and mesh sizes".into()));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("eoc needs strictly decreasing mesh sizes".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// (max over slabs of the nodal sup, max ≤ u_exact_sup + 1).
pub fn boundedness_check(traj: &SpaceTimeDG0, u_exact_sup: f64) -> (f64, bool) {
    let max_abs = traj.max_abs();
    (max_abs, max_abs <= u_exact_sup + 1.0)
}

/// ‖w‖_{L∞}/‖Δ_h w‖_{L²} and ‖w‖_{L²}/‖Δ_h w‖_{L¹}.
pub fn deltah_quotients(space: &FeSpace, w: &FeFunction, cg: CgOptions) -> Result<(f64, f64)> {
    if w.max_abs() == 0.0 {
        return Err(Error::InvalidArgument("quotients are undefined for w = 0".into()));
    }
    let lap = space.discrete_laplacian(w, cg)?;
    Ok((w.max_abs() / space.l2_norm(&lap), space.l2_norm(w) / space.l1_norm(&lap)))
}

/// Exact sup over V_h of ‖w‖_{L∞}/‖Δ_h w‖_{L²}, i.e. the largest
/// ‖K⁻¹e_i‖_M over the degrees of freedom.
pub fn deltah_sup_constant(space: &FeSpace, cg: CgOptions) -> Result<f64> {
    let n = space.num_dofs();
    let values: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let c = linalg::solve_spd(space.stiffness(), &e, cg)?.x;
            Ok(space.mass().inner(&c, &c).sqrt())
        })
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

/// Seeded random P1 functions: interpolants of Σ_{i,j≤4} a_ij sin(iπx) sin(jπy)
/// with a_ij uniform in [−1, 1]. Smooth and mesh-independent, so quotients
/// can be compared across levels.
pub fn random_fe_functions(space: &FeSpace, count: usize, seed: u64) -> Vec<FeFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            space.interpolate(|x| {
                let mut s = 0.0;
                for i in 0..4 {
                    let si = ((i + 1) as f64 * PI * x[0]).sin();
                    for j in 0..4 {
                        s += a[4 * i + j] * si * ((j + 1) as f64 * PI * x[1]).sin();
                    }
                }
                s
            })
        })
        .collect()
}

/// Observed constants of the stability and maximal regularity estimates
/// for the linear auxiliary problem, with the logarithmic normalizations
/// applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRatios {
    /// ‖v‖_{L∞(I;L²)} / ‖g‖_{L¹(I;L²)}
    pub lemma1_ratio: f64,
    /// (‖Δ_h v‖_{L∞(I;L²)} + max_m ‖[v]_{m−1}/k_m‖_{L²}) / (ln(T/k)(1 + ‖b‖_∞)‖g‖_{L∞(I;L²)})
    pub lemma2_ratio: f64,
    /// (‖Δ_h v‖_{L¹(I×Ω)} + Σ_m ‖[v]_{m−1}‖_{L¹}) / (ln²(T/k)(1 + ‖b‖²_∞)‖g‖_{L¹(I×Ω)})
    pub lemma4_ratio: f64,
    /// max over slabs of ‖v_m‖_{L∞}/‖Δ_h v_m‖_{L²}
    pub deltah_linf_l2: f64,
    /// max over slabs of ‖v_m‖_{L²}/‖Δ_h v_m‖_{L¹}
    pub deltah_l2_l1: f64,
}

/// Data norms of g and ‖b‖_∞ over the time samples (Gauss points + t_m) and
/// spatial quadrature points.
struct DataNorms {
    g_l1_l2: f64,
    g_linf_l2: f64,
    g_l1_l1: f64,
    b_sup: f64,
}

fn data_norms(space: &FeSpace, grid: &TimeGrid, b: SpaceTimeFn, g: SpaceTimeFn, quad_points: usize) -> DataNorms {
    let gauss = GaussLegendre::new(quad_points);
    let mut n = DataNorms { g_l1_l2: 0.0, g_linf_l2: 0.0, g_l1_l1: 0.0, b_sup: 0.0 };
    for m in 1..=grid.num_slabs() {
        let (a, e) = (grid.nodes()[m - 1], grid.nodes()[m]);
        for (t, w) in gauss.on_interval(a, e).chain(std::iter::once((e, 0.0))) {
            let l2 = space.l2_norm_of(|x| g(t, x));
            n.g_l1_l2 += w * l2;
            n.g_linf_l2 = n.g_linf_l2.max(l2);
            n.g_l1_l1 += w * space.l1_norm_of(|x| g(t, x));
            n.b_sup = space.quadrature().map(|(x, _)| b(t, x).abs()).fold(n.b_sup, f64::max);
        }
    }
    n
}

/// Solves the auxiliary problem for (b, g) and reports its regularity ratios.
pub fn regularity_probe(space: &FeSpace, grid: &TimeGrid, b: SpaceTimeFn, g: SpaceTimeFn, opts: &SolverOptions) -> Result<RegularityRatios> {
    let norms = data_norms(space, grid, b, g, opts.time_quad_points);
    if norms.g_l1_l2 == 0.0 {
        return Err(Error::InvalidArgument("regularity ratios are undefined for g = 0".into()));
    }
    let log = (grid.t_final() / grid.k()).ln();
    if !(log > 0.0) {
        return Err(Error::InvalidArgument("regularity ratios need T/k > 1".into()));
    }
    let v = dg0::solve_linear_aux(space, grid, b, g, opts)?;
    let laps: Vec<FeFunction> = v
        .slabs
        .par_iter()
        .map(|s| space.discrete_laplacian(s, opts.cg))
        .collect::<Result<_>>()?;
    let jumps = jumps(&v);
    let steps = grid.steps();

    let v_linf_l2 = v.slabs.iter().map(|s| space.l2_norm(s)).fold(0.0, f64::max);
    let lap_linf_l2 = laps.iter().map(|l| space.l2_norm(l)).fold(0.0, f64::max);
    let jump_rate = jumps.iter().zip(steps).map(|(j, k)| space.l2_norm(j) / k).fold(0.0, f64::max);
    let lap_l1_l1: f64 = laps.iter().zip(steps).map(|(l, k)| k * space.l1_norm(l)).sum();
    let jump_l1: f64 = jumps.iter().map(|j| space.l1_norm(j)).sum();

    let mut deltah_linf_l2: f64 = 0.0;
    let mut deltah_l2_l1: f64 = 0.0;
    for (s, l) in v.slabs.iter().zip(&laps) {
        if s.max_abs() > 0.0 {
            deltah_linf_l2 = deltah_linf_l2.max(s.max_abs() / space.l2_norm(l));
            deltah_l2_l1 = deltah_l2_l1.max(space.l2_norm(s) / space.l1_norm(l));
        }
    }

    Ok(RegularityRatios {
        lemma1_ratio: v_linf_l2 / norms.g_l1_l2,
        lemma2_ratio: (lap_linf_l2 + jump_rate) / (log * (1.0 + norms.b_sup) * norms.g_linf_l2),
        lemma4_ratio: (lap_l1_l1 + jump_l1) / (log * log * (1.0 + norms.b_sup * norms.b_sup) * norms.g_l1_l1),
        deltah_linf_l2,
        deltah_l2_l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;
    use crate::nonlinearity::Nonlinearity;

    fn eigen(t: f64, x: [f64; 2]) -> f64 {
        (-2.0 * PI * PI * t).exp() * (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    #[test]
    fn eoc_definition() {
        assert!((eoc(&[1e-2, 2.5e-3], &[0.1, 0.05]).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((eoc(&[1e-2, 5e-3], &[0.1, 0.05]).unwrap()[0] - 1.0).abs() < 1e-12);
        assert_eq!(eoc(&[3.0, 3.0, 3.0], &[0.4, 0.2, 0.1]).unwrap(), vec![0.0, 0.0]);
        assert!(eoc(&[1.0], &[0.1]).is_err());
        assert!(eoc(&[1.0, 0.0], &[0.1, 0.05]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.1, -0.05]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.05, 0.1]).is_err());
    }

    #[test]
    fn boundedness() {
        let s = FeSpace::new(build_unit_square_mesh(0));
        let zero = SpaceTimeDG0 { initial: s.zero(), slabs: vec![s.zero(); 3] };
        assert_eq!(boundedness_check(&zero, 0.0), (0.0, true));
        let three = SpaceTimeDG0 { initial: s.zero(), slabs: vec![FeFunction::new(vec![3.0])] };
        assert_eq!(boundedness_check(&three, 1.0), (3.0, false));
    }

    #[test]
    fn self_comparison_is_zero() {
        let s = FeSpace::new(build_unit_square_mesh(2));
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let slabs: Vec<FeFunction> = (1..=5).map(|m| s.interpolate(|x| m as f64 * x[0] * x[1] * (1.0 - x[0]))).collect();
        let traj = SpaceTimeDG0 { initial: s.zero(), slabs };
        let own = |t: f64, x: [f64; 2]| traj.eval(&s, &g, t, x).unwrap();
        let e = error_norms(&s, &g, &traj, &own, 3);
        assert!(e.l2l2 < 1e-14 && e.linf_l2 < 1e-14 && e.linf_linf < 1e-14, "{e:?}");
        assert_eq!(e.samples.times_per_slab, 4);
    }

    #[test]
    fn zero_trajectory_against_eigenfunction() {
        let s = FeSpace::new(build_unit_square_mesh(3));
        let t_final = 0.1;
        let g = TimeGrid::uniform(t_final, 16).unwrap();
        let zero = SpaceTimeDG0 { initial: s.zero(), slabs: vec![s.zero(); 16] };
        let e = error_norms(&s, &g, &zero, &eigen, 3);
        let lambda = 4.0 * PI * PI;
        let exact = ((1.0 - (-lambda * t_final).exp()) / lambda).sqrt() * 0.5;
        // spatial rule resolves sin² to a few 1e-4 on level 3
        assert!((e.l2l2 - exact).abs() < 1e-3 * exact, "{} vs {exact}", e.l2l2);
        // sup over the sampled times is at the first Gauss point, not t = 0
        assert!(e.linf_l2 < 0.5 && e.linf_l2 > 0.45);
        assert!(e.linf_l2 <= e.linf_linf);
    }

    #[test]
    fn norms_are_homogeneous() {
        let s = FeSpace::new(build_unit_square_mesh(2));
        let g = TimeGrid::uniform(0.5, 4).unwrap();
        let traj = SpaceTimeDG0 { initial: s.zero(), slabs: (0..4).map(|m| s.interpolate(|x| eigen(0.1 * m as f64, x))).collect() };
        let doubled = SpaceTimeDG0 { initial: s.zero(), slabs: traj.slabs.iter().map(|v| v.scaled(2.0)).collect() };
        let e1 = error_norms(&s, &g, &traj, &eigen, 3);
        let e2 = error_norms(&s, &g, &doubled, &|t, x| 2.0 * eigen(t, x), 3);
        assert!((e2.l2l2 - 2.0 * e1.l2l2).abs() < 1e-13);
        assert!((e2.linf_l2 - 2.0 * e1.linf_l2).abs() < 1e-13);
        assert!((e2.linf_linf - 2.0 * e1.linf_linf).abs() < 1e-13);
    }

    #[test]
    fn eigenfunction_march_stays_bounded() {
        for level in 1..=3 {
            let s = FeSpace::new(build_unit_square_mesh(level));
            let g = TimeGrid::uniform(0.1, 4 << (2 * level)).unwrap();
            let (u, _) = dg0::march(&s, &g, &Nonlinearity::zero(), None, &|x| eigen(0.0, x), &SolverOptions::default()).unwrap();
            assert!(boundedness_check(&u, 1.0).1);
        }
    }

    #[test]
    fn deltah_quotients_on_one_dof() {
        let s = FeSpace::new(build_unit_square_mesh(0));
        let (q1, q2) = deltah_quotients(&s, &FeFunction::new(vec![1.0]), CgOptions::default()).unwrap();
        // Δ_h[1] = −32·φ, ‖φ‖_{L²} = 1/√8 (mass 1/8), ‖φ‖_{L¹} = 1/4 (load)
        assert!((q1 - 1.0 / (32.0 / 8f64.sqrt())).abs() < 1e-12);
        assert!((q2 - (1.0 / 8f64.sqrt()) / 8.0).abs() < 1e-12);
        assert!(deltah_quotients(&s, &s.zero(), CgOptions::default()).is_err());
    }

    #[test]
    fn sup_constant_dominates_samples() {
        let cg = CgOptions { tol: 1e-12, max_iters: 10_000 };
        for level in 0..=2 {
            let s = FeSpace::new(build_unit_square_mesh(level));
            let c = deltah_sup_constant(&s, cg).unwrap();
            for w in random_fe_functions(&s, 5, 3) {
                assert!(deltah_quotients(&s, &w, cg).unwrap().0 <= c * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn sup_constant_settles_across_levels() {
        let cg = CgOptions { tol: 1e-12, max_iters: 10_000 };
        let c: Vec<f64> = (0..=4)
            .map(|l| deltah_sup_constant(&FeSpace::new(build_unit_square_mesh(l)), cg).unwrap())
            .collect();
        // one DOF: ‖K⁻¹e‖_M = (1/4)·√(1/8)
        assert!((c[0] - 0.25 / 8f64.sqrt()).abs() < 1e-12);
        let inc: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
        for w in inc.windows(2).skip(1) {
            assert!(w[1].abs() <= 0.5 * w[0].abs(), "{c:?}");
        }
        assert!(c[4] / c[1] < 1.1, "{c:?}");
    }

    #[test]
    fn random_functions_are_seeded() {
        let s = FeSpace::new(build_unit_square_mesh(2));
        assert_eq!(random_fe_functions(&s, 3, 11), random_fe_functions(&s, 3, 11));
        assert_ne!(random_fe_functions(&s, 1, 11), random_fe_functions(&s, 1, 12));
    }

    #[test]
    fn probe_is_finite_and_scale_invariant() {
        let s = FeSpace::new(build_unit_square_mesh(2));
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let o = SolverOptions::default();
        let src = |_: f64, x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        let src10 = |t: f64, x: [f64; 2]| 10.0 * src(t, x);
        for bval in [0.0, -0.5, 1.0] {
            let b = move |_: f64, _: [f64; 2]| bval;
            let r = regularity_probe(&s, &g, &b, &src, &o).unwrap();
            let r10 = regularity_probe(&s, &g, &b, &src10, &o).unwrap();
            for (a, c) in [
                (r.lemma1_ratio, r10.lemma1_ratio),
                (r.lemma2_ratio, r10.lemma2_ratio),
                (r.lemma4_ratio, r10.lemma4_ratio),
                (r.deltah_linf_l2, r10.deltah_linf_l2),
                (r.deltah_l2_l1, r10.deltah_l2_l1),
            ] {
                assert!(a.is_finite() && a > 0.0);
                assert!((a - c).abs() < 1e-9 * a, "{a} vs {c}");
            }
        }
        assert!(regularity_probe(&s, &g, &|_, _| 0.0, &|_, _| 0.0, &o).is_err());
    }
}
