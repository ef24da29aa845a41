use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use dgheat::analysis::eoc;
use dgheat::dg0::{self, bilinear_dual, bilinear_primal, jumps, SolverOptions, SpaceTimeDG0};
use dgheat::linalg::{self, CgOptions};
use dgheat::time_grid::temporal_mean;
use dgheat::{build_unit_square_mesh, FeFunction, FeSpace, Nonlinearity, StudyConfig, TimeGrid};

fn level1() -> FeSpace {
    FeSpace::new(build_unit_square_mesh(1))
}

fn vec9() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_and_stiffness_are_symmetric_forms(a in vec9(), b in vec9()) {
        let s = level1();
        assert_relative_eq!(s.mass().inner(&a, &b), s.mass().inner(&b, &a), max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(s.stiffness().inner(&a, &b), s.stiffness().inner(&b, &a), max_relative = 1e-12, epsilon = 1e-12);
        prop_assert!(s.mass().inner(&a, &a) >= 0.0);
        prop_assert!(s.stiffness().inner(&a, &a) >= 0.0);
    }

    #[test]
    fn cg_solves_shifted_systems(rhs in vec9(), k in 1e-4..1.0f64) {
        let s = level1();
        let a = dgheat::CsrMatrix::linear_combination(&[(1.0, s.mass()), (k, s.stiffness())]);
        let x = linalg::solve_spd(&a, &rhs, CgOptions { tol: 1e-12, max_iters: 1000 }).unwrap().x;
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
        prop_assert!(linalg::norm(&r) <= 1e-10 * (1.0 + linalg::norm(&rhs)));
    }

    #[test]
    fn discrete_laplacian_is_adjoint(v in vec9(), w in vec9()) {
        let s = level1();
        let lap = s.discrete_laplacian(&FeFunction::new(v.clone()), CgOptions { tol: 1e-13, max_iters: 1000 }).unwrap();
        let lhs = -s.mass().inner(&lap.coefficients, &w);
        let rhs = s.stiffness().inner(&v, &w);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn eoc_recovers_power_laws(c in 1e-3..1e3f64, p in 0.5..4.0f64, h0 in 0.05..1.0f64) {
        let hs = [h0, h0 / 2.0, h0 / 4.0];
        let errs: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
        for r in eoc(&errs, &hs).unwrap() {
            assert_relative_eq!(r, p, max_relative = 1e-10);
        }
    }

    #[test]
    fn truncation_agrees_inside_and_is_linear_outside(r in 0.5..4.0f64, u in -20.0..20.0f64) {
        let d = Nonlinearity::builtin("cubic", 0.0).unwrap();
        let t = d.truncate(r).unwrap();
        let x = [0.3, 0.4];
        if u.abs() <= r {
            prop_assert_eq!(t.eval(0.0, x, u), d.eval(0.0, x, u));
        } else {
            let s = u.signum();
            let expected = d.eval(0.0, x, s * r) + (u - s * r) * d.deriv(0.0, x, s * r);
            assert_relative_eq!(t.eval(0.0, x, u), expected, max_relative = 1e-12);
        }
        prop_assert!(t.deriv(0.0, x, u) <= 3.0 * r * r * (1.0 + 1e-12));
    }

    #[test]
    fn temporal_mean_of_linear_functions(a in -3.0..3.0f64, b in -3.0..3.0f64, m in 1usize..=5) {
        let g = TimeGrid::uniform(2.0, 5).unwrap();
        let (t0, t1) = g.slab(m).unwrap();
        let mean = temporal_mean(&g, |t| a + b * t, m, 3).unwrap();
        assert_relative_eq!(mean, a + b * 0.5 * (t0 + t1), epsilon = 1e-13);
    }

    #[test]
    fn jumps_telescope(values in prop::collection::vec(vec9(), 1..6), init in vec9()) {
        let traj = SpaceTimeDG0 {
            initial: FeFunction::new(init),
            slabs: values.into_iter().map(FeFunction::new).collect(),
        };
        let mut sum = FeFunction::zeros(9);
        for j in jumps(&traj) {
            sum = &sum + &j;
        }
        let direct = traj.slabs.last().unwrap() - &traj.initial;
        prop_assert!((&sum - &direct).max_abs() <= 1e-12);
    }

    #[test]
    fn bilinear_forms_agree(u in prop::collection::vec(vec9(), 4), phi in prop::collection::vec(vec9(), 4)) {
        let s = level1();
        let g = TimeGrid::from_nodes(vec![0.0, 0.2, 0.3, 0.7, 1.0]).unwrap();
        let wrap = |v: Vec<Vec<f64>>| SpaceTimeDG0 { initial: FeFunction::zeros(9), slabs: v.into_iter().map(FeFunction::new).collect() };
        let (u, phi) = (wrap(u), wrap(phi));
        let p = bilinear_primal(&s, &g, &u, &phi);
        let q = bilinear_dual(&s, &g, &u, &phi);
        prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
    }

    #[test]
    fn config_echo_round_trips(levels in 2usize..5, sigma in 0.5..3.0f64, t in 0.01..5.0f64, seed in any::<u64>()) {
        let mut c = StudyConfig::preset("cubic_mms").unwrap();
        c.levels = levels;
        c.sigma = sigma;
        c.t_final = t;
        c.seed = seed;
        prop_assert_eq!(StudyConfig::parse(&c.echo()).unwrap(), c);
    }
}

#[test]
fn marches_are_bit_identical() {
    let s = FeSpace::new(build_unit_square_mesh(3));
    let g = TimeGrid::uniform(1.0, 16).unwrap();
    let d = Nonlinearity::builtin("allen_cahn", 0.5).unwrap();
    let f = |t: f64, x: [f64; 2]| (1.0 + t) * (PI * x[0]).sin() * x[1] * (1.0 - x[1]);
    let u0 = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let o = SolverOptions::default();
    let (a, ra) = dg0::march(&s, &g, &d, Some(&f), &u0, &o).unwrap();
    let (b, rb) = dg0::march(&s, &g, &d, Some(&f), &u0, &o).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert!(ra.converged);
    assert!(ra.steps.iter().all(|st| st.residual <= o.newton_tol * 10.0));
}

#[test]
fn projection_rates_from_level_two() {
    let cg = CgOptions { tol: 1e-12, max_iters: 10_000 };
    let u = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let grad = |x: [f64; 2]| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()];
    let mut hs = Vec::new();
    let mut l2 = Vec::new();
    let mut ritz = Vec::new();
    for level in 2..=5 {
        let s = FeSpace::new(build_unit_square_mesh(level));
        let err = |v: &FeFunction| {
            let vals = s.values_at_quadrature(v);
            s.quadrature().zip(&vals).map(|((x, w), p)| w * (u(x) - p).powi(2)).sum::<f64>().sqrt()
        };
        hs.push(s.mesh().h);
        l2.push(err(&s.l2_project(u, cg).unwrap()));
        ritz.push(err(&s.ritz_project(grad, cg).unwrap()));
    }
    for r in eoc(&l2, &hs).unwrap().into_iter().chain(eoc(&ritz, &hs).unwrap()) {
        assert!((1.8..=2.2).contains(&r), "{r}");
    }
}
