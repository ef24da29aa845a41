//! Continuous piecewise-linear finite elements with homogeneous Dirichlet
//! conditions on a [`TriMesh`].

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CgOptions, CsrMatrix, SparsityPattern};
use crate::mesh::TriMesh;
use crate::quadrature::TriangleRule;

/// A function in V_h, stored by its values at the interior vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeFunction {
    pub coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn new(coefficients: Vec<f64>) -> Self {
        FeFunction { coefficients }
    }

    pub fn zeros(n: usize) -> Self {
        FeFunction { coefficients: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn scaled(&self, c: f64) -> Self {
        FeFunction { coefficients: self.coefficients.iter().map(|v| c * v).collect() }
    }

    /// Nodal maximum norm.
    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for &FeFunction {
    type Output = FeFunction;
    fn add(self, rhs: &FeFunction) -> FeFunction {
        assert_eq!(self.len(), rhs.len());
        FeFunction { coefficients: self.coefficients.iter().zip(&rhs.coefficients).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &FeFunction {
    type Output = FeFunction;
    fn sub(self, rhs: &FeFunction) -> FeFunction {
        assert_eq!(self.len(), rhs.len());
        FeFunction { coefficients: self.coefficients.iter().zip(&rhs.coefficients).map(|(a, b)| a - b).collect() }
    }
}

impl Mul<&FeFunction> for f64 {
    type Output = FeFunction;
    fn mul(self, rhs: &FeFunction) -> FeFunction {
        rhs.scaled(self)
    }
}

/// Sparsity of P1 couplings between interior DOFs.
pub fn p1_pattern(mesh: &TriMesh) -> SparsityPattern {
    let mut rows = vec![Vec::new(); mesh.num_dofs()];
    for cell in &mesh.cells {
        let dofs = cell.map(|v| mesh.dof_of_vertex(v));
        for a in dofs.iter().flatten() {
            for b in dofs.iter().flatten() {
                rows[*a].push(*b);
            }
        }
    }
    SparsityPattern::from_rows(rows)
}

/// Gradients of the three barycentric coordinates on cell `c`.
pub fn barycentric_gradients(mesh: &TriMesh, c: usize) -> [[f64; 2]; 3] {
    let [p, q, r] = mesh.cell_coords(c);
    let det = 2.0 * mesh.cell_area(c);
    [
        [(q[1] - r[1]) / det, (r[0] - q[0]) / det],
        [(r[1] - p[1]) / det, (p[0] - r[0]) / det],
        [(p[1] - q[1]) / det, (q[0] - p[0]) / det],
    ]
}

fn assemble_cellwise(mesh: &TriMesh, pattern: Arc<SparsityPattern>, local: impl Fn(usize) -> [[f64; 3]; 3]) -> CsrMatrix {
    let mut a = CsrMatrix::zeros(pattern);
    for (c, cell) in mesh.cells.iter().enumerate() {
        let ke = local(c);
        let dofs = cell.map(|v| mesh.dof_of_vertex(v));
        for i in 0..3 {
            let Some(gi) = dofs[i] else { continue };
            for j in 0..3 {
                if let Some(gj) = dofs[j] {
                    a.add(gi, gj, ke[i][j]);
                }
            }
        }
    }
    a
}

fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let (d, o) = (area / 6.0, area / 12.0);
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn local_stiffness(area: f64, g: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let mut ke = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ke[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    ke
}

/// Exact P1 mass matrix on interior DOFs.
pub fn assemble_mass(mesh: &TriMesh) -> CsrMatrix {
    assemble_cellwise(mesh, Arc::new(p1_pattern(mesh)), |c| local_mass(mesh.cell_area(c)))
}

/// Exact P1 stiffness matrix on interior DOFs.
pub fn assemble_stiffness(mesh: &TriMesh) -> CsrMatrix {
    assemble_cellwise(mesh, Arc::new(p1_pattern(mesh)), |c| {
        local_stiffness(mesh.cell_area(c), &barycentric_gradients(mesh, c))
    })
}

/// Residual and Jacobian of v ↦ ∫ d̄(x, v) φ_i dx.
#[derive(Debug, Clone)]
pub struct SemilinearAssembly {
    pub residual: Vec<f64>,
    pub jacobian: CsrMatrix,
    /// Smallest ∂_u d̄ seen at any quadrature point, with its location.
    pub min_derivative: f64,
    pub min_derivative_at: [f64; 2],
}

/// P1 space on a mesh with cached mass/stiffness matrices and quadrature data.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: TriMesh,
    rule: TriangleRule,
    pattern: Arc<SparsityPattern>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    cell_dofs: Vec<[Option<usize>; 3]>,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    /// Physical quadrature points, `rule.len()` per cell.
    qpoints: Vec<[f64; 2]>,
}

impl FeSpace {
    /// Space with the degree-4 rule for loads and nonlinear terms.
    pub fn new(mesh: TriMesh) -> Self {
        Self::with_rule(mesh, TriangleRule::degree4())
    }

    pub fn with_rule(mesh: TriMesh, rule: TriangleRule) -> Self {
        let pattern = Arc::new(p1_pattern(&mesh));
        let mass = assemble_cellwise(&mesh, pattern.clone(), |c| local_mass(mesh.cell_area(c)));
        let stiffness = assemble_cellwise(&mesh, pattern.clone(), |c| {
            local_stiffness(mesh.cell_area(c), &barycentric_gradients(&mesh, c))
        });
        let cell_dofs = mesh.cells.iter().map(|cell| cell.map(|v| mesh.dof_of_vertex(v))).collect();
        let areas = (0..mesh.num_cells()).map(|c| mesh.cell_area(c)).collect();
        let grads = (0..mesh.num_cells()).map(|c| barycentric_gradients(&mesh, c)).collect();
        let mut qpoints = Vec::with_capacity(mesh.num_cells() * rule.len());
        for c in 0..mesh.num_cells() {
            let [p, q, r] = mesh.cell_coords(c);
            for l in &rule.points {
                qpoints.push([
                    l[0] * p[0] + l[1] * q[0] + l[2] * r[0],
                    l[0] * p[1] + l[1] * q[1] + l[2] * r[1],
                ]);
            }
        }
        FeSpace { mesh, rule, pattern, mass, stiffness, cell_dofs, areas, grads, qpoints }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn zero(&self) -> FeFunction {
        FeFunction::zeros(self.num_dofs())
    }

    /// Quadrature points of cell `c`.
    pub fn cell_points(&self, c: usize) -> &[[f64; 2]] {
        let nq = self.rule.len();
        &self.qpoints[c * nq..(c + 1) * nq]
    }

    /// All quadrature points with their physical weights, cell by cell.
    pub fn quadrature(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let nq = self.rule.len();
        self.qpoints
            .iter()
            .enumerate()
            .map(move |(i, &x)| (x, self.areas[i / nq] * self.rule.weights[i % nq]))
    }

    /// Values of v_h at all quadrature points, in [`Self::quadrature`] order.
    pub fn values_at_quadrature(&self, v: &FeFunction) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.qpoints.len());
        for dofs in &self.cell_dofs {
            let local = dofs.map(|d| d.map_or(0.0, |d| v.coefficients[d]));
            for l in &self.rule.points {
                out.push(l[0] * local[0] + l[1] * local[1] + l[2] * local[2]);
            }
        }
        out
    }

    /// Nodal interpolant of `f` (boundary values ignored).
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> FeFunction {
        FeFunction::new((0..self.num_dofs()).map(|d| f(self.mesh.vertices[self.mesh.vertex_of_dof(d)])).collect())
    }

    /// Values of v_h at every mesh vertex (zero on the boundary).
    pub fn vertex_values(&self, v: &FeFunction) -> Vec<f64> {
        (0..self.mesh.num_vertices())
            .map(|i| self.mesh.dof_of_vertex(i).map_or(0.0, |d| v.coefficients[d]))
            .collect()
    }

    /// Point evaluation of v_h (linear search for the containing cell).
    pub fn eval_at(&self, v: &FeFunction, x: [f64; 2]) -> Option<f64> {
        let c = self.mesh.locate(x)?;
        let l = self.mesh.barycentric(c, x);
        Some(
            self.cell_dofs[c]
                .iter()
                .zip(l)
                .map(|(d, li)| d.map_or(0.0, |d| li * v.coefficients[d]))
                .sum(),
        )
    }

    /// b_i ≈ ∫ g φ_i dx.
    pub fn assemble_load(&self, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.num_dofs()];
        let nq = self.rule.len();
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            if dofs.iter().all(Option::is_none) {
                continue;
            }
            let area = self.areas[c];
            for q in 0..nq {
                let gx = g(self.qpoints[c * nq + q]) * area * self.rule.weights[q];
                let l = &self.rule.points[q];
                for i in 0..3 {
                    if let Some(d) = dofs[i] {
                        b[d] += gx * l[i];
                    }
                }
            }
        }
        b
    }

    /// Residual ∫ d̄(x, u_h) φ_i dx and Jacobian ∫ ∂_u d̄(x, u_h) φ_j φ_i dx.
    pub fn assemble_semilinear(
        &self,
        u: &FeFunction,
        dbar: impl Fn([f64; 2], f64) -> (f64, f64),
    ) -> Result<SemilinearAssembly> {
        let mut residual = vec![0.0; self.num_dofs()];
        let mut jacobian = CsrMatrix::zeros(self.pattern.clone());
        let mut min_derivative = f64::INFINITY;
        let mut min_derivative_at = [0.0; 2];
        let nq = self.rule.len();
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            let local = dofs.map(|d| d.map_or(0.0, |d| u.coefficients[d]));
            let area = self.areas[c];
            let mut je = [[0.0; 3]; 3];
            for q in 0..nq {
                let x = self.qpoints[c * nq + q];
                let l = &self.rule.points[q];
                let uq = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
                let (val, der) = dbar(x, uq);
                if !val.is_finite() || !der.is_finite() {
                    let value = if val.is_finite() { der } else { val };
                    return Err(Error::NonFinite { x: x[0], y: x[1], u: uq, value });
                }
                if der < min_derivative {
                    min_derivative = der;
                    min_derivative_at = x;
                }
                let w = area * self.rule.weights[q];
                for i in 0..3 {
                    let Some(d) = dofs[i] else { continue };
                    residual[d] += w * val * l[i];
                    for j in 0..3 {
                        je[i][j] += w * der * l[i] * l[j];
                    }
                }
            }
            for i in 0..3 {
                let Some(gi) = dofs[i] else { continue };
                for j in 0..3 {
                    if let Some(gj) = dofs[j] {
                        jacobian.add(gi, gj, je[i][j]);
                    }
                }
            }
        }
        Ok(SemilinearAssembly { residual, jacobian, min_derivative, min_derivative_at })
    }

    /// Quadrature-weighted mass ∫ w(x) φ_j φ_i dx.
    pub fn weighted_mass(&self, weight: impl Fn([f64; 2]) -> f64) -> Result<SemilinearAssembly> {
        self.assemble_semilinear(&self.zero(), |x, u| {
            let w = weight(x);
            (w * u, w)
        })
    }

    /// L²-orthogonal projection P_h f.
    pub fn l2_project(&self, f: impl Fn([f64; 2]) -> f64, cg: CgOptions) -> Result<FeFunction> {
        let b = self.assemble_load(f);
        Ok(FeFunction::new(linalg::solve_spd(&self.mass, &b, cg)?.x))
    }

    /// Ritz projection R_h u from the gradient of u.
    pub fn ritz_project(&self, grad_u: impl Fn([f64; 2]) -> [f64; 2], cg: CgOptions) -> Result<FeFunction> {
        let mut b = vec![0.0; self.num_dofs()];
        let nq = self.rule.len();
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            let g = &self.grads[c];
            let area = self.areas[c];
            for q in 0..nq {
                let du = grad_u(self.qpoints[c * nq + q]);
                let w = area * self.rule.weights[q];
                for i in 0..3 {
                    if let Some(d) = dofs[i] {
                        b[d] += w * (du[0] * g[i][0] + du[1] * g[i][1]);
                    }
                }
            }
        }
        Ok(FeFunction::new(linalg::solve_spd(&self.stiffness, &b, cg)?.x))
    }

    /// Δ_h v, the solution w of M w = −K v.
    pub fn discrete_laplacian(&self, v: &FeFunction, cg: CgOptions) -> Result<FeFunction> {
        let mut rhs = self.stiffness.mul_vec(&v.coefficients);
        rhs.iter_mut().for_each(|r| *r = -*r);
        Ok(FeFunction::new(linalg::solve_spd(&self.mass, &rhs, cg)?.x))
    }

    /// (‖v‖_{L²}, ‖∇v‖_{L²}, max |v|), all exact for P1.
    pub fn fe_norms(&self, v: &FeFunction) -> (f64, f64, f64) {
        (self.l2_norm(v), self.stiffness.inner(&v.coefficients, &v.coefficients).max(0.0).sqrt(), v.max_abs())
    }

    pub fn l2_norm(&self, v: &FeFunction) -> f64 {
        self.mass.inner(&v.coefficients, &v.coefficients).max(0.0).sqrt()
    }

    /// (v, w)_{L²(Ω)}.
    pub fn l2_inner(&self, v: &FeFunction, w: &FeFunction) -> f64 {
        self.mass.inner(&v.coefficients, &w.coefficients)
    }

    /// (∇v, ∇w)_{L²(Ω)}.
    pub fn h1_inner(&self, v: &FeFunction, w: &FeFunction) -> f64 {
        self.stiffness.inner(&v.coefficients, &w.coefficients)
    }

    /// ‖v‖_{L¹(Ω)} by quadrature of |v_h|.
    pub fn l1_norm(&self, v: &FeFunction) -> f64 {
        self.values_at_quadrature(v).iter().zip(self.quadrature()).map(|(u, (_, w))| w * u.abs()).sum()
    }

    /// ‖g‖_{L²(Ω)} of a continuous function by quadrature.
    pub fn l2_norm_of(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.quadrature().map(|(x, w)| w * g(x).powi(2)).sum::<f64>().sqrt()
    }

    /// ‖g‖_{L¹(Ω)} of a continuous function by quadrature.
    pub fn l1_norm_of(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.quadrature().map(|(x, w)| w * g(x).abs()).sum()
    }
}
