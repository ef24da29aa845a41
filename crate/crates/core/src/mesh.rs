//! Structured triangulations of the unit square.
//!
//! Level `ℓ` has `n = 2^(ℓ+1)` subdivisions per side; every small square is
//! split along its lower-left to upper-right diagonal. Vertices are numbered
//! lexicographically by `(y, x)` and interior vertices receive contiguous
//! degree-of-freedom indices in the same order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Maximal cell diameter.
    pub h: f64,
    pub level: usize,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
}

impl TriMesh {
    fn from_parts(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, level: usize) -> Self {
        let boundary: Vec<bool> = vertices.iter().map(|&p| on_boundary(p)).collect();
        let mut dof_of_vertex = vec![None; vertices.len()];
        let mut vertex_of_dof = Vec::new();
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                dof_of_vertex[v] = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }
        let mut mesh = TriMesh { vertices, cells, boundary, h: 0.0, level, dof_of_vertex, vertex_of_dof };
        mesh.h = (0..mesh.cells.len()).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of interior degrees of freedom.
    pub fn num_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    pub fn vertex_of_dof(&self, dof: usize) -> usize {
        self.vertex_of_dof[dof]
    }

    /// Interior DOF count together with the vertex → DOF map.
    pub fn interior_dofs(&self) -> (usize, &[Option<usize>]) {
        (self.num_dofs(), &self.dof_of_vertex)
    }

    pub fn cell_coords(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Signed area (positive for counterclockwise cells).
    pub fn cell_area(&self, c: usize) -> f64 {
        let [p, q, r] = self.cell_coords(c);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let [p, q, r] = self.cell_coords(c);
        dist(p, q).max(dist(q, r)).max(dist(r, p))
    }

    /// max over cells of diam(τ)/|τ|^(1/2).
    pub fn shape_constant(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_diameter(c) / self.cell_area(c).sqrt())
            .fold(0.0, f64::max)
    }

    /// Smallest C with h ≤ C |τ|^(1/2) for every cell.
    pub fn quasi_uniformity_constant(&self) -> f64 {
        let min_area = (0..self.num_cells()).map(|c| self.cell_area(c)).fold(f64::INFINITY, f64::min);
        self.h / min_area.sqrt()
    }

    /// Edge multiplicities keyed by sorted vertex pairs.
    pub fn edge_multiplicities(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for cell in &self.cells {
            for k in 0..3 {
                let (a, b) = (cell[k], cell[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge is shared by two cells, or by one cell and lies on ∂Ω.
    pub fn is_conforming(&self) -> bool {
        self.edge_multiplicities().iter().all(|(&(a, b), &count)| match count {
            2 => true,
            1 => {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                (p[0] == q[0] && (p[0] == 0.0 || p[0] == 1.0)) || (p[1] == q[1] && (p[1] == 0.0 || p[1] == 1.0))
            }
            _ => false,
        })
    }

    /// Writes the plain-text dump: a `VERTICES n CELLS m` header, one
    /// `x y boundary_flag` line per vertex, one `i j k` line per cell.
    pub fn to_dump_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "VERTICES {} CELLS {}", self.num_vertices(), self.num_cells());
        for (p, &b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{} {} {}", p[0], p[1], u8::from(b));
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_dump_string().as_bytes())?;
        Ok(())
    }

    /// Index of a cell containing `x` (closed cells, first match).
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        (0..self.num_cells()).find(|&c| {
            let l = self.barycentric(c, x);
            l.iter().all(|&v| v >= -1e-12)
        })
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: [f64; 2]) -> [f64; 3] {
        let [p, q, r] = self.cell_coords(c);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        let l1 = ((x[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (x[1] - p[1])) / det;
        let l2 = ((q[0] - p[0]) * (x[1] - p[1]) - (x[0] - p[0]) * (q[1] - p[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

fn on_boundary(p: [f64; 2]) -> bool {
    p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Structured mesh with `2^(level+1)` subdivisions per side.
pub fn build_unit_square_mesh(level: usize) -> TriMesh {
    let n = 1usize << (level + 1);
    let nf = n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v0, v1, v2, v3) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push([v0, v1, v2]);
            cells.push([v0, v2, v3]);
        }
    }
    TriMesh::from_parts(vertices, cells, level)
}

/// Red refinement: every triangle is split into four congruent children
/// through its edge midpoints. Vertices are renumbered by `(y, x)`.
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for &[a, b, c] in &mesh.cells {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        cells.push([a, ab, ca]);
        cells.push([ab, b, bc]);
        cells.push([ca, bc, c]);
        cells.push([ab, bc, ca]);
    }

    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (vertices[i], vertices[j]);
        p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0]))
    });
    let mut new_index = vec![0; vertices.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let sorted: Vec<[f64; 2]> = order.iter().map(|&o| vertices[o]).collect();
    let cells = cells.into_iter().map(|c| c.map(|v| new_index[v])).collect();
    TriMesh::from_parts(sorted, cells, mesh.level + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn level0_counts() {
        let m = build_unit_square_mesh(0);
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_dofs(), 1);
        assert!((m.h - 2f64.sqrt() / 2.0).abs() < 1e-15);
        for c in 0..m.num_cells() {
            assert!((m.cell_area(c) - 0.125).abs() < 1e-15);
        }
        assert_eq!(m.vertex_of_dof(0), 4);
        assert_eq!(m.vertices[4], [0.5, 0.5]);
    }

    #[test]
    fn level1_counts() {
        let m = build_unit_square_mesh(1);
        assert_eq!(m.num_vertices(), 25);
        assert_eq!(m.num_cells(), 32);
        assert_eq!(m.num_dofs(), 9);
        assert!((m.h - 2f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn interior_dof_counts_follow_lattice() {
        for (level, expected) in [(0, 1), (1, 9), (2, 49), (3, 225)] {
            let m = build_unit_square_mesh(level);
            let (count, map) = m.interior_dofs();
            assert_eq!(count, expected);
            let n = (1usize << (level + 1)) - 1;
            assert_eq!(count, n * n);
            // bijection
            let mut seen = vec![false; count];
            for (v, d) in map.iter().enumerate() {
                if let Some(d) = d {
                    assert!(!seen[*d]);
                    seen[*d] = true;
                    assert_eq!(m.vertex_of_dof(*d), v);
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn family_invariants() {
        for level in 0..=4 {
            let m = build_unit_square_mesh(level);
            let total: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!((0..m.num_cells()).all(|c| m.cell_area(c) > 0.0));
            for c in 0..m.num_cells() {
                let r = m.cell_diameter(c) / m.cell_area(c).sqrt();
                assert!((r - 2.0).abs() < 1e-12);
            }
            assert!((m.quasi_uniformity_constant() - 2.0).abs() < 1e-12);
            assert!(m.is_conforming());
            let edges = m.edge_multiplicities();
            let n = 1usize << (level + 1);
            let boundary_edges = edges.values().filter(|&&c| c == 1).count();
            assert_eq!(boundary_edges, 4 * n);
            for (v, &b) in m.boundary.iter().enumerate() {
                let p = m.vertices[v];
                assert_eq!(b, p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0);
            }
        }
    }

    fn cell_set(m: &TriMesh) -> BTreeSet<Vec<(u64, u64)>> {
        m.cells
            .iter()
            .map(|c| {
                let mut pts: Vec<(u64, u64)> =
                    c.iter().map(|&v| (m.vertices[v][0].to_bits(), m.vertices[v][1].to_bits())).collect();
                pts.sort();
                pts
            })
            .collect()
    }

    #[test]
    fn refinement_reproduces_structured_family() {
        let m0 = build_unit_square_mesh(0);
        let m1 = refine_uniform(&m0);
        assert_eq!(m1.num_cells(), 32);
        assert!((m1.h - 2f64.sqrt() / 4.0).abs() < 1e-15);
        let m2 = refine_uniform(&m1);
        let direct = build_unit_square_mesh(2);
        assert_eq!(m2.level, 2);
        assert_eq!(m2.vertices, direct.vertices);
        assert_eq!(m2.boundary, direct.boundary);
        assert_eq!(cell_set(&m2), cell_set(&direct));
        assert!((m2.shape_constant() - m0.shape_constant()).abs() < 1e-12);
        assert!(m2.is_conforming());
        assert!((0..m2.num_cells()).all(|c| m2.cell_area(c) > 0.0));
    }

    #[test]
    fn boundary_midpoints_stay_on_boundary() {
        let m0 = build_unit_square_mesh(1);
        let m1 = refine_uniform(&m0);
        for (&(a, b), &count) in &m0.edge_multiplicities() {
            if count == 1 {
                let (p, q) = (m0.vertices[a], m0.vertices[b]);
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                let v = m1.vertices.iter().position(|&x| x == mid).unwrap();
                assert!(m1.boundary[v]);
            }
        }
    }

    #[test]
    fn dump_format() {
        let m = build_unit_square_mesh(0);
        let s = m.to_dump_string();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "VERTICES 9 CELLS 8");
        assert_eq!(lines.len(), 1 + 9 + 8);
        assert_eq!(lines[5], "0.5 0.5 0");
        assert_eq!(lines[1], "0 0 1");
        assert_eq!(lines[10], "0 1 4");
    }

    #[test]
    fn locate_and_barycentric() {
        let m = build_unit_square_mesh(1);
        let x = [0.3, 0.7];
        let c = m.locate(x).unwrap();
        let l = m.barycentric(c, x);
        let [p, q, r] = m.cell_coords(c);
        for d in 0..2 {
            assert!((l[0] * p[d] + l[1] * q[d] + l[2] * r[d] - x[d]).abs() < 1e-14);
        }
    }
}
