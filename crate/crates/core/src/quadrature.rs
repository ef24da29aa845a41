//! Quadrature rules on triangles (barycentric) and on intervals (Gauss–Legendre).

/// Symmetric quadrature rule on the reference triangle.
///
/// Points are barycentric triples; weights are fractions of the cell area
/// and sum to one, so the physical weight of a point is `weight * area`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// One-point centroid rule, exact for degree 1.
    pub fn centroid() -> Self {
        let third = 1.0 / 3.0;
        TriangleRule { degree: 1, points: vec![[third; 3]], weights: vec![1.0] }
    }

    /// Three-point interior rule, exact for degree 2.
    pub fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        TriangleRule {
            degree: 2,
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Six-point symmetric rule (Strang–Fix / Dunavant), exact for degree 4.
    #[allow(clippy::excessive_precision)]
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_964_886_32;
        const W1: f64 = 0.223_381_589_678_011_465_70;
        const A2: f64 = 0.091_576_213_509_770_743_46;
        const W2: f64 = 0.109_951_743_655_321_867_64;
        let (b1, b2) = (1.0 - 2.0 * A1, 1.0 - 2.0 * A2);
        TriangleRule {
            degree: 4,
            points: vec![
                [b1, A1, A1],
                [A1, b1, A1],
                [A1, A1, b1],
                [b2, A2, A2],
                [A2, b2, A2],
                [A2, A2, b2],
            ],
            weights: vec![W1, W1, W1, W2, W2, W2],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for TriangleRule {
    fn default() -> Self {
        Self::degree4()
    }
}

/// Gauss–Legendre rule on an interval, stored on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    ///
    /// Panics when `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`; weights sum to `b - a`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫_T λ1^a λ2^b λ3^c dx = 2|T| a! b! c! / (a+b+c+2)!
    fn barycentric_moment(a: u32, b: u32, c: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn triangle_rules_integrate_monomials_up_to_their_degree() {
        for rule in [TriangleRule::centroid(), TriangleRule::degree2(), TriangleRule::degree4()] {
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let deg = rule.degree as u32;
            for a in 0..=deg {
                for b in 0..=deg - a {
                    for c in 0..=deg - a - b {
                        let q: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum();
                        let exact = barycentric_moment(a, b, c);
                        assert!((q - exact).abs() < 1e-14, "deg {deg}: ({a},{b},{c}) {q} vs {exact}");
                    }
                }
            }
        }
    }

    #[test]
    fn degree4_rule_is_not_exact_for_degree5() {
        let rule = TriangleRule::degree4();
        let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0].powi(5)).sum();
        assert!((q - barycentric_moment(5, 0, 0)).abs() > 1e-8);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=6usize {
            let rule = GaussLegendre::new(n);
            for p in 0..(2 * n) as i32 {
                let q: f64 = rule.on_interval(0.0, 1.0).map(|(t, w)| w * t.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn gauss_legendre_three_point_nodes() {
        let rule = GaussLegendre::new(3);
        let r = (0.6f64).sqrt();
        assert!((rule.nodes[0] + r).abs() < 1e-15);
        assert_eq!(rule.nodes[1], 0.0);
        assert!((rule.nodes[2] - r).abs() < 1e-15);
        assert!((rule.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }
}
