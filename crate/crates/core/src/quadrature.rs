//! Gauss–Legendre and collapsed (Duffy) triangle quadrature.

use std::f64::consts::PI;

use crate::mesh::{Point2, StarDomain, Triangulation};

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
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
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Barycentric nodes and weights (summing to 1) exact for polynomials of
/// degree `2n - 2` on a triangle.
pub fn triangle_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let gl = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            // (s, t) ∈ [0,1]² ↦ λ = (s, (1−s)t, (1−s)(1−t)); Jacobian (1−s).
            let l0 = s;
            let l1 = (1.0 - s) * t;
            out.push(([l0, l1, 1.0 - l0 - l1], 2.0 * ws * wt * (1.0 - s)));
        }
    }
    out
}

/// Rule with at least the given polynomial exactness.
pub fn triangle_rule_exact(degree: usize) -> Vec<([f64; 3], f64)> {
    triangle_rule(degree.div_ceil(2) + 1)
}

fn integrate_triangle(
    tri: [Point2; 3],
    f: &impl Fn(Point2) -> f64,
    rule: &[([f64; 3], f64)],
    subdiv: usize,
) -> f64 {
    let [a, b, c] = tri;
    let area = 0.5 * (b - a).cross(c - a).abs();
    let s = subdiv.max(1);
    let h = 1.0 / s as f64;
    let at = |i: usize, j: usize| a + (b - a) * (i as f64 * h) + (c - a) * (j as f64 * h);
    let mut sum = 0.0;
    let mut sub = |p: [Point2; 3]| {
        for &(l, w) in rule {
            sum += w * f(p[0] * l[0] + p[1] * l[1] + p[2] * l[2]);
        }
    };
    for i in 0..s {
        for j in 0..s - i {
            sub([at(i, j), at(i + 1, j), at(i, j + 1)]);
            if i + j + 1 < s {
                sub([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    sum * area / (s * s) as f64
}

/// `∫ f` over a triangulation, each triangle split uniformly `subdiv²` times.
pub fn integrate_mesh(
    mesh: &Triangulation,
    f: impl Fn(Point2) -> f64,
    n: usize,
    subdiv: usize,
) -> f64 {
    let rule = triangle_rule(n);
    (0..mesh.num_triangles())
        .map(|t| integrate_triangle(mesh.triangle_points(t), &f, &rule, subdiv))
        .sum()
}

/// `∫ f` over a star-shaped polygon via the fan of triangles from its center.
pub fn integrate_star(
    domain: &StarDomain,
    f: impl Fn(Point2) -> f64,
    n: usize,
    subdiv: usize,
) -> f64 {
    let rule = triangle_rule(n);
    let c = domain.center();
    let bd = domain.boundary();
    (0..bd.len())
        .map(|i| integrate_triangle([c, bd[i], bd[(i + 1) % bd.len()]], &f, &rule, subdiv))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..=12 {
            let r = gauss_legendre(n);
            for k in 0..2 * n {
                let s: f64 = r.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_monomials() {
        // ∫_T λ0^a λ1^b over the reference simplex (area 1/2) = a! b! / (a+b+2)!.
        let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
        let rule = triangle_rule(5);
        for a in 0..=8 {
            for b in 0..=8 - a {
                let s: f64 = rule
                    .iter()
                    .map(|(l, w)| w * l[0].powi(a) * l[1].powi(b))
                    .sum();
                let exact =
                    2.0 * fact(a as usize) * fact(b as usize) / fact(a as usize + b as usize + 2);
                assert!((s - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn star_area_and_moment() {
        let sq = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(Point2::from);
        let d = crate::mesh::make_star_domain(&sq, None).unwrap();
        assert!((integrate_star(&d, |_| 1.0, 2, 1) - 4.0).abs() < 1e-14);
        let g = integrate_star(&d, |p| p.x * p.x * p.y * p.y, 4, 3);
        assert!((g - 4.0 / 9.0).abs() < 1e-13);
    }
}
