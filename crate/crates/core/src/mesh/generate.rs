//! Simple mesh builders: structured grids and a ring mesher for star domains.

use std::f64::consts::TAU;

use super::point::Point2;
use super::star::StarDomain;
use super::triangulation::Triangulation;
use crate::error::{Error, Result};

/// Type-I triangulation of a rectangle: `nx × ny` cells, each cut along the
/// diagonal from its lower-left to its upper-right corner.
pub fn uniform_rect(lo: Point2, hi: Point2, nx: usize, ny: usize) -> Result<Triangulation> {
    masked_grid(lo, hi, nx, ny, |_| true)
}

/// Type-I grid keeping only the cells whose centers satisfy `keep`.
pub fn masked_grid(
    lo: Point2,
    hi: Point2,
    nx: usize,
    ny: usize,
    keep: impl Fn(Point2) -> bool,
) -> Result<Triangulation> {
    if nx == 0 || ny == 0 || !(hi.x > lo.x && hi.y > lo.y) {
        return Err(Error::Geometry(
            "grid needs positive extent and cell counts".into(),
        ));
    }
    let hx = (hi.x - lo.x) / nx as f64;
    let hy = (hi.y - lo.y) / ny as f64;
    let gid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = Point2::new(lo.x + (i as f64 + 0.5) * hx, lo.y + (j as f64 + 0.5) * hy);
            if !keep(c) {
                continue;
            }
            let (a, b, cc, d) = (gid(i, j), gid(i + 1, j), gid(i + 1, j + 1), gid(i, j + 1));
            triangles.push([a, b, cc]);
            triangles.push([a, cc, d]);
        }
    }
    // Compact away unused grid nodes.
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let g = gid(i, j);
            if used[g] {
                remap[g] = vertices.len();
                let x = if i == nx { hi.x } else { lo.x + i as f64 * hx };
                let y = if j == ny { hi.y } else { lo.y + j as f64 * hy };
                vertices.push(Point2::new(x, y));
            }
        }
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }
    Triangulation::new(vertices, triangles)
}

/// `[-1,1]²` with the upper-right quadrant removed, `n` cells per side.
pub fn l_shape(n: usize) -> Result<Triangulation> {
    masked_grid(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), n, n, |c| {
        !(c.x > 0.0 && c.y > 0.0)
    })
}

/// Ring mesher for a domain given in polar form `center + r(θ)(cos θ, sin θ)`.
///
/// Ring `k` carries `6k` points at uniform angles; consecutive rings are
/// stitched by merging their angles. Produces `6 rings²` triangles.
pub fn radial_mesh(
    center: Point2,
    radius: impl Fn(f64) -> f64,
    rings: usize,
) -> Result<Triangulation> {
    if rings == 0 {
        return Err(Error::Geometry(
            "ring mesher needs at least one ring".into(),
        ));
    }
    let mut vertices = vec![center];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=rings {
        let n = 6 * k;
        ring_start.push(vertices.len());
        ring_len.push(n);
        let s = k as f64 / rings as f64;
        for i in 0..n {
            let theta = TAU * i as f64 / n as f64;
            let r = radius(theta);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Geometry(format!(
                    "radius at angle {theta} is not positive"
                )));
            }
            vertices.push(center + Point2::from_angle(theta) * (s * r));
        }
    }
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (sa, na) = (ring_start[k - 1], ring_len[k - 1]);
        let (sb, nb) = (ring_start[k], ring_len[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j == nb || (i < na && next_a < next_b) {
                triangles.push([sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            }
        }
    }
    Triangulation::new(vertices, triangles)
}

/// Ring mesh of a star domain about its center; the outer ring vertices lie
/// on the domain boundary.
pub fn star_mesh(domain: &StarDomain, rings: usize) -> Result<Triangulation> {
    let c = domain.center();
    radial_mesh(
        c,
        |theta| {
            domain
                .ray_exit_point(theta)
                .map(|p| p.dist(c))
                .unwrap_or(f64::NAN)
        },
        rings,
    )
}

/// A named planar shape: boundary polyline, a center it is star-shaped
/// about, and (for smooth shapes) its polar radius function.
#[derive(Debug, Clone)]
pub enum Shape {
    Rect { lo: Point2, hi: Point2 },
    Polar { center: Point2, kind: PolarKind },
    LShape,
    Polygon(Vec<Point2>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarKind {
    Disk(f64),
    Oval(f64, f64),
    /// Dimpled limaçon `r = 0.7 + 0.5 cos θ`.
    Moon,
    /// `r = 1 + 0.25 cos 5θ`.
    Flower,
}

impl PolarKind {
    pub fn radius(&self, theta: f64) -> f64 {
        match *self {
            PolarKind::Disk(r) => r,
            PolarKind::Oval(a, b) => {
                a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt()
            }
            PolarKind::Moon => 0.7 + 0.5 * theta.cos(),
            PolarKind::Flower => 1.0 + 0.25 * (5.0 * theta).cos(),
        }
    }
}

impl Shape {
    /// Parses `square`, `unit-square`, `rect:x0,y0,x1,y1`, `disk`, `disk:r`,
    /// `oval`, `moon`, `flower` or `L`.
    pub fn parse(name: &str) -> Result<Shape> {
        let (head, args) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            a.unwrap_or("")
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number '{s}' in shape '{name}'")))
                })
                .collect()
        };
        let v = nums(args)?;
        let shape = match (head, v.as_slice()) {
            ("square", []) => Shape::Rect {
                lo: Point2::new(-1.0, -1.0),
                hi: Point2::new(1.0, 1.0),
            },
            ("unit-square", []) => Shape::Rect {
                lo: Point2::new(0.0, 0.0),
                hi: Point2::new(1.0, 1.0),
            },
            ("rect", [x0, y0, x1, y1]) => Shape::Rect {
                lo: Point2::new(*x0, *y0),
                hi: Point2::new(*x1, *y1),
            },
            ("disk", []) => Shape::Polar {
                center: Point2::ORIGIN,
                kind: PolarKind::Disk(1.0),
            },
            ("disk", [r]) => Shape::Polar {
                center: Point2::ORIGIN,
                kind: PolarKind::Disk(*r),
            },
            ("disk", [x, y, r]) => Shape::Polar {
                center: Point2::new(*x, *y),
                kind: PolarKind::Disk(*r),
            },
            ("oval", []) => Shape::Polar {
                center: Point2::ORIGIN,
                kind: PolarKind::Oval(1.5, 1.0),
            },
            ("moon", []) => Shape::Polar {
                center: Point2::ORIGIN,
                kind: PolarKind::Moon,
            },
            ("flower", []) => Shape::Polar {
                center: Point2::ORIGIN,
                kind: PolarKind::Flower,
            },
            ("L", []) | ("l", []) => Shape::LShape,
            _ => return Err(Error::Config(format!("unknown shape '{name}'"))),
        };
        if let Shape::Rect { lo, hi } = shape {
            if !(hi.x > lo.x && hi.y > lo.y) {
                return Err(Error::Config(format!("empty rectangle in '{name}'")));
            }
        }
        Ok(shape)
    }

    /// Center the shape is star-shaped about.
    pub fn center(&self) -> Option<Point2> {
        match self {
            Shape::Rect { lo, hi } => Some((*lo + *hi) * 0.5),
            Shape::Polar { center, .. } => Some(*center),
            Shape::LShape => Some(Point2::new(-0.5, -0.5)),
            Shape::Polygon(_) => None,
        }
    }

    /// Boundary polyline with roughly `n` vertices on curved parts.
    pub fn polyline(&self, n: usize) -> Vec<Point2> {
        match self {
            Shape::Rect { lo, hi } => {
                vec![*lo, Point2::new(hi.x, lo.y), *hi, Point2::new(lo.x, hi.y)]
            }
            Shape::Polar { center, kind } => (0..n.max(3))
                .map(|i| {
                    let t = TAU * i as f64 / n.max(3) as f64;
                    *center + Point2::from_angle(t) * kind.radius(t)
                })
                .collect(),
            Shape::LShape => [
                (-1.0, -1.0),
                (1.0, -1.0),
                (1.0, 0.0),
                (0.0, 0.0),
                (0.0, 1.0),
                (-1.0, 1.0),
            ]
            .map(Point2::from)
            .to_vec(),
            Shape::Polygon(p) => p.clone(),
        }
    }

    /// A quasi-uniform mesh with about `resolution` cells across.
    pub fn mesh(&self, resolution: usize) -> Result<Triangulation> {
        let n = resolution.max(1);
        match self {
            Shape::Rect { lo, hi } => uniform_rect(*lo, *hi, n, n),
            Shape::LShape => l_shape(2 * n.div_ceil(2)),
            Shape::Polar { center, kind } => {
                radial_mesh(*center, |t| kind.radius(t), n.div_ceil(2))
            }
            Shape::Polygon(p) => {
                let dom = super::star::make_star_domain(p, None)?;
                star_mesh(&dom, n.div_ceil(2))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::star::make_star_domain;

    #[test]
    fn uniform_rect_counts() {
        let m = uniform_rect(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 8, 8).unwrap();
        assert_eq!(m.num_vertices(), 81);
        assert_eq!(m.num_triangles(), 128);
        assert!((m.total_area() - 4.0).abs() < 1e-12);
        assert_eq!(m.hole_count(), 0);
    }

    #[test]
    fn l_shape_area_and_loops() {
        let m = l_shape(8).unwrap();
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.num_triangles(), 96);
    }

    #[test]
    fn radial_mesh_counts_and_euler() {
        for rings in 1..6 {
            let m = radial_mesh(Point2::ORIGIN, |_| 1.0, rings).unwrap();
            assert_eq!(m.num_triangles(), 6 * rings * rings);
            assert_eq!(m.num_vertices(), 1 + 3 * rings * (rings + 1));
            let euler =
                m.num_vertices() as isize - m.edges().len() as isize + m.num_triangles() as isize;
            assert_eq!(euler, 1);
        }
    }

    #[test]
    fn moon_and_flower_meshes_cover_their_domains() {
        for name in ["moon", "flower", "oval", "disk"] {
            let shape = Shape::parse(name).unwrap();
            let mesh = shape.mesh(16).unwrap();
            let dom = make_star_domain(&mesh.outer_boundary(), shape.center()).unwrap();
            let rel = (mesh.total_area() - dom.area()).abs() / dom.area();
            assert!(rel < 1e-9, "{name}: {rel}");
        }
    }

    #[test]
    fn shape_parsing() {
        assert!(matches!(
            Shape::parse("rect:0,0,2,1"),
            Ok(Shape::Rect { .. })
        ));
        assert!(Shape::parse("rect:0,0,0,1").is_err());
        assert!(Shape::parse("blob").is_err());
    }
}
