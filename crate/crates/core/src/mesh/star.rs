use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::point::{
    point_in_polygon, polygon_centroid, polygon_signed_area, polyline_distance, Point2,
};
use super::triangulation::Triangulation;
use crate::error::{Error, Result};

/// Number of rays sampled by the star-shape check (0.5 degree spacing).
pub const STAR_CHECK_RAYS: usize = 720;

/// A closed counterclockwise polygon with a center from which every ray
/// leaves the polygon exactly once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarDomain {
    boundary: Vec<Point2>,
    center: Point2,
    area: f64,
}

/// A boundary collocation record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point2,
    /// Outward unit normal of the owning edge.
    pub normal: Point2,
    /// Angle of `point - center` in `[0, 2π)`.
    pub theta: f64,
    /// Index of the owning mesh edge.
    pub edge: usize,
}

/// Builds a star domain from a closed polyline (the closing vertex may be
/// omitted or repeated). Orientation is normalised to counterclockwise.
pub fn make_star_domain(boundary: &[Point2], center: Option<Point2>) -> Result<StarDomain> {
    let mut poly: Vec<Point2> = boundary.to_vec();
    if poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if poly.len() < 3 {
        return Err(Error::Geometry(
            "boundary polygon needs at least 3 vertices".into(),
        ));
    }
    if poly.iter().any(|p| !p.is_finite()) {
        return Err(Error::Geometry(
            "boundary polygon has non-finite coordinates".into(),
        ));
    }
    let mut area = polygon_signed_area(&poly);
    if area == 0.0 {
        return Err(Error::Geometry("boundary polygon has zero area".into()));
    }
    if area < 0.0 {
        poly.reverse();
        area = -area;
    }
    let center = center.unwrap_or_else(|| polygon_centroid(&poly));
    let scale = diameter(&poly);
    if !center.is_finite()
        || !point_in_polygon(&poly, center)
        || polyline_distance(&poly, center) <= 1e-12 * scale
    {
        return Err(Error::CenterOutside(center.x, center.y));
    }
    let dom = StarDomain {
        boundary: poly,
        center,
        area,
    };
    for i in 0..STAR_CHECK_RAYS {
        let theta = TAU * i as f64 / STAR_CHECK_RAYS as f64;
        let hits = dom.ray_hits(theta);
        if hits.len() != 1 {
            return Err(Error::NotStarShaped {
                angle: theta,
                crossings: hits.len(),
            });
        }
    }
    Ok(dom)
}

impl StarDomain {
    pub fn boundary(&self) -> &[Point2] {
        &self.boundary
    }

    pub fn center(&self) -> Point2 {
        self.center
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.boundary)
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.boundary {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(&self.boundary, p)
    }

    /// Distance from `p` to the boundary polyline.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        polyline_distance(&self.boundary, p)
    }

    /// The same domain shifted by `z`.
    pub fn translated(&self, z: Point2) -> StarDomain {
        StarDomain {
            boundary: self.boundary.iter().map(|&p| p + z).collect(),
            center: self.center + z,
            area: self.area,
        }
    }

    /// Ray parameters `t` (deduplicated, ascending) and the matching points
    /// where the ray from the center at angle `theta` meets the boundary.
    fn ray_hits(&self, theta: f64) -> Vec<(f64, Point2)> {
        const S_TOL: f64 = 1e-9;
        const SNAP: f64 = 1e-12;
        let d = Point2::from_angle(theta);
        let c = self.center;
        let n = self.boundary.len();
        let scale = self.diameter().max(f64::MIN_POSITIVE);
        let mut hits: Vec<(f64, Point2)> = Vec::new();
        for i in 0..n {
            let a = self.boundary[i];
            let b = self.boundary[(i + 1) % n];
            let e = b - a;
            let denom = d.cross(e);
            if denom.abs() <= 1e-15 * e.norm() {
                continue;
            }
            let ac = a - c;
            let t = ac.cross(e) / denom;
            let s = ac.cross(d) / denom;
            if !(-S_TOL..=1.0 + S_TOL).contains(&s) || t <= 1e-12 {
                continue;
            }
            let p = if s.abs() <= SNAP {
                a
            } else if (s - 1.0).abs() <= SNAP {
                b
            } else {
                a + e * s
            };
            hits.push((t, p));
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-9 * scale);
        hits
    }

    /// Exit point of the ray from the center in direction `theta`.
    pub fn ray_exit_point(&self, theta: f64) -> Result<Point2> {
        self.ray_hits(theta)
            .last()
            .map(|h| h.1)
            .ok_or(Error::NoIntersection(theta))
    }

    /// Radial projection of `p` onto the closed domain: points outside are
    /// pulled back along the ray from the center to the boundary.
    pub fn radial_clamp(&self, p: Point2) -> Point2 {
        if self.contains(p) {
            return p;
        }
        let v = p - self.center;
        if v.norm() == 0.0 {
            return p;
        }
        self.ray_exit_point(v.angle()).unwrap_or(p)
    }
}

fn diameter(poly: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in poly.iter().enumerate() {
        for q in &poly[i + 1..] {
            d = d.max(p.dist(*q));
        }
    }
    d
}

/// Degree-`degree_prime` lattice points on the mesh boundary edges, each with
/// the outward normal of its owning edge. A corner belongs to the boundary
/// edge of lower index.
pub fn boundary_collocation(
    domain: &StarDomain,
    mesh: &Triangulation,
    degree_prime: usize,
) -> Result<Vec<BoundaryPoint>> {
    if degree_prime == 0 {
        return Err(Error::SplineSpace(
            "collocation degree must be at least 1".into(),
        ));
    }
    let tol = 1e-9 * domain.diameter().max(1.0);
    let verts = mesh.vertices();
    for &e in mesh.boundary_edges() {
        let v = verts[mesh.edges()[e].vertices[0]];
        if domain.boundary_distance(v) > tol {
            return Err(Error::Geometry(format!(
                "mesh boundary vertex ({}, {}) is not on the domain boundary",
                v.x, v.y
            )));
        }
    }
    let mut edges: Vec<usize> = mesh.boundary_edges().to_vec();
    edges.sort_unstable();
    let mut claimed = vec![false; mesh.num_vertices()];
    let mut out = Vec::new();
    for e in edges {
        let [ia, ib] = mesh.edges()[e].vertices;
        let (a, b) = (verts[ia], verts[ib]);
        let normal = mesh.boundary_normal(e);
        for i in 0..=degree_prime {
            if i == 0 || i == degree_prime {
                let v = if i == 0 { ia } else { ib };
                if claimed[v] {
                    continue;
                }
                claimed[v] = true;
            }
            let point = if i == 0 {
                a
            } else if i == degree_prime {
                b
            } else {
                a + (b - a) * (i as f64 / degree_prime as f64)
            };
            out.push(BoundaryPoint {
                point,
                normal,
                theta: (point - domain.center()).angle(),
                edge: e,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square() -> StarDomain {
        let b = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(Point2::from);
        make_star_domain(&b, None).unwrap()
    }

    fn ngon(n: usize, r: f64) -> Vec<Point2> {
        (0..n)
            .map(|i| Point2::from_angle(TAU * i as f64 / n as f64) * r)
            .collect()
    }

    #[test]
    fn square_defaults() {
        let d = square();
        assert!(d.center().norm() < 1e-15);
        assert!((d.area() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn disk_area_matches_polygon_formula() {
        let n = 256;
        let d = make_star_domain(&ngon(n, 1.0), None).unwrap();
        let exact = 0.5 * n as f64 * (TAU / n as f64).sin();
        assert!((d.area() - exact).abs() < 1e-12);
        assert!((d.area() - PI).abs() < 1e-3);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let mut b = ngon(16, 1.0);
        b.reverse();
        let d = make_star_domain(&b, None).unwrap();
        assert!(polygon_signed_area(d.boundary()) > 0.0);
    }

    #[test]
    fn l_shape_needs_valid_center() {
        // L with the reflex corner at the origin; its centroid lies in the arm
        // but rays from it cross the notch twice.
        let b = [
            (0.0, 0.0),
            (3.0, 0.0),
            (3.0, 1.0),
            (1.0, 1.0),
            (1.0, 3.0),
            (0.0, 3.0),
        ]
        .map(Point2::from);
        let err = make_star_domain(&b, None).unwrap_err();
        assert!(matches!(
            err,
            Error::NotStarShaped { .. } | Error::CenterOutside(..)
        ));
        assert!(make_star_domain(&b, Some(Point2::new(0.5, 0.5))).is_ok());
        assert!(matches!(
            make_star_domain(&b, Some(Point2::new(2.0, 2.0))),
            Err(Error::CenterOutside(..))
        ));
    }

    #[test]
    fn ray_exits() {
        let d = square();
        let p = d.ray_exit_point(0.0).unwrap();
        assert!((p - Point2::new(1.0, 0.0)).norm() < 1e-15);
        let p = d.ray_exit_point(PI / 4.0).unwrap();
        assert_eq!(p, Point2::new(1.0, 1.0));
        let disk = make_star_domain(&ngon(256, 1.0), None).unwrap();
        let p = disk.ray_exit_point(PI / 2.0).unwrap();
        assert!((p - Point2::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn ray_exit_angle_round_trip() {
        let disk = make_star_domain(&ngon(97, 1.3), Some(Point2::new(0.1, -0.2))).unwrap();
        for i in 0..1000 {
            let theta = TAU * (i as f64 + 0.37) / 1000.0;
            let p = disk.ray_exit_point(theta).unwrap();
            let back = (p - disk.center()).angle();
            let diff = (back - theta).abs().min(TAU - (back - theta).abs());
            assert!(diff < 1e-10, "theta {theta}: {back}");
        }
    }

    #[test]
    fn collocation_on_two_triangle_square() {
        let v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .map(Point2::from)
            .to_vec();
        let mesh = Triangulation::new(v.clone(), vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let dom = make_star_domain(&v, None).unwrap();
        let pts = boundary_collocation(&dom, &mesh, 1).unwrap();
        assert_eq!(pts.len(), 4);
        for bp in &pts {
            assert!(bp.normal.x.abs() == 1.0 || bp.normal.y.abs() == 1.0);
            assert!(dom.boundary_distance(bp.point) < 1e-9);
        }
        assert_eq!(boundary_collocation(&dom, &mesh, 2).unwrap().len(), 8);
    }
}
