use std::collections::{HashMap, HashSet};

use super::lattice::multi_indices;
use crate::mesh::{Point2, Triangulation};

/// A collocation point: its location and owning triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainPoint {
    pub point: Point2,
    /// Lowest-index triangle containing the point.
    pub triangle: usize,
    pub bary: [f64; 3],
    pub on_boundary: bool,
}

/// Deduplicated lattice points of degree `D′` over a triangulation.
#[derive(Debug, Clone)]
pub struct DomainPointSet {
    pub degree_prime: usize,
    pub points: Vec<DomainPoint>,
    /// Indices into `points`.
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

#[derive(Hash, PartialEq, Eq)]
enum Key {
    Vertex(usize),
    /// Edge by sorted endpoints, offset counted from the lower endpoint.
    Edge(usize, usize, usize),
    Interior(usize, usize, usize),
}

impl DomainPointSet {
    pub fn interior_points(&self) -> impl Iterator<Item = &DomainPoint> {
        self.interior.iter().map(|&i| &self.points[i])
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = &DomainPoint> {
        self.boundary.iter().map(|&i| &self.points[i])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Every lattice point of every triangle, with its deduplication key.
fn lattice_points(mesh: &Triangulation, degree_prime: usize) -> Vec<(Key, DomainPoint)> {
    assert!(degree_prime >= 1, "collocation degree must be at least 1");
    let dp = degree_prime;
    let mut boundary_vertex = vec![false; mesh.num_vertices()];
    let mut boundary_edge: HashMap<(usize, usize), bool> = HashMap::new();
    for e in mesh.edges() {
        let [a, b] = e.vertices;
        let key = (a.min(b), a.max(b));
        boundary_edge.insert(key, e.is_boundary());
        if e.is_boundary() {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
    }

    let lattice = multi_indices(dp);
    let mut out = Vec::with_capacity(mesh.num_triangles() * lattice.len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [pa, pb, pc] = mesh.triangle_points(t);
        for &g in &lattice {
            let nz: Vec<usize> = (0..3).filter(|&s| g[s] > 0).collect();
            let (key, on_boundary) = match nz.len() {
                1 => (Key::Vertex(tri[nz[0]]), boundary_vertex[tri[nz[0]]]),
                2 => {
                    let (s0, s1) = (nz[0], nz[1]);
                    let (v0, v1) = (tri[s0], tri[s1]);
                    let off = if v0 < v1 { g[s1] } else { g[s0] };
                    let ek = (v0.min(v1), v0.max(v1));
                    (Key::Edge(ek.0, ek.1, off), boundary_edge[&ek])
                }
                _ => (Key::Interior(t, g[0], g[1]), false),
            };
            let bary = g.map(|v| v as f64 / dp as f64);
            let mut point = pa * bary[0] + pb * bary[1] + pc * bary[2];
            // Snap vertex points exactly.
            if nz.len() == 1 {
                point = mesh.vertices()[tri[nz[0]]];
            }
            out.push((
                key,
                DomainPoint {
                    point,
                    triangle: t,
                    bary,
                    on_boundary,
                },
            ));
        }
    }
    out
}

/// Deduplicated domain points of degree `D′`; a shared point belongs to the
/// lowest-index triangle containing it.
pub fn domain_points(mesh: &Triangulation, degree_prime: usize) -> DomainPointSet {
    let mut seen: HashSet<Key> = HashSet::new();
    let mut points = Vec::new();
    for (key, p) in lattice_points(mesh, degree_prime) {
        if seen.insert(key) {
            points.push(p);
        }
    }
    let interior = (0..points.len())
        .filter(|&i| !points[i].on_boundary)
        .collect();
    let boundary = (0..points.len())
        .filter(|&i| points[i].on_boundary)
        .collect();
    DomainPointSet {
        degree_prime,
        points,
        interior,
        boundary,
    }
}

/// Lattice points of degree `D′` on each triangle separately, triangle-major.
/// Points on shared edges appear once per incident triangle.
pub fn element_points(mesh: &Triangulation, degree_prime: usize) -> Vec<DomainPoint> {
    lattice_points(mesh, degree_prime)
        .into_iter()
        .map(|(_, p)| p)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_rect;

    fn square() -> Triangulation {
        let v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .map(Point2::from)
            .to_vec();
        Triangulation::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn element_points_are_per_triangle() {
        let p = element_points(&square(), 3);
        assert_eq!(p.len(), 20);
        assert!(p[..10].iter().all(|q| q.triangle == 0));
        assert_eq!(p.iter().filter(|q| !q.on_boundary).count(), 2 + 4);
    }

    #[test]
    fn lattice_counts() {
        let v = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
            .map(Point2::from)
            .to_vec();
        let one = Triangulation::new(v, vec![[0, 1, 2]]).unwrap();
        let p = domain_points(&one, 2);
        assert_eq!(p.len(), 6);
        assert_eq!(p.boundary.len(), 6);
        assert_eq!(domain_points(&square(), 1).len(), 4);
        let p3 = domain_points(&square(), 3);
        assert_eq!(p3.len(), 16);
        assert_eq!(p3.interior.len(), 4);
    }

    #[test]
    fn grid_counts_and_uniqueness() {
        let m = uniform_rect(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 8, 8).unwrap();
        for dp in 1..=6 {
            let p = domain_points(&m, dp);
            let side = 8 * dp + 1;
            assert_eq!(p.len(), side * side);
            assert_eq!(p.interior.len(), (side - 2) * (side - 2));
            let mut keys: Vec<(i64, i64)> = p
                .points
                .iter()
                .map(|q| {
                    (
                        (q.point.x * 1e9).round() as i64,
                        (q.point.y * 1e9).round() as i64,
                    )
                })
                .collect();
            keys.sort_unstable();
            keys.dedup();
            assert_eq!(keys.len(), p.len());
        }
    }

    #[test]
    fn owner_is_lowest_triangle() {
        let p = domain_points(&square(), 2);
        // the diagonal midpoint is shared by both triangles
        let mid = p
            .points
            .iter()
            .find(|q| (q.point - Point2::new(0.5, 0.5)).norm() < 1e-15)
            .unwrap();
        assert_eq!(mid.triangle, 0);
        assert!(!mid.on_boundary);
    }
}
