use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::point::Point2;
use crate::error::{Error, Result};

/// Barycentric sign-test tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-12;

/// An edge of the triangulation.
///
/// `vertices` is oriented as it appears (counterclockwise) in `left`; for a
/// boundary edge `right` is `None` and the interior lies to the left of the
/// directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// A conforming triangulation with counterclockwise triangles and edge adjacency.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `tri_edges[t][i]` is the edge opposite local vertex `i`.
    tri_edges: Vec<[usize; 3]>,
    interior_edges: Vec<usize>,
    boundary_edges: Vec<usize>,
    boundary_loops: Vec<Vec<usize>>,
    mesh_size: f64,
    locator: Locator,
}

impl Triangulation {
    /// Validates the input, reorients clockwise triangles and builds adjacency.
    pub fn new(vertices: Vec<Point2>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(Error::Geometry("need at least one triangle".into()));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::Geometry(format!(
                "vertex {i} has non-finite coordinates"
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::IndexOutOfRange(format!(
                        "triangle {t} references vertex {v} but only {nv} vertices exist"
                    )));
                }
            }
        }

        let (lo, hi) = bbox(&vertices);
        let bbox_area = ((hi.x - lo.x) * (hi.y - lo.y)).max(f64::MIN_POSITIVE);
        check_duplicates(&vertices)?;

        for (t, tri) in triangles.iter_mut().enumerate() {
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a.abs() <= 1e-14 * bbox_area {
                return Err(Error::DegenerateTriangle(t, a));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut used = vec![false; nv];
        for tri in &triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::DanglingVertex(v));
        }

        // Edge map keyed on sorted vertex pair.
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_map.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [a, b],
                        left: t,
                        right: None,
                    });
                    counts.push(0);
                    edges.len() - 1
                });
                counts[e] += 1;
                if counts[e] > 2 {
                    return Err(Error::NonManifoldEdge(key.0, key.1, counts[e]));
                }
                if edges[e].left != t {
                    if edges[e].vertices != [b, a] {
                        return Err(Error::Geometry(format!(
                            "triangles {} and {t} overlap along edge ({a}, {b})",
                            edges[e].left
                        )));
                    }
                    edges[e].right = Some(t);
                }
                tri_edges[t][i] = e;
            }
        }

        let interior_edges: Vec<usize> = (0..edges.len())
            .filter(|&e| !edges[e].is_boundary())
            .collect();
        let boundary_loops = build_loops(&edges)?;
        let boundary_edges: Vec<usize> = boundary_loops.iter().flatten().copied().collect();

        let mesh_size = edges
            .iter()
            .map(|e| vertices[e.vertices[0]].dist(vertices[e.vertices[1]]))
            .fold(0.0, f64::max);

        let locator = Locator::new(&vertices, &triangles, lo, hi);
        Ok(Triangulation {
            vertices,
            triangles,
            edges,
            tri_edges,
            interior_edges,
            boundary_edges,
            boundary_loops,
            mesh_size,
            locator,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tri_edges(&self) -> &[[usize; 3]] {
        &self.tri_edges
    }

    pub fn interior_edges(&self) -> &[usize] {
        &self.interior_edges
    }

    /// Boundary edges, loop after loop, each loop in traversal order.
    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    /// Longest edge length `|△|`.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        bbox(&self.vertices)
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, edge: usize) -> Point2 {
        let [a, b] = self.edges[edge].vertices;
        let d = self.vertices[b] - self.vertices[a];
        Point2::new(d.y, -d.x) * (1.0 / d.norm())
    }

    /// Number of holes, from the Euler characteristic `V - E + T = 1 - holes`.
    pub fn hole_count(&self) -> isize {
        1 - (self.vertices.len() as isize - self.edges.len() as isize
            + self.triangles.len() as isize)
    }

    /// Polygon of the loop with the largest enclosed area (the outer boundary).
    pub fn outer_boundary(&self) -> Vec<Point2> {
        self.boundary_loops
            .iter()
            .map(|l| {
                l.iter()
                    .map(|&e| self.vertices[self.edges[e].vertices[0]])
                    .collect::<Vec<_>>()
            })
            .max_by(|a, b| {
                super::point::polygon_signed_area(a)
                    .total_cmp(&super::point::polygon_signed_area(b))
            })
            .unwrap_or_default()
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area2 = (b - a).cross(c - a);
        let l1 = (b - p).cross(c - p) / area2;
        let l2 = (c - p).cross(a - p) / area2;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Locates `p`, returning the lowest-index triangle containing it (within
    /// [`LOCATE_TOL`]) together with the barycentric coordinates.
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        for &t in self.locator.candidates(p) {
            let l = self.barycentric(t as usize, p);
            if l.iter().all(|&v| v >= -LOCATE_TOL) {
                return Some((t as usize, l));
            }
        }
        None
    }

    /// Short content hash of vertex coordinates and connectivity.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
        }
        for t in &self.triangles {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Returns a copy with every vertex shifted by `shift`.
    pub fn translated(&self, shift: Point2) -> Result<Triangulation> {
        let verts = self.vertices.iter().map(|&p| p + shift).collect();
        Triangulation::new(verts, self.triangles.clone())
    }
}

pub(crate) fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

fn bbox(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn check_duplicates(vertices: &[Point2]) -> Result<()> {
    const TOL: f64 = 1e-12;
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a].x.total_cmp(&vertices[b].x));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if vertices[j].x - vertices[i].x > TOL {
                break;
            }
            if (vertices[j].y - vertices[i].y).abs() <= TOL {
                return Err(Error::DuplicateVertex(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

fn build_loops(edges: &[Edge]) -> Result<Vec<Vec<usize>>> {
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut boundary: Vec<usize> = Vec::new();
    for (e, edge) in edges.iter().enumerate() {
        if edge.is_boundary() {
            outgoing.entry(edge.vertices[0]).or_default().push(e);
            boundary.push(e);
        }
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for &start in &boundary {
        if used[start] {
            continue;
        }
        let mut lp = vec![start];
        used[start] = true;
        let first = edges[start].vertices[0];
        let mut cur = edges[start].vertices[1];
        while cur != first {
            let next = outgoing
                .get(&cur)
                .and_then(|cands| cands.iter().copied().find(|&c| !used[c]))
                .ok_or_else(|| Error::Geometry("boundary edges do not form closed loops".into()))?;
            used[next] = true;
            lp.push(next);
            cur = edges[next].vertices[1];
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// Uniform bucket grid over the bounding box; each bucket lists the
/// triangles whose bounding boxes overlap it, in ascending index order.
#[derive(Debug, Clone)]
struct Locator {
    lo: Point2,
    cell: Point2,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(vertices: &[Point2], triangles: &[[usize; 3]], lo: Point2, hi: Point2) -> Self {
        let n = ((triangles.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let pad = 1e-9 * (hi - lo).norm().max(1.0);
        let lo = Point2::new(lo.x - pad, lo.y - pad);
        let hi = Point2::new(hi.x + pad, hi.y + pad);
        let cell = Point2::new((hi.x - lo.x) / n as f64, (hi.y - lo.y) / n as f64);
        let mut buckets = vec![Vec::new(); n * n];
        for (t, tri) in triangles.iter().enumerate() {
            let pts = tri.map(|v| vertices[v]);
            let (tlo, thi) = bbox(&pts);
            let (i0, j0) = Self::cell_of(lo, cell, n, n, Point2::new(tlo.x - pad, tlo.y - pad));
            let (i1, j1) = Self::cell_of(lo, cell, n, n, Point2::new(thi.x + pad, thi.y + pad));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * n + i].push(t as u32);
                }
            }
        }
        Locator {
            lo,
            cell,
            nx: n,
            ny: n,
            buckets,
        }
    }

    fn cell_of(lo: Point2, cell: Point2, nx: usize, ny: usize, p: Point2) -> (usize, usize) {
        let i = (((p.x - lo.x) / cell.x).floor().max(0.0) as usize).min(nx - 1);
        let j = (((p.y - lo.y) / cell.y).floor().max(0.0) as usize).min(ny - 1);
        (i, j)
    }

    fn candidates(&self, p: Point2) -> &[u32] {
        let hi = Point2::new(
            self.lo.x + self.cell.x * self.nx as f64,
            self.lo.y + self.cell.y * self.ny as f64,
        );
        if !(p.x >= self.lo.x && p.x <= hi.x && p.y >= self.lo.y && p.y <= hi.y) {
            return &[];
        }
        let (i, j) = Self::cell_of(self.lo, self.cell, self.nx, self.ny, p);
        &self.buckets[j * self.nx + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Triangulation {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        Triangulation::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn two_triangle_square_adjacency() {
        let m = unit_square();
        assert_eq!(m.interior_edges().len(), 1);
        assert_eq!(m.boundary_edges().len(), 4);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.hole_count(), 0);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_triangles_are_reoriented() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let m = Triangulation::new(v, vec![[0, 2, 1]]).unwrap();
        assert!(m.triangle_area(0) > 0.0);
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = unit_square();
        for &e in m.boundary_edges() {
            let [a, b] = m.edges()[e].vertices;
            let mid = (m.vertices()[a] + m.vertices()[b]) * 0.5;
            let n = m.boundary_normal(e);
            let probe = mid + n * 1e-3;
            assert!(m.locate(probe).is_none());
        }
    }

    #[test]
    fn rejects_bad_meshes() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(matches!(
            Triangulation::new(v, vec![[0, 1, 2]]),
            Err(Error::DegenerateTriangle(0, _))
        ));

        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0 + 1e-13),
        ];
        assert!(matches!(
            Triangulation::new(v, vec![[0, 1, 2]]),
            Err(Error::DuplicateVertex(1, 3))
        ));

        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(5.0, 5.0),
        ];
        assert!(matches!(
            Triangulation::new(v, vec![[0, 1, 2]]),
            Err(Error::DanglingVertex(3))
        ));

        // three triangles on one edge
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, -1.0),
            Point2::new(0.5, 2.0),
        ];
        let r = Triangulation::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]);
        assert!(matches!(r, Err(Error::NonManifoldEdge(0, 1, 3))));
    }

    #[test]
    fn locate_prefers_lowest_index_on_shared_edge() {
        let m = unit_square();
        let (t, l) = m.locate(Point2::new(0.5, 0.5)).unwrap();
        assert_eq!(t, 0);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(m.locate(Point2::new(1.5, 0.5)).is_none());
    }
}
