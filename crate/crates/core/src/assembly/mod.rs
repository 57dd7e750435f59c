//! Collocation operators: smoothness conditions, Laplacian, boundary rows,
//! the integral row, and the Monge–Ampère right-hand side and residual.

mod density;

use rayon::prelude::*;

use crate::bbspline::lattice::{bernstein, idx, multi_indices};
use crate::bbspline::{BForm, DomainPoint, DomainPointSet, Jet, SplineSpace};
use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::sparse::CsrMatrix;

pub use density::{Density, DensityPair};

/// Default collocation degree `D′ = D - 2`.
///
/// The degree-`D′` lattice of a triangle is unisolvent for the Laplacian
/// image of degree `D - 2`, so per-element collocation rows have full rank.
pub fn default_colloc_degree(degree: usize) -> usize {
    degree.saturating_sub(2).max(1)
}

/// Smoothness conditions of orders `0..=r` across every interior edge.
///
/// For an edge shared by `T = ⟨P, A, B⟩` and `T̃ = ⟨Q, A, B⟩` and each
/// `n ≤ r`, `a + b = D - n`:
/// `c̃(Q:n, A:a, B:b) = Σ_{i+j+k=n} B^n_{ijk}(λ_Q) c(P:i, A:a+j, B:b+k)`,
/// with `λ_Q` the barycentric coordinates of `Q` relative to `T`.
pub fn smoothness_matrix(space: &SplineSpace) -> CsrMatrix {
    let mesh = space.mesh();
    let d = space.degree();
    let r = space.smoothness();
    let m = space.block_size();
    let mut h = CsrMatrix::new(space.dim());
    let slot = |tri: &[usize; 3], v: usize| {
        tri.iter()
            .position(|&x| x == v)
            .expect("vertex in triangle")
    };
    for &e in mesh.interior_edges() {
        let edge = &mesh.edges()[e];
        let (t, tt) = (edge.left, edge.right.expect("interior edge"));
        let [va, vb] = edge.vertices;
        let tri = mesh.triangles()[t];
        let trt = mesh.triangles()[tt];
        let (sa, sb) = (slot(&tri, va), slot(&tri, vb));
        let sp = 3 - sa - sb;
        let (qa, qb) = (slot(&trt, va), slot(&trt, vb));
        let qq = 3 - qa - qb;
        let lq = mesh.barycentric(t, mesh.vertices()[trt[qq]]);
        let lam = [lq[sp], lq[sa], lq[sb]];
        for n in 0..=r {
            let w = bernstein(n, lam);
            let mi = multi_indices(n);
            for a in 0..=d - n {
                let b = d - n - a;
                let mut g = [0usize; 3];
                g[qq] = n;
                g[qa] = a;
                g[qb] = b;
                let mut row = vec![(tt * m + idx(d, g[0], g[1]), 1.0)];
                for (&[i, j, k], &wv) in mi.iter().zip(&w) {
                    let mut g = [0usize; 3];
                    g[sp] = i;
                    g[sa] = a + j;
                    g[sb] = b + k;
                    row.push((t * m + idx(d, g[0], g[1]), -wv));
                }
                h.push_row(row);
            }
        }
    }
    h
}

/// Laplacian rows at the interior collocation points.
pub fn assemble_laplace(
    space: &SplineSpace,
    pts: &DomainPointSet,
) -> (CsrMatrix, Vec<DomainPoint>) {
    let interior: Vec<DomainPoint> = pts.interior_points().copied().collect();
    (assemble_laplace_at(space, &interior), interior)
}

/// Laplacian rows at arbitrary points, each taken from the point's triangle.
pub fn assemble_laplace_at(space: &SplineSpace, pts: &[DomainPoint]) -> CsrMatrix {
    let m = space.block_size();
    let rows: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|p| {
            let xx = space.local_row(p.triangle, p.bary, 2, 0);
            let yy = space.local_row(p.triangle, p.bary, 0, 2);
            xx.iter().zip(&yy).map(|(a, b)| a + b).collect()
        })
        .collect();
    let mut k = CsrMatrix::new(space.dim());
    for (p, row) in pts.iter().zip(&rows) {
        k.push_block_row(p.triangle * m, row);
    }
    k
}

/// Value rows at boundary points, with right-hand side `h`.
pub fn assemble_dirichlet(
    space: &SplineSpace,
    pts: &[DomainPoint],
    h: impl Fn(Point2) -> f64,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let m = space.block_size();
    let mut b = CsrMatrix::new(space.dim());
    let mut rhs = Vec::with_capacity(pts.len());
    for p in pts {
        let v = h(p.point);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "boundary data at ({}, {}) is {v}",
                p.point.x, p.point.y
            )));
        }
        b.push_block_row(p.triangle * m, &space.local_row(p.triangle, p.bary, 0, 0));
        rhs.push(v);
    }
    Ok((b, rhs))
}

/// A boundary point `v_θ`, the outward normal there and its target `w_θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannRecord {
    pub point: Point2,
    pub normal: Point2,
    pub target: Point2,
}

/// Rows `∇s(v)·n` with right-hand side `w·n`.
pub fn assemble_neumann(
    space: &SplineSpace,
    recs: &[NeumannRecord],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let m = space.block_size();
    let mut b = CsrMatrix::new(space.dim());
    for r in recs {
        let len = r.normal.norm();
        if !(len > 1e-14) {
            return Err(Error::Geometry(format!(
                "zero-length normal at ({}, {})",
                r.point.x, r.point.y
            )));
        }
        let n = r.normal * (1.0 / len);
        let (t, bary) = space.locate(r.point)?;
        let gx = space.local_row(t, bary, 1, 0);
        let gy = space.local_row(t, bary, 0, 1);
        let row: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| n.x * a + n.y * b).collect();
        b.push_block_row(t * m, &row);
    }
    Ok((b, neumann_rhs(recs)))
}

/// Right-hand side `w_θ · n` of the Neumann rows.
pub fn neumann_rhs(recs: &[NeumannRecord]) -> Vec<f64> {
    recs.iter()
        .map(|r| r.target.dot(r.normal * (1.0 / r.normal.norm())))
        .collect()
}

/// Row `ρ` with `ρ·c = ∫ s`.
pub fn mean_value_row(space: &SplineSpace) -> Vec<f64> {
    space.mean_value_row()
}

/// Jets of `u` at the given collocation points.
pub fn jets_at(u: &BForm, pts: &[DomainPoint]) -> Vec<Jet> {
    pts.par_iter()
        .map(|p| u.jet_local(p.triangle, p.bary))
        .collect()
}

/// Subharmonic update `√(Δ² + 4(F − max(0, det)))` pointwise.
///
/// Negative radicands (possible only through rounding or an inconsistent
/// `ratio`) are replaced by `floor`; the number of such events is returned
/// alongside.
pub fn mae_rhs_values(lap: &[f64], det: &[f64], ratio: &[f64], floor: f64) -> (Vec<f64>, usize) {
    let mut clamps = 0;
    let out = lap
        .iter()
        .zip(det)
        .zip(ratio)
        .map(|((&l, &dt), &f)| {
            let rad = l * l + 4.0 * (f - dt.max(0.0));
            if rad < 0.0 {
                clamps += 1;
                floor.sqrt()
            } else {
                rad.sqrt()
            }
        })
        .collect();
    (out, clamps)
}

/// `f(x)/g(∇u_ref(x))` at each point.
pub fn density_ratio(u_ref: &BForm, dens: &DensityPair, pts: &[DomainPoint]) -> Result<Vec<f64>> {
    jets_at(u_ref, pts)
        .par_iter()
        .zip(pts)
        .map(|(j, p)| dens.ratio(p.point, j.grad))
        .collect()
}

/// Right-hand side of one inner subharmonic step.
pub fn mae_rhs(
    u_k: &BForm,
    u_ref: &BForm,
    dens: &DensityPair,
    pts: &[DomainPoint],
) -> Result<(Vec<f64>, usize)> {
    let ratio = density_ratio(u_ref, dens, pts)?;
    let jets = jets_at(u_k, pts);
    let lap: Vec<f64> = jets.iter().map(Jet::lap).collect();
    let det: Vec<f64> = jets.iter().map(Jet::det).collect();
    Ok(mae_rhs_values(&lap, &det, &ratio, dens.radicand_floor()))
}

/// Residual field `det D²u − f/g(∇u)` on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub rmse: f64,
    pub sup: f64,
    pub field: Vec<f64>,
}

/// Evaluates the Monge–Ampère residual at `grid` (points must lie in the mesh).
pub fn mae_residual(u: &BForm, dens: &DensityPair, grid: &[Point2]) -> Result<Residual> {
    let field: Vec<f64> = grid
        .par_iter()
        .map(|&p| {
            let j = u.jet(p)?;
            Ok(j.det() - dens.ratio(p, j.grad)?)
        })
        .collect::<Result<_>>()?;
    let n = field.len().max(1) as f64;
    let rmse = (field.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let sup = field.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(Residual { rmse, sup, field })
}

/// Assembled collocation problem: `min ½(α‖Bc−g‖² + β‖Hc‖²)` s.t. `Kc = b`
/// (and `ρ·c = mean_target` when a mean row is present).
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub h: CsrMatrix,
    pub mean_row: Option<Vec<f64>>,
    pub rhs_k: Vec<f64>,
    pub rhs_b: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub eps1: f64,
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bbspline::domain_points;
    use crate::mesh::{uniform_rect, Triangulation};

    fn grid(n: usize, lo: f64, hi: f64) -> Arc<Triangulation> {
        Arc::new(uniform_rect(Point2::new(lo, lo), Point2::new(hi, hi), n, n).unwrap())
    }

    fn space(mesh: Arc<Triangulation>, d: usize, r: usize) -> Arc<SplineSpace> {
        Arc::new(SplineSpace::new(mesh, d, r, true).unwrap())
    }

    #[test]
    fn polynomials_are_in_the_kernel_of_h() {
        let sp = space(grid(3, -1.0, 1.0), 8, 2);
        let h = smoothness_matrix(&sp);
        let s = sp.interpolate(|p| p.x.powi(5) * p.y - 3.0 * p.y.powi(8) + p.x * p.y);
        let hc = h.mul_vec(&s.coeffs);
        assert!(
            hc.iter().all(|v| v.abs() < 1e-10),
            "{:?}",
            hc.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        );
        let rough = BForm::new(
            sp.clone(),
            (0..sp.dim()).map(|i| ((i * 7919) % 13) as f64).collect(),
        )
        .unwrap();
        assert!(h.mul_vec(&rough.coeffs).iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn c0_rows_on_two_triangles() {
        let v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .map(Point2::from)
            .to_vec();
        let mesh = Arc::new(Triangulation::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap());
        let h = smoothness_matrix(&space(mesh, 1, 0));
        assert_eq!(h.nrows(), 2);
        for i in 0..2 {
            let (idx, val) = h.row(i);
            assert_eq!(idx.len(), 2);
            assert!((val[0] + val[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn row_count_per_edge() {
        let sp = space(grid(2, 0.0, 1.0), 8, 2);
        let h = smoothness_matrix(&sp);
        assert_eq!(h.nrows(), 24 * sp.mesh().interior_edges().len());
    }

    #[test]
    fn laplacian_rows() {
        let sp = space(grid(4, -1.0, 1.0), 8, 2);
        let pts = domain_points(sp.mesh(), 6);
        let (k, interior) = assemble_laplace(&sp, &pts);
        assert_eq!(k.nrows(), interior.len());
        let q = sp.interpolate(|p| p.x * p.x + p.y * p.y);
        assert!(k.mul_vec(&q.coeffs).iter().all(|v| (v - 4.0).abs() < 1e-9));
        let a = sp.interpolate(|p| 3.0 * p.x - p.y + 2.0);
        assert!(k.mul_vec(&a.coeffs).iter().all(|v| v.abs() < 1e-9));
        let e = sp.interpolate(|p| p.x.sin() * p.y.cos());
        for (v, p) in k.mul_vec(&e.coeffs).iter().zip(&interior) {
            let exact = -2.0 * p.point.x.sin() * p.point.y.cos();
            assert!((v - exact).abs() < 1e-6, "{v} {exact}");
        }
    }

    #[test]
    fn dirichlet_rows() {
        let sp = space(grid(4, -1.0, 1.0), 4, 1);
        let pts = domain_points(sp.mesh(), 2);
        let bp: Vec<DomainPoint> = pts.boundary_points().copied().collect();
        let (_, rhs) = assemble_dirichlet(&sp, &bp, |_| 0.0).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
        let h = |p: Point2| (0.5 * p.norm_sq()).exp();
        let (b, rhs) = assemble_dirichlet(&sp, &bp, h).unwrap();
        let corner = bp
            .iter()
            .position(|p| p.point == Point2::new(1.0, 1.0))
            .unwrap();
        assert!((rhs[corner] - std::f64::consts::E).abs() < 1e-15);
        let s = sp.interpolate(|p| p.x * p.y + 1.0);
        let (b2, rhs2) = assemble_dirichlet(&sp, &bp, |p| p.x * p.y + 1.0).unwrap();
        for (x, y) in b2.mul_vec(&s.coeffs).iter().zip(&rhs2) {
            assert!((x - y).abs() < 1e-10);
        }
        assert_eq!(b.nrows(), bp.len());
    }

    #[test]
    fn neumann_rows() {
        let sp = space(grid(2, 0.0, 1.0), 5, 1);
        let z = Point2::new(0.3, -0.7);
        let u = sp.interpolate(move |p| 0.5 * p.norm_sq() + z.dot(p));
        let recs: Vec<NeumannRecord> = [
            (1.0, 0.4, 1.0, 0.0),
            (0.2, 0.0, 0.0, -1.0),
            (0.0, 0.9, -1.0, 0.0),
        ]
        .iter()
        .map(|&(x, y, nx, ny)| {
            let p = Point2::new(x, y);
            NeumannRecord {
                point: p,
                normal: Point2::new(nx, ny),
                target: p + z,
            }
        })
        .collect();
        let (b, rhs) = assemble_neumann(&sp, &recs).unwrap();
        for (x, y) in b.mul_vec(&u.coeffs).iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-10);
        }
        let alpha = 1.7;
        let v = sp.interpolate(move |p| 0.5 * alpha * p.norm_sq());
        let scaled: Vec<NeumannRecord> = recs
            .iter()
            .map(|r| NeumannRecord {
                target: r.point * alpha,
                ..*r
            })
            .collect();
        let (b, rhs) = assemble_neumann(&sp, &scaled).unwrap();
        for (x, y) in b.mul_vec(&v.coeffs).iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-10);
        }
        let one = [NeumannRecord {
            point: Point2::new(1.0, 0.5),
            normal: Point2::new(1.0, 0.0),
            target: Point2::new(2.0, 0.0),
        }];
        assert_eq!(neumann_rhs(&one), vec![2.0]);
        let bad = [NeumannRecord {
            normal: Point2::ORIGIN,
            ..one[0]
        }];
        assert!(assemble_neumann(&sp, &bad).is_err());
    }

    #[test]
    fn mean_row() {
        let sp = space(grid(1, 0.0, 1.0), 3, 0);
        let rho = mean_value_row(&sp);
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let x = sp.interpolate(|p| p.x);
        let v: f64 = rho.iter().zip(&x.coeffs).map(|(a, b)| a * b).sum();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_values() {
        let (v, c) = mae_rhs_values(&[2.0, 3.0, 3.0], &[1.0, 2.0, -1.0], &[1.0, 1.0, 1.0], 0.0);
        assert_eq!(c, 0);
        assert!((v[0] - 2.0).abs() < 1e-15);
        assert!((v[1] - 5f64.sqrt()).abs() < 1e-15);
        assert!((v[2] - 13f64.sqrt()).abs() < 1e-15);
        let (v, c) = mae_rhs_values(&[1.0], &[5.0], &[1.0], 4.0);
        assert_eq!((v[0], c), (2.0, 1));
    }

    #[test]
    fn residual_of_zero_potential() {
        let sp = space(grid(2, 0.0, 1.0), 3, 0);
        let u = BForm::zeros(sp);
        let dens = DensityPair::new(Density::constant(1.0), Density::constant(1.0)).unwrap();
        let pts: Vec<Point2> = (0..5)
            .map(|i| Point2::new(0.1 + 0.2 * i as f64, 0.5))
            .collect();
        let r = mae_residual(&u, &dens, &pts).unwrap();
        assert!(r.field.iter().all(|&v| v == -1.0));
        assert!((r.rmse - 1.0).abs() < 1e-15);
    }
}
