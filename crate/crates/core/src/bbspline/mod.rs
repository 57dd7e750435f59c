//! Bernstein–Bézier piecewise polynomials on triangulations.
//!
//! Coefficients live in the discontinuous space: triangle-major, and within a
//! triangle in the order of [`lattice::multi_indices`].

pub mod lattice;
mod points;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point2, Triangulation};
use lattice::{bernstein, dim, falling, raise, reduce};

pub use points::{domain_points, element_points, DomainPoint, DomainPointSet};

/// Value, gradient and Hessian of a spline at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub grad: Point2,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Jet {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn lap(&self) -> f64 {
        self.xx + self.yy
    }

    /// Smaller eigenvalue of the Hessian.
    pub fn min_eig(&self) -> f64 {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        m - r
    }
}

/// Degree-`D` splines with target smoothness `r` over a triangulation.
#[derive(Debug, Clone)]
pub struct SplineSpace {
    mesh: Arc<Triangulation>,
    degree: usize,
    smoothness: usize,
    /// Per triangle: `[∂λ/∂x, ∂λ/∂y]` for the three barycentric coordinates.
    grads: Vec<[[f64; 3]; 2]>,
}

impl SplineSpace {
    /// Requires `D ≥ 3r + 2` unless `force` is set.
    pub fn new(
        mesh: Arc<Triangulation>,
        degree: usize,
        smoothness: usize,
        force: bool,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::SplineSpace("degree must be at least 1".into()));
        }
        if !force && degree < 3 * smoothness + 2 {
            return Err(Error::SplineSpace(format!(
                "degree {degree} is below 3r+2 = {} for smoothness {smoothness}",
                3 * smoothness + 2
            )));
        }
        if smoothness >= degree {
            return Err(Error::SplineSpace(
                "smoothness must be below the degree".into(),
            ));
        }
        let grads = (0..mesh.num_triangles())
            .map(|t| {
                let [p1, p2, p3] = mesh.triangle_points(t);
                let a2 = 2.0 * mesh.triangle_area(t);
                [
                    [(p2.y - p3.y) / a2, (p3.y - p1.y) / a2, (p1.y - p2.y) / a2],
                    [(p3.x - p2.x) / a2, (p1.x - p3.x) / a2, (p2.x - p1.x) / a2],
                ]
            })
            .collect();
        Ok(SplineSpace {
            mesh,
            degree,
            smoothness,
            grads,
        })
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    /// Coefficients per triangle, `(D+1)(D+2)/2`.
    pub fn block_size(&self) -> usize {
        dim(self.degree)
    }

    /// Total coefficient count.
    pub fn dim(&self) -> usize {
        self.block_size() * self.mesh.num_triangles()
    }

    /// Cartesian derivative directions in barycentric terms for triangle `t`:
    /// `[d/dx, d/dy]`.
    pub fn bary_gradients(&self, t: usize) -> [[f64; 3]; 2] {
        self.grads[t]
    }

    pub fn locate(&self, p: Point2) -> Result<(usize, [f64; 3])> {
        self.mesh.locate(p).ok_or(Error::OutOfDomain(p.x, p.y))
    }

    /// Local (length `m`) row `ρ` with `ρ·c_T = ∂ˣ∂ʸ s(p)` on triangle `t`.
    pub fn local_row(&self, t: usize, bary: [f64; 3], dx: usize, dy: usize) -> Vec<f64> {
        let d = self.degree;
        let n = dx + dy;
        if n > d {
            return vec![0.0; dim(d)];
        }
        let [gx, gy] = self.grads[t];
        let mut w = bernstein(d - n, bary);
        let mut deg = d - n;
        for _ in 0..dx {
            w = raise(&w, deg, gx);
            deg += 1;
        }
        for _ in 0..dy {
            w = raise(&w, deg, gy);
            deg += 1;
        }
        let f = falling(d, n);
        w.iter_mut().for_each(|v| *v *= f);
        w
    }

    /// Sparse derivative row of length `N`: the owning triangle and its
    /// local row.
    pub fn basis_derivative_row(
        &self,
        p: Point2,
        dx: usize,
        dy: usize,
    ) -> Result<(usize, Vec<f64>)> {
        check_order(dx, dy)?;
        let (t, bary) = self.locate(p)?;
        Ok((t, self.local_row(t, bary, dx, dy)))
    }

    /// Integration weights: `ρ·c = ∫ s` with entries `Area(T)/C(D+2,2)`.
    pub fn mean_value_row(&self) -> Vec<f64> {
        let m = self.block_size();
        let mut row = Vec::with_capacity(self.dim());
        for t in 0..self.mesh.num_triangles() {
            let w = self.mesh.triangle_area(t) / m as f64;
            row.extend(std::iter::repeat_n(w, m));
        }
        row
    }

    /// Bernstein collocation matrix inverse at the degree-`D` lattice; maps
    /// lattice values to B-coefficients on any triangle.
    fn lattice_inverse(&self) -> DMatrix<f64> {
        let d = self.degree;
        let mi = lattice::multi_indices(d);
        let m = mi.len();
        let mut a = DMatrix::zeros(m, m);
        for (r, g) in mi.iter().enumerate() {
            let b = bernstein(d, g.map(|v| v as f64 / d as f64));
            for (c, v) in b.into_iter().enumerate() {
                a[(r, c)] = v;
            }
        }
        a.try_inverse()
            .expect("Bernstein lattice collocation matrix is invertible")
    }

    /// Piecewise interpolant of `f` at each triangle's degree-`D` lattice.
    /// Reproduces polynomials of degree `≤ D` exactly.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Point2) -> f64 + Sync) -> BForm {
        let inv = self.lattice_inverse();
        let d = self.degree;
        let mi = lattice::multi_indices(d);
        let m = mi.len();
        let mut coeffs = vec![0.0; self.dim()];
        for t in 0..self.mesh.num_triangles() {
            let [a, b, c] = self.mesh.triangle_points(t);
            let vals: Vec<f64> = mi
                .iter()
                .map(|g| {
                    let l = g.map(|v| v as f64 / d as f64);
                    f(a * l[0] + b * l[1] + c * l[2])
                })
                .collect();
            let block = &mut coeffs[t * m..(t + 1) * m];
            for (r, out) in block.iter_mut().enumerate() {
                *out = (0..m).map(|k| inv[(r, k)] * vals[k]).sum();
            }
        }
        BForm {
            space: Arc::clone(self),
            coeffs,
        }
    }
}

fn check_order(dx: usize, dy: usize) -> Result<()> {
    if dx + dy > 2 {
        return Err(Error::Dimension(format!(
            "derivative order {dx}+{dy} exceeds 2"
        )));
    }
    Ok(())
}

/// A spline in B-form.
#[derive(Debug, Clone)]
pub struct BForm {
    pub space: Arc<SplineSpace>,
    pub coeffs: Vec<f64>,
}

/// Serialised spline payload.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BFormJson {
    pub degree: usize,
    pub smoothness: usize,
    pub mesh_hash: String,
    pub coeffs: Vec<f64>,
}

impl BForm {
    pub fn new(space: Arc<SplineSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        Ok(BForm { space, coeffs })
    }

    pub fn zeros(space: Arc<SplineSpace>) -> Self {
        let n = space.dim();
        BForm {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn block(&self, t: usize) -> &[f64] {
        let m = self.space.block_size();
        &self.coeffs[t * m..(t + 1) * m]
    }

    /// Derivative `∂ˣ∂ʸ` on triangle `t` at barycentric point `bary`.
    pub fn eval_local(&self, t: usize, bary: [f64; 3], dx: usize, dy: usize) -> f64 {
        let d = self.space.degree;
        let n = dx + dy;
        if n > d {
            return 0.0;
        }
        let [gx, gy] = self.space.grads[t];
        let mut c = self.block(t).to_vec();
        let mut deg = d;
        for _ in 0..dx {
            c = reduce(&c, deg, gx);
            deg -= 1;
        }
        for _ in 0..dy {
            c = reduce(&c, deg, gy);
            deg -= 1;
        }
        while deg > 0 {
            c = reduce(&c, deg, bary);
            deg -= 1;
        }
        c[0] * falling(d, n)
    }

    /// `∂ˣ∂ʸ s(p)` for `dx + dy ≤ 2`.
    pub fn eval(&self, p: Point2, dx: usize, dy: usize) -> Result<f64> {
        check_order(dx, dy)?;
        let (t, bary) = self.space.locate(p)?;
        Ok(self.eval_local(t, bary, dx, dy))
    }

    /// Value, gradient and Hessian on triangle `t`, sharing the reduction work.
    pub fn jet_local(&self, t: usize, bary: [f64; 3]) -> Jet {
        let d = self.space.degree;
        let [gx, gy] = self.space.grads[t];
        let c = self.block(t);
        let casteljau = |mut c: Vec<f64>, mut deg: usize| {
            while deg > 0 {
                c = reduce(&c, deg, bary);
                deg -= 1;
            }
            c[0]
        };
        let value = casteljau(c.to_vec(), d);
        if d == 0 {
            return Jet {
                value,
                ..Jet::default()
            };
        }
        let cx = reduce(c, d, gx);
        let cy = reduce(c, d, gy);
        let f1 = falling(d, 1);
        let grad = Point2::new(
            f1 * casteljau(cx.clone(), d - 1),
            f1 * casteljau(cy.clone(), d - 1),
        );
        if d == 1 {
            return Jet {
                value,
                grad,
                ..Jet::default()
            };
        }
        let f2 = falling(d, 2);
        let xx = f2 * casteljau(reduce(&cx, d - 1, gx), d - 2);
        let xy = f2 * casteljau(reduce(&cx, d - 1, gy), d - 2);
        let yy = f2 * casteljau(reduce(&cy, d - 1, gy), d - 2);
        Jet {
            value,
            grad,
            xx,
            xy,
            yy,
        }
    }

    pub fn jet(&self, p: Point2) -> Result<Jet> {
        let (t, bary) = self.space.locate(p)?;
        Ok(self.jet_local(t, bary))
    }

    /// `(det D²s, Δs, ∇s)` at `p`.
    pub fn hessian_det_lap(&self, p: Point2) -> Result<(f64, f64, Point2)> {
        let j = self.jet(p)?;
        Ok((j.det(), j.lap(), j.grad))
    }

    /// Exact integral over the mesh.
    pub fn integral(&self) -> f64 {
        let m = self.space.block_size();
        (0..self.space.mesh.num_triangles())
            .map(|t| {
                self.space.mesh.triangle_area(t) / m as f64 * self.block(t).iter().sum::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> BFormJson {
        BFormJson {
            degree: self.space.degree,
            smoothness: self.space.smoothness,
            mesh_hash: self.space.mesh.content_hash(),
            coeffs: self.coeffs.clone(),
        }
    }

    /// Rebuilds a spline on `space`, checking degree and mesh identity.
    pub fn from_json(space: Arc<SplineSpace>, json: &BFormJson) -> Result<Self> {
        if json.degree != space.degree {
            return Err(Error::Dimension(format!(
                "stored degree {} differs from space degree {}",
                json.degree, space.degree
            )));
        }
        let hash = space.mesh.content_hash();
        if json.mesh_hash != hash {
            return Err(Error::Dimension(format!(
                "stored mesh hash {} does not match mesh {hash}",
                json.mesh_hash
            )));
        }
        BForm::new(space, json.coeffs.clone())
    }
}

/// `eval_bform` in free-function form.
pub fn eval_bform(s: &BForm, p: Point2, dx: usize, dy: usize) -> Result<f64> {
    s.eval(p, dx, dy)
}

/// `integral_bform` in free-function form.
pub fn integral_bform(s: &BForm) -> f64 {
    s.integral()
}
