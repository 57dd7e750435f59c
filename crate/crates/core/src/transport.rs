//! Optimal transport between star-shaped domains through the second boundary
//! value problem: center matching, the outer fixed-point loop, pretranslation
//! and diagnostics of the resulting gradient map.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{
    assemble_neumann, default_colloc_degree, jets_at, mae_residual, neumann_rhs, Density,
    DensityPair, NeumannRecord,
};
use crate::bbspline::{BForm, Jet, SplineSpace};
use crate::error::{Error, Result};
use crate::mae::{
    default_blowup_cap, initial_iterate, run_stage, IterationTrace, LaplaceOperator, StageContext,
    SubharmonicConfig,
};
use crate::mesh::{boundary_collocation, BoundaryPoint, Point2, StarDomain, Triangulation};
use crate::quadrature::{integrate_mesh, integrate_star, triangle_rule_exact};

/// Relative mass mismatch tolerated by [`TransportProblem::new`].
pub const MASS_TOL: f64 = 1e-6;

/// Which domain a pretranslation moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moved {
    Neither,
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pretranslation {
    pub shift: Point2,
    pub moved: Moved,
    /// `‖x₀ − y₀‖²` times the area of the moved domain.
    pub linear_cost: f64,
}

/// Shift that makes the centers `x₀` of `V` and `y₀` of `W` coincide. The
/// domain with the smaller area moves (ties move `V`).
pub fn pretranslate(v: &StarDomain, w: &StarDomain) -> Pretranslation {
    let (x0, y0) = (v.center(), w.center());
    if x0 == y0 {
        return Pretranslation {
            shift: Point2::ORIGIN,
            moved: Moved::Neither,
            linear_cost: 0.0,
        };
    }
    let d2 = (y0 - x0).norm_sq();
    if v.area() <= w.area() {
        Pretranslation {
            shift: y0 - x0,
            moved: Moved::Source,
            linear_cost: d2 * v.area(),
        }
    } else {
        Pretranslation {
            shift: x0 - y0,
            moved: Moved::Target,
            linear_cost: d2 * w.area(),
        }
    }
}

/// Boundary targets `w_θ`: the exit point on `∂W` of the ray from `W`'s
/// center through `∇u(v_θ)`.
pub fn center_match_targets(w: &StarDomain, samples: &[(Point2, Point2)]) -> Result<Vec<Point2>> {
    let c = w.center();
    samples
        .iter()
        .map(|&(v, grad)| {
            let d = grad - c;
            let theta = if d.norm() <= 1e-10 {
                (v - c).angle()
            } else {
                d.angle()
            };
            w.ray_exit_point(theta)
        })
        .collect()
}

/// `∫_V f / A(W)`.
pub fn constant_target_density(f: &Density, v: &Triangulation, w: &StarDomain) -> Result<f64> {
    if !(w.area() > 0.0) {
        return Err(Error::Geometry("target domain has zero area".into()));
    }
    Ok(integrate_mesh(v, |p| f.eval(p), 8, 4) / w.area())
}

#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub v: StarDomain,
    pub mesh: Arc<Triangulation>,
    pub w: StarDomain,
    pub dens: DensityPair,
    pub mass_f: f64,
    pub mass_g: f64,
}

impl TransportProblem {
    /// Fails when `∫_V f` and `∫_W g` differ by more than [`MASS_TOL`] relative.
    pub fn new(
        v: StarDomain,
        mesh: Arc<Triangulation>,
        w: StarDomain,
        dens: DensityPair,
    ) -> Result<Self> {
        let p = Self::unchecked(v, mesh, w, dens);
        let rel =
            (p.mass_f - p.mass_g).abs() / p.mass_f.abs().max(p.mass_g.abs()).max(f64::MIN_POSITIVE);
        if !(rel <= MASS_TOL) {
            return Err(Error::DensityRange(format!(
                "mass mismatch: ∫f = {:.9e}, ∫g = {:.9e}",
                p.mass_f, p.mass_g
            )));
        }
        Ok(p)
    }

    /// Rescales `g` so that both masses agree.
    pub fn balanced(
        v: StarDomain,
        mesh: Arc<Triangulation>,
        w: StarDomain,
        dens: DensityPair,
    ) -> Result<Self> {
        let p = Self::unchecked(v, mesh, w, dens);
        if !(p.mass_f > 0.0 && p.mass_g > 0.0) {
            return Err(Error::DensityRange(
                "densities must have positive mass".into(),
            ));
        }
        let s = p.mass_f / p.mass_g;
        let dens = DensityPair::new(p.dens.f.clone(), p.dens.g.scaled(s))?;
        Ok(TransportProblem {
            dens,
            mass_g: p.mass_f,
            ..p
        })
    }

    fn unchecked(
        v: StarDomain,
        mesh: Arc<Triangulation>,
        w: StarDomain,
        dens: DensityPair,
    ) -> Self {
        let mass_f = integrate_mesh(&mesh, |p| dens.f.eval(p), 8, 4);
        let mass_g = integrate_star(&w, |p| dens.g.eval(p), 8, 16);
        TransportProblem {
            v,
            mesh,
            w,
            dens,
            mass_f,
            mass_g,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportConfig {
    pub degree: usize,
    pub smoothness: usize,
    pub colloc_degree: Option<usize>,
    /// Outer stop on `sup |u^{k+1} − u^k|`; `None` selects `1e-8 (1 + ‖u‖∞)`.
    pub outer_tol: Option<f64>,
    pub max_outer: usize,
    /// Per-stage settings; `stages` and `initial_guess` are not used.
    pub inner: SubharmonicConfig,
    /// Side of the square grid used for the residual.
    pub residual_grid: usize,
    pub convexity_grid: usize,
    pub surjectivity_grid: usize,
    pub coverage_cells: usize,
    /// Continue each outer step from the previous iterate instead of
    /// restarting the stage with `Δu = 2√F`. The outer fixed point then
    /// solves the discrete equation regardless of the stage length, at the
    /// price of the stage partial-sum guarantee.
    pub warm_start: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            degree: 8,
            smoothness: 2,
            colloc_degree: None,
            outer_tol: None,
            max_outer: 50,
            inner: SubharmonicConfig {
                inner_iters: 5,
                stages: 1,
                ..Default::default()
            },
            residual_grid: 512,
            convexity_grid: 51,
            surjectivity_grid: 101,
            coverage_cells: 40,
            warm_start: false,
        }
    }
}

/// `x ↦ ∇u(x + in_shift) + out_shift`, the transport map in the original
/// coordinates of `V` and `W`.
#[derive(Debug, Clone)]
pub struct GradientMap {
    pub u: BForm,
    pub in_shift: Point2,
    pub out_shift: Point2,
}

impl GradientMap {
    fn from_pretranslation(u: BForm, pre: &Pretranslation) -> Self {
        let (in_shift, out_shift) = match pre.moved {
            Moved::Neither => (Point2::ORIGIN, Point2::ORIGIN),
            Moved::Source => (pre.shift, Point2::ORIGIN),
            Moved::Target => (Point2::ORIGIN, -pre.shift),
        };
        GradientMap {
            u,
            in_shift,
            out_shift,
        }
    }

    pub fn apply(&self, x: Point2) -> Result<Point2> {
        Ok(self.u.jet(x + self.in_shift)?.grad + self.out_shift)
    }

    /// Jet of the potential in the shifted frame.
    pub fn jet(&self, x: Point2) -> Result<Jet> {
        self.u.jet(x + self.in_shift)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    pub outer_iterations: usize,
    pub converged: bool,
    pub last_outer_change: f64,
    pub residual_rmse: f64,
    pub residual_sup: f64,
    /// `∫ |x − T(x)|² f`, in original coordinates.
    pub cost: f64,
    pub linear_cost: f64,
    /// Cost of the potential alone, after pretranslation.
    pub cost_pretranslated: f64,
    pub boundary_match_error: f64,
    pub convexity_min_eig: f64,
    pub mean_value: f64,
    pub surjectivity_inside: f64,
    pub surjectivity_coverage: f64,
    pub mass_f: f64,
    pub mass_g: f64,
    pub pretranslation: Pretranslation,
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub map: GradientMap,
    pub report: TransportReport,
    pub trace: IterationTrace,
}

impl TransportSolution {
    pub fn u(&self) -> &BForm {
        &self.map.u
    }
}

/// Transport problem moved so that the two centers coincide.
struct Shifted {
    v: StarDomain,
    mesh: Arc<Triangulation>,
    w: StarDomain,
    dens: DensityPair,
}

fn shifted(problem: &TransportProblem, pre: &Pretranslation) -> Result<Shifted> {
    let z = pre.shift;
    let (v, mesh, f) = if pre.moved == Moved::Source {
        (
            problem.v.translated(z),
            Arc::new(problem.mesh.translated(z)?),
            problem.dens.f.shifted(z),
        )
    } else {
        (
            problem.v.clone(),
            Arc::clone(&problem.mesh),
            problem.dens.f.clone(),
        )
    };
    let (w, g) = if pre.moved == Moved::Target {
        (problem.w.translated(z), problem.dens.g.shifted(z))
    } else {
        (problem.w.clone(), problem.dens.g.clone())
    };
    let dens = DensityPair::new(f, g)?.with_target(w.clone());
    Ok(Shifted { v, mesh, w, dens })
}

fn sup_value_diff(a: &[Jet], b: &[Jet]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x.value - y.value).abs()))
}

/// Center-matching outer loop: each step recomputes the boundary targets from
/// the current gradient and runs one subharmonic stage with Neumann rows and
/// the zero-mean constraint.
pub fn solve_transport(
    problem: &TransportProblem,
    cfg: &TransportConfig,
) -> Result<TransportSolution> {
    cfg.inner.validate()?;
    if cfg.max_outer == 0 {
        return Err(Error::Config("max_outer must be at least 1".into()));
    }
    let pre = pretranslate(&problem.v, &problem.w);
    let sh = shifted(problem, &pre)?;
    let space = Arc::new(SplineSpace::new(
        Arc::clone(&sh.mesh),
        cfg.degree,
        cfg.smoothness,
        false,
    )?);
    let dp = cfg
        .colloc_degree
        .unwrap_or_else(|| default_colloc_degree(cfg.degree));

    let bpts: Vec<BoundaryPoint> = boundary_collocation(&sh.v, &sh.mesh, dp)?;
    let mut records: Vec<NeumannRecord> = bpts
        .iter()
        .map(|b| NeumannRecord {
            point: b.point,
            normal: b.normal,
            target: b.point,
        })
        .collect();
    let (bmat, _) = assemble_neumann(&space, &records)?;
    let op = LaplaceOperator::new(
        Arc::clone(&space),
        dp,
        bmat,
        Some(space.mean_value_row()),
        cfg.inner.alpha,
        cfg.inner.beta,
    )?;
    let mut trace = IterationTrace::for_densities(&sh.dens, &op.interior);
    let cap = cfg
        .inner
        .blowup_cap
        .unwrap_or_else(|| default_blowup_cap(&sh.dens, trace.f_sup));

    let mut u = initial_iterate(&space, &crate::mae::InitialGuess::Quadratic)?;
    let mut jets = jets_at(&u, &op.interior);
    let mut best: Option<(f64, BForm)> = None;
    let mut converged = false;
    let mut outer = 0;
    let mut last_change = f64::INFINITY;
    while outer < cfg.max_outer {
        outer += 1;
        let samples: Vec<(Point2, Point2)> = records
            .par_iter()
            .map(|r| Ok((r.point, u.jet(r.point)?.grad)))
            .collect::<Result<_>>()?;
        let targets = center_match_targets(&sh.w, &samples)?;
        for (r, t) in records.iter_mut().zip(targets) {
            r.target = t;
        }
        let g = neumann_rhs(&records);
        let ctx = StageContext {
            op: &op,
            g: &g,
            mean_target: 0.0,
            dens: &sh.dens,
            cap,
            stop_tol: cfg.inner.stop_tol,
            record_points: cfg.inner.record_points,
            exact_hessian: None,
            restart: outer == 1 || !cfg.warm_start,
        };
        let u_new = run_stage(&ctx, &u, cfg.inner.inner_iters, outer - 1, &mut trace)?;
        let new_jets = jets_at(&u_new, &op.interior);
        last_change = sup_value_diff(&new_jets, &jets);
        let unorm = new_jets.iter().fold(0.0f64, |m, j| m.max(j.value.abs()));
        let tol = cfg.outer_tol.unwrap_or(1e-8 * (1.0 + unorm));
        u = u_new;
        jets = new_jets;
        if best.as_ref().is_none_or(|(c, _)| last_change <= *c) {
            best = Some((last_change, u.clone()));
        }
        if last_change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        if let Some((c, b)) = best {
            last_change = c;
            u = b;
        }
    }

    let map = GradientMap::from_pretranslation(u, &pre);
    let report = diagnostics(
        problem,
        &sh,
        &map,
        &bpts,
        &pre,
        cfg,
        outer,
        converged,
        last_change,
    )?;
    Ok(TransportSolution { map, report, trace })
}

/// Points of a `n × n` grid over the bounding box that lie in the mesh.
pub fn grid_in_mesh(mesh: &Triangulation, n: usize) -> Vec<Point2> {
    let (lo, hi) = mesh.bbox();
    let n = n.max(2);
    let pts: Vec<Point2> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
            )
        })
        .collect();
    pts.into_par_iter()
        .filter(|p| mesh.locate(*p).is_some())
        .collect()
}

/// `∫ |x − ∇u(x)|² f(x) dx` with a per-triangle rule exact to degree `2D`.
pub fn transport_cost(u: &BForm, f: &Density) -> f64 {
    let map = GradientMap {
        u: u.clone(),
        in_shift: Point2::ORIGIN,
        out_shift: Point2::ORIGIN,
    };
    map_cost(&map, f)
}

/// Cost of a gradient map in original coordinates.
pub fn map_cost(map: &GradientMap, f: &Density) -> f64 {
    let space = &map.u.space;
    let mesh = space.mesh();
    let rule = triangle_rule_exact(2 * space.degree());
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            let area = mesh.triangle_area(t);
            let s: f64 = rule
                .iter()
                .map(|&(l, w)| {
                    let xs = a * l[0] + b * l[1] + c * l[2];
                    let grad = map.u.jet_local(t, l).grad + map.out_shift;
                    let x = xs - map.in_shift;
                    w * (x - grad).norm_sq() * f.eval(x)
                })
                .sum();
            area * s
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    problem: &TransportProblem,
    sh: &Shifted,
    map: &GradientMap,
    bpts: &[BoundaryPoint],
    pre: &Pretranslation,
    cfg: &TransportConfig,
    outer: usize,
    converged: bool,
    last_change: f64,
) -> Result<TransportReport> {
    let u = &map.u;
    let res_grid = grid_in_mesh(&sh.mesh, cfg.residual_grid);
    let residual = mae_residual(u, &sh.dens, &res_grid)?;

    let cost = map_cost(map, &problem.dens.f);
    let cost_pre = transport_cost(u, &sh.dens.f);

    let boundary_match_error = bpts
        .par_iter()
        .map(|b| Ok(sh.w.boundary_distance(u.jet(b.point)?.grad)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let convexity_min_eig = grid_in_mesh(&sh.mesh, cfg.convexity_grid)
        .par_iter()
        .map(|&p| Ok(u.jet(p)?.min_eig()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    let (inside, coverage) = surjectivity(
        u,
        &sh.mesh,
        &sh.w,
        cfg.surjectivity_grid,
        cfg.coverage_cells,
    )?;

    Ok(TransportReport {
        outer_iterations: outer,
        converged,
        last_outer_change: last_change,
        residual_rmse: residual.rmse,
        residual_sup: residual.sup,
        cost,
        linear_cost: pre.linear_cost,
        cost_pretranslated: cost_pre,
        boundary_match_error,
        convexity_min_eig,
        mean_value: u.integral(),
        surjectivity_inside: inside,
        surjectivity_coverage: coverage,
        mass_f: problem.mass_f,
        mass_g: problem.mass_g,
        pretranslation: *pre,
    })
}

/// Surjectivity evidence for `∇u` on an `n × n` sample lattice of `V`.
///
/// Returns the fraction of image points inside `W` (dilated by
/// `1e-2·diam W`) and the fraction of the `cells × cells` grid cells over `W`
/// (those with center in `W`) whose center is covered by the image of some
/// lattice triangle under the piecewise-linear interpolant of `∇u`.
pub fn surjectivity(
    u: &BForm,
    mesh: &Triangulation,
    w: &StarDomain,
    n: usize,
    cells: usize,
) -> Result<(f64, f64)> {
    let (lo, hi) = mesh.bbox();
    let n = n.max(2);
    let node = |i: usize, j: usize| {
        Point2::new(
            lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
            lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
        )
    };
    let images: Vec<Option<Point2>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let p = node(k % n, k / n);
            mesh.locate(p).map(|(t, b)| u.jet_local(t, b).grad)
        })
        .collect();
    let dil = 1e-2 * w.diameter();
    let present: Vec<Point2> = images.iter().flatten().copied().collect();
    let inside = present
        .iter()
        .filter(|&&y| w.contains(y) || w.boundary_distance(y) <= dil)
        .count();

    let (wlo, whi) = w.bbox();
    let cells = cells.max(1);
    let (dx, dy) = (
        (whi.x - wlo.x) / cells as f64,
        (whi.y - wlo.y) / cells as f64,
    );
    let center = |i: usize, j: usize| {
        Point2::new(wlo.x + (i as f64 + 0.5) * dx, wlo.y + (j as f64 + 0.5) * dy)
    };
    let mut hit = vec![false; cells * cells];
    let mut mark = |tri: [Point2; 3]| {
        let (mut a, mut b) = (tri[0], tri[0]);
        for p in &tri[1..] {
            a = Point2::new(a.x.min(p.x), a.y.min(p.y));
            b = Point2::new(b.x.max(p.x), b.y.max(p.y));
        }
        let area = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        if area == 0.0 {
            return;
        }
        let i0 = (((a.x - wlo.x) / dx - 0.5).ceil().max(0.0)) as usize;
        let j0 = (((a.y - wlo.y) / dy - 0.5).ceil().max(0.0)) as usize;
        let i1 = ((b.x - wlo.x) / dx - 0.5).floor();
        let j1 = ((b.y - wlo.y) / dy - 0.5).floor();
        if i1 < 0.0 || j1 < 0.0 {
            return;
        }
        let (i1, j1) = ((i1 as usize).min(cells - 1), (j1 as usize).min(cells - 1));
        for j in j0..=j1 {
            for i in i0..=i1 {
                let c = center(i, j);
                let s0 = (tri[1] - tri[0]).cross(c - tri[0]) * area.signum();
                let s1 = (tri[2] - tri[1]).cross(c - tri[1]) * area.signum();
                let s2 = (tri[0] - tri[2]).cross(c - tri[2]) * area.signum();
                if s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0 {
                    hit[j * cells + i] = true;
                }
            }
        }
    };
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let q = [
                images[j * n + i],
                images[j * n + i + 1],
                images[(j + 1) * n + i + 1],
                images[(j + 1) * n + i],
            ];
            if let [Some(a), Some(b), Some(c), Some(d)] = q {
                mark([a, b, c]);
                mark([a, c, d]);
            }
        }
    }
    let (mut total, mut covered) = (0usize, 0usize);
    for j in 0..cells {
        for i in 0..cells {
            if w.contains(center(i, j)) {
                total += 1;
                covered += usize::from(hit[j * cells + i]);
            }
        }
    }
    Ok((
        inside as f64 / present.len().max(1) as f64,
        covered as f64 / total.max(1) as f64,
    ))
}
