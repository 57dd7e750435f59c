//! Subharmonic iteration for the Monge–Ampère equation with Dirichlet data,
//! the Poisson solver it is built on, and iteration diagnostics.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::assembly::{
    assemble_dirichlet, assemble_laplace_at, default_colloc_degree, density_ratio, jets_at,
    mae_rhs_values, smoothness_matrix, DensityPair,
};
use crate::bbspline::{domain_points, element_points, BForm, DomainPoint, Jet, SplineSpace};
use crate::error::{Error, Result};
use crate::lsq::{default_eps1, ConditioningFlag, ConstrainedLsq, SolveReport};
use crate::mesh::Point2;
use crate::sparse::CsrMatrix;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 1e2;

#[derive(Debug, Clone)]
pub enum InitialGuess {
    Zero,
    /// `‖x‖²/2`.
    Quadratic,
    User(BForm),
}

#[derive(Debug, Clone)]
pub struct SubharmonicConfig {
    /// Linear solves per stage, counting the stage-start solve.
    pub inner_iters: usize,
    pub stages: usize,
    /// Stop when `sup |u_{k+1} − u_k|` at interior collocation points is below this.
    pub stop_tol: f64,
    /// Abort when `‖Δu‖∞` exceeds this; `None` selects `1e3 (1 + sup 2√(f/g₀))`.
    pub blowup_cap: Option<f64>,
    pub initial_guess: InitialGuess,
    pub alpha: f64,
    pub beta: f64,
    /// Collocation degree `D′`; `None` selects `D − 2`.
    pub colloc_degree: Option<usize>,
    /// Keep per-point Laplacian/determinant snapshots in the trace.
    pub record_points: bool,
}

impl Default for SubharmonicConfig {
    fn default() -> Self {
        SubharmonicConfig {
            inner_iters: 5,
            stages: 4,
            stop_tol: 1e-12,
            blowup_cap: None,
            initial_guess: InitialGuess::Quadratic,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            colloc_degree: None,
            record_points: false,
        }
    }
}

impl SubharmonicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 || self.stages == 0 || !(self.stop_tol > 0.0) {
            return Err(Error::Config(
                "iteration counts must be ≥ 1 and the tolerance positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Config("weights must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub k: usize,
    pub stage: usize,
    /// `‖Δu_k‖∞` at interior collocation points.
    pub lap_inf: f64,
    pub lap_min: f64,
    /// `sup |u_k − u_{k−1}|` at interior collocation points.
    pub delta_inf: f64,
    pub clamp_events: usize,
    /// Minimum over points of the stage partial sum `Σ (F − det D²u_l)`.
    pub nonneg_min: f64,
    pub hess_min_eig: f64,
    /// Sup of the contraction factor, when an exact Hessian was supplied.
    pub rho: Option<f64>,
    pub lsq_flag: ConditioningFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSnapshot {
    pub k: usize,
    pub stage: usize,
    pub lap: Vec<f64>,
    pub det: Vec<f64>,
    pub ratio: Vec<f64>,
}

/// Append-only iteration log.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterRecord>,
    /// Density bounds at the time of the run.
    pub f_lower: f64,
    pub f_sup: f64,
    pub g_lower: f64,
    pub g_upper: f64,
    pub snapshots: Vec<PointSnapshot>,
}

impl IterationTrace {
    /// Bounds for the diagnostics: the declared ones, widened by the values
    /// of `f` actually seen at the collocation points.
    pub(crate) fn for_densities(dens: &DensityPair, pts: &[DomainPoint]) -> Self {
        let (mut f_min, mut f_sup) = (dens.f.lower, dens.f.lower);
        for p in pts {
            let v = dens.f.eval(p.point);
            f_min = f_min.min(v);
            f_sup = f_sup.max(v);
        }
        IterationTrace {
            f_lower: f_min.max(0.0),
            f_sup,
            g_lower: dens.g.lower,
            g_upper: dens.g.upper,
            ..Default::default()
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// CSV with columns `k,lap_inf,delta_inf,clamp_events,nonneg_min,hess_min_eig`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lap_inf,delta_inf,clamp_events,nonneg_min,hess_min_eig\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                r.k, r.lap_inf, r.delta_inf, r.clamp_events, r.nonneg_min, r.hess_min_eig
            );
        }
        s
    }
}

/// Outcome of the runtime checks on a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// (a) stage partial sums stay above `-1e-8`.
    pub nonneg_ok: bool,
    pub nonneg_min: f64,
    /// (b) `Δu ≥ 2√(f₀/g_max) − 1e-8`.
    pub lower_bound_ok: bool,
    pub lap_min: f64,
    pub lap_lower_bound: f64,
    /// (c) `‖Δu_k‖∞ ≤ (k+1)·2·sup√(f/g₀) + 1e-8`.
    pub growth_ok: bool,
    /// Smallest slack of the growth bound over the trace.
    pub growth_slack: f64,
    /// (d) largest sampled contraction factor, if available.
    pub rho_max: Option<f64>,
    pub flags: Vec<String>,
}

impl DiagnosticsReport {
    pub fn all_ok(&self) -> bool {
        self.nonneg_ok && self.lower_bound_ok && self.growth_ok
    }
}

/// Checks the nonnegativity, lower-bound and growth properties on a trace.
pub fn iteration_diagnostics(trace: &IterationTrace) -> DiagnosticsReport {
    const TOL: f64 = 1e-8;
    let lower = 2.0 * (trace.f_lower / trace.g_upper).sqrt();
    let growth = 2.0 * (trace.f_sup / trace.g_lower).sqrt();
    let mut rep = DiagnosticsReport {
        nonneg_ok: true,
        nonneg_min: f64::INFINITY,
        lower_bound_ok: true,
        lap_min: f64::INFINITY,
        lap_lower_bound: lower,
        growth_ok: true,
        growth_slack: f64::INFINITY,
        rho_max: None,
        flags: Vec::new(),
    };
    for r in &trace.records {
        rep.nonneg_min = rep.nonneg_min.min(r.nonneg_min);
        rep.lap_min = rep.lap_min.min(r.lap_min);
        if r.nonneg_min < -TOL {
            rep.nonneg_ok = false;
            rep.flags
                .push(format!("k={}: partial sum {:.3e} < 0", r.k, r.nonneg_min));
        }
        if r.lap_min < lower - TOL {
            rep.lower_bound_ok = false;
            rep.flags.push(format!(
                "k={}: min Δu {:.6e} below {:.6e}",
                r.k, r.lap_min, lower
            ));
        }
        let slack = (r.k + 1) as f64 * growth + TOL - r.lap_inf;
        rep.growth_slack = rep.growth_slack.min(slack);
        if slack < 0.0 {
            rep.growth_ok = false;
            rep.flags.push(format!(
                "k={}: ‖Δu‖∞ = {:.6e} exceeds the growth bound",
                r.k, r.lap_inf
            ));
        }
        if let Some(rho) = r.rho {
            rep.rho_max = Some(rep.rho_max.map_or(rho, |m: f64| m.max(rho)));
        }
    }
    rep
}

/// Contraction factor at one point from the exact and current Hessians.
pub fn contraction_factor(exact: [f64; 3], cur: &Jet, ratio: f64) -> f64 {
    let [a, c, b] = exact;
    let s = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    let s1 = ((cur.xx - cur.yy).powi(2) + 4.0 * cur.xy * cur.xy).sqrt();
    let t = ((a - b).powi(2) + 4.0 * c * c + 4.0 * ratio).sqrt();
    let t1 = ((cur.xx - cur.yy).powi(2) + 4.0 * cur.xy * cur.xy + 4.0 * ratio).sqrt();
    (s + s1) / (t + t1)
}

/// Exact Hessian `(u_xx, u_xy, u_yy)` used for the optional contraction factor.
pub type HessianFn<'a> = &'a (dyn Fn(Point2) -> [f64; 3] + Sync);

/// Linear solver for `Δu = rhs` at the collocation points with fixed
/// boundary rows; factored once.
///
/// Collocation is per element: every degree-`D′` lattice point of every
/// triangle carries a row, so the Laplacian of each piece is pinned down.
pub struct LaplaceOperator {
    pub space: Arc<SplineSpace>,
    /// Collocation points, triangle-major.
    pub interior: Vec<DomainPoint>,
    pub lsq: ConstrainedLsq,
}

impl LaplaceOperator {
    /// `boundary` rows are either Dirichlet or Neumann; `mean_row` adds the
    /// hard integral constraint.
    pub fn new(
        space: Arc<SplineSpace>,
        colloc_degree: usize,
        boundary: CsrMatrix,
        mean_row: Option<Vec<f64>>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let interior = element_points(space.mesh(), colloc_degree);
        let k = assemble_laplace_at(&space, &interior);
        let h = smoothness_matrix(&space);
        let lsq = ConstrainedLsq::factor(k, boundary, h, mean_row, alpha, beta)?;
        Ok(LaplaceOperator {
            space,
            interior,
            lsq,
        })
    }

    pub fn solve(&self, lap: &[f64], g: &[f64], mean_target: f64) -> Result<(BForm, SolveReport)> {
        let scale = norm(lap).max(norm(g)).max(1.0);
        let rep = self
            .lsq
            .solve(lap, g, mean_target, default_eps1(lap).max(1e-8 * scale))?;
        let u = BForm::new(Arc::clone(&self.space), rep.coeffs.clone())?;
        Ok((u, rep))
    }
}

/// Dirichlet boundary rows at the degree-`D′` boundary lattice points.
fn dirichlet_rows(
    space: &SplineSpace,
    colloc_degree: usize,
    h: impl Fn(Point2) -> f64,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let pts = domain_points(space.mesh(), colloc_degree);
    let bp: Vec<DomainPoint> = pts.boundary_points().copied().collect();
    assemble_dirichlet(space, &bp, h)
}

/// Solves `−Δu = f` with `u = h` on the boundary (in least squares).
pub fn poisson_solve(
    space: &Arc<SplineSpace>,
    f: impl Fn(Point2) -> f64,
    h: impl Fn(Point2) -> f64,
    colloc_degree: Option<usize>,
) -> Result<(BForm, SolveReport)> {
    let dp = colloc_degree.unwrap_or_else(|| default_colloc_degree(space.degree()));
    let (b, g) = dirichlet_rows(space, dp, h)?;
    let op = LaplaceOperator::new(Arc::clone(space), dp, b, None, DEFAULT_ALPHA, DEFAULT_BETA)?;
    let rhs: Vec<f64> = op.interior.iter().map(|p| -f(p.point)).collect();
    op.solve(&rhs, &g, 0.0)
}

/// State carried between stages.
pub(crate) struct StageContext<'a> {
    pub op: &'a LaplaceOperator,
    pub g: &'a [f64],
    pub mean_target: f64,
    pub dens: &'a DensityPair,
    pub cap: f64,
    pub stop_tol: f64,
    pub record_points: bool,
    pub exact_hessian: Option<HessianFn<'a>>,
    /// Start with `Δu = 2√F`; otherwise continue from `u_ref`'s Laplacian.
    pub restart: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sup_diff(a: &[Jet], b: &[Jet]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x.value - y.value).abs()))
}

/// Runs one stage: the stage-start solve `Δu = 2√F` followed by up to
/// `iters − 1` subharmonic updates, all with `F = f/g(∇u_ref)` frozen.
pub(crate) fn run_stage(
    ctx: &StageContext<'_>,
    u_ref: &BForm,
    iters: usize,
    stage: usize,
    trace: &mut IterationTrace,
) -> Result<BForm> {
    let pts = &ctx.op.interior;
    let ratio = density_ratio(u_ref, ctx.dens, pts)?;
    let floor = ctx.dens.radicand_floor();
    let mut prev_jets = jets_at(u_ref, pts);
    let (mut rhs, mut clamps) = if ctx.restart {
        (ratio.iter().map(|&f| 2.0 * f.max(0.0).sqrt()).collect(), 0)
    } else {
        let lap: Vec<f64> = prev_jets.iter().map(Jet::lap).collect();
        let det: Vec<f64> = prev_jets.iter().map(Jet::det).collect();
        mae_rhs_values(&lap, &det, &ratio, floor)
    };
    let mut partial = vec![0.0; pts.len()];
    let mut u = u_ref.clone();
    for it in 0..iters {
        let (u_new, rep) = ctx.op.solve(&rhs, ctx.g, ctx.mean_target)?;
        let jets = jets_at(&u_new, pts);
        let delta = sup_diff(&jets, &prev_jets);
        let (mut lap_inf, mut lap_min, mut hmin) = (0.0f64, f64::INFINITY, f64::INFINITY);
        for j in &jets {
            let l = j.lap();
            lap_inf = lap_inf.max(l.abs());
            lap_min = lap_min.min(l);
            hmin = hmin.min(j.min_eig());
        }
        // Partial sums include the stage-start iterate.
        for ((p, j), f) in partial.iter_mut().zip(&jets).zip(&ratio) {
            *p += f - j.det();
        }
        let nonneg_min = partial.iter().copied().fold(f64::INFINITY, f64::min);
        let rho = ctx.exact_hessian.map(|hf| {
            pts.iter()
                .zip(&jets)
                .zip(&ratio)
                .map(|((p, j), &f)| contraction_factor(hf(p.point), j, f))
                .fold(0.0f64, f64::max)
        });
        let k = trace.records.len() + 1;
        trace.records.push(IterRecord {
            k,
            stage,
            lap_inf,
            lap_min,
            delta_inf: delta,
            clamp_events: clamps,
            nonneg_min,
            hess_min_eig: hmin,
            rho,
            lsq_flag: rep.conditioning_flag,
        });
        if ctx.record_points {
            trace.snapshots.push(PointSnapshot {
                k,
                stage,
                lap: jets.iter().map(Jet::lap).collect(),
                det: jets.iter().map(Jet::det).collect(),
                ratio: ratio.clone(),
            });
        }
        if !lap_inf.is_finite() || lap_inf > ctx.cap {
            return Err(Error::BlowUp {
                k,
                lap_inf,
                cap: ctx.cap,
                trace: Box::new(trace.clone()),
            });
        }
        u = u_new;
        if delta <= ctx.stop_tol {
            break;
        }
        if it + 1 < iters {
            let lap: Vec<f64> = jets.iter().map(Jet::lap).collect();
            let det: Vec<f64> = jets.iter().map(Jet::det).collect();
            let (next, c) = mae_rhs_values(&lap, &det, &ratio, floor);
            rhs = next;
            clamps = c;
        }
        prev_jets = jets;
    }
    Ok(u)
}

/// Default blow-up cap `1e3 (1 + sup 2√(f/g₀))`.
pub fn default_blowup_cap(dens: &DensityPair, f_sup: f64) -> f64 {
    1e3 * (1.0 + 2.0 * (f_sup / dens.g.lower).sqrt())
}

pub(crate) fn initial_iterate(space: &Arc<SplineSpace>, guess: &InitialGuess) -> Result<BForm> {
    Ok(match guess {
        InitialGuess::Zero => BForm::zeros(Arc::clone(space)),
        InitialGuess::Quadratic => space.interpolate(|p| 0.5 * p.norm_sq()),
        InitialGuess::User(u) => {
            if u.coeffs.len() != space.dim() {
                return Err(Error::Dimension(
                    "initial guess lives on a different space".into(),
                ));
            }
            BForm::new(Arc::clone(space), u.coeffs.clone())?
        }
    })
}

/// Subharmonic iteration with Dirichlet data `h`.
pub fn subharmonic_solve(
    space: &Arc<SplineSpace>,
    dens: &DensityPair,
    h: impl Fn(Point2) -> f64,
    cfg: &SubharmonicConfig,
) -> Result<(BForm, IterationTrace)> {
    subharmonic_solve_with(space, dens, h, cfg, None)
}

/// [`subharmonic_solve`] with an optional exact Hessian for the contraction
/// factor diagnostic.
pub fn subharmonic_solve_with(
    space: &Arc<SplineSpace>,
    dens: &DensityPair,
    h: impl Fn(Point2) -> f64,
    cfg: &SubharmonicConfig,
    exact_hessian: Option<HessianFn<'_>>,
) -> Result<(BForm, IterationTrace)> {
    cfg.validate()?;
    let dp = cfg
        .colloc_degree
        .unwrap_or_else(|| default_colloc_degree(space.degree()));
    let (b, g) = dirichlet_rows(space, dp, h)?;
    let op = LaplaceOperator::new(Arc::clone(space), dp, b, None, cfg.alpha, cfg.beta)?;
    let mut trace = IterationTrace::for_densities(dens, &op.interior);
    let f_sup = trace.f_sup;
    let ctx = StageContext {
        op: &op,
        g: &g,
        mean_target: 0.0,
        dens,
        cap: cfg
            .blowup_cap
            .unwrap_or_else(|| default_blowup_cap(dens, f_sup)),
        stop_tol: cfg.stop_tol,
        record_points: cfg.record_points,
        exact_hessian,
        restart: true,
    };
    let mut u = initial_iterate(space, &cfg.initial_guess)?;
    let mut prev_final: Option<Vec<Jet>> = None;
    for stage in 0..cfg.stages {
        u = run_stage(&ctx, &u, cfg.inner_iters, stage, &mut trace)?;
        let jets = jets_at(&u, &op.interior);
        if let Some(prev) = &prev_final {
            if sup_diff(&jets, prev) <= cfg.stop_tol {
                break;
            }
        }
        prev_final = Some(jets);
    }
    Ok((u, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Density;
    use crate::mesh::{uniform_rect, Triangulation};

    fn space(n: usize, lo: f64, hi: f64, d: usize, r: usize) -> Arc<SplineSpace> {
        let mesh: Arc<Triangulation> =
            Arc::new(uniform_rect(Point2::new(lo, lo), Point2::new(hi, hi), n, n).unwrap());
        Arc::new(SplineSpace::new(mesh, d, r, false).unwrap())
    }

    fn max_err(u: &BForm, exact: impl Fn(Point2) -> f64, lo: f64, hi: f64) -> f64 {
        let mut e = 0.0f64;
        for i in 0..=20 {
            for j in 0..=20 {
                let p = Point2::new(
                    lo + (hi - lo) * i as f64 / 20.0,
                    lo + (hi - lo) * j as f64 / 20.0,
                );
                e = e.max((u.eval(p, 0, 0).unwrap() - exact(p)).abs());
            }
        }
        e
    }

    #[test]
    fn poisson_reproduces_harmonic_and_quadratic() {
        let sp = space(3, -1.0, 1.0, 5, 1);
        let (u, rep) = poisson_solve(&sp, |_| 0.0, |p| p.x + p.y, None).unwrap();
        assert!(max_err(&u, |p| p.x + p.y, -1.0, 1.0) < 1e-10, "{rep:?}");
        let (u, _) = poisson_solve(&sp, |_| -4.0, |p| p.norm_sq(), None).unwrap();
        assert!(max_err(&u, |p| p.norm_sq(), -1.0, 1.0) < 1e-10);
    }

    #[test]
    fn fixed_point_of_quadratic() {
        let sp = space(2, -1.0, 1.0, 5, 1);
        let dens = DensityPair::new(Density::constant(1.0), Density::constant(1.0)).unwrap();
        let cfg = SubharmonicConfig {
            stop_tol: 1e-10,
            ..Default::default()
        };
        let (u, trace) = subharmonic_solve(&sp, &dens, |p| 0.5 * p.norm_sq(), &cfg).unwrap();
        assert!(max_err(&u, |p| 0.5 * p.norm_sq(), -1.0, 1.0) < 1e-10);
        assert!(trace.iterations() <= 3, "{}", trace.iterations());
        assert!(iteration_diagnostics(&trace).all_ok());
    }

    #[test]
    fn artificial_violation_is_flagged() {
        let trace = IterationTrace {
            records: vec![IterRecord {
                k: 1,
                stage: 0,
                lap_inf: 1.0,
                lap_min: -1.0,
                delta_inf: 0.0,
                clamp_events: 0,
                nonneg_min: 0.0,
                hess_min_eig: 0.0,
                rho: None,
                lsq_flag: ConditioningFlag::Ok,
            }],
            f_lower: 1.0,
            f_sup: 1.0,
            g_lower: 1.0,
            g_upper: 1.0,
            snapshots: vec![],
        };
        let rep = iteration_diagnostics(&trace);
        assert!(!rep.lower_bound_ok);
        assert!(rep.nonneg_ok && rep.growth_ok);
    }

    #[test]
    fn trace_csv_header() {
        let t = IterationTrace::default();
        assert_eq!(
            t.to_csv(),
            "k,lap_inf,delta_inf,clamp_events,nonneg_min,hess_min_eig\n"
        );
    }
}
