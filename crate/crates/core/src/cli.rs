//! Command-line front end: argument model, subcommand drivers and output files.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assembly::{Density, DensityPair};
use crate::bbspline::{BForm, BFormJson, SplineSpace};
use crate::bench::{self, grid_errors, BenchOptions, Manufactured};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::imaging::{forward_warp, psnr, DensityDescriptor, DensityKind, RasterImage};
use crate::mae::{
    iteration_diagnostics, poisson_solve, subharmonic_solve, IterationTrace, SubharmonicConfig,
};
use crate::mesh::{
    make_star_domain, parse_mesh, parse_polyline, star_mesh, Point2, Shape, StarDomain,
    Triangulation,
};
use crate::transport::{
    constant_target_density, solve_transport, GradientMap, TransportConfig, TransportProblem,
    TransportSolution,
};

#[derive(Debug, Parser)]
#[command(
    name = "spline-ot",
    version,
    about = "Spline collocation for Monge–Ampère and optimal transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML config file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

impl CommonArgs {
    /// Config file overlaid with the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cfg = base.overlaid(&self.run);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
    Table3,
    Table4,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve −Δu = f for a manufactured solution and report the error.
    Poisson(CommonArgs),
    /// Subharmonic iteration for det D²u = f/g with Dirichlet data.
    Mae(CommonArgs),
    /// Center-matching transport between two star domains.
    Ot(CommonArgs),
    /// Forward-warp an image through a stored or freshly solved map.
    Warp(CommonArgs),
    /// Rerun a reference experiment and emit CSV.
    Bench {
        #[arg(value_enum)]
        table: Table,
        #[command(flatten)]
        args: CommonArgs,
    },
}

/// Serialized potential plus the geometry needed to evaluate it again.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionFile {
    pub potential: BFormJson,
    /// Mesh in the coordinates the potential lives in.
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Map is `x ↦ ∇u(x + in_shift) + out_shift`.
    pub in_shift: [f64; 2],
    pub out_shift: [f64; 2],
    pub source_boundary: Vec<[f64; 2]>,
    pub source_center: [f64; 2],
    pub target_boundary: Option<Vec<[f64; 2]>>,
    pub target_center: Option<[f64; 2]>,
    pub report: Value,
}

fn xy(p: Point2) -> [f64; 2] {
    [p.x, p.y]
}

fn pts(v: &[Point2]) -> Vec<[f64; 2]> {
    v.iter().map(|&p| xy(p)).collect()
}

fn unpts(v: &[[f64; 2]]) -> Vec<Point2> {
    v.iter().map(|&[x, y]| Point2::new(x, y)).collect()
}

impl SolutionFile {
    fn new(
        u: &BForm,
        source: &StarDomain,
        target: Option<&StarDomain>,
        shifts: (Point2, Point2),
        report: Value,
    ) -> Self {
        let mesh = u.space.mesh();
        SolutionFile {
            potential: u.to_json(),
            vertices: pts(mesh.vertices()),
            triangles: mesh.triangles().to_vec(),
            in_shift: xy(shifts.0),
            out_shift: xy(shifts.1),
            source_boundary: pts(source.boundary()),
            source_center: xy(source.center()),
            target_boundary: target.map(|w| pts(w.boundary())),
            target_center: target.map(|w| xy(w.center())),
            report,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the map and the two domains.
    pub fn restore(&self) -> Result<(GradientMap, StarDomain, Option<StarDomain>)> {
        let mesh = Arc::new(Triangulation::new(
            unpts(&self.vertices),
            self.triangles.clone(),
        )?);
        let space = Arc::new(SplineSpace::new(
            mesh,
            self.potential.degree,
            self.potential.smoothness,
            true,
        )?);
        let u = BForm::from_json(space, &self.potential)?;
        let [ix, iy] = self.in_shift;
        let [ox, oy] = self.out_shift;
        let v = make_star_domain(
            &unpts(&self.source_boundary),
            Some(Point2::new(self.source_center[0], self.source_center[1])),
        )?;
        let w = match (&self.target_boundary, self.target_center) {
            (Some(b), Some([cx, cy])) => {
                Some(make_star_domain(&unpts(b), Some(Point2::new(cx, cy)))?)
            }
            _ => None,
        };
        Ok((
            GradientMap {
                u,
                in_shift: Point2::new(ix, iy),
                out_shift: Point2::new(ox, oy),
            },
            v,
            w,
        ))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

/// Source mesh and domain from `--mesh` or `--domain` (shape name or polyline file).
fn source_geometry(cfg: &RunConfig, default: &str) -> Result<(Triangulation, StarDomain)> {
    let res = cfg.resolution.unwrap_or(8);
    if let Some(m) = &cfg.mesh {
        let node = m.with_extension("node");
        let ele = m.with_extension("ele");
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let mesh = parse_mesh(&read(&node)?, &read(&ele)?)?;
        let dom = make_star_domain(&mesh.outer_boundary(), None)?;
        return Ok((mesh, dom));
    }
    let spec = cfg.domain.as_deref().unwrap_or(default);
    if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
        let dom = make_star_domain(&parse_polyline(&text)?, None)?;
        let mesh = star_mesh(&dom, res.div_ceil(2))?;
        let dom = make_star_domain(&mesh.outer_boundary(), Some(dom.center()))?;
        return Ok((mesh, dom));
    }
    let shape = Shape::parse(spec)?;
    let mesh = shape.mesh(res)?;
    let dom = make_star_domain(&mesh.outer_boundary(), shape.center())?;
    Ok((mesh, dom))
}

fn target_domain(spec: &str) -> Result<StarDomain> {
    if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
        return make_star_domain(&parse_polyline(&text)?, None);
    }
    let shape = Shape::parse(spec)?;
    make_star_domain(&shape.polyline(720), shape.center())
}

fn space_for(cfg: &RunConfig, mesh: Triangulation) -> Result<Arc<SplineSpace>> {
    Ok(Arc::new(SplineSpace::new(
        Arc::new(mesh),
        cfg.degree.unwrap_or(8),
        cfg.smoothness.unwrap_or(2),
        cfg.force(),
    )?))
}

fn maybe_trace(cfg: &RunConfig, trace: &IterationTrace) -> Result<()> {
    match &cfg.trace {
        Some(p) => write_file(p, trace.to_csv().as_bytes()),
        None => Ok(()),
    }
}

fn poisson(cfg: &RunConfig) -> Result<Value> {
    let exact = Manufactured::parse(cfg.bc.as_deref().unwrap_or("sin"))?;
    let (mesh, dom) = source_geometry(cfg, "unit-square")?;
    let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
    let sp = space_for(cfg, mesh)?;
    let t0 = Instant::now();
    let (u, rep) = poisson_solve(
        &sp,
        |p| -exact.laplacian(p),
        |p| exact.value(p),
        cfg.colloc_degree,
    )?;
    let secs = t0.elapsed().as_secs_f64();
    let (rmse, max_error) = grid_errors(&u, |p| exact.value(p))?;
    let report = json!({
        "n_v": nv,
        "n_t": nt,
        "dim": sp.dim(),
        "rmse": rmse,
        "max_error": max_error,
        "constraint_residual": rep.constraint_residual,
        "conditioning": rep.conditioning_flag,
        "time_s": secs,
    });
    if let Some(out) = &cfg.out {
        write_json(
            out,
            &SolutionFile::new(
                &u,
                &dom,
                None,
                (Point2::ORIGIN, Point2::ORIGIN),
                report.clone(),
            ),
        )?;
    }
    Ok(report)
}

fn density(spec: &str, dom: &StarDomain) -> Result<Density> {
    spec.parse::<DensityDescriptor>()?.build(dom)
}

fn mae(cfg: &RunConfig) -> Result<Value> {
    let exact = Manufactured::parse(cfg.bc.as_deref().unwrap_or("exp"))?;
    let (mesh, dom) = source_geometry(cfg, "square")?;
    let f = match &cfg.f {
        Some(s) => density(s, &dom)?,
        None => exact.mae_density(&mesh)?,
    };
    let g = density(cfg.g.as_deref().unwrap_or("const:1"), &dom)?;
    let sp = space_for(cfg, mesh)?;
    let dens = DensityPair::new(f, g)?;
    let mut sc = SubharmonicConfig {
        colloc_degree: cfg.colloc_degree,
        ..Default::default()
    };
    if let Some(n) = cfg.iters {
        sc.inner_iters = n;
    }
    if let Some(n) = cfg.stages {
        sc.stages = n;
    }
    if let Some(t) = cfg.tol {
        sc.stop_tol = t;
    }
    let t0 = Instant::now();
    let (u, trace) = subharmonic_solve(&sp, &dens, |p| exact.value(p), &sc)?;
    let secs = t0.elapsed().as_secs_f64();
    maybe_trace(cfg, &trace)?;
    let (rmse, max_error) = grid_errors(&u, |p| exact.value(p))?;
    let report = json!({
        "iterations": trace.iterations(),
        "rmse": rmse,
        "max_error": max_error,
        "diagnostics": iteration_diagnostics(&trace),
        "time_s": secs,
    });
    if let Some(out) = &cfg.out {
        write_json(
            out,
            &SolutionFile::new(
                &u,
                &dom,
                None,
                (Point2::ORIGIN, Point2::ORIGIN),
                report.clone(),
            ),
        )?;
    }
    Ok(report)
}

fn transport_config(cfg: &RunConfig) -> TransportConfig {
    let degree = cfg.degree.unwrap_or(8);
    let mut tc = TransportConfig {
        degree,
        smoothness: cfg.smoothness.unwrap_or(if degree >= 8 { 2 } else { 1 }),
        colloc_degree: cfg.colloc_degree,
        warm_start: cfg.warm_start.unwrap_or(false),
        ..Default::default()
    };
    if let Some(n) = cfg.outer_iters {
        tc.max_outer = n;
    }
    if let Some(n) = cfg.iters {
        tc.inner.inner_iters = n;
    }
    if let Some(t) = cfg.tol {
        tc.inner.stop_tol = t;
    }
    if let Some(n) = cfg.residual_grid {
        tc.residual_grid = n;
    }
    tc
}

/// Builds the transport problem; a constant `g` without an explicit mass is
/// set to `∫f / A(W)`.
fn transport_problem(cfg: &RunConfig, f_default: &str) -> Result<TransportProblem> {
    let (mesh, v) = source_geometry(cfg, "square")?;
    let w = match &cfg.target_domain {
        Some(s) => target_domain(s)?,
        None => v.clone(),
    };
    let f = density(cfg.f.as_deref().unwrap_or(f_default), &v)?;
    let gd: DensityDescriptor = cfg.g.as_deref().unwrap_or("const:1").parse()?;
    let mesh = Arc::new(mesh);
    if matches!(gd.kind, DensityKind::Const(_)) && gd.mass.is_none() {
        let c = constant_target_density(&f, &mesh, &w)?;
        return TransportProblem::new(v, mesh, w, DensityPair::new(f, Density::constant(c))?);
    }
    let g = gd.build(&w)?;
    TransportProblem::new(v, mesh, w, DensityPair::new(f, g)?)
}

fn solve_ot(cfg: &RunConfig, problem: &TransportProblem) -> Result<(TransportSolution, Value)> {
    let t0 = Instant::now();
    let sol = solve_transport(problem, &transport_config(cfg))?;
    let secs = t0.elapsed().as_secs_f64();
    maybe_trace(cfg, &sol.trace)?;
    let report = json!({
        "transport": sol.report,
        "diagnostics": iteration_diagnostics(&sol.trace),
        "iterations": sol.trace.iterations(),
        "time_s": secs,
    });
    Ok((sol, report))
}

fn ot(cfg: &RunConfig) -> Result<Value> {
    let problem = transport_problem(cfg, "const:1")?;
    let (sol, report) = solve_ot(cfg, &problem)?;
    if let Some(out) = &cfg.out {
        let shifts = (sol.map.in_shift, sol.map.out_shift);
        let mut v = problem.v.clone();
        if shifts.0 != Point2::ORIGIN {
            v = v.translated(shifts.0);
        }
        let file = SolutionFile::new(sol.u(), &v, Some(&problem.w), shifts, report.clone());
        write_json(out, &file)?;
    }
    Ok(report)
}

fn warp(cfg: &RunConfig) -> Result<Value> {
    let path = cfg
        .image
        .as_ref()
        .ok_or_else(|| Error::Config("warp needs --image".into()))?;
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("warp needs --out".into()))?;
    let img = RasterImage::read(path)?;
    let (map, v_mesh, w, solve_report) = match cfg.potential.as_deref() {
        Some("identity") => {
            let (mesh, dom) = source_geometry(cfg, "square")?;
            let sp = Arc::new(SplineSpace::new(Arc::new(mesh), 2, 0, false)?);
            let u = sp.interpolate(|p| 0.5 * p.norm_sq());
            let mesh = Arc::clone(sp.mesh_arc());
            let map = GradientMap {
                u,
                in_shift: Point2::ORIGIN,
                out_shift: Point2::ORIGIN,
            };
            (map, mesh, dom, Value::Null)
        }
        Some(file) => {
            let sf = SolutionFile::load(Path::new(file))?;
            let (map, v, w) = sf.restore()?;
            // The stored mesh lives in shifted coordinates; the image frame
            // uses the original source domain.
            let mesh = Arc::new(map.u.space.mesh().translated(-map.in_shift)?);
            let v = if map.in_shift != Point2::ORIGIN {
                v.translated(-map.in_shift)
            } else {
                v
            };
            (map, mesh, w.unwrap_or(v), sf.report)
        }
        None => {
            let floor = cfg.floor.unwrap_or(0.1);
            let f_default = format!("image:{},{floor}", path.display());
            let problem = transport_problem(cfg, &f_default)?;
            let (sol, report) = solve_ot(cfg, &problem)?;
            (
                sol.map,
                Arc::clone(&problem.mesh),
                problem.w.clone(),
                report,
            )
        }
    };
    let (lo, hi) = v_mesh.bbox();
    let img = img.with_frame(lo, hi)?;
    let (wd, ht) = (
        cfg.width.unwrap_or(img.width),
        cfg.height.unwrap_or(img.height),
    );
    let r = forward_warp(&img, &v_mesh, |x| map.apply(x), &w, wd, ht)?;
    r.image.write(out)?;
    let same_shape =
        (r.image.width, r.image.height, r.image.channels) == (img.width, img.height, img.channels);
    let p = if same_shape {
        Some(psnr(&img, &r.image)?)
    } else {
        None
    };
    Ok(json!({
        "prefill_coverage": r.prefill_coverage,
        "holes": r.holes,
        "fill_passes": r.fill_passes,
        "outside": r.outside,
        "psnr_db": p.filter(|v| v.is_finite()),
        "identical": p == Some(f64::INFINITY),
        "solve": solve_report,
    }))
}

fn bench_cmd(table: Table, cfg: &RunConfig) -> Result<Value> {
    let opts = BenchOptions {
        resolution: cfg.resolution,
        degree: cfg.degree,
        smoothness: cfg.smoothness,
        iters: cfg.iters,
        stages: cfg.stages,
        outer_iters: cfg.outer_iters,
        residual_grid: cfg.residual_grid,
    };
    let t = match table {
        Table::Table1 => bench::table1(&opts)?,
        Table::Table2 => bench::table2(&opts)?,
        Table::Table3 => bench::table3(&opts)?,
        Table::Table4 => bench::table4(&opts)?,
    };
    let csv = t.to_csv();
    match &cfg.out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(json!({ "table": t.name, "all_pass": t.all_pass }))
}

/// Runs one command and returns its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Poisson(a) => poisson(&a.resolve()?),
        Command::Mae(a) => mae(&a.resolve()?),
        Command::Ot(a) => ot(&a.resolve()?),
        Command::Warp(a) => warp(&a.resolve()?),
        Command::Bench { table, args } => bench_cmd(*table, &args.resolve()?),
    }
}

/// Error JSON printed on failure.
pub fn error_json(e: &Error) -> Value {
    json!({ "error": { "code": e.code(), "message": e.to_string() } })
}

/// Process exit status for an error category.
pub fn exit_code(e: &Error) -> i32 {
    match e.code() {
        "parse" => 2,
        "geometry" => 3,
        "solver" => 4,
        "density" => 5,
        "io" => 6,
        _ => 7,
    }
}
