//! Property tests for kernel and pipeline invariants.

use std::sync::Arc;

use proptest::prelude::*;

use spline_ot::assembly::{smoothness_matrix, Density, DensityPair};
use spline_ot::bbspline::lattice::bernstein;
use spline_ot::bbspline::SplineSpace;
use spline_ot::imaging::{DensityDescriptor, RasterImage};
use spline_ot::mae::{iteration_diagnostics, subharmonic_solve, SubharmonicConfig};
use spline_ot::mesh::{
    make_star_domain, parse_mesh, uniform_rect, write_mesh, Point2, StarDomain, Triangulation,
};
use spline_ot::quadrature::triangle_rule_exact;
use spline_ot::transport::{
    pretranslate, solve_transport, Moved, TransportConfig, TransportProblem,
};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Square grid on `[-1,1]²` with interior vertices moved by up to `jitter·h`.
fn jittered(n: usize, offsets: &[(f64, f64)]) -> Triangulation {
    let m = uniform_rect(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), n, n).unwrap();
    let h = 2.0 / n as f64;
    let v = m
        .vertices()
        .iter()
        .zip(offsets.iter().cycle())
        .map(|(&p, &(dx, dy))| {
            if p.x.abs() < 1.0 - 1e-9 && p.y.abs() < 1.0 - 1e-9 {
                p + Point2::new(dx * h, dy * h)
            } else {
                p
            }
        })
        .collect();
    Triangulation::new(v, m.triangles().to_vec()).unwrap()
}

fn offsets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.25..0.25f64, -0.25..0.25f64), 16)
}

fn poly(coeffs: &[f64], d: i32, p: Point2) -> f64 {
    let mut k = 0;
    let mut s = 0.0;
    for a in 0..=d {
        for b in 0..=(d - a) {
            s += coeffs[k % coeffs.len()] * p.x.powi(a) * p.y.powi(b);
            k += 1;
        }
    }
    s
}

/// Convex polygon from sorted angles on a radius-perturbed circle around `c`.
fn convex_polygon(c: Point2, angles: &[f64], r: f64) -> Vec<Point2> {
    let mut a = angles.to_vec();
    a.sort_by(f64::total_cmp);
    a.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
    a.iter().map(|&t| c + Point2::from_angle(t) * r).collect()
}

fn square(lo: Point2, side: f64) -> StarDomain {
    let hi = lo + Point2::new(side, side);
    make_star_domain(
        &[lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)],
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn bernstein_partition_of_unity(d in 0usize..15, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (l0, l1) = (a, (1.0 - a) * b);
        let w = bernstein(d, [l0, l1, 1.0 - l0 - l1]);
        prop_assert_eq!(w.len(), (d + 1) * (d + 2) / 2);
        prop_assert!(w.iter().all(|&x| x >= -1e-15));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn triangle_rule_is_exact(deg in 0usize..12, a in 0usize..12) {
        // ∫_T λ₀^a λ₁^b = 2·a!·b!/(a+b+2)! over the unit-area-normalised rule.
        let a = a.min(deg);
        let b = deg - a;
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let exact = 2.0 * fact(a) * fact(b) / fact(a + b + 2);
        let q: f64 = triangle_rule_exact(deg).iter().map(|&(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32)).sum();
        prop_assert!((q - exact).abs() <= 1e-13 * exact.max(1e-3), "{} vs {}", q, exact);
    }

    #[test]
    fn mesh_io_round_trip(off in offsets()) {
        let m = jittered(4, &off);
        let (node, ele) = write_mesh(&m);
        let back = parse_mesh(&node, &ele).unwrap();
        prop_assert_eq!(back.content_hash(), m.content_hash());
    }

    #[test]
    fn locate_reconstructs_points(off in offsets(), x in -0.99..0.99f64, y in -0.99..0.99f64) {
        let m = jittered(4, &off);
        let p = Point2::new(x, y);
        let (t, l) = m.locate(p).expect("inside");
        let [a, b, c] = m.triangle_points(t);
        prop_assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(l.iter().all(|&v| v >= -1e-12));
        prop_assert!((a * l[0] + b * l[1] + c * l[2] - p).norm() < 1e-12);
    }

    #[test]
    fn ray_exit_lies_on_boundary_and_direction(
        cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.2..3.0f64,
        angles in prop::collection::vec(0.0..std::f64::consts::TAU, 5..40),
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let c = Point2::new(cx, cy);
        let poly = convex_polygon(c, &angles, r);
        prop_assume!(poly.len() >= 3);
        let Ok(dom) = make_star_domain(&poly, Some(c)) else { return Ok(()) };
        let p = dom.ray_exit_point(theta).unwrap();
        prop_assert!(dom.boundary_distance(p) < 1e-9);
        let dir = (p - c) * (1.0 / (p - c).norm());
        prop_assert!((dir - Point2::from_angle(theta)).norm() < 1e-9);
    }

    #[test]
    fn pretranslation_aligns_centers(x0 in -2.0..2.0f64, y0 in -2.0..2.0f64, s in 0.3..3.0f64) {
        let v = square(Point2::new(0.0, 0.0), 1.0);
        let w = square(Point2::new(x0, y0), s);
        let pre = pretranslate(&v, &w);
        let (vc, wc) = match pre.moved {
            Moved::Source => (v.center() + pre.shift, w.center()),
            Moved::Target => (v.center(), w.center() + pre.shift),
            Moved::Neither => (v.center(), w.center()),
        };
        prop_assert!((vc - wc).norm() < 1e-12);
        prop_assert!(pre.linear_cost >= 0.0);
    }

    #[test]
    fn density_descriptor_round_trip(a in 0.1..10.0f64, b in 0.0..10.0f64, t in -1.0..1.0f64, s in 0.01..2.0f64, m in prop::option::of(0.1..5.0f64)) {
        let mut text = format!("gauss:{a},{b},{t},{s}");
        if let Some(m) = m {
            text.push_str(&format!(";mass={m}"));
        }
        let d: DensityDescriptor = text.parse().unwrap();
        let again: DensityDescriptor = d.to_string().parse().unwrap();
        prop_assert_eq!(d, again);
    }

    #[test]
    fn pnm_round_trip(w in 1usize..12, h in 1usize..12, ch in prop::sample::select(vec![1usize, 3]), wide in any::<bool>(), seed in any::<u64>()) {
        let mut img = RasterImage::new(w, h, ch).unwrap();
        img.maxval = if wide { 65535 } else { 255 };
        let mut s = seed;
        for v in img.samples.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = ((s >> 33) % (img.maxval as u64 + 1)) as f64 / img.maxval as f64;
        }
        for binary in [false, true] {
            let back = RasterImage::from_pnm(&img.to_pnm(binary)).unwrap();
            prop_assert_eq!((back.width, back.height, back.channels, back.maxval), (w, h, ch, img.maxval));
            prop_assert_eq!(&back.samples, &img.samples);
        }
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn polynomials_are_reproduced_and_smooth(off in offsets(), coeffs in prop::collection::vec(-1.0..1.0f64, 45), x in -0.95..0.95f64, y in -0.95..0.95f64) {
        for (d, r) in [(5usize, 1usize), (8, 2)] {
            let sp = Arc::new(SplineSpace::new(Arc::new(jittered(3, &off)), d, r, false).unwrap());
            let f = |p: Point2| poly(&coeffs, d as i32, p);
            let s = sp.interpolate(f);
            let p = Point2::new(x, y);
            prop_assert!((s.eval(p, 0, 0).unwrap() - f(p)).abs() < 1e-11);
            let hc = smoothness_matrix(&sp).mul_vec(&s.coeffs);
            prop_assert!(hc.iter().all(|v| v.abs() < 1e-10));
        }
    }
}

proptest! {
    #![proptest_config(cfg(6))]

    /// Constant `f = c²` with `u = c|x|²/2`: the iteration keeps its
    /// nonnegativity, lower-bound and growth properties and converges.
    #[test]
    fn subharmonic_invariants_hold(c in 0.5..3.0f64) {
        let mesh = Arc::new(uniform_rect(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 2, 2).unwrap());
        let sp = Arc::new(SplineSpace::new(mesh, 5, 1, false).unwrap());
        let dens = DensityPair::new(Density::constant(c * c), Density::constant(1.0)).unwrap();
        let exact = move |p: Point2| 0.5 * c * p.norm_sq();
        let cfg = SubharmonicConfig { inner_iters: 10, stages: 1, ..Default::default() };
        let (u, tr) = subharmonic_solve(&sp, &dens, exact, &cfg).unwrap();
        prop_assert!(iteration_diagnostics(&tr).all_ok());
        prop_assert!((u.eval(Point2::new(0.3, -0.2), 0, 0).unwrap() - exact(Point2::new(0.3, -0.2))).abs() < 1e-8);
    }

    /// Uniform densities between a square and its translate: `∇u(x) = x + z`.
    #[test]
    fn translation_is_recovered(zx in -2.0..2.0f64, zy in -2.0..2.0f64) {
        let z = Point2::new(zx, zy);
        let mesh = Arc::new(uniform_rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), 2, 2).unwrap());
        let dens = DensityPair::new(Density::constant(1.0), Density::constant(1.0)).unwrap();
        let p = TransportProblem::new(square(Point2::ORIGIN, 1.0), mesh, square(z, 1.0), dens).unwrap();
        let sol = solve_transport(&p, &TransportConfig { degree: 5, smoothness: 1, ..Default::default() }).unwrap();
        for x in [Point2::new(0.1, 0.2), Point2::new(0.9, 0.5), Point2::new(0.5, 0.99)] {
            prop_assert!((sol.map.apply(x).unwrap() - (x + z)).norm() < 1e-8);
        }
        prop_assert!((sol.report.cost - z.norm_sq()).abs() < 1e-8 * (1.0 + z.norm_sq()));
        prop_assert!(sol.report.convexity_min_eig > 0.9);
    }
}
