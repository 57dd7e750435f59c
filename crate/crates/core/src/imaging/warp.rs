//! Forward warping of an image on `V` through a transport map onto `W`.

use std::sync::Arc;

use rayon::prelude::*;

use super::raster::{GeoFrame, RasterImage};
use crate::assembly::{Density, DensityPair};
use crate::error::{Error, Result};
use crate::mesh::{make_star_domain, radial_mesh, Point2, StarDomain, Triangulation};
use crate::transport::TransportProblem;

/// Share of in-domain source pixels allowed to land outside `W`'s box.
pub const MAX_OUTSIDE: f64 = 0.05;
const HOLE_TARGET: f64 = 1e-3;
const MAX_FILL_PASSES: usize = 20;

#[derive(Debug, Clone)]
pub struct WarpResult {
    pub image: RasterImage,
    /// Filled fraction of target pixels inside `W` right after splatting.
    pub prefill_coverage: f64,
    /// Unfilled fraction of target pixels inside `W` after hole filling.
    pub holes: f64,
    pub fill_passes: usize,
    /// Sum over target pixels of splatted values (averaged per pixel) and the
    /// matching sum over the contributing source pixels, per channel summed.
    pub splat_total: f64,
    pub source_total: f64,
    /// Source pixels whose image fell outside `W`'s bounding box.
    pub outside: usize,
}

/// Splats every source pixel whose center lies in `v` onto the target
/// raster over `w`'s bounding box at the pixel containing `map(x)`,
/// averages collisions, then closes holes by 3×3 neighbour averaging.
/// Target pixels outside `W` are zero.
pub fn forward_warp(
    img: &RasterImage,
    v: &Triangulation,
    map: impl Fn(Point2) -> Result<Point2> + Sync,
    w: &StarDomain,
    out_width: usize,
    out_height: usize,
) -> Result<WarpResult> {
    let (lo, hi) = w.bbox();
    let frame = GeoFrame::new(lo, hi, out_width, out_height)?;
    let ch = img.channels;
    let n_out = out_width * out_height;

    struct Acc {
        sum: Vec<f64>,
        count: Vec<u32>,
        src: f64,
        inside: usize,
        outside: usize,
    }
    // Rows are mapped in parallel, then merged in row order so the float
    // sums do not depend on scheduling.
    type RowHits = (Vec<(usize, usize)>, usize, usize);
    let rows: Vec<RowHits> = (0..img.height)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let (mut hits, mut inside, mut outside) = (Vec::new(), 0, 0);
            for i in 0..img.width {
                let x = img.frame.to_domain(i as f64, j as f64);
                if v.locate(x).is_none() {
                    continue;
                }
                inside += 1;
                match frame.cell_of(map(x)?) {
                    Some((ti, tj)) => hits.push((i, tj * out_width + ti)),
                    None => outside += 1,
                }
            }
            Ok((hits, inside, outside))
        })
        .collect::<Result<_>>()?;
    let mut acc = Acc {
        sum: vec![0.0; n_out * ch],
        count: vec![0; n_out],
        src: 0.0,
        inside: 0,
        outside: 0,
    };
    for (j, (hits, inside, outside)) in rows.into_iter().enumerate() {
        acc.inside += inside;
        acc.outside += outside;
        for (i, k) in hits {
            acc.count[k] += 1;
            for c in 0..ch {
                let s = img.get(i, j, c);
                acc.sum[k * ch + c] += s;
                acc.src += s;
            }
        }
    }
    if acc.inside == 0 {
        return Err(Error::MapQuality(
            "no source pixel lies inside the source domain".into(),
        ));
    }
    let frac_out = acc.outside as f64 / acc.inside as f64;
    if frac_out > MAX_OUTSIDE {
        return Err(Error::MapQuality(format!(
            "{:.1}% of source pixels map outside the target box",
            100.0 * frac_out
        )));
    }

    let in_w: Vec<bool> = (0..n_out)
        .map(|k| w.contains(frame.to_domain((k % out_width) as f64, (k / out_width) as f64)))
        .collect();
    let total_in = in_w.iter().filter(|&&b| b).count().max(1);
    let mut out = RasterImage::new(out_width, out_height, ch)?.with_frame(lo, hi)?;
    out.maxval = img.maxval;
    let mut filled = vec![false; n_out];
    let mut splat_total = 0.0;
    for k in 0..n_out {
        if acc.count[k] > 0 && in_w[k] {
            filled[k] = true;
            for c in 0..ch {
                let v = acc.sum[k * ch + c] / acc.count[k] as f64;
                out.samples[k * ch + c] = v;
                splat_total += v;
            }
        }
    }
    let prefill = filled.iter().zip(&in_w).filter(|(f, i)| **f && **i).count();
    let mut holes = total_in - prefill;
    let mut passes = 0;
    while (holes as f64) / (total_in as f64) >= HOLE_TARGET && passes < MAX_FILL_PASSES {
        passes += 1;
        let snapshot = filled.clone();
        let prev = out.samples.clone();
        for k in 0..n_out {
            if !in_w[k] || snapshot[k] {
                continue;
            }
            let (i, j) = ((k % out_width) as isize, (k / out_width) as isize);
            let mut acc = vec![0.0; ch];
            let mut n = 0;
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= out_width as isize || nj >= out_height as isize {
                        continue;
                    }
                    let kk = nj as usize * out_width + ni as usize;
                    if snapshot[kk] {
                        n += 1;
                        for c in 0..ch {
                            acc[c] += prev[kk * ch + c];
                        }
                    }
                }
            }
            if n > 0 {
                filled[k] = true;
                holes -= 1;
                for (c, a) in acc.iter().enumerate() {
                    out.samples[k * ch + c] = a / n as f64;
                }
            }
        }
        if filled == snapshot {
            break;
        }
    }
    Ok(WarpResult {
        image: out,
        prefill_coverage: prefill as f64 / total_in as f64,
        holes: holes as f64 / total_in as f64,
        fill_passes: passes,
        splat_total,
        source_total: acc.src,
        outside: acc.outside,
    })
}

/// Fisheye rectification setup: `V` the unit disk (ring mesh with `rings`
/// rings), `W = [−½, ½]²`, `f ≡ ¼` and `g ≡ π/4`, so both masses are `π/4`.
pub fn fisheye_problem(rings: usize) -> Result<TransportProblem> {
    let mesh = Arc::new(radial_mesh(Point2::ORIGIN, |_| 1.0, rings)?);
    let v = make_star_domain(&mesh.outer_boundary(), Some(Point2::ORIGIN))?;
    let w = make_star_domain(
        &[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)].map(Point2::from),
        None,
    )?;
    let dens = DensityPair::new(
        Density::constant(0.25),
        Density::constant(std::f64::consts::FRAC_PI_4),
    )?;
    TransportProblem::balanced(v, mesh, w, dens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_rect;

    fn square(lo: f64, hi: f64) -> (Triangulation, StarDomain) {
        let m = uniform_rect(Point2::new(lo, lo), Point2::new(hi, hi), 2, 2).unwrap();
        let d = make_star_domain(
            &[(lo, lo), (hi, lo), (hi, hi), (lo, hi)].map(Point2::from),
            None,
        )
        .unwrap();
        (m, d)
    }

    fn pattern(n: usize, lo: f64, hi: f64) -> RasterImage {
        RasterImage::from_fn(n, n, Point2::new(lo, lo), Point2::new(hi, hi), |p| {
            0.5 + 0.4 * (5.0 * p.x).sin() * (3.0 * p.y).cos()
        })
        .unwrap()
    }

    #[test]
    fn identity_warp_is_lossless() {
        let (m, d) = square(-1.0, 1.0);
        let img = pattern(64, -1.0, 1.0);
        let r = forward_warp(&img, &m, Ok, &d, 64, 64).unwrap();
        assert_eq!(r.prefill_coverage, 1.0);
        assert!(super::super::raster::psnr(&img, &r.image).unwrap() >= 40.0);
        assert!((r.splat_total - r.source_total).abs() <= 1e-2 * r.source_total);
    }

    #[test]
    fn translation_shifts_the_image() {
        let (m, _) = square(0.0, 1.0);
        let w = make_star_domain(
            &[(1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0)].map(Point2::from),
            None,
        )
        .unwrap();
        let img = pattern(32, 0.0, 1.0);
        let z = Point2::new(1.0, 0.0);
        let r = forward_warp(&img, &m, |x| Ok(x + z), &w, 32, 32).unwrap();
        assert_eq!(r.prefill_coverage, 1.0);
        assert_eq!(r.image.samples, img.samples);
    }

    #[test]
    fn holes_are_filled() {
        let (m, d) = square(-1.0, 1.0);
        let img = pattern(20, -1.0, 1.0);
        // Expanding map onto a finer raster leaves gaps between splats.
        let r = forward_warp(&img, &m, Ok, &d, 50, 50).unwrap();
        assert!(r.prefill_coverage < 0.5);
        assert!(r.holes < 1e-3 && r.fill_passes > 0);
    }

    #[test]
    fn far_map_is_rejected() {
        let (m, d) = square(-1.0, 1.0);
        let img = pattern(10, -1.0, 1.0);
        let e = forward_warp(&img, &m, |x| Ok(x * 3.0), &d, 10, 10).unwrap_err();
        assert!(matches!(e, Error::MapQuality(_)));
    }

    #[test]
    fn fisheye_masses_balance() {
        let p = fisheye_problem(4).unwrap();
        assert!((p.mass_f - p.mass_g).abs() < 1e-6 * p.mass_g);
    }
}
