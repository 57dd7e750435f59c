//! Density descriptors: constants, Gaussians, image luminance and named
//! analytic families, parsed from a small string language.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::raster::RasterImage;
use crate::assembly::Density;
use crate::error::{Error, Result};
use crate::mesh::{Point2, StarDomain};
use crate::quadrature::integrate_star;

/// Named analytic densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `det D²u` of the sinusoidal perturbation of the identity built from [`bfo_q`].
    BfoQ,
    /// Four Gaussian bumps `2 + 25 exp(−|x − c|²/0.08)`, `c` the corner of `x`'s quadrant.
    CornerGaussians,
    /// `2 + 25 exp(−|x|²/0.08)`.
    CenterGaussian,
    /// `(1 + |x|²) e^{|x|²}`, the Monge–Ampère data of `e^{|x|²/2}`.
    MaeExp,
    /// `max(0, 1 − 0.2/|x − (½,½)|)`, the data of the `C¹` cone-like solution.
    MaeCone,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::BfoQ,
        Builtin::CornerGaussians,
        Builtin::CenterGaussian,
        Builtin::MaeExp,
        Builtin::MaeCone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::BfoQ => "bfo-q",
            Builtin::CornerGaussians => "corner-gaussians",
            Builtin::CenterGaussian => "center-gaussian",
            Builtin::MaeExp => "mae-exp",
            Builtin::MaeCone => "mae-cone",
        }
    }

    pub fn eval(self, p: Point2) -> f64 {
        match self {
            Builtin::BfoQ => {
                let ([a, da, dda], [b, db, ddb]) = (bfo_q(p.x), bfo_q(p.y));
                1.0 + 4.0 * (dda * b + a * ddb) + 16.0 * (a * b * dda * ddb - da * da * db * db)
            }
            Builtin::CornerGaussians => {
                let c = Point2::new(
                    if p.x < 0.0 { -1.0 } else { 1.0 },
                    if p.y < 0.0 { -1.0 } else { 1.0 },
                );
                bump(p - c)
            }
            Builtin::CenterGaussian => bump(p),
            Builtin::MaeExp => {
                let r2 = p.norm_sq();
                (1.0 + r2) * r2.exp()
            }
            Builtin::MaeCone => (1.0 - 0.2 / (p - CONE_APEX).norm()).max(0.0),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown builtin density '{s}'")))
    }
}

const CONE_APEX: Point2 = Point2 { x: 0.5, y: 0.5 };

fn bump(d: Point2) -> f64 {
    2.0 + 25.0 * (-0.5 * d.norm_sq() / 0.04).exp()
}

/// `q(z) = (−z²/(8π) + 1/(256π³) + 1/(32π)) cos 8πz + z/(32π²) sin 8πz`
/// with its first two derivatives.
pub fn bfo_q(z: f64) -> [f64; 3] {
    let a = -z * z / (8.0 * PI) + 1.0 / (256.0 * PI.powi(3)) + 1.0 / (32.0 * PI);
    let da = -z / (4.0 * PI);
    let dda = -1.0 / (4.0 * PI);
    let b = z / (32.0 * PI * PI);
    let db = 1.0 / (32.0 * PI * PI);
    let w = 8.0 * PI;
    let (c, s) = ((w * z).cos(), (w * z).sin());
    let v = a * c + b * s;
    let d1 = da * c - a * w * s + db * s + b * w * c;
    let d2 = dda * c - 2.0 * da * w * s - a * w * w * c + 2.0 * db * w * c - b * w * w * s;
    [v, d1, d2]
}

/// Exact transport map `x + 4 (q′(x₁) q(x₂), q(x₁) q′(x₂))` for [`Builtin::BfoQ`]
/// with uniform target density.
pub fn bfo_exact_map(p: Point2) -> Point2 {
    let ([a, da, _], [b, db, _]) = (bfo_q(p.x), bfo_q(p.y));
    Point2::new(p.x + 4.0 * da * b, p.y + 4.0 * a * db)
}

/// `exp(α(x − t)² + β(y − s)²)`.
pub fn gaussian_density(
    alpha: f64,
    beta: f64,
    t: f64,
    s: f64,
) -> impl Fn(Point2) -> f64 + Send + Sync + Copy {
    move |p: Point2| (alpha * (p.x - t).powi(2) + beta * (p.y - s).powi(2)).exp()
}

/// Luminance density of an image whose frame covers `domain`'s bounding box:
/// bilinear between pixel centers, floored at `floor`, and equal to `floor`
/// outside the domain.
pub fn density_from_image(img: &RasterImage, floor: f64, domain: &StarDomain) -> Result<Density> {
    if !(floor > 0.0) {
        return Err(Error::DensityRange(format!(
            "image floor {floor} must be positive"
        )));
    }
    let (lo, hi) = domain.bbox();
    let lum = img.luminance().with_frame(lo, hi)?;
    let top = lum.samples.iter().fold(floor, |m, &v| m.max(v));
    let dom = domain.clone();
    let label = format!("image:{}x{},{floor}", img.width, img.height);
    Ok(Density::new(label, floor, top, move |p| {
        if dom.contains(p) || dom.boundary_distance(p) < 1e-12 {
            lum.bilinear(p, 0).max(floor)
        } else {
            floor
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Const(f64),
    Gaussian {
        alpha: f64,
        beta: f64,
        t: f64,
        s: f64,
    },
    Image {
        path: PathBuf,
        floor: f64,
    },
    Builtin(Builtin),
}

/// A parsed density string, optionally rescaled to a prescribed mass.
///
/// Grammar: `const:v`, `gauss:α,β,t,s`, `image:path,floor`, `builtin:name`,
/// each optionally followed by `;mass=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDescriptor {
    pub kind: DensityKind,
    pub mass: Option<f64>,
}

impl fmt::Display for DensityDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DensityKind::Const(v) => write!(f, "const:{v}")?,
            DensityKind::Gaussian { alpha, beta, t, s } => {
                write!(f, "gauss:{alpha},{beta},{t},{s}")?
            }
            DensityKind::Image { path, floor } => write!(f, "image:{},{floor}", path.display())?,
            DensityKind::Builtin(b) => write!(f, "builtin:{}", b.name())?,
        }
        if let Some(m) = self.mass {
            write!(f, ";mass={m}")?;
        }
        Ok(())
    }
}

fn num(s: &str, ctx: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad number '{s}' in density '{ctx}'")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!(
            "non-finite number in density '{ctx}'"
        )));
    }
    Ok(v)
}

impl FromStr for DensityDescriptor {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (body, mass) = match text.split_once(';') {
            Some((b, opt)) => {
                let m = opt
                    .trim()
                    .strip_prefix("mass=")
                    .ok_or_else(|| Error::Config(format!("unknown density option '{opt}'")))?;
                let m = num(m, text)?;
                if !(m > 0.0) {
                    return Err(Error::Config(format!("mass must be positive in '{text}'")));
                }
                (b, Some(m))
            }
            None => (text, None),
        };
        let (head, args) = body
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("density '{text}' lacks a 'kind:' prefix")))?;
        let kind = match head.trim() {
            "const" => DensityKind::Const(num(args, text)?),
            "gauss" => {
                let v: Vec<f64> = args
                    .split(',')
                    .map(|a| num(a, text))
                    .collect::<Result<_>>()?;
                let [alpha, beta, t, s] = v[..] else {
                    return Err(Error::Config(format!(
                        "gauss needs 4 parameters in '{text}'"
                    )));
                };
                DensityKind::Gaussian { alpha, beta, t, s }
            }
            "image" => {
                let (path, floor) = args.rsplit_once(',').ok_or_else(|| {
                    Error::Config(format!("image density needs 'path,floor' in '{text}'"))
                })?;
                DensityKind::Image {
                    path: PathBuf::from(path.trim()),
                    floor: num(floor, text)?,
                }
            }
            "builtin" => DensityKind::Builtin(args.trim().parse()?),
            k => return Err(Error::Config(format!("unknown density kind '{k}'"))),
        };
        Ok(DensityDescriptor { kind, mass })
    }
}

impl DensityDescriptor {
    /// Builds the density over `domain`; bounds are exact for constants and
    /// Gaussians on the bounding box and sampled on a 201² grid otherwise.
    pub fn build(&self, domain: &StarDomain) -> Result<Density> {
        let (lo, hi) = domain.bbox();
        let samples: Vec<Point2> = (0..201 * 201)
            .map(|k| {
                let (i, j) = (k % 201, k / 201);
                Point2::new(
                    lo.x + (hi.x - lo.x) * i as f64 / 200.0,
                    lo.y + (hi.y - lo.y) * j as f64 / 200.0,
                )
            })
            .filter(|&p| domain.contains(p) || domain.boundary_distance(p) < 1e-12)
            .collect();
        let d = match &self.kind {
            DensityKind::Const(v) => Density::constant(*v),
            DensityKind::Gaussian { alpha, beta, t, s } => {
                let sq = |a: f64, b: f64, c: f64| {
                    let far = (a - c).powi(2).max((b - c).powi(2));
                    let near = if (a..=b).contains(&c) {
                        0.0
                    } else {
                        (a - c).powi(2).min((b - c).powi(2))
                    };
                    (near, far)
                };
                let (nx, fx) = sq(lo.x, hi.x, *t);
                let (ny, fy) = sq(lo.y, hi.y, *s);
                let ends = |k: f64, n: f64, f: f64| {
                    if k >= 0.0 {
                        (k * n, k * f)
                    } else {
                        (k * f, k * n)
                    }
                };
                let (ax, bx) = ends(*alpha, nx, fx);
                let (ay, by) = ends(*beta, ny, fy);
                Density::new(
                    self.to_string(),
                    (ax + ay).exp(),
                    (bx + by).exp(),
                    gaussian_density(*alpha, *beta, *t, *s),
                )
            }
            DensityKind::Image { path, floor } => {
                density_from_image(&RasterImage::read(path)?, *floor, domain)?
            }
            DensityKind::Builtin(b) => {
                let b = *b;
                let mut d = Density::sampled(self.to_string(), move |p| b.eval(p), &samples);
                d.lower = d.lower.max(0.0);
                d
            }
        };
        if !(d.lower >= 0.0 && d.upper.is_finite()) {
            return Err(Error::DensityRange(format!(
                "density '{self}' has bounds [{}, {}] on the domain",
                d.lower, d.upper
            )));
        }
        match self.mass {
            Some(m) => {
                let cur = integrate_star(domain, |p| d.eval(p), 8, 16);
                if !(cur > 0.0) {
                    return Err(Error::DensityRange(format!(
                        "density '{self}' has zero mass"
                    )));
                }
                Ok(d.scaled(m / cur))
            }
            None => Ok(d),
        }
    }
}
