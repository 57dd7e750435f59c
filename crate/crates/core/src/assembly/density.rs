use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Point2, StarDomain};

type DensityFn = dyn Fn(Point2) -> f64 + Send + Sync;

/// A positive density with known lower and upper bounds.
#[derive(Clone)]
pub struct Density {
    func: Arc<DensityFn>,
    pub lower: f64,
    pub upper: f64,
    pub label: String,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("label", &self.label)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl Density {
    pub fn new(
        label: impl Into<String>,
        lower: f64,
        upper: f64,
        func: impl Fn(Point2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Density {
            func: Arc::new(func),
            lower,
            upper,
            label: label.into(),
        }
    }

    pub fn constant(v: f64) -> Self {
        Density::new(format!("const:{v}"), v, v, move |_| v)
    }

    /// Bounds estimated from samples of `func`.
    pub fn sampled(
        label: impl Into<String>,
        func: impl Fn(Point2) -> f64 + Send + Sync + 'static,
        samples: &[Point2],
    ) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &p in samples {
            let v = func(p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Density::new(label, lo, hi, func)
    }

    #[inline]
    pub fn eval(&self, p: Point2) -> f64 {
        (self.func)(p)
    }

    /// The density multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Density {
        let inner = Arc::clone(&self.func);
        Density {
            func: Arc::new(move |p| s * inner(p)),
            lower: s * self.lower,
            upper: s * self.upper,
            label: format!("{}*{s}", self.label),
        }
    }

    /// `p ↦ self(p - z)`: the density carried along by a shift `z`.
    pub fn shifted(&self, z: Point2) -> Density {
        if z == Point2::ORIGIN {
            return self.clone();
        }
        let inner = Arc::clone(&self.func);
        Density {
            func: Arc::new(move |p| inner(p - z)),
            lower: self.lower,
            upper: self.upper,
            label: self.label.clone(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.lower == self.upper
    }
}

/// Source density `f` on `V` and target density `g` on `W`.
///
/// When a target domain is attached, `g` is evaluated at the radial
/// projection of its argument onto `W`.
#[derive(Debug, Clone)]
pub struct DensityPair {
    pub f: Density,
    pub g: Density,
    pub target: Option<StarDomain>,
}

impl DensityPair {
    /// Checks `f ≥ 0` and `0 < g₀ ≤ g_max`.
    pub fn new(f: Density, g: Density) -> Result<Self> {
        if !(f.lower >= 0.0 && f.upper.is_finite() && f.upper >= f.lower) {
            return Err(Error::DensityRange(format!(
                "source density bounds [{}, {}] must be finite and non-negative",
                f.lower, f.upper
            )));
        }
        if !(g.lower > 0.0 && g.upper.is_finite() && g.upper >= g.lower) {
            return Err(Error::DensityRange(format!(
                "target density bounds [{}, {}] must be finite and positive",
                g.lower, g.upper
            )));
        }
        Ok(DensityPair { f, g, target: None })
    }

    pub fn with_target(mut self, w: StarDomain) -> Self {
        self.target = Some(w);
        self
    }

    /// Lower bound `4 f₀ / g_max` for the squared Laplacian update.
    pub fn radicand_floor(&self) -> f64 {
        4.0 * self.f.lower / self.g.upper
    }

    /// `g(y)`, with `y` projected into the target domain if one is attached.
    pub fn g_at(&self, y: Point2) -> Result<f64> {
        let y = match &self.target {
            Some(w) => w.radial_clamp(y),
            None => y,
        };
        let v = self.g.eval(y);
        let slack = 1e-9 * self.g.upper.abs().max(1.0);
        if !(v >= self.g.lower - slack && v <= self.g.upper + slack) {
            return Err(Error::DensityRange(format!(
                "g({}, {}) = {v} outside [{}, {}]",
                y.x, y.y, self.g.lower, self.g.upper
            )));
        }
        Ok(v)
    }

    /// `f(x) / g(y)`.
    pub fn ratio(&self, x: Point2, y: Point2) -> Result<f64> {
        Ok(self.f.eval(x) / self.g_at(y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_validated() {
        assert!(DensityPair::new(Density::constant(1.0), Density::constant(0.0)).is_err());
        assert!(DensityPair::new(Density::constant(-1.0), Density::constant(1.0)).is_err());
        let p = DensityPair::new(Density::constant(0.0), Density::constant(2.0)).unwrap();
        assert_eq!(p.radicand_floor(), 0.0);
    }

    #[test]
    fn g_range_is_checked() {
        let g = Density::new("bad", 1.0, 2.0, |p: Point2| 1.0 + p.x);
        let p = DensityPair::new(Density::constant(1.0), g).unwrap();
        assert!(p.g_at(Point2::new(0.5, 0.0)).is_ok());
        assert!(matches!(
            p.g_at(Point2::new(3.0, 0.0)),
            Err(Error::DensityRange(_))
        ));
    }

    #[test]
    fn scaling() {
        let d = Density::constant(2.0).scaled(0.25);
        assert_eq!(d.eval(Point2::ORIGIN), 0.5);
        assert_eq!((d.lower, d.upper), (0.5, 0.5));
    }
}
