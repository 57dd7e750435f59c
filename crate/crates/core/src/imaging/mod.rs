//! Image-backed and analytic densities, PNM I/O and forward warping
//! through a gradient map.

mod density;
mod raster;
mod warp;

pub use density::{
    bfo_exact_map, bfo_q, density_from_image, gaussian_density, Builtin, DensityDescriptor,
    DensityKind,
};
pub use raster::{psnr, GeoFrame, RasterImage};
pub use warp::{fisheye_problem, forward_warp, WarpResult, MAX_OUTSIDE};
