//! Triangulations, star-shaped domains and mesh I/O.

mod generate;
mod io;
mod point;
mod star;
mod triangulation;

pub use generate::{l_shape, masked_grid, radial_mesh, star_mesh, uniform_rect, PolarKind, Shape};
pub use io::{parse_mesh, parse_polyline, write_mesh};
pub use point::{
    point_in_polygon, polygon_centroid, polygon_signed_area, polyline_distance, segment_distance,
    Point2,
};
pub use star::{
    boundary_collocation, make_star_domain, BoundaryPoint, StarDomain, STAR_CHECK_RAYS,
};
pub use triangulation::{Edge, Triangulation, LOCATE_TOL};
