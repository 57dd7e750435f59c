//! Triangle `.node` / `.ele` reading and writing, plus plain polyline files.

use std::fmt::Write as _;

use super::point::Point2;
use super::triangulation::Triangulation;
use crate::error::{Error, Result};

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from '{tok}'"),
    })
}

/// Parses a Triangle-format mesh. The index base (0 or 1) is taken from the
/// first vertex index in the node file.
pub fn parse_mesh(node_text: &str, ele_text: &str) -> Result<Triangulation> {
    let mut nodes = data_lines(node_text);
    let (hline, header) = nodes.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty node file".into(),
    })?;
    let nv: usize = num(header[0], hline, "vertex count")?;
    if let Some(dim) = header.get(1) {
        if num::<usize>(dim, hline, "dimension")? != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: "only 2D node files are supported".into(),
            });
        }
    }
    let mut base = None;
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (line, toks) = nodes.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("node file ends after {k} of {nv} vertices"),
        })?;
        if toks.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: "vertex line needs an index and two coordinates".into(),
            });
        }
        let idx: usize = num(toks[0], line, "vertex index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 || idx != b + k {
            return Err(Error::Parse {
                line,
                msg: format!("expected vertex index {}, found {idx}", b.min(1) + k),
            });
        }
        vertices.push(Point2::new(
            num(toks[1], line, "x")?,
            num(toks[2], line, "y")?,
        ));
    }
    let base = base.unwrap_or(1);

    let mut eles = data_lines(ele_text);
    let (hline, header) = eles.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty ele file".into(),
    })?;
    let nt: usize = num(header[0], hline, "triangle count")?;
    let mut triangles = Vec::with_capacity(nt);
    for k in 0..nt {
        let (line, toks) = eles.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("ele file ends after {k} of {nt} triangles"),
        })?;
        if toks.len() < 4 {
            return Err(Error::Parse {
                line,
                msg: "triangle line needs an index and three vertices".into(),
            });
        }
        let mut tri = [0usize; 3];
        for (slot, tok) in tri.iter_mut().zip(&toks[1..4]) {
            let raw: i64 = num(tok, line, "vertex index")?;
            let v = raw - base as i64;
            if v < 0 || v as usize >= nv {
                return Err(Error::IndexOutOfRange(format!(
                    "line {line}: vertex {raw} outside {base}..{}",
                    nv + base - 1
                )));
            }
            *slot = v as usize;
        }
        triangles.push(tri);
    }
    Triangulation::new(vertices, triangles)
}

/// Serialises a mesh as 1-based `.node` and `.ele` text.
pub fn write_mesh(mesh: &Triangulation) -> (String, String) {
    let mut node = format!("{} 2 0 0\n", mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(node, "{} {:.17e} {:.17e}", i + 1, p.x, p.y);
    }
    let mut ele = format!("{} 3 0\n", mesh.num_triangles());
    for (i, t) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(ele, "{} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1);
    }
    (node, ele)
}

/// Parses a polyline: one `x y` pair per line, closed implicitly.
pub fn parse_polyline(text: &str) -> Result<Vec<Point2>> {
    let mut out = Vec::new();
    for (line, toks) in data_lines(text) {
        let toks: Vec<&str> = toks
            .iter()
            .flat_map(|t| t.split(','))
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: "expected 'x y'".into(),
            });
        }
        out.push(Point2::new(
            num(toks[0], line, "x")?,
            num(toks[1], line, "y")?,
        ));
    }
    Ok(out)
}
