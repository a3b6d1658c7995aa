use std::fmt::Write as _;
use std::path::Path;

use super::{CloudError, PointCloud, Rgb};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Prop {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Other,
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud, CloudError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ply(&text)
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<(), CloudError> {
    let path = path.as_ref();
    cloud.validate()?;
    std::fs::write(path, write_ply(cloud)).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// ASCII PLY text. Coordinates are fixed-point with 6 decimals, so equal
/// clouds always produce equal bytes.
pub fn write_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(64 + cloud.len() * 40);
    out.push_str("ply\nformat ascii 1.0\n");
    if !cloud.frame_id.is_empty() {
        let _ = writeln!(out, "comment frame_id {}", cloud.frame_id.replace('\n', " "));
    }
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{:.6} {:.6} {:.6}", clean(p.x), clean(p.y), clean(p.z));
        if let Some(c) = &cloud.colors {
            let _ = write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        out.push('\n');
    }
    out
}

// Avoids "-0.000000" so that sign noise below the printed precision does not change bytes.
fn clean(v: f64) -> f64 {
    if v.abs() < 5e-7 {
        0.0
    } else {
        v
    }
}

fn perr(line: usize, message: impl Into<String>) -> CloudError {
    CloudError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_ply(text: &str) -> Result<PointCloud, CloudError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(perr(n, "missing 'ply' magic")),
        None => return Err(perr(1, "empty file")),
    }

    let mut frame_id = String::new();
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<Prop> = Vec::new();
    let mut saw_format = false;
    let mut header_end = None;

    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(perr(n, "only 'format ascii 1.0' is supported"));
                }
                saw_format = true;
            }
            Some("comment") => {
                if let Some(rest) = line.strip_prefix("comment frame_id ") {
                    frame_id = rest.trim().to_string();
                }
            }
            Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| perr(n, "element without name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| perr(n, "element count is not an integer"))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(perr(n, "duplicate vertex element"));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    if vertex_count.is_none() && count > 0 {
                        return Err(perr(n, format!("element '{name}' before vertex is not supported")));
                    }
                    in_vertex = false;
                }
            }
            Some("property") => {
                if !in_vertex {
                    continue;
                }
                let ty = tok.next().ok_or_else(|| perr(n, "property without type"))?;
                if ty == "list" {
                    return Err(perr(n, "list properties on vertices are not supported"));
                }
                let name = tok.next().ok_or_else(|| perr(n, "property without name"))?;
                let prop = match name {
                    "x" => Prop::X,
                    "y" => Prop::Y,
                    "z" => Prop::Z,
                    "red" => Prop::Red,
                    "green" => Prop::Green,
                    "blue" => Prop::Blue,
                    _ => Prop::Other,
                };
                let float_ty = matches!(ty, "float" | "double" | "float32" | "float64");
                let byte_ty = matches!(ty, "uchar" | "uint8");
                match prop {
                    Prop::X | Prop::Y | Prop::Z if !float_ty => {
                        return Err(perr(n, format!("coordinate '{name}' must be float or double")))
                    }
                    Prop::Red | Prop::Green | Prop::Blue if !byte_ty => {
                        return Err(perr(n, format!("color '{name}' must be uchar")))
                    }
                    _ => {}
                }
                if prop != Prop::Other && props.contains(&prop) {
                    return Err(perr(n, format!("duplicate property '{name}'")));
                }
                props.push(prop);
            }
            Some("end_header") => {
                header_end = Some(n);
                break;
            }
            Some(other) => return Err(perr(n, format!("unexpected header keyword '{other}'"))),
        }
    }

    let header_end = header_end.ok_or_else(|| perr(text.lines().count().max(1), "missing end_header"))?;
    if !saw_format {
        return Err(perr(header_end, "missing format line"));
    }
    let count = vertex_count.ok_or_else(|| perr(header_end, "missing 'element vertex'"))?;
    let pos_of = |p: Prop| props.iter().position(|&q| q == p);
    let (xi, yi, zi) = match (pos_of(Prop::X), pos_of(Prop::Y), pos_of(Prop::Z)) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(perr(header_end, "vertex element needs x, y and z properties")),
    };
    let color_idx = match (pos_of(Prop::Red), pos_of(Prop::Green), pos_of(Prop::Blue)) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => return Err(perr(header_end, "color needs all of red, green and blue")),
    };

    let mut points = Vec::with_capacity(count);
    let mut colors: Option<Vec<Rgb>> = color_idx.map(|_| Vec::with_capacity(count));
    let mut last_line = header_end;
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    while points.len() < count {
        let (n, line) = body.next().ok_or_else(|| {
            perr(
                last_line + 1,
                format!("header declares {count} vertices, body has {}", points.len()),
            )
        })?;
        last_line = n;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != props.len() {
            return Err(perr(
                n,
                format!("expected {} values, found {}", props.len(), fields.len()),
            ));
        }
        let coord = |i: usize| -> Result<f64, CloudError> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| perr(n, format!("'{}' is not a number", fields[i])))?;
            if !v.is_finite() {
                return Err(perr(n, "non-finite coordinate"));
            }
            Ok(v)
        };
        points.push(Vec3::new(coord(xi)?, coord(yi)?, coord(zi)?));
        if let (Some(idx), Some(out)) = (color_idx, colors.as_mut()) {
            let mut rgb = [0u8; 3];
            for (c, &i) in rgb.iter_mut().zip(idx.iter()) {
                *c = fields[i]
                    .parse()
                    .map_err(|_| perr(n, format!("'{}' is not a uchar", fields[i])))?;
            }
            out.push(rgb);
        }
    }
    // Trailing data is only legal when another element follows the vertices.
    if let Some((n, _)) = body.next() {
        let declared_more = text.lines().take(header_end).any(|l| {
            let l = l.trim();
            l.starts_with("element ") && !l.starts_with("element vertex")
        });
        if !declared_more {
            return Err(perr(n, format!("more than {count} vertex lines")));
        }
    }

    Ok(PointCloud {
        points,
        colors,
        frame_id,
    })
}
