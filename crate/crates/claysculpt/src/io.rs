//! Point clouds, scan labels, actions, and extrinsics on disk.
//!
//! Coordinates are written as `{:.8e}` (nine significant digits), which reads
//! back to a value that writes out identically.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use claysculpt_core::geom::WORLD_FRAME;
use claysculpt_core::{GraspAction, Label, Point3, PointCloud, RigidTransform};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_owned(),
            source,
        })?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Write {
        path: path.to_owned(),
        source,
    }
}

fn read_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Read {
        path: path.to_owned(),
        source,
    }
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(read_err(path))
}

pub fn format_coord(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::with_capacity(64 * cloud.len() + 200);
    body.push_str("ply\nformat ascii 1.0\n");
    body.push_str(&format!("comment frame={}\n", cloud.frame));
    body.push_str(&format!("element vertex {}\n", cloud.len()));
    body.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in &cloud.points {
        body.push_str(&format!("{} {} {}\n", format_coord(p.x), format_coord(p.y), format_coord(p.z)));
    }
    w.write_all(body.as_bytes()).map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    /// Property names, flagged `true` for list properties.
    props: Vec<(String, bool)>,
}

/// Reads the vertex positions of an ASCII PLY file. Other vertex properties and
/// other elements are skipped. The frame comes from a `comment frame=` line,
/// defaulting to the world frame.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let reader = open(path)?;
    let mut lines = reader.lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, l)) => Ok(Some((i + 1, l.map_err(read_err(path))?))),
            None => Ok(None),
        }
    };
    let bad = |line: usize, msg: &str| Error::parse(path, line, msg);

    match next_line()? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(bad(1, "not a PLY file")),
    }
    let mut frame = WORLD_FRAME.to_owned();
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let Some((ln, line)) = next_line()? else {
            return Err(bad(0, "header has no end_header"));
        };
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(bad(ln, "only ASCII PLY is supported"));
                }
            }
            Some("comment") => {
                let rest = line.trim_start()["comment".len()..].trim();
                if let Some(f) = rest.strip_prefix("frame=") {
                    frame = f.trim().to_owned();
                }
            }
            Some("obj_info") | None => {}
            Some("element") => {
                let name = words.next().ok_or_else(|| bad(ln, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad(ln, "element without a count"))?;
                elements.push(PlyElement {
                    name: name.to_owned(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| bad(ln, "property before any element"))?;
                let kind = words.next().ok_or_else(|| bad(ln, "property without a type"))?;
                let is_list = kind == "list";
                if is_list {
                    words.next();
                    words.next();
                }
                let name = words.next().ok_or_else(|| bad(ln, "property without a name"))?;
                el.props.push((name.to_owned(), is_list));
            }
            Some("end_header") => break,
            Some(other) => return Err(bad(ln, &format!("unexpected header keyword {other:?}"))),
        }
    }

    let mut points = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let axis = |n: &str| el.props.iter().position(|(p, l)| p == n && !l);
        let idx = if is_vertex {
            match (axis("x"), axis("y"), axis("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(bad(0, "vertex element lacks x, y, z")),
            }
        } else {
            None
        };
        for _ in 0..el.count {
            let Some((ln, line)) = next_line()? else {
                return Err(bad(0, &format!("file ends inside element {:?}", el.name)));
            };
            if is_vertex && el.props.iter().all(|(_, l)| !l) {
                let values: Vec<&str> = line.split_whitespace().collect();
                if values.len() != el.props.len() {
                    return Err(bad(ln, "wrong number of vertex values"));
                }
                let [x, y, z] = idx.unwrap();
                let num = |i: usize| -> Result<f64> {
                    values[i]
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(ln, &format!("bad coordinate {:?}", values[i])))
                };
                points.push(Point3::new(num(x)?, num(y)?, num(z)?));
            } else if is_vertex {
                return Err(bad(ln, "list properties on vertices are not supported"));
            }
        }
    }
    if !elements.iter().any(|e| e.name == "vertex") {
        return Err(bad(0, "no vertex element"));
    }
    Ok(PointCloud::with_frame(points, frame))
}

/// Headerless `x,y,z` lines.
pub fn write_xyz_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for p in &cloud.points {
        w.write_record([format_coord(p.x), format_coord(p.y), format_coord(p.z)])
            .map_err(|e| csv_write(path, e))?;
    }
    w.flush().map_err(write_err(path))
}

fn csv_write(path: &Path, e: csv::Error) -> Error {
    Error::Write {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    }
}

fn csv_read(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

pub fn read_xyz_csv(path: &Path, frame: &str) -> Result<PointCloud> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_read(path, e))?;
        if rec.len() != 3 {
            return Err(Error::parse(path, i + 1, "expected x,y,z"));
        }
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::parse(path, i + 1, "bad coordinate"))?;
        points.push(Point3::new(v[0], v[1], v[2]));
    }
    Ok(PointCloud::with_frame(points, frame))
}

/// Reads PLY or CSV by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => read_xyz_csv(path, WORLD_FRAME),
        _ => read_ply(path),
    }
}

/// One label per line, in point order.
pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for l in labels {
        w.write_record([l.as_str()]).map_err(|e| csv_write(path, e))?;
    }
    w.flush().map_err(write_err(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_read(path, e))?;
        let label = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: claysculpt_core::Error| Error::parse(path, i + 1, e.to_string()))?;
        out.push(label);
    }
    Ok(out)
}

/// Parses one `{"x":..,"y":..,"z":..,"rot_z":..,"d":..}` object.
pub fn parse_action(text: &str) -> std::result::Result<GraspAction, String> {
    let a: GraspAction = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if !a.is_finite() {
        return Err("action has non-finite fields".into());
    }
    Ok(GraspAction::new(a.center(), a.rot_z, a.d))
}

pub fn read_actions(path: &Path) -> Result<Vec<GraspAction>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_action(l).map_err(|m| Error::parse(path, i + 1, m)))
        .collect()
}

pub fn write_actions(path: &Path, actions: &[GraspAction]) -> Result<()> {
    let mut text = String::new();
    for a in actions {
        text.push_str(&serde_json::to_string(a).expect("actions serialize"));
        text.push('\n');
    }
    write_text(path, &text)
}

/// Named camera-to-world transforms as 4×4 row-major blocks.
pub fn format_extrinsics(cams: &[(String, RigidTransform)]) -> String {
    let mut s = String::from("# camera-to-world transforms, 4x4 row-major\n");
    for (name, t) in cams {
        s.push_str(name);
        s.push('\n');
        for row in t.to_rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

pub fn write_extrinsics(path: &Path, cams: &[(String, RigidTransform)]) -> Result<()> {
    write_text(path, &format_extrinsics(cams))
}

pub fn read_extrinsics(path: &Path) -> Result<Vec<(String, RigidTransform)>> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut out = Vec::new();
    while let Some((ln, name)) = lines.next() {
        let mut m = [[0.0; 4]; 4];
        for row in &mut m {
            let (rl, text) = lines
                .next()
                .ok_or_else(|| Error::parse(path, ln, format!("camera {name:?} needs 4 matrix rows")))?;
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|v| v.parse().ok())
                .collect::<Option<_>>()
                .filter(|v: &Vec<f64>| v.len() == 4)
                .ok_or_else(|| Error::parse(path, rl, "expected 4 numbers"))?;
            row.copy_from_slice(&vals);
        }
        let t = RigidTransform::from_rows(&m, 1e-6).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        out.push((name.to_owned(), t));
    }
    Ok(out)
}
