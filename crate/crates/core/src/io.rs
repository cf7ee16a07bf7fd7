//! Text artifacts: CSV tables, SVG outlines, and failure records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bezier::ControlPolygon;
use crate::boundary::{MarkedPolygon, Marker};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

const MARKERS: [Marker; 4] = [Marker::K, Marker::L, Marker::Gamma, Marker::Wall];

/// One row per polygon vertex; the marker is that of the edge leaving it.
pub fn boundary_csv(polygon: &MarkedPolygon) -> String {
    let mut s = String::from("x1,x2,marker\n");
    for (p, m) in polygon.vertices().iter().zip(polygon.markers()) {
        let _ = writeln!(s, "{:.17e},{:.17e},{m}", p.x, p.y);
    }
    s
}

pub fn control_points_csv(cp: &ControlPolygon) -> String {
    let mut s = String::from("k,p1,p2\n");
    for (k, p) in cp.points().iter().enumerate() {
        let _ = writeln!(s, "{k},{:.17e},{:.17e}", p.x, p.y);
    }
    s
}

/// Nodal fields side by side, one row per mesh node.
pub fn field_csv(mesh: &TriangleMesh, fields: &[(&str, &[f64])]) -> Result<String> {
    if let Some((name, _)) = fields.iter().find(|(_, v)| v.len() != mesh.node_count()) {
        return Err(Error::InvalidArgument(format!("field `{name}` does not match the mesh")));
    }
    let mut s = String::from("x1,x2");
    for (name, _) in fields {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = write!(s, "{:.17e},{:.17e}", p.x, p.y);
        for (_, v) in fields {
            let _ = write!(s, ",{:.17e}", v[i]);
        }
        s.push('\n');
    }
    Ok(s)
}

fn stroke(m: Marker) -> &'static str {
    match m {
        Marker::K => "#c0392b",
        Marker::L => "#7f8c8d",
        Marker::Gamma => "#2471a3",
        Marker::Wall => "#000000",
    }
}

/// SVG outline with one `<path>` per marker class present. Runs of
/// consecutive edges with the same marker become subpaths; a class that
/// covers the whole outline is closed with `Z`. The x2 axis points up.
pub fn boundary_svg(polygon: &MarkedPolygon) -> String {
    let v = polygon.vertices();
    let n = v.len();
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo = crate::Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = crate::Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let pad = 0.05 * span;
    let scale = 800.0 / (span + 2.0 * pad);
    let px = |p: crate::Vec2| ((p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale);
    let (w, h) = ((hi.x - lo.x + 2.0 * pad) * scale, (hi.y - lo.y + 2.0 * pad) * scale);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#);
    for marker in MARKERS {
        let edges: Vec<usize> = (0..n).filter(|&i| polygon.markers()[i] == marker).collect();
        if edges.is_empty() {
            continue;
        }
        let mut d = String::new();
        if edges.len() == n {
            for (j, p) in v.iter().enumerate() {
                let (x, y) = px(*p);
                let _ = write!(d, "{}{x:.3},{y:.3} ", if j == 0 { 'M' } else { 'L' });
            }
            d.push('Z');
        } else {
            for &i in &edges {
                let prev = (i + n - 1) % n;
                if polygon.markers()[prev] != marker {
                    let (x, y) = px(v[i]);
                    let _ = write!(d, "M{x:.3},{y:.3} ");
                }
                let (x, y) = px(v[(i + 1) % n]);
                let _ = write!(d, "L{x:.3},{y:.3} ");
            }
        }
        let _ = writeln!(
            s,
            r#"  <path class="{marker}" d="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            d.trim_end(),
            stroke(marker)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Machine-readable record written when a command fails.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FailureRecord {
    pub command: String,
    pub kind: String,
    pub message: String,
    /// Last accepted iteration, for commands that iterate.
    pub iteration: Option<usize>,
    /// Artifacts written to help diagnose the failure.
    pub snapshots: Vec<String>,
    /// Failed checks, as `name: value vs limit`.
    pub checks: Vec<String>,
}

impl FailureRecord {
    pub fn from_error(command: &str, err: &Error) -> Self {
        let kind = format!("{err:?}");
        let kind = kind.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
        FailureRecord {
            command: command.into(),
            kind,
            message: err.to_string(),
            iteration: None,
            snapshots: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("failure record serializes") + "\n"
    }
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;

    fn square() -> MarkedPolygon {
        MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 2, [Marker::Gamma, Marker::Gamma, Marker::L, Marker::K])
            .unwrap()
    }

    #[test]
    fn csv_has_header_and_one_row_per_vertex() {
        let p = square();
        let csv = boundary_csv(&p);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,marker");
        assert_eq!(lines.len(), p.len() + 1);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 3);
        assert_eq!(first[0].parse::<f64>().unwrap(), p.vertices()[0].x);
    }

    #[test]
    fn svg_has_one_path_per_marker_class() {
        let svg = boundary_svg(&square());
        assert_eq!(svg.matches("<path").count(), 3);
        for m in ["K", "L", "gamma"] {
            assert_eq!(svg.matches(&format!("class=\"{m}\"")).count(), 1);
        }
        let whole = MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 2, [Marker::Wall; 4]).unwrap();
        let svg = boundary_svg(&whole);
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains(" Z\""));
    }

    #[test]
    fn field_csv_checks_lengths() {
        let mesh = crate::mesh::triangulate(&square(), 0.5).unwrap();
        let ones = vec![1.0; mesh.node_count()];
        let csv = field_csv(&mesh, &[("u", &ones)]).unwrap();
        assert!(csv.starts_with("x1,x2,u\n"));
        assert_eq!(csv.lines().count(), mesh.node_count() + 1);
        assert!(field_csv(&mesh, &[("u", &ones[1..])]).is_err());
    }

    #[test]
    fn failure_record_is_json() {
        let rec = FailureRecord::from_error("solve", &Error::MissingKey("eps".into()));
        let v: serde_json::Value = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(v["kind"], "MissingKey");
        assert_eq!(v["command"], "solve");
        assert!(v["message"].as_str().unwrap().contains("eps"));
    }
}
