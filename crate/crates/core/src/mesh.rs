//! Conforming triangulation of a marked polygon.
//!
//! Meshes come from a constrained Delaunay triangulation of the boundary
//! polyline followed by Ruppert-style refinement (spade). The input polygon
//! vertices keep their indices as mesh nodes 0..n, so Γ sample i is node i.

use std::collections::HashMap;
use std::fmt::Write as _;

use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::boundary::{Marker, MarkedPolygon};
use crate::error::{Error, Result};
use crate::geom::{orient, point_segment_distance, Vec2};

pub const DEFAULT_ANGLE_FLOOR_DEG: f64 = 20.0;

/// Boundary edge oriented counterclockwise with respect to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub marker: Marker,
    /// Index of the polygon edge this mesh edge lies on.
    pub segment: usize,
    /// The unique triangle containing this edge.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    target_h: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    pub target_h: f64,
    pub angle_floor_deg: f64,
    /// How many times the area bound may be halved to meet the circumradius bound.
    pub max_area_halvings: usize,
}

impl MeshOptions {
    pub fn new(target_h: f64) -> Self {
        MeshOptions { target_h, angle_floor_deg: DEFAULT_ANGLE_FLOOR_DEG, max_area_halvings: 8 }
    }
}

fn circumradius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = orient(a, b, c).abs();
    a.distance(b) * b.distance(c) * c.distance(a) / (2.0 * area2)
}

fn min_angle(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let ang = |p: Vec2, q: Vec2, r: Vec2| {
        let (u, v) = (q - p, r - p);
        u.cross(v).abs().atan2(u.dot(v))
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

impl TriangleMesh {
    /// Builds a mesh from raw connectivity. Boundary edges are recovered as
    /// the edges used by exactly one triangle and matched to polygon edges of
    /// `polygon` by position.
    pub fn from_parts(
        nodes: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        polygon: &MarkedPolygon,
        target_h: f64,
    ) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::MeshIntegrity(format!("triangle {t} references a missing node")));
            }
            if orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
                return Err(Error::MeshIntegrity(format!("triangle {t} is not positively oriented")));
            }
        }
        let boundary_edges = match_boundary(&nodes, &triangles, polygon)?;
        Ok(TriangleMesh { nodes, triangles, boundary_edges, target_h })
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn target_h(&self) -> f64 {
        self.target_h
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * orient(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_vertices(t);
                min_angle(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn max_circumradius(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_vertices(t);
                circumradius(a, b, c)
            })
            .fold(0.0, f64::max)
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        self.nodes[e.nodes[0]].distance(self.nodes[e.nodes[1]])
    }

    /// Outward unit normal of a boundary edge.
    pub fn edge_normal(&self, e: &BoundaryEdge) -> Vec2 {
        let d = self.nodes[e.nodes[1]] - self.nodes[e.nodes[0]];
        d.rot_cw() * (1.0 / d.norm())
    }

    pub fn edge_midpoint(&self, e: &BoundaryEdge) -> Vec2 {
        self.nodes[e.nodes[0]].lerp(self.nodes[e.nodes[1]], 0.5)
    }

    /// For every node, the set of markers of the boundary edges touching it.
    pub fn node_markers(&self) -> Vec<Vec<Marker>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for e in &self.boundary_edges {
            for &n in &e.nodes {
                if !out[n].contains(&e.marker) {
                    out[n].push(e.marker);
                }
            }
        }
        out
    }

    /// Same connectivity with moved nodes. Fails if a triangle flips or collapses.
    pub fn with_nodes(&self, nodes: Vec<Vec2>) -> Result<TriangleMesh> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::InvalidArgument("node count mismatch".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
                return Err(Error::MeshQuality(format!("triangle {t} inverted by node motion")));
            }
        }
        Ok(TriangleMesh { nodes, ..self.clone() })
    }

    /// Splits every triangle into four. New boundary nodes can be moved by
    /// `project`, which receives the midpoint and the marker of its edge.
    pub fn refine_uniform(&self, project: Option<&dyn Fn(Vec2, Marker) -> Vec2>) -> Result<TriangleMesh> {
        let mut nodes = self.nodes.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let boundary: HashMap<(usize, usize), Marker> = self
            .boundary_edges
            .iter()
            .map(|e| ((e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])), e.marker))
            .collect();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Vec2>| -> usize {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                let mut p = nodes[a].lerp(nodes[b], 0.5);
                if let (Some(f), Some(&m)) = (project, boundary.get(&key)) {
                    p = f(p, m);
                }
                nodes.push(p);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        for e in &self.boundary_edges {
            let [a, b] = e.nodes;
            let m = mids[&(a.min(b), a.max(b))];
            for nodes_ in [[a, m], [m, b]] {
                let triangle = *owner
                    .get(&(nodes_[0], nodes_[1]))
                    .ok_or_else(|| Error::MeshIntegrity("refined boundary edge has no owner".into()))?;
                boundary_edges.push(BoundaryEdge { nodes: nodes_, triangle, ..*e });
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            if orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
                return Err(Error::MeshQuality(format!("refined triangle {t} is inverted")));
            }
        }
        Ok(TriangleMesh { nodes, triangles, boundary_edges, target_h: 0.5 * self.target_h })
    }

    /// Plain-text export: a header line followed by node, triangle and edge records.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodes {} triangles {} edges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e}", p.x, p.y);
        }
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        for (i, e) in self.boundary_edges.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", e.nodes[0], e.nodes[1], e.marker);
        }
        s
    }
}

fn match_boundary(nodes: &[Vec2], triangles: &[[usize; 3]], polygon: &MarkedPolygon) -> Result<Vec<BoundaryEdge>> {
    let mut count: HashMap<(usize, usize), (usize, usize, [usize; 2])> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = count.entry((a.min(b), a.max(b))).or_insert((0, t, [a, b]));
            e.0 += 1;
        }
    }
    let mut loose: Vec<((usize, usize), usize, [usize; 2])> = Vec::new();
    for (key, (n, t, dir)) in count {
        match n {
            1 => loose.push((key, t, dir)),
            2 => {}
            _ => {
                return Err(Error::MeshIntegrity(format!(
                    "edge {key:?} is shared by {n} triangles"
                )))
            }
        }
    }
    loose.sort_unstable_by_key(|x| x.0);

    let np = polygon.len();
    let scale = polygon.vertices().iter().fold(1.0f64, |a, p| a.max(p.norm()));
    let tol = 1e-9 * scale;
    let mut segment_of = HashMap::new();
    let mut segments_for = |node: usize| -> Result<Vec<usize>> {
        if node < np && nodes[node] == polygon.vertices()[node] {
            return Ok(vec![(node + np - 1) % np, node]);
        }
        if let Some(s) = segment_of.get(&node) {
            return Ok(vec![*s]);
        }
        let p = nodes[node];
        let (best, dist) = (0..np)
            .map(|s| {
                let (a, b) = polygon.edge(s);
                (s, point_segment_distance(p, a, b))
            })
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if dist > tol {
            return Err(Error::MeshIntegrity(format!("boundary node {node} at {p:?} is off the polygon")));
        }
        segment_of.insert(node, best);
        Ok(vec![best])
    };

    let mut out = Vec::with_capacity(loose.len());
    for (_, triangle, [a, b]) in loose {
        let sa = segments_for(a)?;
        let sb = segments_for(b)?;
        let segment = sa
            .iter()
            .copied()
            .find(|s| sb.contains(s))
            .or_else(|| {
                // a polygon vertex adjacent to a node on the far side of one of its segments
                let mid = nodes[a].lerp(nodes[b], 0.5);
                sa.iter().chain(&sb).copied().find(|&s| {
                    let (p, q) = polygon.edge(s);
                    point_segment_distance(mid, p, q) <= tol
                })
            })
            .ok_or_else(|| Error::MeshIntegrity(format!("boundary edge ({a}, {b}) matches no polygon edge")))?;
        out.push(BoundaryEdge { nodes: [a, b], marker: polygon.markers()[segment], segment, triangle });
    }
    // within a segment, order edges along its direction
    out.sort_by(|x, y| {
        x.segment.cmp(&y.segment).then_with(|| {
            let (p, _) = polygon.edge(x.segment);
            let dx = nodes[x.nodes[0]].distance(p);
            let dy = nodes[y.nodes[0]].distance(p);
            dx.total_cmp(&dy)
        })
    });
    Ok(out)
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

fn build_cdt(polygon: &MarkedPolygon) -> Result<(Cdt, Vec<usize>)> {
    let mut cdt = Cdt::new();
    let mut handles = Vec::with_capacity(polygon.len());
    for p in polygon.vertices() {
        let h = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::InfeasibleGeometry(format!("vertex {p:?} rejected by triangulator: {e:?}")))?;
        handles.push(h);
    }
    if cdt.num_vertices() != polygon.len() {
        return Err(Error::InfeasibleGeometry("polygon has duplicate vertices".into()));
    }
    for i in 0..polygon.len() {
        let j = (i + 1) % polygon.len();
        if cdt.add_constraint_and_split(handles[i], handles[j], |v| v).len() != 1 {
            return Err(Error::InfeasibleGeometry(format!("polygon edge {i} passes through another vertex")));
        }
    }
    let index = handles.iter().map(|h| h.index()).collect();
    Ok((cdt, index))
}

/// Refined constrained Delaunay mesh of the polygon interior with all
/// circumradii ≤ target_h and all angles ≥ the angle floor.
pub fn triangulate<P: AsRef<MarkedPolygon>>(boundary: &P, target_h: f64) -> Result<TriangleMesh> {
    triangulate_with(boundary.as_ref(), &MeshOptions::new(target_h))
}

pub fn triangulate_with(polygon: &MarkedPolygon, opts: &MeshOptions) -> Result<TriangleMesh> {
    let h = opts.target_h;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("target_h must be positive, got {h}")));
    }
    let area = polygon.signed_area();
    let extent = polygon.vertices().iter().fold(0.0f64, |a, p| a.max(p.norm()));
    if !(area > 1e-12 * extent * extent) {
        return Err(Error::InfeasibleGeometry(format!("polygon area {area:e} is not positive")));
    }

    // largest triangle with circumradius h is equilateral
    let mut max_area = 0.75 * 3f64.sqrt() * h * h;
    for _ in 0..=opts.max_area_halvings {
        let mesh = refine_once(polygon, opts, max_area, area)?;
        if mesh.max_circumradius() <= h {
            return Ok(mesh);
        }
        max_area *= 0.5;
    }
    Err(Error::MeshQuality(format!(
        "circumradius bound {h} not met after {} area halvings",
        opts.max_area_halvings
    )))
}

fn refine_once(polygon: &MarkedPolygon, opts: &MeshOptions, max_area: f64, area: f64) -> Result<TriangleMesh> {
    let (mut cdt, index) = build_cdt(polygon)?;
    let budget = 20 * polygon.len() + (40.0 * area / max_area) as usize;
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .with_angle_limit(spade::AngleLimit::from_deg(opts.angle_floor_deg))
        .with_max_allowed_area(max_area)
        .with_max_additional_vertices(budget);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::MeshQuality(format!(
            "refinement ran out of its {budget}-vertex budget"
        )));
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().copied().collect();

    // polygon vertices first, in polygon order, then Steiner points by spade index
    let mut remap = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes = Vec::with_capacity(cdt.num_vertices());
    for (i, &h) in index.iter().enumerate() {
        remap[h] = i;
        nodes.push(polygon.vertices()[i]);
    }
    let mut triangles = Vec::new();
    let mut faces: Vec<_> = cdt.inner_faces().filter(|f| !excluded.contains(&f.fix())).collect();
    faces.sort_by_key(|f| f.fix().index());
    for v in cdt.vertices() {
        let k = v.fix().index();
        if remap[k] == usize::MAX {
            remap[k] = nodes.len();
            let p = v.position();
            nodes.push(Vec2::new(p.x, p.y));
        }
    }
    for f in faces {
        let [a, b, c] = f.vertices().map(|v| remap[v.fix().index()]);
        triangles.push([a, b, c]);
    }
    // Steiner points that ended up only in excluded faces would be orphans
    let mut used = vec![false; nodes.len()];
    for t in &triangles {
        for &i in t {
            used[i] = true;
        }
    }
    if used.iter().take(polygon.len()).any(|u| !u) {
        return Err(Error::MeshIntegrity("a polygon vertex is not used by any triangle".into()));
    }
    let mut compact = vec![usize::MAX; nodes.len()];
    let mut kept = Vec::with_capacity(nodes.len());
    for (i, &p) in nodes.iter().enumerate() {
        if used[i] {
            compact[i] = kept.len();
            kept.push(p);
        }
    }
    for t in triangles.iter_mut() {
        *t = t.map(|i| compact[i]);
    }
    let mesh = TriangleMesh::from_parts(kept, triangles, polygon, opts.target_h)?;

    let floor = opts.angle_floor_deg * (1.0 - 1e-9);
    let worst = mesh.min_angle_deg();
    if worst < floor {
        return Err(Error::MeshQuality(format!(
            "smallest angle {worst:.3}° is below the floor {:.1}°",
            opts.angle_floor_deg
        )));
    }
    let covered = mesh.total_area();
    if (covered - area).abs() > 1e-9 * area {
        return Err(Error::MeshIntegrity(format!("mesh area {covered} differs from polygon area {area}")));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::ControlPolygon;
    use crate::boundary::{assemble_boundary, AxisSpec};

    fn unit_square() -> MarkedPolygon {
        MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 1, [Marker::Wall; 4]).unwrap()
    }

    fn check_conformity(mesh: &TriangleMesh, poly: &MarkedPolygon) {
        for t in 0..mesh.triangles().len() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        let total: f64 = mesh.boundary_edges().iter().map(|e| mesh.edge_length(e)).sum();
        let perimeter: f64 = (0..poly.len()).map(|i| {
            let (a, b) = poly.edge(i);
            a.distance(b)
        }).sum();
        assert!((total - perimeter).abs() < 1e-12 * perimeter.max(1.0));
        for e in mesh.boundary_edges() {
            let tri = mesh.triangles()[e.triangle];
            let pos = tri.iter().position(|&n| n == e.nodes[0]).unwrap();
            assert_eq!(tri[(pos + 1) % 3], e.nodes[1], "boundary edge not oriented with its triangle");
            assert_eq!(e.marker, poly.markers()[e.segment]);
        }
        for (k, e) in mesh.boundary_edges().iter().enumerate() {
            let (a, b) = poly.edge(e.segment);
            for &n in &e.nodes {
                assert!(point_segment_distance(mesh.nodes()[n], a, b) < 1e-12, "edge {k}");
            }
        }
    }

    #[test]
    fn unit_square_half() {
        let poly = unit_square();
        let mesh = triangulate(&poly, 0.5).unwrap();
        check_conformity(&mesh, &poly);
        assert!(mesh.max_circumradius() <= 0.5);
        assert!(mesh.min_angle_deg() >= 20.0);
    }

    #[test]
    fn area_is_conserved() {
        let poly = MarkedPolygon::circle(Vec2::new(0.3, -0.2), 0.7, 37, Marker::Gamma).unwrap();
        let mesh = triangulate(&poly, 0.1).unwrap();
        let rel = (mesh.total_area() - poly.signed_area()).abs() / poly.signed_area();
        assert!(rel < 1e-12, "{rel}");
        check_conformity(&mesh, &poly);
    }

    #[test]
    fn initial_domain_mesh_quality() {
        let cp = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233).unwrap();
        let b = assemble_boundary(&cp, &AxisSpec::new(0.5, 0.129).unwrap(), 400).unwrap();
        let mesh = triangulate(&b, 0.02).unwrap();
        check_conformity(&mesh, b.polygon());
        assert!(mesh.min_angle_deg() >= 20.0);
        assert!(mesh.max_circumradius() <= 0.02);
        for i in 0..400 {
            assert_eq!(mesh.nodes()[i], b.sampling().jets[i].x);
        }
        let markers: std::collections::BTreeSet<_> = mesh.boundary_edges().iter().map(|e| e.marker).collect();
        assert_eq!(markers.len(), 3);
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        let v = vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let poly = MarkedPolygon::new(v, vec![Marker::Wall; 3]).unwrap();
        assert!(matches!(triangulate(&poly, 0.1), Err(Error::InfeasibleGeometry(_))));
        assert!(matches!(triangulate(&unit_square(), 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_refinement_quarters_triangles() {
        let poly = unit_square();
        let mesh = triangulate(&poly, 0.4).unwrap();
        let fine = mesh.refine_uniform(None).unwrap();
        assert_eq!(fine.triangles().len(), 4 * mesh.triangles().len());
        assert_eq!(fine.boundary_edges().len(), 2 * mesh.boundary_edges().len());
        assert!((fine.total_area() - 1.0).abs() < 1e-14);
        check_conformity(&fine, &poly);
    }

    #[test]
    fn text_export_header() {
        let mesh = triangulate(&unit_square(), 0.5).unwrap();
        let text = mesh.to_text();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            format!(
                "nodes {} triangles {} edges {}",
                mesh.node_count(),
                mesh.triangles().len(),
                mesh.boundary_edges().len()
            )
        );
        assert_eq!(
            text.lines().count(),
            1 + mesh.node_count() + mesh.triangles().len() + mesh.boundary_edges().len()
        );
    }

    #[test]
    fn inverting_motion_is_rejected() {
        let mesh = triangulate(&unit_square(), 0.5).unwrap();
        let mut nodes = mesh.nodes().to_vec();
        nodes.iter_mut().for_each(|p| p.x = -p.x);
        assert!(mesh.with_nodes(nodes).is_err());
    }
}
