//! Closed, marked boundary polyline of the computational domain.
//!
//! The domain lies in {x1 >= 0}. Its boundary is Γ (the sampled Bezier curve)
//! followed by the axis pieces: L above K, K, and L below K. Vertices are
//! listed counterclockwise, starting with the lower endpoint of Γ.

use std::fmt;
use std::str::FromStr;

use crate::bezier::{ControlPolygon, CurveSampling};
use crate::error::{Error, Result};
use crate::geom::{segments_intersect, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    /// Fixed electrode segment on the axis, u = 1.
    K,
    /// Part of the axis between K and the ends of Γ.
    L,
    /// Free boundary.
    Gamma,
    /// Homogeneous Neumann wall, used only by verification geometries.
    Wall,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::K => "K",
            Marker::L => "L",
            Marker::Gamma => "gamma",
            Marker::Wall => "wall",
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Marker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" => Ok(Marker::K),
            "L" => Ok(Marker::L),
            "gamma" => Ok(Marker::Gamma),
            "wall" => Ok(Marker::Wall),
            other => Err(Error::InvalidArgument(format!("unknown marker `{other}`"))),
        }
    }
}

/// K = {0} × [c - κ1, c + κ1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub center: f64,
    pub half_length: f64,
}

impl AxisSpec {
    pub fn new(center: f64, half_length: f64) -> Result<Self> {
        if !(half_length > 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "K half-length must be positive, got {half_length}"
            )));
        }
        Ok(AxisSpec { center, half_length })
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_length
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_length
    }
}

/// Closed polyline; edge i joins vertex i to vertex i+1 (cyclically) and carries `markers[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPolygon {
    vertices: Vec<Vec2>,
    markers: Vec<Marker>,
}

impl MarkedPolygon {
    pub fn new(vertices: Vec<Vec2>, markers: Vec<Marker>) -> Result<Self> {
        if vertices.len() < 3 || vertices.len() != markers.len() {
            return Err(Error::InvalidArgument(format!(
                "polygon needs >= 3 vertices and one marker per edge ({} vertices, {} markers)",
                vertices.len(),
                markers.len()
            )));
        }
        Ok(MarkedPolygon { vertices, markers })
    }

    /// Axis-aligned rectangle with `n` edges per side; markers are given as
    /// [bottom, right, top, left].
    pub fn rectangle(lo: Vec2, hi: Vec2, n: usize, sides: [Marker; 4]) -> Result<Self> {
        if !(hi.x > lo.x && hi.y > lo.y) || n == 0 {
            return Err(Error::InvalidArgument("empty rectangle".into()));
        }
        let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
        let mut vertices = Vec::with_capacity(4 * n);
        let mut markers = Vec::with_capacity(4 * n);
        for side in 0..4 {
            let (a, b) = (corners[side], corners[(side + 1) % 4]);
            for i in 0..n {
                vertices.push(a.lerp(b, i as f64 / n as f64));
                markers.push(sides[side]);
            }
        }
        MarkedPolygon::new(vertices, markers)
    }

    /// Regular polygon inscribed in a circle, all edges carrying `marker`.
    pub fn circle(center: Vec2, radius: f64, n: usize, marker: Marker) -> Result<Self> {
        let vertices = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                center + Vec2::new(t.cos(), t.sin()) * radius
            })
            .collect();
        MarkedPolygon::new(vertices, vec![marker; n])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % self.len()])
    }

    pub fn signed_area(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.cross(b)
            })
            .sum::<f64>()
            * 0.5
    }

    /// Total length of the edges carrying `marker`.
    pub fn marker_length(&self, marker: Marker) -> f64 {
        (0..self.len())
            .filter(|&i| self.markers[i] == marker)
            .map(|i| {
                let (a, b) = self.edge(i);
                a.distance(b)
            })
            .sum()
    }

    /// First pair of edges that touch although they are not neighbours, or
    /// neighbours that fold back onto each other.
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.len();
        let boxes: Vec<[f64; 4]> = (0..n)
            .map(|i| {
                let (a, b) = self.edge(i);
                [a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y)]
            })
            .collect();
        for i in 0..n {
            let (a, b) = self.edge(i);
            let (_, c) = self.edge((i + 1) % n);
            let (d1, d2) = (b - a, c - b);
            if d1.cross(d2) == 0.0 && d1.dot(d2) < 0.0 {
                return Some((i, (i + 1) % n));
            }
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (bi, bj) = (&boxes[i], &boxes[j]);
                if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                    continue;
                }
                let (p, q) = self.edge(j);
                if segments_intersect(a, b, p, q) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

impl AsRef<MarkedPolygon> for MarkedPolygon {
    fn as_ref(&self) -> &MarkedPolygon {
        self
    }
}

/// Boundary of the domain induced by a control polygon.
///
/// Vertices 0..n_gamma are the Γ samples, in parameter order, so vertex 0 is
/// the lower end of Γ and vertex n_gamma-1 the upper end.
#[derive(Debug, Clone)]
pub struct MarkedBoundary {
    polygon: MarkedPolygon,
    sampling: CurveSampling,
    axis: AxisSpec,
}

impl MarkedBoundary {
    pub fn polygon(&self) -> &MarkedPolygon {
        &self.polygon
    }

    pub fn sampling(&self) -> &CurveSampling {
        &self.sampling
    }

    pub fn axis(&self) -> &AxisSpec {
        &self.axis
    }

    pub fn gamma_vertex_count(&self) -> usize {
        self.sampling.len()
    }

    pub fn lower_tip(&self) -> Vec2 {
        self.polygon.vertices[0]
    }

    pub fn upper_tip(&self) -> Vec2 {
        self.polygon.vertices[self.sampling.len() - 1]
    }
}

impl AsRef<MarkedPolygon> for MarkedBoundary {
    fn as_ref(&self) -> &MarkedPolygon {
        &self.polygon
    }
}

/// Emits the start vertex and interior vertices of the axis run from `from`
/// to `to`. Edge sizes grow linearly away from the end sizes `h0`, `h1` with
/// slope `GRADING_SLOPE` and are capped at `h`.
fn push_axis_run(
    vertices: &mut Vec<Vec2>,
    markers: &mut Vec<Marker>,
    from: f64,
    to: f64,
    (h0, h1, h): (f64, f64, f64),
    marker: Marker,
) {
    let len = (to - from).abs();
    let size = |x: f64| h.min(h0 + GRADING_SLOPE * x).min(h1 + GRADING_SLOPE * (len - x));
    // cumulative count of edges, by midpoint quadrature on a fine grid
    const STEPS: usize = 4000;
    let dx = len / STEPS as f64;
    let mut cum = Vec::with_capacity(STEPS + 1);
    cum.push(0.0);
    for i in 0..STEPS {
        let x = (i as f64 + 0.5) * dx;
        cum.push(cum[i] + dx / size(x));
    }
    let total = cum[STEPS];
    let n = total.round().max(1.0) as usize;
    vertices.push(Vec2::new(0.0, from));
    markers.push(marker);
    let mut j = 0;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let x = (j as f64 + (target - cum[j]) / (cum[j + 1] - cum[j])) * dx;
        vertices.push(Vec2::new(0.0, from + (to - from).signum() * x));
        markers.push(marker);
    }
}

/// Growth rate of axis edge sizes away from the K/L junctions.
const GRADING_SLOPE: f64 = 0.25;
/// Axis edges at a K/L junction are this fraction of the adjacent Γ edge size.
pub const JUNCTION_REFINEMENT: f64 = 0.125;

/// Samples Γ and closes it along the axis. Axis edges are about as long as
/// the adjacent Γ edges.
pub fn assemble_boundary(cp: &ControlPolygon, axis: &AxisSpec, n_samples: usize) -> Result<MarkedBoundary> {
    if n_samples < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {n_samples}")));
    }
    let lower = cp.lower_tip().y;
    let upper = cp.upper_tip().y;
    if lower >= axis.lower() {
        return Err(Error::InfeasibleTopology(format!(
            "lower end of Γ at x2 = {lower} does not lie below K (c - κ1 = {})",
            axis.lower()
        )));
    }
    if upper <= axis.upper() {
        return Err(Error::InfeasibleTopology(format!(
            "upper end of Γ at x2 = {upper} does not lie above K (c + κ1 = {})",
            axis.upper()
        )));
    }

    let sampling = cp.sample(n_samples)?;
    let mut vertices: Vec<Vec2> = sampling.points().collect();
    for (i, v) in vertices.iter().enumerate().take(n_samples - 1).skip(1) {
        if !(v.x > 0.0) {
            return Err(Error::InfeasibleGeometry(format!(
                "Γ sample {i} at {:?} is not in the open half-plane x1 > 0",
                v
            )));
        }
    }
    let mut markers = vec![Marker::Gamma; n_samples - 1];
    let h_low = vertices[0].distance(vertices[1]);
    let h_up = vertices[n_samples - 2].distance(vertices[n_samples - 1]);

    let h_mid = 0.5 * (h_low + h_up);
    let h_j = JUNCTION_REFINEMENT * h_mid;
    push_axis_run(&mut vertices, &mut markers, upper, axis.upper(), (h_up, h_j, h_up), Marker::L);
    push_axis_run(&mut vertices, &mut markers, axis.upper(), axis.lower(), (h_j, h_j, h_mid), Marker::K);
    push_axis_run(&mut vertices, &mut markers, axis.lower(), lower, (h_j, h_low, h_low), Marker::L);
    // push_axis_run emits its start vertex; the upper tip was already the last Γ sample
    vertices.remove(n_samples);

    let polygon = MarkedPolygon::new(vertices, markers)?;
    if let Some((i, j)) = polygon.find_self_intersection() {
        return Err(Error::InfeasibleGeometry(format!(
            "boundary edges {i} ({}) and {j} ({}) intersect",
            polygon.markers[i], polygon.markers[j]
        )));
    }
    Ok(MarkedBoundary { polygon, sampling, axis: *axis })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    /// Smallest sine of the turning angle over consecutive edge pairs.
    pub min_turn: f64,
    /// Vertex where the smallest turn occurs.
    pub vertex: usize,
    pub convex: bool,
}

pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

pub fn check_convexity(polygon: &MarkedPolygon) -> ConvexityReport {
    let n = polygon.len();
    let mut report = ConvexityReport { min_turn: f64::INFINITY, vertex: 0, convex: true };
    for i in 0..n {
        let prev = polygon.vertices[(i + n - 1) % n];
        let cur = polygon.vertices[i];
        let next = polygon.vertices[(i + 1) % n];
        let (a, b) = (cur - prev, next - cur);
        let turn = a.cross(b) / (a.norm() * b.norm());
        if turn < report.min_turn {
            report.min_turn = turn;
            report.vertex = i;
        }
    }
    report.convex = report.min_turn >= -CONVEXITY_TOLERANCE;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> (ControlPolygon, AxisSpec) {
        let cp = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233).unwrap();
        (cp, AxisSpec::new(0.5, 0.129).unwrap())
    }

    #[test]
    fn reference_boundary_is_ccw_simple_and_convex() {
        let (cp, axis) = reference();
        let b = assemble_boundary(&cp, &axis, 400).unwrap();
        let poly = b.polygon();
        assert!(poly.signed_area() > 0.0);
        assert!(poly.find_self_intersection().is_none());
        assert!(check_convexity(poly).convex);
        assert!((poly.marker_length(Marker::K) - 2.0 * 0.129).abs() < 1e-12);
        assert!((poly.marker_length(Marker::L) - 2.0 * (0.233 - 0.129)).abs() < 1e-12);
        assert_eq!(b.lower_tip(), Vec2::new(0.0, 0.5 - 0.233));
        assert_eq!(b.upper_tip(), Vec2::new(0.0, 0.5 + 0.233));
        // marker sequence: Γ, L, K, L, each contiguous
        let mut runs = vec![poly.markers()[0]];
        for &m in poly.markers() {
            if *runs.last().unwrap() != m {
                runs.push(m);
            }
        }
        assert_eq!(runs, vec![Marker::Gamma, Marker::L, Marker::K, Marker::L]);
    }

    #[test]
    fn axis_edges_are_graded_toward_the_junctions() {
        let (cp, axis) = reference();
        let b = assemble_boundary(&cp, &axis, 400).unwrap();
        let poly = b.polygon();
        let h_gamma = poly.vertices()[0].distance(poly.vertices()[1]);
        let n = poly.len();
        let lengths: Vec<f64> = (0..n).map(|i| {
            let (a, c) = poly.edge(i);
            a.distance(c)
        }).collect();
        for i in (0..n).filter(|&i| poly.markers()[i] != Marker::Gamma) {
            let (a, _) = poly.edge(i);
            assert_eq!(a.x, 0.0);
            assert!(lengths[i] <= 1.01 * h_gamma && lengths[i] >= 0.9 * JUNCTION_REFINEMENT * h_gamma.min(lengths[n - 1]));
            let next = (i + 1) % n;
            let ratio = lengths[i].max(lengths[next]) / lengths[i].min(lengths[next]);
            assert!(poly.markers()[next] == Marker::Gamma || ratio < 1.5, "edge {i}: ratio {ratio}");
        }
        for (i, m) in poly.markers().iter().enumerate() {
            let prev = poly.markers()[(i + n - 1) % n];
            if (prev, *m) == (Marker::L, Marker::K) || (prev, *m) == (Marker::K, Marker::L) {
                let h = lengths[i].max(lengths[(i + n - 1) % n]);
                assert!(h < 1.5 * JUNCTION_REFINEMENT * h_gamma, "junction at vertex {i}: {h}");
            }
        }
    }

    #[test]
    fn tips_inside_k_are_rejected() {
        let (cp, _) = reference();
        let axis = AxisSpec::new(0.5, 0.233).unwrap();
        assert!(matches!(assemble_boundary(&cp, &axis, 100), Err(Error::InfeasibleTopology(_))));
        let axis = AxisSpec::new(0.5, 0.3).unwrap();
        assert!(matches!(assemble_boundary(&cp, &axis, 100), Err(Error::InfeasibleTopology(_))));
    }

    #[test]
    fn self_intersecting_gamma_is_rejected() {
        let pts = vec![
            Vec2::new(0.0, 0.3),
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(0.0, 3.0),
            Vec2::new(0.0, -2.0),
            Vec2::new(3.0, 2.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, 0.7),
        ];
        let cp = ControlPolygon::new(pts).unwrap();
        let axis = AxisSpec::new(0.5, 0.1).unwrap();
        assert!(matches!(assemble_boundary(&cp, &axis, 300), Err(Error::InfeasibleGeometry(_))));
    }

    #[test]
    fn curve_touching_the_axis_is_rejected() {
        let (cp, axis) = reference();
        let mut pts = cp.points().to_vec();
        for p in pts.iter_mut().take(39).skip(2) {
            p.x = 0.0;
        }
        let cp = ControlPolygon::new(pts).unwrap();
        assert!(assemble_boundary(&cp, &axis, 50).is_err());
    }

    #[test]
    fn concave_polygon_is_flagged() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.4, 0.4),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let poly = MarkedPolygon::new(v, vec![Marker::Wall; 5]).unwrap();
        let r = check_convexity(&poly);
        assert!(!r.convex);
        assert_eq!(r.vertex, 2);
    }

    #[test]
    fn rectangle_layout() {
        let r = MarkedPolygon::rectangle(
            Vec2::new(0.0, -1.0),
            Vec2::new(1.0, 1.0),
            3,
            [Marker::Wall, Marker::Gamma, Marker::Wall, Marker::K],
        )
        .unwrap();
        assert_eq!(r.len(), 12);
        assert!((r.signed_area() - 2.0).abs() < 1e-14);
        assert!((r.marker_length(Marker::K) - 2.0).abs() < 1e-14);
        assert!(check_convexity(&r).convex);
    }

    #[test]
    fn marker_names_round_trip() {
        for m in [Marker::K, Marker::L, Marker::Gamma, Marker::Wall] {
            assert_eq!(m.as_str().parse::<Marker>().unwrap(), m);
        }
        assert!("x".parse::<Marker>().is_err());
    }

    proptest! {
        #[test]
        fn half_ellipses_give_valid_boundaries(
            r1 in 0.15f64..0.6,
            r2 in 0.2f64..0.5,
            e in 1.6f64..4.0,
            frac in 0.55f64..0.85,
        ) {
            let tip = frac * r2;
            let kappa = 0.5 * tip;
            let cp = ControlPolygon::half_superellipse(24, 0.5, r1, r2, e, tip).unwrap();
            let b = assemble_boundary(&cp, &AxisSpec::new(0.5, kappa).unwrap(), 200).unwrap();
            prop_assert!(b.polygon().signed_area() > 0.0);
            prop_assert!((b.polygon().marker_length(Marker::K) - 2.0 * kappa).abs() < 1e-12);
        }
    }
}
