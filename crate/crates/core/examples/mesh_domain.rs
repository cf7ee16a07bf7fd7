//! Marked boundary K / L / Γ of the initial design and its triangulation.

use bernoulli::bezier::ControlPolygon;
use bernoulli::boundary::{assemble_boundary, check_convexity, AxisSpec, Marker};
use bernoulli::io::boundary_svg;
use bernoulli::mesh::{triangulate_with, MeshOptions};

fn main() -> bernoulli::Result<()> {
    let cp = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233)?;
    let boundary = assemble_boundary(&cp, &AxisSpec::new(0.5, 0.129)?, 400)?;
    let poly = boundary.polygon();
    for m in [Marker::K, Marker::L, Marker::Gamma] {
        println!("{m:>6}: length {:.5}", poly.marker_length(m));
    }
    println!("convex: {}", check_convexity(poly).convex);
    for h in [0.04, 0.02, 0.01] {
        let mesh = triangulate_with(poly, &MeshOptions::new(h))?;
        println!(
            "h = {h:<5} nodes {:>6} triangles {:>6} min angle {:5.2} deg area {:.6}",
            mesh.node_count(),
            mesh.triangles().len(),
            mesh.min_angle_deg(),
            mesh.total_area()
        );
    }
    let path = std::env::temp_dir().join("bernoulli_initial_boundary.svg");
    std::fs::write(&path, boundary_svg(poly))?;
    println!("outline written to {}", path.display());
    Ok(())
}
