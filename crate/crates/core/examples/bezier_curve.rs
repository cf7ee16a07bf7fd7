//! Differential geometry of the initial free boundary.

use bernoulli::bezier::ControlPolygon;

fn main() -> bernoulli::Result<()> {
    let cp = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "s", "x1", "x2", "n1", "n2", "H");
    for i in 0..=10 {
        let j = cp.jet(i as f64 / 10.0)?;
        println!(
            "{:6.2} {:10.5} {:10.5} {:10.5} {:10.5} {:10.4}",
            j.s, j.x.x, j.x.y, j.normal.x, j.normal.y, j.curvature
        );
    }
    let sampling = cp.sample(400)?;
    println!("arc length with 400 samples: {:.8}", sampling.length());
    Ok(())
}
