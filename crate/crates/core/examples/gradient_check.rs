//! Shape gradient against central differences for random bump velocities.
//! Usage: gradient_check [count] [seed]

use bernoulli::config::RunConfig;
use bernoulli::gradcheck::grad_check;

fn main() -> bernoulli::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let config = RunConfig::default();
    let cp = config.initial_polygon()?;
    for h in [0.02, 0.01] {
        let problem = RunConfig { target_h: h, ..config.clone() }.problem()?;
        println!("h = {h}");
        for c in grad_check(&cp, &problem, count, seed, 1e-3)? {
            println!(
                "  bump s={:.3} w={:.3}: analytic {:+.6e}  fd {:+.6e}  rel {:.2e}",
                c.bump.center, c.bump.width, c.analytic, c.finite_difference, c.relative_error
            );
        }
    }
    Ok(())
}
