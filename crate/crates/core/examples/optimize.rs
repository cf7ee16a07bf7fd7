//! The full descent from the half-circle. Usage: optimize [eps]

use bernoulli::config::RunConfig;
use bernoulli::studies::solve;

fn main() -> bernoulli::Result<()> {
    let mut config = RunConfig::default();
    if let Some(eps) = std::env::args().nth(1) {
        config.eps = eps.parse().map_err(|_| bernoulli::Error::InvalidArgument(format!("bad eps `{eps}`")))?;
    }
    let outcome = solve(&config, false, |_, r, _| {
        println!(
            "{:4} J={:.4e} alpha={:.3e} backtracks={:2} disp={:.3e} kappa={:.4} convex={}",
            r.iteration, r.j_eps, r.alpha, r.backtracks, r.max_displacement, r.kappa, r.convex
        );
    })?;
    print!("{}", outcome.summary_text());
    Ok(())
}
