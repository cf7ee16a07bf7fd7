//! Reflection symmetry of the optimized boundary. Usage: symmetry [eps]

use bernoulli::config::RunConfig;
use bernoulli::studies::symmetry;

fn main() -> bernoulli::Result<()> {
    let mut config = RunConfig::default();
    if let Some(eps) = std::env::args().nth(1).and_then(|e| e.parse().ok()) {
        config.eps = eps;
    }
    let (rep, outcome) = symmetry(&config, false)?;
    print!("{}{}", outcome.summary_text(), rep.summary_text());
    Ok(())
}
