//! Penalty continuation: ε halves after every converged stage.

use bernoulli::config::RunConfig;
use bernoulli::studies::solve;

fn main() -> bernoulli::Result<()> {
    let config = RunConfig { continuation_stages: 3, ..RunConfig::default() };
    let outcome = solve(&config, true, |_, _, _| {})?;
    print!("{}", outcome.stages_csv());
    print!("{}", outcome.summary_text());
    Ok(())
}
