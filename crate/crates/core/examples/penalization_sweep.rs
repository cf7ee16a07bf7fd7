//! Distance between the penalized and the mixed state as ε shrinks.

use bernoulli::config::RunConfig;
use bernoulli::studies::penalization;

fn main() -> bernoulli::Result<()> {
    let config = RunConfig { penalization_eps: vec![0.2, 0.1, 0.05, 0.02, 0.01, 0.005], ..RunConfig::default() };
    let rep = penalization(&config)?;
    for r in &rep.records {
        println!(
            "eps = {:<6} |u2,eps - u2|_H1 = {:.5}  max |u2,eps| on L = {:.5}",
            r.parameter,
            r.get("h1_distance").unwrap(),
            r.get("max_abs_on_l").unwrap()
        );
    }
    Ok(())
}
