//! Domains grow with the length of K: profiles of Γ for several half-lengths.

use bernoulli::config::RunConfig;
use bernoulli::studies::monotonicity;

fn main() -> bernoulli::Result<()> {
    let config = RunConfig { monotonicity_a: vec![0.1, 0.129, 0.2, 0.3], ..RunConfig::default() };
    let rep = monotonicity(&config, false)?;
    for r in &rep.records {
        println!("a = {:<6} apex abscissa {:.5}  kappa_fi {:.5}", r.parameter, r.get("apex_abscissa").unwrap(), r.get("kappa_fi").unwrap());
    }
    print!("{}", rep.summary_text());
    Ok(())
}
