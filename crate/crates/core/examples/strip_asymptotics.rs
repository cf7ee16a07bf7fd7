//! Long electrodes: Γ flattens toward the line x1 = 1. The homothety
//! cross-check compares with the rescaled problem at a non-dyadic factor.

use bernoulli::config::RunConfig;
use bernoulli::studies::asymptotics;

fn main() -> bernoulli::Result<()> {
    let config = RunConfig { eps: 0.01, homothety: true, ..RunConfig::default() };
    let rep = asymptotics(&config, false)?;
    for r in &rep.records {
        println!(
            "a = {:<4} m_a = {:.5}  flatness = {:.3e}  J = {:.3e}",
            r.parameter,
            r.get("apex_abscissa").unwrap(),
            r.get("flatness_deviation").unwrap(),
            r.get("j_eps_final").unwrap()
        );
    }
    print!("{}", rep.summary_text());
    Ok(())
}
