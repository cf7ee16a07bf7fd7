//! States, adjoints and the penalized functional on the initial domain.

use bernoulli::config::RunConfig;
use bernoulli::fem::{
    functional_dirichlet_defect, functional_j_eps, functional_neumann_defect, h1_distance, recover_boundary_gradient,
    StateSolver,
};
use bernoulli::optimizer::analyze;

fn main() -> bernoulli::Result<()> {
    let config = RunConfig::default();
    let problem = config.problem()?;
    let an = analyze(&config.initial_polygon()?, &problem)?;
    let solver = StateSolver::new(&an.mesh, problem.robin)?;
    let u1 = solver.dirichlet_state()?;
    let u2e = solver.robin_state()?;
    let u2 = solver.mixed_state()?;
    let p1 = solver.adjoint_p1(&u1, &u2e)?;
    let p2 = solver.adjoint_robin(&u1, &u2e)?;
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("nodes                 {}", an.mesh.node_count());
    println!("J_eps                 {:.6e}", functional_j_eps(&u1, &u2e)?);
    println!("|u2,eps - u2|_H1      {:.6e}", h1_distance(&u2e, &u2)?);
    println!("Neumann defect of u1  {:.6e}", functional_neumann_defect(&recover_boundary_gradient(&an.mesh, &u1)?));
    println!("Dirichlet defect u2e  {:.6e}", functional_dirichlet_defect(&u2e));
    println!("min p1, min p2        {:.4e} {:.4e}", min(p1.values()), min(p2.values()));
    Ok(())
}
