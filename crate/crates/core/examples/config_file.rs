//! Reading a run configuration and the errors it reports.

use bernoulli::config::RunConfig;

fn main() {
    let text = "\
# the reference setup, with a smaller penalty
m = 40
n_samples = 400
kappa1 = 0.129
kappa2 = 0.233
center = 0.5
r0 = 0.3
eps = 0.01
q = 4
";
    let config = RunConfig::parse(text).expect("valid configuration");
    println!("{}", config.to_text());
    for bad in [text.replace("q = 4\n", ""), format!("{text}stepsize = 2\n"), text.replace("eps = 0.01", "eps = small")] {
        println!("error: {}", RunConfig::parse(&bad).unwrap_err());
    }
}
