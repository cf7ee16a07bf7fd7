//! Run configuration: a flat `key = value` text format.
//!
//! Blank lines and `#` comments are ignored; keys are lowercase. Lists are
//! comma separated. When a file is given, the keys that define the problem
//! ([`REQUIRED_KEYS`]) must all be present; solver and study knobs fall back
//! to their defaults. Unknown keys are an error.

use std::path::Path;

use crate::bezier::ControlPolygon;
use crate::boundary::AxisSpec;
use crate::error::{Error, Result};
use crate::fem::{PenaltyParams, RobinData};
use crate::mesh::MeshOptions;
use crate::optimizer::{AdjointVariant, LineSearchParams, OptimizerParams, Problem};

pub const REQUIRED_KEYS: [&str; 8] = ["m", "n_samples", "kappa1", "kappa2", "center", "r0", "eps", "q"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m: usize,
    pub n_samples: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub center: f64,
    pub r0: f64,
    /// Exponent of the initial superellipse; 2 gives the half-circle.
    pub exponent: f64,
    pub eps: f64,
    pub q: f64,
    pub mu: f64,
    pub eta: f64,
    pub lambda: f64,
    pub tau_r: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub delta_l: f64,
    pub target_h: f64,
    pub angle_floor: f64,
    pub adjoint: AdjointVariant,
    pub continuation_stages: usize,
    pub snapshot_stride: usize,
    pub seed: u64,
    pub grad_directions: usize,
    pub grad_step: f64,
    pub monotonicity_a: Vec<f64>,
    pub asymptotics_a: Vec<f64>,
    pub asymptotics_window: f64,
    /// Initial half-width of Γ for the strip sweep.
    pub asymptotics_r0: f64,
    pub homothety: bool,
    pub penalization_eps: Vec<f64>,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 40,
            n_samples: 400,
            kappa1: 0.129,
            kappa2: 0.233,
            center: 0.5,
            r0: 0.3,
            exponent: 2.0,
            eps: 0.1,
            q: 4.0,
            mu: 10.0,
            eta: 0.5,
            lambda: 1000.0,
            tau_r: 5e-4,
            max_iters: 500,
            max_backtracks: 30,
            delta_l: 1e-3,
            target_h: 0.02,
            angle_floor: 20.0,
            adjoint: AdjointVariant::Robin,
            continuation_stages: 3,
            snapshot_stride: 0,
            seed: 1,
            grad_directions: 3,
            grad_step: 1e-3,
            monotonicity_a: vec![0.129, 0.2],
            asymptotics_a: vec![0.5, 1.0, 2.0, 4.0],
            asymptotics_window: 0.25,
            asymptotics_r0: 0.9,
            homothety: false,
            penalization_eps: vec![0.1, 0.05, 0.01],
            output: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config { line, message: format!("`{key}`: cannot parse `{v}`") })
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(line, key, s.trim())).collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config { line, message: format!("`{key}`: expected true or false, got `{v}`") }),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Config { line, message: format!("expected `key = value`, got `{body}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k != k.to_lowercase() {
                return Err(Error::Config { line, message: format!("keys are lowercase: `{k}`") });
            }
            if seen.iter().any(|s| s == k) {
                return Err(Error::Config { line, message: format!("duplicate key `{k}`") });
            }
            match k {
                "m" => c.m = parse_num(line, k, v)?,
                "n_samples" => c.n_samples = parse_num(line, k, v)?,
                "kappa1" => c.kappa1 = parse_num(line, k, v)?,
                "kappa2" => c.kappa2 = parse_num(line, k, v)?,
                "center" => c.center = parse_num(line, k, v)?,
                "r0" => c.r0 = parse_num(line, k, v)?,
                "exponent" => c.exponent = parse_num(line, k, v)?,
                "eps" => c.eps = parse_num(line, k, v)?,
                "q" => c.q = parse_num(line, k, v)?,
                "mu" => c.mu = parse_num(line, k, v)?,
                "eta" => c.eta = parse_num(line, k, v)?,
                "lambda" => c.lambda = parse_num(line, k, v)?,
                "tau_r" => c.tau_r = parse_num(line, k, v)?,
                "max_iters" => c.max_iters = parse_num(line, k, v)?,
                "max_backtracks" => c.max_backtracks = parse_num(line, k, v)?,
                "delta_l" => c.delta_l = parse_num(line, k, v)?,
                "target_h" => c.target_h = parse_num(line, k, v)?,
                "angle_floor" => c.angle_floor = parse_num(line, k, v)?,
                "adjoint" => {
                    c.adjoint = v.parse().map_err(|e: Error| Error::Config { line, message: e.to_string() })?
                }
                "continuation_stages" => c.continuation_stages = parse_num(line, k, v)?,
                "snapshot_stride" => c.snapshot_stride = parse_num(line, k, v)?,
                "seed" => c.seed = parse_num(line, k, v)?,
                "grad_directions" => c.grad_directions = parse_num(line, k, v)?,
                "grad_step" => c.grad_step = parse_num(line, k, v)?,
                "monotonicity_a" => c.monotonicity_a = parse_list(line, k, v)?,
                "asymptotics_a" => c.asymptotics_a = parse_list(line, k, v)?,
                "asymptotics_window" => c.asymptotics_window = parse_num(line, k, v)?,
                "asymptotics_r0" => c.asymptotics_r0 = parse_num(line, k, v)?,
                "homothety" => c.homothety = parse_bool(line, k, v)?,
                "penalization_eps" => c.penalization_eps = parse_list(line, k, v)?,
                "output" => c.output = Some(v.to_string()),
                _ => return Err(Error::Config { line, message: format!("unknown key `{k}`") }),
            }
            seen.push(k.to_string());
        }
        if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !seen.iter().any(|s| s == *k)) {
            return Err(Error::MissingKey(missing.to_string()));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m < 4 {
            return bad(format!("m = {} must be at least 4", self.m));
        }
        if self.n_samples < 3 {
            return bad(format!("n_samples = {} must be at least 3", self.n_samples));
        }
        if !(self.kappa1 > 0.0 && self.kappa2 > self.kappa1) {
            return bad(format!("need 0 < kappa1 < kappa2, got {} and {}", self.kappa1, self.kappa2));
        }
        if !self.center.is_finite() {
            return bad(format!("center {} is not finite", self.center));
        }
        if !(self.eps > 0.0 && self.q > 0.0 && self.target_h > 0.0 && self.delta_l > 0.0) {
            return bad("eps, q, target_h and delta_l must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0 && self.mu > 0.0 && self.lambda > 0.0 && self.tau_r > 0.0) {
            return bad("need mu, lambda, tau_r > 0 and 0 < eta < 1".into());
        }
        if !(self.grad_step > 0.0 && self.asymptotics_window > 0.0 && self.asymptotics_r0 > 0.0) {
            return bad("grad_step, asymptotics_window and asymptotics_r0 must be positive".into());
        }
        Ok(())
    }

    pub fn axis(&self) -> Result<AxisSpec> {
        AxisSpec::new(self.center, self.kappa1)
    }

    pub fn penalty(&self) -> Result<PenaltyParams> {
        PenaltyParams::new(self.eps, self.q)
    }

    pub fn problem(&self) -> Result<Problem> {
        let mut mesh = MeshOptions::new(self.target_h);
        mesh.angle_floor_deg = self.angle_floor;
        Ok(Problem {
            axis: self.axis()?,
            robin: RobinData::new(self.penalty()?),
            n_samples: self.n_samples,
            mesh,
            adjoint: self.adjoint,
        })
    }

    /// Half-superellipse of radius r0 through the axis at center ± kappa2,
    /// stretched vertically when kappa2 exceeds r0.
    pub fn initial_polygon(&self) -> Result<ControlPolygon> {
        let r2 = self.r0.max(self.kappa2 * 1.25);
        ControlPolygon::half_superellipse(self.m, self.center, self.r0, r2, self.exponent, self.kappa2)
    }

    pub fn optimizer_params(&self) -> OptimizerParams {
        OptimizerParams {
            line_search: LineSearchParams {
                mu: self.mu,
                eta: self.eta,
                lambda: self.lambda,
                max_backtracks: self.max_backtracks,
            },
            max_iters: self.max_iters,
            tau_r: self.tau_r,
            delta_l: self.delta_l,
            reference_displacement: None,
        }
    }

    /// The configuration in the file format, every key spelled out.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("m", self.m.to_string());
        put("n_samples", self.n_samples.to_string());
        put("kappa1", self.kappa1.to_string());
        put("kappa2", self.kappa2.to_string());
        put("center", self.center.to_string());
        put("r0", self.r0.to_string());
        put("exponent", self.exponent.to_string());
        put("eps", self.eps.to_string());
        put("q", self.q.to_string());
        put("mu", self.mu.to_string());
        put("eta", self.eta.to_string());
        put("lambda", self.lambda.to_string());
        put("tau_r", self.tau_r.to_string());
        put("max_iters", self.max_iters.to_string());
        put("max_backtracks", self.max_backtracks.to_string());
        put("delta_l", self.delta_l.to_string());
        put("target_h", self.target_h.to_string());
        put("angle_floor", self.angle_floor.to_string());
        put("adjoint", self.adjoint.to_string());
        put("continuation_stages", self.continuation_stages.to_string());
        put("snapshot_stride", self.snapshot_stride.to_string());
        put("seed", self.seed.to_string());
        put("grad_directions", self.grad_directions.to_string());
        put("grad_step", self.grad_step.to_string());
        put("monotonicity_a", list(&self.monotonicity_a));
        put("asymptotics_a", list(&self.asymptotics_a));
        put("asymptotics_window", self.asymptotics_window.to_string());
        put("asymptotics_r0", self.asymptotics_r0.to_string());
        put("homothety", self.homothety.to_string());
        put("penalization_eps", list(&self.penalization_eps));
        if let Some(o) = &self.output {
            put("output", o.clone());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "m = 40\nn_samples = 400\nkappa1 = 0.129\nkappa2 = 0.233\ncenter = 0.5\nr0 = 0.3\neps = 0.1\nq = 4\n";

    #[test]
    fn minimal_file_equals_defaults() {
        assert_eq!(RunConfig::parse(MINIMAL).unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_through_text() {
        let mut c = RunConfig::default();
        c.eps = 0.05;
        c.monotonicity_a = vec![0.1, 0.15, 0.3];
        c.homothety = true;
        c.output = Some("runs/a".into());
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# reference setup\n\n{MINIMAL}mu = 5   # shorter steps\n");
        assert_eq!(RunConfig::parse(&text).unwrap().mu, 5.0);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("kappa2 = 0.233\n", "");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(matches!(&err, Error::MissingKey(k) if k == "kappa2"));
        assert!(err.to_string().contains("kappa2"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            (format!("{MINIMAL}colour = red\n"), 9),
            (format!("{MINIMAL}mu 10\n"), 9),
            (format!("m = forty\n{MINIMAL}"), 1),
            (format!("{MINIMAL}M = 3\n"), 9),
            (format!("{MINIMAL}q = 3\n"), 9),
            (format!("{MINIMAL}homothety = maybe\n"), 9),
        ];
        for (text, expected) in cases {
            match RunConfig::parse(&text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("expected a config error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = MINIMAL.replace("kappa2 = 0.233", "kappa2 = 0.1");
        assert!(matches!(RunConfig::parse(&text), Err(Error::InvalidArgument(_))));
        let text = format!("{MINIMAL}eta = 1.5\n");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn default_initial_polygon_is_the_half_circle() {
        let c = RunConfig::default();
        let cp = c.initial_polygon().unwrap();
        assert_eq!(cp.degree(), 40);
        assert!((cp.lower_tip().y - (0.5 - 0.233)).abs() < 1e-15);
        assert!((cp.upper_tip().y - (0.5 + 0.233)).abs() < 1e-15);
        let expected = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233).unwrap();
        assert_eq!(cp, expected);
    }

    proptest::proptest! {
        #[test]
        fn text_round_trip_is_lossless(eps in 1e-4f64..1.0, q in 1.0f64..8.0, mu in 0.1f64..100.0, h in 0.005f64..0.1, seed: u64, a in proptest::collection::vec(0.05f64..5.0, 1..5)) {
            let mut a = a;
            a.sort_by(f64::total_cmp);
            a.dedup();
            let c = RunConfig { eps, q, mu, target_h: h, seed, asymptotics_a: a, ..RunConfig::default() };
            proptest::prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
