//! Finite-difference check of the shape gradient.
//!
//! A normal velocity V = φ(s) n(s) with a compactly supported bump φ moves
//! the Γ samples; the rest of the mesh follows by harmonic extension, so the
//! perturbed problems share connectivity with the base mesh. The extension is
//! blended to zero near the K/L junctions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::Marker;
use crate::error::{Error, Result};
use crate::fem::{functional_j_eps, StateSolver};
use crate::geom::Vec2;
use crate::mesh::TriangleMesh;
use crate::optimizer::{analyze, control_point_gradient, directional_derivative, shape_gradient, Analysis, Problem};
use crate::bezier::ControlPolygon;

/// Cubic B-spline bump of half-width 2w centred at s_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, s: f64) -> f64 {
        let r = ((s - self.center) / self.width).abs();
        let b = if r < 1.0 {
            (4.0 - 6.0 * r * r + 3.0 * r * r * r) / 6.0
        } else if r < 2.0 {
            (2.0 - r).powi(3) / 6.0
        } else {
            0.0
        };
        self.amplitude * b
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - 2.0 * self.width, self.center + 2.0 * self.width)
    }
}

/// Random bumps with support inside [0.1, 0.9].
pub fn random_bumps(count: usize, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let width = rng.random_range(0.03..0.08);
            let lo = 0.1 + 2.0 * width;
            let center = rng.random_range(lo..1.0 - lo);
            let amplitude = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Bump { center, width, amplitude }
        })
        .collect()
}

/// Largest radius around each K/L junction inside which the mesh is blended
/// to rest. It shrinks to half the distance from Γ when Γ comes closer.
pub const RIGID_RADIUS: f64 = 0.05;

/// Mesh-node displacement for a boundary motion given by `gamma` at the Γ
/// samples and by vertical tip velocities `tips` = (lower, upper), which
/// stretch the L runs linearly. K stays fixed, the interior follows by
/// harmonic extension.
fn displacement_field(
    an: &Analysis,
    solver: &StateSolver<'_>,
    gamma: impl Fn(usize) -> Vec2,
    tips: (f64, f64),
) -> Result<Vec<Vec2>> {
    let mesh = &an.mesh;
    let jets = &an.boundary.sampling().jets;
    let axis = *an.boundary.axis();
    let (lo, up) = (an.boundary.lower_tip().y, an.boundary.upper_tip().y);
    let n = mesh.node_count();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for i in 0..jets.len() {
        let v = gamma(i);
        bx[i] = v.x;
        by[i] = v.y;
    }
    for e in mesh.boundary_edges() {
        for &node in &e.nodes {
            if node < jets.len() {
                continue;
            }
            let p = mesh.nodes()[node];
            match e.marker {
                // Steiner points on Γ edges: interpolate along their segment
                Marker::Gamma => {
                    let (a, b) = (jets[e.segment].x, jets[e.segment + 1].x);
                    let t = (p - a).dot(b - a) / (b - a).norm_sq();
                    let v = gamma(e.segment) * (1.0 - t) + gamma(e.segment + 1) * t;
                    bx[node] = v.x;
                    by[node] = v.y;
                }
                Marker::L if p.y < axis.center => by[node] = tips.0 * (p.y - axis.lower()) / (lo - axis.lower()),
                Marker::L => by[node] = tips.1 * (p.y - axis.upper()) / (up - axis.upper()),
                _ => {}
            }
        }
    }
    let dx = solver.harmonic_extension(&bx)?;
    let dy = solver.harmonic_extension(&by)?;
    let junctions = [Vec2::new(0.0, axis.lower()), Vec2::new(0.0, axis.upper())];
    let dist = |p: Vec2| junctions.iter().map(|j| j.distance(p)).fold(f64::INFINITY, f64::min);
    let clearance = jets.iter().map(|j| dist(j.x)).fold(f64::INFINITY, f64::min);
    let radius = RIGID_RADIUS.min(0.5 * clearance);
    // u1 is singular at the K/L junctions, so moving mesh nodes there shifts
    // the discrete J by far more than the boundary motion does
    let cutoff = |p: Vec2| {
        let r = (dist(p) / radius).min(1.0);
        r * r * (3.0 - 2.0 * r)
    };
    Ok(dx
        .values()
        .iter()
        .zip(dy.values())
        .zip(mesh.nodes())
        .map(|((&x, &y), &p)| Vec2::new(x, y) * cutoff(p))
        .collect())
}

fn j_on(mesh: &TriangleMesh, problem: &Problem) -> Result<f64> {
    let s = StateSolver::new(mesh, problem.robin)?;
    functional_j_eps(&s.dirichlet_state()?, &s.robin_state()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub bump: Bump,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Compares dJ(Ω; V) with the central difference (J(t) − J(−t)) / 2t for each bump.
pub fn check_gradient(an: &Analysis, problem: &Problem, bumps: &[Bump], t: f64) -> Result<Vec<GradientCheck>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("step t = {t} must be positive")));
    }
    let density = shape_gradient(an, problem)?;
    let solver = StateSolver::new(&an.mesh, problem.robin)?;
    let mut out = Vec::with_capacity(bumps.len());
    for bump in bumps {
        let vn: Vec<f64> = an.boundary.sampling().jets.iter().map(|j| bump.eval(j.s)).collect();
        let analytic = directional_derivative(&an.boundary, &density, &vn);
        let jets = &an.boundary.sampling().jets;
        let d = displacement_field(an, &solver, |i| jets[i].normal * bump.eval(jets[i].s), (0.0, 0.0))?;
        let moved = |sign: f64| -> Result<f64> {
            let nodes = an.mesh.nodes().iter().zip(&d).map(|(&p, &v)| p + v * (sign * t)).collect();
            j_on(&an.mesh.with_nodes(nodes)?, problem)
        };
        let fd = (moved(1.0)? - moved(-1.0)?) / (2.0 * t);
        out.push(GradientCheck {
            bump: *bump,
            analytic,
            finite_difference: fd,
            relative_error: (analytic - fd).abs() / fd.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPointCheck {
    pub index: usize,
    pub direction: Vec2,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Compares ∂J/∂p_k · d with a central difference in which Γ moves by
/// t d B_k(s) and the L runs stretch with the tips.
pub fn check_control_points(
    an: &Analysis,
    problem: &Problem,
    dofs: &[(usize, Vec2)],
    t: f64,
) -> Result<Vec<ControlPointCheck>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("step t = {t} must be positive")));
    }
    let density = shape_gradient(an, problem)?;
    let grad = control_point_gradient(&an.boundary, &an.mesh, &density);
    let solver = StateSolver::new(&an.mesh, problem.robin)?;
    let basis = &an.boundary.sampling().basis;
    let last = basis.len() - 1;
    let mut out = Vec::with_capacity(dofs.len());
    for &(k, dir) in dofs {
        if k >= grad.len() {
            return Err(Error::InvalidArgument(format!("control point {k} out of range")));
        }
        let tips = (dir.y * basis[0][k], dir.y * basis[last][k]);
        let d = displacement_field(an, &solver, |i| dir * basis[i][k], tips)?;
        let moved = |sign: f64| -> Result<f64> {
            let nodes = an.mesh.nodes().iter().zip(&d).map(|(&p, &v)| p + v * (sign * t)).collect();
            j_on(&an.mesh.with_nodes(nodes)?, problem)
        };
        let fd = (moved(1.0)? - moved(-1.0)?) / (2.0 * t);
        let analytic = grad[k].dot(dir);
        out.push(ControlPointCheck {
            index: k,
            direction: dir,
            analytic,
            finite_difference: fd,
            relative_error: (analytic - fd).abs() / fd.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(out)
}

/// Analyses `cp` and runs [`check_gradient`] with `count` seeded bumps.
pub fn grad_check(cp: &ControlPolygon, problem: &Problem, count: usize, seed: u64, t: f64) -> Result<Vec<GradientCheck>> {
    let an = analyze(cp, problem)?;
    check_gradient(&an, problem, &random_bumps(count, seed), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_smooth_and_compact() {
        let b = Bump { center: 0.5, width: 0.1, amplitude: 2.0 };
        assert!((b.eval(0.5) - 2.0 * 4.0 / 6.0).abs() < 1e-15);
        assert!(b.eval(0.7).abs() < 1e-40);
        assert_eq!(b.eval(0.71), 0.0);
        assert_eq!(b.eval(0.25), 0.0);
        let h = 1e-6;
        for s in [0.4, 0.6, 0.45] {
            let d = (b.eval(s + h) - b.eval(s - h)) / (2.0 * h);
            let dl = (b.eval(s) - b.eval(s - h)) / h;
            assert!((d - dl).abs() < 1e-4);
        }
    }

    #[test]
    fn bumps_stay_away_from_tips() {
        for b in random_bumps(50, 7) {
            let (lo, hi) = b.support();
            assert!(lo >= 0.1 - 1e-12 && hi <= 0.9 + 1e-12);
        }
        assert_eq!(random_bumps(3, 11), random_bumps(3, 11));
    }

    fn reference_problem(h: f64) -> (ControlPolygon, Problem) {
        use crate::boundary::AxisSpec;
        use crate::fem::{PenaltyParams, RobinData};
        use crate::mesh::MeshOptions;
        use crate::optimizer::AdjointVariant;
        let cp = ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233).unwrap();
        let problem = Problem {
            axis: AxisSpec::new(0.5, 0.129).unwrap(),
            robin: RobinData::new(PenaltyParams::new(0.1, 4.0).unwrap()),
            n_samples: 400,
            mesh: MeshOptions::new(h),
            adjoint: AdjointVariant::Robin,
        };
        (cp, problem)
    }

    #[test]
    fn zero_velocity_gives_zero_on_both_sides() {
        let (cp, problem) = reference_problem(0.04);
        let an = analyze(&cp, &problem).unwrap();
        let r = check_gradient(&an, &problem, &[Bump { center: 0.5, width: 0.05, amplitude: 0.0 }], 1e-3).unwrap();
        assert_eq!(r[0].analytic, 0.0);
        assert_eq!(r[0].finite_difference, 0.0);
        assert!(check_gradient(&an, &problem, &[], 0.0).is_err());
    }

    #[test]
    fn tip_and_interior_control_points_match_differences() {
        let (cp, problem) = reference_problem(0.02);
        let an = analyze(&cp, &problem).unwrap();
        let (x, y) = (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let checks = check_control_points(&an, &problem, &[(0, y), (40, y), (2, y), (20, x)], 1e-4).unwrap();
        for c in checks {
            assert!(c.relative_error < 0.05, "{c:?}");
        }
    }
}
