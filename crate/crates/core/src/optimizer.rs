//! Projected gradient descent on the Bezier control points.

use std::fmt;
use std::str::FromStr;

use crate::bezier::{bernstein_all, ControlPolygon};
use crate::boundary::{assemble_boundary, check_convexity, AxisSpec, MarkedBoundary, Marker};
use crate::error::{Error, Result};
use crate::fem::{
    boundary_flux, functional_dirichlet_defect, functional_j_eps, functional_neumann_defect, recover_boundary_gradient,
    RobinData, ScalarField, StateSolver,
};
use crate::geom::Vec2;
use crate::mesh::{triangulate_with, MeshOptions, TriangleMesh};

/// Which adjoint enters the second state term of the shape gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointVariant {
    /// p2 = 0 on K ∪ L, natural condition on Γ.
    Mixed,
    /// p = 0 on K, the Robin condition of u2,ε elsewhere (discrete-consistent).
    Robin,
}

impl FromStr for AdjointVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(AdjointVariant::Mixed),
            "robin" => Ok(AdjointVariant::Robin),
            other => Err(Error::InvalidArgument(format!("unknown adjoint variant `{other}`"))),
        }
    }
}

impl fmt::Display for AdjointVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjointVariant::Mixed => "mixed",
            AdjointVariant::Robin => "robin",
        })
    }
}

/// Everything needed to turn a control polygon into J_ε.
#[derive(Debug, Clone, Copy)]
pub struct Problem {
    pub axis: AxisSpec,
    pub robin: RobinData,
    pub n_samples: usize,
    pub mesh: MeshOptions,
    pub adjoint: AdjointVariant,
}

/// Boundary, mesh and states of one design.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub polygon: ControlPolygon,
    pub boundary: MarkedBoundary,
    pub mesh: TriangleMesh,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub j_eps: f64,
}

impl Analysis {
    pub fn u1(&self) -> ScalarField<'_> {
        ScalarField::new(&self.mesh, self.u1.clone()).expect("sizes checked at construction")
    }

    pub fn u2(&self) -> ScalarField<'_> {
        ScalarField::new(&self.mesh, self.u2.clone()).expect("sizes checked at construction")
    }

    pub fn kappa(&self) -> f64 {
        0.5 * (self.boundary.upper_tip().y - self.boundary.lower_tip().y)
    }
}

pub fn analyze(cp: &ControlPolygon, problem: &Problem) -> Result<Analysis> {
    let boundary = assemble_boundary(cp, &problem.axis, problem.n_samples)?;
    let mesh = triangulate_with(boundary.polygon(), &problem.mesh)?;
    let (u1, u2, j_eps) = {
        let solver = StateSolver::new(&mesh, problem.robin)?;
        let u1 = solver.dirichlet_state()?;
        let u2 = solver.robin_state()?;
        let j = functional_j_eps(&u1, &u2)?;
        (u1.into_values(), u2.into_values(), j)
    };
    Ok(Analysis { polygon: cp.clone(), boundary, mesh, u1, u2, j_eps })
}

/// Shape gradient density: g on the Γ samples and on the L edges, plus the
/// control-point derivative of the thin penalty layer at the tips.
#[derive(Debug, Clone)]
pub struct GradientDensity {
    pub gamma: Vec<f64>,
    /// (boundary edge index, g_L) for every L edge of the mesh.
    pub axis: Vec<(usize, f64)>,
    /// ∂J/∂p_k of the terms carried by the support of ψ_ε on Γ. All zero for
    /// [`AdjointVariant::Mixed`].
    pub layer: Vec<Vec2>,
}

/// Evaluates the Hadamard density at the Γ samples.
///
/// With the mixed adjoint this is the literal
/// g_Γ = ∇p1·∇u1 + ∇p2·∇u2,ε + a p2 H + (u1 − u2,ε)². With the Robin adjoint
/// the state term is ∇_Γp2·∇_Γu2,ε + a p2 H, and the terms proportional to β
/// or ∂ₙβ are integrated separately by [`penalty_layer`]: ψ_ε lives on a strip
/// of width ε^q next to each tip, narrower than one sample spacing.
///
/// Normal derivatives come from the variational boundary flux, tangential ones
/// from a three-point difference along the samples. On L,
/// g_L = ∇p1·∇u1 − ∇p2·∇u2,ε is formed per boundary triangle.
pub fn gradient_density(
    boundary: &MarkedBoundary,
    mesh: &TriangleMesh,
    variant: AdjointVariant,
    gradient: f64,
    fields: [&ScalarField<'_>; 4],
) -> Result<GradientDensity> {
    let [u1, u2, p1, p2] = fields;
    let n = boundary.gamma_vertex_count();
    let jets = &boundary.sampling().jets;
    for (i, jet) in jets.iter().enumerate() {
        if mesh.nodes().get(i) != Some(&jet.x) {
            return Err(Error::GeometrySync(format!("Γ sample {i} is not mesh node {i}")));
        }
    }
    for f in [u2, p1, p2] {
        u1.same_mesh(f)?;
    }
    let source: Vec<f64> = u1.values().iter().zip(u2.values()).map(|(a, b)| 2.0 * (a - b)).collect();
    let dn = [
        boundary_flux(u1, None),
        boundary_flux(u2, None),
        boundary_flux(p1, Some(&source)),
        boundary_flux(p2, Some(&source)),
    ];
    let x = |i: usize| jets[i].x;
    let ds = |v: &[f64], i: usize| -> f64 {
        if i == 0 {
            return (v[1] - v[0]) / x(1).distance(x(0));
        }
        if i == n - 1 {
            return (v[n - 1] - v[n - 2]) / x(n - 1).distance(x(n - 2));
        }
        let (a, b) = (x(i).distance(x(i - 1)), x(i + 1).distance(x(i)));
        (-b / (a * (a + b))) * v[i - 1] + ((b - a) / (a * b)) * v[i] + (a / (b * (a + b))) * v[i + 1]
    };
    let gamma = (0..n)
        .map(|i| {
            let g1 = ds(u1.values(), i) * ds(p1.values(), i) + dn[0][i] * dn[2][i];
            let mut g2 = ds(u2.values(), i) * ds(p2.values(), i);
            if variant == AdjointVariant::Mixed {
                g2 += dn[1][i] * dn[3][i];
            }
            let d = u1.values()[i] - u2.values()[i];
            g1 + g2 + gradient * p2.values()[i] * jets[i].curvature + d * d
        })
        .collect();
    let axis = mesh
        .boundary_edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.marker == Marker::L)
        .map(|(k, e)| {
            let t = e.triangle;
            (k, p1.gradient(t).dot(u1.gradient(t)) - p2.gradient(t).dot(u2.gradient(t)))
        })
        .collect();
    let m = boundary.sampling().basis[0].len() - 1;
    Ok(GradientDensity { gamma, axis, layer: vec![Vec2::ZERO; m + 1] })
}

/// ∂J/∂p_k from the part of the density that involves the Robin coefficient
/// β = a ψ_ε(a x1) on Γ,
/// (∂ₙβ + Hβ) u2,ε p2 + β p2 ∂ₙu2,ε with ∂ₙu2,ε = −a − β u2,ε.
/// The integrand is confined to the few sample intervals where x1 < ε^q / a;
/// each of those is integrated with composite Gauss rules on the exact curve,
/// with u2,ε and p2 interpolated linearly between samples.
pub fn penalty_layer(cp: &ControlPolygon, boundary: &MarkedBoundary, robin: &RobinData, u2: &[f64], p2: &[f64]) -> Result<Vec<Vec2>> {
    let m = cp.degree();
    let mut out = vec![Vec2::ZERO; m + 1];
    let Some(pen) = robin.penalty else { return Ok(out) };
    let reach = pen.support() / robin.gradient;
    let jets = &boundary.sampling().jets;
    const PANELS: usize = 16;
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    for i in 0..jets.len() - 1 {
        let (ja, jb) = (&jets[i], &jets[i + 1]);
        if ja.x.x.min(jb.x.x) >= reach {
            continue;
        }
        let h = (jb.s - ja.s) / PANELS as f64;
        for panel in 0..PANELS {
            let mid = ja.s + (panel as f64 + 0.5) * h;
            for (z, w) in NODES.iter().zip(WEIGHTS) {
                let s = mid + 0.5 * h * z;
                let jet = cp.jet(s)?;
                let beta = robin.coefficient(Marker::Gamma, jet.x);
                if beta == 0.0 {
                    continue;
                }
                let t = (s - ja.s) / (jb.s - ja.s);
                let u = u2[i] + t * (u2[i + 1] - u2[i]);
                let p = p2[i] + t * (p2[i + 1] - p2[i]);
                let dn_beta = robin.coefficient_slope(Marker::Gamma, jet.x) * jet.normal.x;
                let du = -robin.gradient - beta * u;
                let c = (dn_beta + jet.curvature * beta) * u * p + beta * p * du;
                let f = c * jet.speed * 0.5 * h * w;
                for (o, b) in out.iter_mut().zip(bernstein_all(m, s)) {
                    *o += jet.normal * (f * b);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint states and the density for an analysed design.
pub fn shape_gradient(analysis: &Analysis, problem: &Problem) -> Result<GradientDensity> {
    let mesh = &analysis.mesh;
    let solver = StateSolver::new(mesh, problem.robin)?;
    let (u1, u2) = (analysis.u1(), analysis.u2());
    let p1 = solver.adjoint_p1(&u1, &u2)?;
    let p2 = match problem.adjoint {
        AdjointVariant::Mixed => solver.adjoint_p2(&u1, &u2)?,
        AdjointVariant::Robin => solver.adjoint_robin(&u1, &u2)?,
    };
    let mut density =
        gradient_density(&analysis.boundary, mesh, problem.adjoint, problem.robin.gradient, [&u1, &u2, &p1, &p2])?;
    if problem.adjoint == AdjointVariant::Robin {
        density.layer = penalty_layer(&analysis.polygon, &analysis.boundary, &problem.robin, u2.values(), p2.values())?;
    }
    Ok(density)
}

/// dJ(Ω; V) for a normal velocity V·n = v_i at the Γ samples.
pub fn directional_derivative(boundary: &MarkedBoundary, density: &GradientDensity, vn: &[f64]) -> f64 {
    let w = &boundary.sampling().weights;
    density.gamma.iter().zip(vn).zip(w).map(|((g, v), w)| g * v * w).sum()
}

/// ∂J/∂p_k = Σ_i w_i g(s_i) B_k(s_i) n(s_i) + layer_k, plus the L density
/// attached to the end control points.
pub fn control_point_gradient(boundary: &MarkedBoundary, mesh: &TriangleMesh, density: &GradientDensity) -> Vec<Vec2> {
    let sampling = boundary.sampling();
    let m = sampling.basis[0].len() - 1;
    let mut grad = density.layer.clone();
    grad.resize(m + 1, Vec2::ZERO);
    for (i, jet) in sampling.jets.iter().enumerate() {
        let f = sampling.weights[i] * density.gamma[i];
        for (k, b) in sampling.basis[i].iter().enumerate() {
            grad[k] += jet.normal * (f * b);
        }
    }
    // L moves with the nearest end point of Γ; its normal is horizontal, so
    // this only feeds abscissae that the axis constraint removes
    let c = boundary.axis().center;
    for &(k, g) in &density.axis {
        let e = &mesh.boundary_edges()[k];
        let idx = if mesh.edge_midpoint(e).y < c { 0 } else { m };
        grad[idx] += mesh.edge_normal(e) * (g * mesh.edge_length(e));
    }
    grad
}

/// Steepest-descent direction dp_k = −∂J/∂p_k, with the axis-constrained
/// abscissae of the four end control points zeroed.
pub fn descent_direction(
    boundary: &MarkedBoundary,
    mesh: &TriangleMesh,
    density: &GradientDensity,
) -> Vec<Vec2> {
    let mut dp: Vec<Vec2> = control_point_gradient(boundary, mesh, density).into_iter().map(|g| -g).collect();
    let m = dp.len() - 1;
    for k in [0, 1, m - 1, m] {
        dp[k].x = 0.0;
    }
    dp
}

/// p ← p + α dp followed by projection onto the admissible set: abscissae
/// nonnegative, end points on the axis and at least δ_L away from K.
pub fn project_update(cp: &ControlPolygon, dp: &[Vec2], alpha: f64, axis: &AxisSpec, delta_l: f64) -> Result<ControlPolygon> {
    let m = cp.degree();
    if dp.len() != m + 1 {
        return Err(Error::InvalidArgument(format!("direction has {} entries for degree {m}", dp.len())));
    }
    let mut pts: Vec<Vec2> = cp
        .points()
        .iter()
        .zip(dp)
        .map(|(&p, &d)| {
            let q = p + d * alpha;
            Vec2::new(q.x.max(0.0), q.y)
        })
        .collect();
    for k in [0, 1, m - 1, m] {
        pts[k].x = 0.0;
    }
    pts[0].y = pts[0].y.min(axis.lower() - delta_l);
    pts[m].y = pts[m].y.max(axis.upper() + delta_l);
    ControlPolygon::new(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub mu: f64,
    pub eta: f64,
    pub lambda: f64,
    pub max_backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchStep {
    pub alpha: f64,
    pub backtracks: usize,
    pub value: f64,
}

/// Backtracking on α = μ η^a, a = 0, 1, ...: accepts the first trial with
/// J(α) − J0 ≤ −(α/λ)·|Δ(α)|², where `trial(α)` returns (J(α), |Δ(α)|²) or
/// fails. Recoverable trial failures count as rejections.
pub fn backtrack<T>(
    params: &LineSearchParams,
    j0: f64,
    mut trial: impl FnMut(f64) -> Result<(f64, f64, T)>,
) -> Result<(LineSearchStep, T)> {
    let mut alpha = params.mu;
    for a in 0..=params.max_backtracks {
        match trial(alpha) {
            Ok((j, disp2, payload)) => {
                if j - j0 <= -(alpha / params.lambda) * disp2 {
                    return Ok((LineSearchStep { alpha, backtracks: a, value: j }, payload));
                }
            }
            Err(e) if e.is_recoverable_trial() => {}
            Err(e) => return Err(e),
        }
        alpha *= params.eta;
    }
    Err(Error::LineSearch { backtracks: params.max_backtracks })
}

/// Line search on the control polygon along `dp`.
pub fn line_search(
    cp: &ControlPolygon,
    dp: &[Vec2],
    j0: f64,
    params: &LineSearchParams,
    problem: &Problem,
    delta_l: f64,
) -> Result<(LineSearchStep, Analysis)> {
    backtrack(params, j0, |alpha| {
        let cand = project_update(cp, dp, alpha, &problem.axis, delta_l)?;
        let disp2: f64 = cand.points().iter().zip(cp.points()).map(|(a, b)| (*a - *b).norm_sq()).sum();
        let an = analyze(&cand, problem)?;
        Ok((an.j_eps, disp2, an))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerParams {
    pub line_search: LineSearchParams,
    pub max_iters: usize,
    pub tau_r: f64,
    pub delta_l: f64,
    /// Displacement of the first step of an earlier run, when resuming.
    pub reference_displacement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j_eps: f64,
    pub alpha: f64,
    pub backtracks: usize,
    pub max_displacement: f64,
    pub kappa: f64,
    pub convex: bool,
    pub neumann_defect: f64,
    pub dirichlet_defect: f64,
    pub nodes: usize,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str =
        "iteration,j_eps,alpha,backtracks,max_displacement,kappa,convex,neumann_defect,dirichlet_defect,nodes";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{},{:.17e},{:.17e},{},{:.17e},{:.17e},{}",
            self.iteration,
            self.j_eps,
            self.alpha,
            self.backtracks,
            self.max_displacement,
            self.kappa,
            self.convex,
            self.neumann_defect,
            self.dirichlet_defect,
            self.nodes
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Relative displacement fell below τ_r.
    Converged,
    MaxIterations,
    /// Stopped early on an error; the last accepted design is kept.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub initial: Analysis,
    pub last: Analysis,
    /// Max control-point displacement of the first accepted step.
    pub reference_displacement: f64,
}

impl OptimizationRun {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from(IterationRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.history {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

fn record(an: &Analysis, iteration: usize, alpha: f64, backtracks: usize, disp: f64) -> Result<IterationRecord> {
    let u1 = an.u1();
    let grad = recover_boundary_gradient(&an.mesh, &u1)?;
    Ok(IterationRecord {
        iteration,
        j_eps: an.j_eps,
        alpha,
        backtracks,
        max_displacement: disp,
        kappa: an.kappa(),
        convex: check_convexity(an.boundary.polygon()).convex,
        neumann_defect: functional_neumann_defect(&grad),
        dirichlet_defect: functional_dirichlet_defect(&an.u2()),
        nodes: an.mesh.node_count(),
    })
}

/// Runs the descent from `initial`. `observe` sees every accepted design.
pub fn run_optimization(
    initial: &ControlPolygon,
    problem: &Problem,
    params: &OptimizerParams,
    mut observe: impl FnMut(&IterationRecord, &Analysis),
) -> Result<OptimizationRun> {
    if !(params.tau_r > 0.0 && params.line_search.mu > 0.0 && params.line_search.lambda > 0.0)
        || !(params.line_search.eta > 0.0 && params.line_search.eta < 1.0)
    {
        return Err(Error::InvalidArgument("need τ_r, μ, λ > 0 and 0 < η < 1".into()));
    }
    let first = analyze(initial, problem)?;
    let rec = record(&first, 0, 0.0, 0, 0.0)?;
    observe(&rec, &first);
    let mut history = vec![rec];
    let mut current = first.clone();
    let mut reference = params.reference_displacement;
    let mut termination = Termination::MaxIterations;

    for l in 1..=params.max_iters {
        let step = shape_gradient(&current, problem).and_then(|g| {
            let dp = descent_direction(&current.boundary, &current.mesh, &g);
            line_search(&current.polygon, &dp, current.j_eps, &params.line_search, problem, params.delta_l)
        });
        let (ls, next) = match step {
            Ok(x) => x,
            Err(e) => {
                termination = Termination::Failed(e.to_string());
                break;
            }
        };
        let disp = next
            .polygon
            .points()
            .iter()
            .zip(current.polygon.points())
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max);
        let rec = match record(&next, l, ls.alpha, ls.backtracks, disp) {
            Ok(r) => r,
            Err(e) => {
                termination = Termination::Failed(e.to_string());
                break;
            }
        };
        observe(&rec, &next);
        history.push(rec);
        current = next;
        let base = *reference.get_or_insert(disp);
        let done = disp <= params.tau_r * base && (l > 1 || params.reference_displacement.is_some() || base == 0.0);
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(OptimizationRun {
        history,
        termination,
        initial: first,
        last: current,
        reference_displacement: reference.unwrap_or(0.0),
    })
}
