//! Linear finite elements for the state and adjoint problems.
//!
//! All problems are −Δu = f in Ω with a mix of Dirichlet, Robin and Neumann
//! conditions on the marked boundary. Dirichlet nodes are eliminated with a
//! lifting so every system is SPD and factorized once by Cholesky.

use crate::boundary::Marker;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::linalg::{CsrMatrix, SpdFactor, TripletBuilder};
use crate::mesh::TriangleMesh;

/// Nodal P1 field on a mesh.
#[derive(Debug, Clone)]
pub struct ScalarField<'m> {
    mesh: &'m TriangleMesh,
    values: Vec<f64>,
}

impl<'m> ScalarField<'m> {
    pub fn new(mesh: &'m TriangleMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("field value at node {i} is not finite")));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn from_fn(mesh: &'m TriangleMesh, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        ScalarField::new(mesh, mesh.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn mesh(&self) -> &'m TriangleMesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Constant gradient on triangle t.
    pub fn gradient(&self, t: usize) -> Vec2 {
        let g = element_gradients(self.mesh, t);
        let tri = self.mesh.triangles()[t];
        (0..3).fold(Vec2::ZERO, |acc, k| acc + g[k] * self.values[tri[k]])
    }

    pub(crate) fn same_mesh(&self, other: &ScalarField<'_>) -> Result<()> {
        if std::ptr::eq(self.mesh, other.mesh) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("fields live on different meshes".into()))
        }
    }
}

/// Coefficients of ψ_ε(x1) = ε^{-1} max(1 − ε^{-q} x1, 0)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub eps: f64,
    pub q: f64,
}

impl PenaltyParams {
    pub fn new(eps: f64, q: f64) -> Result<Self> {
        if !(eps > 0.0 && q > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty needs ε > 0 and q > 0, got ({eps}, {q})")));
        }
        Ok(PenaltyParams { eps, q })
    }

    /// Width ε^q of the support of ψ_ε.
    pub fn support(&self) -> f64 {
        self.eps.powf(self.q)
    }
}

pub fn psi_eps(x1: f64, p: &PenaltyParams) -> f64 {
    let beta = p.support();
    if x1 >= beta {
        return 0.0;
    }
    let r = 1.0 - x1 / beta;
    r * r / p.eps
}

/// dψ_ε/dx1.
pub fn psi_eps_derivative(x1: f64, p: &PenaltyParams) -> f64 {
    let beta = p.support();
    if x1 >= beta {
        return 0.0;
    }
    -2.0 * (1.0 - x1 / beta) / (beta * p.eps)
}

/// Mean of ψ_ε over [x_a, x_b] (either order), in closed form. The support
/// of ψ_ε is far narrower than a boundary edge near the tips, so a midpoint
/// value would misrepresent it.
pub fn psi_eps_mean(xa: f64, xb: f64, p: &PenaltyParams) -> f64 {
    let beta = p.support();
    if (xb - xa).abs() <= 1e-9 * beta {
        return psi_eps(0.5 * (xa + xb), p);
    }
    let primitive = |x: f64| -beta / (3.0 * p.eps) * (1.0 - x / beta).max(0.0).powi(3);
    (primitive(xb) - primitive(xa)) / (xb - xa)
}

/// Data of the penalized problem. `gradient` is the prescribed |∇u| on Γ;
/// a value a ≠ 1 corresponds to the problem rescaled by 1/a, with the
/// penalty dilated accordingly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinData {
    pub penalty: Option<PenaltyParams>,
    pub gradient: f64,
}

impl RobinData {
    pub fn new(penalty: PenaltyParams) -> Self {
        RobinData { penalty: Some(penalty), gradient: 1.0 }
    }

    pub fn with_gradient(mut self, a: f64) -> Self {
        self.gradient = a;
        self
    }

    /// Robin coefficient β at a boundary point: a/ε on L, a ψ_ε(a x1) on Γ.
    pub fn coefficient(&self, marker: Marker, x: Vec2) -> f64 {
        let Some(p) = self.penalty else { return 0.0 };
        let a = self.gradient;
        match marker {
            Marker::L => a / p.eps,
            Marker::Gamma => a * psi_eps(a * x.x.max(0.0), &p),
            Marker::K | Marker::Wall => 0.0,
        }
    }

    /// ∂β/∂x1 at a point of Γ.
    pub fn coefficient_slope(&self, marker: Marker, x: Vec2) -> f64 {
        match (self.penalty, marker) {
            (Some(p), Marker::Gamma) => self.gradient * self.gradient * psi_eps_derivative(self.gradient * x.x.max(0.0), &p),
            _ => 0.0,
        }
    }

    /// Mean of β along the straight edge from `a` to `b`.
    pub fn edge_coefficient(&self, marker: Marker, a: Vec2, b: Vec2) -> f64 {
        match (self.penalty, marker) {
            (Some(p), Marker::Gamma) => {
                let g = self.gradient;
                g * psi_eps_mean(g * a.x.max(0.0), g * b.x.max(0.0), &p)
            }
            _ => self.coefficient(marker, (a + b) * 0.5),
        }
    }
}

pub(crate) fn element_gradients(mesh: &TriangleMesh, t: usize) -> [Vec2; 3] {
    let [a, b, c] = mesh.triangle_vertices(t);
    let inv = 1.0 / (b - a).cross(c - a);
    [(b - c).rot_cw() * inv, (c - a).rot_cw() * inv, (a - b).rot_cw() * inv]
}

/// Global stiffness and consistent mass matrices.
pub fn assemble_stiffness_mass(mesh: &TriangleMesh) -> (CsrMatrix, CsrMatrix) {
    let n = mesh.node_count();
    let cap = 9 * mesh.triangles().len();
    let (mut k, mut m) = (TripletBuilder::with_capacity(n, cap), TripletBuilder::with_capacity(n, cap));
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        let g = element_gradients(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                k.add(tri[i], tri[j], area * g[i].dot(g[j]));
                m.add(tri[i], tri[j], area / 12.0 * if i == j { 2.0 } else { 1.0 });
            }
        }
    }
    (k.build(), m.build())
}

/// Load vector ∫ f v for a P1 source f.
pub fn mass_load(mesh: &TriangleMesh, f: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        let s = f[tri[0]] + f[tri[1]] + f[tri[2]];
        for &i in tri {
            b[i] += area / 12.0 * (s + f[i]);
        }
    }
    b
}

/// Adds ∫_e g v over every boundary edge e, with g = flux(marker) constant per edge.
pub fn add_edge_load(mesh: &TriangleMesh, b: &mut [f64], flux: impl Fn(Marker) -> f64) {
    for e in mesh.boundary_edges() {
        let g = flux(e.marker);
        if g != 0.0 {
            let half = 0.5 * g * mesh.edge_length(e);
            b[e.nodes[0]] += half;
            b[e.nodes[1]] += half;
        }
    }
}

/// Variational normal derivative at the boundary nodes of a field solving
/// −Δv = f: the residual of the unconstrained weak form divided by the lumped
/// boundary mass. Interior entries are zero. This is markedly more accurate on
/// the boundary than the gradient of the adjacent triangle.
pub fn boundary_flux(field: &ScalarField<'_>, source: Option<&[f64]>) -> Vec<f64> {
    let mesh = field.mesh;
    let (k, _) = assemble_stiffness_mass(mesh);
    let mut r = k.matvec(&field.values);
    if let Some(f) = source {
        for (ri, bi) in r.iter_mut().zip(mass_load(mesh, f)) {
            *ri -= bi;
        }
    }
    let mut lumped = vec![0.0; mesh.node_count()];
    for e in mesh.boundary_edges() {
        let half = 0.5 * mesh.edge_length(e);
        lumped[e.nodes[0]] += half;
        lumped[e.nodes[1]] += half;
    }
    r.iter().zip(&lumped).map(|(&ri, &m)| if m > 0.0 { ri / m } else { 0.0 }).collect()
}

/// Factorized operator −Δ + Robin terms on the free nodes of a mesh.
#[derive(Debug)]
pub struct EllipticSolver<'m> {
    mesh: &'m TriangleMesh,
    dof: Vec<Option<usize>>,
    factor: SpdFactor,
    /// Entries K[free, fixed], used to lift Dirichlet data.
    coupling: Vec<(usize, usize, f64)>,
}

impl<'m> EllipticSolver<'m> {
    /// `fixed[i]` marks Dirichlet nodes; `robin[e]` is the Robin coefficient
    /// of boundary edge e (consistent edge mass).
    pub fn new(mesh: &'m TriangleMesh, fixed: &[bool], robin: &[f64]) -> Result<Self> {
        let n = mesh.node_count();
        let mut dof = vec![None; n];
        let mut nfree = 0;
        for i in 0..n {
            if !fixed[i] {
                dof[i] = Some(nfree);
                nfree += 1;
            }
        }
        let mut a = TripletBuilder::with_capacity(nfree, 9 * mesh.triangles().len());
        let mut coupling = Vec::new();
        let mut put = |i: usize, j: usize, v: f64, coupling: &mut Vec<(usize, usize, f64)>| match (dof[i], dof[j]) {
            (Some(p), Some(q)) => a.add(p, q, v),
            (Some(p), None) => coupling.push((p, j, v)),
            _ => {}
        };
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.triangle_area(t);
            let g = element_gradients(mesh, t);
            for i in 0..3 {
                for j in 0..3 {
                    put(tri[i], tri[j], area * g[i].dot(g[j]), &mut coupling);
                }
            }
        }
        for (e, &c) in mesh.boundary_edges().iter().zip(robin) {
            if c != 0.0 {
                let w = c * mesh.edge_length(e) / 6.0;
                let [p, q] = e.nodes;
                put(p, p, 2.0 * w, &mut coupling);
                put(q, q, 2.0 * w, &mut coupling);
                put(p, q, w, &mut coupling);
                put(q, p, w, &mut coupling);
            }
        }
        let factor = a.build().cholesky()?;
        Ok(EllipticSolver { mesh, dof, factor, coupling })
    }

    pub fn mesh(&self) -> &'m TriangleMesh {
        self.mesh
    }

    /// Solves with Dirichlet values taken from `dirichlet` at fixed nodes and
    /// load vector `load` (already integrated against the basis).
    pub fn solve(&self, dirichlet: &[f64], load: &[f64]) -> Result<ScalarField<'m>> {
        let n = self.mesh.node_count();
        let mut rhs = vec![0.0; self.factor.dim()];
        for i in 0..n {
            if let Some(p) = self.dof[i] {
                rhs[p] = load[i];
            }
        }
        for &(p, j, v) in &self.coupling {
            rhs[p] -= v * dirichlet[j];
        }
        let x = self.factor.solve(&rhs)?;
        let values = (0..n)
            .map(|i| match self.dof[i] {
                Some(p) => x[p],
                None => dirichlet[i],
            })
            .collect();
        ScalarField::new(self.mesh, values)
    }
}

fn require_marker(mesh: &TriangleMesh, m: Marker) -> Result<()> {
    if mesh.boundary_edges().iter().any(|e| e.marker == m) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mesh has no {m} edges")))
    }
}

struct NodeClass {
    on_k: Vec<bool>,
    on_l: Vec<bool>,
    on_gamma: Vec<bool>,
}

fn classify(mesh: &TriangleMesh) -> NodeClass {
    let n = mesh.node_count();
    let mut c = NodeClass { on_k: vec![false; n], on_l: vec![false; n], on_gamma: vec![false; n] };
    for e in mesh.boundary_edges() {
        let v = match e.marker {
            Marker::K => &mut c.on_k,
            Marker::L => &mut c.on_l,
            Marker::Gamma => &mut c.on_gamma,
            Marker::Wall => continue,
        };
        v[e.nodes[0]] = true;
        v[e.nodes[1]] = true;
    }
    c
}

/// Factorizations shared by the state and adjoint solves on one mesh.
pub struct StateSolver<'m> {
    mesh: &'m TriangleMesh,
    class: NodeClass,
    data: RobinData,
    dirichlet: EllipticSolver<'m>,
    robin: EllipticSolver<'m>,
    mixed: std::cell::OnceCell<EllipticSolver<'m>>,
}

impl<'m> StateSolver<'m> {
    pub fn new(mesh: &'m TriangleMesh, data: RobinData) -> Result<Self> {
        require_marker(mesh, Marker::K)?;
        let class = classify(mesh);
        let n = mesh.node_count();
        let all: Vec<bool> = (0..n).map(|i| class.on_k[i] || class.on_l[i] || class.on_gamma[i]).collect();
        let dirichlet = EllipticSolver::new(mesh, &all, &vec![0.0; mesh.boundary_edges().len()])?;
        let coeff: Vec<f64> = mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let [a, b] = e.nodes.map(|i| mesh.nodes()[i]);
                data.edge_coefficient(e.marker, a, b)
            })
            .collect();
        let robin = EllipticSolver::new(mesh, &class.on_k, &coeff)?;
        Ok(StateSolver { mesh, class, data, dirichlet, robin, mixed: std::cell::OnceCell::new() })
    }

    pub fn mesh(&self) -> &'m TriangleMesh {
        self.mesh
    }

    fn mixed(&self) -> Result<&EllipticSolver<'m>> {
        if let Some(s) = self.mixed.get() {
            return Ok(s);
        }
        require_marker(self.mesh, Marker::Gamma)?;
        let fixed: Vec<bool> = (0..self.mesh.node_count()).map(|i| self.class.on_k[i] || self.class.on_l[i]).collect();
        let s = EllipticSolver::new(self.mesh, &fixed, &vec![0.0; self.mesh.boundary_edges().len()])?;
        Ok(self.mixed.get_or_init(|| s))
    }

    fn k_indicator(&self) -> Vec<f64> {
        self.class.on_k.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect()
    }

    /// Harmonic u1 with u1 = 1 on K and 0 on L ∪ Γ.
    pub fn dirichlet_state(&self) -> Result<ScalarField<'m>> {
        self.dirichlet.solve(&self.k_indicator(), &vec![0.0; self.mesh.node_count()])
    }

    /// u2,ε: u = 1 on K, ∂ₙu + ψ_ε u = −a on the rest of the axis and on Γ.
    pub fn robin_state(&self) -> Result<ScalarField<'m>> {
        let mut b = vec![0.0; self.mesh.node_count()];
        let a = self.data.gradient;
        add_edge_load(self.mesh, &mut b, |m| if matches!(m, Marker::L | Marker::Gamma) { -a } else { 0.0 });
        self.robin.solve(&self.k_indicator(), &b)
    }

    /// u2: u = 1 on K, u = 0 on L, ∂ₙu = −a on Γ.
    pub fn mixed_state(&self) -> Result<ScalarField<'m>> {
        let mut b = vec![0.0; self.mesh.node_count()];
        let a = self.data.gradient;
        add_edge_load(self.mesh, &mut b, |m| if m == Marker::Gamma { -a } else { 0.0 });
        self.mixed()?.solve(&self.k_indicator(), &b)
    }

    fn adjoint_source(u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<Vec<f64>> {
        u1.same_mesh(u2)?;
        let f: Vec<f64> = u1.values.iter().zip(&u2.values).map(|(a, b)| 2.0 * (a - b)).collect();
        Ok(mass_load(u1.mesh, &f))
    }

    /// −Δp1 = 2(u1 − u2,ε), p1 = 0 on ∂Ω.
    pub fn adjoint_p1(&self, u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<ScalarField<'m>> {
        let b = Self::adjoint_source(u1, u2)?;
        self.dirichlet.solve(&vec![0.0; self.mesh.node_count()], &b)
    }

    /// −Δp2 = 2(u1 − u2,ε), p2 = 0 on K ∪ L, ∂ₙp2 = 0 on Γ.
    pub fn adjoint_p2(&self, u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<ScalarField<'m>> {
        let b = Self::adjoint_source(u1, u2)?;
        self.mixed()?.solve(&vec![0.0; self.mesh.node_count()], &b)
    }

    /// −Δp = 2(u1 − u2,ε), p = 0 on K, ∂ₙp + ψ_ε p = 0 elsewhere: the exact
    /// adjoint of the discrete Robin problem.
    pub fn adjoint_robin(&self, u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<ScalarField<'m>> {
        let b = Self::adjoint_source(u1, u2)?;
        self.robin.solve(&vec![0.0; self.mesh.node_count()], &b)
    }

    /// Harmonic extension of boundary values into the interior.
    pub fn harmonic_extension(&self, boundary_values: &[f64]) -> Result<ScalarField<'m>> {
        self.dirichlet.solve(boundary_values, &vec![0.0; self.mesh.node_count()])
    }
}

pub fn solve_dirichlet_state(mesh: &TriangleMesh) -> Result<ScalarField<'_>> {
    require_marker(mesh, Marker::K)?;
    let class = classify(mesh);
    let n = mesh.node_count();
    let fixed: Vec<bool> = (0..n).map(|i| class.on_k[i] || class.on_l[i] || class.on_gamma[i]).collect();
    let g: Vec<f64> = class.on_k.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    EllipticSolver::new(mesh, &fixed, &vec![0.0; mesh.boundary_edges().len()])?.solve(&g, &vec![0.0; n])
}

pub fn solve_mixed_state(mesh: &TriangleMesh) -> Result<ScalarField<'_>> {
    StateSolver::new(mesh, RobinData { penalty: None, gradient: 1.0 })?.mixed_state()
}

pub fn solve_robin_state<'m>(mesh: &'m TriangleMesh, p: &PenaltyParams) -> Result<ScalarField<'m>> {
    StateSolver::new(mesh, RobinData::new(*p))?.robin_state()
}

pub fn solve_adjoint_p1<'m>(mesh: &'m TriangleMesh, u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<ScalarField<'m>> {
    StateSolver::new(mesh, RobinData { penalty: None, gradient: 1.0 })?.adjoint_p1(u1, u2)
}

pub fn solve_adjoint_p2<'m>(mesh: &'m TriangleMesh, u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<ScalarField<'m>> {
    StateSolver::new(mesh, RobinData { penalty: None, gradient: 1.0 })?.adjoint_p2(u1, u2)
}

/// Gradient of a field on one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGradient {
    /// Index into `mesh.boundary_edges()`.
    pub edge: usize,
    pub marker: Marker,
    pub gradient: Vec2,
    pub normal_derivative: f64,
    pub normal: Vec2,
    pub midpoint: Vec2,
    pub length: f64,
}

impl EdgeGradient {
    pub fn tangential(&self) -> f64 {
        self.normal.cross(self.gradient)
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryGradient {
    pub edges: Vec<EdgeGradient>,
}

impl BoundaryGradient {
    pub fn on(&self, marker: Marker) -> impl Iterator<Item = &EdgeGradient> + '_ {
        self.edges.iter().filter(move |e| e.marker == marker)
    }

    /// ∫ ∂ₙu over the edges with the given markers.
    pub fn flux(&self, markers: &[Marker]) -> f64 {
        self.edges
            .iter()
            .filter(|e| markers.contains(&e.marker))
            .map(|e| e.length * e.normal_derivative)
            .sum()
    }
}

pub fn recover_boundary_gradient(mesh: &TriangleMesh, field: &ScalarField<'_>) -> Result<BoundaryGradient> {
    if !std::ptr::eq(mesh, field.mesh) {
        return Err(Error::InvalidArgument("field belongs to another mesh".into()));
    }
    let mut shared = std::collections::HashMap::new();
    for tri in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *shared.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
        }
    }
    let mut edges = Vec::with_capacity(mesh.boundary_edges().len());
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        let [a, b] = e.nodes;
        let count = shared.get(&(a.min(b), a.max(b))).copied().unwrap_or(0);
        if count != 1 {
            return Err(Error::MeshIntegrity(format!(
                "boundary edge {i} is adjacent to {count} triangles"
            )));
        }
        let gradient = field.gradient(e.triangle);
        let normal = mesh.edge_normal(e);
        edges.push(EdgeGradient {
            edge: i,
            marker: e.marker,
            gradient,
            normal_derivative: gradient.dot(normal),
            normal,
            midpoint: mesh.edge_midpoint(e),
            length: mesh.edge_length(e),
        });
    }
    Ok(BoundaryGradient { edges })
}

/// ∫_Ω (u2,ε − u1)², exact for a P1 difference by the edge-midpoint rule.
pub fn functional_j_eps(u1: &ScalarField<'_>, u2: &ScalarField<'_>) -> Result<f64> {
    u1.same_mesh(u2)?;
    let mesh = u1.mesh;
    let d: Vec<f64> = u2.values.iter().zip(&u1.values).map(|(a, b)| a - b).collect();
    let mut j = 0.0;
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let (ab, bc, ca) = (0.5 * (d[a] + d[b]), 0.5 * (d[b] + d[c]), 0.5 * (d[c] + d[a]));
        j += mesh.triangle_area(t) / 3.0 * (ab * ab + bc * bc + ca * ca);
    }
    Ok(j)
}

/// ∫_Γ (∂ₙu1 + 1)², with ∂ₙu1 constant per edge.
pub fn functional_neumann_defect(grad: &BoundaryGradient) -> f64 {
    grad.on(Marker::Gamma)
        .map(|e| e.length * (e.normal_derivative + 1.0).powi(2))
        .sum()
}

/// ∫_Γ u², exact for P1 traces.
pub fn functional_dirichlet_defect(u: &ScalarField<'_>) -> f64 {
    let mesh = u.mesh;
    mesh.boundary_edges()
        .iter()
        .filter(|e| e.marker == Marker::Gamma)
        .map(|e| {
            let (a, b) = (u.values[e.nodes[0]], u.values[e.nodes[1]]);
            mesh.edge_length(e) / 3.0 * (a * a + a * b + b * b)
        })
        .sum()
}

/// Discrete H¹ distance sqrt(eᵀ(K + M)e), e = a − b.
pub fn h1_distance(a: &ScalarField<'_>, b: &ScalarField<'_>) -> Result<f64> {
    a.same_mesh(b)?;
    let (k, m) = assemble_stiffness_mass(a.mesh);
    let e: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    Ok((k.quadratic_form(&e) + m.quadratic_form(&e)).max(0.0).sqrt())
}

/// Discrete L² norm sqrt(eᵀMe) of a nodal vector.
pub fn l2_norm(mesh: &TriangleMesh, e: &[f64]) -> f64 {
    let (_, m) = assemble_stiffness_mass(mesh);
    m.quadratic_form(e).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::MarkedPolygon;
    use crate::mesh::triangulate;

    fn strip(b: f64, h: f64, right: Marker) -> TriangleMesh {
        let poly = MarkedPolygon::rectangle(
            Vec2::new(0.0, -b),
            Vec2::new(1.0, b),
            8,
            [Marker::Wall, right, Marker::Wall, Marker::K],
        )
        .unwrap();
        triangulate(&poly, h).unwrap()
    }

    fn max_error(u: &ScalarField<'_>, f: impl Fn(Vec2) -> f64) -> f64 {
        u.mesh()
            .nodes()
            .iter()
            .zip(u.values())
            .map(|(&p, v)| (f(p) - v).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn psi_values() {
        let p = PenaltyParams::new(0.1, 4.0).unwrap();
        assert!((psi_eps(0.0, &p) - 10.0).abs() < 1e-14);
        assert_eq!(psi_eps(p.support(), &p), 0.0);
        assert!(psi_eps(1e-4, &p) < 1e-30);
        assert_eq!(psi_eps(0.3, &p), 0.0);
        assert!((psi_eps(0.5e-4, &p) - 2.5).abs() < 1e-12);
        assert!(PenaltyParams::new(0.0, 4.0).is_err());
        assert!(PenaltyParams::new(0.1, -1.0).is_err());
    }

    #[test]
    fn psi_mean_and_slope_match_quadrature() {
        let p = PenaltyParams::new(0.1, 4.0).unwrap();
        let simpson = |a: f64, b: f64| {
            let n = 20000;
            let h = (b - a) / n as f64;
            (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * psi_eps(a + i as f64 * h, &p)
                })
                .sum::<f64>()
                * h
                / 3.0
                / (b - a)
        };
        for (a, b) in [(0.0, 1.2e-4), (3e-5, 7e-5), (2e-4, 0.0), (0.0, 0.01)] {
            let m = psi_eps_mean(a, b, &p);
            assert!((m - simpson(a, b)).abs() < 1e-8 * m.max(1.0), "{a} {b}");
        }
        assert_eq!(psi_eps_mean(4e-5, 4e-5, &p), psi_eps(4e-5, &p));
        for x in [0.0, 2e-5, 9e-5] {
            let d = (psi_eps(x + 1e-9, &p) - psi_eps((x - 1e-9).max(0.0), &p)) / (x + 1e-9 - (x - 1e-9).max(0.0));
            assert!((psi_eps_derivative(x, &p) - d).abs() < 1e-3 * d.abs());
        }
    }

    #[test]
    fn strip_exactness_dirichlet() {
        let mesh = strip(0.5, 0.1, Marker::Gamma);
        let u = solve_dirichlet_state(&mesh).unwrap();
        assert!(max_error(&u, |p| 1.0 - p.x) < 1e-12);
    }

    #[test]
    fn strip_exactness_mixed_and_robin() {
        let mesh = strip(0.5, 0.1, Marker::Gamma);
        let u = solve_mixed_state(&mesh).unwrap();
        assert!(max_error(&u, |p| 1.0 - p.x) < 1e-12);
        let p = PenaltyParams::new(0.1, 4.0).unwrap();
        let u = solve_robin_state(&mesh, &p).unwrap();
        assert!(max_error(&u, |p| 1.0 - p.x) < 1e-12);
        let g = recover_boundary_gradient(&mesh, &u).unwrap();
        for e in g.on(Marker::Gamma) {
            assert!((e.normal_derivative + 1.0).abs() < 1e-11);
        }
        assert!(functional_neumann_defect(&g) < 1e-20);
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let mesh = strip(0.5, 0.2, Marker::Gamma);
        let u = ScalarField::from_fn(&mesh, |_| 3.0).unwrap();
        let g = recover_boundary_gradient(&mesh, &u).unwrap();
        assert!(g.edges.iter().all(|e| e.gradient.norm() < 1e-12));
    }

    #[test]
    fn j_eps_of_constants_on_unit_square() {
        let poly = MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 2, [Marker::K; 4]).unwrap();
        let mesh = triangulate(&poly, 0.3).unwrap();
        let a = ScalarField::from_fn(&mesh, |_| 0.25).unwrap();
        let b = ScalarField::from_fn(&mesh, |_| 1.0).unwrap();
        assert!((functional_j_eps(&a, &b).unwrap() - 0.5625).abs() < 1e-14);
        assert_eq!(functional_j_eps(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn j_eps_is_exact_for_quadratic_integrand() {
        let poly = MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 2, [Marker::K; 4]).unwrap();
        let mesh = triangulate(&poly, 0.3).unwrap();
        let a = ScalarField::from_fn(&mesh, |p| p.x).unwrap();
        let z = ScalarField::from_fn(&mesh, |_| 0.0).unwrap();
        // ∫ x² over the unit square
        assert!((functional_j_eps(&a, &z).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_defect_of_constant_trace() {
        let mesh = strip(0.5, 0.2, Marker::Gamma);
        let u = ScalarField::from_fn(&mesh, |_| 0.3).unwrap();
        assert!((functional_dirichlet_defect(&u) - 0.09).abs() < 1e-14);
    }

    #[test]
    fn galerkin_matrices_are_symmetric() {
        let mesh = strip(0.5, 0.1, Marker::Gamma);
        let (k, m) = assemble_stiffness_mass(&mesh);
        assert!(k.asymmetry() < 1e-12);
        assert!(m.asymmetry() < 1e-12);
        let ones = vec![1.0; mesh.node_count()];
        assert!(k.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!((m.quadratic_form(&ones) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_source_adjoints_vanish() {
        let mesh = strip(0.5, 0.1, Marker::Gamma);
        let u = solve_dirichlet_state(&mesh).unwrap();
        let p1 = solve_adjoint_p1(&mesh, &u, &u).unwrap();
        assert!(p1.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn robin_without_penalty_is_neumann() {
        let mesh = strip(0.5, 0.1, Marker::Gamma);
        let s = StateSolver::new(&mesh, RobinData { penalty: None, gradient: 1.0 }).unwrap();
        let a = s.robin_state().unwrap();
        let class = classify(&mesh);
        let fixed = class.on_k.clone();
        let solver = EllipticSolver::new(&mesh, &fixed, &vec![0.0; mesh.boundary_edges().len()]).unwrap();
        let mut load = vec![0.0; mesh.node_count()];
        add_edge_load(&mesh, &mut load, |m| if m == Marker::Gamma { -1.0 } else { 0.0 });
        let g: Vec<f64> = fixed.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
        let b = solver.solve(&g, &load).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fields_must_share_mesh() {
        let m1 = strip(0.5, 0.2, Marker::Gamma);
        let m2 = strip(0.5, 0.2, Marker::Gamma);
        let a = ScalarField::from_fn(&m1, |_| 0.0).unwrap();
        let b = ScalarField::from_fn(&m2, |_| 0.0).unwrap();
        assert!(functional_j_eps(&a, &b).is_err());
        assert!(ScalarField::new(&m1, vec![0.0]).is_err());
    }

    #[test]
    fn missing_k_is_rejected() {
        let poly = MarkedPolygon::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0), 2, [Marker::Gamma; 4]).unwrap();
        let mesh = triangulate(&poly, 0.3).unwrap();
        assert!(solve_dirichlet_state(&mesh).is_err());
    }
}
