//! Bilinear forms and load vectors over the P1 space.
//!
//! All operators follow the row-is-test convention: `M[i][j] = m(phi_j, phi_i)`,
//! so `m(v, w) = w^T M v`.
//!
//! - `a_h(v, w) = (beta . grad v, w) + (mu grad v, grad w) - <mu grad v . n, w>`
//!   (boundary term over the whole of the domain boundary);
//! - `s_jump(v, w) = gamma * sum_F h (mu + |beta| h) int_F [grad v . n][grad w . n]`;
//! - `s_data(v, w) = ((mu + |beta| h) v, w)_omega`;
//! - `s_dual(v, w) = gamma_star * (k <(mu/h + |beta|) v, w>_boundary
//!   + (mu grad v, grad w) + s_jump(v, w))` with `k` the boundary factor.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{mass_matrix, Element, Field};
use crate::mesh::{Mesh, Point, Region};
use crate::quadrature::{to_physical, EdgeRule, QuadDegree, TriangleRule};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Convective velocity fields used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvectionField {
    Constant { value: [f64; 2] },
    /// `scale * (x + y, y - x)`.
    Rotational { scale: f64 },
}

impl ConvectionField {
    pub fn at(&self, p: Point) -> [f64; 2] {
        match *self {
            ConvectionField::Constant { value } => value,
            ConvectionField::Rotational { scale } => [scale * (p[0] + p[1]), scale * (p[1] - p[0])],
        }
    }

    pub fn divergence(&self, _p: Point) -> f64 {
        match *self {
            ConvectionField::Constant { .. } => 0.0,
            ConvectionField::Rotational { scale } => 2.0 * scale,
        }
    }
}

pub type SourceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub mu: f64,
    pub beta: ConvectionField,
    /// Overrides the sampled sup-norm of `beta` when set.
    pub beta_sup: Option<f64>,
    pub source: SourceFn,
    pub omega: Region,
    pub target: Region,
    pub gamma: f64,
    pub gamma_star: f64,
    pub boundary_factor: f64,
    pub quadrature: QuadDegree,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("mu", &self.mu)
            .field("beta", &self.beta)
            .field("beta_sup", &self.beta_sup)
            .field("omega", &self.omega)
            .field("target", &self.target)
            .field("gamma", &self.gamma)
            .field("gamma_star", &self.gamma_star)
            .field("boundary_factor", &self.boundary_factor)
            .field("quadrature", &self.quadrature)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Diffusion-only problem with zero source and data on the whole domain;
    /// mostly a starting point for builders and tests.
    pub fn new(mu: f64, beta: ConvectionField) -> ProblemSpec {
        ProblemSpec {
            mu,
            beta,
            beta_sup: None,
            source: Arc::new(|_| 0.0),
            omega: Region::whole(),
            target: Region::whole(),
            gamma: 1.0,
            gamma_star: 1.0,
            boundary_factor: 1.0,
            quadrature: QuadDegree::Four,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Error::InvalidConfig(format!("{what} must be positive, got {v}"));
        if !(self.mu > 0.0) {
            return Err(bad("mu", self.mu));
        }
        if !(self.gamma > 0.0) {
            return Err(bad("gamma", self.gamma));
        }
        if !(self.gamma_star > 0.0) {
            return Err(bad("gamma_star", self.gamma_star));
        }
        if !(self.boundary_factor >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "boundary_factor must be at least 1, got {}",
                self.boundary_factor
            )));
        }
        if let Some(b) = self.beta_sup {
            if !(b >= 0.0) {
                return Err(bad("beta_sup", b));
            }
        }
        Ok(())
    }

    /// `|beta|`: the override if present, otherwise the largest Euclidean
    /// magnitude over mesh nodes and quadrature points.
    pub fn beta_sup_on(&self, mesh: &Mesh) -> f64 {
        if let Some(b) = self.beta_sup {
            return b;
        }
        let mag = |p: Point| {
            let b = self.beta.at(p);
            b[0].hypot(b[1])
        };
        let rule = TriangleRule::new(self.quadrature);
        let at_nodes = mesh.nodes.iter().map(|&p| mag(p)).fold(0.0, f64::max);
        (0..mesh.num_triangles()).fold(at_nodes, |m, t| {
            let v = mesh.vertices(t);
            rule.iter().fold(m, |m, (l, _)| m.max(mag(to_physical(&v, l))))
        })
    }

    /// Local Peclet number `|beta| h / mu`.
    pub fn peclet(&self, beta_sup: f64, h: f64) -> f64 {
        beta_sup * h / self.mu
    }
}

/// Every operator of the discrete method on one mesh.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub h: f64,
    pub beta_sup: f64,
    pub peclet: f64,
    pub omega_measure: f64,
    pub a: SparseOperator,
    pub s_data: SparseOperator,
    pub s_jump: SparseOperator,
    pub s_dual: SparseOperator,
}

impl AssembledForms {
    pub fn assemble(spec: &ProblemSpec, mesh: &Mesh) -> Result<AssembledForms> {
        spec.validate()?;
        let h = mesh.mesh_size();
        let beta_sup = spec.beta_sup_on(mesh);
        let s_data = assemble_s_data(spec, mesh, h, beta_sup);
        let omega_measure = crate::fem::region_measure(mesh, &spec.omega, spec.quadrature);
        if omega_measure == 0.0 {
            log::warn!("data region has zero quadrature measure; the data term vanishes");
        }
        let s_jump = assemble_s_jump(spec, mesh, h, beta_sup);
        let s_dual = assemble_s_dual_with(spec, mesh, h, beta_sup, &s_jump)?;
        Ok(AssembledForms {
            h,
            beta_sup,
            peclet: spec.peclet(beta_sup, h),
            omega_measure,
            a: assemble_a(spec, mesh),
            s_data,
            s_jump,
            s_dual,
        })
    }

    /// `S = s_data + s_jump`, the primal stabilization.
    pub fn s_primal(&self) -> SparseOperator {
        self.s_data
            .combine(1.0, &self.s_jump, 1.0)
            .expect("operators share the mesh")
    }

    /// `s(v, v)^(1/2)`.
    pub fn s_norm(&self, v: &[f64]) -> f64 {
        (self.s_data.form(v, v) + self.s_jump.form(v, v)).max(0.0).sqrt()
    }

    /// `s_dual(w, w)^(1/2)`.
    pub fn s_dual_norm(&self, w: &[f64]) -> f64 {
        self.s_dual.form(w, w).max(0.0).sqrt()
    }
}

/// `A[i][j] = a_h(phi_j, phi_i)`.
pub fn assemble_a(spec: &ProblemSpec, mesh: &Mesh) -> SparseOperator {
    let n = mesh.num_nodes();
    let rule = TriangleRule::new(spec.quadrature);
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles() + 6 * mesh.boundary_edges.len());
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        let mut local = [[0.0; 3]; 3];
        for (l, w) in rule.iter() {
            let beta = spec.beta.at(to_physical(&el.vertices, l));
            for j in 0..3 {
                let adv = beta[0] * el.grads[j][0] + beta[1] * el.grads[j][1];
                for i in 0..3 {
                    local[i][j] += w * el.area * adv * l[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let g = el.grads[j][0] * el.grads[i][0] + el.grads[j][1] * el.grads[i][1];
                local[i][j] += spec.mu * el.area * g;
                b.push(el.nodes[i], el.nodes[j], local[i][j]);
            }
        }
    }
    // -<mu grad phi_j . n, phi_i> with the one-sided gradient of the adjacent
    // triangle; phi_i integrates to len/2 along the edge for each endpoint.
    for e in &mesh.boundary_edges {
        let el = Element::of(mesh, e.triangle);
        for j in 0..3 {
            let dn = el.grads[j][0] * e.normal[0] + el.grads[j][1] * e.normal[1];
            for &i in &e.endpoints {
                b.push(i, el.nodes[j], -spec.mu * dn * e.length / 2.0);
            }
        }
    }
    b.build()
}

/// Data-fitting term `((mu + |beta| h) v, w)_omega`.
pub fn assemble_s_data(spec: &ProblemSpec, mesh: &Mesh, h: f64, beta_sup: f64) -> SparseOperator {
    mass_matrix(mesh, Some(&spec.omega), spec.quadrature).scaled(spec.mu + beta_sup * h)
}

/// Gradient-jump penalty over interior faces.
pub fn assemble_s_jump(spec: &ProblemSpec, mesh: &Mesh, h: f64, beta_sup: f64) -> SparseOperator {
    let n = mesh.num_nodes();
    let weight = spec.gamma * h * (spec.mu + beta_sup * h);
    let mut b = TripletBuilder::with_capacity(n, n, 16 * mesh.interior_faces.len());
    for f in &mesh.interior_faces {
        let jumps = face_jump_coefficients(mesh, f);
        let c = weight * f.length;
        for &(i, ji) in jumps.iter().flatten() {
            for &(j, jj) in jumps.iter().flatten() {
                b.push(i, j, c * ji * jj);
            }
        }
    }
    b.build()
}

/// Coefficients of `[grad phi_k . n]` (plus minus minus) for the up to four
/// nodes of the two triangles sharing `f`.
fn face_jump_coefficients(mesh: &Mesh, f: &crate::mesh::Face) -> [Option<(usize, f64)>; 4] {
    let mut out: [Option<(usize, f64)>; 4] = [None; 4];
    let mut add = |node: usize, v: f64| {
        for slot in out.iter_mut() {
            match slot {
                Some((k, acc)) if *k == node => {
                    *acc += v;
                    return;
                }
                None => {
                    *slot = Some((node, v));
                    return;
                }
                _ => {}
            }
        }
        unreachable!("two triangles sharing an edge have four distinct nodes");
    };
    for (t, sign) in [(f.plus, 1.0), (f.minus, -1.0)] {
        let el = Element::of(mesh, t);
        for k in 0..3 {
            let dn = el.grads[k][0] * f.normal[0] + el.grads[k][1] * f.normal[1];
            add(el.nodes[k], sign * dn);
        }
    }
    out
}

/// Dual stabilization; assembles its own copy of the jump penalty.
pub fn assemble_s_dual(spec: &ProblemSpec, mesh: &Mesh, h: f64, beta_sup: f64) -> Result<SparseOperator> {
    let s_jump = assemble_s_jump(spec, mesh, h, beta_sup);
    assemble_s_dual_with(spec, mesh, h, beta_sup, &s_jump)
}

fn assemble_s_dual_with(
    spec: &ProblemSpec,
    mesh: &Mesh,
    h: f64,
    beta_sup: f64,
    s_jump: &SparseOperator,
) -> Result<SparseOperator> {
    let n = mesh.num_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles() + 4 * mesh.boundary_edges.len());
    let boundary_weight = spec.boundary_factor * (spec.mu / h + beta_sup);
    for e in &mesh.boundary_edges {
        let [p, q] = e.endpoints;
        let c = boundary_weight * e.length;
        b.push(p, p, c / 3.0);
        b.push(q, q, c / 3.0);
        b.push(p, q, c / 6.0);
        b.push(q, p, c / 6.0);
    }
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                let g = el.grads[j][0] * el.grads[i][0] + el.grads[j][1] * el.grads[i][1];
                b.push(el.nodes[i], el.nodes[j], spec.mu * el.area * g);
            }
        }
    }
    b.push_block(0, 0, s_jump, 1.0);
    Ok(b.build().scaled(spec.gamma_star))
}

/// `(f, phi_i)` by quadrature.
pub fn assemble_source_load(spec: &ProblemSpec, mesh: &Mesh) -> Vec<f64> {
    let f = spec.source.clone();
    crate::fem::load_vector(mesh, spec.quadrature, move |p| f(p))
}

/// `(f, phi_i)` and `s_data(data, phi_i)` with the data taken through its P1
/// representation.
pub fn assemble_loads(
    spec: &ProblemSpec,
    mesh: &Mesh,
    forms: &AssembledForms,
    data: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} values for {} nodes",
            data.len(),
            mesh.num_nodes()
        )));
    }
    Ok((assemble_source_load(spec, mesh), forms.s_data.matvec(data)))
}

/// `a_h(u, phi_i)` for an analytic field `u`, by quadrature.
pub fn apply_a_to_field(spec: &ProblemSpec, mesh: &Mesh, u: &impl Field) -> Vec<f64> {
    let rule = TriangleRule::new(spec.quadrature);
    let edge = EdgeRule::new(spec.quadrature);
    let mut out = vec![0.0; mesh.num_nodes()];
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        for (l, w) in rule.iter() {
            let p = to_physical(&el.vertices, l);
            let g = u.gradient(p);
            let beta = spec.beta.at(p);
            let adv = beta[0] * g[0] + beta[1] * g[1];
            for k in 0..3 {
                let diff = spec.mu * (g[0] * el.grads[k][0] + g[1] * el.grads[k][1]);
                out[el.nodes[k]] += w * el.area * (adv * l[k] + diff);
            }
        }
    }
    for e in &mesh.boundary_edges {
        let [p, q] = e.endpoints;
        let (a, b) = (mesh.nodes[p], mesh.nodes[q]);
        for (s, w) in edge.iter() {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let g = u.gradient(x);
            let dn = spec.mu * (g[0] * e.normal[0] + g[1] * e.normal[1]) * w * e.length;
            out[p] -= dn * (1.0 - s);
            out[q] -= dn * s;
        }
    }
    out
}
