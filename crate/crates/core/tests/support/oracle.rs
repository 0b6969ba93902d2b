//! Dense, brute-force evaluation of the integral definitions on tiny meshes.
//!
//! The oracle shares only the mesh geometry with the library. Hat functions
//! are evaluated from barycentric coordinates solved afresh, volume integrals
//! use a collapsed Gauss tensor rule, faces are matched by searching triangle
//! vertex sets, and face normals come from edge directions.

use stabfem::experiments::derive_source;
use stabfem::forms::{assemble_loads, AssembledForms, ConvectionField, ProblemSpec};
use stabfem::fem::Field;
use stabfem::mesh::{Mesh, Rect, Region};
use stabfem::experiments::ExactSolution;

const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

type P = [f64; 2];

/// Integral over the triangle `v` of `g`, via `(s, t) -> (s, (1 - s) t)` on
/// the unit square. Exact for polynomials of degree 8.
pub fn tri_integral(v: &[P; 3], g: impl Fn(P) -> f64) -> f64 {
    let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
    let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut total = 0.0;
    for (xs, ws) in GL_X.iter().zip(GL_W) {
        let s = 0.5 * (xs + 1.0);
        for (xt, wt) in GL_X.iter().zip(GL_W) {
            let t = 0.5 * (xt + 1.0) * (1.0 - s);
            let p = [v[0][0] + s * e1[0] + t * e2[0], v[0][1] + s * e1[1] + t * e2[1]];
            total += 0.25 * ws * wt * (1.0 - s) * g(p);
        }
    }
    total * jac
}

pub fn edge_integral(a: P, b: P, g: impl Fn(P) -> f64) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W) {
        let s = 0.5 * (x + 1.0);
        total += 0.5 * w * g([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
    }
    total * len
}

/// Coefficients `(c0, cx, cy)` of the affine function equal to 1 at `v[k]`
/// and 0 at the other vertices, by Cramer's rule.
pub fn hat(v: &[P; 3], k: usize) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let a = [
        [1.0, v[0][0], v[0][1]],
        [1.0, v[1][0], v[1][1]],
        [1.0, v[2][0], v[2][1]],
    ];
    let d = det(a);
    let mut rhs = [0.0; 3];
    rhs[k] = 1.0;
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = rhs[r];
        }
        *o = det(m) / d;
    }
    out
}

struct Oracle {
    n: usize,
    tris: Vec<[usize; 3]>,
    nodes: Vec<P>,
    h: f64,
}

impl Oracle {
    fn new(mesh: &Mesh) -> Oracle {
        Oracle {
            n: mesh.nodes.len(),
            tris: mesh.triangles.clone(),
            nodes: mesh.nodes.clone(),
            h: 1.0 / (mesh.nodes.len() as f64).sqrt(),
        }
    }

    fn verts(&self, t: usize) -> [P; 3] {
        let [a, b, c] = self.tris[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Affine coefficients of global hat `i` on triangle `t`.
    fn hat_on(&self, t: usize, i: usize) -> Option<[f64; 3]> {
        let k = self.tris[t].iter().position(|&x| x == i)?;
        Some(hat(&self.verts(t), k))
    }

    fn eval(c: [f64; 3], p: P) -> f64 {
        c[0] + c[1] * p[0] + c[2] * p[1]
    }

    fn zeros(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.n]; self.n]
    }

    /// Edges as sorted node pairs with the triangles that contain them.
    fn edges(&self) -> Vec<([usize; 2], Vec<usize>)> {
        let mut out: Vec<([usize; 2], Vec<usize>)> = Vec::new();
        for (t, tri) in self.tris.iter().enumerate() {
            for k in 0..3 {
                let mut e = [tri[k], tri[(k + 1) % 3]];
                e.sort();
                match out.iter_mut().find(|(f, _)| *f == e) {
                    Some((_, ts)) => ts.push(t),
                    None => out.push((e, vec![t])),
                }
            }
        }
        out
    }

    /// Unit normal of edge `e` pointing away from the third vertex of `t`.
    fn normal_out(&self, e: [usize; 2], t: usize) -> P {
        let a = self.nodes[e[0]];
        let b = self.nodes[e[1]];
        let mut n = [b[1] - a[1], a[0] - b[0]];
        let len = n[0].hypot(n[1]);
        n = [n[0] / len, n[1] / len];
        let other = *self.tris[t].iter().find(|x| !e.contains(x)).unwrap();
        let c = self.nodes[other];
        if (c[0] - a[0]) * n[0] + (c[1] - a[1]) * n[1] > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    fn a(&self, spec: &ProblemSpec) -> Vec<Vec<f64>> {
        let mut m = self.zeros();
        for t in 0..self.tris.len() {
            let v = self.verts(t);
            for &i in &self.tris[t] {
                for &j in &self.tris[t] {
                    let phi_i = self.hat_on(t, i).unwrap();
                    let phi_j = self.hat_on(t, j).unwrap();
                    m[i][j] += tri_integral(&v, |p| {
                        let b = spec.beta.at(p);
                        (b[0] * phi_j[1] + b[1] * phi_j[2]) * Self::eval(phi_i, p)
                            + spec.mu * (phi_j[1] * phi_i[1] + phi_j[2] * phi_i[2])
                    });
                }
            }
        }
        for (e, ts) in self.edges() {
            if ts.len() != 1 {
                continue;
            }
            let t = ts[0];
            let n = self.normal_out(e, t);
            for &i in &self.tris[t] {
                for &j in &self.tris[t] {
                    let phi_i = self.hat_on(t, i).unwrap();
                    let phi_j = self.hat_on(t, j).unwrap();
                    let dn = phi_j[1] * n[0] + phi_j[2] * n[1];
                    m[i][j] -= edge_integral(self.nodes[e[0]], self.nodes[e[1]], |p| {
                        spec.mu * dn * Self::eval(phi_i, p)
                    });
                }
            }
        }
        m
    }

    fn weighted_mass(&self, weight: impl Fn(P) -> f64) -> Vec<Vec<f64>> {
        let mut m = self.zeros();
        for t in 0..self.tris.len() {
            let v = self.verts(t);
            for &i in &self.tris[t] {
                for &j in &self.tris[t] {
                    let phi_i = self.hat_on(t, i).unwrap();
                    let phi_j = self.hat_on(t, j).unwrap();
                    m[i][j] += tri_integral(&v, |p| weight(p) * Self::eval(phi_i, p) * Self::eval(phi_j, p));
                }
            }
        }
        m
    }

    fn s_data(&self, spec: &ProblemSpec, beta_sup: f64) -> Vec<Vec<f64>> {
        let w = spec.mu + beta_sup * self.h;
        self.weighted_mass(|p| if spec.omega.contains(p) { w } else { 0.0 })
    }

    fn s_jump(&self, spec: &ProblemSpec, beta_sup: f64) -> Vec<Vec<f64>> {
        let mut m = self.zeros();
        let w = spec.gamma * self.h * (spec.mu + beta_sup * self.h);
        for (e, ts) in self.edges() {
            if ts.len() != 2 {
                continue;
            }
            let n = self.normal_out(e, ts[0]);
            let jump = |i: usize| -> f64 {
                let g = |t: usize| self.hat_on(t, i).map_or(0.0, |c| c[1] * n[0] + c[2] * n[1]);
                g(ts[1]) - g(ts[0])
            };
            for i in 0..self.n {
                for j in 0..self.n {
                    let (ji, jj) = (jump(i), jump(j));
                    if ji != 0.0 && jj != 0.0 {
                        m[i][j] += edge_integral(self.nodes[e[0]], self.nodes[e[1]], |_| w * ji * jj);
                    }
                }
            }
        }
        m
    }

    fn s_dual(&self, spec: &ProblemSpec, beta_sup: f64) -> Vec<Vec<f64>> {
        let mut m = self.s_jump(spec, beta_sup);
        let wb = spec.boundary_factor * (spec.mu / self.h + beta_sup);
        for (e, ts) in self.edges() {
            if ts.len() != 1 {
                continue;
            }
            let t = ts[0];
            for &i in &self.tris[t] {
                for &j in &self.tris[t] {
                    let phi_i = self.hat_on(t, i).unwrap();
                    let phi_j = self.hat_on(t, j).unwrap();
                    m[i][j] += edge_integral(self.nodes[e[0]], self.nodes[e[1]], |p| {
                        wb * Self::eval(phi_i, p) * Self::eval(phi_j, p)
                    });
                }
            }
        }
        for t in 0..self.tris.len() {
            let v = self.verts(t);
            for &i in &self.tris[t] {
                for &j in &self.tris[t] {
                    let phi_i = self.hat_on(t, i).unwrap();
                    let phi_j = self.hat_on(t, j).unwrap();
                    m[i][j] += tri_integral(&v, |_| spec.mu * (phi_i[1] * phi_j[1] + phi_i[2] * phi_j[2]));
                }
            }
        }
        for row in &mut m {
            for x in row.iter_mut() {
                *x *= spec.gamma_star;
            }
        }
        m
    }

    fn load(&self, f: impl Fn(P) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for t in 0..self.tris.len() {
            let v = self.verts(t);
            for &i in &self.tris[t] {
                let phi = self.hat_on(t, i).unwrap();
                b[i] += tri_integral(&v, |p| f(p) * Self::eval(phi, p));
            }
        }
        b
    }
}

/// Largest entry difference relative to the largest oracle entry.
fn dense_discrepancy(got: &stabfem::sparse::SparseOperator, want: &[Vec<f64>]) -> f64 {
    let scale = want.iter().flatten().fold(1.0_f64, |m, x| m.max(x.abs()));
    got.to_dense()
        .iter()
        .zip(want)
        .flat_map(|(gr, wr)| gr.iter().zip(wr).map(|(g, w)| (g - w).abs() / scale))
        .fold(0.0, f64::max)
}

fn vec_discrepancy(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(g, w)| (g - w).abs() / (1.0 + w.abs())).fold(0.0, f64::max)
}

fn spec_for(n: usize, beta: ConvectionField, exact_source: bool) -> ProblemSpec {
    let mut spec = ProblemSpec::new(1.3, beta);
    spec.beta_sup = Some(2.5);
    spec.gamma = 0.7;
    spec.gamma_star = 1.1;
    spec.boundary_factor = 50.0;
    // Unions of whole triangles, so both quadratures see the same set.
    spec.omega = if n == 1 {
        Region::whole()
    } else {
        Region::union([Rect::new(0.0, 0.5, 0.0, 0.5), Rect::new(0.5, 1.0, 0.5, 1.0)])
    };
    if exact_source {
        spec.source = derive_source(ExactSolution::Bubble, spec.mu, beta);
    }
    spec
}

/// Per-operator discrepancies between the sparse assembly and the oracle on
/// the `n x n` mesh: `a`, `s_data`, `s_jump`, `s_dual`, `b_f`, `b_data`.
pub fn discrepancies(n: usize, beta: ConvectionField) -> Vec<(&'static str, f64)> {
    let mesh = Mesh::unit_square(n).unwrap();
    let spec = spec_for(n, beta, matches!(beta, ConvectionField::Constant { .. }));
    let forms = AssembledForms::assemble(&spec, &mesh).unwrap();
    let oracle = Oracle::new(&mesh);
    let bs = 2.5;
    assert!((forms.h - oracle.h).abs() < 1e-15);
    let sd = oracle.s_data(&spec, bs);
    let data: Vec<f64> = mesh.nodes.iter().map(|p| ExactSolution::Bubble.value(*p) + p[0]).collect();
    let (b_f, b_data) = assemble_loads(&spec, &mesh, &forms, &data).unwrap();
    let f = spec.source.clone();
    let want_f = oracle.load(|p| f(p));
    let want_data: Vec<f64> = sd.iter().map(|row| row.iter().zip(&data).map(|(a, b)| a * b).sum()).collect();
    vec![
        ("a", dense_discrepancy(&forms.a, &oracle.a(&spec))),
        ("s_data", dense_discrepancy(&forms.s_data, &sd)),
        ("s_jump", dense_discrepancy(&forms.s_jump, &oracle.s_jump(&spec, bs))),
        ("s_dual", dense_discrepancy(&forms.s_dual, &oracle.s_dual(&spec, bs))),
        ("b_f", vec_discrepancy(&b_f, &want_f)),
        ("b_data", vec_discrepancy(&b_data, &want_data)),
    ]
}
