//! Piecewise-linear basis functions, interpolation, L2 projection and
//! quadrature norms.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Region};
use crate::quadrature::{to_physical, QuadDegree, TriangleRule};
use crate::sparse::{norm2, SparseOperator, TripletBuilder};

/// A scalar field with an analytic gradient.
pub trait Field {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> [f64; 2];
}

/// Adapts a pair of closures to [`Field`].
pub struct FnField<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Field for FnField<V, G>
where
    V: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        (self.gradient)(p)
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn value(&self, p: Point) -> f64 {
        (**self).value(p)
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        (**self).gradient(p)
    }
}

/// Gradients of the three nodal hat functions of a triangle.
pub fn p1_gradients(v: &[Point; 3]) -> Result<[[f64; 2]; 3]> {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let scale = (v[1][0] - v[0][0]).hypot(v[1][1] - v[0][1]).max((v[2][0] - v[0][0]).hypot(v[2][1] - v[0][1]));
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::DegenerateTriangle(0.5 * det));
    }
    Ok([
        [(v[1][1] - v[2][1]) / det, (v[2][0] - v[1][0]) / det],
        [(v[2][1] - v[0][1]) / det, (v[0][0] - v[2][0]) / det],
        [(v[0][1] - v[1][1]) / det, (v[1][0] - v[0][0]) / det],
    ])
}

/// Geometry of one triangle: vertices, area, hat-function gradients.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub nodes: [usize; 3],
    pub vertices: [Point; 3],
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl Element {
    pub fn of(mesh: &Mesh, t: usize) -> Element {
        let vertices = mesh.vertices(t);
        let grads = p1_gradients(&vertices).expect("structured meshes have no degenerate triangles");
        Element {
            nodes: mesh.triangles[t],
            vertices,
            area: mesh.signed_area(t),
            grads,
        }
    }

    /// Barycentric coordinates of `p` (may be negative outside).
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let v = &self.vertices;
        let l1 = self.grads[1][0] * (p[0] - v[0][0]) + self.grads[1][1] * (p[1] - v[0][1]);
        let l2 = self.grads[2][0] * (p[0] - v[0][0]) + self.grads[2][1] * (p[1] - v[0][1]);
        [1.0 - l1 - l2, l1, l2]
    }
}

/// A member of the P1 space: one coefficient per mesh node.
#[derive(Debug, Clone)]
pub struct FeFunction<'m> {
    pub mesh: &'m Mesh,
    pub coefficients: Vec<f64>,
}

impl<'m> FeFunction<'m> {
    pub fn new(mesh: &'m Mesh, coefficients: Vec<f64>) -> Result<FeFunction<'m>> {
        if coefficients.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} nodes",
                coefficients.len(),
                mesh.num_nodes()
            )));
        }
        Ok(FeFunction { mesh, coefficients })
    }

    pub fn zeros(mesh: &'m Mesh) -> FeFunction<'m> {
        FeFunction {
            mesh,
            coefficients: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn value_in(&self, el: &Element, l: &[f64; 3]) -> f64 {
        (0..3).map(|k| l[k] * self.coefficients[el.nodes[k]]).sum()
    }

    pub fn gradient_in(&self, el: &Element) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..3 {
            let c = self.coefficients[el.nodes[k]];
            g[0] += c * el.grads[k][0];
            g[1] += c * el.grads[k][1];
        }
        g
    }

    pub fn norms(&self, region: &Region, degree: QuadDegree) -> Norms {
        integrate_norms(self.mesh, region, degree, |el, l, _| {
            (self.value_in(el, l), self.gradient_in(el))
        })
    }

    /// Writes `node,x,y,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "node,x,y,value")?;
        for (i, (p, v)) in self.mesh.nodes.iter().zip(&self.coefficients).enumerate() {
            writeln!(out, "{i},{},{},{v:.17e}", p[0], p[1])?;
        }
        Ok(())
    }
}

impl Field for FeFunction<'_> {
    fn value(&self, p: Point) -> f64 {
        match self.mesh.locate(p) {
            Some(t) => {
                let el = Element::of(self.mesh, t);
                self.value_in(&el, &el.barycentric(p))
            }
            None => f64::NAN,
        }
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        match self.mesh.locate(p) {
            Some(t) => self.gradient_in(&Element::of(self.mesh, t)),
            None => [f64::NAN; 2],
        }
    }
}

/// Nodal interpolant.
pub fn interpolate<'m>(mesh: &'m Mesh, u: impl Fn(Point) -> f64) -> FeFunction<'m> {
    FeFunction {
        mesh,
        coefficients: mesh.nodes.iter().map(|&p| u(p)).collect(),
    }
}

/// Consistent mass matrix `M[i][j] = (phi_j, phi_i)`, optionally restricted to
/// a region through its indicator at quadrature points.
pub fn mass_matrix(mesh: &Mesh, region: Option<&Region>, degree: QuadDegree) -> SparseOperator {
    let rule = TriangleRule::new(degree);
    let n = mesh.num_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        let mut local = [[0.0; 3]; 3];
        for (l, w) in rule.iter() {
            if let Some(r) = region {
                if !r.contains(to_physical(&el.vertices, l)) {
                    continue;
                }
            }
            for a in 0..3 {
                for c in 0..3 {
                    local[a][c] += w * el.area * l[a] * l[c];
                }
            }
        }
        for a in 0..3 {
            for c in 0..3 {
                b.push(el.nodes[a], el.nodes[c], local[a][c]);
            }
        }
    }
    b.build()
}

/// Load vector `(g, phi_i)` by quadrature.
pub fn load_vector(mesh: &Mesh, degree: QuadDegree, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let rule = TriangleRule::new(degree);
    let mut out = vec![0.0; mesh.num_nodes()];
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        for (l, w) in rule.iter() {
            let gv = g(to_physical(&el.vertices, l)) * w * el.area;
            for k in 0..3 {
                out[el.nodes[k]] += gv * l[k];
            }
        }
    }
    out
}

/// L2 projection onto the P1 space through the consistent mass matrix.
pub fn l2_project<'m>(
    mesh: &'m Mesh,
    degree: QuadDegree,
    u: impl Fn(Point) -> f64,
) -> Result<FeFunction<'m>> {
    let mass = mass_matrix(mesh, None, degree);
    let rhs = load_vector(mesh, degree, u);
    let m = mass.to_faer()?;
    let llt = m.sp_cholesky(Side::Lower).map_err(|e| Error::Factorization {
        dim: mass.nrows(),
        nnz: mass.nnz(),
        reason: format!("{e:?}"),
    })?;
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    let coefficients: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();

    let residual: Vec<f64> = mass
        .matvec(&coefficients)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| a - b)
        .collect();
    let scale = norm2(&rhs).max(f64::MIN_POSITIVE);
    let rel = norm2(&residual) / scale;
    if norm2(&rhs) > 0.0 && rel > 1e-12 {
        return Err(Error::InaccurateSolve {
            residual: rel,
            tolerance: 1e-12,
        });
    }
    Ok(FeFunction { mesh, coefficients })
}

/// L2 norm, H1 seminorm and full H1 norm over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

impl Norms {
    fn from_squares(l2sq: f64, semisq: f64) -> Norms {
        Norms {
            l2: l2sq.sqrt(),
            h1_semi: semisq.sqrt(),
            h1: (l2sq + semisq).sqrt(),
        }
    }
}

/// Integrates `v^2` and `|grad v|^2` over `region`; `eval` returns value and
/// gradient at a quadrature point given the element, barycentric and physical
/// coordinates.
pub fn integrate_norms(
    mesh: &Mesh,
    region: &Region,
    degree: QuadDegree,
    eval: impl Fn(&Element, &[f64; 3], Point) -> (f64, [f64; 2]),
) -> Norms {
    let rule = TriangleRule::new(degree);
    let (mut l2sq, mut semisq) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let el = Element::of(mesh, t);
        for (l, w) in rule.iter() {
            let p = to_physical(&el.vertices, l);
            if !region.contains(p) {
                continue;
            }
            let (v, g) = eval(&el, l, p);
            l2sq += w * el.area * v * v;
            semisq += w * el.area * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    Norms::from_squares(l2sq, semisq)
}

/// Norms of an analytic field over a region.
pub fn norms(mesh: &Mesh, v: &impl Field, region: &Region, degree: QuadDegree) -> Norms {
    integrate_norms(mesh, region, degree, |_, _, p| (v.value(p), v.gradient(p)))
}

/// Norms of `exact - uh`.
pub fn error_norms(
    exact: &impl Field,
    uh: &FeFunction<'_>,
    region: &Region,
    degree: QuadDegree,
) -> Norms {
    integrate_norms(uh.mesh, region, degree, |el, l, p| {
        let g = exact.gradient(p);
        let gh = uh.gradient_in(el);
        (exact.value(p) - uh.value_in(el, l), [g[0] - gh[0], g[1] - gh[1]])
    })
}

/// Quadrature measure of a region; zero means every quadrature point missed it.
pub fn region_measure(mesh: &Mesh, region: &Region, degree: QuadDegree) -> f64 {
    integrate_norms(mesh, region, degree, |_, _, _| (1.0, [0.0; 2])).l2.powi(2)
}
