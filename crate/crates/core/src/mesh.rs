//! Structured triangulations of the unit square.
//!
//! Cell `(i, j)` covers `[i/N, (i+1)/N] x [j/N, (j+1)/N]` and is split along
//! its lower-left/upper-right diagonal when `i + j` is even and along the
//! other diagonal when it is odd, which gives the alternating pattern of the
//! reference experiments. Node `(i, j)` has index `j * (N + 1) + i`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// An interior edge shared by two triangles.
///
/// `normal` is the outward unit normal of `minus`, so it points from `minus`
/// into `plus`. Jumps are taken as `plus - minus`; every penalty term uses
/// products of two jumps, so the orientation drops out.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub endpoints: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
    pub minus: usize,
    pub plus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub endpoints: [usize; 2],
    /// Outward unit normal of the domain.
    pub normal: [f64; 2],
    pub length: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub interior_faces: Vec<Face>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub cells_per_side: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshSummary {
    pub cells_per_side: usize,
    pub nodes: usize,
    pub triangles: usize,
    pub interior_faces: usize,
    pub boundary_edges: usize,
    pub h: f64,
}

impl Mesh {
    /// Builds the `N x N` alternating-diagonal triangulation of `[0,1]^2`.
    pub fn unit_square(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "a mesh needs at least one cell per side".into(),
            ));
        }
        let stride = n + 1;
        let mut nodes = Vec::with_capacity(stride * stride);
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                if (i + j) % 2 == 0 {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                } else {
                    triangles.push([v00, v10, v01]);
                    triangles.push([v10, v11, v01]);
                }
            }
        }

        let (interior_faces, boundary_edges) = connectivity(&nodes, &triangles);
        Ok(Mesh {
            nodes,
            triangles,
            interior_faces,
            boundary_edges,
            cells_per_side: n,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Global mesh size `h = (number of nodes)^(-1/2)`, the value used both in
    /// the form weights and on convergence plots.
    pub fn mesh_size(&self) -> f64 {
        1.0 / (self.nodes.len() as f64).sqrt()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.vertices(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Index of a triangle containing `p`, or `None` outside the closed unit
    /// square. Points on shared edges resolve to one of the neighbours.
    pub fn locate(&self, p: Point) -> Option<usize> {
        const SLACK: f64 = 1e-12;
        if !(p[0] >= -SLACK && p[0] <= 1.0 + SLACK && p[1] >= -SLACK && p[1] <= 1.0 + SLACK) {
            return None;
        }
        let n = self.cells_per_side;
        let nf = n as f64;
        let i = ((p[0] * nf).floor().max(0.0) as usize).min(n - 1);
        let j = ((p[1] * nf).floor().max(0.0) as usize).min(n - 1);
        let sx = p[0] * nf - i as f64;
        let sy = p[1] * nf - j as f64;
        let upper = if (i + j) % 2 == 0 { sy > sx } else { sx + sy > 1.0 };
        Some(2 * (j * n + i) + usize::from(upper))
    }

    pub fn summary(&self) -> MeshSummary {
        MeshSummary {
            cells_per_side: self.cells_per_side,
            nodes: self.num_nodes(),
            triangles: self.num_triangles(),
            interior_faces: self.interior_faces.len(),
            boundary_edges: self.boundary_edges.len(),
            h: self.mesh_size(),
        }
    }
}

fn connectivity(nodes: &[Point], triangles: &[[usize; 3]]) -> (Vec<Face>, Vec<BoundaryEdge>) {
    // edge key -> (first triangle, local edge start, index into `order`)
    let mut seen: HashMap<(usize, usize), (usize, [usize; 2], Option<usize>)> =
        HashMap::with_capacity(3 * triangles.len() / 2 + 1);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(3 * triangles.len() / 2 + 1);

    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            match seen.get_mut(&key) {
                Some(entry) => entry.2 = Some(t),
                None => {
                    seen.insert(key, (t, [a, b], None));
                    order.push(key);
                }
            }
        }
    }

    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for key in order {
        let (first, [a, b], second) = seen[&key];
        let (normal, length) = outward_normal(nodes[a], nodes[b]);
        match second {
            Some(plus) => interior.push(Face {
                endpoints: [a, b],
                normal,
                length,
                minus: first,
                plus,
            }),
            None => boundary.push(BoundaryEdge {
                endpoints: [a, b],
                normal,
                length,
                triangle: first,
            }),
        }
    }
    (interior, boundary)
}

/// Right-hand normal of the directed edge `a -> b`; outward for a
/// counterclockwise triangle.
fn outward_normal(a: Point, b: Point) -> ([f64; 2], f64) {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len = dx.hypot(dy);
    ([dy / len, -dx / len], len)
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Rect {
        Rect { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

const EDGE_TOL: f64 = 1e-12;

/// Union of closed boxes minus a union of removed boxes.
///
/// Points on the boundary of the resulting set count as inside: included
/// boxes are closed and removed boxes only take away their interior. A side
/// of a removed box lying on the boundary of the unit square is treated as
/// open outward, so removing `[0, a] x [c, d]` also removes the stretch of
/// the left domain boundary it touches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Region {
    pub include: Vec<Rect>,
    #[serde(default)]
    pub exclude: Vec<Rect>,
}

impl Region {
    pub fn rect(r: Rect) -> Region {
        Region {
            include: vec![r],
            exclude: Vec::new(),
        }
    }

    pub fn whole() -> Region {
        Region::rect(Rect::UNIT)
    }

    pub fn union(rects: impl IntoIterator<Item = Rect>) -> Region {
        Region {
            include: rects.into_iter().collect(),
            exclude: Vec::new(),
        }
    }

    pub fn minus(mut self, r: Rect) -> Region {
        self.exclude.push(r);
        self
    }

    pub fn contains(&self, p: Point) -> bool {
        let inside = self.include.iter().any(|r| {
            p[0] >= r.x0 - EDGE_TOL
                && p[0] <= r.x1 + EDGE_TOL
                && p[1] >= r.y0 - EDGE_TOL
                && p[1] <= r.y1 + EDGE_TOL
        });
        inside && !self.exclude.iter().any(|r| removed(r, p))
    }

    /// True when no included box has positive area. Regions that are nonempty
    /// on paper may still miss every quadrature point; see
    /// [`crate::fem::region_measure`] for the measured check.
    pub fn is_nominally_empty(&self) -> bool {
        self.include.iter().all(|r| r.area() <= 0.0)
    }
}

fn removed(r: &Rect, p: Point) -> bool {
    let lo = |edge: f64| if edge <= EDGE_TOL { f64::NEG_INFINITY } else { edge + EDGE_TOL };
    let hi = |edge: f64| if edge >= 1.0 - EDGE_TOL { f64::INFINITY } else { edge - EDGE_TOL };
    p[0] > lo(r.x0) && p[0] < hi(r.x1) && p[1] > lo(r.y0) && p[1] < hi(r.y1)
}
