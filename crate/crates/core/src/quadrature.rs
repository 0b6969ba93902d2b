//! Quadrature rules on the reference triangle (barycentric points) and on
//! the unit interval. Weights sum to one and are scaled by the element
//! measure at the point of use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial degree integrated exactly by the triangle and edge rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum QuadDegree {
    Two,
    #[default]
    Four,
}

impl TryFrom<u8> for QuadDegree {
    type Error = Error;

    fn try_from(d: u8) -> Result<Self> {
        match d {
            2 => Ok(QuadDegree::Two),
            4 => Ok(QuadDegree::Four),
            other => Err(Error::InvalidConfig(format!(
                "quadrature degree must be 2 or 4, got {other}"
            ))),
        }
    }
}

impl From<QuadDegree> for u8 {
    fn from(d: QuadDegree) -> u8 {
        match d {
            QuadDegree::Two => 2,
            QuadDegree::Four => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EdgeRule {
    /// Parameter along the edge in `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn new(degree: QuadDegree) -> TriangleRule {
        match degree {
            QuadDegree::Two => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                TriangleRule {
                    points: vec![[a, b, b], [b, a, b], [b, b, a]],
                    weights: vec![1.0 / 3.0; 3],
                }
            }
            QuadDegree::Four => {
                // Dunavant, 6 points
                let a1 = 0.445_948_490_915_964_886_32;
                let w1 = 0.223_381_589_678_011_465_70;
                let a2 = 0.091_576_213_509_770_743_46;
                let w2 = 0.109_951_743_655_321_867_64;
                let b1 = 1.0 - 2.0 * a1;
                let b2 = 1.0 - 2.0 * a2;
                TriangleRule {
                    points: vec![
                        [a1, a1, b1],
                        [a1, b1, a1],
                        [b1, a1, a1],
                        [a2, a2, b2],
                        [a2, b2, a2],
                        [b2, a2, a2],
                    ],
                    weights: vec![w1, w1, w1, w2, w2, w2],
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl EdgeRule {
    pub fn new(degree: QuadDegree) -> EdgeRule {
        match degree {
            QuadDegree::Two => {
                let d = 0.5 / 3f64.sqrt();
                EdgeRule {
                    points: vec![0.5 - d, 0.5 + d],
                    weights: vec![0.5, 0.5],
                }
            }
            QuadDegree::Four => {
                let d = 0.5 * (0.6f64).sqrt();
                EdgeRule {
                    points: vec![0.5 - d, 0.5, 0.5 + d],
                    weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Maps barycentric coordinates to a physical point.
pub fn to_physical(v: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    // exact integral of x^p y^q over the reference triangle: p! q! / (p+q+2)!
    fn monomial_exact(p: u32, q: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for (deg, d) in [(QuadDegree::Two, 2u32), (QuadDegree::Four, 4)] {
            let rule = TriangleRule::new(deg);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for p in 0..=d {
                for q in 0..=(d - p) {
                    let approx: f64 = rule
                        .iter()
                        .map(|(l, w)| {
                            let x = to_physical(&v, l);
                            0.5 * w * x[0].powi(p as i32) * x[1].powi(q as i32)
                        })
                        .sum();
                    assert!(
                        (approx - monomial_exact(p, q)).abs() < 1e-15,
                        "degree {d}: x^{p} y^{q}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rules_are_exact_to_their_degree() {
        for (deg, d) in [(QuadDegree::Two, 3i32), (QuadDegree::Four, 5)] {
            let rule = EdgeRule::new(deg);
            for k in 0..=d {
                let approx: f64 = rule.iter().map(|(t, w)| w * t.powi(k)).sum();
                assert!((approx - 1.0 / (k + 1) as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degree_parses_from_integer() {
        assert_eq!(QuadDegree::try_from(2).unwrap(), QuadDegree::Two);
        assert!(QuadDegree::try_from(3).is_err());
        let d: QuadDegree = serde_json::from_str("4").unwrap();
        assert_eq!(d, QuadDegree::Four);
    }
}
