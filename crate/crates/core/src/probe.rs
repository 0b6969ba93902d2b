//! Executable checks of the conditional stability estimates: the
//! log-convexity interpolation inequality, the Hölder exponent of the
//! three-ball inequality, and measured three-ball ratios on analytic and
//! discrete solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::CaseDefinition;
use crate::fem::Field;
use crate::mesh::{Mesh, Point};
use crate::saddle::SaddleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConvexityInstance {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub q: f64,
    pub lambda0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConvexityBound {
    pub kappa: f64,
    pub constant: f64,
    pub bound: f64,
}

/// `kappa = q / (p + q)`, `C = r^(p/(p+q)) + r^(-q/(p+q))` with `r = q / p`,
/// and `bound = C e^(q lambda0) a^kappa b^(1 - kappa)`.
pub fn log_convexity_bound(a: f64, b: f64, p: f64, q: f64, lambda0: f64) -> Result<LogConvexityBound> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::InvalidConfig(format!("p and q must be positive, got p={p}, q={q}")));
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::InvalidConfig(format!("a and b must be nonnegative, got a={a}, b={b}")));
    }
    let kappa = q / (p + q);
    let r = q / p;
    let constant = r.powf(p / (p + q)) + r.powf(-q / (p + q));
    let bound = if a == 0.0 || b == 0.0 {
        0.0
    } else {
        constant * (q * lambda0).exp() * a.powf(kappa) * b.powf(1.0 - kappa)
    };
    Ok(LogConvexityBound {
        kappa,
        constant,
        bound,
    })
}

impl LogConvexityInstance {
    /// Largest `c` compatible with the premises as seen through a grid of
    /// `lambda` values on `(lambda0, lambda0 + 40]`. The grid is closed at
    /// `lambda0` (the premise holds there by continuity) and includes the
    /// unconstrained minimiser `ln(q b / (p a)) / (p + q)` when it lies in
    /// range, so the grid minimum is the true infimum up to rounding.
    pub fn admissible_c(a: f64, b: f64, p: f64, q: f64, lambda0: f64, grid: usize) -> f64 {
        let f = |l: f64| (p * l).exp() * a + (-q * l).exp() * b;
        let hi = lambda0 + 40.0;
        let mut best = f(lambda0);
        for j in 1..=grid {
            best = best.min(f(lambda0 + 40.0 * j as f64 / grid as f64));
        }
        if a > 0.0 && b > 0.0 {
            let star = (q * b / (p * a)).ln() / (p + q);
            if star > lambda0 && star <= hi {
                best = best.min(f(star));
            }
        }
        best.min(b)
    }

    /// `min(b, inf_{lambda >= lambda0} e^(p lambda) a + e^(-q lambda) b)` in
    /// closed form.
    pub fn exact_admissible_c(a: f64, b: f64, p: f64, q: f64, lambda0: f64) -> f64 {
        let f = |l: f64| (p * l).exp() * a + (-q * l).exp() * b;
        let mut best = f(lambda0);
        if a > 0.0 && b > 0.0 {
            let star = (q * b / (p * a)).ln() / (p + q);
            if star > lambda0 {
                best = best.min(f(star));
            }
        }
        best.min(b)
    }

    /// Whether `c` satisfies the premise for every `lambda >= lambda0`, not
    /// only on the sampled grid. Fails when the minimiser lies beyond the
    /// grid's upper end.
    pub fn premise_holds(&self) -> bool {
        let exact = Self::exact_admissible_c(self.a, self.b, self.p, self.q, self.lambda0);
        self.c <= exact * (1.0 + 1e-12)
    }

    pub fn sample(rng: &mut impl Rng, grid: usize) -> LogConvexityInstance {
        let pos = |rng: &mut dyn rand::RngCore, hi: f64| hi * (1.0 - rng.random::<f64>());
        let a = pos(rng, 10.0);
        let b = pos(rng, 10.0);
        let p = pos(rng, 5.0);
        let q = pos(rng, 5.0);
        let lambda0 = rng.random_range(0.0..=3.0);
        LogConvexityInstance {
            a,
            b,
            c: Self::admissible_c(a, b, p, q, lambda0, grid),
            p,
            q,
            lambda0,
        }
    }

    /// `c <= bound` up to a relative `1e-12`.
    pub fn satisfies_bound(&self) -> Result<bool> {
        let bound = log_convexity_bound(self.a, self.b, self.p, self.q, self.lambda0)?.bound;
        Ok(self.c <= bound * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: u64,
    pub instances: usize,
    /// Instances whose grid-based `c` exceeds the infimum over all
    /// `lambda >= lambda0`; the premise fails and they are not checked.
    pub premise_failures: usize,
    /// Bound violations among instances whose premise holds.
    pub violations: usize,
    /// Bound violations among all instances, premise or not.
    pub raw_violations: usize,
    /// Largest observed `c / bound`.
    pub worst_ratio: f64,
    pub worst: Option<LogConvexityInstance>,
}

/// Samples `a, b` in `(0, 10]`, `p, q` in `(0, 5]`, `lambda0` in `[0, 3]`
/// and checks each instance against its bound. `worst` is taken over
/// instances whose premise holds.
pub fn lemma_audit(instances: usize, seed: u64) -> Result<AuditReport> {
    const GRID: usize = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AuditReport {
        seed,
        instances,
        premise_failures: 0,
        violations: 0,
        raw_violations: 0,
        worst_ratio: 0.0,
        worst: None,
    };
    for _ in 0..instances {
        let inst = LogConvexityInstance::sample(&mut rng, GRID);
        let premise = inst.premise_holds();
        if !premise {
            report.premise_failures += 1;
        }
        if !inst.satisfies_bound()? {
            report.raw_violations += 1;
            if premise {
                report.violations += 1;
            }
        }
        let bound = log_convexity_bound(inst.a, inst.b, inst.p, inst.q, inst.lambda0)?.bound;
        let ratio = inst.c / bound;
        if premise && ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst = Some(inst);
        }
    }
    Ok(report)
}

/// `kappa = ln(r3/r2) / (C3 ln(r2/r1) + ln(r3/r2))`.
pub fn kappa_formula(r1: f64, r2: f64, r3: f64, c3: f64) -> Result<f64> {
    if !(0.0 < r1 && r1 < r2 && r2 < r3) {
        return Err(Error::InvalidConfig(format!(
            "radii must satisfy 0 < r1 < r2 < r3, got {r1}, {r2}, {r3}"
        )));
    }
    if !(c3 > 0.0) {
        return Err(Error::InvalidConfig(format!("C3 must be positive, got {c3}")));
    }
    let outer = (r3 / r2).ln();
    Ok(outer / (c3 * (r2 / r1).ln() + outer))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallNorm {
    #[default]
    L2,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeBallConfig {
    pub center: Point,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub norm: BallNorm,
    pub kappa: f64,
}

impl ThreeBallConfig {
    /// Checks radius ordering, `kappa` in `(0, 1)` and, when `domain` is
    /// given as `[x0, x1, y0, y1]`, that the outer ball lies inside it.
    pub fn validate(&self, domain: Option<[f64; 4]>) -> Result<()> {
        if !(0.0 < self.r1 && self.r1 < self.r2 && self.r2 < self.r3) {
            return Err(Error::InvalidConfig(format!(
                "radii must satisfy 0 < r1 < r2 < r3, got {}, {}, {}",
                self.r1, self.r2, self.r3
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidConfig(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if let Some([x0, x1, y0, y1]) = domain {
            let [cx, cy] = self.center;
            let tol = 1e-12;
            if cx - self.r3 < x0 - tol || cx + self.r3 > x1 + tol || cy - self.r3 < y0 - tol || cy + self.r3 > y1 + tol {
                return Err(Error::InvalidConfig(format!(
                    "ball of radius {} at {:?} leaves the domain",
                    self.r3, self.center
                )));
            }
        }
        Ok(())
    }
}

/// Tensor rule on a disc: Gauss–Legendre in the radius, uniform in angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarQuadrature {
    pub radial: usize,
    pub angular: usize,
}

impl Default for PolarQuadrature {
    fn default() -> Self {
        PolarQuadrature {
            radial: 24,
            angular: 96,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = t;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

impl PolarQuadrature {
    /// Integrates `g` over the disc `B(center, r)`.
    pub fn integrate(&self, center: Point, r: f64, mut g: impl FnMut(Point) -> f64) -> f64 {
        let (xs, ws) = gauss_legendre(self.radial);
        let dtheta = 2.0 * std::f64::consts::PI / self.angular as f64;
        let mut total = 0.0;
        for (s, w) in xs.iter().zip(&ws) {
            let rho = r * s;
            let mut ring = 0.0;
            for k in 0..self.angular {
                let th = k as f64 * dtheta;
                ring += g([center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
            }
            total += w * r * rho * ring * dtheta;
        }
        total
    }
}

pub fn ball_norm(u: &impl Field, center: Point, r: f64, norm: BallNorm, quad: &PolarQuadrature) -> f64 {
    quad.integrate(center, r, |p| {
        let v = u.value(p);
        match norm {
            BallNorm::L2 => v * v,
            BallNorm::H1 => {
                let g = u.gradient(p);
                v * v + g[0] * g[0] + g[1] * g[1]
            }
        }
    })
    .max(0.0)
    .sqrt()
}

/// `|u|_{B2} / (|u|_{B1}^kappa |u|_{B3}^(1-kappa))`.
pub fn three_ball_ratio(u: &impl Field, config: &ThreeBallConfig, quad: &PolarQuadrature) -> Result<f64> {
    config.validate(None)?;
    let n = |r| ball_norm(u, config.center, r, config.norm, quad);
    let (n1, n2, n3) = (n(config.r1), n(config.r2), n(config.r3));
    let denom = n1.powf(config.kappa) * n3.powf(1.0 - config.kappa);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Degenerate(format!(
            "three-ball denominator vanishes (inner norm {n1:e}, outer norm {n3:e})"
        )));
    }
    Ok(n2 / denom)
}

/// `Re((z - z0)^k)`, harmonic for every `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPolynomial {
    pub k: u32,
    pub center: Point,
}

fn complex_pow(x: f64, y: f64, k: u32) -> (f64, f64) {
    (0..k).fold((1.0, 0.0), |(re, im), _| (re * x - im * y, re * y + im * x))
}

impl Field for HarmonicPolynomial {
    fn value(&self, p: Point) -> f64 {
        complex_pow(p[0] - self.center[0], p[1] - self.center[1], self.k).0
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        if self.k == 0 {
            return [0.0; 2];
        }
        // d/dx Re(w^k) = Re(k w^(k-1)), d/dy Re(w^k) = -Im(k w^(k-1))
        let (re, im) = complex_pow(p[0] - self.center[0], p[1] - self.center[1], self.k - 1);
        let k = self.k as f64;
        [k * re, -k * im]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub config: ThreeBallConfig,
    pub c3: f64,
    /// `(k, ratio)` for each family member.
    pub ratios: Vec<(u32, f64)>,
    /// Ratio of the first member, used as the bound for the rest.
    pub calibrated_constant: f64,
    pub bounded: bool,
}

/// Three-ball ratios of the harmonic family `Re((z - x0)^k)`, `k = 1..=k_max`,
/// with `kappa` from [`kappa_formula`] for the given `C3`. The first member
/// fixes the constant; the family is bounded when no later ratio exceeds it.
pub fn harmonic_sweep(
    center: Point,
    radii: [f64; 3],
    norm: BallNorm,
    c3: f64,
    k_max: u32,
    quad: &PolarQuadrature,
) -> Result<HarmonicReport> {
    let kappa = kappa_formula(radii[0], radii[1], radii[2], c3)?;
    let config = ThreeBallConfig {
        center,
        r1: radii[0],
        r2: radii[1],
        r3: radii[2],
        norm,
        kappa,
    };
    let mut ratios = Vec::new();
    for k in 1..=k_max.max(1) {
        let u = HarmonicPolynomial { k, center };
        ratios.push((k, three_ball_ratio(&u, &config, quad)?));
    }
    let calibrated_constant = ratios[0].1;
    let bounded = ratios.iter().all(|&(_, r)| r <= calibrated_constant * (1.0 + 1e-9));
    Ok(HarmonicReport {
        config,
        c3,
        ratios,
        calibrated_constant,
        bounded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemProbeRow {
    pub n: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemProbeReport {
    pub case: String,
    pub config: ThreeBallConfig,
    pub exact_ratio: Option<f64>,
    pub rows: Vec<FemProbeRow>,
}

/// Three-ball ratio of the discrete solution over the case's ladder, next to
/// the ratio of the exact solution.
pub fn probe_fem_solution(
    case: &CaseDefinition,
    config: &ThreeBallConfig,
    quad: &PolarQuadrature,
) -> Result<FemProbeReport> {
    config.validate(Some([0.0, 1.0, 0.0, 1.0]))?;
    case.validate()?;
    let exact_ratio = three_ball_ratio(&case.exact, config, quad).ok();
    let spec = case.problem_spec();
    let mut rows = Vec::new();
    for &n in &case.ladder {
        let mesh = Mesh::unit_square(n)?;
        let system = SaddleSystem::build(&spec, &mesh, &case.data(&mesh))?;
        let solution = system.solve()?;
        rows.push(FemProbeRow {
            n,
            ratio: three_ball_ratio(&solution.u, config, quad)?,
        });
    }
    Ok(FemProbeReport {
        case: case.name.clone(),
        config: *config,
        exact_ratio,
        rows,
    })
}
