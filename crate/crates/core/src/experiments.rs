//! Experiment catalogue and convergence studies: manufactured solution,
//! convection fields, data/target geometries, nodal noise, mesh ladders and
//! least-squares rate fits.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{error_norms, interpolate, l2_project, norms, FeFunction, Field};
use crate::forms::{ConvectionField, ProblemSpec, SourceFn};
use crate::mesh::{Mesh, Point, Rect, Region};
use crate::quadrature::QuadDegree;
use crate::saddle::{
    estimate_condition_number_with, exact_condition_number, CondMode, EstimateOptions, SaddleSystem,
    Solution, SolveDiagnostics, EXACT_COND_LIMIT,
};

pub const DEFAULT_LADDER: [usize; 5] = [8, 16, 32, 64, 128];
pub const DEFAULT_SEED: u64 = 20240531;

/// Analytic solutions with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    /// `30 x (1 - x) y (1 - y)`, unit L2 norm on the square.
    #[default]
    Bubble,
    Zero,
}

impl ExactSolution {
    pub fn laplacian(&self, p: Point) -> f64 {
        match self {
            ExactSolution::Bubble => -60.0 * (p[0] * (1.0 - p[0]) + p[1] * (1.0 - p[1])),
            ExactSolution::Zero => 0.0,
        }
    }
}

impl Field for ExactSolution {
    fn value(&self, p: Point) -> f64 {
        match self {
            ExactSolution::Bubble => 30.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]),
            ExactSolution::Zero => 0.0,
        }
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        match self {
            ExactSolution::Bubble => [
                30.0 * (1.0 - 2.0 * p[0]) * p[1] * (1.0 - p[1]),
                30.0 * p[0] * (1.0 - p[0]) * (1.0 - 2.0 * p[1]),
            ],
            ExactSolution::Zero => [0.0; 2],
        }
    }
}

/// `f = -mu Lap(u) + beta . grad(u)`.
pub fn derive_source(exact: ExactSolution, mu: f64, beta: ConvectionField) -> SourceFn {
    Arc::new(move |p| {
        let g = exact.gradient(p);
        let b = beta.at(p);
        -mu * exact.laplacian(p) + b[0] * g[0] + b[1] * g[1]
    })
}

pub fn beta_constant() -> ConvectionField {
    ConvectionField::Constant { value: [1.0, 0.0] }
}

pub fn beta_rotational() -> ConvectionField {
    ConvectionField::Rotational { scale: 100.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Data square below a target square of the same width.
    Ex1,
    /// Two data strips at the left and right walls around a central target.
    Ex2,
    /// Data in a frame along three sides, target covering all but a strip
    /// along the left wall.
    Ex3,
}

impl Geometry {
    pub fn omega(&self) -> Region {
        match self {
            Geometry::Ex1 => Region::rect(Rect::new(0.2, 0.45, 0.2, 0.45)),
            Geometry::Ex2 => Region::union([
                Rect::new(0.0, 0.125, 0.4, 0.6),
                Rect::new(0.875, 1.0, 0.4, 0.6),
            ]),
            Geometry::Ex3 => Region::whole().minus(Rect::new(0.0, 0.875, 0.125, 0.875)),
        }
    }

    pub fn target(&self) -> Region {
        match self {
            Geometry::Ex1 => Region::rect(Rect::new(0.2, 0.45, 0.55, 0.8)),
            Geometry::Ex2 => Region::rect(Rect::new(0.25, 0.75, 0.4, 0.6)),
            Geometry::Ex3 => Region::whole().minus(Rect::new(0.0, 0.125, 0.125, 0.875)),
        }
    }
}

/// Amplitude law of the nodal perturbation: uniform on `[-h^a, h^a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    None,
    SqrtH,
    H,
}

impl NoiseLaw {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            NoiseLaw::None => None,
            NoiseLaw::SqrtH => Some(0.5),
            NoiseLaw::H => Some(1.0),
        }
    }

    pub fn amplitude(&self, h: f64) -> f64 {
        self.exponent().map_or(0.0, |a| h.powf(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub law: NoiseLaw,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            law: NoiseLaw::None,
            seed: DEFAULT_SEED,
        }
    }
}

/// Adds independent uniform samples to the values at nodes inside `omega`.
/// Draws follow node order from a stream keyed by the seed and the mesh
/// resolution, so a mesh and seed always reproduce the same perturbation.
pub fn apply_noise(mesh: &Mesh, omega: &Region, data: &mut [f64], noise: NoiseModel) {
    let amp = noise.law.amplitude(mesh.mesh_size());
    if amp == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(mesh.cells_per_side as u64);
    for (v, p) in data.iter_mut().zip(&mesh.nodes) {
        if omega.contains(*p) {
            *v += rng.random_range(-amp..=amp);
        }
    }
}

/// Discrete reference `pi_h u` used for `e_h = pi_h u - u_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    #[default]
    L2,
    Nodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H1Norm {
    #[default]
    Full,
    Semi,
}

fn default_true() -> bool {
    true
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDefinition {
    pub name: String,
    pub mu: f64,
    pub beta: ConvectionField,
    #[serde(default)]
    pub beta_sup: Option<f64>,
    pub omega: Region,
    pub target: Region,
    pub gamma: f64,
    pub gamma_star: f64,
    pub boundary_factor: f64,
    #[serde(default)]
    pub exact: ExactSolution,
    pub ladder: Vec<usize>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub quadrature: QuadDegree,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub h1_norm: H1Norm,
    /// Errors relative to the exact solution's norms over the target.
    #[serde(default = "default_true")]
    pub relative: bool,
}

impl CaseDefinition {
    pub fn new(name: &str, geometry: Geometry, beta: ConvectionField) -> CaseDefinition {
        let beta_sup = match beta {
            ConvectionField::Rotational { scale } => Some(2.0 * scale.abs()),
            ConvectionField::Constant { .. } => None,
        };
        CaseDefinition {
            name: name.to_string(),
            mu: 1.0,
            beta,
            beta_sup,
            omega: geometry.omega(),
            target: geometry.target(),
            gamma: 1e-5,
            gamma_star: 1.0,
            boundary_factor: 50.0,
            exact: ExactSolution::Bubble,
            ladder: DEFAULT_LADDER.to_vec(),
            noise: NoiseModel::default(),
            quadrature: QuadDegree::Four,
            projection: Projection::L2,
            h1_norm: H1Norm::Full,
            relative: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "ladder must be a nonempty list of positive sizes, got {:?}",
                self.ladder
            )));
        }
        self.problem_spec().validate()
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            mu: self.mu,
            beta: self.beta,
            beta_sup: self.beta_sup,
            source: derive_source(self.exact, self.mu, self.beta),
            omega: self.omega.clone(),
            target: self.target.clone(),
            gamma: self.gamma,
            gamma_star: self.gamma_star,
            boundary_factor: self.boundary_factor,
            quadrature: self.quadrature,
        }
    }

    /// Nodal values of the exact solution, perturbed inside the data region.
    pub fn data(&self, mesh: &Mesh) -> Vec<f64> {
        let mut data = interpolate(mesh, |p| self.exact.value(p)).coefficients;
        apply_noise(mesh, &self.omega, &mut data, self.noise);
        data
    }

    pub fn reference<'m>(&self, mesh: &'m Mesh) -> Result<FeFunction<'m>> {
        match self.projection {
            Projection::L2 => l2_project(mesh, self.quadrature, |p| self.exact.value(p)),
            Projection::Nodal => Ok(interpolate(mesh, |p| self.exact.value(p))),
        }
    }
}

/// Names accepted by [`builtin_case`].
pub const BUILTIN_CASES: [&str; 8] = [
    "ex1-bc",
    "ex1-bnc",
    "ex2-bc",
    "ex2-bnc",
    "ex3-bc",
    "ex3-bnc",
    "ex1-bc-noise-h",
    "ex1-bc-noise-sqrt-h",
];

pub fn builtin_case(name: &str) -> Result<CaseDefinition> {
    let (geometry, beta, law) = match name {
        "ex1-bc" => (Geometry::Ex1, beta_constant(), NoiseLaw::None),
        "ex1-bnc" => (Geometry::Ex1, beta_rotational(), NoiseLaw::None),
        "ex2-bc" => (Geometry::Ex2, beta_constant(), NoiseLaw::None),
        "ex2-bnc" => (Geometry::Ex2, beta_rotational(), NoiseLaw::None),
        "ex3-bc" => (Geometry::Ex3, beta_constant(), NoiseLaw::None),
        "ex3-bnc" => (Geometry::Ex3, beta_rotational(), NoiseLaw::None),
        "ex1-bc-noise-h" => (Geometry::Ex1, beta_constant(), NoiseLaw::H),
        "ex1-bc-noise-sqrt-h" => (Geometry::Ex1, beta_constant(), NoiseLaw::SqrtH),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown case {other:?}; expected one of {}",
                BUILTIN_CASES.join(", ")
            )))
        }
    };
    let mut case = CaseDefinition::new(name, geometry, beta);
    case.noise.law = law;
    Ok(case)
}

pub fn builtin_cases() -> Vec<CaseDefinition> {
    BUILTIN_CASES
        .iter()
        .map(|n| builtin_case(n).expect("builtin names resolve"))
        .collect()
}

/// One row of a convergence table. Failed levels keep `NaN` values and the
/// error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub err_l2_b: f64,
    pub err_h1_b: f64,
    pub s_norm: f64,
    pub sstar_norm: f64,
    pub cond: Option<f64>,
    pub diagnostics: Option<SolveDiagnostics>,
    pub error: Option<String>,
}

impl LevelResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// `(s(e_h, e_h) + s_dual(z_h, z_h))^(1/2)`.
    pub fn regularization_norm(&self) -> f64 {
        self.s_norm.hypot(self.sstar_norm)
    }

    fn failed(n: usize, h: f64, err: &Error) -> LevelResult {
        LevelResult {
            n,
            h,
            err_l2_b: f64::NAN,
            err_h1_b: f64::NAN,
            s_norm: f64::NAN,
            sstar_norm: f64::NAN,
            cond: None,
            diagnostics: None,
            error: Some(err.to_string()),
        }
    }
}

pub fn run_level(case: &CaseDefinition, n: usize, cond: CondMode) -> Result<LevelResult> {
    let mesh = Mesh::unit_square(n)?;
    let spec = case.problem_spec();
    let data = case.data(&mesh);
    let system = SaddleSystem::build(&spec, &mesh, &data)?;
    let solution = system.solve()?;
    let mut level = run_level_with(case, &mesh, &system, &solution)?;
    level.cond = system.condition_number(cond)?.map(|c| c.value);
    Ok(level)
}

/// Error and regularization norms of an existing solution. `cond` is left empty.
pub fn run_level_with(
    case: &CaseDefinition,
    mesh: &Mesh,
    system: &SaddleSystem<'_>,
    solution: &Solution,
) -> Result<LevelResult> {
    let n = mesh.cells_per_side;

    let err = error_norms(&case.exact, &solution.u, &case.target, case.quadrature);
    let scale = if case.relative {
        norms(mesh, &case.exact, &case.target, case.quadrature)
    } else {
        crate::fem::Norms {
            l2: 1.0,
            h1_semi: 1.0,
            h1: 1.0,
        }
    };
    let (e_h1, s_h1) = match case.h1_norm {
        H1Norm::Full => (err.h1, scale.h1),
        H1Norm::Semi => (err.h1_semi, scale.h1_semi),
    };
    let rel = |e: f64, s: f64| if s > 0.0 { e / s } else { e };

    let reference = case.reference(mesh)?;
    let e_h: Vec<f64> = reference
        .coefficients
        .iter()
        .zip(&solution.u.coefficients)
        .map(|(p, u)| p - u)
        .collect();

    Ok(LevelResult {
        n,
        h: mesh.mesh_size(),
        err_l2_b: rel(err.l2, scale.l2),
        err_h1_b: rel(e_h1, s_h1),
        s_norm: system.forms.s_norm(&e_h),
        sstar_norm: system.forms.s_dual_norm(&solution.z.coefficients),
        cond: None,
        diagnostics: Some(solution.diagnostics.clone()),
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares slope of `log(value)` against `log(h)`.
    pub slope: f64,
    /// Slopes between consecutive rows.
    pub per_step: Vec<f64>,
}

/// Fits `value ~ C h^rate`.
pub fn estimate_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a rate needs at least two rows, got {}",
            pairs.len()
        )));
    }
    if let Some(&(h, v)) = pairs.iter().find(|(h, v)| !(*h > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "rates need positive h and values, got ({h}, {v})"
        )));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(h, v)| (h.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("rates need distinct mesh sizes".into()));
    }
    let per_step = logs
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    Ok(RateFit {
        slope: sxy / sxx,
        per_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub h1: RateFit,
    pub l2: RateFit,
    pub s: RateFit,
    pub s_star: RateFit,
    pub regularization: RateFit,
    pub cond: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub case: String,
    pub levels: Vec<LevelResult>,
}

pub const TABLE_HEADER: &str = "N,h,err_l2_B,err_h1_B,s_norm,sstar_norm,cond";

impl ConvergenceTable {
    pub fn is_complete(&self) -> bool {
        self.levels.iter().all(LevelResult::is_ok)
    }

    fn column(&self, f: impl Fn(&LevelResult) -> f64) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .filter(|l| l.is_ok())
            .map(|l| (l.h, f(l)))
            .collect()
    }

    /// Fitted rates over the successful rows; an error if fewer than two rows
    /// succeeded or a column is not positive.
    pub fn rates(&self) -> Result<Rates> {
        let cond = if self.levels.iter().filter(|l| l.is_ok()).all(|l| l.cond.is_some()) {
            estimate_rate(&self.column(|l| l.cond.unwrap_or(f64::NAN))).ok()
        } else {
            None
        };
        Ok(Rates {
            h1: estimate_rate(&self.column(|l| l.err_h1_b))?,
            l2: estimate_rate(&self.column(|l| l.err_l2_b))?,
            s: estimate_rate(&self.column(|l| l.s_norm))?,
            s_star: estimate_rate(&self.column(|l| l.sstar_norm))?,
            regularization: estimate_rate(&self.column(LevelResult::regularization_norm))?,
            cond,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TABLE_HEADER}")?;
        for l in &self.levels {
            let cond = l.cond.map(|c| format!("{c:.10e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
                l.n, l.h, l.err_l2_b, l.err_h1_b, l.s_norm, l.sstar_norm, cond
            )?;
        }
        Ok(())
    }
}

/// Runs every ladder entry; failures are recorded per row instead of
/// aborting the table. Configuration errors abort.
pub fn run_case(case: &CaseDefinition, cond: CondMode) -> Result<ConvergenceTable> {
    case.validate()?;
    let mut levels = Vec::with_capacity(case.ladder.len());
    for &n in &case.ladder {
        let level = match run_level(case, n, cond) {
            Ok(l) => l,
            Err(e) if e.is_config_error() => return Err(e),
            Err(e) => {
                log::warn!("{} at N={n}: {e}", case.name);
                LevelResult::failed(n, 1.0 / ((n + 1) as f64), &e)
            }
        };
        log::info!(
            "{} N={n}: L2(B) {:.3e} H1(B) {:.3e}",
            case.name,
            level.err_l2_b,
            level.err_h1_b
        );
        levels.push(level);
    }
    Ok(ConvergenceTable {
        case: case.name.clone(),
        levels,
    })
}

/// One row of the condition number table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondRow {
    pub n: usize,
    pub h: f64,
    pub cond: f64,
    pub lower: f64,
    pub upper: f64,
    /// `converged`, `exact`, or `bracket` when the iteration cap was hit.
    pub status: String,
}

pub const CONDNUM_HEADER: &str = "N,h,cond,cond_lower,cond_upper,status,slope";

/// Condition numbers over the ladder. `Exact` falls back to the estimate
/// above the dense size limit; `None` is treated as `Estimate`.
pub fn condnum_table(case: &CaseDefinition, mode: CondMode, max_iterations: usize) -> Result<Vec<CondRow>> {
    let spec = case.problem_spec();
    let opts = EstimateOptions {
        max_iterations,
        ..EstimateOptions::default()
    };
    let mut rows = Vec::new();
    for &n in &case.ladder {
        let mesh = Mesh::unit_square(n)?;
        let system = SaddleSystem::build(&spec, &mesh, &case.data(&mesh))?;
        let use_exact = mode == CondMode::Exact && system.dim() <= EXACT_COND_LIMIT;
        let row = if use_exact {
            let c = exact_condition_number(&system.matrix)?;
            CondRow {
                n,
                h: mesh.mesh_size(),
                cond: c.value,
                lower: c.value,
                upper: c.value,
                status: "exact".into(),
            }
        } else {
            match estimate_condition_number_with(&system.matrix, opts) {
                Ok(c) => CondRow {
                    n,
                    h: mesh.mesh_size(),
                    cond: c.value,
                    lower: c.value,
                    upper: c.value,
                    status: "converged".into(),
                },
                Err(Error::NoConvergence { lower, upper, .. }) => {
                    log::warn!("N={n}: condition estimate not converged, bracket [{lower:.4e}, {upper:.4e}]");
                    CondRow {
                        n,
                        h: mesh.mesh_size(),
                        cond: (lower * upper).sqrt(),
                        lower,
                        upper,
                        status: "bracket".into(),
                    }
                }
                Err(e) => return Err(e),
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_condnum_csv(rows: &[CondRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CONDNUM_HEADER}")?;
    for (k, r) in rows.iter().enumerate() {
        let slope = if k == 0 {
            String::new()
        } else {
            let p = &rows[k - 1];
            format!("{:.4}", (r.cond / p.cond).ln() / (r.h / p.h).ln())
        };
        writeln!(
            out,
            "{},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
            r.n, r.h, r.cond, r.lower, r.upper, r.status, slope
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_examples() {
        let f = derive_source(ExactSolution::Bubble, 1.0, ConvectionField::Constant { value: [0.0; 2] });
        assert!((f([0.5, 0.5]) - 30.0).abs() < 1e-12);
        let f = derive_source(ExactSolution::Bubble, 1.0, beta_constant());
        assert!((f([0.5, 0.5]) - 30.0).abs() < 1e-12);
        let f = derive_source(ExactSolution::Zero, 1.0, beta_rotational());
        assert_eq!(f([0.3, 0.7]), 0.0);
    }

    #[test]
    fn builtin_geometry_and_parameters() {
        let cases = builtin_cases();
        assert_eq!(cases.len(), 8);
        let ex1 = builtin_case("ex1-bc").unwrap();
        assert_eq!(ex1.omega, Region::rect(Rect::new(0.2, 0.45, 0.2, 0.45)));
        assert_eq!(ex1.target, Region::rect(Rect::new(0.2, 0.45, 0.55, 0.8)));
        assert_eq!((ex1.gamma, ex1.gamma_star, ex1.boundary_factor), (1e-5, 1.0, 50.0));
        let nc = builtin_case("ex2-bnc").unwrap();
        assert_eq!(nc.problem_spec().beta_sup_on(&Mesh::unit_square(2).unwrap()), 200.0);
        assert!(builtin_case("ex9").unwrap_err().is_config_error());
    }

    #[test]
    fn ex3_regions() {
        let g = Geometry::Ex3;
        assert!(g.omega().contains([0.95, 0.5]));
        assert!(g.omega().contains([0.5, 0.05]));
        assert!(!g.omega().contains([0.5, 0.5]));
        assert!(g.target().contains([0.5, 0.5]));
        assert!(!g.target().contains([0.05, 0.5]));
    }

    #[test]
    fn noise_is_local_bounded_and_reproducible() {
        let mesh = Mesh::unit_square(16).unwrap();
        let omega = Geometry::Ex1.omega();
        let noise = NoiseModel {
            law: NoiseLaw::H,
            seed: 7,
        };
        let mut a = vec![0.0; mesh.num_nodes()];
        let mut b = a.clone();
        apply_noise(&mesh, &omega, &mut a, noise);
        apply_noise(&mesh, &omega, &mut b, noise);
        assert_eq!(a, b);
        let h = mesh.mesh_size();
        for (v, p) in a.iter().zip(&mesh.nodes) {
            if omega.contains(*p) {
                assert!(v.abs() <= h);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(a.iter().any(|&v| v != 0.0));
        let mut c = vec![0.0; mesh.num_nodes()];
        apply_noise(&mesh, &omega, &mut c, NoiseModel::default());
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rate_examples() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let fit = |f: fn(f64) -> f64| {
            estimate_rate(&hs.iter().map(|&h| (h, f(h))).collect::<Vec<_>>()).unwrap()
        };
        assert!((fit(|h| 3.0 * h).slope - 1.0).abs() < 1e-12);
        assert!((fit(|h| h * h).slope - 2.0).abs() < 1e-12);
        assert!(fit(|_| 5.0).slope.abs() < 1e-12);
        assert_eq!(fit(|h| h * h).per_step.len(), 3);
        assert!(estimate_rate(&[(0.1, 1.0)]).is_err());
        assert!(estimate_rate(&[(0.1, 1.0), (0.05, 0.0)]).is_err());
    }

    #[test]
    fn table_csv_header() {
        let case = builtin_case("ex1-bc").unwrap();
        let mut small = case.clone();
        small.ladder = vec![4];
        let t = run_case(&small, CondMode::None).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,h,err_l2_B,err_h1_B,s_norm,sstar_norm,cond\n4,"));
        assert!(t.rates().is_err());
    }

    #[test]
    fn case_json_round_trip() {
        let case = builtin_case("ex3-bnc").unwrap();
        let json = serde_json::to_string(&case).unwrap();
        let back: CaseDefinition = serde_json::from_str(&json).unwrap();
        assert_eq!(case, back);
    }
}
