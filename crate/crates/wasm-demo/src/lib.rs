//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string. The `*_json` functions hold
//! the logic and run natively as well, which is how they are tested.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use stabfem::experiments::{builtin_case, condnum_table, run_level_with, CondRow, NoiseLaw};
use stabfem::mesh::{Mesh, Rect};
use stabfem::probe::{log_convexity_bound, LogConvexityInstance};
use stabfem::saddle::{CondMode, SaddleSystem};
use stabfem::{Error, Field, Result};

/// Largest mesh the page may request for a solve.
pub const MAX_SOLVE_N: usize = 96;
/// Largest mesh of the condition number sweep.
pub const MAX_COND_N: usize = 24;

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub case: String,
    pub n: usize,
    pub h: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
    pub u: Vec<f64>,
    pub exact: Vec<f64>,
    pub omega: Vec<Rect>,
    pub omega_exclude: Vec<Rect>,
    pub target: Vec<Rect>,
    pub target_exclude: Vec<Rect>,
    pub err_l2_b: f64,
    pub err_h1_b: f64,
    pub relative_residual: f64,
    pub peclet: f64,
}

fn noise_law(name: &str) -> Result<NoiseLaw> {
    match name {
        "none" => Ok(NoiseLaw::None),
        "sqrt_h" => Ok(NoiseLaw::SqrtH),
        "h" => Ok(NoiseLaw::H),
        other => Err(Error::InvalidConfig(format!("unknown noise law {other:?}"))),
    }
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::InvalidConfig(format!("N must lie in 1..={max}, got {n}")));
    }
    Ok(())
}

pub fn solve_view(case: &str, n: usize, noise: &str, seed: u64) -> Result<SolveView> {
    check_n(n, MAX_SOLVE_N)?;
    let mut def = builtin_case(case)?;
    def.noise.law = noise_law(noise)?;
    def.noise.seed = seed;
    let mesh = Mesh::unit_square(n)?;
    let system = SaddleSystem::build(&def.problem_spec(), &mesh, &def.data(&mesh))?;
    let solution = system.solve()?;
    let level = run_level_with(&def, &mesh, &system, &solution)?;
    Ok(SolveView {
        case: def.name.clone(),
        n,
        h: mesh.mesh_size(),
        x: mesh.nodes.iter().map(|p| p[0]).collect(),
        y: mesh.nodes.iter().map(|p| p[1]).collect(),
        triangles: mesh.triangles.clone(),
        u: solution.u.coefficients.clone(),
        exact: mesh.nodes.iter().map(|p| def.exact.value(*p)).collect(),
        omega: def.omega.include.clone(),
        omega_exclude: def.omega.exclude.clone(),
        target: def.target.include.clone(),
        target_exclude: def.target.exclude.clone(),
        err_l2_b: level.err_l2_b,
        err_h1_b: level.err_h1_b,
        relative_residual: solution.diagnostics.relative_residual,
        peclet: solution.diagnostics.peclet,
    })
}

/// Condition numbers on `N = 2, 4, ...` up to `n_max`.
pub fn condition_rows(case: &str, n_max: usize) -> Result<Vec<CondRow>> {
    check_n(n_max, MAX_COND_N)?;
    let mut def = builtin_case(case)?;
    def.ladder = (2..=n_max).step_by(2).collect();
    if def.ladder.is_empty() {
        return Err(Error::InvalidConfig("the sweep needs N >= 2".into()));
    }
    condnum_table(&def, CondMode::Exact, 5000)
}

#[derive(Debug, Serialize)]
pub struct LogConvexityView {
    pub kappa: f64,
    pub constant: f64,
    pub bound: f64,
    /// Largest `c` allowed by the premise over all `lambda >= lambda0`.
    pub c_max: f64,
    pub lambda_star: Option<f64>,
    /// `(lambda, e^(p lambda) a + e^(-q lambda) b)` on `[lambda0, lambda0 + 10]`.
    pub curve: Vec<(f64, f64)>,
}

pub fn log_convexity_view(a: f64, b: f64, p: f64, q: f64, lambda0: f64) -> Result<LogConvexityView> {
    if !(a > 0.0 && b > 0.0) || !lambda0.is_finite() {
        return Err(Error::InvalidConfig("a and b must be positive and lambda0 finite".into()));
    }
    let bound = log_convexity_bound(a, b, p, q, lambda0)?;
    let star = (q * b / (p * a)).ln() / (p + q);
    let curve = (0..=200)
        .map(|k| {
            let l = lambda0 + 10.0 * k as f64 / 200.0;
            (l, (p * l).exp() * a + (-q * l).exp() * b)
        })
        .collect();
    Ok(LogConvexityView {
        kappa: bound.kappa,
        constant: bound.constant,
        bound: bound.bound,
        c_max: LogConvexityInstance::exact_admissible_c(a, b, p, q, lambda0),
        lambda_star: (star > lambda0).then_some(star),
        curve,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn solve(case: &str, n: usize, noise: &str, seed: u64) -> std::result::Result<String, JsError> {
    to_js(solve_view(case, n, noise, seed))
}

#[wasm_bindgen]
pub fn condition_sweep(case: &str, n_max: usize) -> std::result::Result<String, JsError> {
    to_js(condition_rows(case, n_max))
}

#[wasm_bindgen]
pub fn log_convexity(a: f64, b: f64, p: f64, q: f64, lambda0: f64) -> std::result::Result<String, JsError> {
    to_js(log_convexity_view(a, b, p, q, lambda0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_view_is_consistent() {
        let v = solve_view("ex2-bc", 8, "none", 1).unwrap();
        assert_eq!(v.x.len(), 81);
        assert_eq!(v.triangles.len(), 128);
        assert!(v.relative_residual <= 1e-8);
        assert!(v.err_l2_b > 0.0 && v.err_l2_b < 1.0);
        assert!(solve_view("ex2-bc", 0, "none", 1).is_err());
        assert!(solve_view("ex2-bc", 8, "loud", 1).is_err());
    }

    #[test]
    fn condition_rows_grow() {
        let rows = condition_rows("ex1-bc", 8).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 4, 6, 8]);
        assert!(rows.iter().all(|r| r.status == "exact"));
        assert!(rows.last().unwrap().cond > rows[0].cond);
    }

    #[test]
    fn log_convexity_bound_covers_premise() {
        let v = log_convexity_view(1.0, 4.0, 1.0, 1.0, 0.0).unwrap();
        // r = 1: kappa 1/2, C = 2, bound 2 sqrt(ab) = 4; the infimum is at
        // lambda = ln(4) / 2 with value 4, capped by b = 4.
        assert!((v.kappa - 0.5).abs() < 1e-15);
        assert!((v.bound - 4.0).abs() < 1e-12);
        assert!((v.c_max - 4.0).abs() < 1e-12);
        assert!(v.c_max <= v.bound * (1.0 + 1e-12));
        assert_eq!(v.curve.len(), 201);
        assert!(log_convexity_view(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }
}
