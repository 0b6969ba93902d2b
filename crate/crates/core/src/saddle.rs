//! The symmetric indefinite block system
//!
//! ```text
//! [ S   A^T  ] [u]   [S_data u_data]
//! [ A  -S_dual] [z] = [ (f, .)       ]
//! ```
//!
//! with `S = s_data + s_jump`, its sparse LU solve, and spectral condition
//! numbers (dense SVD or iterative estimate).

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::forms::{assemble_loads, AssembledForms, ProblemSpec};
use crate::mesh::Mesh;
use crate::sparse::{dot, norm2, SparseOperator, TripletBuilder};

/// Relative residual above which a solve is reported as inaccurate.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Largest system dimension accepted by the dense SVD.
pub const EXACT_COND_LIMIT: usize = 2000;

#[derive(Debug, Clone)]
pub struct SaddleSystem<'m> {
    pub mesh: &'m Mesh,
    pub forms: AssembledForms,
    pub matrix: SparseOperator,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveDiagnostics {
    pub dim: usize,
    pub nnz: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub h: f64,
    pub beta_sup: f64,
    pub peclet: f64,
    pub omega_measure: f64,
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<'m> {
    pub u: FeFunction<'m>,
    pub z: FeFunction<'m>,
    pub diagnostics: SolveDiagnostics,
}

impl<'m> SaddleSystem<'m> {
    /// Assembles the operators and right-hand side. `data` holds nodal values
    /// of the measurement; only its restriction to the data region matters.
    pub fn build(spec: &ProblemSpec, mesh: &'m Mesh, data: &[f64]) -> Result<SaddleSystem<'m>> {
        let forms = AssembledForms::assemble(spec, mesh)?;
        let (b_f, b_data) = assemble_loads(spec, mesh, &forms, data)?;
        let matrix = block_matrix(&forms)?;
        let mut rhs = b_data;
        rhs.extend(b_f);
        Ok(SaddleSystem {
            mesh,
            forms,
            matrix,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn factorize(&self) -> Result<Lu<usize, f64>> {
        let m = self.matrix.to_faer()?;
        m.sp_lu().map_err(|e| Error::Factorization {
            dim: self.dim(),
            nnz: self.matrix.nnz(),
            reason: format!("{e:?}"),
        })
    }

    pub fn solve(&self) -> Result<Solution<'m>> {
        let lu = self.factorize()?;
        let (x, relative_residual, refinement_steps) = solve_refined(&lu, &self.matrix, &self.rhs);
        log::debug!(
            "saddle solve: dim {} nnz {} residual {relative_residual:.3e}",
            self.dim(),
            self.matrix.nnz()
        );
        if !(relative_residual <= SOLVE_TOLERANCE) {
            return Err(Error::InaccurateSolve {
                residual: relative_residual,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        let n = self.mesh.num_nodes();
        let diagnostics = SolveDiagnostics {
            dim: self.dim(),
            nnz: self.matrix.nnz(),
            relative_residual,
            refinement_steps,
            h: self.forms.h,
            beta_sup: self.forms.beta_sup,
            peclet: self.forms.peclet,
            omega_measure: self.forms.omega_measure,
            symmetry_defect: self.matrix.symmetry_defect(),
        };
        Ok(Solution {
            u: FeFunction::new(self.mesh, x[..n].to_vec())?,
            z: FeFunction::new(self.mesh, x[n..].to_vec())?,
            diagnostics,
        })
    }

    pub fn condition_number(&self, mode: CondMode) -> Result<Option<CondReport>> {
        condition_number(&self.matrix, mode)
    }
}

/// `[[S, A^T], [A, -S_dual]]`.
pub fn block_matrix(forms: &AssembledForms) -> Result<SparseOperator> {
    let n = forms.a.nrows();
    for op in [&forms.s_data, &forms.s_jump, &forms.s_dual] {
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "block {}x{} in a system with {n} nodes",
                op.nrows(),
                op.ncols()
            )));
        }
    }
    let nnz = 2 * forms.a.nnz() + forms.s_data.nnz() + forms.s_jump.nnz() + forms.s_dual.nnz();
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, nnz);
    b.push_block(0, 0, &forms.s_data, 1.0);
    b.push_block(0, 0, &forms.s_jump, 1.0);
    b.push_block_transposed(0, n, &forms.a, 1.0);
    b.push_block(n, 0, &forms.a, 1.0);
    b.push_block(n, n, &forms.s_dual, -1.0);
    Ok(b.build())
}

fn lu_solve(lu: &Lu<usize, f64>, rhs: &[f64], transpose: bool) -> Vec<f64> {
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = if transpose { lu.solve_transpose(&b) } else { lu.solve(&b) };
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

fn residual(m: &SparseOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    m.matvec(x).iter().zip(b).map(|(mx, bi)| bi - mx).collect()
}

/// LU solve followed by up to two steps of iterative refinement.
fn solve_refined(lu: &Lu<usize, f64>, m: &SparseOperator, b: &[f64]) -> (Vec<f64>, f64, usize) {
    let scale = norm2(b);
    if scale == 0.0 {
        return (vec![0.0; b.len()], 0.0, 0);
    }
    let mut x = lu_solve(lu, b, false);
    let mut r = residual(m, &x, b);
    let mut rel = norm2(&r) / scale;
    let mut steps = 0;
    while steps < 2 && rel > 1e-14 {
        let dx = lu_solve(lu, &r, false);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let r_new = residual(m, &candidate, b);
        let rel_new = norm2(&r_new) / scale;
        steps += 1;
        if !(rel_new < rel) {
            break;
        }
        x = candidate;
        r = r_new;
        rel = rel_new;
    }
    (x, rel, steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondMode {
    #[default]
    None,
    Exact,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondReport {
    pub mode: CondMode,
    pub value: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub iterations: Option<usize>,
}

/// Spectral condition number `sigma_max / sigma_min`.
pub fn condition_number(m: &SparseOperator, mode: CondMode) -> Result<Option<CondReport>> {
    match mode {
        CondMode::None => Ok(None),
        CondMode::Exact => exact_condition_number(m).map(Some),
        CondMode::Estimate => estimate_condition_number(m).map(Some),
    }
}

pub fn exact_condition_number(m: &SparseOperator) -> Result<CondReport> {
    let n = m.nrows();
    if n > EXACT_COND_LIMIT || m.ncols() > EXACT_COND_LIMIT {
        return Err(Error::TooLarge(n.max(m.ncols()), EXACT_COND_LIMIT));
    }
    let mut dense = Mat::<f64>::zeros(n, m.ncols());
    for (i, j, v) in m.iter() {
        dense[(i, j)] += v;
    }
    let sv = dense.singular_values().map_err(|e| Error::Factorization {
        dim: n,
        nnz: m.nnz(),
        reason: format!("svd: {e:?}"),
    })?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    Ok(CondReport {
        mode: CondMode::Exact,
        value: sigma_max / sigma_min,
        sigma_max,
        sigma_min,
        iterations: None,
    })
}

/// Stopping rule and cap for [`estimate_condition_number_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub max_iterations: usize,
    /// Bound on the relative eigen-residual `|B x - rho x| / rho`; some
    /// eigenvalue of `B` then lies within that relative distance of `rho`.
    pub tolerance: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            max_iterations: 5000,
            tolerance: 1e-3,
        }
    }
}

struct PowerResult {
    rho: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Power iteration on a symmetric positive semidefinite operator from a
/// fixed-seed start vector.
fn power_iteration(
    what: &str,
    n: usize,
    seed: u64,
    opts: EstimateOptions,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<PowerResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut rho_prev = 0.0;
    let mut out = PowerResult {
        rho: 0.0,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=opts.max_iterations.max(1) {
        let y = apply(&x);
        let rho = dot(&x, &y);
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Degenerate(format!("{what}: Rayleigh quotient {rho}")));
        }
        let r = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - rho * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        let stalled = it > 20 && (rho - rho_prev).abs() <= 1e-15 * rho;
        out = PowerResult {
            rho,
            residual: r,
            iterations: it,
            converged: r <= opts.tolerance * rho || stalled,
        };
        if out.converged {
            break;
        }
        rho_prev = rho;
        let ny = norm2(&y);
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Ok(out)
}

/// [`estimate_condition_number_with`] under default options.
pub fn estimate_condition_number(m: &SparseOperator) -> Result<CondReport> {
    estimate_condition_number_with(m, EstimateOptions::default())
}

/// Iterative estimate: power iteration on `M^T M` for `sigma_max`, inverse
/// iteration through one sparse LU for `sigma_min`.
///
/// When the cap is hit the error carries a bracket. Its lower end is
/// rigorous (both Rayleigh quotients underestimate their extreme
/// eigenvalues); its upper end combines `sqrt(|M|_1 |M|_inf)` with the
/// residual-widened inverse quotient.
pub fn estimate_condition_number_with(m: &SparseOperator, opts: EstimateOptions) -> Result<CondReport> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "condition estimate needs a nonempty square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let top = power_iteration("largest singular value", n, 0x5eed_0001, opts, |x| {
        m.transpose_matvec(&m.matvec(x))
    })?;
    let lu = m.to_faer()?.sp_lu().map_err(|e| Error::Factorization {
        dim: n,
        nnz: m.nnz(),
        reason: format!("{e:?}"),
    })?;
    let bottom = power_iteration("smallest singular value", n, 0x5eed_0002, opts, |x| {
        // (M^T M)^{-1} x = M^{-1} M^{-T} x
        lu_solve(&lu, &lu_solve(&lu, x, true), false)
    })?;
    let sigma_max = top.rho.sqrt();
    let sigma_min = 1.0 / bottom.rho.sqrt();
    if !(top.converged && bottom.converged) {
        let (row_sum, col_sum) = abs_sums(m);
        let lower = sigma_max / sigma_min;
        let upper = (row_sum * col_sum).sqrt() * (bottom.rho + bottom.residual).sqrt();
        log::warn!("condition estimate hit the iteration cap; bracket [{lower:.4e}, {upper:.4e}]");
        return Err(Error::NoConvergence {
            what: "condition number estimate",
            iterations: top.iterations + bottom.iterations,
            lower,
            upper,
        });
    }
    Ok(CondReport {
        mode: CondMode::Estimate,
        value: sigma_max / sigma_min,
        sigma_max,
        sigma_min,
        iterations: Some(top.iterations + bottom.iterations),
    })
}

/// `(|M|_inf, |M|_1)`: maximal absolute row and column sums.
fn abs_sums(m: &SparseOperator) -> (f64, f64) {
    let mut rows = vec![0.0; m.nrows()];
    let mut cols = vec![0.0; m.ncols()];
    for (i, j, v) in m.iter() {
        rows[i] += v.abs();
        cols[j] += v.abs();
    }
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    (max(rows), max(cols))
}
