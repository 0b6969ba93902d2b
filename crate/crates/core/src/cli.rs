//! Command implementations behind the `stabfem` binary.
//!
//! Every command that writes files also writes `config.json`, the fully
//! resolved configuration, so a run can be repeated from its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    builtin_case, condnum_table, estimate_rate, run_case, write_condnum_csv, CaseDefinition, NoiseLaw,
    Projection, DEFAULT_SEED,
};
use crate::mesh::Mesh;
use crate::probe::{
    harmonic_sweep, kappa_formula, lemma_audit, probe_fem_solution, BallNorm, PolarQuadrature,
    ThreeBallConfig,
};
use crate::quadrature::QuadDegree;
use crate::saddle::{
    estimate_condition_number_with, exact_condition_number, CondMode, EstimateOptions, SaddleSystem,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// One-line JSON description of a failure for stderr.
pub fn error_report(err: &Error) -> String {
    let kind = if err.is_config_error() { "config" } else { "numerical" };
    serde_json::json!({ "error": err.to_string(), "kind": kind, "exit_code": exit_code(err) })
        .to_string()
}

#[derive(Debug, Parser)]
#[command(name = "stabfem", version, about = "Stabilized P1 finite elements for data assimilation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print node, triangle and face counts and the mesh size.
    MeshInfo {
        /// Cells per side.
        #[arg(short = 'n', long)]
        n: usize,
    },
    /// Solve one case on one mesh and write nodal values and diagnostics.
    Solve(RunArgs),
    /// Run a case over its mesh ladder and fit convergence rates.
    Convergence(RunArgs),
    /// Condition numbers of the system matrix over the ladder.
    Condnum(RunArgs),
    /// Stability probes: lemma audit, kappa formula, harmonic sweep, or
    /// three-ball ratios of discrete solutions.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    #[value(name = "sqrt_h")]
    SqrtH,
    H,
}

impl From<NoiseArg> for NoiseLaw {
    fn from(n: NoiseArg) -> NoiseLaw {
        match n {
            NoiseArg::None => NoiseLaw::None,
            NoiseArg::SqrtH => NoiseLaw::SqrtH,
            NoiseArg::H => NoiseLaw::H,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CondArg {
    None,
    Exact,
    Estimate,
}

impl From<CondArg> for CondMode {
    fn from(c: CondArg) -> CondMode {
        match c {
            CondArg::None => CondMode::None,
            CondArg::Exact => CondMode::Exact,
            CondArg::Estimate => CondMode::Estimate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectionArg {
    L2,
    Nodal,
}

impl From<ProjectionArg> for Projection {
    fn from(p: ProjectionArg) -> Projection {
        match p {
            ProjectionArg::L2 => Projection::L2,
            ProjectionArg::Nodal => Projection::Nodal,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Builtin case name, e.g. ex1-bc or ex3-bnc.
    #[arg(long)]
    pub case: Option<String>,
    /// Comma-separated cells-per-side values.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Mesh for `solve` (defaults to the last ladder entry).
    #[arg(short = 'n', long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long)]
    pub boundary_factor: Option<f64>,
    #[arg(long, value_enum)]
    pub cond: Option<CondArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionArg>,
    #[arg(long)]
    pub quad_degree: Option<u8>,
    /// Iteration cap of the condition number estimate.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// A case given by name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseRef {
    Name(String),
    Inline(Box<CaseDefinition>),
}

/// Contents of a `--config` file. All entries are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Present in `config.json` echoes; ignored on input.
    pub command: Option<String>,
    pub case: Option<CaseRef>,
    pub ladder: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<NoiseLaw>,
    pub boundary_factor: Option<f64>,
    pub cond: Option<CondMode>,
    pub out: Option<PathBuf>,
    pub projection: Option<Projection>,
    pub quad_degree: Option<QuadDegree>,
    pub max_iterations: Option<usize>,
}

/// Fully resolved parameters of a run; echoed as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub case: CaseDefinition,
    pub n: Option<usize>,
    pub cond: CondMode,
    pub max_iterations: usize,
    pub out: PathBuf,
}

impl RunArgs {
    pub fn resolve(&self, command: &str) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str::<ConfigFile>(&text)?
            }
            None => ConfigFile::default(),
        };
        let mut case = match (&self.case, file.case) {
            (Some(name), _) => builtin_case(name)?,
            (None, Some(CaseRef::Name(name))) => builtin_case(&name)?,
            (None, Some(CaseRef::Inline(case))) => *case,
            (None, None) => builtin_case("ex1-bc")?,
        };
        if let Some(l) = self.ladder.clone().or(file.ladder) {
            case.ladder = l;
        }
        if let Some(s) = self.seed.or(file.seed) {
            case.noise.seed = s;
        }
        if let Some(n) = self.noise.map(NoiseLaw::from).or(file.noise) {
            case.noise.law = n;
        }
        if let Some(b) = self.boundary_factor.or(file.boundary_factor) {
            case.boundary_factor = b;
        }
        if let Some(p) = self.projection.map(Projection::from).or(file.projection) {
            case.projection = p;
        }
        if let Some(d) = self.quad_degree {
            case.quadrature = QuadDegree::try_from(d)?;
        } else if let Some(d) = file.quad_degree {
            case.quadrature = d;
        }
        case.validate()?;
        let n = self.n.or(file.n);
        if n == Some(0) {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        let max_iterations = self
            .max_iterations
            .or(file.max_iterations)
            .unwrap_or(EstimateOptions::default().max_iterations);
        if max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(RunConfig {
            command: command.to_string(),
            case,
            n,
            cond: self.cond.map(CondMode::from).or(file.cond).unwrap_or_default(),
            max_iterations,
            out: self.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Audit,
    Kappa,
    Harmonic,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L2,
    H1,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[arg(value_enum)]
    pub kind: ProbeKind,
    /// Number of lemma instances.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub r1: f64,
    #[arg(long, default_value_t = 0.2)]
    pub r2: f64,
    #[arg(long, default_value_t = 0.4)]
    pub r3: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c3: f64,
    #[arg(long, default_value_t = 8)]
    pub k_max: u32,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    pub norm: NormArg,
    /// Ball centre as `x,y`.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
    pub center: Vec<f64>,
    #[arg(long, default_value = "ex1-bc")]
    pub case: String,
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MeshInfo { n } => cmd_mesh_info(n, &mut std::io::stdout()),
        Command::Solve(args) => cmd_solve(&args.resolve("solve")?),
        Command::Convergence(args) => cmd_convergence(&args.resolve("convergence")?),
        Command::Condnum(args) => cmd_condnum(&args.resolve("condnum")?),
        Command::Probe(args) => cmd_probe(&args),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn cmd_mesh_info(n: usize, out: &mut impl Write) -> Result<()> {
    let summary = Mesh::unit_square(n)?.summary();
    serde_json::to_writer_pretty(&mut *out, &summary)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    case: &'a str,
    n: usize,
    diagnostics: &'a crate::saddle::SolveDiagnostics,
    err_l2_b: f64,
    err_h1_b: f64,
    s_norm: f64,
    sstar_norm: f64,
    cond: Option<crate::saddle::CondReport>,
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let case = &cfg.case;
    let n = cfg.n.unwrap_or(*case.ladder.last().expect("validated ladder"));
    write_json(&cfg.out, "config.json", cfg)?;
    let mesh = Mesh::unit_square(n)?;
    let spec = case.problem_spec();
    let system = SaddleSystem::build(&spec, &mesh, &case.data(&mesh))?;
    let solution = system.solve()?;
    let level = crate::experiments::run_level_with(case, &mesh, &system, &solution)?;
    let cond = match cfg.cond {
        CondMode::None => None,
        CondMode::Exact => Some(exact_condition_number(&system.matrix)?),
        CondMode::Estimate => Some(estimate_condition_number_with(
            &system.matrix,
            EstimateOptions {
                max_iterations: cfg.max_iterations,
                ..EstimateOptions::default()
            },
        )?),
    };
    let mut f = create(&cfg.out, "solution_u.csv")?;
    solution.u.write_csv(&mut f)?;
    f.flush()?;
    let mut f = create(&cfg.out, "solution_z.csv")?;
    solution.z.write_csv(&mut f)?;
    f.flush()?;
    write_json(
        &cfg.out,
        "diagnostics.json",
        &SolveReport {
            case: &case.name,
            n,
            diagnostics: &solution.diagnostics,
            err_l2_b: level.err_l2_b,
            err_h1_b: level.err_h1_b,
            s_norm: level.s_norm,
            sstar_norm: level.sstar_norm,
            cond,
        },
    )?;
    println!(
        "{} N={n}: residual {:.3e}, L2(B) error {:.4e}; wrote {}",
        case.name,
        solution.diagnostics.relative_residual,
        level.err_l2_b,
        cfg.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct RatesFile<'a> {
    case: &'a str,
    complete: bool,
    failed_levels: Vec<usize>,
    rates: Option<crate::experiments::Rates>,
    note: Option<String>,
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<()> {
    write_json(&cfg.out, "config.json", cfg)?;
    let table = run_case(&cfg.case, cfg.cond)?;
    let stem = &cfg.case.name;
    let mut f = create(&cfg.out, &format!("{stem}_convergence.csv"))?;
    table.write_csv(&mut f)?;
    f.flush()?;
    let (rates, note) = match table.rates() {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(format!("rates undefined: {e}"))),
    };
    if let Some(r) = &rates {
        println!(
            "{stem}: rates H1 {:.3}, L2 {:.3}, s {:.3}, s_dual {:.3}",
            r.h1.slope, r.l2.slope, r.s.slope, r.s_star.slope
        );
    } else {
        println!("{stem}: {}", note.as_deref().unwrap_or_default());
    }
    write_json(
        &cfg.out,
        &format!("{stem}_rates.json"),
        &RatesFile {
            case: stem,
            complete: table.is_complete(),
            failed_levels: table.levels.iter().filter(|l| !l.is_ok()).map(|l| l.n).collect(),
            rates,
            note,
        },
    )?;
    write_json(&cfg.out, &format!("{stem}_table.json"), &table)?;
    if table.is_complete() {
        Ok(())
    } else {
        Err(Error::Degenerate(format!("{stem}: some ladder entries failed")))
    }
}

pub fn cmd_condnum(cfg: &RunConfig) -> Result<()> {
    write_json(&cfg.out, "config.json", cfg)?;
    let rows = condnum_table(&cfg.case, cfg.cond, cfg.max_iterations)?;
    let stem = &cfg.case.name;
    let mut f = create(&cfg.out, &format!("{stem}_condnum.csv"))?;
    write_condnum_csv(&rows, &mut f)?;
    f.flush()?;
    let fit = estimate_rate(&rows.iter().map(|r| (r.h, r.cond)).collect::<Vec<_>>()).ok();
    write_json(&cfg.out, &format!("{stem}_condnum.json"), &serde_json::json!({ "rows": rows, "fit": fit }))?;
    for r in &rows {
        println!("N={:>4} K2={:.4e} ({})", r.n, r.cond, r.status);
    }
    Ok(())
}

pub fn cmd_probe(args: &ProbeArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let norm = match args.norm {
        NormArg::L2 => BallNorm::L2,
        NormArg::H1 => BallNorm::H1,
    };
    let center = match args.center.as_slice() {
        [x, y] => [*x, *y],
        other => return Err(Error::InvalidConfig(format!("center needs two coordinates, got {other:?}"))),
    };
    let quad = PolarQuadrature::default();
    match args.kind {
        ProbeKind::Audit => {
            let report = lemma_audit(args.samples, args.seed)?;
            write_json(&out, "lemma_audit.json", &report)?;
            println!(
                "lemma audit: {} instances, {} violations, worst c/bound {:.6}; \
                 {} instances outside the premise ({} of them above the bound)",
                report.instances,
                report.violations,
                report.worst_ratio,
                report.premise_failures,
                report.raw_violations - report.violations
            );
            if report.violations > 0 {
                return Err(Error::Degenerate(format!("{} lemma violations", report.violations)));
            }
        }
        ProbeKind::Kappa => {
            let kappa = kappa_formula(args.r1, args.r2, args.r3, args.c3)?;
            write_json(
                &out,
                "kappa.json",
                &serde_json::json!({ "r1": args.r1, "r2": args.r2, "r3": args.r3, "c3": args.c3, "kappa": kappa }),
            )?;
            println!("{kappa}");
        }
        ProbeKind::Harmonic => {
            let report = harmonic_sweep(center, [args.r1, args.r2, args.r3], norm, args.c3, args.k_max, &quad)?;
            let mut f = create(&out, "harmonic.csv")?;
            writeln!(f, "k,ratio")?;
            for (k, r) in &report.ratios {
                writeln!(f, "{k},{r:.12e}")?;
            }
            f.flush()?;
            write_json(&out, "harmonic.json", &report)?;
            for (k, r) in &report.ratios {
                println!("k={k} ratio={r:.6}");
            }
            println!("bounded by calibrated constant {:.6}: {}", report.calibrated_constant, report.bounded);
        }
        ProbeKind::Fem => {
            let mut case = builtin_case(&args.case)?;
            if let Some(l) = &args.ladder {
                case.ladder = l.clone();
            }
            let kappa = kappa_formula(args.r1, args.r2, args.r3, args.c3)?;
            let config = ThreeBallConfig {
                center,
                r1: args.r1,
                r2: args.r2,
                r3: args.r3,
                norm,
                kappa,
            };
            let report = probe_fem_solution(&case, &config, &quad)?;
            let mut f = create(&out, "fem_probe.csv")?;
            writeln!(f, "N,ratio")?;
            for r in &report.rows {
                writeln!(f, "{},{:.12e}", r.n, r.ratio)?;
            }
            f.flush()?;
            write_json(&out, "fem_probe.json", &report)?;
            for r in &report.rows {
                println!("N={:>4} ratio={:.6}", r.n, r.ratio);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{CondRow, CONDNUM_HEADER};

    #[test]
    fn mesh_info_json() {
        let mut buf = Vec::new();
        cmd_mesh_info(8, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["nodes"], 81);
        assert!(matches!(cmd_mesh_info(0, &mut buf), Err(e) if exit_code(&e) == EXIT_CONFIG));
    }

    #[test]
    fn flags_override_defaults() {
        let args = RunArgs {
            case: Some("ex2-bnc".into()),
            ladder: Some(vec![4, 8]),
            noise: Some(NoiseArg::SqrtH),
            seed: Some(9),
            boundary_factor: Some(1.0),
            projection: Some(ProjectionArg::Nodal),
            quad_degree: Some(2),
            cond: Some(CondArg::Exact),
            ..RunArgs::default()
        };
        let cfg = args.resolve("convergence").unwrap();
        assert_eq!(cfg.case.name, "ex2-bnc");
        assert_eq!(cfg.case.ladder, vec![4, 8]);
        assert_eq!(cfg.case.noise.law, NoiseLaw::SqrtH);
        assert_eq!(cfg.case.noise.seed, 9);
        assert_eq!(cfg.case.boundary_factor, 1.0);
        assert_eq!(cfg.case.projection, Projection::Nodal);
        assert_eq!(cfg.case.quadrature, QuadDegree::Two);
        assert_eq!(cfg.cond, CondMode::Exact);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let bad = [
            RunArgs { quad_degree: Some(3), ..RunArgs::default() },
            RunArgs { case: Some("nope".into()), ..RunArgs::default() },
            RunArgs { ladder: Some(vec![0]), ..RunArgs::default() },
            RunArgs { boundary_factor: Some(-1.0), ..RunArgs::default() },
        ];
        for a in bad {
            let e = a.resolve("solve").unwrap_err();
            assert_eq!(exit_code(&e), EXIT_CONFIG, "{e}");
        }
    }

    #[test]
    fn config_file_with_inline_case() {
        let dir = tempfile::tempdir().unwrap();
        let mut case = builtin_case("ex1-bc").unwrap();
        case.name = "custom".into();
        case.mu = 2.0;
        let file = ConfigFile {
            case: Some(CaseRef::Inline(Box::new(case.clone()))),
            ladder: Some(vec![4]),
            ..ConfigFile::default()
        };
        let path = dir.path().join("cfg.json");
        fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let cfg = RunArgs { config: Some(path.clone()), ..RunArgs::default() }
            .resolve("solve")
            .unwrap();
        assert_eq!(cfg.case.name, "custom");
        assert_eq!(cfg.case.mu, 2.0);
        assert_eq!(cfg.case.ladder, vec![4]);

        fs::write(&path, "{ \"case\": 3 ").unwrap();
        let e = RunArgs { config: Some(path), ..RunArgs::default() }.resolve("solve").unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
    }

    #[test]
    fn condnum_csv_slopes() {
        let rows = vec![
            CondRow { n: 1, h: 0.5, cond: 10.0, lower: 10.0, upper: 10.0, status: "exact".into() },
            CondRow { n: 2, h: 0.25, cond: 80.0, lower: 80.0, upper: 80.0, status: "exact".into() },
        ];
        let mut buf = Vec::new();
        write_condnum_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CONDNUM_HEADER));
        assert!(text.trim_end().ends_with(",exact,-3.0000"), "{text}");
    }
}
