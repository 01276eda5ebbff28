use std::fs::File;
use std::path::{Path, PathBuf};

use bellman_grid::calculus::{mixed_difference_bound_slack, verify_identities, GridFunction, Step};
use bellman_grid::decomp2d::{decompose, read_field_csv, reconstruct, write_field_csv, DecompError, Matrix2};
use bellman_grid::estimates::{
    boundedness_study, conjugation_residual, convergence_study, Caveat, EstimateError, StudySettings, Weights,
};
use bellman_grid::lattice::{DirectionSet, DomainShape, Node, StencilDomain, TimeGrid};
use bellman_grid::problem::{
    catalog, spanning_split, validate_assumptions, Assumption, ControlProblem, Status, TabulatedCoefficients,
};
use bellman_grid::solver::{sample_data, solve_elliptic, solve_parabolic, SolveConfig, SolveError, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig, ProblemSpec, TabulatedSpec};
use crate::report::{self, ConjugationCase, IdentityCase, MixedCase, Report, Results, RunStatus, SCHEMA_VERSION};
use crate::{CliError, Outcome, RunOptions};

fn solve_err(e: SolveError) -> CliError {
    match e {
        SolveError::NotConverged { .. } | SolveError::NotStationary(_) => CliError::NotConverged(e.to_string()),
        other => CliError::Run(other.to_string()),
    }
}

fn estimate_err(e: EstimateError) -> CliError {
    match e {
        EstimateError::Solve(s) => solve_err(s),
        other => CliError::Run(other.to_string()),
    }
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// A problem with its domain and data at one mesh.
struct Setup {
    name: String,
    problem: ControlProblem<f64>,
    domain: StencilDomain<f64>,
    data: GridFunction<f64>,
    exact: Option<GridFunction<f64>>,
    elliptic: bool,
}

fn setup(spec: &ProblemSpec, h: f64, tau: f64) -> Result<Setup, CliError> {
    match spec {
        ProblemSpec::Catalog(name) => {
            let entry = catalog::get::<f64>(name).map_err(|e| CliError::Config(e.to_string()))?;
            let domain = entry.domain(h, tau).map_err(run_err)?;
            let data = sample_data(&domain, |t, x| (entry.data)(t, x));
            let exact = entry.solution.as_ref().map(|s| sample_data(&domain, |t, x| s(t, x)));
            Ok(Setup {
                name: name.clone(),
                problem: entry.problem,
                domain,
                data,
                exact,
                elliptic: entry.elliptic,
            })
        }
        ProblemSpec::Tabulated(t) => tabulated(t, h, tau),
    }
}

fn tabulated(t: &TabulatedSpec, h: f64, tau: f64) -> Result<Setup, CliError> {
    let constants = t.constants.unwrap_or_default();
    let dim = t.lo.len();
    if t.hi.len() != dim {
        return Err(CliError::Config("`lo` and `hi` differ in length".into()));
    }
    let time = TimeGrid::new(tau, constants.horizon).map_err(run_err)?;
    let coefficients =
        TabulatedCoefficients::load(&t.dir, t.ells.len(), t.controls, dim, h, time).map_err(run_err)?;
    let problem = ControlProblem::new("tabulated", coefficients).with_constants(constants);
    let dirs = DirectionSet::new(dim, t.ells.clone(), h, constants.h0).map_err(run_err)?;
    let top = time.terminal_level().saturating_sub(1);
    let shape = DomainShape::Box {
        levels: (0, top),
        lo: t.lo.clone(),
        hi: t.hi.clone(),
    };
    let domain = StencilDomain::build(dirs, time, &shape).map_err(run_err)?;
    let file = File::open(&t.data).map_err(|e| CliError::Io(format!("{}: {e}", t.data.display())))?;
    let data = GridFunction::read_csv(file).map_err(run_err)?;
    Ok(Setup {
        name: "tabulated".into(),
        problem,
        domain,
        data,
        exact: None,
        elliptic: false,
    })
}

fn solve(s: &Setup, cfg: &SolveConfig<f64>) -> Result<SolveReport<f64>, CliError> {
    let report = if s.elliptic {
        solve_elliptic(&s.problem, &s.domain, &s.data, cfg)
    } else {
        solve_parabolic(&s.problem, &s.domain, &s.data, cfg)
    }
    .map_err(solve_err)?;
    if !report.converged {
        return Err(CliError::NotConverged(format!("residual {}", report.max_residual)));
    }
    Ok(report)
}

/// Nodes of `[-n, n]^dim` on `levels` levels.
fn cube(dim: usize, n: i64, levels: u32) -> Vec<Node> {
    let side = (2 * n + 1) as usize;
    let count = side.pow(dim as u32);
    (0..levels)
        .flat_map(|level| {
            (0..count).map(move |mut i| {
                let x: Vec<i64> = (0..dim)
                    .map(|_| {
                        let c = (i % side) as i64 - n;
                        i /= side;
                        c
                    })
                    .collect();
                Node::new(level, x)
            })
        })
        .collect()
}

fn random_step(rng: &mut ChaCha8Rng, dim: usize, nu: f64) -> Step<f64> {
    loop {
        let l: Vec<i64> = (0..dim).map(|_| rng.gen_range(-1..=1)).collect();
        if l.iter().any(|&c| c != 0) {
            return Step::new(l, nu);
        }
    }
}

fn verify(trials: usize, dims: &[usize], ms: &[f64], taus: &[f64], seed: u64) -> Result<Results, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for i in 0..trials {
        let dim = dims[i % dims.len()];
        let nodes = cube(dim, 2, 1);
        let kinked = i % 2 == 1;
        let kink = rng.gen_range(-2..=2);
        let slope = rng.gen_range(-3.0..3.0);
        let a = GridFunction::from_fn(&nodes, |_| rng.gen_range(-5.0..5.0));
        let psi = GridFunction::from_fn(&nodes, |n| {
            let ridge = if kinked { slope * (n.x[0] - kink).abs() as f64 } else { 0.0 };
            rng.gen_range(-5.0..5.0) + ridge
        });
        let nu = 1.0 - rng.gen_range(0.0..1.0);
        let s1 = random_step(&mut rng, dim, nu);
        let s2 = random_step(&mut rng, dim, nu);
        let r = verify_identities(&a, &psi, &s1, &s2, None).map_err(run_err)?;
        cases.push(IdentityCase {
            dim,
            nu,
            kinked,
            product_rules: r.product_rules,
            laplace_bound_slack: r.laplace_bound_slack,
        });
    }

    let ells = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]];
    let mut mixed = Vec::with_capacity(trials);
    for _ in 0..trials {
        let h = rng.gen_range(0.05..1.0);
        let dirs = DirectionSet::new(2, ells.clone(), h, 1.0).map_err(run_err)?;
        let d0 = spanning_split(&dirs).ok_or_else(|| run_err("direction set is not spanned"))?.d0;
        let nodes = cube(2, 4, 1);
        let phi = GridFunction::from_fn(&nodes, |_| rng.gen_range(-5.0..5.0));
        let slack = mixed_difference_bound_slack(&phi, &dirs, d0).map_err(run_err)?;
        mixed.push(MixedCase { h, slack });
    }

    let mut conjugation = Vec::new();
    for &m in ms {
        for &tau in taus {
            let time = TimeGrid::new(tau, 1.0).map_err(run_err)?;
            let w = Weights::new(m, &time);
            let nodes = cube(1, 1, time.terminal_level() + 1);
            let mut worst = 0.0f64;
            for _ in 0..trials {
                let u = GridFunction::from_fn(&nodes, |_| rng.gen_range(-5.0..5.0));
                let xi_max = (0..=time.terminal_level()).map(|l| w.xi(l)).fold(0.0, f64::max);
                let scale = 1.0 + xi_max * u.max_abs() / tau;
                for n in nodes.iter().filter(|n| n.level < time.terminal_level()) {
                    let r = conjugation_residual(&u, &time, &w, n).map_err(run_err)?;
                    worst = worst.max(r.abs() / scale);
                }
            }
            conjugation.push(ConjugationCase {
                m,
                tau,
                scaled_residual: worst,
            });
        }
    }
    Ok(Results::VerifyIdentities {
        cases,
        mixed,
        conjugation,
    })
}

fn decomp_err(e: DecompError) -> CliError {
    match e {
        DecompError::NotDominant { .. } | DecompError::Asymmetric { .. } | DecompError::NegativeDiagonal { .. } => {
            CliError::Assumption(e.to_string())
        }
        other => CliError::Run(other.to_string()),
    }
}

/// Runs the experiment at `path`.
pub fn run(path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = ExperimentConfig::parse(&text, base)?;
    run_config(&cfg, &text, opts)
}

/// Runs a parsed config; `text` is what the manifest hash is taken of.
pub fn run_config(cfg: &ExperimentConfig, text: &str, opts: &RunOptions) -> Result<Outcome, CliError> {
    let out: PathBuf = opts
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("missing field `out` (or pass --out)".into()))?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut status = RunStatus::Ok;
    let mut tables = Vec::new();
    let mut extra: Vec<&str> = Vec::new();

    let results = match &cfg.experiment {
        Experiment::Solve { problem, h, tau, solver } => {
            let s = setup(problem, *h, *tau)?;
            let r = solve(&s, solver)?;
            let sup_error = s.exact.as_ref().map(|e| r.u.axpy(-1.0, e).max_abs());
            let dim = s.domain.directions().dim();
            r.u.write_csv(report::create(&out, "solution.csv")?, dim).map_err(run_err)?;
            extra.push("solution.csv");
            Results::Solve {
                problem: s.name,
                h: *h,
                tau: *tau,
                unknowns: r.levels.iter().map(|l| l.unknowns).sum(),
                levels: r.levels,
                max_residual: r.max_residual,
                monotone: r.monotone,
                sup_error,
            }
        }
        Experiment::VerifyIdentities { trials, dims, ms, taus } => verify(*trials, dims, ms, taus, seed)?,
        Experiment::ValidateAssumptions {
            problem,
            h,
            tau,
            assumptions,
            samples,
        } => {
            let s = setup(problem, *h, *tau)?;
            let which: Vec<Assumption> = assumptions.clone().unwrap_or_else(|| Assumption::ALL.to_vec());
            let validation = validate_assumptions(&s.problem, &s.domain, &which, *samples, seed);
            if validation.checks.iter().any(|c| c.status == Status::Fail) {
                status = RunStatus::AssumptionsUnmet;
            }
            Results::ValidateAssumptions { validation }
        }
        Experiment::EstimateStudy {
            problem,
            theorem,
            ladder,
            tau,
            solver,
            samples,
            lambda_margin,
        } => {
            let entry = catalog::get::<f64>(problem).map_err(|e| CliError::Config(e.to_string()))?;
            let settings = StudySettings {
                tau: *tau,
                solve: *solver,
                samples: *samples,
                seed,
                lambda_margin: *lambda_margin,
            };
            let (table, reports) = boundedness_study(&entry, *theorem, ladder, &settings).map_err(estimate_err)?;
            if reports
                .iter()
                .any(|r| r.caveats.iter().any(|c| matches!(c, Caveat::AssumptionsUnmet(_))))
            {
                status = RunStatus::AssumptionsUnmet;
            }
            tables.push(table);
            Results::EstimateStudy {
                problem: problem.clone(),
                theorem: *theorem,
                reports,
            }
        }
        Experiment::Convergence {
            problem,
            ladder,
            tau,
            solver,
        } => {
            let entry = catalog::get::<f64>(problem).map_err(|e| CliError::Config(e.to_string()))?;
            let table = convergence_study(&entry, ladder, |h| tau.at(h), solver).map_err(estimate_err)?;
            tables.push(table);
            Results::Convergence {
                problem: problem.clone(),
            }
        }
        Experiment::Decompose { input, rows, psi } => {
            let (points, field): (Vec<Vec<f64>>, Vec<Matrix2<f64>>) = match (input, rows) {
                (Some(path), _) => {
                    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    read_field_csv(file).map_err(decomp_err)?
                }
                (None, Some(rows)) => {
                    let mut points = Vec::new();
                    let mut field = Vec::new();
                    for (i, row) in rows.iter().enumerate() {
                        if row.len() < 3 {
                            return Err(CliError::Config(format!("row {i} needs a11, a12, a22")));
                        }
                        let dim = row.len() - 3;
                        points.push(row[..dim].to_vec());
                        field.push([[row[dim], row[dim + 1]], [row[dim + 1], row[dim + 2]]]);
                    }
                    (points, field)
                }
                (None, None) => unreachable!("checked when parsing"),
            };
            let d = decompose(points, &field, *psi).map_err(decomp_err)?;
            let back = reconstruct(&d);
            let max_reconstruction_error = field
                .iter()
                .zip(&back)
                .flat_map(|(a, b)| (0..4).map(move |i| (a[i / 2][i % 2] - b[i / 2][i % 2]).abs()))
                .fold(0.0, f64::max);
            let min_coefficient = d.coeffs.iter().flat_map(|c| c.values()).reduce(f64::min);
            write_field_csv(report::create(&out, "decomposed.csv")?, &d).map_err(decomp_err)?;
            extra.push("decomposed.csv");
            Results::Decompose {
                points: d.points,
                coefficients: d.coeffs,
                max_reconstruction_error,
                min_coefficient,
            }
        }
    };

    let rep = Report {
        schema_version: SCHEMA_VERSION,
        kind: cfg.experiment.kind().to_string(),
        seed,
        status,
        results,
        tables,
    };
    let files = report::emit_report(&out, &rep, text, &extra)?;
    Ok(Outcome { status, out, files })
}
