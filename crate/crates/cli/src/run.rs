//! Executes a parsed [`Config`] and writes its output directory.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use stefan_limit::benchmarks::{linear_heat_viscosity_sweep, stefan_number_map};
use stefan_limit::grid::{dictionary_lattice, read_initial_row, Grid1D, SpaceTimeField, Window};
use stefan_limit::limit_analysis::{
    build_report, solve_sweep, EpsilonSweep, SweepReport, SweepRun,
};
use stefan_limit::nonlinearity::{Epsilon, NonlinearitySpec};
use stefan_limit::presets::{self, Scenario, NEUMANN_T0};
use stefan_limit::solver::{solve, Boundary, BoundarySpec, NewtonStats};
use stefan_limit::stefan_verify::{
    clause_verdicts, extract_waiting_time, front_flux_check, front_position, latent_heat_of,
    limit_checks, FrontParams, LimitChecks, Status,
};
use stefan_limit::transforms::{w_equation_residual, TransformedRun};
use toml::{Table, Value};

use crate::config::{BenchmarkKind, Command, Config, DataSpec, FieldOutput, Side};
use crate::output::{cell, OutDir, MANIFEST};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Inputs that parse but cannot be run (exit code 2).
    #[error("{0}")]
    Config(String),
    /// Failure inside the numerics (exit code 3).
    #[error(transparent)]
    Solver(#[from] stefan_limit::Error),
    /// Filesystem failure (exit code 3).
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) | RunError::Io { .. } => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

/// What a finished command reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// Human-readable summary, also printed unless `--quiet`.
    pub lines: Vec<String>,
    pub out_dir: PathBuf,
}

/// Window covering the middle of the grid: `x` trimmed by an eighth of the
/// length on each side, `t ∈ [0.1, 0.9] t_end`.
fn interior_window(g: &Grid1D) -> Window {
    let len = g.x_hi() - g.x_lo();
    Window::new(
        g.x_lo() + 0.125 * len,
        g.x_hi() - 0.125 * len,
        0.1 * g.t_end(),
        0.9 * g.t_end(),
    )
}

fn side_of(b: &Boundary) -> Side {
    match b {
        Boundary::NeumannZero => Side::Neumann,
        Boundary::Dirichlet(trace) => Side::Dirichlet(trace.at(0.0)),
    }
}

fn boundary_of(s: Side) -> Boundary {
    match s {
        Side::Neumann => Boundary::NeumannZero,
        Side::Dirichlet(v) => Boundary::dirichlet_const(v),
    }
}

/// Builds the scenario and fills every preset-derived option of `cfg`
/// (`lambda`, `boundary`, `window`, absolute CSV path) so the returned config
/// reproduces the run on its own. Relative paths are taken from `base_dir`.
pub fn resolve(cfg: &Config, base_dir: &Path) -> Result<(Config, Scenario), RunError> {
    let g = &cfg.grid;
    let grid = Grid1D::new(g.x_lo, g.x_hi, g.n_cells, g.t_end, g.n_steps).map_err(config_err)?;
    let mut cfg = cfg.clone();
    let mut sc = match &cfg.data {
        DataSpec::Constant { value } => presets::constant(grid, *value),
        DataSpec::Step { left, right, width } => {
            presets::step(grid, *left, *right, *width).map_err(config_err)?
        }
        DataSpec::Tent { peak, half_width } => {
            presets::tent_preset(grid, *peak, *half_width).map_err(config_err)?
        }
        DataSpec::Melting { hot, w0, width } => {
            presets::melting(grid, *hot, *w0, *width).map_err(config_err)?
        }
        DataSpec::Positive => presets::positive(grid),
        DataSpec::Neumann { u_b, w0 } => {
            presets::neumann(g.n_cells, g.n_steps, g.t_end, *u_b, *w0).map_err(config_err)?
        }
        DataSpec::Csv { path } => {
            let path = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            let file = File::open(&path)
                .map_err(|e| config_err(format!("data.path {}: {e}", path.display())))?;
            let u0 = read_initial_row(grid, BufReader::new(file))
                .map_err(|e| config_err(format!("data.path {}: {e}", path.display())))?;
            let lambda = u0.sup_norm().max(1e-12);
            cfg.data = DataSpec::Csv {
                path: path.canonicalize().unwrap_or(path),
            };
            Scenario {
                name: "csv".into(),
                grid,
                u0,
                bc: BoundarySpec::neumann(),
                lambda,
                window: interior_window(&grid),
                neumann: None,
            }
        }
    };
    if sc.neumann.is_none() {
        sc.window = interior_window(&grid);
    }
    if let Some(l) = cfg.lambda {
        sc.lambda = l;
    }
    if let Some([l, r]) = cfg.boundary {
        sc.bc = BoundarySpec::new(boundary_of(l), boundary_of(r));
    }
    if let Some(w) = cfg.window {
        sc.window = w;
    }
    if !sc.window.is_strictly_inside(&grid) {
        return Err(config_err(
            "window must lie strictly inside the space-time domain",
        ));
    }
    // ProblemSpec validation: lambda vs data, traces vs data
    sc.problem(
        Epsilon::new(cfg.epsilon).map_err(config_err)?,
        NonlinearitySpec::zero(),
    )
    .map_err(config_err)?;
    cfg.lambda = Some(sc.lambda);
    cfg.boundary = Some([side_of(&sc.bc.left), side_of(&sc.bc.right)]);
    cfg.window = Some(sc.window);
    Ok((cfg, sc))
}

fn reaction(cfg: &Config, sc: &Scenario) -> Result<NonlinearitySpec, RunError> {
    NonlinearitySpec::new(cfg.reaction.clone(), sc.lambda).map_err(config_err)
}

fn write_field(out: &OutDir, name: &str, field: &SpaceTimeField) -> Result<(), RunError> {
    out.write_with(name, |w| field.write_csv(w))
}

fn stats_table(eps: &[f64], stats: &[NewtonStats]) -> Table {
    let mut t = Table::new();
    let ints = |f: fn(&NewtonStats) -> usize| {
        Value::Array(stats.iter().map(|s| Value::Integer(f(s) as i64)).collect())
    };
    t.insert(
        "epsilons".into(),
        Value::Array(eps.iter().map(|&e| Value::Float(e)).collect()),
    );
    t.insert("newton_steps".into(), ints(|s| s.steps));
    t.insert(
        "newton_total_iterations".into(),
        ints(|s| s.total_iterations),
    );
    t.insert("newton_max_iterations".into(), ints(|s| s.max_iterations));
    t.insert(
        "newton_max_residual".into(),
        Value::Array(stats.iter().map(|s| Value::Float(s.max_residual)).collect()),
    );
    t
}

fn write_manifest(
    out: &OutDir,
    cfg: &Config,
    mut info: Table,
    started: Instant,
) -> Result<(), RunError> {
    let mut root = cfg.to_table();
    info.insert(
        "version".into(),
        Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    info.insert(
        "wall_time_s".into(),
        Value::Float(started.elapsed().as_secs_f64()),
    );
    info.insert(
        "threads".into(),
        Value::Integer(rayon::current_num_threads() as i64),
    );
    root.insert("manifest".into(), Value::Table(info));
    let text = toml::to_string(&root).map_err(config_err)?;
    out.write_str(
        MANIFEST,
        &format!("# Re-run with: stefan-limit --config {MANIFEST}\n{text}"),
    )
}

/// Runs `cfg` (already resolved or not) into `out_dir`. `base_dir` anchors
/// relative data paths.
pub fn run(cfg: &Config, base_dir: &Path, out_dir: &Path) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let (mut cfg, sc) = resolve(cfg, base_dir)?;
    cfg.out = out_dir.to_path_buf();
    let out = OutDir::create(out_dir)?;
    let (passed, lines, info) = match cfg.command {
        Command::Solve => run_solve(&cfg, &sc, &out)?,
        Command::Sweep => run_sweep_cmd(&cfg, &sc, &out, false)?,
        Command::Verify => run_sweep_cmd(&cfg, &sc, &out, true)?,
        Command::Benchmark => match cfg.benchmark.expect("validated with the command") {
            BenchmarkKind::Neumann => run_neumann(&cfg, &sc, &out)?,
            BenchmarkKind::LinearHeat => run_linear_heat(&cfg, &sc, &out)?,
        },
    };
    write_manifest(&out, &cfg, info, started)?;
    let out_dir = out.commit()?;
    Ok(Outcome {
        passed,
        lines,
        out_dir,
    })
}

type CommandResult = Result<(bool, Vec<String>, Table), RunError>;

fn run_solve(cfg: &Config, sc: &Scenario, out: &OutDir) -> CommandResult {
    let f = reaction(cfg, sc)?;
    let eps = Epsilon::new(cfg.epsilon).map_err(config_err)?;
    let spec = sc.problem(eps, f.clone()).map_err(config_err)?;
    let run = solve(&spec, &cfg.newton)?;
    let tr =
        TransformedRun::at_time(&run.u, eps, &f, cfg.shift, cfg.time_rule).map_err(config_err)?;
    write_field(out, "u.csv", &run.u)?;
    write_field(out, "u.v.csv", &tr.v)?;
    write_field(out, "u.w.csv", &tr.w)?;
    write_field(out, "u.g.csv", &tr.g)?;

    let delta = cfg.delta.delta(cfg.epsilon);
    let fb = extract_waiting_time(&run.u, delta, eps)?;
    let wl = latent_heat_of(&run.u, &fb, &f)?;
    let grid = spec.grid;
    out.write_with("waiting_time.csv", |w| {
        writeln!(w, "x,T,W")?;
        for (i, t) in fb.waiting_times().iter().enumerate() {
            writeln!(w, "{},{},{}", grid.x(i), cell(*t), wl.values[i])?;
        }
        Ok(())
    })?;
    let residual = w_equation_residual(&tr);
    let violations = tr.invariant_violations(sc.lambda, f.lipschitz_bound(), 1e-9);
    out.write_with("transform.csv", |w| {
        writeln!(w, "key,value")?;
        writeln!(w, "shift_level,{}", tr.h_level)?;
        writeln!(w, "time_rule,{}", tr.rule.name())?;
        writeln!(w, "w_equation_residual,{residual}")?;
        writeln!(w, "invariant_violations,{}", violations.len())
    })?;
    let mut lines = vec![
        format!(
            "solved {} steps at eps = {}, {} Newton iterations (max {} per step)",
            run.stats.steps, cfg.epsilon, run.stats.total_iterations, run.stats.max_iterations
        ),
        format!(
            "w-equation residual ({} rule): {residual:e}",
            tr.rule.name()
        ),
    ];
    lines.extend(violations.into_iter().map(|v| format!("invariant: {v}")));
    Ok((true, lines, stats_table(&[cfg.epsilon], &[run.stats])))
}

fn build_sweep(cfg: &Config, sc: &Scenario) -> Result<EpsilonSweep, RunError> {
    let f = reaction(cfg, sc)?;
    let base = sc
        .problem(Epsilon::new(cfg.epsilons[0]).map_err(config_err)?, f)
        .map_err(config_err)?;
    let dict = dictionary_lattice(&sc.window, cfg.dictionary_per_axis, &cfg.dictionary_radii)
        .map_err(config_err)?;
    EpsilonSweep::new(base, cfg.epsilons.clone(), sc.window)
        .and_then(|s| s.with_dictionary(dict))
        .map(|s| s.with_delta(cfg.delta))
        .map_err(config_err)
}

fn write_sweep_tables(cfg: &Config, report: &SweepReport, out: &OutDir) -> Result<(), RunError> {
    let eps = report.epsilons();
    let n = report.runs.len();
    for (k, run) in report.runs.iter().enumerate() {
        let keep = match cfg.fields {
            FieldOutput::All => true,
            FieldOutput::Finest => k + 1 == n,
            FieldOutput::None => false,
        };
        if keep {
            write_field(out, &format!("u_eps{k}.csv"), &run.u)?;
        }
    }
    out.write_with("cauchy.csv", |w| {
        writeln!(w, "eps_k,eps_k1,sup_diff_positive_part")?;
        for (k, d) in report.cauchy_sup.iter().enumerate() {
            writeln!(w, "{},{},{d}", eps[k], eps[k + 1])?;
        }
        Ok(())
    })?;
    let header = |w: &mut dyn Write, first: &str| -> std::io::Result<()> {
        write!(w, "{first}")?;
        for e in &eps {
            write!(w, ",{e}")?;
        }
        writeln!(w)
    };
    out.write_with("pairing.csv", |w| {
        header(w, "phi")?;
        for (k, row) in report.pairing_table.iter().enumerate() {
            write!(w, "{k}")?;
            for x in row {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.write_with("dictionary.csv", |w| {
        writeln!(w, "index,x_c,t_c,r_x,r_t")?;
        for (k, d) in report.dictionary.iter().enumerate() {
            writeln!(w, "{k},{},{},{},{}", d.x_c, d.t_c, d.r_x, d.r_t)?;
        }
        Ok(())
    })?;
    let gr = &report.gradient;
    out.write_with("gradient.csv", |w| {
        writeln!(w, "eps,energy,identity_residual,distance_to_finest")?;
        for k in 0..n {
            writeln!(
                w,
                "{},{},{},{}",
                eps[k], gr.energy[k], gr.identity_residual[k], gr.distance_to_finest[k]
            )?;
        }
        Ok(())
    })?;
    out.write_with("ode.csv", |w| {
        writeln!(w, "eps,negative_ode_residual")?;
        for (e, r) in eps.iter().zip(&report.ode_residuals) {
            writeln!(w, "{e},{}", cell(*r))?;
        }
        Ok(())
    })
}

fn write_checks(report: &SweepReport, checks: &LimitChecks, out: &OutDir) -> Result<(), RunError> {
    let eps = report.epsilons();
    let grid = *report.grid();
    out.write_with("positivity.csv", |w| {
        writeln!(
            w,
            "eps,delta,vacuous,monotonicity_violations,omega,frozen,layer,layer_volume"
        )?;
        for (k, fb) in checks.boundaries.iter().enumerate() {
            let c = fb.class_counts();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                eps[k],
                checks.deltas[k],
                checks.vacuous[k],
                checks.violations[k],
                c.omega,
                c.frozen,
                c.layer,
                c.layer_volume
            )?;
        }
        Ok(())
    })?;
    let per_node = |name: &str, value: &dyn Fn(usize, usize) -> String| {
        out.write_with(name, |w| {
            write!(w, "x")?;
            for e in &eps {
                write!(w, ",{e}")?;
            }
            writeln!(w)?;
            for i in 0..grid.n_nodes() {
                write!(w, "{}", grid.x(i))?;
                for k in 0..eps.len() {
                    write!(w, ",{}", value(k, i))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    };
    per_node("waiting_time.csv", &|k, i| {
        cell(checks.boundaries[k].waiting_time(i))
    })?;
    per_node("latent_heat.csv", &|k, i| {
        checks.latent_heat[k].values[i].to_string()
    })?;
    out.write_with("stefan_residual.csv", |w| {
        write!(w, "eta")?;
        for e in &eps {
            write!(w, ",{e}")?;
        }
        writeln!(w)?;
        for (k, row) in checks.stefan_residuals.iter().enumerate() {
            write!(w, "{k}")?;
            for x in row {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn run_sweep_cmd(cfg: &Config, sc: &Scenario, out: &OutDir, verify: bool) -> CommandResult {
    let sweep = build_sweep(cfg, sc)?;
    let runs: Vec<SweepRun> = solve_sweep(&sweep, &cfg.newton)?;
    let stats: Vec<NewtonStats> = runs.iter().map(|r| r.stats).collect();
    let report = build_report(&sweep, runs)?;
    write_sweep_tables(cfg, &report, out)?;
    let info = stats_table(&cfg.epsilons, &stats);
    let mut lines = vec![format!(
        "swept {} values of eps, final cauchy_sup {:e}",
        cfg.epsilons.len(),
        report.cauchy_sup.last().copied().unwrap_or(0.0)
    )];
    if !verify {
        return Ok((true, lines, info));
    }
    let checks = limit_checks(&report)?;
    write_checks(&report, &checks, out)?;
    let verdict = clause_verdicts(&report, &checks, &cfg.checks.clauses);
    let text: String = verdict.iter().map(|c| format!("{c}\n")).collect();
    out.write_str("verdict.txt", &text)?;
    let failing: Vec<&str> = verdict
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.clause)
        .collect();
    lines.extend(verdict.iter().map(|c| c.to_string()));
    if !failing.is_empty() {
        lines.push(format!("failing clauses: {}", failing.join(", ")));
    }
    Ok((failing.is_empty(), lines, info))
}

fn check_line(name: &str, ok: bool, value: f64, threshold: f64) -> String {
    let tag = if ok { "PASS" } else { "FAIL" };
    format!("{name}: {tag} {value} {threshold}")
}

fn run_neumann(cfg: &Config, sc: &Scenario, out: &OutDir) -> CommandResult {
    let sol = sc.neumann.expect("neumann preset");
    let f = reaction(cfg, sc)?;
    let eps = Epsilon::new(cfg.epsilon).map_err(config_err)?;
    let spec = sc.problem(eps, f.clone()).map_err(config_err)?;
    let run = solve(&spec, &cfg.newton)?;
    let grid = spec.grid;
    let exact = SpaceTimeField::from_fn(grid, |x, t| sol.initial_profile(x, t + NEUMANN_T0));
    write_field(out, "u.csv", &run.u)?;
    write_field(out, "u_exact.csv", &exact)?;

    let delta = cfg.delta.delta(cfg.epsilon);
    let fb = extract_waiting_time(&run.u, delta, eps)?;
    let wl = latent_heat_of(&run.u, &fb, &f)?;
    let fronts = front_flux_check(
        &run.u,
        &fb,
        &wl,
        FrontParams::spanning(&grid, cfg.checks.front_span),
    )?;
    let mut front_err = 0.0f64;
    let mut missing = 0usize;
    out.write_with("front.csv", |w| {
        writeln!(
            w,
            "t,s_numeric,s_exact,speed_numeric,speed_exact,gradient,latent_heat,flux_mismatch"
        )?;
        for n in 0..grid.n_levels() {
            let t = grid.t(n);
            let s_exact = sol.front(t + NEUMANN_T0);
            let s_num = front_position(run.u.row(n), &grid, delta).map(|p| p.0);
            match s_num {
                Some(s) => front_err = front_err.max((s - s_exact).abs()),
                None => missing += 1,
            }
            writeln!(
                w,
                "{t},{},{s_exact},{},{},{},{},{}",
                cell(s_num),
                cell(fronts.speed[n]),
                sol.front_speed(t + NEUMANN_T0),
                cell(fronts.gradient[n]),
                cell(fronts.latent_heat[n]),
                cell(fronts.mismatch[n])
            )?;
        }
        Ok(())
    })?;

    let root = (stefan_number_map(sol.lambda) - sol.u_b / sol.w0).abs();
    let allowance = 0.05f64.max(3.0 * grid.h() + 2.0 * cfg.epsilon.sqrt());
    let t_end = grid.t_end();
    let mismatch = fronts
        .max_mismatch_between(0.25 * t_end, 0.75 * t_end)
        .unwrap_or(f64::INFINITY);
    let checks = [
        check_line("lambda_root_residual", root <= 1e-12, root, 1e-12),
        check_line(
            "front_error",
            missing == 0 && front_err <= allowance,
            front_err,
            allowance,
        ),
        check_line(
            "flux_mismatch_mid",
            mismatch <= cfg.checks.flux_mismatch,
            mismatch,
            cfg.checks.flux_mismatch,
        ),
    ];
    let passed = checks.iter().all(|l| l.contains(": PASS"));
    let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
    out.write_str("benchmark.txt", &text)?;
    let mut lines = vec![format!("neumann lambda = {}", sol.lambda)];
    lines.extend(checks);
    Ok((passed, lines, stats_table(&[cfg.epsilon], &[run.stats])))
}

fn run_linear_heat(cfg: &Config, sc: &Scenario, out: &OutDir) -> CommandResult {
    let d = linear_heat_viscosity_sweep(&sc.u0, &cfg.epsilons, &sc.window)?;
    out.write_with("distances.csv", |w| {
        writeln!(w, "eps,sup_distance")?;
        for (e, x) in cfg.epsilons.iter().zip(&d) {
            writeln!(w, "{e},{x}")?;
        }
        Ok(())
    })?;
    let decreasing = d.windows(2).all(|p| p[1] < p[0]);
    let last = *d.last().expect("at least two values");
    let checks = [
        check_line(
            "strictly_decreasing",
            decreasing,
            if decreasing { 1.0 } else { 0.0 },
            1.0,
        ),
        check_line(
            "final_distance",
            last <= cfg.checks.final_distance,
            last,
            cfg.checks.final_distance,
        ),
    ];
    let passed = checks.iter().all(|l| l.contains(": PASS"));
    let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
    out.write_str("benchmark.txt", &text)?;
    Ok((passed, checks.to_vec(), Table::new()))
}
