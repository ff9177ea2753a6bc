//! Flat TOML configuration: parsing, validation and the resolved form that is
//! written back out as the run manifest.

use std::path::PathBuf;

use stefan_limit::grid::Window;
use stefan_limit::limit_analysis::{default_epsilons, DeltaRule};
use stefan_limit::nonlinearity::{Epsilon, NonlinearityKind};
use stefan_limit::solver::NewtonParams;
use stefan_limit::stefan_verify::{Thresholds, DEFAULT_FRONT_SPAN};
use stefan_limit::transforms::TimeRule;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Verify,
    Benchmark,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Benchmark => "benchmark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_cells: usize,
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Constant { value: f64 },
    Step { left: f64, right: f64, width: f64 },
    Tent { peak: f64, half_width: f64 },
    Melting { hot: f64, w0: f64, width: f64 },
    Positive,
    Neumann { u_b: f64, w0: f64 },
    Csv { path: PathBuf },
}

impl DataSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DataSpec::Constant { .. } => "constant",
            DataSpec::Step { .. } => "step",
            DataSpec::Tent { .. } => "tent",
            DataSpec::Melting { .. } => "melting",
            DataSpec::Positive => "positive",
            DataSpec::Neumann { .. } => "neumann",
            DataSpec::Csv { .. } => "csv",
        }
    }
}

/// One end of the interval. Dirichlet traces are constant in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    Neumann,
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Neumann,
    LinearHeat,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Neumann => "neumann",
            BenchmarkKind::LinearHeat => "linear_heat",
        }
    }
}

/// Which per-ε field CSVs a sweep writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOutput {
    All,
    Finest,
    None,
}

impl FieldOutput {
    pub fn name(self) -> &'static str {
        match self {
            FieldOutput::All => "all",
            FieldOutput::Finest => "finest",
            FieldOutput::None => "none",
        }
    }
}

/// Pass/fail thresholds beyond the clause verdict defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checks {
    pub clauses: Thresholds,
    /// Relative flux mismatch allowed by the Neumann benchmark.
    pub flux_mismatch: f64,
    /// Time span of the front smoothing window.
    pub front_span: f64,
    /// Largest final sup distance accepted by the linear-heat benchmark.
    pub final_distance: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            clauses: Thresholds::default(),
            flux_mismatch: 0.10,
            front_span: DEFAULT_FRONT_SPAN,
            final_distance: 0.05,
        }
    }
}

/// A fully validated configuration. Options are filled in by
/// [`crate::run::resolve`] from the chosen preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub command: Command,
    pub grid: GridParams,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub reaction: NonlinearityKind,
    pub data: DataSpec,
    pub lambda: Option<f64>,
    pub boundary: Option<[Side; 2]>,
    pub window: Option<Window>,
    pub delta: DeltaRule,
    pub dictionary_per_axis: usize,
    pub dictionary_radii: Vec<f64>,
    pub checks: Checks,
    pub newton: NewtonParams,
    pub shift: f64,
    pub time_rule: TimeRule,
    pub fields: FieldOutput,
    pub out: PathBuf,
    pub parallelism: usize,
    pub benchmark: Option<BenchmarkKind>,
}

/// Every problem found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: &[&str] = &[
    "grid",
    "epsilon",
    "reaction",
    "data",
    "boundary",
    "window",
    "delta",
    "dictionary",
    "thresholds",
    "newton",
    "transform",
    "output",
    "run",
    "benchmark",
    "manifest",
];

/// Reads keys out of one section, remembering problems instead of stopping.
struct Section<'e> {
    name: &'static str,
    table: Table,
    errors: &'e mut Vec<String>,
}

impl<'e> Section<'e> {
    fn key(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        let k = self.key(key);
        self.errors.push(format!("`{k}`: {msg}"));
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        match self.table.remove(key)? {
            Value::Float(x) => Some(x),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.err(
                    key,
                    format!("expected a number, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.f64(key).unwrap_or(default)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.table.remove(key) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as usize,
            Some(Value::Integer(i)) => {
                self.err(key, format!("{i} must be >= 0"));
                default
            }
            Some(other) => {
                self.err(
                    key,
                    format!("expected an integer, found {}", other.type_str()),
                );
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.remove(key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(
                    key,
                    format!("expected a string, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.table.remove(key)?;
        let Value::Array(items) = v else {
            self.err(
                key,
                format!("expected an array of numbers, found {}", v.type_str()),
            );
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(x) => out.push(x),
                Value::Integer(i) => out.push(i as f64),
                other => {
                    self.err(key, format!("expected numbers, found {}", other.type_str()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pair_list(&mut self, key: &str) -> Option<Vec<(f64, f64)>> {
        let v = self.table.remove(key)?;
        let bad = |s: &mut Self| {
            s.err(key, "expected an array of [u, f(u)] pairs");
            None
        };
        let Value::Array(items) = v else {
            return bad(self);
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let Value::Array(pair) = item else {
                return bad(self);
            };
            let nums: Vec<f64> = pair
                .iter()
                .filter_map(|p| match p {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect();
            if nums.len() != 2 || pair.len() != 2 {
                return bad(self);
            }
            out.push((nums[0], nums[1]));
        }
        Some(out)
    }

    fn finish(mut self) {
        let keys: Vec<String> = self.table.keys().cloned().collect();
        for k in keys {
            self.err(&k, "unknown key");
        }
    }
}

fn section<'e>(root: &mut Table, name: &'static str, errors: &'e mut Vec<String>) -> Section<'e> {
    let table = match root.remove(name) {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(other) => {
            errors.push(format!(
                "`{name}`: expected a [{name}] section, found {}",
                other.type_str()
            ));
            Table::new()
        }
    };
    Section {
        name,
        table,
        errors,
    }
}

fn check_positive(s: &mut Section, key: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        s.err(key, format!("{x} must be positive and finite"));
    }
}

fn check_finite(s: &mut Section, key: &str, x: f64) {
    if !x.is_finite() {
        s.err(key, format!("{x} must be finite"));
    }
}

/// Parses and validates a config. Reports every problem found, syntax errors
/// with their line number.
pub fn parse_config(text: &str) -> Result<Config, ConfigErrors> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![syntax_message(text, &e)]))?;
    let mut errors = Vec::new();

    for key in root.keys() {
        if key != "command" && !SECTIONS.contains(&key.as_str()) {
            let what = if root[key].is_table() {
                "section"
            } else {
                "key"
            };
            errors.push(format!("`{key}`: unknown {what}"));
        }
    }

    let command = match root.get("command") {
        None => {
            errors.push("`command`: missing; one of solve, sweep, verify, benchmark".into());
            None
        }
        Some(Value::String(s)) => {
            match s.as_str() {
                "solve" => Some(Command::Solve),
                "sweep" => Some(Command::Sweep),
                "verify" => Some(Command::Verify),
                "benchmark" => Some(Command::Benchmark),
                other => {
                    errors.push(format!("`command`: unknown command {other:?}; one of solve, sweep, verify, benchmark"));
                    None
                }
            }
        }
        Some(other) => {
            errors.push(format!(
                "`command`: expected a string, found {}",
                other.type_str()
            ));
            None
        }
    };

    // benchmark first: it changes the defaults of other sections
    let benchmark = {
        let mut s = section(&mut root, "benchmark", &mut errors);
        let kind = match s.string("name").as_deref() {
            None => None,
            Some("neumann") => Some(BenchmarkKind::Neumann),
            Some("linear_heat") => Some(BenchmarkKind::LinearHeat),
            Some(other) => {
                s.err(
                    "name",
                    format!("unknown benchmark {other:?}; one of neumann, linear_heat"),
                );
                None
            }
        };
        if command == Some(Command::Benchmark)
            && kind.is_none()
            && !s.errors.iter().any(|e| e.contains("benchmark.name"))
        {
            s.err("name", "required for the benchmark command");
        }
        if command.is_some() && command != Some(Command::Benchmark) && kind.is_some() {
            s.err("name", "only used by the benchmark command");
        }
        s.finish();
        kind
    };

    let (data, lambda) = parse_data(&mut root, &mut errors, command, benchmark);
    let neumann_data = matches!(data, Some(DataSpec::Neumann { .. }));

    let grid = {
        let mut s = section(&mut root, "grid", &mut errors);
        let (dlo, dhi) = if neumann_data {
            (0.0, 2.0)
        } else {
            (-1.0, 1.0)
        };
        if neumann_data && (s.has("x_lo") || s.has("x_hi")) {
            let lo = s.f64_or("x_lo", dlo);
            let hi = s.f64_or("x_hi", dhi);
            if (lo, hi) != (0.0, 2.0) {
                s.err("x_lo", "the neumann preset is posed on [0, 2]");
            }
        }
        let g = GridParams {
            x_lo: s.f64_or("x_lo", dlo),
            x_hi: s.f64_or("x_hi", dhi),
            n_cells: s.usize_or("n_cells", 400),
            t_end: s.f64_or("t_end", 1.0),
            n_steps: s.usize_or("n_steps", 4000),
        };
        if !(g.x_lo.is_finite() && g.x_hi.is_finite() && g.x_lo < g.x_hi) {
            s.err(
                "x_hi",
                format!("need finite x_lo < x_hi, got [{}, {}]", g.x_lo, g.x_hi),
            );
        }
        if g.n_cells < 8 {
            s.err("n_cells", format!("{} violates n_cells >= 8", g.n_cells));
        }
        if g.n_steps < 1 {
            s.err("n_steps", "must be >= 1");
        }
        check_positive(&mut s, "t_end", g.t_end);
        s.finish();
        g
    };

    let (epsilon, epsilons) = {
        let mut s = section(&mut root, "epsilon", &mut errors);
        let neumann_bench = benchmark == Some(BenchmarkKind::Neumann);
        let epsilon = s.f64_or("value", if neumann_bench { 1e-4 } else { 0.01 });
        if let Err(e) = Epsilon::new(epsilon) {
            s.err("value", e);
        }
        let default_list = if benchmark == Some(BenchmarkKind::LinearHeat) {
            vec![1e-1, 1e-2, 1e-3, 1e-4]
        } else {
            default_epsilons()
        };
        let list = s.f64_list("list").unwrap_or(default_list);
        let min_len = if benchmark == Some(BenchmarkKind::LinearHeat) {
            2
        } else {
            3
        };
        if list.len() < min_len {
            s.err(
                "list",
                format!("needs at least {min_len} values, got {}", list.len()),
            );
        }
        if let Some(p) = list.windows(2).find(|p| !(p[1] < p[0])) {
            s.err(
                "list",
                format!(
                    "a sweep must be strictly decreasing in ε, got {} then {}",
                    p[0], p[1]
                ),
            );
        }
        for &e in &list {
            if let Err(err) = Epsilon::new(e) {
                s.err("list", err);
            }
        }
        s.finish();
        (epsilon, list)
    };

    let reaction = {
        let mut s = section(&mut root, "reaction", &mut errors);
        let kind = s.string("kind").unwrap_or_else(|| "zero".into());
        let k = match kind.as_str() {
            "zero" => Some(NonlinearityKind::Zero),
            "linear_decay" => {
                let c = s.f64_or("c", 1.0);
                if !(c >= 0.0 && c.is_finite()) {
                    s.err("c", format!("{c} must be finite and >= 0"));
                }
                Some(NonlinearityKind::LinearDecay { c })
            }
            "logistic" => {
                let a = s.f64_or("a", 1.0);
                check_positive(&mut s, "a", a);
                Some(NonlinearityKind::Logistic { a })
            }
            "piecewise_linear" => match s.pair_list("breakpoints") {
                Some(bp) => Some(NonlinearityKind::PiecewiseLinear { breakpoints: bp }),
                None => {
                    if !s.errors.iter().any(|e| e.contains("reaction.breakpoints")) {
                        s.err("breakpoints", "required for kind = \"piecewise_linear\"");
                    }
                    None
                }
            },
            other => {
                s.err(
                    "kind",
                    format!("unknown kind {other:?}; one of zero, linear_decay, logistic, piecewise_linear"),
                );
                None
            }
        };
        if let Some(k) = &k {
            if let Err(e) = stefan_limit::nonlinearity::NonlinearitySpec::new(k.clone(), 1.0) {
                s.err("kind", e);
            }
        }
        s.finish();
        k
    };

    let boundary = {
        let mut s = section(&mut root, "boundary", &mut errors);
        let any = !s.table.is_empty();
        let side = |s: &mut Section, name: &str| -> Side {
            let value_key = format!("{name}_value");
            match s.string(name).as_deref() {
                None | Some("neumann") => {
                    if s.has(&value_key) {
                        s.f64(&value_key);
                        s.err(&value_key, format!("only used when {name} = \"dirichlet\""));
                    }
                    Side::Neumann
                }
                Some("dirichlet") => match s.f64(&value_key) {
                    Some(v) => {
                        check_finite(s, &value_key, v);
                        Side::Dirichlet(v)
                    }
                    None => {
                        s.err(&value_key, format!("required when {name} = \"dirichlet\""));
                        Side::Neumann
                    }
                },
                Some(other) => {
                    s.err(
                        name,
                        format!("unknown boundary {other:?}; one of neumann, dirichlet"),
                    );
                    Side::Neumann
                }
            }
        };
        let b = [side(&mut s, "left"), side(&mut s, "right")];
        s.finish();
        any.then_some(b)
    };

    let window = {
        let mut s = section(&mut root, "window", &mut errors);
        let keys = ["x_lo", "x_hi", "t_lo", "t_hi"];
        let given = keys.iter().filter(|k| s.has(k)).count();
        let w = if given == 0 {
            None
        } else if given < 4 {
            for k in keys {
                if !s.has(k) {
                    s.err(k, "a window needs all of x_lo, x_hi, t_lo, t_hi");
                }
            }
            for k in keys {
                s.f64(k);
            }
            None
        } else {
            let v: Vec<f64> = keys.iter().map(|k| s.f64_or(k, f64::NAN)).collect();
            let w = Window::new(v[0], v[1], v[2], v[3]);
            let domain_ok =
                w.x_lo > grid.x_lo && w.x_hi < grid.x_hi && w.t_lo > 0.0 && w.t_hi < grid.t_end;
            if !(w.x_lo < w.x_hi && w.t_lo < w.t_hi && domain_ok) {
                s.err(
                    "x_lo",
                    format!(
                        "window [{}, {}] x [{}, {}] must be non-empty and strictly inside [{}, {}] x [0, {}]",
                        w.x_lo, w.x_hi, w.t_lo, w.t_hi, grid.x_lo, grid.x_hi, grid.t_end
                    ),
                );
            }
            Some(w)
        };
        s.finish();
        w
    };

    let delta = {
        let mut s = section(&mut root, "delta", &mut errors);
        let d = DeltaRule::default();
        let factor = s.f64_or("factor", d.factor);
        let offset = s.f64_or("offset", d.offset);
        let rule = match DeltaRule::new(factor, offset) {
            Ok(r) => r,
            Err(e) => {
                s.err("factor", e);
                d
            }
        };
        s.finish();
        rule
    };

    let (dictionary_per_axis, dictionary_radii) = {
        let mut s = section(&mut root, "dictionary", &mut errors);
        let per_axis = s.usize_or("per_axis", 3);
        let radii = s.f64_list("radii").unwrap_or_else(|| vec![0.24, 0.12]);
        if per_axis == 0 {
            s.err("per_axis", "must be >= 1");
        }
        if radii.is_empty() {
            s.err("radii", "needs at least one radius");
        }
        let limit = 1.0 / (per_axis as f64 + 1.0);
        for &r in &radii {
            if !(r > 0.0 && r < limit) {
                s.err(
                    "radii",
                    format!("{r} must lie in (0, {limit}) for {per_axis} centers per axis"),
                );
            }
        }
        s.finish();
        (per_axis, radii)
    };

    let checks = {
        let mut s = section(&mut root, "thresholds", &mut errors);
        let d = Checks::default();
        let c = Checks {
            clauses: Thresholds {
                cauchy: s.f64_or("cauchy", d.clauses.cauchy),
                ode_factor: s.f64_or("ode_factor", d.clauses.ode_factor),
                stefan_residual: s.f64_or("stefan_residual", d.clauses.stefan_residual),
                identity_factor: s.f64_or("identity_factor", d.clauses.identity_factor),
            },
            flux_mismatch: s.f64_or("flux_mismatch", d.flux_mismatch),
            front_span: s.f64_or("front_span", d.front_span),
            final_distance: s.f64_or("final_distance", d.final_distance),
        };
        for (k, v) in [
            ("cauchy", c.clauses.cauchy),
            ("ode_factor", c.clauses.ode_factor),
            ("stefan_residual", c.clauses.stefan_residual),
            ("identity_factor", c.clauses.identity_factor),
            ("flux_mismatch", c.flux_mismatch),
            ("front_span", c.front_span),
            ("final_distance", c.final_distance),
        ] {
            check_positive(&mut s, k, v);
        }
        s.finish();
        c
    };

    let newton = {
        let mut s = section(&mut root, "newton", &mut errors);
        let d = NewtonParams::default();
        let p = NewtonParams {
            tol: s.f64_or("tol", d.tol),
            max_iter: s.usize_or("max_iter", d.max_iter),
        };
        check_positive(&mut s, "tol", p.tol);
        if p.max_iter < 1 {
            s.err("max_iter", "must be >= 1");
        }
        s.finish();
        p
    };

    let (shift, time_rule) = {
        let mut s = section(&mut root, "transform", &mut errors);
        let shift = s.f64_or("shift", 0.0);
        // a bad t_end is reported once, under grid.t_end
        if !(shift >= 0.0 && (shift < grid.t_end || !(grid.t_end > 0.0))) {
            s.err("shift", format!("{shift} must lie in [0, t_end)"));
        }
        let rule = match s.string("time_rule") {
            None => TimeRule::default(),
            Some(r) => r.parse().unwrap_or_else(|e| {
                s.err("time_rule", e);
                TimeRule::default()
            }),
        };
        s.finish();
        (shift, rule)
    };

    let fields = {
        let mut s = section(&mut root, "output", &mut errors);
        let f = match s.string("fields").as_deref() {
            None | Some("finest") => FieldOutput::Finest,
            Some("all") => FieldOutput::All,
            Some("none") => FieldOutput::None,
            Some(other) => {
                s.err(
                    "fields",
                    format!("unknown value {other:?}; one of all, finest, none"),
                );
                FieldOutput::Finest
            }
        };
        s.finish();
        f
    };

    let (out, parallelism) = {
        let mut s = section(&mut root, "run", &mut errors);
        let out = s.string("out").unwrap_or_else(|| "out".into());
        let p = s.usize_or("parallelism", 0);
        s.finish();
        (PathBuf::from(out), p)
    };

    // written by us into manifests; carries no inputs
    root.remove("manifest");
    root.remove("command");

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(Config {
        command: command.expect("checked above"),
        grid,
        epsilon,
        epsilons,
        reaction: reaction.expect("checked above"),
        data: data.expect("checked above"),
        lambda,
        boundary,
        window,
        delta,
        dictionary_per_axis,
        dictionary_radii,
        checks,
        newton,
        shift,
        time_rule,
        fields,
        out,
        parallelism,
        benchmark,
    })
}

fn parse_data(
    root: &mut Table,
    errors: &mut Vec<String>,
    command: Option<Command>,
    benchmark: Option<BenchmarkKind>,
) -> (Option<DataSpec>, Option<f64>) {
    let mut s = section(root, "data", errors);
    let lambda = s.f64("lambda");
    if let Some(l) = lambda {
        check_positive(&mut s, "lambda", l);
    }
    let default = match benchmark {
        Some(BenchmarkKind::Neumann) => Some("neumann"),
        Some(BenchmarkKind::LinearHeat) => Some("tent"),
        None => None,
    };
    let preset = s.string("preset").or(default.map(String::from));
    let bench_tent = benchmark == Some(BenchmarkKind::LinearHeat);
    let spec = match preset.as_deref() {
        None => {
            if command.is_some() {
                s.err(
                    "preset",
                    "missing; one of constant, step, tent, melting, positive, neumann, csv",
                );
            }
            None
        }
        Some("constant") => {
            let value = s.f64_or("value", -1.0);
            check_finite(&mut s, "value", value);
            Some(DataSpec::Constant { value })
        }
        Some("step") => {
            let d = DataSpec::Step {
                left: s.f64_or("left", 1.0),
                right: s.f64_or("right", -1.0),
                width: s.f64_or("width", 0.05),
            };
            if let DataSpec::Step { left, right, width } = d {
                check_finite(&mut s, "left", left);
                check_finite(&mut s, "right", right);
                check_positive(&mut s, "width", width);
            }
            Some(d)
        }
        Some("tent") => {
            let peak = s.f64_or("peak", if bench_tent { -1.0 } else { 1.0 });
            let half_width = s.f64_or("half_width", 0.5);
            check_finite(&mut s, "peak", peak);
            check_positive(&mut s, "half_width", half_width);
            Some(DataSpec::Tent { peak, half_width })
        }
        Some("melting") => {
            let hot = s.f64_or("hot", 1.0);
            let w0 = s.f64_or("w0", 1.0);
            let width = s.f64_or("width", 0.05);
            check_positive(&mut s, "hot", hot);
            check_positive(&mut s, "w0", w0);
            check_positive(&mut s, "width", width);
            Some(DataSpec::Melting { hot, w0, width })
        }
        Some("positive") => Some(DataSpec::Positive),
        Some("neumann") => {
            let u_b = s.f64_or("u_b", 1.0);
            let w0 = s.f64_or("w0", 1.0);
            check_positive(&mut s, "u_b", u_b);
            check_positive(&mut s, "w0", w0);
            Some(DataSpec::Neumann { u_b, w0 })
        }
        Some("csv") => match s.string("path") {
            Some(p) => Some(DataSpec::Csv {
                path: PathBuf::from(p),
            }),
            None => {
                s.err("path", "required for preset = \"csv\"");
                None
            }
        },
        Some(other) => {
            s.err(
                "preset",
                format!("unknown preset {other:?}; one of constant, step, tent, melting, positive, neumann, csv"),
            );
            None
        }
    };
    if let Some(d) = &spec {
        let ok = match benchmark {
            Some(BenchmarkKind::Neumann) => matches!(d, DataSpec::Neumann { .. }),
            _ => true,
        };
        if !ok {
            s.err("preset", "the neumann benchmark needs preset = \"neumann\"");
        }
    }
    s.finish();
    (spec, lambda)
}

fn syntax_message(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("syntax error at line {line}: {}", e.message())
        }
        None => format!("syntax error: {}", e.message()),
    }
}

fn float(x: f64) -> Value {
    Value::Float(x)
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

fn string(s: &str) -> Value {
    Value::String(s.to_string())
}

impl Config {
    /// The config as a TOML table that [`parse_config`] reads back to an
    /// identical `Config`. Call on a resolved config to capture preset
    /// defaults as well.
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        root.insert("command".into(), string(self.command.name()));

        let mut t = Table::new();
        t.insert("x_lo".into(), float(self.grid.x_lo));
        t.insert("x_hi".into(), float(self.grid.x_hi));
        t.insert("n_cells".into(), Value::Integer(self.grid.n_cells as i64));
        t.insert("t_end".into(), float(self.grid.t_end));
        t.insert("n_steps".into(), Value::Integer(self.grid.n_steps as i64));
        root.insert("grid".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("value".into(), float(self.epsilon));
        t.insert("list".into(), floats(&self.epsilons));
        root.insert("epsilon".into(), Value::Table(t));

        let mut t = Table::new();
        match &self.reaction {
            NonlinearityKind::Zero => {
                t.insert("kind".into(), string("zero"));
            }
            NonlinearityKind::LinearDecay { c } => {
                t.insert("kind".into(), string("linear_decay"));
                t.insert("c".into(), float(*c));
            }
            NonlinearityKind::Logistic { a } => {
                t.insert("kind".into(), string("logistic"));
                t.insert("a".into(), float(*a));
            }
            NonlinearityKind::PiecewiseLinear { breakpoints } => {
                t.insert("kind".into(), string("piecewise_linear"));
                let bp = breakpoints.iter().map(|&(u, f)| floats(&[u, f])).collect();
                t.insert("breakpoints".into(), Value::Array(bp));
            }
        }
        root.insert("reaction".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("preset".into(), string(self.data.name()));
        match &self.data {
            DataSpec::Constant { value } => {
                t.insert("value".into(), float(*value));
            }
            DataSpec::Step { left, right, width } => {
                t.insert("left".into(), float(*left));
                t.insert("right".into(), float(*right));
                t.insert("width".into(), float(*width));
            }
            DataSpec::Tent { peak, half_width } => {
                t.insert("peak".into(), float(*peak));
                t.insert("half_width".into(), float(*half_width));
            }
            DataSpec::Melting { hot, w0, width } => {
                t.insert("hot".into(), float(*hot));
                t.insert("w0".into(), float(*w0));
                t.insert("width".into(), float(*width));
            }
            DataSpec::Positive => {}
            DataSpec::Neumann { u_b, w0 } => {
                t.insert("u_b".into(), float(*u_b));
                t.insert("w0".into(), float(*w0));
            }
            DataSpec::Csv { path } => {
                t.insert("path".into(), string(&path.to_string_lossy()));
            }
        }
        if let Some(l) = self.lambda {
            t.insert("lambda".into(), float(l));
        }
        root.insert("data".into(), Value::Table(t));

        if let Some(b) = self.boundary {
            let mut t = Table::new();
            for (name, side) in [("left", b[0]), ("right", b[1])] {
                match side {
                    Side::Neumann => {
                        t.insert(name.into(), string("neumann"));
                    }
                    Side::Dirichlet(v) => {
                        t.insert(name.into(), string("dirichlet"));
                        t.insert(format!("{name}_value"), float(v));
                    }
                }
            }
            root.insert("boundary".into(), Value::Table(t));
        }

        if let Some(w) = self.window {
            let mut t = Table::new();
            t.insert("x_lo".into(), float(w.x_lo));
            t.insert("x_hi".into(), float(w.x_hi));
            t.insert("t_lo".into(), float(w.t_lo));
            t.insert("t_hi".into(), float(w.t_hi));
            root.insert("window".into(), Value::Table(t));
        }

        let mut t = Table::new();
        t.insert("factor".into(), float(self.delta.factor));
        t.insert("offset".into(), float(self.delta.offset));
        root.insert("delta".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert(
            "per_axis".into(),
            Value::Integer(self.dictionary_per_axis as i64),
        );
        t.insert("radii".into(), floats(&self.dictionary_radii));
        root.insert("dictionary".into(), Value::Table(t));

        let c = &self.checks;
        let mut t = Table::new();
        t.insert("cauchy".into(), float(c.clauses.cauchy));
        t.insert("ode_factor".into(), float(c.clauses.ode_factor));
        t.insert("stefan_residual".into(), float(c.clauses.stefan_residual));
        t.insert("identity_factor".into(), float(c.clauses.identity_factor));
        t.insert("flux_mismatch".into(), float(c.flux_mismatch));
        t.insert("front_span".into(), float(c.front_span));
        t.insert("final_distance".into(), float(c.final_distance));
        root.insert("thresholds".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("tol".into(), float(self.newton.tol));
        t.insert(
            "max_iter".into(),
            Value::Integer(self.newton.max_iter as i64),
        );
        root.insert("newton".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("shift".into(), float(self.shift));
        t.insert("time_rule".into(), string(self.time_rule.name()));
        root.insert("transform".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("fields".into(), string(self.fields.name()));
        root.insert("output".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("out".into(), string(&self.out.to_string_lossy()));
        t.insert(
            "parallelism".into(),
            Value::Integer(self.parallelism as i64),
        );
        root.insert("run".into(), Value::Table(t));

        if let Some(b) = self.benchmark {
            let mut t = Table::new();
            t.insert("name".into(), string(b.name()));
            root.insert("benchmark".into(), Value::Table(t));
        }
        root
    }
}
