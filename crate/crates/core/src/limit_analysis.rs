//! ε-sweeps over a shared problem and the Cauchy/stabilization diagnostics
//! computed from them.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{
    dictionary, pair_with, Derivative, Grid1D, SpaceTimeField, TestFunction, Window,
};
use crate::nonlinearity::{positive_part, Epsilon, NonlinearitySpec};
use crate::solver::{solve, NewtonParams, NewtonStats, ProblemSpec};

/// `0.1 · 3^{-k}` for `k = 0..7`.
pub fn default_epsilons() -> Vec<f64> {
    (0..7).map(|k| 0.1 * 3f64.powi(-k)).collect()
}

/// Threshold separating "positive" from "not yet positive": `10ε + 1e-6`.
pub fn default_delta(eps: f64) -> f64 {
    DeltaRule::default().delta(eps)
}

/// `δ(ε) = factor · ε + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRule {
    pub factor: f64,
    pub offset: f64,
}

impl Default for DeltaRule {
    fn default() -> Self {
        Self {
            factor: 10.0,
            offset: 1e-6,
        }
    }
}

impl DeltaRule {
    pub fn new(factor: f64, offset: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(invalid(
                "delta.factor",
                format!("{factor} must be finite and >= 0"),
            ));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(invalid(
                "delta.offset",
                format!("{offset} must be finite and >= 0"),
            ));
        }
        if factor == 0.0 && offset == 0.0 {
            return Err(invalid("delta", "factor and offset cannot both be 0"));
        }
        Ok(Self { factor, offset })
    }

    pub fn delta(&self, eps: f64) -> f64 {
        self.factor * eps + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSweep {
    /// Its `eps` is ignored; every run replaces it.
    pub base: ProblemSpec,
    pub epsilons: Vec<f64>,
    pub window: Window,
    pub delta: DeltaRule,
    /// Defaults to [`dictionary`] of the window.
    pub dictionary: Vec<TestFunction>,
}

impl EpsilonSweep {
    pub fn new(base: ProblemSpec, epsilons: Vec<f64>, window: Window) -> Result<Self> {
        if epsilons.len() < 3 {
            return Err(invalid("epsilons", "a sweep needs at least 3 values"));
        }
        for pair in epsilons.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(invalid(
                    "epsilons",
                    format!(
                        "must be strictly decreasing, got {} then {}",
                        pair[0], pair[1]
                    ),
                ));
            }
        }
        for &e in &epsilons {
            Epsilon::new(e)?;
        }
        if !window.is_strictly_inside(&base.grid) {
            return Err(invalid(
                "window",
                "must lie strictly inside the space-time domain",
            ));
        }
        Ok(Self {
            base,
            epsilons,
            window,
            delta: DeltaRule::default(),
            dictionary: dictionary(&window),
        })
    }

    pub fn with_delta(mut self, delta: DeltaRule) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_dictionary(mut self, dict: Vec<TestFunction>) -> Result<Self> {
        if dict.is_empty() {
            return Err(invalid("dictionary", "must not be empty"));
        }
        if let Some(eta) = dict.iter().find(|eta| !eta.is_inside(&self.window)) {
            return Err(invalid(
                "dictionary",
                format!("support {:?} leaves the window", eta.support()),
            ));
        }
        self.dictionary = dict;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.base.grid
    }
}

/// One solved member of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub eps: Epsilon,
    pub u: SpaceTimeField,
    pub stats: NewtonStats,
}

/// Solves every `ε` of the sweep. Runs are independent and execute on the
/// current rayon pool; results keep the order of `sweep.epsilons`.
pub fn solve_sweep(sweep: &EpsilonSweep, params: &NewtonParams) -> Result<Vec<SweepRun>> {
    sweep
        .epsilons
        .par_iter()
        .map(|&e| {
            let eps = Epsilon::new(e)?;
            let run = solve(&sweep.base.with_eps(eps), params).map_err(|source| Error::Sweep {
                epsilon: e,
                source: Box::new(source),
            })?;
            Ok(SweepRun {
                eps,
                u: run.u,
                stats: run.stats,
            })
        })
        .collect()
}

/// Per-ε diagnostics of a sweep. The finest `ε` (last run) stands in for the
/// limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub window: Window,
    pub delta: DeltaRule,
    pub f: NonlinearitySpec,
    pub runs: Vec<SweepRun>,
    /// `‖u_k⁺ - u_{k+1}⁺‖_∞` on the window, one entry per consecutive pair.
    pub cauchy_sup: Vec<f64>,
    pub dictionary: Vec<TestFunction>,
    /// `⟨u_ε⁻, φ⟩` indexed `[φ][ε]`.
    pub pairing_table: Vec<Vec<f64>>,
    /// Test function used for the gradient diagnostics.
    pub eta: TestFunction,
    pub gradient: GradientReport,
    /// Max negative-phase ODE residual per ε between the window's time ends,
    /// `None` when no node qualifies.
    pub ode_residuals: Vec<Option<f64>>,
}

impl SweepReport {
    pub fn epsilons(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.eps.value()).collect()
    }

    pub fn grid(&self) -> &Grid1D {
        self.runs[0].u.grid()
    }

    pub fn finest(&self) -> &SweepRun {
        self.runs.last().expect("sweeps hold at least 3 runs")
    }
}

/// Centered test function covering the middle of `window`.
pub fn central_test_function(window: &Window) -> TestFunction {
    TestFunction::new(
        0.5 * (window.x_lo + window.x_hi),
        0.5 * (window.t_lo + window.t_hi),
        0.45 * (window.x_hi - window.x_lo),
        0.45 * (window.t_hi - window.t_lo),
    )
}

/// Solves the sweep and assembles all diagnostics.
pub fn run_sweep(sweep: &EpsilonSweep, params: &NewtonParams) -> Result<SweepReport> {
    let runs = solve_sweep(sweep, params)?;
    build_report(sweep, runs)
}

pub fn build_report(sweep: &EpsilonSweep, runs: Vec<SweepRun>) -> Result<SweepReport> {
    let window = sweep.window;
    let f = sweep.base.f.clone();
    let cauchy_sup = runs
        .windows(2)
        .map(|p| {
            p[0].u
                .zip_map(&p[1].u, |a, b| positive_part(a) - positive_part(b))
                .map(|d| d.sup_norm_in(&window))
        })
        .collect::<Result<Vec<_>>>()?;
    let dict = sweep.dictionary.clone();
    let rule = sweep.delta;
    let fields: Vec<&SpaceTimeField> = runs.iter().map(|r| &r.u).collect();
    let pairing_table = weak_star_table(&fields, &dict)?;
    let eta = central_test_function(&window);
    let gradient = gradient_l2_convergence(&fields, &f, &eta)?;
    let grid = sweep.base.grid;
    let s_level = grid.level_of(window.t_lo)?;
    let t_level = grid.level_of(window.t_hi)?;
    let ode_residuals = runs
        .par_iter()
        .map(|r| {
            let e = r.eps.value();
            let margin = default_ode_margin(&grid, e, grid.t(t_level));
            negative_ode_residual(&r.u, s_level, t_level, rule.delta(e), &f, margin)
                .map(|res| res.max())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        window,
        delta: rule,
        f,
        runs,
        cauchy_sup,
        dictionary: dict,
        pairing_table,
        eta,
        gradient,
        ode_residuals,
    })
}

/// `⟨u⁻, φ⟩` for every field and every `φ`, indexed `[φ][field]`.
pub fn weak_star_table(fields: &[&SpaceTimeField], dict: &[TestFunction]) -> Result<Vec<Vec<f64>>> {
    dict.par_iter()
        .map(|phi| {
            fields
                .iter()
                .map(|u| {
                    pair_with(u.grid(), phi, Derivative::Value, |i, n| {
                        (-u.at(i, n)).max(0.0)
                    })
                })
                .collect()
        })
        .collect()
}

/// Passes iff the sequence is eventually decreasing (its last two steps do
/// not increase) and the final entry is at most `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyVerdict {
    pub pass: bool,
    pub eventually_decreasing: bool,
    pub last: f64,
    pub threshold: f64,
}

pub fn positive_part_cauchy(report: &SweepReport, threshold: f64) -> CauchyVerdict {
    cauchy_verdict(&report.cauchy_sup, threshold)
}

pub fn cauchy_verdict(seq: &[f64], threshold: f64) -> CauchyVerdict {
    let eventually_decreasing = eventually_decreasing(seq);
    let last = seq.last().copied().unwrap_or(0.0);
    CauchyVerdict {
        pass: eventually_decreasing && last <= threshold,
        eventually_decreasing,
        last,
        threshold,
    }
}

/// True when the last three entries (or all, if fewer) are non-increasing.
/// Entries at rounding level (`≤ 1e-12`) count as equal.
pub fn eventually_decreasing(seq: &[f64]) -> bool {
    let tail = &seq[seq.len().saturating_sub(3)..];
    tail.windows(2).all(|p| p[1] <= p[0] || p[1] <= 1e-12)
}

/// `|⟨u_last⁻, φ⟩ - ⟨u_second_last⁻, φ⟩|` per `φ`, and their max.
pub fn weak_star_pairings(report: &SweepReport) -> (Vec<f64>, f64) {
    let deltas: Vec<f64> = report
        .pairing_table
        .iter()
        .map(|row| {
            let k = row.len();
            (row[k - 1] - row[k - 2]).abs()
        })
        .collect();
    let max = deltas.iter().copied().fold(0.0, f64::max);
    (deltas, max)
}

/// Per-node result where the check may not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeResiduals {
    pub values: Vec<Option<f64>>,
}

impl NodeResiduals {
    pub fn applicable(&self) -> usize {
        self.values.iter().flatten().count()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::max)
    }
}

/// Distance kept between a checked node and anything that has melted:
/// `max(2h, 6√(ε t))`, covering the ε-diffusive precursor ahead of the front.
pub fn default_ode_margin(grid: &Grid1D, eps: f64, t: f64) -> f64 {
    (2.0 * grid.h()).max(6.0 * (eps * t).sqrt())
}

/// `|u(x,t) - u(x,s) - ∫_s^t f(u(x,τ))dτ|` at interior nodes that stayed
/// below `δ` through level `t_level` and lie at least `margin` away from
/// every node that was positive by then. Other nodes, and the two end nodes
/// (which a Dirichlet condition may pin), are `None`.
pub fn negative_ode_residual(
    u: &SpaceTimeField,
    s_level: usize,
    t_level: usize,
    delta: f64,
    f: &NonlinearitySpec,
    margin: f64,
) -> Result<NodeResiduals> {
    let grid = *u.grid();
    if !(s_level < t_level && t_level < grid.n_levels()) {
        return Err(invalid(
            "t_level",
            format!("need s < t < n_levels, got {s_level}, {t_level}"),
        ));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let n = grid.n_nodes();
    let mut reached = vec![false; n];
    let mut melted = vec![false; n];
    for level in 0..=t_level {
        for (i, &x) in u.row(level).iter().enumerate() {
            reached[i] |= x >= delta;
            melted[i] |= x > 0.0;
        }
    }
    let reach = (margin / grid.h() - 1e-9).ceil().max(0.0) as usize;
    let dt = grid.dt();
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            if i == 0 || i == n - 1 || reached[i] || melted[lo..=hi].iter().any(|&m| m) {
                return None;
            }
            let mut integral = 0.0;
            for level in s_level..t_level {
                integral += 0.5 * dt * (f.eval(u.at(i, level)) + f.eval(u.at(i, level + 1)));
            }
            Some((u.at(i, t_level) - u.at(i, s_level) - integral).abs())
        })
        .collect();
    Ok(NodeResiduals { values })
}

/// Gradient diagnostics against a fixed `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// `∫∫|∂_x u⁺|²η²` per field.
    pub energy: Vec<f64>,
    /// Residual of the localized identity tested with `u⁺η²`, per field.
    pub identity_residual: Vec<f64>,
    /// `∫∫|∂_x u⁺ - ∂_x u*⁺|²η²` against the last field.
    pub distance_to_finest: Vec<f64>,
}

/// Central difference of `max(u, 0)` at an interior node.
fn dx_plus(row: &[f64], i: usize, h: f64) -> f64 {
    (positive_part(row[i + 1]) - positive_part(row[i - 1])) / (2.0 * h)
}

pub fn gradient_l2_convergence(
    fields: &[&SpaceTimeField],
    f: &NonlinearitySpec,
    eta: &TestFunction,
) -> Result<GradientReport> {
    let finest = *fields.last().ok_or_else(|| invalid("fields", "empty"))?;
    let per_field = fields
        .par_iter()
        .map(|u| {
            let energy = gradient_energy(u, eta)?;
            let identity = identity_residual(u, f, eta)?;
            let dist = gradient_distance(u, finest, eta)?;
            Ok((energy, identity, dist))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientReport {
        energy: per_field.iter().map(|p| p.0).collect(),
        identity_residual: per_field.iter().map(|p| p.1).collect(),
        distance_to_finest: per_field.iter().map(|p| p.2).collect(),
    })
}

/// Sums `integrand(i, n, row)` times `η²`-type weights over the support of
/// `η`, which must avoid the first and last node.
fn support_sum(
    u: &SpaceTimeField,
    eta: &TestFunction,
    integrand: impl Fn(usize, usize, f64, f64) -> f64,
) -> Result<f64> {
    let grid = *u.grid();
    eta.check_support(&grid)?;
    let [a, b, c, d] = eta.support();
    let nodes = grid.nodes_in(a, b);
    let first = (*nodes.start()).max(1);
    let last = (*nodes.end()).min(grid.n_nodes() - 2);
    let mut total = 0.0;
    for n in grid.levels_in(c, d) {
        let t = grid.t(n);
        for i in first..=last {
            total += integrand(i, n, grid.x(i), t);
        }
    }
    Ok(total * grid.h() * grid.dt())
}

pub fn gradient_energy(u: &SpaceTimeField, eta: &TestFunction) -> Result<f64> {
    let h = u.grid().h();
    support_sum(u, eta, |i, n, x, t| {
        let e = eta.eval(Derivative::Value, x, t);
        let g = dx_plus(u.row(n), i, h);
        g * g * e * e
    })
}

pub fn gradient_distance(
    u: &SpaceTimeField,
    reference: &SpaceTimeField,
    eta: &TestFunction,
) -> Result<f64> {
    if u.grid() != reference.grid() {
        return Err(Error::Incompatible("different grids".into()));
    }
    let h = u.grid().h();
    support_sum(u, eta, |i, n, x, t| {
        let e = eta.eval(Derivative::Value, x, t);
        let g = dx_plus(u.row(n), i, h) - dx_plus(reference.row(n), i, h);
        g * g * e * e
    })
}

/// `∫∫[-|u⁺|²η∂_tη + |∂_x u⁺|²η² + 2ηu⁺∂_x u⁺∂_xη - f(u⁺)u⁺η²]`.
pub fn identity_residual(
    u: &SpaceTimeField,
    f: &NonlinearitySpec,
    eta: &TestFunction,
) -> Result<f64> {
    let h = u.grid().h();
    support_sum(u, eta, |i, n, x, t| {
        let e = eta.eval(Derivative::Value, x, t);
        if e == 0.0 {
            return 0.0;
        }
        let et = eta.eval(Derivative::Dt, x, t);
        let ex = eta.eval(Derivative::Dx, x, t);
        let row = u.row(n);
        let p = positive_part(row[i]);
        let g = dx_plus(row, i, h);
        -p * p * e * et + g * g * e * e + 2.0 * e * p * g * ex - f.eval(p) * p * e * e
    })
}
