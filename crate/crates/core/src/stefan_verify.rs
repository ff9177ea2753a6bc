//! Checks on the limiting free-boundary problem: waiting times, the latent
//! heat field, the weak Stefan residual and the flux condition at the front.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{trapezoid, Derivative, Grid1D, ScalarField, SpaceTimeField, TestFunction};
use crate::limit_analysis::SweepReport;
use crate::nonlinearity::{positive_part, Epsilon, NonlinearitySpec};
use crate::transforms::{TimeRule, TransformedRun};

/// Waiting time per node: the first level after which `u ≥ δ` for good.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundary {
    /// `None` means the node never becomes positive.
    pub levels: Vec<Option<usize>>,
    pub delta: f64,
    pub eps: Epsilon,
    pub grid: Grid1D,
}

impl FreeBoundary {
    pub fn waiting_time(&self, node: usize) -> Option<f64> {
        self.levels[node].map(|n| self.grid.t(n))
    }

    pub fn waiting_times(&self) -> Vec<Option<f64>> {
        (0..self.levels.len())
            .map(|i| self.waiting_time(i))
            .collect()
    }

    /// Where `(node, level)` sits relative to the front.
    pub fn classify(&self, node: usize, level: usize) -> NodeClass {
        match self.levels[node] {
            None => NodeClass::Frozen,
            Some(t) if level > t + LAYER_LEVELS => NodeClass::Omega,
            Some(t) if level + LAYER_LEVELS < t => NodeClass::Frozen,
            Some(_) => NodeClass::Layer,
        }
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for node in 0..self.levels.len() {
            for level in 0..self.grid.n_levels() {
                match self.classify(node, level) {
                    NodeClass::Omega => c.omega += 1,
                    NodeClass::Frozen => c.frozen += 1,
                    NodeClass::Layer => c.layer += 1,
                }
            }
        }
        c.layer_volume = c.layer as f64 * self.grid.h() * self.grid.dt();
        c
    }
}

/// Half-width, in levels, of the band around `T(x)` left out of residuals.
pub const LAYER_LEVELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// `t > T(x) + 2dt`.
    Omega,
    /// Never positive, or `t < T(x) - 2dt`.
    Frozen,
    /// `|t - T(x)| ≤ 2dt`.
    Layer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCounts {
    pub omega: usize,
    pub frozen: usize,
    pub layer: usize,
    /// `layer · h · dt`.
    pub layer_volume: f64,
}

pub fn extract_waiting_time(u: &SpaceTimeField, delta: f64, eps: Epsilon) -> Result<FreeBoundary> {
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let grid = *u.grid();
    let last = grid.n_levels() - 1;
    let levels = (0..grid.n_nodes())
        .map(|i| {
            let mut first = None;
            for n in (0..=last).rev() {
                if u.at(i, n) >= delta {
                    first = Some(n);
                } else {
                    break;
                }
            }
            first
        })
        .collect();
    Ok(FreeBoundary {
        levels,
        delta,
        eps,
        grid,
    })
}

/// Number of `(node, level)` pairs with `u < δ/2` after `u ≥ δ` was reached
/// at that node.
pub fn monotonicity_violations(u: &SpaceTimeField, delta: f64) -> usize {
    let grid = *u.grid();
    let mut reached = vec![false; grid.n_nodes()];
    let mut count = 0;
    for level in 0..grid.n_levels() {
        for (i, &x) in u.row(level).iter().enumerate() {
            if reached[i] && x < 0.5 * delta {
                count += 1;
            }
            reached[i] |= x >= delta;
        }
    }
    count
}

/// `sup |T_{k+1} - T_k|` over nodes with a finite waiting time in both.
pub fn waiting_time_jumps(fbs: &[FreeBoundary]) -> Vec<f64> {
    fbs.windows(2)
        .map(|p| {
            p[0].waiting_times()
                .iter()
                .zip(p[1].waiting_times())
                .filter_map(|(a, b)| Some((a.as_ref()? - b?).abs()))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `W(x) = -u0(x) - ∫_0^{T(x)} f̄(x,s) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentHeatField {
    pub values: Vec<f64>,
    /// Nodes whose waiting time is "never"; their integral runs to `t_end`.
    pub never: Vec<bool>,
}

impl LatentHeatField {
    /// `W⁺`: no latent heat where there was no ice.
    pub fn clamped(&self) -> Vec<f64> {
        self.values.iter().map(|&w| w.max(0.0)).collect()
    }

    /// Smallest `W` over nodes that do melt.
    pub fn min_melted(&self) -> Option<f64> {
        self.values
            .iter()
            .zip(&self.never)
            .filter(|(_, &n)| !n)
            .map(|(&w, _)| w)
            .reduce(f64::min)
    }

    /// Linear interpolation at `x`.
    pub fn at(&self, grid: &Grid1D, x: f64) -> f64 {
        let s = ((x - grid.x_lo()) / grid.h()).clamp(0.0, grid.n_cells() as f64);
        let i = (s.floor() as usize).min(grid.n_cells() - 1);
        let a = s - i as f64;
        (1.0 - a) * self.values[i] + a * self.values[i + 1]
    }
}

#[allow(non_snake_case)]
pub fn compute_W(
    u0: &ScalarField,
    fbar_proxy: &SpaceTimeField,
    fb: &FreeBoundary,
) -> Result<LatentHeatField> {
    let grid = *fbar_proxy.grid();
    if u0.grid() != &grid || fb.grid != grid {
        return Err(Error::Incompatible(
            "W inputs live on different grids".into(),
        ));
    }
    let last = grid.n_levels() - 1;
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut never = Vec::with_capacity(grid.n_nodes());
    for (i, &u0i) in u0.values().iter().enumerate() {
        let end = fb.levels[i].unwrap_or(last);
        let samples: Vec<f64> = (0..=end).map(|n| fbar_proxy.at(i, n)).collect();
        values.push(-u0i - trapezoid(&samples, grid.dt()));
        never.push(fb.levels[i].is_none());
    }
    Ok(LatentHeatField { values, never })
}

/// `W` for a run, with `f̄` proxied by `f(u)` of the same run.
pub fn latent_heat_of(
    u: &SpaceTimeField,
    fb: &FreeBoundary,
    f: &NonlinearitySpec,
) -> Result<LatentHeatField> {
    compute_W(&u.level(0), &u.map(|x| f.eval(x)), fb)
}

/// `R(η) = ∫∫[β η_t + u⁺ η_xx + f(u⁺) η]` for each `η`, with `β = u⁺` where
/// `u⁺ > δ` and `β = -W(x)` elsewhere (`δ` from `fb`). Points in the layer
/// `|t - T(x)| ≤ 2dt` are left out. Takes `u` and clamps it itself.
///
/// `η_t` and `η_xx` are the centered differences of `η` on the grid, so the
/// sums by parts hold exactly and a constant `u⁺` with `f = 0` gives 0 up to
/// rounding. Sampling the closed-form derivatives instead leaves a
/// quadrature error of the size of the residual itself on coarse grids.
pub fn stefan_weak_residual(
    u: &SpaceTimeField,
    w: &LatentHeatField,
    f: &NonlinearitySpec,
    dict: &[TestFunction],
    fb: &FreeBoundary,
) -> Result<Vec<f64>> {
    let delta = fb.delta;
    let grid = *u.grid();
    if w.values.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.n_nodes(),
            got: w.values.len(),
        });
    }
    for eta in dict {
        eta.check_support(&grid)?;
    }
    let (h, dt) = (grid.h(), grid.dt());
    dict.par_iter()
        .map(|eta| {
            let [a, b, c, d] = eta.support();
            let eval = |i: usize, n: usize| eta.eval(Derivative::Value, grid.x(i), grid.t(n));
            // one extra node/level on each side: the differences reach there
            let nodes = grid.nodes_in(a, b);
            let levels = grid.levels_in(c, d);
            let (i0, i1) = (
                nodes.start().saturating_sub(1).max(1),
                (nodes.end() + 1).min(grid.n_cells() - 1),
            );
            let (n0, n1) = (
                levels.start().saturating_sub(1).max(1),
                (levels.end() + 1).min(grid.n_steps() - 1),
            );
            let mut total = 0.0;
            for n in n0..=n1 {
                let row = u.row(n);
                for i in i0..=i1 {
                    let e = eval(i, n);
                    let et = (eval(i, n + 1) - eval(i, n - 1)) / (2.0 * dt);
                    let exx = (eval(i + 1, n) - 2.0 * e + eval(i - 1, n)) / (h * h);
                    if (e == 0.0 && et == 0.0 && exx == 0.0)
                        || fb.classify(i, n) == NodeClass::Layer
                    {
                        continue;
                    }
                    let p = positive_part(row[i]);
                    let beta = if p > delta { p } else { -w.values[i] };
                    total += beta * et + p * exx + f.eval(p) * e;
                }
            }
            Ok(total * h * dt)
        })
        .collect()
}

/// Residual of `Δw₀ - ∂_t w₀ = -u0 - ∫_0^T f̄ - ∫_T^t f(u)`, split by
/// region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WLimitReport {
    /// Max over `Ω` (`t > T + 2dt`), interior nodes.
    pub omega: f64,
    /// Same quantity on frozen nodes, where the equation is not claimed.
    pub frozen: f64,
    pub omega_points: usize,
}

pub fn w_limit_equation_residual(
    tr: &TransformedRun,
    w: &LatentHeatField,
    fb: &FreeBoundary,
    f: &NonlinearitySpec,
) -> Result<WLimitReport> {
    if tr.h_level != 0 {
        return Err(invalid("h_level", "the limit equation is stated for h = 0"));
    }
    let grid = *tr.w.grid();
    let (h, dt) = (grid.h(), grid.dt());
    let n = grid.n_nodes();
    let mut report = WLimitReport {
        omega: 0.0,
        frozen: 0.0,
        omega_points: 0,
    };
    for i in 1..n - 1 {
        // ∫_T^t f(u) accumulated with the rule of `tr`.
        let start = fb.levels[i].unwrap_or(0);
        let mut tail = 0.0;
        for level in 1..grid.n_levels() {
            if level > start {
                let (a, b) = (tr.base.at(i, level - 1), tr.base.at(i, level));
                tail += match tr.rule {
                    TimeRule::Trapezoid => 0.5 * dt * (f.eval(a) + f.eval(b)),
                    TimeRule::Scheme => dt * f.eval(a),
                };
            }
            let class = fb.classify(i, level);
            if class == NodeClass::Layer {
                continue;
            }
            let (row, prev) = (tr.w.row(level), tr.w.row(level - 1));
            let lap = (row[i - 1] - 2.0 * row[i] + row[i + 1]) / (h * h);
            let dtw = (row[i] - prev[i]) / dt;
            match class {
                NodeClass::Omega => {
                    let r = (lap - dtw - (w.values[i] - tail)).abs();
                    report.omega = report.omega.max(r);
                    report.omega_points += 1;
                }
                _ => {
                    let r = (lap - dtw - tr.g.at(i, level)).abs();
                    report.frozen = report.frozen.max(r);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontParams {
    /// Half-width `K`, in levels, of the smoothing window: `s'` is the
    /// centered difference over `±K` levels and the gradient is averaged over
    /// the same levels.
    pub half_window: usize,
    /// Lower bound on `|∂_x u⁺|` in the relative mismatch.
    pub floor: f64,
}

impl FrontParams {
    /// Window covering about `span` time units in total.
    pub fn spanning(grid: &Grid1D, span: f64) -> Self {
        let half_window = ((span / (2.0 * grid.dt())).ceil() as usize).max(1);
        Self {
            half_window,
            floor: 1e-3,
        }
    }
}

impl Default for FrontParams {
    fn default() -> Self {
        Self {
            half_window: 2,
            floor: 1e-3,
        }
    }
}

/// Default smoothing span for [`FrontParams::spanning`]; several cell-melting
/// periods on the default grid.
pub const DEFAULT_FRONT_SPAN: f64 = 0.1;

/// Front trajectory and the flux balance along it. Liquid is taken to sit to
/// the left of the front.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontReport {
    pub times: Vec<f64>,
    pub position: Vec<Option<f64>>,
    pub speed: Vec<Option<f64>>,
    pub gradient: Vec<Option<f64>>,
    pub latent_heat: Vec<Option<f64>>,
    pub mismatch: Vec<Option<f64>>,
}

impl FrontReport {
    pub fn max_mismatch_between(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.mismatch)
            .filter(|(&t, _)| t >= t_lo && t <= t_hi)
            .filter_map(|(_, m)| *m)
            .reduce(f64::max)
    }

    pub fn median_mismatch_between(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .times
            .iter()
            .zip(&self.mismatch)
            .filter(|(&t, _)| t >= t_lo && t <= t_hi)
            .filter_map(|(_, m)| *m)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    }
}

/// First down-crossing of `δ` scanning from the left, linearly interpolated,
/// with the index of the last node at or above `δ`.
pub fn front_position(row: &[f64], grid: &Grid1D, delta: f64) -> Option<(f64, usize)> {
    (0..row.len() - 1)
        .find(|&i| row[i] >= delta && row[i + 1] < delta)
        .map(|i| {
            let a = (row[i] - delta) / (row[i] - row[i + 1]);
            (grid.x(i) + a * grid.h(), i)
        })
}

pub fn front_flux_check(
    u: &SpaceTimeField,
    fb: &FreeBoundary,
    w: &LatentHeatField,
    params: FrontParams,
) -> Result<FrontReport> {
    let grid = *u.grid();
    let levels = grid.n_levels();
    let h = grid.h();
    let crossings: Vec<Option<(f64, usize)>> = (0..levels)
        .map(|n| front_position(u.row(n), &grid, fb.delta))
        .collect();
    let positions: Vec<Option<f64>> = crossings.iter().map(|c| c.map(|p| p.0)).collect();
    let known: Vec<f64> = positions.iter().flatten().copied().collect();
    let moves = known.windows(2).any(|p| p[0] != p[1]);
    if known.is_empty() || !moves {
        return Err(Error::StationaryFront);
    }
    let k = params.half_window;
    let gradients: Vec<Option<f64>> = crossings
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let (_, i) = (*c)?;
            if i == 0 {
                return None;
            }
            let row = u.row(n);
            Some((positive_part(row[i]) - positive_part(row[i - 1])).abs() / h)
        })
        .collect();
    let mut speed = vec![None; levels];
    let mut gradient = vec![None; levels];
    let mut latent = vec![None; levels];
    let mut mismatch = vec![None; levels];
    for n in k..levels.saturating_sub(k) {
        let (Some(a), Some(b), Some(s)) = (positions[n - k], positions[n + k], positions[n]) else {
            continue;
        };
        let slope = (b - a) / (2.0 * k as f64 * grid.dt());
        speed[n] = Some(slope);
        let window: Option<Vec<f64>> = gradients[n - k..=n + k].iter().copied().collect();
        let Some(window) = window else { continue };
        let g = window.iter().sum::<f64>() / window.len() as f64;
        let wl = w.at(&grid, s);
        gradient[n] = Some(g);
        latent[n] = Some(wl);
        mismatch[n] = Some((wl * slope.abs() - g).abs() / g.max(params.floor));
    }
    Ok(FrontReport {
        times: (0..levels).map(|n| grid.t(n)).collect(),
        position: positions,
        speed,
        gradient,
        latent_heat: latent,
        mismatch,
    })
}

/// Verdict thresholds. Defaults are tuned for the default grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Final `‖u_k⁺ - u_{k+1}⁺‖_∞`.
    pub cauchy: f64,
    /// Multiplier `c` in `negative_ode_residual ≤ c (ε + dt)`.
    pub ode_factor: f64,
    /// Finest-ε `max_η |R(η)|`.
    pub stefan_residual: f64,
    /// Multiplier `C` in `identity residual ≤ C (dt + h²)`.
    pub identity_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            cauchy: 0.02,
            ode_factor: 3.0,
            stefan_residual: DEFAULT_STEFAN_RESIDUAL,
            identity_factor: DEFAULT_IDENTITY_FACTOR,
        }
    }
}

pub const DEFAULT_STEFAN_RESIDUAL: f64 = 4e-4;
pub const DEFAULT_IDENTITY_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseLine {
    pub clause: &'static str,
    pub status: Status,
    pub value: f64,
    pub threshold: f64,
}

impl std::fmt::Display for ClauseLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CLAUSE ({}): {} {} {}",
            self.clause,
            self.status.as_str(),
            self.value,
            self.threshold
        )
    }
}

/// Per-ε post-processing shared by the verdict and the CLI tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitChecks {
    pub deltas: Vec<f64>,
    pub boundaries: Vec<FreeBoundary>,
    pub latent_heat: Vec<LatentHeatField>,
    pub violations: Vec<usize>,
    /// Runs in which no value reaches `δ`; their positivity-set diagnostics
    /// carry no information.
    pub vacuous: Vec<bool>,
    /// `[η][ε]`.
    pub stefan_residuals: Vec<Vec<f64>>,
}

impl LimitChecks {
    pub fn max_stefan_residual(&self) -> Vec<f64> {
        let k = self.deltas.len();
        (0..k)
            .map(|e| {
                self.stefan_residuals
                    .iter()
                    .map(|row| row[e].abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Entries of a per-ε sequence belonging to non-vacuous runs.
    pub fn informative<T: Copy>(&self, per_eps: &[T]) -> Vec<T> {
        per_eps
            .iter()
            .zip(&self.vacuous)
            .filter(|(_, &v)| !v)
            .map(|(&x, _)| x)
            .collect()
    }

    /// Dictionary indices whose `|R(η)|` is not non-increasing (up to
    /// `floor`) over the non-vacuous runs.
    pub fn non_monotone_eta(&self, floor: f64) -> Vec<usize> {
        self.stefan_residuals
            .iter()
            .enumerate()
            .filter(|(_, row)| !non_increasing_above(&self.informative(row), floor))
            .map(|(k, _)| k)
            .collect()
    }
}

/// `|x_{k+1}| ≤ |x_k|` for every step, except that values at or below
/// `floor` always count as settled.
pub fn non_increasing_above(seq: &[f64], floor: f64) -> bool {
    seq.windows(2)
        .all(|p| p[1].abs() <= p[0].abs() || p[1].abs() <= floor)
}

pub fn limit_checks(report: &SweepReport) -> Result<LimitChecks> {
    let per_eps = report
        .runs
        .par_iter()
        .map(|r| {
            let delta = report.delta.delta(r.eps.value());
            let fb = extract_waiting_time(&r.u, delta, r.eps)?;
            let w = latent_heat_of(&r.u, &fb, &report.f)?;
            let viol = monotonicity_violations(&r.u, delta);
            let res = stefan_weak_residual(&r.u, &w, &report.f, &report.dictionary, &fb)?;
            let vacuous = r.u.values().iter().all(|&x| x < delta);
            Ok((delta, fb, w, viol, vacuous, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = LimitChecks {
        deltas: Vec::new(),
        boundaries: Vec::new(),
        latent_heat: Vec::new(),
        violations: Vec::new(),
        vacuous: Vec::new(),
        stefan_residuals: vec![Vec::new(); report.dictionary.len()],
    };
    for (delta, fb, w, viol, vacuous, res) in per_eps {
        out.vacuous.push(vacuous);
        out.deltas.push(delta);
        out.boundaries.push(fb);
        out.latent_heat.push(w);
        out.violations.push(viol);
        for (row, r) in out.stefan_residuals.iter_mut().zip(res) {
            row.push(r);
        }
    }
    Ok(out)
}

/// One line per clause (i)–(v).
pub fn clause_verdicts(
    report: &SweepReport,
    checks: &LimitChecks,
    th: &Thresholds,
) -> Vec<ClauseLine> {
    let grid = report.grid();
    let (h, dt) = (grid.h(), grid.dt());
    let finest = report.finest().eps.value();

    let cauchy = crate::limit_analysis::positive_part_cauchy(report, th.cauchy);
    let i = ClauseLine {
        clause: "i",
        status: Status::from_bool(cauchy.pass),
        value: cauchy.last,
        threshold: th.cauchy,
    };

    let last_viol = *checks.violations.last().unwrap_or(&0);
    let non_increasing = checks
        .informative(&checks.violations)
        .windows(2)
        .all(|p| p[1] <= p[0]);
    let ii = ClauseLine {
        clause: "ii",
        status: Status::from_bool(last_viol == 0 && non_increasing),
        value: last_viol as f64,
        threshold: 0.0,
    };

    let ode_bound = th.ode_factor * (finest + dt);
    let iii = match report.ode_residuals.last().copied().flatten() {
        Some(r) => ClauseLine {
            clause: "iii",
            status: Status::from_bool(r <= ode_bound),
            value: r,
            threshold: ode_bound,
        },
        None => ClauseLine {
            clause: "iii",
            status: Status::NotApplicable,
            value: 0.0,
            threshold: ode_bound,
        },
    };

    let maxes = checks.max_stefan_residual();
    let last_r = *maxes.last().unwrap_or(&0.0);
    let settled = non_increasing_above(&checks.informative(&maxes), dt + h * h);
    let iv = ClauseLine {
        clause: "iv",
        status: Status::from_bool(last_r <= th.stefan_residual && settled),
        value: last_r,
        threshold: th.stefan_residual,
    };

    let id_bound = th.identity_factor * (dt + h * h);
    let id_max = report
        .gradient
        .identity_residual
        .iter()
        .map(|r| r.abs())
        .fold(0.0, f64::max);
    let dist = &report.gradient.distance_to_finest;
    let dist_ok = dist.windows(2).all(|p| p[1] < p[0] || p[0] == 0.0);
    let v = ClauseLine {
        clause: "v",
        status: Status::from_bool(id_max <= id_bound && dist_ok),
        value: id_max,
        threshold: id_bound,
    };
    vec![i, ii, iii, iv, v]
}
