//! Time stepping for `∂_t u = Δα_ε(u) + f(u)`.
//!
//! The production scheme works with `v = α_ε(u)` and advances
//! `∂_t β_ε(v) = Δv + f(β_ε(v))` by backward Euler in the diffusion and
//! forward Euler in the reaction. Each step is a piecewise-linear tridiagonal
//! system solved by semi-smooth Newton. An explicit `u`-form scheme is kept as
//! an independent oracle.

use crate::error::{invalid, Error, Result};
use crate::grid::{trapezoid, Grid1D, ScalarField, SpaceTimeField, SpatialBump};
use crate::nonlinearity::{
    alpha_eps, beta_eps, beta_eps_slope, negative_part, positive_part, Epsilon, NonlinearitySpec,
};
use crate::tridiag;

/// Piecewise-linear function of time, constant beyond its end points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    points: Vec<(f64, f64)>,
}

impl Trace {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("bc.trace", "a trace needs at least one point"));
        }
        if points.iter().any(|(t, g)| !t.is_finite() || !g.is_finite()) {
            return Err(invalid("bc.trace", "trace values must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid(
                "bc.trace",
                "trace times must be strictly increasing",
            ));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        if t >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let k = p.partition_point(|(s, _)| *s <= t);
        let (t0, g0) = p[k - 1];
        let (t1, g1) = p[k];
        g0 + (g1 - g0) * (t - t0) / (t1 - t0)
    }
}

/// Condition at one end of the interval, in terms of `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Dirichlet(Trace),
    NeumannZero,
}

impl Boundary {
    pub fn dirichlet_const(value: f64) -> Self {
        Boundary::Dirichlet(Trace::constant(value))
    }

    /// Ghost value used by the standalone Laplacian.
    pub(crate) fn ghost(&self, t: f64, inner: f64) -> f64 {
        match self {
            Boundary::Dirichlet(trace) => trace.at(t),
            Boundary::NeumannZero => inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub left: Boundary,
    pub right: Boundary,
}

impl BoundarySpec {
    pub fn new(left: Boundary, right: Boundary) -> Self {
        Self { left, right }
    }

    pub fn neumann() -> Self {
        Self::new(Boundary::NeumannZero, Boundary::NeumannZero)
    }
}

/// Everything that determines one run of the regularized equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid1D,
    pub eps: Epsilon,
    pub f: NonlinearitySpec,
    pub u0: ScalarField,
    pub bc: BoundarySpec,
    pub lambda: f64,
}

impl ProblemSpec {
    pub fn new(
        eps: Epsilon,
        f: NonlinearitySpec,
        u0: ScalarField,
        bc: BoundarySpec,
        lambda: f64,
    ) -> Result<Self> {
        let grid = *u0.grid();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be positive")));
        }
        let sup = u0.sup_norm();
        if sup > lambda {
            return Err(invalid(
                "lambda",
                format!("initial data has sup norm {sup} > lambda = {lambda}"),
            ));
        }
        let n = grid.n_cells();
        for (side, boundary, value) in [
            ("left", &bc.left, u0.values()[0]),
            ("right", &bc.right, u0.values()[n]),
        ] {
            if let Boundary::Dirichlet(trace) = boundary {
                let g0 = trace.at(0.0);
                if (g0 - value).abs() > 1e-12 {
                    return Err(invalid(
                        "bc",
                        format!("{side} trace starts at {g0} but u0 = {value} there"),
                    ));
                }
            }
        }
        Ok(Self {
            grid,
            eps,
            f,
            u0,
            bc,
            lambda,
        })
    }

    pub fn with_eps(&self, eps: Epsilon) -> Self {
        Self {
            eps,
            ..self.clone()
        }
    }

    /// Band `[-Λ, max(Λ, 1)]` monitored for the closed-form reaction kinds.
    pub fn apriori_band(&self) -> (f64, f64) {
        (-self.lambda, self.lambda.max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 50,
        }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("newton.tol", "must be positive"));
        }
        if self.max_iter < 1 {
            return Err(invalid("newton.max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

/// Result of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub v: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NewtonStats {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

/// A completed solve: `u` and `v = α_ε(u)` on every level.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub spec: ProblemSpec,
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
    pub stats: NewtonStats,
}

struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: Vec::with_capacity(n),
        }
    }
}

/// Advances `v_now` (at `t_next - dt`) to `t_next`.
///
/// Solves `β_ε(v) - dt Δ_h v = β_ε(v_now) + dt f(β_ε(v_now))` node-wise, with
/// Dirichlet nodes pinned to `α_ε(g(t_next))`. Newton starts from `v_now`.
pub fn step_implicit(
    v_now: &ScalarField,
    spec: &ProblemSpec,
    params: &NewtonParams,
    t_next: f64,
) -> Result<StepOutcome> {
    params.validate()?;
    if v_now.grid() != &spec.grid {
        return Err(Error::ShapeMismatch {
            expected: spec.grid.n_nodes(),
            got: v_now.values().len(),
        });
    }
    let mut ws = Workspace::new(spec.grid.n_nodes());
    let mut v = v_now.values().to_vec();
    let (iterations, residual) =
        newton_step(&mut v, v_now.values(), spec, params, t_next, &mut ws)?;
    Ok(StepOutcome {
        v: ScalarField::new(spec.grid, v)?,
        iterations,
        residual,
    })
}

fn newton_step(
    v: &mut [f64],
    v_now: &[f64],
    spec: &ProblemSpec,
    params: &NewtonParams,
    t_next: f64,
    ws: &mut Workspace,
) -> Result<(usize, f64)> {
    let eps = spec.eps;
    let grid = &spec.grid;
    let n = v.len();
    let last = n - 1;
    let k = grid.dt() / (grid.h() * grid.h());

    let source: Vec<f64> = v_now
        .iter()
        .map(|&w| {
            let u = beta_eps(w, eps);
            u + grid.dt() * spec.f.eval(u)
        })
        .collect();
    let pinned_left = match &spec.bc.left {
        Boundary::Dirichlet(tr) => Some(alpha_eps(tr.at(t_next), eps)),
        Boundary::NeumannZero => None,
    };
    let pinned_right = match &spec.bc.right {
        Boundary::Dirichlet(tr) => Some(alpha_eps(tr.at(t_next), eps)),
        Boundary::NeumannZero => None,
    };

    let mut residual = f64::INFINITY;
    for iteration in 0..=params.max_iter {
        // F(v) and its generalized Jacobian
        residual = 0.0;
        for i in 0..n {
            let (lap, lo, up) = if i == 0 {
                (2.0 * (v[1] - v[0]), 0.0, -2.0 * k)
            } else if i == last {
                (2.0 * (v[last - 1] - v[last]), -2.0 * k, 0.0)
            } else {
                (v[i - 1] - 2.0 * v[i] + v[i + 1], -k, -k)
            };
            let pinned = match i {
                0 => pinned_left,
                i if i == last => pinned_right,
                _ => None,
            };
            let (res, d, l, u) = match pinned {
                Some(target) => (v[i] - target, 1.0, 0.0, 0.0),
                None => (
                    beta_eps(v[i], eps) - k * lap - source[i],
                    beta_eps_slope(v[i], eps) + 2.0 * k,
                    lo,
                    up,
                ),
            };
            if !res.is_finite() {
                return Err(Error::NonFiniteState { node: i, level: 0 });
            }
            residual = residual.max(res.abs());
            ws.rhs[i] = -res;
            ws.diag[i] = d;
            ws.lower[i] = l;
            ws.upper[i] = u;
        }
        if residual <= params.tol {
            return Ok((iteration, residual));
        }
        if iteration == params.max_iter {
            break;
        }
        tridiag::solve_in_place(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch);
        for (vi, dv) in v.iter_mut().zip(&ws.rhs) {
            *vi += dv;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: params.max_iter,
        residual,
    })
}

/// Solves the regularized problem on the whole time axis.
pub fn solve(spec: &ProblemSpec, params: &NewtonParams) -> Result<Run> {
    params.validate()?;
    let grid = spec.grid;
    let eps = spec.eps;
    let mut u = SpaceTimeField::zeros(grid);
    let mut v = SpaceTimeField::zeros(grid);
    u.row_mut(0).copy_from_slice(spec.u0.values());
    for (slot, &u0) in v.row_mut(0).iter_mut().zip(spec.u0.values()) {
        *slot = alpha_eps(u0, eps);
    }
    let monitor = spec.f.is_closed_form().then(|| spec.apriori_band());
    let mut ws = Workspace::new(grid.n_nodes());
    let mut stats = NewtonStats::default();
    let mut current = v.row(0).to_vec();
    let mut next = current.clone();
    for level in 1..grid.n_levels() {
        next.copy_from_slice(&current);
        let (iters, res) = newton_step(&mut next, &current, spec, params, grid.t(level), &mut ws)
            .map_err(|e| at_level(e, level))?;
        stats.steps += 1;
        stats.total_iterations += iters;
        stats.max_iterations = stats.max_iterations.max(iters);
        stats.max_residual = stats.max_residual.max(res);
        let urow = u.row_mut(level);
        for (node, (slot, &w)) in urow.iter_mut().zip(&next).enumerate() {
            *slot = beta_eps(w, eps);
            if !slot.is_finite() {
                return Err(Error::NonFiniteState { node, level });
            }
        }
        if let Some((lo, hi)) = monitor {
            check_band(u.row(level), lo, hi, level)?;
        }
        v.row_mut(level).copy_from_slice(&next);
        std::mem::swap(&mut current, &mut next);
    }
    Ok(Run {
        spec: spec.clone(),
        u,
        v,
        stats,
    })
}

fn at_level(e: Error, level: usize) -> Error {
    match e {
        Error::NonFiniteState { node, .. } => Error::NonFiniteState { node, level },
        other => Error::AtLevel {
            level,
            source: Box::new(other),
        },
    }
}

fn check_band(row: &[f64], lo: f64, hi: f64, level: usize) -> Result<()> {
    let slack = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    match row.iter().position(|&x| x < lo - slack || x > hi + slack) {
        Some(node) => Err(Error::BoundViolation {
            lo,
            hi,
            value: row[node],
            node,
            level,
        }),
        None => Ok(()),
    }
}

/// Forward Euler in `u`-form: `u⁺¹ = u + dt (Δ_h α_ε(u) + f(u))`.
pub fn solve_explicit_oracle(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    let grid = spec.grid;
    let (h, dt) = (grid.h(), grid.dt());
    let limit = h * h / (2.0 * spec.eps.value().max(1.0));
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let eps = spec.eps;
    let n = grid.n_nodes();
    let last = n - 1;
    let k = dt / (h * h);
    let mut u = SpaceTimeField::zeros(grid);
    u.row_mut(0).copy_from_slice(spec.u0.values());
    let mut a = vec![0.0; n];
    for level in 1..grid.n_levels() {
        let prev = u.row(level - 1).to_vec();
        for (slot, &x) in a.iter_mut().zip(&prev) {
            *slot = alpha_eps(x, eps);
        }
        let t = grid.t(level);
        let row = u.row_mut(level);
        for i in 0..n {
            let lap = if i == 0 {
                2.0 * (a[1] - a[0])
            } else if i == last {
                2.0 * (a[last - 1] - a[last])
            } else {
                a[i - 1] - 2.0 * a[i] + a[i + 1]
            };
            row[i] = prev[i] + k * lap + dt * spec.f.eval(prev[i]);
        }
        if let Boundary::Dirichlet(tr) = &spec.bc.left {
            row[0] = tr.at(t);
        }
        if let Boundary::Dirichlet(tr) = &spec.bc.right {
            row[last] = tr.at(t);
        }
    }
    u.check_finite()?;
    Ok(u)
}

/// Max over steps of the mismatch in the localized energy identity
/// `d/dt ½∫u²η² = -∫|∇(u⁺η)|² + ∫|u⁺|²|∇η|² - ε∫|∇(u⁻η)|² + ε∫|u⁻|²|∇η|² + ∫f(u)uη²`.
///
/// The left side is a forward difference between levels; the right side is
/// the average of its values on the two levels.
pub fn energy_identity_residual(
    u: &SpaceTimeField,
    eta: &SpatialBump,
    spec: &ProblemSpec,
) -> Result<f64> {
    let grid = *u.grid();
    eta.check_support(&grid)?;
    let xs = grid.xs();
    let h = grid.h();
    if eta.x_c - eta.r_x <= xs[1] || eta.x_c + eta.r_x >= xs[grid.n_cells() - 1] {
        return Err(Error::SupportViolation {
            support: [eta.x_c - eta.r_x, eta.x_c + eta.r_x, 0.0, grid.t_end()],
            domain: [xs[1], xs[grid.n_cells() - 1], 0.0, grid.t_end()],
        });
    }
    let eta_v: Vec<f64> = xs.iter().map(|&x| eta.value(x)).collect();
    let eta_d: Vec<f64> = xs.iter().map(|&x| eta.dx(x)).collect();
    let eps = spec.eps.value();

    let energy = |row: &[f64]| -> f64 {
        let s: Vec<f64> = row
            .iter()
            .zip(&eta_v)
            .map(|(u, e)| 0.5 * u * u * e * e)
            .collect();
        trapezoid(&s, h)
    };
    let rhs = |row: &[f64]| -> f64 {
        let n = row.len();
        let p: Vec<f64> = row
            .iter()
            .zip(&eta_v)
            .map(|(&u, e)| positive_part(u) * e)
            .collect();
        let m: Vec<f64> = row
            .iter()
            .zip(&eta_v)
            .map(|(&u, e)| negative_part(u) * e)
            .collect();
        let mut s = vec![0.0; n];
        for i in 1..n - 1 {
            let dp = (p[i + 1] - p[i - 1]) / (2.0 * h);
            let dm = (m[i + 1] - m[i - 1]) / (2.0 * h);
            let up = positive_part(row[i]);
            let um = negative_part(row[i]);
            let g2 = eta_d[i] * eta_d[i];
            s[i] = -dp * dp + up * up * g2 - eps * dm * dm
                + eps * um * um * g2
                + spec.f.eval(row[i]) * row[i] * eta_v[i] * eta_v[i];
        }
        trapezoid(&s, h)
    };

    let dt = grid.dt();
    let mut worst = 0.0f64;
    let mut e_prev = energy(u.row(0));
    let mut r_prev = rhs(u.row(0));
    for level in 1..grid.n_levels() {
        let e_next = energy(u.row(level));
        let r_next = rhs(u.row(level));
        let mismatch = (e_next - e_prev) / dt - 0.5 * (r_prev + r_next);
        worst = worst.max(mismatch.abs());
        e_prev = e_next;
        r_prev = r_next;
    }
    Ok(worst)
}

/// Order-preservation audit between two runs with ordered data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub violations: usize,
    /// `max (u_lo - u_hi)` over all nodes; negative when strictly ordered.
    pub worst_excess: f64,
}

pub fn comparison_check(lo: &Run, hi: &Run, tol: f64) -> Result<ComparisonReport> {
    if lo.spec.grid != hi.spec.grid {
        return Err(Error::Incompatible("different grids".into()));
    }
    if lo.spec.eps != hi.spec.eps {
        return Err(Error::Incompatible("different epsilon".into()));
    }
    if lo.spec.f != hi.spec.f {
        return Err(Error::Incompatible("different reaction terms".into()));
    }
    if lo
        .spec
        .u0
        .values()
        .iter()
        .zip(hi.spec.u0.values())
        .any(|(a, b)| a > b)
    {
        return Err(Error::Incompatible("initial data are not ordered".into()));
    }
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (a, b) in lo.u.values().iter().zip(hi.u.values()) {
        let excess = a - b;
        worst_excess = worst_excess.max(excess);
        if excess > tol {
            violations += 1;
        }
    }
    Ok(ComparisonReport {
        violations,
        worst_excess,
    })
}
