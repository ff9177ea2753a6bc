//! Derived fields `v = α_ε(u)`, `w = ∫_h^t v` and the source `g`, plus the
//! discrete residual of `Δw - ∂_t w = g`.

use crate::error::{invalid, Result};
use crate::grid::{SpaceTimeField, Window};
use crate::nonlinearity::{alpha_eps, negative_part, Epsilon, NonlinearitySpec};
use crate::solver::BoundarySpec;

/// Quadrature used for the time integrals in `w` and `g`.
///
/// `Trapezoid` is the textbook cumulative rule. `Scheme` matches the implicit
/// Euler step exactly: `w` sums `v` at right endpoints and `∫f(u)` sums at
/// left endpoints, so `D_t w^n = v^n` and the discrete `w`-equation holds up
/// to the Newton tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeRule {
    #[default]
    Trapezoid,
    Scheme,
}

impl TimeRule {
    pub fn name(self) -> &'static str {
        match self {
            TimeRule::Trapezoid => "trapezoid",
            TimeRule::Scheme => "scheme",
        }
    }
}

impl std::str::FromStr for TimeRule {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(TimeRule::Trapezoid),
            "scheme" => Ok(TimeRule::Scheme),
            other => Err(invalid("time_rule", format!("unknown rule `{other}`"))),
        }
    }
}

/// `v = α_ε(u)` node-wise.
pub fn compute_v(u: &SpaceTimeField, eps: Epsilon) -> SpaceTimeField {
    u.map(|x| alpha_eps(x, eps))
}

/// `w(x, t) = ∫_h^t v(x, s) ds` with the trapezoid rule. Rows before
/// `h_level` are zero.
pub fn compute_w(v: &SpaceTimeField, h_level: usize) -> Result<SpaceTimeField> {
    compute_w_with(v, h_level, TimeRule::Trapezoid)
}

pub fn compute_w_with(
    v: &SpaceTimeField,
    h_level: usize,
    rule: TimeRule,
) -> Result<SpaceTimeField> {
    let grid = *v.grid();
    check_level(h_level, grid.n_levels())?;
    let dt = grid.dt();
    let mut w = SpaceTimeField::zeros(grid);
    for level in h_level + 1..grid.n_levels() {
        let (prev, next) = (v.row(level - 1).to_vec(), v.row(level));
        let before = w.row(level - 1).to_vec();
        let row = w.row_mut(level);
        for i in 0..row.len() {
            let incr = match rule {
                TimeRule::Trapezoid => 0.5 * dt * (prev[i] + next[i]),
                TimeRule::Scheme => dt * next[i],
            };
            row[i] = before[i] + incr;
        }
    }
    Ok(w)
}

/// `g = -(1-ε)u⁻(t) - u(h) - ∫_h^t f(u)` with the trapezoid rule.
pub fn compute_g(
    u: &SpaceTimeField,
    eps: Epsilon,
    h_level: usize,
    f: &NonlinearitySpec,
) -> Result<SpaceTimeField> {
    compute_g_with(u, eps, h_level, f, TimeRule::Trapezoid)
}

pub fn compute_g_with(
    u: &SpaceTimeField,
    eps: Epsilon,
    h_level: usize,
    f: &NonlinearitySpec,
    rule: TimeRule,
) -> Result<SpaceTimeField> {
    let grid = *u.grid();
    check_level(h_level, grid.n_levels())?;
    let dt = grid.dt();
    let e = eps.value();
    let n = grid.n_nodes();
    let base = u.row(h_level).to_vec();
    let mut integral = vec![0.0; n];
    let mut g = SpaceTimeField::zeros(grid);
    for level in h_level..grid.n_levels() {
        if level > h_level {
            let (prev, next) = (u.row(level - 1), u.row(level));
            for i in 0..n {
                integral[i] += match rule {
                    TimeRule::Trapezoid => 0.5 * dt * (f.eval(prev[i]) + f.eval(next[i])),
                    TimeRule::Scheme => dt * f.eval(prev[i]),
                };
            }
        }
        let now = u.row(level).to_vec();
        let row = g.row_mut(level);
        for i in 0..n {
            row[i] = -(1.0 - e) * negative_part(now[i]) - base[i] - integral[i];
        }
    }
    Ok(g)
}

fn check_level(h_level: usize, n_levels: usize) -> Result<()> {
    if h_level + 1 >= n_levels {
        return Err(invalid(
            "h_level",
            format!("{h_level} leaves no later level (n_levels = {n_levels})"),
        ));
    }
    Ok(())
}

/// `u` together with `v`, `w` and `g` for one cut time `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRun {
    pub base: SpaceTimeField,
    pub v: SpaceTimeField,
    pub h_level: usize,
    /// Zero on rows before `h_level`.
    pub w: SpaceTimeField,
    /// Zero on rows before `h_level`.
    pub g: SpaceTimeField,
    pub eps: Epsilon,
    pub rule: TimeRule,
}

impl TransformedRun {
    pub fn new(
        u: &SpaceTimeField,
        eps: Epsilon,
        f: &NonlinearitySpec,
        h_level: usize,
        rule: TimeRule,
    ) -> Result<Self> {
        let v = compute_v(u, eps);
        let w = compute_w_with(&v, h_level, rule)?;
        let g = compute_g_with(u, eps, h_level, f, rule)?;
        Ok(Self {
            base: u.clone(),
            v,
            h_level,
            w,
            g,
            eps,
            rule,
        })
    }

    /// Cut level nearest to time `h`.
    pub fn at_time(
        u: &SpaceTimeField,
        eps: Epsilon,
        f: &NonlinearitySpec,
        h: f64,
        rule: TimeRule,
    ) -> Result<Self> {
        let level = u.grid().level_of(h)?;
        Self::new(u, eps, f, level, rule)
    }

    /// Checks the bounds listed for the transformed fields; returns one
    /// message per violated bound.
    pub fn invariant_violations(&self, lambda: f64, lipschitz: f64, tol: f64) -> Vec<String> {
        let grid = *self.base.grid();
        let e = self.eps.value();
        let t_end = grid.t_end();
        let mut out = Vec::new();
        if self
            .base
            .values()
            .iter()
            .zip(self.v.values())
            .any(|(&u, &v)| alpha_eps(u, self.eps) != v)
        {
            out.push("v differs from alpha_eps(u)".to_string());
        }
        if self.w.row(self.h_level).iter().any(|&x| x != 0.0) {
            out.push("w(., h) is not zero".to_string());
        }
        let dt = grid.dt();
        let floor = -e * lambda * (1.0 + tol);
        for level in self.h_level + 1..grid.n_levels() {
            let (a, b) = (self.w.row(level - 1), self.w.row(level));
            if let Some(i) = (0..a.len()).find(|&i| (b[i] - a[i]) / dt < floor) {
                out.push(format!(
                    "D_t w below -eps*Lambda at node {i}, level {level}"
                ));
                break;
            }
        }
        let g_bound = (2.0 * lambda + lipschitz * lambda * t_end) * (1.0 + tol);
        let g_sup = self.g.sup_norm();
        if g_sup > g_bound {
            out.push(format!("|g| = {g_sup} exceeds {g_bound}"));
        }
        let (w_lo, w_hi) = (
            -lambda * e * t_end * (1.0 + tol),
            lambda * t_end * (1.0 + tol),
        );
        if let Some(&x) = self.w.values().iter().find(|&&x| x < w_lo || x > w_hi) {
            out.push(format!("w = {x} outside [{w_lo}, {w_hi}]"));
        }
        out
    }
}

/// `max |Δ_h w - D_t w - g|` over interior nodes and levels after `h`.
pub fn w_equation_residual(tr: &TransformedRun) -> f64 {
    w_equation_residual_in(tr, None)
}

/// As [`w_equation_residual`], restricted to nodes and levels inside `window`
/// when one is given.
pub fn w_equation_residual_in(tr: &TransformedRun, window: Option<&Window>) -> f64 {
    let grid = *tr.w.grid();
    let (h, dt) = (grid.h(), grid.dt());
    let n = grid.n_nodes();
    let (nodes, levels) = match window {
        Some(win) => (
            grid.nodes_in(win.x_lo, win.x_hi),
            grid.levels_in(win.t_lo, win.t_hi),
        ),
        None => (0..=n - 1, 0..=grid.n_levels() - 1),
    };
    let first = nodes.start().max(&1).to_owned();
    let last = nodes.end().min(&(n - 2)).to_owned();
    let mut worst = 0.0f64;
    for level in levels {
        if level <= tr.h_level {
            continue;
        }
        let (w, prev, g) = (tr.w.row(level), tr.w.row(level - 1), tr.g.row(level));
        for i in first..=last {
            let lap = (w[i - 1] - 2.0 * w[i] + w[i + 1]) / (h * h);
            let dtw = (w[i] - prev[i]) / dt;
            worst = worst.max((lap - dtw - g[i]).abs());
        }
    }
    worst
}

/// `w`-equation residual on the Neumann and Dirichlet boundary rows too, with
/// the ghost values implied by `bc` applied to `w` (reflection for Neumann).
/// Dirichlet rows are skipped since the scheme pins them.
pub fn w_equation_residual_with_boundary(tr: &TransformedRun, bc: &BoundarySpec) -> f64 {
    use crate::solver::Boundary;
    let grid = *tr.w.grid();
    let (h, dt) = (grid.h(), grid.dt());
    let n = grid.n_nodes();
    let mut worst = w_equation_residual(tr);
    for level in tr.h_level + 1..grid.n_levels() {
        let (w, prev, g) = (tr.w.row(level), tr.w.row(level - 1), tr.g.row(level));
        for (i, side, inner) in [(0, &bc.left, 1), (n - 1, &bc.right, n - 2)] {
            if matches!(side, Boundary::NeumannZero) {
                let lap = 2.0 * (w[inner] - w[i]) / (h * h);
                let dtw = (w[i] - prev[i]) / dt;
                worst = worst.max((lap - dtw - g[i]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::nonlinearity::NonlinearityKind;

    fn eps(x: f64) -> Epsilon {
        Epsilon::new(x).unwrap()
    }

    #[test]
    fn v_examples() {
        let g = Grid1D::unit(16, 8).unwrap();
        let u = SpaceTimeField::from_fn(g, |_, _| -1.0);
        assert!(compute_v(&u, eps(0.01))
            .values()
            .iter()
            .all(|&v| v == -0.01));
        let pos = SpaceTimeField::from_fn(g, |x, t| x * x + t);
        assert_eq!(compute_v(&pos, eps(0.3)), pos);
        let mixed = SpaceTimeField::from_fn(g, |x, t| x - 0.2 * t);
        let v = compute_v(&mixed, eps(0.2));
        let gap = mixed
            .values()
            .iter()
            .zip(v.values())
            .map(|(&u, &v)| (u.max(0.0) - v).abs())
            .fold(0.0, f64::max);
        let uminus = mixed
            .values()
            .iter()
            .map(|&u| (-u).max(0.0))
            .fold(0.0, f64::max);
        assert!((gap - 0.2 * uminus).abs() < 1e-15);
    }

    #[test]
    fn w_examples() {
        let g = Grid1D::unit(10, 40).unwrap();
        let c = SpaceTimeField::from_fn(g, |_, _| 0.7);
        let w = compute_w(&c, 10).unwrap();
        for n in 0..g.n_levels() {
            let expect = if n < 10 {
                0.0
            } else {
                0.7 * (g.t(n) - g.t(10))
            };
            assert!((w.at(3, n) - expect).abs() < 1e-14);
        }
        let lin = SpaceTimeField::from_fn(g, |_, t| t);
        let w = compute_w(&lin, 10).unwrap();
        let h = g.t(10);
        for n in 10..g.n_levels() {
            let t = g.t(n);
            assert!((w.at(5, n) - 0.5 * (t * t - h * h)).abs() < 1e-14);
        }
        assert!(compute_w(&SpaceTimeField::zeros(g), 0).unwrap().sup_norm() == 0.0);
        assert!(compute_w(&lin, 40).is_err());
    }

    #[test]
    fn g_examples() {
        let grid = Grid1D::unit(10, 20).unwrap();
        let f = NonlinearitySpec::zero();
        let minus = SpaceTimeField::from_fn(grid, |_, _| -1.0);
        let g = compute_g(&minus, eps(0.05), 0, &f).unwrap();
        assert!(g.values().iter().all(|&x| (x - 0.05).abs() < 1e-15));
        let plus = SpaceTimeField::from_fn(grid, |_, _| 0.4);
        let g = compute_g(&plus, eps(0.05), 5, &f).unwrap();
        assert!(g.values()[5 * grid.n_nodes()..].iter().all(|&x| x == -0.4));
        let zero = compute_g(&SpaceTimeField::zeros(grid), eps(0.5), 0, &f).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
    }

    #[test]
    fn constant_negative_state_has_zero_residual() {
        let grid = Grid1D::unit(20, 20).unwrap();
        let f = NonlinearitySpec::zero();
        let u = SpaceTimeField::from_fn(grid, |_, _| -1.0);
        for rule in [TimeRule::Trapezoid, TimeRule::Scheme] {
            let tr = TransformedRun::new(&u, eps(0.01), &f, 4, rule).unwrap();
            assert!(w_equation_residual(&tr) < 1e-12);
            assert!(tr.invariant_violations(1.0, 0.0, 1e-12).is_empty());
        }
    }

    #[test]
    fn invariant_violation_is_reported() {
        let grid = Grid1D::unit(20, 20).unwrap();
        let f = NonlinearitySpec::new(NonlinearityKind::LinearDecay { c: 1.0 }, 1.0).unwrap();
        let u = SpaceTimeField::from_fn(grid, |_, _| 5.0);
        let tr = TransformedRun::new(&u, eps(0.5), &f, 0, TimeRule::Scheme).unwrap();
        assert!(!tr.invariant_violations(1.0, 1.0, 1e-9).is_empty());
    }

    #[test]
    fn rule_parses() {
        assert_eq!("scheme".parse::<TimeRule>().unwrap(), TimeRule::Scheme);
        assert!("simpson".parse::<TimeRule>().is_err());
    }
}
