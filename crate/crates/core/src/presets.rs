//! Named initial/boundary data used by the experiments and the CLI.

use crate::benchmarks::NeumannSolution;
use crate::error::{invalid, Result};
use crate::grid::{Grid1D, ScalarField, Window};
use crate::nonlinearity::{Epsilon, NonlinearitySpec};
use crate::solver::{Boundary, BoundarySpec, ProblemSpec};

/// Physical start time of the Neumann benchmark; the run clock starts at 0.
pub const NEUMANN_T0: f64 = 0.1;

/// Grid, data, a-priori bound and diagnostic window for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: Grid1D,
    pub u0: ScalarField,
    pub bc: BoundarySpec,
    pub lambda: f64,
    pub window: Window,
    /// Present for the Neumann benchmark.
    pub neumann: Option<NeumannSolution>,
}

impl Scenario {
    pub fn problem(&self, eps: Epsilon, f: NonlinearitySpec) -> Result<ProblemSpec> {
        ProblemSpec::new(eps, f, self.u0.clone(), self.bc.clone(), self.lambda)
    }
}

/// `C¹` cubic blend from `left` (x ≤ center - width) to `right`
/// (x ≥ center + width).
pub fn smooth_step(x: f64, center: f64, width: f64, left: f64, right: f64) -> f64 {
    let s = ((x - center + width) / (2.0 * width)).clamp(0.0, 1.0);
    let blend = s * s * (3.0 - 2.0 * s);
    left + (right - left) * blend
}

pub fn tent(x: f64, center: f64, half_width: f64, peak: f64) -> f64 {
    peak * (1.0 - (x - center).abs() / half_width).max(0.0)
}

pub fn constant(grid: Grid1D, c: f64) -> Scenario {
    Scenario {
        name: format!("constant({c})"),
        grid,
        u0: ScalarField::constant(grid, c),
        bc: BoundarySpec::neumann(),
        lambda: c.abs().max(1.0),
        window: Window::default_interior(),
        neumann: None,
    }
}

/// Hot liquid `hot` on `x < 0` blended over `[-width, width]` into ice at
/// temperature `-w0`. Neumann ends.
pub fn melting(grid: Grid1D, hot: f64, w0: f64, width: f64) -> Result<Scenario> {
    if !(hot > 0.0 && w0 > 0.0 && width > 0.0) {
        return Err(invalid("preset", "melting needs hot, w0, width > 0"));
    }
    Ok(Scenario {
        name: "melting".into(),
        grid,
        u0: ScalarField::from_fn(grid, |x| smooth_step(x, 0.0, width, hot, -w0))?,
        bc: BoundarySpec::neumann(),
        lambda: hot.max(w0),
        window: Window::default_interior(),
        neumann: None,
    })
}

/// Default melting setup: `u0 = 1` blended into `-1` over `[-0.05, 0.05]`.
pub fn melting_default(grid: Grid1D) -> Scenario {
    melting(grid, 1.0, 1.0, 0.05).expect("default melting parameters are valid")
}

pub fn step(grid: Grid1D, left: f64, right: f64, width: f64) -> Result<Scenario> {
    if !(width > 0.0) {
        return Err(invalid("preset.width", "must be positive"));
    }
    Ok(Scenario {
        name: "step".into(),
        grid,
        u0: ScalarField::from_fn(grid, |x| smooth_step(x, 0.0, width, left, right))?,
        bc: BoundarySpec::neumann(),
        lambda: left.abs().max(right.abs()).max(1e-12),
        window: Window::default_interior(),
        neumann: None,
    })
}

pub fn tent_preset(grid: Grid1D, peak: f64, half_width: f64) -> Result<Scenario> {
    if !(half_width > 0.0) {
        return Err(invalid("preset.half_width", "must be positive"));
    }
    Ok(Scenario {
        name: "tent".into(),
        grid,
        u0: ScalarField::from_fn(grid, |x| tent(x, 0.0, half_width, peak))?,
        bc: BoundarySpec::neumann(),
        lambda: peak.abs().max(1e-12),
        window: Window::default_interior(),
        neumann: None,
    })
}

/// Strictly positive smooth data, `0.5 + 0.3 cos(πx)`.
pub fn positive(grid: Grid1D) -> Scenario {
    let u0 = ScalarField::from_fn(grid, |x| 0.5 + 0.3 * (std::f64::consts::PI * x).cos())
        .expect("finite profile");
    Scenario {
        name: "positive".into(),
        grid,
        u0,
        bc: BoundarySpec::neumann(),
        lambda: 1.0,
        window: Window::default_interior(),
        neumann: None,
    }
}

/// Neumann similarity benchmark on `[0, 2]`, started from the exact profile
/// at physical time [`NEUMANN_T0`]. Dirichlet `u_b` on the left, `-W0` on the
/// right. The grid must cover `[0, 2]`.
pub fn neumann(n_cells: usize, n_steps: usize, t_end: f64, u_b: f64, w0: f64) -> Result<Scenario> {
    let grid = Grid1D::new(0.0, 2.0, n_cells, t_end, n_steps)?;
    let sol = NeumannSolution::new(u_b, w0)?;
    let last_front = sol.front(NEUMANN_T0 + t_end);
    if last_front >= 1.5 {
        return Err(invalid(
            "t_end",
            format!("front reaches {last_front:.3} >= 1.5 before t_end"),
        ));
    }
    let u0 = ScalarField::from_fn(grid, |x| sol.initial_profile(x, NEUMANN_T0))?;
    Ok(Scenario {
        name: "neumann".into(),
        grid,
        u0,
        bc: BoundarySpec::new(
            Boundary::dirichlet_const(u_b),
            Boundary::dirichlet_const(-w0),
        ),
        lambda: u_b.max(w0),
        window: Window::new(0.2, 1.6, 0.1, 0.9 * t_end),
        neumann: Some(sol),
    })
}

/// Neumann benchmark with `u_b = W0 = 1` on `[0, 2] × [0, 1]`.
pub fn neumann_default(n_cells: usize, n_steps: usize) -> Scenario {
    neumann(n_cells, n_steps, 1.0, 1.0, 1.0).expect("default neumann parameters are valid")
}
