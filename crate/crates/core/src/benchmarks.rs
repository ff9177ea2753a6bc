//! Closed-form reference solutions.
//!
//! * the Neumann similarity solution of the classical one-phase Stefan
//!   problem (constant latent heat, no reaction);
//! * the planar travelling profile `A[1 - exp((t + ξx)/ξ²)]` that describes
//!   the blow-up limit at a smooth point of the free boundary;
//! * the linear vanishing-viscosity heat flow `∂_t ũ = ε ũ''` started from a
//!   continuous profile.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::grid::{ScalarField, Window};
use crate::tridiag;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function.
///
/// For `|x| < 2.5` the positive-term series
/// `erf x = (2/√π) e^{-x²} Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))` is summed; beyond
/// that the complementary function is evaluated by its continued fraction
/// (modified Lentz).
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= 2.0 * x2 / (2.0 * n as f64 + 1.0);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        FRAC_2_SQRT_PI * (-x2).exp() * sum
    } else {
        1.0 - erfc_cf(x)
    }
}

/// `erfc x` for `x ≥ 2.5` via
/// `erfc x = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..300 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        d = if d.abs() < TINY { TINY } else { d };
        c = x + a / c;
        c = if c.abs() < TINY { TINY } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Left side of the similarity condition, `√π λ e^{λ²} erf λ`.
pub fn stefan_number_map(lambda: f64) -> f64 {
    PI.sqrt() * lambda * (lambda * lambda).exp() * erf(lambda)
}

/// Root of `√π λ e^{λ²} erf λ = u_b / W0` on `[1e-8, 5]` by bisection.
pub fn neumann_lambda(u_b: f64, w0: f64) -> Result<f64> {
    if !(u_b > 0.0 && u_b.is_finite()) {
        return Err(invalid("u_b", format!("{u_b} must be positive")));
    }
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(invalid("w0", format!("{w0} must be positive")));
    }
    let target = u_b / w0;
    let g = |l: f64| stefan_number_map(l) - target;
    let (mut lo, mut hi) = (1e-8, 5.0);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(Error::BracketFailure { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Classical one-phase Stefan solution on the half line with boundary
/// temperature `u_b`, latent heat `W0` and front `s(t) = 2λ√t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannSolution {
    pub u_b: f64,
    pub w0: f64,
    pub lambda: f64,
}

impl NeumannSolution {
    pub fn new(u_b: f64, w0: f64) -> Result<Self> {
        Ok(Self {
            u_b,
            w0,
            lambda: neumann_lambda(u_b, w0)?,
        })
    }

    pub fn front(&self, t: f64) -> f64 {
        2.0 * self.lambda * t.sqrt()
    }

    pub fn front_speed(&self, t: f64) -> f64 {
        self.lambda / t.sqrt()
    }

    /// Temperature in the liquid, zero beyond the front.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let s = self.front(t);
        let u = if x < s {
            self.u_b * (1.0 - erf(x / (2.0 * t.sqrt())) / erf(self.lambda))
        } else {
            0.0
        };
        (u, s)
    }

    pub fn du_dx(&self, x: f64, t: f64) -> f64 {
        if x >= self.front(t) {
            return 0.0;
        }
        let z = x / (2.0 * t.sqrt());
        -self.u_b / erf(self.lambda) * FRAC_2_SQRT_PI * (-z * z).exp() / (2.0 * t.sqrt())
    }

    /// `W0 s'(t) + ∂_x u(s⁻, t)`, zero for the exact solution.
    pub fn flux_mismatch(&self, t: f64) -> f64 {
        let s = self.front(t);
        let z = s / (2.0 * t.sqrt());
        let grad =
            -self.u_b / erf(self.lambda) * FRAC_2_SQRT_PI * (-z * z).exp() / (2.0 * t.sqrt());
        self.w0 * self.front_speed(t) + grad
    }

    /// Initial data for a run started at physical time `t0`: the exact
    /// temperature behind the front and `-W0` ahead of it.
    pub fn initial_profile(&self, x: f64, t0: f64) -> f64 {
        if x < self.front(t0) {
            self.eval(x, t0).0
        } else {
            -self.w0
        }
    }
}

/// Evaluates the similarity solution. Returns `(u, front)`.
pub fn neumann_eval(sol: &NeumannSolution, x: f64, t: f64) -> (f64, f64) {
    sol.eval(x, t)
}

/// `ũ(x,t) = A[1 - e^{(t+ξx)/ξ²}]` on `{t < -ξx}`, zero elsewhere. It solves
/// the heat equation in its support and vanishes on the line `t = -ξx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarWave {
    pub a: f64,
    pub xi: f64,
}

impl PlanarWave {
    pub fn new(a: f64, xi: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("A", format!("{a} must be positive")));
        }
        if xi == 0.0 || !xi.is_finite() {
            return Err(invalid("xi", "slope must be finite and non-zero"));
        }
        Ok(Self { a, xi })
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        (t + self.xi * x) / (self.xi * self.xi)
    }

    pub fn in_support(&self, x: f64, t: f64) -> bool {
        t < -self.xi * x
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        if self.in_support(x, t) {
            self.a * (1.0 - self.phase(x, t).exp())
        } else {
            0.0
        }
    }

    /// `(∂_t ũ, ∂_x ũ, ∂_x² ũ)` on the closure of the support.
    pub fn derivatives(&self, x: f64, t: f64) -> (f64, f64, f64) {
        let e = self.phase(x, t).exp();
        let xi2 = self.xi * self.xi;
        (-self.a * e / xi2, -self.a * e / self.xi, -self.a * e / xi2)
    }
}

pub fn planar_wave_eval(pw: &PlanarWave, x: f64, t: f64) -> f64 {
    pw.eval(x, t)
}

/// Solves `∂_t ũ = ε ũ''` by backward Euler on `phi`'s grid, with initial and
/// Dirichlet data `φ⁻`, and returns `sup |ũ_ε - φ⁻|` over the nodes of
/// `window` (all levels in `[window.t_lo, window.t_hi]`) for each `ε`.
pub fn linear_heat_viscosity_sweep(
    phi: &ScalarField,
    epsilons: &[f64],
    window: &Window,
) -> Result<Vec<f64>> {
    let grid = *phi.grid();
    let target: Vec<f64> = phi.values().iter().map(|&p| (-p).max(0.0)).collect();
    let n = target.len();
    let nodes = grid.nodes_in(window.x_lo, window.x_hi);
    let levels = grid.levels_in(window.t_lo, window.t_hi);
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(invalid("epsilon", format!("{eps} must be positive")));
        }
        let k = eps * grid.dt() / (grid.h() * grid.h());
        let mut lower = vec![-k; n];
        let mut diag = vec![1.0 + 2.0 * k; n];
        let mut upper = vec![-k; n];
        for i in [0, n - 1] {
            lower[i] = 0.0;
            diag[i] = 1.0;
            upper[i] = 0.0;
        }
        let mut u = target.clone();
        let mut scratch = Vec::new();
        let mut worst = 0.0f64;
        let sup_in_window = |u: &[f64]| {
            nodes
                .clone()
                .map(|i| (u[i] - target[i]).abs())
                .fold(0.0, f64::max)
        };
        if levels.contains(&0) {
            worst = worst.max(sup_in_window(&u));
        }
        for level in 1..grid.n_levels() {
            tridiag::solve_in_place(&lower, &diag, &upper, &mut u, &mut scratch);
            if levels.contains(&level) {
                worst = worst.max(sup_in_window(&u));
            }
        }
        out.push(worst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    #[test]
    fn erf_reference_values() {
        assert_eq!(erf(0.0), 0.0);
        // tabulated values
        for (x, e) in [
            (0.1, 0.1124629160182849),
            (0.5, 0.5204998778130465),
            (1.0, 0.8427007929497149),
            (2.0, 0.9953222650189527),
            (3.0, 0.9999779095030014),
        ] {
            assert!(
                (erf(x) - e).abs() < 5e-16 * e.max(1.0) * 4.0,
                "{x}: {} vs {e}",
                erf(x)
            );
            assert!((erf(-x) + e).abs() < 2e-15);
        }
        assert!((erf(6.0) - 1.0).abs() < 1e-16);
        assert_eq!(erf(40.0), 1.0);
    }

    #[test]
    fn erf_is_continuous_at_the_branch_switch() {
        let below = erf(2.5 - 1e-12);
        let above = erf(2.5 + 1e-12);
        assert!((above - below).abs() < 1e-14);
    }

    #[test]
    fn erf_derivative_identity() {
        let d = 1e-5;
        for k in 0..60 {
            let x = -3.0 + 0.1 * k as f64;
            let fd = (erf(x + d) - erf(x - d)) / (2.0 * d);
            let exact = FRAC_2_SQRT_PI * (-x * x).exp();
            assert!((fd - exact).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn lambda_small_stefan_number() {
        assert!(neumann_lambda(1e-6, 1.0).unwrap() < 1e-3);
    }

    #[test]
    fn lambda_monotone_and_accurate() {
        let l1 = neumann_lambda(1.0, 1.0).unwrap();
        let l2 = neumann_lambda(2.0, 1.0).unwrap();
        assert!(l2 > l1);
        assert!((stefan_number_map(l1) - 1.0).abs() <= 1e-12);
        assert!((stefan_number_map(l2) - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn lambda_bracket_failure() {
        assert!(matches!(
            neumann_lambda(1e12, 1.0),
            Err(Error::BracketFailure { .. })
        ));
        assert!(neumann_lambda(-1.0, 1.0).is_err());
    }

    #[test]
    fn neumann_boundary_front_and_flux() {
        let sol = NeumannSolution::new(1.0, 1.0).unwrap();
        for t in [0.1, 0.5, 1.0] {
            assert_eq!(sol.eval(0.0, t).0, 1.0);
            let s = sol.front(t);
            assert!(sol.eval(s * (1.0 - 1e-15), t).0.abs() < 1e-12);
            assert_eq!(sol.eval(s + 0.1, t).0, 0.0);
            assert!(sol.flux_mismatch(t).abs() < 1e-10);
            // closed-form gradient vs centered differences
            let x = 0.5 * s;
            let d = 1e-6;
            let fd = (sol.eval(x + d, t).0 - sol.eval(x - d, t).0) / (2.0 * d);
            assert!((fd - sol.du_dx(x, t)).abs() < 1e-7);
        }
    }

    #[test]
    fn planar_wave_properties() {
        let pw = PlanarWave::new(0.7, -1.3).unwrap();
        // free line t = -ξx
        for x in [0.1, 0.5, 2.0] {
            let t = -pw.xi * x;
            assert!(pw.eval(x, t).abs() < 1e-15);
            let (ut, ux, _) = pw.derivatives(x, t);
            // |∇ũ|² = A²ξ⁻² = -A ∂_t ũ on the free line
            let a2 = pw.a * pw.a / (pw.xi * pw.xi);
            assert!((ux * ux - a2).abs() < 1e-12);
            assert!((-pw.a * ut - a2).abs() < 1e-12);
        }
        // deep inside the support ũ → A
        assert!((pw.eval(100.0, -500.0) - pw.a).abs() < 1e-12);
        // heat equation in the support
        for k in 0..100 {
            let x = 0.05 * k as f64;
            let t = -pw.xi * x - 0.01 - 0.02 * (k % 7) as f64;
            assert!(pw.in_support(x, t));
            let (ut, _, uxx) = pw.derivatives(x, t);
            assert!((ut - uxx).abs() <= 1e-12);
        }
        assert!(PlanarWave::new(1.0, 0.0).is_err());
    }

    #[test]
    fn linear_heat_sweep_trivial_cases() {
        let g = Grid1D::unit(100, 100).unwrap();
        let w = Window::new(-2.0 / 3.0, 2.0 / 3.0, 0.0, 1.0);
        let zero = ScalarField::constant(g, 0.3); // φ⁻ ≡ 0
        let d = linear_heat_viscosity_sweep(&zero, &[0.1, 0.01], &w).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
        let c = ScalarField::constant(g, -0.4);
        let d = linear_heat_viscosity_sweep(&c, &[0.1, 0.01], &w).unwrap();
        assert!(d.iter().all(|&x| x < 1e-12), "{d:?}");
    }
}
