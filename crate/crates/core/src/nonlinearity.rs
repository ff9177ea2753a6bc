//! Pointwise scalar maps: the reaction term `f`, the degenerate diffusion
//! coefficient map `α_ε` and its inverse `β_ε`.
//!
//! `α_ε(u) = u` for `u ≥ 0` and `ε u` for `u ≤ 0`, so the negative phase
//! diffuses at rate `ε`. Everything else in the crate is built from these three
//! maps.

use crate::error::{invalid, Result};

/// Regularization parameter, restricted to `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(invalid("epsilon", format!("{value} is not in (0, 1]")));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `α_ε(u)`: identity on the positive phase, slope `ε` on the negative one.
#[inline]
pub fn alpha_eps(u: f64, eps: Epsilon) -> f64 {
    if u >= 0.0 {
        u
    } else {
        eps.0 * u
    }
}

/// `β_ε(v)`, the inverse of [`alpha_eps`].
#[inline]
pub fn beta_eps(v: f64, eps: Epsilon) -> f64 {
    if v >= 0.0 {
        v
    } else {
        v / eps.0
    }
}

/// Generalized derivative of `β_ε` used by the Newton solver. At the kink
/// `v = 0` the slope 1 is selected.
#[inline]
pub fn beta_eps_slope(v: f64, eps: Epsilon) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        1.0 / eps.0
    }
}

#[inline]
pub fn positive_part(u: f64) -> f64 {
    u.max(0.0)
}

#[inline]
pub fn negative_part(u: f64) -> f64 {
    (-u).max(0.0)
}

/// Shape of the reaction term.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    Zero,
    /// `f(u) = -c u`
    LinearDecay {
        c: f64,
    },
    /// `f(u) = a u (1 - u)`
    Logistic {
        a: f64,
    },
    /// Linear interpolation through `(u, f(u))` pairs, constant beyond the ends.
    PiecewiseLinear {
        breakpoints: Vec<(f64, f64)>,
    },
}

/// A Lipschitz reaction term with `f(0) = 0`, together with its Lipschitz
/// constant on the a-priori range `[-Λ, Λ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    kind: NonlinearityKind,
    lipschitz_bound: f64,
}

impl NonlinearitySpec {
    /// Builds the spec and computes `L` on `[-lambda, lambda]`.
    pub fn new(kind: NonlinearityKind, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("{lambda} must be positive and finite"),
            ));
        }
        let lipschitz_bound = match &kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::LinearDecay { c } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(invalid("f.c", format!("{c} must be a finite value >= 0")));
                }
                *c
            }
            NonlinearityKind::Logistic { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(invalid("f.a", format!("{a} must be positive and finite")));
                }
                // |f'(u)| = a |1 - 2u| is maximal at u = -Λ.
                a * (2.0 * lambda + 1.0)
            }
            NonlinearityKind::PiecewiseLinear { breakpoints } => {
                validate_breakpoints(breakpoints)?;
                breakpoints
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max)
            }
        };
        Ok(Self {
            kind,
            lipschitz_bound,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            lipschitz_bound: 0.0,
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Whether the kind is one of the closed forms for which the solver
    /// monitors the a-priori band.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::PiecewiseLinear { .. })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::LinearDecay { c } => -c * u,
            NonlinearityKind::Logistic { a } => a * u * (1.0 - u),
            NonlinearityKind::PiecewiseLinear { breakpoints } => interpolate(breakpoints, u),
        }
    }
}

/// Free-function form of [`NonlinearitySpec::eval`].
#[inline]
pub fn eval_f(spec: &NonlinearitySpec, u: f64) -> f64 {
    spec.eval(u)
}

fn validate_breakpoints(bp: &[(f64, f64)]) -> Result<()> {
    if bp.len() < 2 {
        return Err(invalid("f.breakpoints", "need at least two breakpoints"));
    }
    if bp.iter().any(|(u, f)| !u.is_finite() || !f.is_finite()) {
        return Err(invalid("f.breakpoints", "breakpoints must be finite"));
    }
    if bp.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid(
            "f.breakpoints",
            "abscissae must be strictly increasing",
        ));
    }
    match bp.iter().find(|(u, _)| *u == 0.0) {
        Some((_, f0)) if *f0 == 0.0 => Ok(()),
        Some((_, f0)) => Err(invalid(
            "f.breakpoints",
            format!("f(0) must be 0, got {f0}"),
        )),
        None => Err(invalid(
            "f.breakpoints",
            "a breakpoint at u = 0 is required",
        )),
    }
}

fn interpolate(bp: &[(f64, f64)], u: f64) -> f64 {
    let first = bp[0];
    let last = bp[bp.len() - 1];
    if u <= first.0 {
        return first.1;
    }
    if u >= last.0 {
        return last.1;
    }
    // first index whose abscissa exceeds u; guaranteed in 1..len
    let k = bp.partition_point(|(x, _)| *x <= u);
    let (x0, y0) = bp[k - 1];
    let (x1, y1) = bp[k];
    if u == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (u - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    #[test]
    fn epsilon_range() {
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(-0.1).is_err());
        assert!(Epsilon::new(1.5).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
        assert_eq!(Epsilon::new(1.0).unwrap().value(), 1.0);
    }

    #[test]
    fn eval_examples() {
        let zero = NonlinearitySpec::zero();
        assert_eq!(eval_f(&zero, 0.7), 0.0);
        let logistic = NonlinearitySpec::new(NonlinearityKind::Logistic { a: 1.0 }, 1.0).unwrap();
        assert_eq!(eval_f(&logistic, 0.0), 0.0);
        assert_eq!(eval_f(&logistic, 0.5), 0.25);
        assert_eq!(logistic.lipschitz_bound(), 3.0);
    }

    #[test]
    fn alpha_beta_examples() {
        assert_eq!(alpha_eps(2.0, eps(0.1)), 2.0);
        assert!((alpha_eps(-3.0, eps(0.1)) + 0.3).abs() < 1e-15);
        for e in [1.0, 0.3, 1e-6] {
            assert_eq!(alpha_eps(0.0, eps(e)), 0.0);
        }
        assert!((beta_eps(-0.3, eps(0.1)) + 3.0).abs() < 1e-15);
        assert_eq!(beta_eps(5.0, eps(0.01)), 5.0);
        for e in [1.0, 0.1, 1e-4] {
            for u in [-7.0, -1.0, 0.0, 1.0, 7.0] {
                let back = beta_eps(alpha_eps(u, eps(e)), eps(e));
                assert!(
                    (back - u).abs() <= 2.0 * f64::EPSILON * u.abs(),
                    "{u} {e} {back}"
                );
            }
        }
    }

    #[test]
    fn alpha_beta_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for e in [1.0, 0.1, 1e-2, 1e-4] {
            let e = eps(e);
            for _ in 0..10_000 {
                let u: f64 = rng.gen_range(-10.0..10.0);
                let w: f64 = rng.gen_range(-10.0..10.0);
                let (a, b) = (alpha_eps(u, e), alpha_eps(w, e));
                // monotone with slopes in {1, ε}
                if u < w {
                    assert!(a <= b);
                }
                let back = beta_eps(a, e);
                assert!((back - u).abs() <= 2.0 * f64::EPSILON * u.abs());
                // pointwise distance to u⁺
                assert!((a - positive_part(u)).abs() <= e.value() * u.abs());
            }
        }
    }

    #[test]
    fn piecewise_linear_validation() {
        let bad_order = vec![(0.0, 0.0), (-1.0, 1.0)];
        assert!(NonlinearitySpec::new(
            NonlinearityKind::PiecewiseLinear {
                breakpoints: bad_order
            },
            1.0
        )
        .is_err());
        let no_zero = vec![(-1.0, 1.0), (1.0, -1.0)];
        assert!(NonlinearitySpec::new(
            NonlinearityKind::PiecewiseLinear {
                breakpoints: no_zero
            },
            1.0
        )
        .is_err());
        let nonzero_at_zero = vec![(-1.0, 1.0), (0.0, 0.5), (1.0, -1.0)];
        assert!(NonlinearitySpec::new(
            NonlinearityKind::PiecewiseLinear {
                breakpoints: nonzero_at_zero
            },
            1.0
        )
        .is_err());
    }

    #[test]
    fn piecewise_linear_interpolates_and_extrapolates_flat() {
        let bp = vec![(-1.0, 2.0), (0.0, 0.0), (2.0, 1.0)];
        let f = NonlinearitySpec::new(NonlinearityKind::PiecewiseLinear { breakpoints: bp }, 3.0)
            .unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(-0.5), 1.0);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(-5.0), 2.0);
        assert_eq!(f.eval(9.0), 1.0);
        assert_eq!(f.lipschitz_bound(), 2.0);
    }

    #[test]
    fn lipschitz_bound_holds_on_samples() {
        let lambda = 1.5;
        let kinds = [
            NonlinearityKind::Zero,
            NonlinearityKind::LinearDecay { c: 2.0 },
            NonlinearityKind::Logistic { a: 0.7 },
            NonlinearityKind::PiecewiseLinear {
                breakpoints: vec![(-1.0, 0.3), (0.0, 0.0), (0.5, 1.0), (1.5, -0.2)],
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in kinds {
            let f = NonlinearitySpec::new(kind, lambda).unwrap();
            assert_eq!(f.eval(0.0), 0.0);
            let l = f.lipschitz_bound();
            for _ in 0..10_000 {
                let a: f64 = rng.gen_range(-lambda..lambda);
                let b: f64 = rng.gen_range(-lambda..lambda);
                if a == b {
                    continue;
                }
                let q = ((f.eval(a) - f.eval(b)) / (a - b)).abs();
                assert!(q <= l * (1.0 + 1e-12) + 1e-12, "{q} > {l}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn beta_inverts_alpha(u in -1e3f64..1e3, e in 1e-6f64..=1.0) {
            let e = Epsilon::new(e).unwrap();
            let back = beta_eps(alpha_eps(u, e), e);
            proptest::prop_assert!((back - u).abs() <= 4.0 * f64::EPSILON * u.abs());
            let fwd = alpha_eps(beta_eps(u, e), e);
            proptest::prop_assert!((fwd - u).abs() <= 4.0 * f64::EPSILON * u.abs());
        }
    }
}
