//! FitzHugh-Nagumo vector field, parameter validation and rest-point geometry.
//!
//! The homogeneous system is
//!
//! ```text
//! du/dt = (u - u^3/3 - v) / c
//! dv/dt = c (u - a v + b)
//! ```
//!
//! with `0 < a < 1`, `b > 0`, `c > 0`. Under those constraints the linear
//! nullcline `v = (u + b)/a` crosses the cubic nullcline `v = u - u^3/3`
//! exactly once.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid FitzHugh-Nagumo parameters: {0}")]
    InvalidParams(String),
    #[error("equilibrium search failed: {0}")]
    NoEquilibrium(String),
}

/// Model constants `[a, b, c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    a: f64,
    b: f64,
    c: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            a: 0.8,
            b: 0.7,
            c: 3.0,
        }
    }
}

impl FhnParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, DynamicsError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(DynamicsError::InvalidParams(format!(
                "parameters must be finite (a={a}, b={b}, c={c})"
            )));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "require 0 < a < 1, got a={a}"
            )));
        }
        if !(b > 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "require b > 0, got b={b}"
            )));
        }
        if !(c > 0.0) {
            return Err(DynamicsError::InvalidParams(format!(
                "require c > 0, got c={c}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Skips the inequality checks. Used for symmetry experiments such as `b = 0`.
    pub fn new_unchecked(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// The field in the slice form expected by [`crate::integrate`].
    pub fn vector_field(self) -> impl Fn(f64, &[f64], &mut [f64]) + Copy + Send + Sync {
        move |_t, s, out| {
            let d = fhn_rhs(State::new(s[0], s[1]), &self);
            out[0] = d.u;
            out[1] = d.v;
        }
    }
}

/// A point `(u, v)` of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub u: f64,
    pub v: f64,
}

impl State {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.abs().max(self.v.abs())
    }
}

/// Rest point together with the max-norm of the field evaluated there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u_e: f64,
    pub v_e: f64,
    pub residual_norm: f64,
}

impl Equilibrium {
    pub fn state(&self) -> State {
        State::new(self.u_e, self.v_e)
    }
}

#[inline]
pub fn fhn_rhs(s: State, p: &FhnParams) -> State {
    State {
        u: (s.u - s.u * s.u * s.u / 3.0 - s.v) / p.c,
        v: p.c * (s.u - p.a * s.v + p.b),
    }
}

const BRACKET: (f64, f64) = (-10.0, 10.0);
const BISECTION_WIDTH: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const NEWTON_TOL: f64 = 1e-14;
const MAX_NEWTON: usize = 50;

/// Rest point from the cubic `(a/3) u^3 + (1 - a) u + b = 0`, obtained by
/// substituting the linear nullcline into the cubic one.
///
/// Bisection on `[-10, 10]` locates the root, Newton polishes it.
pub fn equilibrium(p: &FhnParams) -> Result<Equilibrium, DynamicsError> {
    let (a, b) = (p.a, p.b);
    let g = |u: f64| (a / 3.0) * u * u * u + (1.0 - a) * u + b;
    let dg = |u: f64| a * u * u + (1.0 - a);

    let (mut lo, mut hi) = BRACKET;
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
        if g_lo == 0.0 {
            return Ok(finish(lo, p));
        }
        if g_hi == 0.0 {
            return Ok(finish(hi, p));
        }
        return Err(DynamicsError::NoEquilibrium(format!(
            "no sign change of the nullcline cubic on [{lo}, {hi}]"
        )));
    }
    let lo_negative = g_lo < 0.0;
    let mut iterations = 0;
    while hi - lo > BISECTION_WIDTH {
        if iterations == MAX_BISECTIONS {
            return Err(DynamicsError::NoEquilibrium(
                "bisection did not converge".into(),
            ));
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let mut u = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let slope = dg(u);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let step = g(u) / slope;
        u -= step;
        if step.abs() <= NEWTON_TOL * u.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged || !u.is_finite() {
        return Err(DynamicsError::NoEquilibrium(
            "Newton refinement did not converge".into(),
        ));
    }
    Ok(finish(u, p))
}

fn finish(u_e: f64, p: &FhnParams) -> Equilibrium {
    let v_e = (u_e + p.b) / p.a;
    let residual_norm = fhn_rhs(State::new(u_e, v_e), p).max_abs();
    Equilibrium {
        u_e,
        v_e,
        residual_norm,
    }
}

/// Both nullclines sampled on a u-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Nullclines {
    /// `v = u - u^3/3`, where `du/dt` vanishes.
    pub cubic: Vec<f64>,
    /// `v = (u + b)/a`, where `dv/dt` vanishes.
    pub linear: Vec<f64>,
}

pub fn nullclines(p: &FhnParams, u_grid: &[f64]) -> Nullclines {
    let cubic = u_grid.iter().map(|&u| u - u * u * u / 3.0).collect();
    let linear = u_grid.iter().map(|&u| (u + p.b) / p.a).collect();
    Nullclines { cubic, linear }
}
