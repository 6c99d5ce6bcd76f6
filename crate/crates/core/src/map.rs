//! The two- and three-dimensional Chialvo maps, the flux memductance and
//! their Jacobians.
//!
//! The 3D map couples the membrane variable to a magnetic flux `phi` through
//! the induction current `k * x * M(phi)`:
//!
//! ```text
//! x' = x^2 exp(y - x) + k0 + k x M(phi)
//! y' = a y - b x + c
//! phi' = k1 x - k2 phi
//! ```
//!
//! Nothing here traps on overflow: an exploding exponential comes back as a
//! non-finite state and callers decide what that means.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3};

use crate::error::{Error, Result};

/// Scalar parameters of the flux-coupled map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k0: f64,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Named parameter, used by sweeps, continuation and the config parser.
///
/// `Sigma` and `Mu` are network couplings; they have no meaning for a
/// single neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    A,
    B,
    C,
    K0,
    K,
    Alpha,
    Beta,
    K1,
    K2,
    Sigma,
    Mu,
}

impl Param {
    pub const MAP: [Param; 9] = [
        Param::A,
        Param::B,
        Param::C,
        Param::K0,
        Param::K,
        Param::Alpha,
        Param::Beta,
        Param::K1,
        Param::K2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::B => "b",
            Param::C => "c",
            Param::K0 => "k0",
            Param::K => "k",
            Param::Alpha => "alpha",
            Param::Beta => "beta",
            Param::K1 => "k1",
            Param::K2 => "k2",
            Param::Sigma => "sigma",
            Param::Mu => "mu",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, Param::Sigma | Param::Mu)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a" => Param::A,
            "b" => Param::B,
            "c" => Param::C,
            "k0" => Param::K0,
            "k" => Param::K,
            "alpha" => Param::Alpha,
            "beta" => Param::Beta,
            "k1" => Param::K1,
            "k2" => Param::K2,
            "sigma" => Param::Sigma,
            "mu" => Param::Mu,
            other => return Err(Error::InvalidArgument(format!("unknown parameter `{other}`"))),
        })
    }
}

impl MapParams {
    pub fn get(&self, p: Param) -> Result<f64> {
        Ok(match p {
            Param::A => self.a,
            Param::B => self.b,
            Param::C => self.c,
            Param::K0 => self.k0,
            Param::K => self.k,
            Param::Alpha => self.alpha,
            Param::Beta => self.beta,
            Param::K1 => self.k1,
            Param::K2 => self.k2,
            Param::Sigma | Param::Mu => return Err(Error::NotAMapParameter(p.name())),
        })
    }

    pub fn set(&mut self, p: Param, value: f64) -> Result<()> {
        let slot = match p {
            Param::A => &mut self.a,
            Param::B => &mut self.b,
            Param::C => &mut self.c,
            Param::K0 => &mut self.k0,
            Param::K => &mut self.k,
            Param::Alpha => &mut self.alpha,
            Param::Beta => &mut self.beta,
            Param::K1 => &mut self.k1,
            Param::K2 => &mut self.k2,
            Param::Sigma | Param::Mu => return Err(Error::NotAMapParameter(p.name())),
        };
        *slot = value;
        Ok(())
    }

    /// Copy with one parameter replaced.
    pub fn with(mut self, p: Param, value: f64) -> Result<Self> {
        self.set(p, value)?;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        Param::MAP.iter().all(|&p| self.get(p).is_ok_and(f64::is_finite))
    }

    /// Partial derivative of the map image with respect to one parameter,
    /// evaluated at `s`.
    pub fn param_derivative(&self, p: Param, s: State) -> Result<[f64; 3]> {
        let m = memductance(self.alpha, self.beta, s.phi);
        Ok(match p {
            Param::A => [0.0, s.y, 0.0],
            Param::B => [0.0, -s.x, 0.0],
            Param::C => [0.0, 1.0, 0.0],
            Param::K0 => [1.0, 0.0, 0.0],
            Param::K => [s.x * m, 0.0, 0.0],
            Param::Alpha => [self.k * s.x, 0.0, 0.0],
            Param::Beta => [3.0 * self.k * s.x * s.phi * s.phi, 0.0, 0.0],
            Param::K1 => [0.0, 0.0, s.x],
            Param::K2 => [0.0, 0.0, -s.phi],
            Param::Sigma | Param::Mu => return Err(Error::NotAMapParameter(p.name())),
        })
    }
}

/// One phase-space point of the 3D map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl State {
    pub const fn new(x: f64, y: f64, phi: f64) -> Self {
        Self { x, y, phi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.phi.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.phi]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Sup-norm distance.
    pub fn dist_inf(&self, other: &State) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.phi - other.phi).abs())
    }

    /// Lexicographic order on (x, y, phi); NaNs sort last.
    pub fn lex_cmp(&self, other: &State) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.phi.total_cmp(&other.phi))
    }
}

/// Point of the planar map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State2 {
    pub x: f64,
    pub y: f64,
}

impl State2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Parameters of the planar (flux-free) map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k0: f64,
}

impl From<&MapParams> for PlanarParams {
    fn from(p: &MapParams) -> Self {
        Self { a: p.a, b: p.b, c: p.c, k0: p.k0 }
    }
}

/// Memductance of the flux-controlled memristor, `alpha + 3 beta phi^2`.
#[inline]
pub fn memductance(alpha: f64, beta: f64, phi: f64) -> f64 {
    alpha + 3.0 * beta * phi * phi
}

/// One iteration of the flux-coupled map.
#[inline]
pub fn step3(p: &MapParams, s: State) -> State {
    let State { x, y, phi } = s;
    State {
        x: x * x * (y - x).exp() + p.k0 + p.k * x * memductance(p.alpha, p.beta, phi),
        y: p.a * y - p.b * x + p.c,
        phi: p.k1 * x - p.k2 * phi,
    }
}

/// One iteration of the planar map.
#[inline]
pub fn step2(p: &PlanarParams, s: State2) -> State2 {
    State2 {
        x: s.x * s.x * (s.y - s.x).exp() + p.k0,
        y: p.a * s.y - p.b * s.x + p.c,
    }
}

/// Jacobian of [`step3`] at `s`.
pub fn jacobian3(p: &MapParams, s: State) -> Matrix3<f64> {
    let State { x, y, phi } = s;
    let e = (y - x).exp();
    Matrix3::new(
        e * (2.0 * x - x * x) + p.k * memductance(p.alpha, p.beta, phi),
        x * x * e,
        6.0 * p.k * x * p.beta * phi,
        -p.b,
        p.a,
        0.0,
        p.k1,
        0.0,
        -p.k2,
    )
}

/// Jacobian of [`step2`] at `s`.
pub fn jacobian2(a: f64, b: f64, s: State2) -> Matrix2<f64> {
    let e = (s.y - s.x).exp();
    Matrix2::new(e * (2.0 * s.x - s.x * s.x), s.x * s.x * e, -b, a)
}

/// Parameter sets used throughout the examples and regression tests.
pub mod presets {
    use super::MapParams;

    /// Fixed-point census family (varying `k`): a=0.5, b=0.4, c=0.89,
    /// k0=-0.44, alpha=beta=0.1, k1=0.1, k2=0.2.
    pub fn fixed_point_family(k: f64) -> MapParams {
        MapParams { a: 0.5, b: 0.4, c: 0.89, k0: -0.44, k, alpha: 0.1, beta: 0.1, k1: 0.1, k2: 0.2 }
    }

    /// Fingered-attractor family; identical to [`fixed_point_family`].
    pub fn finger_family(k: f64) -> MapParams {
        fixed_point_family(k)
    }

    /// Forward/backward bifurcation family, same as the finger family but
    /// with the offset c = -0.89.
    pub fn bifurcation_family(k: f64) -> MapParams {
        MapParams { c: -0.89, ..fixed_point_family(k) }
    }

    /// Invariant-curve route family, parametrised by the recovery constant.
    pub fn invariant_curve_family(a: f64) -> MapParams {
        MapParams { a, b: 0.18, c: 0.28, k0: 0.06, k: -0.2, alpha: 0.1, beta: 0.2, k1: 0.1, k2: 0.2 }
    }

    /// Single-node parameters of the ring-star network studies.
    pub fn network_family(k: f64) -> MapParams {
        MapParams { a: 0.89, b: 0.6, c: 0.28, k0: 0.04, k, alpha: 0.1, beta: 0.2, k1: 0.1, k2: 0.2 }
    }

    /// Firing-pattern family (time series of spiking and bursting).
    pub fn firing_family(b: f64, k: f64) -> MapParams {
        MapParams { a: 0.6, b, c: 1.4, k0: 0.1, k, alpha: 0.1, beta: 0.1, k1: 0.1, k2: 0.2 }
    }
}
