//! Parameter and state types for the coupled plant/controller system.
//!
//! The plant is a 1-D wave equation on `[0, 1]` with speed `c1`, a velocity
//! feedback condition `u_x(0,t) = g * u_t(0,t)` at its free end, and Dirichlet
//! actuation at `x = 1`. The controller is a second wave equation with speed
//! `c2` that receives the plant's Neumann trace `u_x(1,t)` at its own `x = 0`
//! end and dissipates through `v_x(1,t) = -h v_t(1,t) - q v(1,t)`. The
//! interconnection applies `u(1,t) = v(0,t)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Reflection coefficient `(1 - z) / (1 + z)` of a characteristic hitting a
/// boundary with impedance ratio `z`.
pub fn delta(z: f64) -> f64 {
    (1.0 - z) / (1.0 + z)
}

/// A real quantity that may be exactly infinite, such as a decay rate under
/// perfect absorption or the diverging branch of the gain-matching equation.
///
/// Serializes as a plain number when finite and as the strings `"inf"` /
/// `"-inf"` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    /// Value as an `f64`, mapping the infinite variants to IEEE infinities.
    pub fn as_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::NegInf => f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "inf"),
            ExtReal::NegInf => write!(f, "-inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => ser.serialize_f64(*x),
            ExtReal::PosInf => ser.serialize_str("inf"),
            ExtReal::NegInf => ser.serialize_str("-inf"),
        }
    }
}

/// Plant parameters: wave speed `c1 > 0` and boundary feedback slope `g`.
///
/// `g < 0` makes the uncontrolled plant anti-stable (all open-loop poles in
/// the right half-plane for `-1/c1 < g < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantParams {
    pub c1: f64,
    pub g: f64,
}

impl PlantParams {
    pub fn new(c1: f64, g: f64) -> Result<Self> {
        if !(c1 > 0.0) || !c1.is_finite() {
            return Err(Error::NonPositiveSpeed(c1));
        }
        if !g.is_finite() {
            return Err(Error::PreconditionViolated(format!(
                "plant feedback slope must be finite, got {g}"
            )));
        }
        if 1.0 + c1 * g == 0.0 {
            return Err(Error::UnitReflectionSingularity {
                name: "c1*g",
                value: c1 * g,
            });
        }
        Ok(Self { c1, g })
    }

    /// Reflection coefficient at the plant's free end.
    pub fn delta1(&self) -> f64 {
        delta(self.c1 * self.g)
    }
}

/// Controller parameters: wave speed `c2 > 0`, velocity damping `h`, and
/// position feedback `q` at the controller's far end. Any real `q` is
/// representable; destabilizing values are rejected by the certificates, not
/// here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerParams {
    pub c2: f64,
    pub h: f64,
    pub q: f64,
}

impl ControllerParams {
    pub fn new(c2: f64, h: f64, q: f64) -> Result<Self> {
        if !(c2 > 0.0) || !c2.is_finite() {
            return Err(Error::NonPositiveSpeed(c2));
        }
        if !h.is_finite() || !q.is_finite() {
            return Err(Error::PreconditionViolated(format!(
                "controller gains must be finite, got h = {h}, q = {q}"
            )));
        }
        if 1.0 + c2 * h <= 0.0 {
            return Err(Error::NonDissipativeBoundary(1.0 + c2 * h));
        }
        Ok(Self { c2, h, q })
    }

    /// Reflection coefficient at the controller's damped end (velocity part).
    pub fn delta2(&self) -> f64 {
        delta(self.c2 * self.h)
    }
}

/// One end of an uncertainty interval for the feedback slope `g`; the upper
/// end may be `+inf`, in which case `|delta(c*g)|` approaches 1 from
/// arbitrarily close as `g` grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GBound {
    Finite(f64),
    PosInf,
}

impl GBound {
    pub fn as_finite(&self) -> Option<f64> {
        match self {
            GBound::Finite(v) => Some(*v),
            GBound::PosInf => None,
        }
    }
}

/// Rectangular uncertainty set `[c_min, c_max] x [g_min, g_max]` for the
/// plant pair `(c1, g)`.
///
/// Construction rejects boxes on which the reflection coefficient
/// `delta(c*g)` has a pole, i.e. boxes where `c*g` can reach `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyBox {
    pub c_min: f64,
    pub c_max: f64,
    pub g_min: f64,
    pub g_max: GBound,
}

impl UncertaintyBox {
    pub fn new(c_min: f64, c_max: f64, g_min: f64, g_max: GBound) -> Result<Self> {
        if !(c_min > 0.0) || !c_min.is_finite() {
            return Err(Error::NonPositiveSpeed(c_min));
        }
        if !c_max.is_finite() || c_max < c_min {
            return Err(Error::BadBox(format!(
                "need 0 < c_min <= c_max, got [{c_min}, {c_max}]"
            )));
        }
        if !g_min.is_finite() {
            return Err(Error::BadBox(format!("g_min must be finite, got {g_min}")));
        }
        if let GBound::Finite(gm) = g_max {
            if !gm.is_finite() || gm < g_min {
                return Err(Error::BadBox(format!(
                    "need g_min <= g_max, got [{g_min}, {gm}]"
                )));
            }
        }
        let b = Self {
            c_min,
            c_max,
            g_min,
            g_max,
        };
        let (z_lo, z_hi) = b.z_range();
        if z_lo <= -1.0 && -1.0 <= z_hi {
            return Err(Error::UnboundedDelta { z_lo, z_hi });
        }
        Ok(b)
    }

    /// Range of `z = c * g` over the box. The upper end is `+inf` when
    /// `g_max` is unbounded and `g` can be positive.
    pub fn z_range(&self) -> (f64, f64) {
        let g_hi = match self.g_max {
            GBound::Finite(v) => v,
            GBound::PosInf => f64::INFINITY,
        };
        let corners = [
            self.c_min * self.g_min,
            self.c_max * self.g_min,
            self.c_min * g_hi,
            self.c_max * g_hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z in corners {
            lo = lo.min(z);
            hi = hi.max(z);
        }
        (lo, hi)
    }
}

/// Full state of the interconnected pair in Riemann-invariant form.
///
/// `r_u`/`l_u` hold the right- and left-moving plant invariants, `r_v`/`l_v`
/// the controller's. With the exact-characteristic scheme the right-movers
/// are stored at the left node of each transport cell and the left-movers at
/// the right node, so both arrays share the grid spacing `c * dt`. `v1`
/// tracks the controller tip position `v(1,t)` (needed whenever `q != 0`),
/// `w` the applied Dirichlet actuation `u(1,t)`, `y` the measured trace
/// `u_x(1,t)`, and `u0` the plant's free-end position `u(0,t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledWaveState {
    pub t: f64,
    pub dt: f64,
    pub r_u: Vec<f64>,
    pub l_u: Vec<f64>,
    pub r_v: Vec<f64>,
    pub l_v: Vec<f64>,
    pub v1: f64,
    pub w: f64,
    pub y: f64,
    pub u0: f64,
}

/// Instantaneous energy of a state: the velocity/strain seminorm and the
/// full norm that augments it with the controller tip displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReading {
    pub t: f64,
    /// `sqrt( 1/2 int (r_u^2 + l_u^2) + 1/2 int (r_v^2 + l_v^2) )`
    pub seminorm_h: f64,
    /// `sqrt( seminorm_h^2 + v(1)^2 )`
    pub norm_h0: f64,
}

/// Trapezoid-free mean of a sampled invariant: with node-indexed storage the
/// samples already sit at distinct nodes of a uniform grid covering `[0,1]`
/// with spacing `1/n`, so the plain average times the interval length is the
/// midpoint-accurate integral of the squared profile.
fn mean_square(field: &[f64]) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    field.iter().map(|x| x * x).sum::<f64>() / field.len() as f64
}

impl CoupledWaveState {
    /// Energy seminorm and augmented norm of the current state.
    pub fn energy(&self) -> EnergyReading {
        let sq = 0.5 * (mean_square(&self.r_u) + mean_square(&self.l_u))
            + 0.5 * (mean_square(&self.r_v) + mean_square(&self.l_v));
        let seminorm_h = sq.sqrt();
        let norm_h0 = (sq + self.v1 * self.v1).sqrt();
        EnergyReading {
            t: self.t,
            seminorm_h,
            norm_h0,
        }
    }
}

/// Convert physical traces `(u_t, u_x)` to Riemann invariants
/// `r = u_t - c u_x`, `l = u_t + c u_x`.
pub fn to_riemann(c: f64, u_t: f64, u_x: f64) -> (f64, f64) {
    (u_t - c * u_x, u_t + c * u_x)
}

/// Convert Riemann invariants back to physical traces
/// `u_t = (r + l) / 2`, `u_x = (l - r) / (2c)`.
pub fn from_riemann(c: f64, r: f64, l: f64) -> (f64, f64) {
    (0.5 * (r + l), (l - r) / (2.0 * c))
}
