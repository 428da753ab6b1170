//! Closed-form quantities: decay-rate formulas, backstepping gain matching,
//! the reflection-product stability chart, an explicit multiplier witness for
//! the doubly-damped regime, and equilibrium classification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{build_psi, MultiplierVector};
use crate::model::{delta, ControllerParams, ExtReal, PlantParams};

fn check_no_pole(z: f64) -> Result<()> {
    if 1.0 + z == 0.0 {
        return Err(Error::ReflectionPole { z });
    }
    Ok(())
}

/// Certified decay rate of the matched-speed loop (`c1 = c2 = c`, `q = 0`):
/// `-(c/4) ln |delta(cg) delta(ch)|`.
///
/// A round trip of length 2 at speed `c` picks up both reflection
/// coefficients, so energy decays when their product has magnitude below 1.
/// Returns `PosInf` when one boundary absorbs perfectly (the product is 0)
/// and a negative value when the loop is unstable.
pub fn alpha_dyn(c: f64, g: f64, h: f64) -> Result<ExtReal> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::NonPositiveSpeed(c));
    }
    check_no_pole(c * g)?;
    check_no_pole(c * h)?;
    let p = (delta(c * g) * delta(c * h)).abs();
    if p == 0.0 {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(-(c / 4.0) * p.ln()))
}

/// Decay rate of the backstepping target system with boundary gain `k`:
/// `-(c1/2) ln |delta(c1 k)|`.
pub fn alpha_backstepping(c1: f64, k: f64) -> Result<ExtReal> {
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::NonPositiveSpeed(c1));
    }
    check_no_pole(c1 * k)?;
    let d = delta(c1 * k).abs();
    if d == 0.0 {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(-(c1 / 2.0) * d.ln()))
}

/// The two backstepping gains whose target decay rate equals `alpha_dyn` for
/// the matched-speed loop (both speeds `c1`, so the damped-end coefficient is
/// `delta(c1 h)` here).
///
/// With `p = |delta(c1 g) delta(c1 h)|` the gains solve
/// `|delta(c1 k)| = sqrt(p)`: the smaller root reflects with `+sqrt(p)`, the
/// larger with `-sqrt(p)`. The larger root escapes to infinity as `p -> 1`.
pub fn match_k(c1: f64, g: f64, h: f64) -> Result<(f64, ExtReal)> {
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::NonPositiveSpeed(c1));
    }
    check_no_pole(c1 * g)?;
    check_no_pole(c1 * h)?;
    let p = (delta(c1 * g) * delta(c1 * h)).abs();
    let r = p.sqrt();
    let small = (1.0 - r) / (c1 * (1.0 + r));
    let large = if r == 1.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite((1.0 + r) / (c1 * (1.0 - r)))
    };
    Ok((small, large))
}

/// One sample cell of the stability chart over the reflection parameters
/// `(cg, ch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartCell {
    pub cg: f64,
    pub ch: f64,
    pub stable: bool,
    pub delta_product: ExtReal,
}

/// Grid of stability flags for the matched-speed, `q = 0` loop: a cell is
/// stable exactly when `|delta(cg) delta(ch)| < 1`. Cells landing on a
/// reflection pole are flagged unstable with an infinite product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityChart {
    pub cells: Vec<ChartCell>,
    pub resolution: usize,
}

pub fn stability_chart(
    cg_range: (f64, f64),
    ch_range: (f64, f64),
    resolution: usize,
) -> Result<StabilityChart> {
    if resolution < 2 {
        return Err(Error::BadConfig(format!(
            "chart resolution must be at least 2, got {resolution}"
        )));
    }
    for (lo, hi) in [cg_range, ch_range] {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::BadConfig(format!(
                "chart range [{lo}, {hi}] is not a finite interval"
            )));
        }
    }
    let n = resolution;
    let coord = |range: (f64, f64), i: usize| {
        range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
    };
    let mut cells = Vec::with_capacity(n * n);
    for i in 0..n {
        let cg = coord(cg_range, i);
        for j in 0..n {
            let ch = coord(ch_range, j);
            let cell = if 1.0 + cg == 0.0 || 1.0 + ch == 0.0 {
                ChartCell {
                    cg,
                    ch,
                    stable: false,
                    delta_product: ExtReal::PosInf,
                }
            } else {
                let p = (delta(cg) * delta(ch)).abs();
                ChartCell {
                    cg,
                    ch,
                    stable: p < 1.0,
                    delta_product: ExtReal::Finite(p),
                }
            };
            cells.push(cell);
        }
    }
    Ok(StabilityChart {
        cells,
        resolution: n,
    })
}

/// Explicit reduced-mode multiplier witness for `g > 0`, `h > 0`, `q = 0`.
///
/// Starts from `S1 = S2 = 1/2`, `S3 = c1/(2 c2) + eps/2`, `S4 = S3 - eps`,
/// which makes the assembled matrix diagonal up to the `eps` perturbation,
/// and halves `eps` until the largest eigenvalue is safely negative.
pub fn positive_gain_witness(c1: f64, c2: f64, g: f64, h: f64) -> Result<MultiplierVector> {
    if !(g > 0.0) || !(h > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "the explicit witness requires g > 0 and h > 0, got g = {g}, h = {h}"
        )));
    }
    let plant = PlantParams::new(c1, g)?;
    let ctrl = ControllerParams::new(c2, h, 0.0)?;
    let base = c1 / (2.0 * c2);
    let mut eps = (c1 / c2).min(1.0) / 2.0;
    for _ in 0..200 {
        let s = MultiplierVector::reduced([0.5, 0.5, base + eps / 2.0, base - eps / 2.0], 0.0)?;
        let psi = build_psi(&plant, &ctrl, &s)?;
        let lam = psi.lambda_max();
        if lam < -1e-12 * (1.0 + psi.amax()) {
            return Ok(s);
        }
        eps *= 0.5;
    }
    Err(Error::PreconditionViolated(format!(
        "witness construction did not terminate for c1 = {c1}, c2 = {c2}, g = {g}, h = {h}"
    )))
}

/// Steady states of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumSet {
    /// `q != 0`: the origin is the only equilibrium.
    OriginOnly,
    /// `q = 0`: every constant pair `u = v = const` is an equilibrium.
    ConstantFamily,
}

pub fn equilibrium_set(q: f64) -> EquilibriumSet {
    if q == 0.0 {
        EquilibriumSet::ConstantFamily
    } else {
        EquilibriumSet::OriginOnly
    }
}
