//! Certificates over parameter boxes.
//!
//! The plant's wave speed and boundary gain enter the certificate matrix only
//! through the speed itself and the reflection number `z = c1 * g`. Over a
//! box `[c_min, c_max] x [g_min, g_max]` the worst reflection magnitude is
//! attained at an endpoint of the induced `z` interval (or approached in the
//! unbounded-gain limit, where it tends to one). A single multiplier vector
//! that certifies the anchored worst case at both extreme speeds then covers
//! the whole box: the top eigenvalue is convex in `c1` between the speed
//! vertices, and the reflection block only loosens as `|delta|` shrinks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{
    build_psi, minimize_max_lambda, pencil_basis, Mode, MultiplierVector, SolveOptions,
};
use crate::model::{delta, ControllerParams, GBound, PlantParams, UncertaintyBox};

/// Location of the worst-case reflection number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "z")]
pub enum ZMax {
    /// Attained at a finite `z` on the boundary of the induced interval.
    At(f64),
    /// Approached as the gain grows without bound; the magnitude limit is 1.
    LimitPosInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCase {
    /// Supremum of `|delta(c1 g)|` over the box.
    pub delta_max: f64,
    pub z_max: ZMax,
    /// Whether the supremum is attained (false only in the unbounded limit).
    pub attained: bool,
}

/// Supremum of the reflection magnitude over a parameter box.
///
/// `|delta|` is monotone on each side of `z = 1` away from the pole at
/// `z = -1`, so the supremum over the induced `z` interval sits at one of its
/// endpoints, or equals the limit value 1 when the gain is unbounded and no
/// finite endpoint beats it.
pub fn delta_max(bx: &UncertaintyBox) -> Result<WorstCase> {
    let (z_lo, z_hi) = bx.z_range();
    let lo_mag = delta(z_lo).abs();
    if z_hi.is_finite() {
        let hi_mag = delta(z_hi).abs();
        if lo_mag >= hi_mag {
            Ok(WorstCase {
                delta_max: lo_mag,
                z_max: ZMax::At(z_lo),
                attained: true,
            })
        } else {
            Ok(WorstCase {
                delta_max: hi_mag,
                z_max: ZMax::At(z_hi),
                attained: true,
            })
        }
    } else if lo_mag >= 1.0 {
        Ok(WorstCase {
            delta_max: lo_mag,
            z_max: ZMax::At(z_lo),
            attained: true,
        })
    } else {
        Ok(WorstCase {
            delta_max: 1.0,
            z_max: ZMax::LimitPosInf,
            attained: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexMargin {
    pub c1: f64,
    pub z: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustReport {
    pub feasible: bool,
    pub worst: WorstCase,
    pub witness: Option<MultiplierVector>,
    /// Worst verified top eigenvalue across the anchor pencils.
    pub margin: f64,
    pub vertices: Vec<VertexMargin>,
    pub mode: Mode,
    pub iterations: usize,
}

fn anchor_points(bx: &UncertaintyBox, worst: &WorstCase) -> Vec<(f64, f64)> {
    let z_anchor = match worst.z_max {
        ZMax::At(z) => z,
        ZMax::LimitPosInf => 0.0,
    };
    let mut pts = vec![(bx.c_min, z_anchor), (bx.c_max, z_anchor)];
    if worst.delta_max < 1.0 && z_anchor != 0.0 {
        // Strictly contractive boxes also need the interior reflection
        // ordering pinned, which the z = 0 pencils enforce.
        pts.push((bx.c_min, 0.0));
        pts.push((bx.c_max, 0.0));
    }
    pts
}

/// Search for one multiplier vector certifying marginal stability across the
/// whole box.
pub fn certify_robust(
    bx: &UncertaintyBox,
    ctrl: &ControllerParams,
    mode: Mode,
) -> Result<RobustReport> {
    if mode == Mode::Reduced && ctrl.q != 0.0 {
        return Err(Error::ModeMismatch(format!(
            "reduced certificates require q = 0, got q = {}",
            ctrl.q
        )));
    }
    let worst = delta_max(bx)?;
    let anchors = anchor_points(bx, &worst);
    let mut pencils: Vec<Vec<DMatrix<f64>>> = Vec::new();
    let mut plants: Vec<PlantParams> = Vec::new();
    for &(c, z) in &anchors {
        let plant = PlantParams::new(c, z / c)?;
        pencils.push(pencil_basis(&plant, ctrl, 0.0, mode));
        plants.push(plant);
    }
    let dim = match mode {
        Mode::Full => 5,
        Mode::Reduced => 4,
    };
    let starts = vec![vec![1.0 / dim as f64; dim]];
    let outcome = minimize_max_lambda(&pencils, &starts, &SolveOptions::default());

    let mut margin = f64::NEG_INFINITY;
    let mut amax = 0.0_f64;
    let mut vertices = Vec::new();
    let mv = MultiplierVector {
        s: [
            outcome.weights[0],
            outcome.weights[1],
            outcome.weights[2],
            outcome.weights[3],
        ],
        s5: outcome.weights.get(4).copied(),
        alpha: 0.0,
    };
    for (plant, &(c, z)) in plants.iter().zip(anchors.iter()) {
        let psi = build_psi(plant, ctrl, &mv)?;
        let lam = psi.lambda_max();
        margin = margin.max(lam);
        amax = amax.max(psi.amax());
        vertices.push(VertexMargin {
            c1: c,
            z,
            lambda_max: lam,
        });
    }
    let eps = 1e-8 * (1.0 + amax);
    let feasible = margin < -eps;
    if !feasible && !outcome.converged {
        return Err(Error::SolverStall {
            best: margin,
            resolution: eps,
        });
    }
    Ok(RobustReport {
        feasible,
        worst,
        witness: feasible.then(|| mv.clone()),
        margin,
        vertices,
        mode,
        iterations: outcome.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplicationOutcome {
    pub samples: usize,
    pub all_hold: bool,
    /// Largest top eigenvalue seen across the sampled parameter points.
    pub worst_lambda: f64,
    pub seed: u64,
}

/// Spot-check that a box witness actually certifies sampled interior points.
///
/// Unbounded gain ranges are sampled up to a finite surrogate ceiling of
/// `10^3`, which is where the reflection magnitude has long saturated.
pub fn implication_check(
    bx: &UncertaintyBox,
    ctrl: &ControllerParams,
    witness: &MultiplierVector,
    samples: usize,
    seed: u64,
) -> Result<ImplicationOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_hi = match bx.g_max {
        GBound::Finite(g) => g,
        GBound::PosInf => 1e3,
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let c = rng.gen_range(bx.c_min..=bx.c_max);
        let g = rng.gen_range(bx.g_min..=g_hi);
        let plant = PlantParams::new(c, g)?;
        let psi = build_psi(&plant, ctrl, witness)?;
        worst = worst.max(psi.lambda_max());
    }
    Ok(ImplicationOutcome {
        samples,
        all_hold: worst < 0.0,
        worst_lambda: worst,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchKind {
    /// Push `g_min` further negative by factors of 1.02.
    GMin,
    /// Widen the speed range by factors of 1.02 in both directions.
    CRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub last_feasible: UncertaintyBox,
    pub last_report: RobustReport,
    /// The expansion that failed, when the search ended at an infeasible box
    /// rather than at the step limit.
    pub first_infeasible: Option<UncertaintyBox>,
    pub steps: usize,
    pub exhausted: bool,
}

/// Grow a certified box geometrically until certification first fails.
pub fn search_box(
    bx: &UncertaintyBox,
    ctrl: &ControllerParams,
    mode: Mode,
    kind: SearchKind,
    max_steps: usize,
) -> Result<SearchReport> {
    if kind == SearchKind::GMin && !(bx.g_min < 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "gain-floor search needs g_min < 0, got {}",
            bx.g_min
        )));
    }
    let first = certify_robust(bx, ctrl, mode)?;
    if !first.feasible {
        return Err(Error::PreconditionViolated(
            "interval search needs a certifiable starting box".into(),
        ));
    }
    let mut current = *bx;
    let mut report = first;
    let mut steps = 0usize;
    while steps < max_steps {
        let next = match kind {
            SearchKind::GMin => {
                UncertaintyBox::new(current.c_min, current.c_max, current.g_min * 1.02, current.g_max)
            }
            SearchKind::CRange => UncertaintyBox::new(
                current.c_min / 1.02,
                current.c_max * 1.02,
                current.g_min,
                current.g_max,
            ),
        };
        let next = match next {
            Ok(b) => b,
            // The expansion crossed the reflection pole: nothing beyond can
            // certify, so the current box is final.
            Err(_) => {
                return Ok(SearchReport {
                    last_feasible: current,
                    last_report: report,
                    first_infeasible: None,
                    steps,
                    exhausted: false,
                });
            }
        };
        steps += 1;
        let r = certify_robust(&next, ctrl, mode)?;
        if r.feasible {
            current = next;
            report = r;
        } else {
            return Ok(SearchReport {
                last_feasible: current,
                last_report: report,
                first_infeasible: Some(next),
                steps,
                exhausted: false,
            });
        }
    }
    Ok(SearchReport {
        last_feasible: current,
        last_report: report,
        first_infeasible: None,
        steps,
        exhausted: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_ctrl() -> ControllerParams {
        ControllerParams::new(1.0, 0.6, 0.0).unwrap()
    }

    #[test]
    fn worst_case_on_a_negative_band() {
        let bx = UncertaintyBox::new(0.74, 1.45, -0.6, GBound::Finite(0.0)).unwrap();
        let wc = delta_max(&bx).unwrap();
        assert!(matches!(wc.z_max, ZMax::At(z) if (z + 0.87).abs() < 1e-12));
        assert!((wc.delta_max - delta(-0.87).abs()) < 1e-12);
        assert!((wc.delta_max - 14.384615384615387).abs() < 1e-9);
    }

    #[test]
    fn worst_case_with_unbounded_gain() {
        let bx = UncertaintyBox::new(0.74, 1.45, -0.27, GBound::PosInf).unwrap();
        let wc = delta_max(&bx).unwrap();
        // delta at z = 1.45 * (-0.27) = -0.3915 beats the limit value 1.
        assert!(wc.attained);
        assert!(matches!(wc.z_max, ZMax::At(z) if (z + 0.3915).abs() < 1e-12));
        assert!((wc.delta_max - 2.286770747740345).abs() < 1e-12);
    }

    #[test]
    fn limit_dominates_contractive_boxes() {
        let bx = UncertaintyBox::new(0.9, 1.1, 0.1, GBound::PosInf).unwrap();
        let wc = delta_max(&bx).unwrap();
        assert!(!wc.attained);
        assert_eq!(wc.delta_max, 1.0);
        assert!(matches!(wc.z_max, ZMax::LimitPosInf));
    }

    #[test]
    fn reference_band_certifies() {
        let bx = UncertaintyBox::new(0.8, 1.4, -0.29, GBound::PosInf).unwrap();
        let r = certify_robust(&bx, &band_ctrl(), Mode::Reduced).unwrap();
        assert!(r.feasible, "margin {}", r.margin);
        let w = r.witness.unwrap();
        let check = implication_check(&bx, &band_ctrl(), &w, 50, 7).unwrap();
        assert!(check.all_hold, "worst lambda {}", check.worst_lambda);
    }

    #[test]
    fn strongly_antistable_band_fails() {
        let bx = UncertaintyBox::new(0.74, 1.45, -0.6, GBound::Finite(0.0)).unwrap();
        let r = certify_robust(&bx, &band_ctrl(), Mode::Reduced).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn gain_floor_search_finds_the_last_band() {
        let bx = UncertaintyBox::new(0.9, 1.1, -0.2, GBound::PosInf).unwrap();
        let rep = search_box(&bx, &band_ctrl(), Mode::Reduced, SearchKind::GMin, 100).unwrap();
        assert!(!rep.exhausted);
        assert!(rep.first_infeasible.is_some());
        assert!(rep.last_feasible.g_min <= -0.2);
        // One more 2% step on the reported floor must fail.
        let beyond = UncertaintyBox::new(0.9, 1.1, rep.last_feasible.g_min * 1.02, GBound::PosInf)
            .unwrap();
        let r = certify_robust(&beyond, &band_ctrl(), Mode::Reduced).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn gmin_search_requires_negative_floor() {
        let bx = UncertaintyBox::new(0.9, 1.1, 0.1, GBound::PosInf).unwrap();
        assert!(matches!(
            search_box(&bx, &band_ctrl(), Mode::Reduced, SearchKind::GMin, 10),
            Err(Error::PreconditionViolated(_))
        ));
    }
}
