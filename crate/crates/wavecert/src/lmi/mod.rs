//! Dissipation certificates for the closed loop.
//!
//! The boundary traces of the coupled system are collected in
//! `xi = [u_t(0), u_x(1), v_t(0), v_t(1), v(1)]`. Outgoing characteristic
//! values at the weighted ends are `H xi`, incoming ones are `G xi`, and the
//! weighted energy functional decays at rate `alpha` when
//!
//! `Psi = H' E_alpha(1) S H - G' S G + Q_alpha`
//!
//! is negative definite for some positive multipliers `S`. The reduced
//! variant drops the controller tip displacement (admissible only when the
//! position gain `q` is zero) and certifies the seminorm instead.

mod solver;

pub use solver::{minimize_max_lambda, SolveOptions, SolveOutcome};

use nalgebra::{DMatrix, Matrix4, Matrix5, SMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControllerParams, PlantParams};

/// Which energy functional a certificate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Five multipliers, full norm including the tip displacement `v(1)`.
    Full,
    /// Four multipliers, seminorm only; requires `q = 0`.
    Reduced,
}

/// Positive multiplier weights `S1..S4` (plus `S5` in full mode) together
/// with the decay rate `alpha` they are meant to certify.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierVector {
    pub s: [f64; 4],
    pub s5: Option<f64>,
    pub alpha: f64,
}

impl MultiplierVector {
    pub fn full(s: [f64; 4], s5: f64, alpha: f64) -> Result<Self> {
        let mv = Self {
            s,
            s5: Some(s5),
            alpha,
        };
        mv.validate()?;
        Ok(mv)
    }

    pub fn reduced(s: [f64; 4], alpha: f64) -> Result<Self> {
        let mv = Self { s, s5: None, alpha };
        mv.validate()?;
        Ok(mv)
    }

    fn validate(&self) -> Result<()> {
        for &w in self.weights().iter() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveMultiplier(w));
            }
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::NegativeAlpha(self.alpha));
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        if self.s5.is_some() {
            Mode::Full
        } else {
            Mode::Reduced
        }
    }

    /// The weights as a slice-backed vector: `[S1..S4]` or `[S1..S5]`.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.s.to_vec();
        if let Some(s5) = self.s5 {
            w.push(s5);
        }
        w
    }

    fn from_weights(w: &[f64], alpha: f64) -> Result<Self> {
        match w.len() {
            4 => Self::reduced([w[0], w[1], w[2], w[3]], alpha),
            5 => Self::full([w[0], w[1], w[2], w[3]], w[4], alpha),
            n => Err(Error::PreconditionViolated(format!(
                "multiplier vector needs 4 or 5 weights, got {n}"
            ))),
        }
    }
}

/// Assembled certificate matrix, sized by mode.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiMatrix {
    Full(Matrix5<f64>),
    Reduced(Matrix4<f64>),
}

impl PsiMatrix {
    pub fn dim(&self) -> usize {
        match self {
            PsiMatrix::Full(_) => 5,
            PsiMatrix::Reduced(_) => 4,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max_with_vector().0
    }

    /// Largest eigenvalue and a corresponding unit eigenvector.
    pub fn lambda_max_with_vector(&self) -> (f64, Vec<f64>) {
        match self {
            PsiMatrix::Full(m) => {
                let se = m.symmetric_eigen();
                let (i, lam) = argmax(se.eigenvalues.as_slice());
                (lam, se.eigenvectors.column(i).iter().copied().collect())
            }
            PsiMatrix::Reduced(m) => {
                let se = m.symmetric_eigen();
                let (i, lam) = argmax(se.eigenvalues.as_slice());
                (lam, se.eigenvectors.column(i).iter().copied().collect())
            }
        }
    }

    /// Largest entry magnitude, used to set relative tolerances.
    pub fn amax(&self) -> f64 {
        match self {
            PsiMatrix::Full(m) => m.amax(),
            PsiMatrix::Reduced(m) => m.amax(),
        }
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let mut acc = 0.0;
        match self {
            PsiMatrix::Full(m) => {
                for i in 0..5 {
                    for j in 0..5 {
                        acc += xi[i] * m[(i, j)] * xi[j];
                    }
                }
            }
            PsiMatrix::Reduced(m) => {
                for i in 0..4 {
                    for j in 0..4 {
                        acc += xi[i] * m[(i, j)] * xi[j];
                    }
                }
            }
        }
        acc
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        match self {
            PsiMatrix::Full(m) => DMatrix::from_iterator(5, 5, m.iter().copied()),
            PsiMatrix::Reduced(m) => DMatrix::from_iterator(4, 4, m.iter().copied()),
        }
    }
}

fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Map from the trace vector `xi` to the outgoing characteristic values
/// `[l_u(1), r_u(0), l_v(1), r_v(0)]`.
pub fn build_h(plant: &PlantParams, ctrl: &ControllerParams) -> SMatrix<f64, 4, 5> {
    let (c1, g) = (plant.c1, plant.g);
    let (c2, h, q) = (ctrl.c2, ctrl.h, ctrl.q);
    SMatrix::<f64, 4, 5>::from_row_slice(&[
        0.0,
        c1,
        1.0,
        0.0,
        0.0,
        1.0 - c1 * g,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0 - c2 * h,
        -c2 * q,
        0.0,
        -c2,
        1.0,
        0.0,
        0.0,
    ])
}

/// Map from the trace vector `xi` to the incoming characteristic values
/// `[l_u(0), r_u(1), l_v(0), r_v(1)]`.
pub fn build_g(plant: &PlantParams, ctrl: &ControllerParams) -> SMatrix<f64, 4, 5> {
    let (c1, g) = (plant.c1, plant.g);
    let (c2, h, q) = (ctrl.c2, ctrl.h, ctrl.q);
    SMatrix::<f64, 4, 5>::from_row_slice(&[
        1.0 + c1 * g,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        -c1,
        1.0,
        0.0,
        0.0,
        0.0,
        c2,
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0 + c2 * h,
        c2 * q,
    ])
}

/// Exponential transport weights `diag(e^{2 a x / c1} I2, e^{2 a x / c2} I2)`.
pub fn build_e(alpha: f64, x: f64, plant: &PlantParams, ctrl: &ControllerParams) -> Matrix4<f64> {
    let e1 = (2.0 * alpha * x / plant.c1).exp();
    let e2 = (2.0 * alpha * x / ctrl.c2).exp();
    Matrix4::from_diagonal(&nalgebra::Vector4::new(e1, e1, e2, e2))
}

fn assemble_full(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    w: &[f64; 5],
    alpha: f64,
) -> Matrix5<f64> {
    let h = build_h(plant, ctrl);
    let g = build_g(plant, ctrl);
    let e = build_e(alpha, 1.0, plant, ctrl);
    let s = Matrix4::from_diagonal(&nalgebra::Vector4::new(w[0], w[1], w[2], w[3]));
    let mut psi = h.transpose() * e * s * h - g.transpose() * s * g;
    psi[(3, 4)] += w[4];
    psi[(4, 3)] += w[4];
    psi[(4, 4)] += 2.0 * alpha * w[4];
    0.5 * (psi + psi.transpose())
}

fn assemble_reduced(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    w: &[f64; 4],
    alpha: f64,
) -> Matrix4<f64> {
    let h = build_h(plant, ctrl).fixed_view::<4, 4>(0, 0).into_owned();
    let g = build_g(plant, ctrl).fixed_view::<4, 4>(0, 0).into_owned();
    let e = build_e(alpha, 1.0, plant, ctrl);
    let s = Matrix4::from_diagonal(&nalgebra::Vector4::new(w[0], w[1], w[2], w[3]));
    let psi = h.transpose() * e * s * h - g.transpose() * s * g;
    0.5 * (psi + psi.transpose())
}

/// Assemble the certificate matrix for the given multipliers.
///
/// A reduced multiplier vector demands `q = 0`; supplying one against a
/// controller with position feedback is a `ModeMismatch`.
pub fn build_psi(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    mv: &MultiplierVector,
) -> Result<PsiMatrix> {
    mv.validate()?;
    match mv.s5 {
        Some(s5) => {
            let w = [mv.s[0], mv.s[1], mv.s[2], mv.s[3], s5];
            Ok(PsiMatrix::Full(assemble_full(plant, ctrl, &w, mv.alpha)))
        }
        None => {
            if ctrl.q != 0.0 {
                return Err(Error::ModeMismatch(format!(
                    "reduced certificates require q = 0, got q = {}",
                    ctrl.q
                )));
            }
            Ok(PsiMatrix::Reduced(assemble_reduced(
                plant, ctrl, &mv.s, mv.alpha,
            )))
        }
    }
}

/// Outcome of a certificate search at a fixed rate (or at the maximized rate
/// when produced by [`max_decay_rate`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationResult {
    pub feasible: bool,
    pub witness: Option<MultiplierVector>,
    /// Verified largest eigenvalue at the returned multipliers (negative
    /// means certified, with simplex-normalized weights).
    pub margin: f64,
    pub alpha_star: Option<f64>,
    /// Overshoot coefficient of the certified exponential envelope.
    pub gamma: Option<f64>,
    pub iterations: usize,
}

fn mode_dim(mode: Mode) -> usize {
    match mode {
        Mode::Full => 5,
        Mode::Reduced => 4,
    }
}

fn check_mode(ctrl: &ControllerParams, mode: Mode) -> Result<()> {
    if mode == Mode::Reduced && ctrl.q != 0.0 {
        return Err(Error::ModeMismatch(format!(
            "reduced certificates require q = 0, got q = {}",
            ctrl.q
        )));
    }
    Ok(())
}

pub(crate) fn pencil_basis(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    alpha: f64,
    mode: Mode,
) -> Vec<DMatrix<f64>> {
    let dim = mode_dim(mode);
    (0..dim)
        .map(|i| {
            let psi = match mode {
                Mode::Full => {
                    let mut w = [0.0; 5];
                    w[i] = 1.0;
                    PsiMatrix::Full(assemble_full(plant, ctrl, &w, alpha))
                }
                Mode::Reduced => {
                    let mut w = [0.0; 4];
                    w[i] = 1.0;
                    PsiMatrix::Reduced(assemble_reduced(plant, ctrl, &w, alpha))
                }
            };
            psi.to_dmatrix()
        })
        .collect()
}

fn exact_psi(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    weights: &[f64],
    alpha: f64,
) -> PsiMatrix {
    match weights.len() {
        5 => PsiMatrix::Full(assemble_full(
            plant,
            ctrl,
            &[weights[0], weights[1], weights[2], weights[3], weights[4]],
            alpha,
        )),
        _ => PsiMatrix::Reduced(assemble_reduced(
            plant,
            ctrl,
            &[weights[0], weights[1], weights[2], weights[3]],
            alpha,
        )),
    }
}

fn default_starts(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    mode: Mode,
    warm: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let dim = mode_dim(mode);
    let mut starts = vec![vec![1.0 / dim as f64; dim]];
    if mode == Mode::Reduced && plant.g > 0.0 && ctrl.h > 0.0 {
        if let Ok(mv) = crate::analytic::positive_gain_witness(plant.c1, ctrl.c2, plant.g, ctrl.h)
        {
            let w = mv.weights();
            let sum: f64 = w.iter().sum();
            starts.push(w.iter().map(|x| x / sum).collect());
        }
    }
    if let Some(w) = warm {
        if w.len() == dim {
            starts.push(w.to_vec());
        }
    }
    starts
}

pub(crate) fn decide(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    alpha: f64,
    outcome: &SolveOutcome,
) -> Result<CertificationResult> {
    let psi = exact_psi(plant, ctrl, &outcome.weights, alpha);
    let margin = psi.lambda_max();
    let eps = 1e-8 * (1.0 + psi.amax());
    let feasible = margin < -eps;
    if !feasible && !outcome.converged {
        return Err(Error::SolverStall {
            best: margin,
            resolution: eps,
        });
    }
    let witness = if feasible {
        Some(MultiplierVector::from_weights(&outcome.weights, alpha)?)
    } else {
        None
    };
    let gamma = witness
        .as_ref()
        .map(|mv| estimate_overshoot(mv, plant, ctrl));
    Ok(CertificationResult {
        feasible,
        witness,
        margin,
        alpha_star: None,
        gamma,
        iterations: outcome.iterations,
    })
}

fn feasibility_inner(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    alpha: f64,
    mode: Mode,
    warm: Option<&[f64]>,
    quick: bool,
) -> Result<CertificationResult> {
    check_mode(ctrl, mode)?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    let basis = pencil_basis(plant, ctrl, alpha, mode);
    let starts = default_starts(plant, ctrl, mode, warm);
    let scale = 1.0 + basis.iter().map(|b| b.amax()).fold(0.0, f64::max);
    let opts = SolveOptions {
        early_exit: if quick { Some(-1e-6 * scale) } else { None },
        ..SolveOptions::default()
    };
    let outcome = minimize_max_lambda(&[basis], &starts, &opts);
    decide(plant, ctrl, alpha, &outcome)
}

/// Search for multipliers certifying decay at the fixed rate `alpha`.
pub fn feasibility(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    alpha: f64,
    mode: Mode,
) -> Result<CertificationResult> {
    feasibility_inner(plant, ctrl, alpha, mode, None, false)
}

/// Largest certifiable decay rate, located by doubling and bisection to the
/// absolute tolerance `tol`. Fails with `InfeasibleAtZero` when not even
/// marginal stability certifies.
pub fn max_decay_rate(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    mode: Mode,
    tol: f64,
) -> Result<CertificationResult> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::PreconditionViolated(format!(
            "bisection tolerance must be positive, got {tol}"
        )));
    }
    let base = feasibility_inner(plant, ctrl, 0.0, mode, None, false)?;
    if !base.feasible {
        return Err(Error::InfeasibleAtZero);
    }
    let mut iterations = base.iterations;
    let mut warm: Vec<f64> = base.witness.as_ref().map(|w| w.weights()).unwrap_or_default();
    let cap = 300.0 * plant.c1.min(ctrl.c2);
    let mut lo = 0.0_f64;
    let mut hi = (4.0 * tol).max(0.05 * plant.c1.min(ctrl.c2));
    let mut hit_cap = false;
    loop {
        if hi >= cap {
            hi = cap;
            hit_cap = true;
        }
        let r = feasibility_inner(plant, ctrl, hi, mode, Some(&warm), true)?;
        iterations += r.iterations;
        if r.feasible {
            lo = hi;
            if let Some(w) = r.witness.as_ref() {
                warm = w.weights();
            }
            if hit_cap {
                log::warn!(
                    "decay-rate search reached the cap {cap}; the certified rate is unbounded \
                     at this resolution"
                );
                break;
            }
            hi *= 2.0;
        } else {
            break;
        }
    }
    if !(hit_cap && lo == cap) {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let r = feasibility_inner(plant, ctrl, mid, mode, Some(&warm), true)?;
            iterations += r.iterations;
            if r.feasible {
                lo = mid;
                if let Some(w) = r.witness.as_ref() {
                    warm = w.weights();
                }
            } else {
                hi = mid;
            }
        }
    }
    let mut fin = feasibility_inner(plant, ctrl, lo, mode, Some(&warm), false)?;
    iterations += fin.iterations;
    fin.iterations = iterations;
    fin.alpha_star = Some(lo);
    Ok(fin)
}

/// Overshoot coefficient `sqrt(M/m)` of the certified envelope, where `m` and
/// `M` are the extreme values of the functional's pointwise weights
/// `S_i e^{2 alpha x / c} / c` over `x` in `[0, 1]` (plus `S5` in full mode).
pub fn estimate_overshoot(
    mv: &MultiplierVector,
    plant: &PlantParams,
    ctrl: &ControllerParams,
) -> f64 {
    let speeds = [plant.c1, plant.c1, ctrl.c2, ctrl.c2];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &c) in speeds.iter().enumerate() {
        let w0 = mv.s[i] / c;
        let w1 = mv.s[i] * (2.0 * mv.alpha / c).exp() / c;
        lo = lo.min(w0.min(w1));
        hi = hi.max(w0.max(w1));
    }
    if let Some(s5) = mv.s5 {
        lo = lo.min(s5);
        hi = hi.max(s5);
    }
    (hi / lo).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simu1() -> (PlantParams, ControllerParams) {
        (
            PlantParams::new(1.0, -0.27).unwrap(),
            ControllerParams::new(1.0, 0.6, 0.0).unwrap(),
        )
    }

    fn stable_q5() -> (PlantParams, ControllerParams) {
        (
            PlantParams::new(1.0, 3.0).unwrap(),
            ControllerParams::new(1.0, 0.9, 5.0).unwrap(),
        )
    }

    #[test]
    fn h_and_g_reference_rows() {
        let (plant, ctrl) = simu1();
        let h = build_h(&plant, &ctrl);
        let g = build_g(&plant, &ctrl);
        assert_eq!(h.row(1).iter().copied().collect::<Vec<_>>(), vec![
            1.27, 0.0, 0.0, 0.0, 0.0
        ]);
        assert_eq!(h.row(2).iter().copied().collect::<Vec<_>>(), vec![
            0.0, 0.0, 0.0, 0.4, 0.0
        ]);
        assert_eq!(g.row(0).iter().copied().collect::<Vec<_>>(), vec![
            0.73, 0.0, 0.0, 0.0, 0.0
        ]);
        assert_eq!(g.row(3).iter().copied().collect::<Vec<_>>(), vec![
            0.0, 0.0, 0.0, 1.6, 0.0
        ]);
    }

    #[test]
    fn psi_is_symmetric_and_block_diagonal_at_zero_rate() {
        let (plant, ctrl) = stable_q5();
        let mv = MultiplierVector::full([0.3, 0.2, 0.25, 0.15], 0.1, 0.0).unwrap();
        let psi = build_psi(&plant, &ctrl, &mv).unwrap();
        if let PsiMatrix::Full(m) = psi {
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
            // Blocks {0}, {1,2}, {3,4}: everything across them vanishes.
            for (i, j) in [(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)] {
                assert!(m[(i, j)].abs() < 1e-14, "psi[{i}][{j}] = {}", m[(i, j)]);
            }
        } else {
            panic!("expected full mode");
        }
    }

    #[test]
    fn reduced_with_position_gain_is_rejected() {
        let (plant, ctrl) = stable_q5();
        let mv = MultiplierVector::reduced([0.25; 4], 0.0).unwrap();
        assert!(matches!(
            build_psi(&plant, &ctrl, &mv),
            Err(Error::ModeMismatch(_))
        ));
        assert!(matches!(
            feasibility(&plant, &ctrl, 0.0, Mode::Reduced),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn multiplier_validation() {
        assert!(matches!(
            MultiplierVector::reduced([0.0, 0.1, 0.1, 0.1], 0.0),
            Err(Error::NonPositiveMultiplier(_))
        ));
        assert!(matches!(
            MultiplierVector::full([0.1; 4], 0.1, -0.2),
            Err(Error::NegativeAlpha(_))
        ));
    }

    #[test]
    fn feasibility_matches_reflection_condition() {
        let (plant, ctrl) = simu1();
        let r = feasibility(&plant, &ctrl, 0.0, Mode::Reduced).unwrap();
        assert!(r.feasible, "margin {}", r.margin);
        // Undamped controller end: |delta1 * delta2| = |delta1| > 1.
        let undamped = ControllerParams::new(1.0, 0.0, 0.0).unwrap();
        let r = feasibility(&plant, &undamped, 0.0, Mode::Reduced).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn full_mode_certifies_position_feedback_loop() {
        let (plant, ctrl) = stable_q5();
        let r = feasibility(&plant, &ctrl, 0.0, Mode::Full).unwrap();
        assert!(r.feasible, "margin {}", r.margin);
        assert!(r.gamma.unwrap() >= 1.0);
    }

    #[test]
    fn full_mode_without_position_gain_is_structurally_infeasible() {
        let (plant, ctrl) = simu1();
        let r = feasibility(&plant, &ctrl, 0.0, Mode::Full).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn decay_rate_matches_closed_form_for_matched_speeds() {
        let (plant, ctrl) = simu1();
        let r = max_decay_rate(&plant, &ctrl, Mode::Reduced, 1e-4).unwrap();
        let alpha = r.alpha_star.unwrap();
        let target = crate::analytic::alpha_dyn(1.0, -0.27, 0.6)
            .unwrap()
            .finite()
            .unwrap();
        assert!(
            (alpha - target).abs() < 5e-4,
            "alpha* = {alpha}, closed form {target}"
        );
        assert!(r.feasible);
        let w = r.witness.unwrap();
        assert_relative_eq!(w.alpha, alpha);
    }

    #[test]
    fn infeasible_at_zero_is_reported() {
        let plant = PlantParams::new(1.0, -0.27).unwrap();
        let undamped = ControllerParams::new(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            max_decay_rate(&plant, &undamped, Mode::Reduced, 1e-4),
            Err(Error::InfeasibleAtZero)
        ));
    }

    #[test]
    fn overshoot_reference_values() {
        let (plant, ctrl) = simu1();
        let mv = MultiplierVector::full([0.2; 4], 0.2, 0.0).unwrap();
        assert_relative_eq!(estimate_overshoot(&mv, &plant, &ctrl), 1.0);
        let wide = PlantParams::new(2.0, -0.27).unwrap();
        let mv = MultiplierVector::full([1.0; 4], 1.0, 0.0).unwrap();
        assert_relative_eq!(
            estimate_overshoot(&mv, &wide, &ctrl),
            2.0_f64.sqrt(),
            max_relative = 1e-15
        );
    }
}
