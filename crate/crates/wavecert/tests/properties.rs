//! Structural invariants of the certificate matrix, the spectrum, and the
//! simulator, checked over randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use wavecert::lmi::PsiMatrix;
use wavecert::model::{from_riemann, to_riemann};
use wavecert::sim::{ExactSim, Expr};
use wavecert::spectrum::characteristic_matrix;
use wavecert::{build_psi, ControllerParams, Mode, MultiplierVector, PlantParams};

#[allow(clippy::too_many_arguments)]
fn full_psi(
    c1: f64,
    g: f64,
    c2: f64,
    h: f64,
    q: f64,
    s: [f64; 4],
    s5: f64,
    alpha: f64,
) -> nalgebra::Matrix5<f64> {
    let plant = PlantParams::new(c1, g).unwrap();
    let ctrl = ControllerParams::new(c2, h, q).unwrap();
    let mv = MultiplierVector::full(s, s5, alpha).unwrap();
    match build_psi(&plant, &ctrl, &mv).unwrap() {
        PsiMatrix::Full(m) => m,
        PsiMatrix::Reduced(_) => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// At zero decay rate the certificate matrix is symmetric and decouples
    /// into the blocks {u_t(0)}, {u_x(1), v_t(0)}, {v_t(1), v(1)}.
    #[test]
    fn psi_symmetric_and_block_diagonal_at_zero_rate(
        c1 in 0.3f64..3.0, c2 in 0.3f64..3.0,
        g in -0.3f64..3.0, h in -0.3f64..3.0, q in -2.0f64..5.0,
        s1 in 0.05f64..2.0, s2 in 0.05f64..2.0,
        s3 in 0.05f64..2.0, s4 in 0.05f64..2.0, s5 in 0.05f64..2.0,
    ) {
        prop_assume!(1.0 + c1 * g > 0.05 && 1.0 + c2 * h > 0.05);
        let m = full_psi(c1, g, c2, h, q, [s1, s2, s3, s4], s5, 0.0);
        let scale = m.amax();
        for i in 0..5 {
            for j in 0..5 {
                prop_assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-14 * scale);
            }
        }
        for (i, j) in [(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)] {
            prop_assert!(
                m[(i, j)].abs() <= 1e-14 * scale,
                "coupling at ({}, {}): {} (scale {})", i, j, m[(i, j)], scale
            );
        }
    }

    /// The certificate matrix is linear in the multipliers: scaling all
    /// weights scales the matrix.
    #[test]
    fn psi_is_homogeneous_in_the_multipliers(
        c1 in 0.3f64..3.0, c2 in 0.3f64..3.0,
        g in -0.3f64..3.0, h in -0.3f64..3.0, q in -2.0f64..5.0,
        alpha in 0.0f64..0.5,
        s1 in 0.05f64..2.0, s2 in 0.05f64..2.0,
        s3 in 0.05f64..2.0, s4 in 0.05f64..2.0, s5 in 0.05f64..2.0,
    ) {
        prop_assume!(1.0 + c1 * g > 0.05 && 1.0 + c2 * h > 0.05);
        let base = full_psi(c1, g, c2, h, q, [s1, s2, s3, s4], s5, alpha);
        for lambda in [1e-3, 1e3] {
            let scaled = full_psi(
                c1, g, c2, h, q,
                [lambda * s1, lambda * s2, lambda * s3, lambda * s4],
                lambda * s5, alpha,
            );
            let err = (scaled - base * lambda).amax();
            prop_assert!(
                err <= 1e-12 * lambda * base.amax(),
                "lambda = {}: entrywise error {}", lambda, err
            );
        }
    }

    /// Linearity in the weights makes the largest eigenvalue convex along
    /// weight segments, which is what lets the solver trust local descent.
    #[test]
    fn lambda_max_is_convex_in_the_weights(
        c1 in 0.3f64..3.0, c2 in 0.3f64..3.0,
        g in -0.3f64..3.0, h in -0.3f64..3.0, q in -2.0f64..5.0,
        alpha in 0.0f64..0.5,
        a1 in 0.05f64..2.0, a2 in 0.05f64..2.0, a3 in 0.05f64..2.0,
        a4 in 0.05f64..2.0, a5 in 0.05f64..2.0,
        b1 in 0.05f64..2.0, b2 in 0.05f64..2.0, b3 in 0.05f64..2.0,
        b4 in 0.05f64..2.0, b5 in 0.05f64..2.0,
    ) {
        prop_assume!(1.0 + c1 * g > 0.05 && 1.0 + c2 * h > 0.05);
        let plant = PlantParams::new(c1, g).unwrap();
        let ctrl = ControllerParams::new(c2, h, q).unwrap();
        let lm = |s: [f64; 4], s5: f64| {
            let mv = MultiplierVector::full(s, s5, alpha).unwrap();
            build_psi(&plant, &ctrl, &mv).unwrap().lambda_max()
        };
        let la = lm([a1, a2, a3, a4], a5);
        let lb = lm([b1, b2, b3, b4], b5);
        let lmid = lm(
            [0.5 * (a1 + b1), 0.5 * (a2 + b2), 0.5 * (a3 + b3), 0.5 * (a4 + b4)],
            0.5 * (a5 + b5),
        );
        let scale = 1.0 + la.abs().max(lb.abs());
        prop_assert!(
            lmid <= 0.5 * (la + lb) + 1e-10 * scale,
            "midpoint {} above chord {}", lmid, 0.5 * (la + lb)
        );
    }

    /// The characteristic determinant has real coefficients, so the spectrum
    /// is symmetric under conjugation.
    #[test]
    fn characteristic_determinant_commutes_with_conjugation(
        c1 in 0.3f64..3.0, c2 in 0.3f64..3.0,
        g in -0.3f64..3.0, h in -0.3f64..3.0, q in 0.0f64..5.0,
        re in -2.0f64..0.5, im in 0.1f64..20.0,
    ) {
        prop_assume!(1.0 + c1 * g > 0.05 && 1.0 + c2 * h > 0.05);
        let plant = PlantParams::new(c1, g).unwrap();
        let ctrl = ControllerParams::new(c2, h, q).unwrap();
        let s = Complex64::new(re, im);
        let d = characteristic_matrix(&plant, &ctrl, s).determinant();
        let d_conj = characteristic_matrix(&plant, &ctrl, s.conj()).determinant();
        prop_assert!(
            (d_conj - d.conj()).norm() <= 1e-12 * (1.0 + d.norm()),
            "det(conj s) = {}, conj det(s) = {}", d_conj, d.conj()
        );
    }

    /// Invariant and physical trace coordinates are inverse to each other.
    #[test]
    fn riemann_transform_round_trips(
        c in 0.1f64..10.0, ut in -5.0f64..5.0, ux in -5.0f64..5.0,
    ) {
        let (r, l) = to_riemann(c, ut, ux);
        let (ut2, ux2) = from_riemann(c, r, l);
        let scale = ut.abs() + c * ux.abs() + 1e-30;
        prop_assert!((ut2 - ut).abs() <= 1e-12 * scale);
        prop_assert!((ux2 - ux).abs() <= 1e-12 * scale / c);

        let (r2, l2) = to_riemann(c, ut2, ux2);
        prop_assert!((r2 - r).abs() <= 1e-12 * scale);
        prop_assert!((l2 - l).abs() <= 1e-12 * scale);
    }

    /// The simulator's invariant energy equals the physical field energy: the
    /// staggered sampling makes the mean square of (r, l) land exactly on the
    /// trapezoid rule for the integral of u_t^2 + c^2 u_x^2 plus a telescoped
    /// boundary cross term (c/n)(u_t u_x |_1 - u_t u_x |_0) per string.
    #[test]
    fn invariant_energy_matches_field_energy(
        au in -2.0f64..2.0, bu in -2.0f64..2.0, cu in -2.0f64..2.0, du in -2.0f64..2.0,
        av in -2.0f64..2.0, bv in -2.0f64..2.0, cv in -2.0f64..2.0, dv in -2.0f64..2.0,
        c1 in 0.3f64..3.0, c2 in 0.3f64..3.0,
        n1 in 3usize..40, n2 in 3usize..40,
    ) {
        let cubic = |a: f64, b: f64, c: f64, d: f64| {
            format!("({a}) + ({b})*x + ({c})*x^2 + ({d})*x^3")
        };
        let ic_u = Expr::parse(&cubic(au, bu, cu, du)).unwrap();
        let ic_ut = Expr::parse(&cubic(du, cu, bu, au)).unwrap();
        let ic_v = Expr::parse(&cubic(av, bv, cv, dv)).unwrap();
        let ic_vt = Expr::parse(&cubic(dv, cv, bv, av)).unwrap();

        let plant = PlantParams::new(c1, 0.5).unwrap();
        let ctrl = ControllerParams::new(c2, 0.5, 0.0).unwrap();
        let sim = ExactSim::new(
            plant, ctrl, &ic_u, &ic_ut, &ic_v, &ic_vt, n1, n2, 1e-3,
        ).unwrap();
        let seminorm = sim.state().energy().seminorm_h;

        let side = |pos: &Expr, vel: &Expr, c: f64, n: usize| {
            let strain = pos.deriv();
            let e = |x: f64| {
                let (ut, ux) = (vel.eval(x), strain.eval(x));
                ut * ut + c * c * ux * ux
            };
            let phi = |x: f64| vel.eval(x) * strain.eval(x);
            let mut trapz = 0.5 * (e(0.0) + e(1.0));
            for i in 1..n {
                trapz += e(i as f64 / n as f64);
            }
            trapz /= n as f64;
            trapz + c / n as f64 * (phi(1.0) - phi(0.0))
        };
        let direct = side(&ic_u, &ic_ut, c1, n1) + side(&ic_v, &ic_vt, c2, n2);
        prop_assert!(
            (seminorm * seminorm - direct).abs() <= 1e-12 * (1.0 + direct.abs()),
            "invariant energy {} vs field energy {}", seminorm * seminorm, direct
        );
    }
}

/// Halving the grid step must not move the solution: boundary traces are
/// exact transport algebra (tight tolerance), while the integrated position
/// observers and the energy carry the integrator and quadrature orders.
#[test]
fn solution_is_stable_under_grid_refinement() {
    let run = |n: usize| {
        let plant = PlantParams::new(1.0, -0.27).unwrap();
        let ctrl = ControllerParams::new(1.0, 0.6, 0.0).unwrap();
        let ic_u = Expr::parse("cos(2*pi*x) - 1").unwrap();
        let zero = Expr::parse("0").unwrap();
        let mut sim = ExactSim::new(
            plant, ctrl, &ic_u, &zero, &zero, &zero, n, n, 1.0 / n as f64,
        )
        .unwrap();
        for _ in 0..n {
            sim.step();
        }
        let st = sim.state().clone();
        assert!((st.t - 1.0).abs() < 1e-12);
        st
    };
    let coarse = run(100);
    let fine = run(200);

    assert!(
        (coarse.y - fine.y).abs() < 1e-10,
        "y: {} vs {}",
        coarse.y,
        fine.y
    );
    assert!((coarse.v1 - fine.v1).abs() < 1e-3);
    assert!((coarse.u0 - fine.u0).abs() < 1e-3);
    assert!((coarse.w - fine.w).abs() < 1e-3);

    let ec = coarse.energy();
    let ef = fine.energy();
    assert!(
        (ec.seminorm_h - ef.seminorm_h).abs() < 2e-2 * (1.0 + ef.seminorm_h),
        "seminorm: {} vs {}",
        ec.seminorm_h,
        ef.seminorm_h
    );
}

/// The full-mode certificate requires the tip multiplier; dropping to the
/// reduced mode is only legal when the position feedback gain is zero.
#[test]
fn reduced_mode_rejects_position_feedback()  {
    let plant = PlantParams::new(1.0, 3.0).unwrap();
    let ctrl = ControllerParams::new(1.0, 0.9, 5.0).unwrap();
    let mv = MultiplierVector::reduced([1.0, 1.0, 1.0, 1.0], 0.0).unwrap();
    let err = build_psi(&plant, &ctrl, &mv).unwrap_err();
    assert!(matches!(err, wavecert::Error::ModeMismatch(_)));

    let res = wavecert::feasibility(&plant, &ctrl, 0.0, Mode::Reduced);
    assert!(res.is_err());
}
