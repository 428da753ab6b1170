//! Characteristic roots of the interconnection and of the comparison laws.
//!
//! Separable exponential solutions reduce both strings to a four-dimensional
//! linear system in the travelling-wave amplitudes; closed-loop eigenvalues
//! are the zeros of its determinant. Rows carrying a common factor `s` are
//! divided by it during assembly, so the determinant stays entire and the
//! origin never appears as a spurious root. For matched speeds the zeros
//! collapse onto a single vertical line given in closed form; the general
//! case is handled by a winding-number subdivision search with a damped
//! Newton polish.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{delta, ControllerParams, PlantParams};

/// `exp(z)` with the real part clamped to avoid overflow; callers warn when
/// their search region actually reaches the clamp.
fn cexp(z: Complex64) -> Complex64 {
    Complex64::from_polar(z.re.clamp(-700.0, 700.0).exp(), z.im)
}

/// Amplitude-space boundary matrix of the interconnected pair at `s`.
///
/// Column order: outgoing/incoming plant amplitudes, then controller
/// amplitudes. The free-end and flux rows are divided by `s`; the tip row is
/// divided by `s` only when `q = 0`, which is exactly when it carries the
/// common factor.
pub fn characteristic_matrix(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    s: Complex64,
) -> Matrix4<Complex64> {
    let (c1, g) = (plant.c1, plant.g);
    let (c2, h, q) = (ctrl.c2, ctrl.h, ctrl.q);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let e1p = cexp(s / c1);
    let e1m = cexp(-s / c1);
    let e2p = cexp(s / c2);
    let e2m = cexp(-s / c2);
    let (t3, t4) = if q != 0.0 {
        (
            e2p * (s / c2 + h * s + q),
            e2m * (-s / c2 + h * s + q),
        )
    } else {
        (
            e2p * (1.0 / c2 + h),
            e2m * (h - 1.0 / c2),
        )
    };
    #[rustfmt::skip]
    let m = Matrix4::new(
        Complex64::new(1.0 / c1 - g, 0.0), Complex64::new(-1.0 / c1 - g, 0.0), zero,      zero,
        e1p,                               e1m,                                -one,      -one,
        -e1p / c1,                         e1m / c1,                           one / c2,  -one / c2,
        zero,                              zero,                               t3,        t4,
    );
    m
}

/// Amplitude-space boundary matrix of the plant under the static target law
/// `u_x(1) = -k u_t(1)` expressed through the backstepping reflection; its
/// determinant vanishes exactly on the target pole line.
pub fn target_characteristic(c1: f64, k: f64, s: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0 / c1 - k, 0.0),
        Complex64::new(-1.0 / c1 - k, 0.0),
        cexp(s / c1),
        cexp(-s / c1),
    )
}

/// Search region in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let all_finite =
            re_min.is_finite() && re_max.is_finite() && im_min.is_finite() && im_max.is_finite();
        if !all_finite || re_min >= re_max || im_min >= im_max {
            return Err(Error::PreconditionViolated(format!(
                "degenerate search rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn diameter(&self) -> f64 {
        let w = self.re_max - self.re_min;
        let h = self.im_max - self.im_min;
        (w * w + h * h).sqrt()
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// Phase change of `f` along the segment from `a` to `b`, by adaptive
/// sampling until every consecutive phase step is small enough to rule out
/// aliasing. Fails when a sample lands on a zero or the phase never settles,
/// which in practice means a root sits on or next to the segment.
fn edge_phase_change<F: Fn(Complex64) -> Complex64>(
    f: &F,
    a: Complex64,
    b: Complex64,
) -> std::result::Result<f64, String> {
    let mut m = 64usize;
    loop {
        let mut total = 0.0;
        let mut prev = f(a);
        let mut ok = true;
        if prev.norm() < 1e-290 {
            return Err(format!("determinant vanishes at an edge sample {a}"));
        }
        for j in 1..=m {
            let t = j as f64 / m as f64;
            let z = a + (b - a) * t;
            let cur = f(z);
            if cur.norm() < 1e-290 {
                return Err(format!("determinant vanishes at an edge sample {z}"));
            }
            let step = (cur / prev).arg();
            if step.abs() >= 1.0 {
                ok = false;
                break;
            }
            total += step;
            prev = cur;
        }
        if ok {
            return Ok(total);
        }
        m *= 2;
        if m > 1024 {
            return Err(format!(
                "phase between {a} and {b} does not settle; a root is likely on the edge"
            ));
        }
    }
}

fn rect_winding<F: Fn(Complex64) -> Complex64>(
    f: &F,
    rect: &Rect,
) -> std::result::Result<i64, String> {
    let c = rect.corners();
    let total = edge_phase_change(f, c[0], c[1])?
        + edge_phase_change(f, c[1], c[2])?
        + edge_phase_change(f, c[2], c[3])?
        + edge_phase_change(f, c[3], c[0])?;
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.05 {
        return Err(format!("winding {turns} is not integral on {rect:?}"));
    }
    if rounded < 0.0 {
        return Err(format!("negative winding {rounded} on {rect:?}"));
    }
    Ok(rounded as i64)
}

/// Damped Newton polish from `start`, with finite-difference derivatives and
/// the step capped at `cap`.
fn newton_polish<F: Fn(Complex64) -> Complex64>(
    f: &F,
    start: Complex64,
    cap: f64,
    residual_tol: f64,
) -> Result<Complex64> {
    let mut s = start;
    let mut fs = f(s);
    // Iterate to the floating-point floor rather than stopping at the
    // acceptance tolerance: the extra steps are nearly free and give root
    // locations good to machine precision.
    for _ in 0..60 {
        let h = 1e-7 * s.norm().max(1.0);
        let deriv = (f(s + h) - f(s - h)) / (2.0 * h);
        if deriv.norm() < 1e-290 {
            break;
        }
        let mut step = -fs / deriv;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let mut accepted = false;
        for _ in 0..30 {
            let cand = s + step;
            let fc = f(cand);
            if fc.norm() < fs.norm() {
                s = cand;
                fs = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() < 1e-15 * s.norm().max(1.0) {
            break;
        }
    }
    if fs.norm() <= residual_tol {
        Ok(s)
    } else {
        Err(Error::NewtonDivergence {
            start_re: start.re,
            start_im: start.im,
        })
    }
}

/// Interior grid line positions with a small deterministic offset, so roots
/// sitting on round ordinates (the usual case for matched speeds) do not land
/// exactly on cell boundaries.
fn split_points(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let width = (hi - lo) / cells as f64;
    (0..=cells)
        .map(|i| {
            if i == 0 || i == cells {
                lo + width * i as f64
            } else {
                lo + width * (i as f64 + 0.037 * (3.0 + 2.7 * i as f64).sin())
            }
        })
        .collect()
}

/// All zeros of the analytic function `f` inside `rect`, located by
/// winding-number subdivision starting from an `nx` by `ny` grid and refined
/// by a damped Newton iteration. Simple, isolated zeros only: a cluster that
/// never separates within seven extra levels is reported as a failure rather
/// than silently merged.
pub fn find_roots<F: Fn(Complex64) -> Complex64>(
    f: &F,
    rect: &Rect,
    nx: usize,
    ny: usize,
) -> Result<Vec<Complex64>> {
    if nx == 0 || ny == 0 {
        return Err(Error::PreconditionViolated(
            "root search needs a nonempty starting grid".into(),
        ));
    }
    let expected = match rect_winding(f, rect) {
        Ok(w) => w,
        Err(detail) => {
            return Err(Error::WindingMismatch {
                expected: 0,
                found: 0,
                detail,
            })
        }
    };
    if expected == 0 {
        return Ok(Vec::new());
    }

    let corner_scale = rect
        .corners()
        .iter()
        .map(|&z| f(z).norm())
        .fold(0.0, f64::max);
    let residual_tol = 1e-10 * (1.0 + corner_scale);

    let xs = split_points(rect.re_min, rect.re_max, nx);
    let ys = split_points(rect.im_min, rect.im_max, ny);
    let mut queue: Vec<(Rect, u32)> = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            queue.push((
                Rect {
                    re_min: xs[i],
                    re_max: xs[i + 1],
                    im_min: ys[j],
                    im_max: ys[j + 1],
                },
                0,
            ));
        }
    }

    let mut roots: Vec<Complex64> = Vec::new();
    while let Some((cell, depth)) = queue.pop() {
        let w = match rect_winding(f, &cell) {
            Ok(w) => w,
            Err(detail) => {
                return Err(Error::WindingMismatch {
                    expected,
                    found: roots.len(),
                    detail,
                })
            }
        };
        match w {
            0 => {}
            1 => {
                let root = newton_polish(f, cell.center(), cell.diameter(), residual_tol)?;
                roots.push(root);
            }
            _ => {
                if depth >= 7 {
                    return Err(Error::WindingMismatch {
                        expected,
                        found: roots.len(),
                        detail: format!(
                            "a cluster of {w} zeros near {} does not separate; \
                             multiple roots are out of scope",
                            cell.center()
                        ),
                    });
                }
                let fx = 0.5 + 0.023 * (2.9 * depth as f64 + 1.3).sin();
                let fy = 0.5 + 0.023 * (2.9 * depth as f64 + 2.6).sin();
                let xm = cell.re_min + fx * (cell.re_max - cell.re_min);
                let ym = cell.im_min + fy * (cell.im_max - cell.im_min);
                for (rl, rh) in [(cell.re_min, xm), (xm, cell.re_max)] {
                    for (il, ih) in [(cell.im_min, ym), (ym, cell.im_max)] {
                        queue.push((
                            Rect {
                                re_min: rl,
                                re_max: rh,
                                im_min: il,
                                im_max: ih,
                            },
                            depth + 1,
                        ));
                    }
                }
            }
        }
    }

    let mut unique: Vec<Complex64> = Vec::new();
    for r in roots {
        let dup = unique
            .iter()
            .any(|u| (u - r).norm() <= 1e-8 * (1.0 + r.norm()));
        if !dup {
            unique.push(r);
        }
    }
    if unique.len() as i64 != expected {
        return Err(Error::WindingMismatch {
            expected,
            found: unique.len(),
            detail: "polished roots collide or stray outside their cells".into(),
        });
    }
    unique.sort_by(|a, b| (a.im, a.re).partial_cmp(&(b.im, b.re)).unwrap());
    Ok(unique)
}

fn scaled_det4<'a>(
    plant: &'a PlantParams,
    ctrl: &'a ControllerParams,
    center: Complex64,
) -> impl Fn(Complex64) -> Complex64 + 'a {
    let at_center = characteristic_matrix(plant, ctrl, center);
    let scales: Vec<f64> = (0..4)
        .map(|i| at_center.row(i).iter().map(|e| e.norm()).fold(0.0, f64::max))
        .collect();
    move |s| {
        let mut m = characteristic_matrix(plant, ctrl, s);
        for (i, sc) in scales.iter().enumerate() {
            for j in 0..4 {
                m[(i, j)] /= Complex64::new(*sc, 0.0);
            }
        }
        m.determinant()
    }
}

fn warn_if_clamped(rect: &Rect, c_min: f64) {
    let reach = rect.re_min.abs().max(rect.re_max.abs()) / c_min;
    if reach > 700.0 {
        log::warn!(
            "search rectangle reaches |Re s|/c = {reach:.0}; exponentials are clamped at 700 \
             and roots that far out are unreliable"
        );
    }
}

/// Closed-loop eigenvalues of the interconnection inside `rect`.
pub fn find_system_roots(
    plant: &PlantParams,
    ctrl: &ControllerParams,
    rect: &Rect,
    nx: usize,
    ny: usize,
) -> Result<Vec<Complex64>> {
    warn_if_clamped(rect, plant.c1.min(ctrl.c2));
    let f = scaled_det4(plant, ctrl, rect.center());
    find_roots(&f, rect, nx, ny)
}

/// Poles of the plant under the static target law inside `rect`.
pub fn find_target_roots(c1: f64, k: f64, rect: &Rect, nx: usize, ny: usize) -> Result<Vec<Complex64>> {
    if !(c1 > 0.0) {
        return Err(Error::NonPositiveSpeed(c1));
    }
    warn_if_clamped(rect, c1);
    let center = rect.center();
    let at_center = target_characteristic(c1, k, center);
    let scales: Vec<f64> = (0..2)
        .map(|i| at_center.row(i).iter().map(|e| e.norm()).fold(0.0, f64::max))
        .collect();
    let f = move |s| {
        let mut m = target_characteristic(c1, k, s);
        for (i, sc) in scales.iter().enumerate() {
            for j in 0..2 {
                m[(i, j)] /= Complex64::new(*sc, 0.0);
            }
        }
        m.determinant()
    };
    find_roots(&f, rect, nx, ny)
}

/// Matched-speed closed-loop poles in closed form.
///
/// With `c1 = c2 = c` and `q = 0` a boundary sample completes the full loop
/// in time `4 / c`, picking up the reflection product `p` of the two free
/// ends, so the poles solve `exp(4 s / c) = p` exactly:
/// one vertical line at `Re s = (c / 4) ln |p|` with spacing `pi c / 2`.
pub fn closed_form_poles(
    c: f64,
    g: f64,
    h: f64,
    n_range: std::ops::RangeInclusive<i64>,
) -> Result<Vec<Complex64>> {
    if !(c > 0.0) {
        return Err(Error::NonPositiveSpeed(c));
    }
    if 1.0 + c * g == 0.0 {
        return Err(Error::ReflectionPole { z: c * g });
    }
    if 1.0 + c * h == 0.0 {
        return Err(Error::ReflectionPole { z: c * h });
    }
    let p = delta(c * g) * delta(c * h);
    if p == 0.0 {
        return Err(Error::PerfectAbsorption);
    }
    let re = 0.25 * c * p.abs().ln();
    let base_arg = if p > 0.0 { 0.0 } else { std::f64::consts::PI };
    Ok(n_range
        .map(|n| {
            Complex64::new(
                re,
                0.25 * c * (base_arg + std::f64::consts::TAU * n as f64),
            )
        })
        .collect())
}

/// Pole line of the backstepping target `u_x(1) = -k u_t(1)` in closed form:
/// `exp(2 s / c1) = -delta(c1 k)`, one vertical line with spacing `pi c1`,
/// twice the matched closed-loop spacing.
pub fn backstepping_poles(
    c1: f64,
    k: f64,
    n_range: std::ops::RangeInclusive<i64>,
) -> Result<Vec<Complex64>> {
    if !(c1 > 0.0) {
        return Err(Error::NonPositiveSpeed(c1));
    }
    if 1.0 + c1 * k == 0.0 {
        return Err(Error::SingularGain { k });
    }
    let d = delta(c1 * k);
    if d == 0.0 {
        return Err(Error::PerfectAbsorption);
    }
    let re = 0.5 * c1 * d.abs().ln();
    let base_arg = if d > 0.0 { std::f64::consts::PI } else { 0.0 };
    Ok(n_range
        .map(|n| {
            Complex64::new(
                re,
                0.5 * c1 * (base_arg + std::f64::consts::TAU * n as f64),
            )
        })
        .collect())
}
