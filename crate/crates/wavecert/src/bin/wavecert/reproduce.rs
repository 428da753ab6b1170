//! The `reproduce` verb: re-derive every headline number of the reference
//! configuration (unit speeds, g = -0.27, h = 0.6) from scratch and check it
//! against its expected value. One PASS/FAIL line per claim; exit code 2 when
//! anything fails, so scripted regression runs can tell "broken" from
//! "crashed".

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use serde::Serialize;

use wavecert::{
    alpha_backstepping, alpha_dyn, certify_robust, delta, feasibility, find_system_roots,
    implication_check, match_k, max_decay_rate, Config, Mode, Rect, SimConfig, SimTrace,
};

#[derive(Serialize)]
struct Claim {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct Report {
    passed: usize,
    failed: usize,
    claims: Vec<Claim>,
}

fn claim(name: &'static str, body: impl FnOnce() -> anyhow::Result<(bool, String)>) -> Claim {
    let (pass, detail) = match body() {
        Ok(ok) => ok,
        Err(e) => (false, format!("errored: {e:#}")),
    };
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Claim { name, pass, detail }
}

fn sim_from_preset(name: &str) -> anyhow::Result<SimTrace> {
    let cfg = Config::parse(crate::preset(name)?)?;
    let sc = SimConfig::from_config(&cfg)?;
    Ok(wavecert::sim::run(&sc)?)
}

fn fitted_rate(trace: &SimTrace) -> anyhow::Result<(f64, f64)> {
    match (trace.fitted_rate, trace.r_squared) {
        (Some(rate), Some(r2)) if !trace.inconclusive => Ok((rate, r2)),
        _ => anyhow::bail!("decay fit was inconclusive"),
    }
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
}

pub(crate) fn run(out: Option<PathBuf>, command: String) -> anyhow::Result<ExitCode> {
    let start = Instant::now();
    let mut claims: Vec<Claim> = Vec::new();

    claims.push(claim("closed_form_rate", || {
        let a = alpha_dyn(1.0, -0.27, 0.6)?
            .finite()
            .ok_or_else(|| anyhow::anyhow!("rate came out infinite"))?;
        Ok((
            (a - 0.208).abs() <= 1e-3,
            format!("alpha_dyn(1, -0.27, 0.6) = {a:.6}, quoted value 0.208 (tol 1e-3)"),
        ))
    }));

    claims.push(claim("matched_gain", || {
        let (ks, _) = match_k(1.0, -0.27, 0.6)?;
        Ok((
            (ks - 0.205).abs() <= 1e-3,
            format!("smaller matching gain k = {ks:.6}, quoted value 0.205 (tol 1e-3)"),
        ))
    }));

    claims.push(claim("gain_round_trip", || {
        let a = alpha_dyn(1.0, -0.27, 0.6)?
            .finite()
            .ok_or_else(|| anyhow::anyhow!("rate came out infinite"))?;
        let (ks, _) = match_k(1.0, -0.27, 0.6)?;
        let ab = alpha_backstepping(1.0, ks)?
            .finite()
            .ok_or_else(|| anyhow::anyhow!("target rate came out infinite"))?;
        Ok((
            (a - ab).abs() <= 1e-9,
            format!("alpha from matched gain differs by {:.2e} (tol 1e-9)", (a - ab).abs()),
        ))
    }));

    claims.push(claim("full_certificate_rate", || {
        let plant = wavecert::PlantParams::new(1.0, 3.0)?;
        let ctrl = wavecert::ControllerParams::new(1.0, 0.9, 5.0)?;
        let res = max_decay_rate(&plant, &ctrl, Mode::Full, 1e-4)?;
        let a = res.alpha_star.unwrap_or(0.0);
        Ok((
            (a - 0.157).abs() <= 5e-3,
            format!("full-mode alpha* = {a:.4} for g = 3, q = 5, quoted value 0.157 (tol 5e-3)"),
        ))
    }));

    claims.push(claim("reduced_certificate_rate", || {
        let plant = wavecert::PlantParams::new(1.0, -0.27)?;
        let ctrl = wavecert::ControllerParams::new(1.0, 0.6, 0.0)?;
        let res = max_decay_rate(&plant, &ctrl, Mode::Reduced, 1e-4)?;
        let a = res.alpha_star.unwrap_or(0.0);
        Ok((
            (a - 0.208).abs() <= 5e-3,
            format!("reduced-mode alpha* = {a:.4} at q = 0, closed form 0.2081 (tol 5e-3)"),
        ))
    }));

    claims.push(claim("robust_band", || {
        let cfg = Config::parse(crate::preset("robust_band")?)?;
        let report = certify_robust(&crate::box_from(&cfg)?, &crate::ctrl_from(&cfg)?, crate::mode_from(&cfg)?)?;
        Ok((
            report.feasible,
            format!(
                "c in [0.74, 1.45], g in [-0.27, inf): feasible = {}, margin {:.2e}",
                report.feasible, report.margin
            ),
        ))
    }));

    claims.push(claim("robust_band_implication", || {
        let cfg = Config::parse(crate::preset("robust_band")?)?;
        let bx = crate::box_from(&cfg)?;
        let ctrl = crate::ctrl_from(&cfg)?;
        let report = certify_robust(&bx, &ctrl, crate::mode_from(&cfg)?)?;
        let witness = report
            .witness
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("no witness to spot-check"))?;
        let samples = cfg.usize_or("samples", 50)?;
        let seed = cfg.usize_or("seed", 0)? as u64;
        let imp = implication_check(&bx, &ctrl, witness, samples, seed)?;
        Ok((
            imp.all_hold,
            format!(
                "{} sampled plants all certified by the common witness (worst eigenvalue {:.2e})",
                imp.samples, imp.worst_lambda
            ),
        ))
    }));

    claims.push(claim("robust_band_wide", || {
        let cfg = Config::parse(crate::preset("robust_band_wide")?)?;
        let report = certify_robust(&crate::box_from(&cfg)?, &crate::ctrl_from(&cfg)?, crate::mode_from(&cfg)?)?;
        Ok((
            report.feasible,
            format!(
                "c in [0.8, 1.4], g in [-0.29, inf): feasible = {}, margin {:.2e}",
                report.feasible, report.margin
            ),
        ))
    }));

    claims.push(claim("robust_band_negative", || {
        let cfg = Config::parse(crate::preset("robust_band_negative")?)?;
        let report = certify_robust(&crate::box_from(&cfg)?, &crate::ctrl_from(&cfg)?, crate::mode_from(&cfg)?)?;
        Ok((
            !report.feasible,
            format!(
                "c in [0.74, 1.45], g in [-0.6, 0]: feasible = {} (expected false), worst |delta| = {:.2}",
                report.feasible, report.worst.delta_max
            ),
        ))
    }));

    let q0_trace = sim_from_preset("antistable_q0");

    claims.push(claim("dynamic_sim_rate", || {
        let trace = match &q0_trace {
            Ok(t) => t,
            Err(e) => return Ok((false, format!("simulation failed: {e:#}"))),
        };
        let target = alpha_dyn(1.0, -0.27, 0.6)?.finite().unwrap_or(f64::NAN);
        let (rate, r2) = fitted_rate(trace)?;
        let rel = (rate - target).abs() / target;
        Ok((
            rel <= 0.10 && r2 >= 0.9,
            format!(
                "fitted seminorm decay {rate:.4} vs closed form {target:.4} ({:.1}% off, R^2 = {r2:.3})",
                100.0 * rel
            ),
        ))
    }));

    claims.push(claim("constant_consensus", || {
        let trace = match &q0_trace {
            Ok(t) => t,
            Err(e) => return Ok((false, format!("simulation failed: {e:#}"))),
        };
        let last = trace.rows.last().ok_or_else(|| anyhow::anyhow!("empty trace"))?;
        let du = (last.u0 - last.w).abs();
        let dv = (last.w - last.v1).abs();
        Ok((
            last.seminorm_h < 1e-3 && du < 2e-3 && dv < 2e-3,
            format!(
                "at t = 60: seminorm {:.2e} (< 1e-3), |u(0)-u(1)| = {du:.2e}, |u(1)-v(1)| = {dv:.2e} (< 2e-3)",
                last.seminorm_h
            ),
        ))
    }));

    claims.push(claim("backstepping_sim_rate", || {
        let (ks, _) = match_k(1.0, -0.27, 0.6)?;
        let mut cfg = Config::parse(
            "kind = backstepping\nc1 = 1\ng = -0.27\nT = 60\nN = 200\nic_u = cos(2*pi*x) - 1\n",
        )?;
        cfg.set(&format!("k={ks}"))?;
        let trace = wavecert::sim::run(&SimConfig::from_config(&cfg)?)?;
        let target = alpha_backstepping(1.0, ks)?.finite().unwrap_or(f64::NAN);
        let (rate, r2) = fitted_rate(&trace)?;
        let rel = (rate - target).abs() / target;
        Ok((
            rel <= 0.10 && r2 >= 0.9,
            format!(
                "fitted decay {rate:.4} vs target {target:.4} at k = {ks:.4} ({:.1}% off, R^2 = {r2:.3})",
                100.0 * rel
            ),
        ))
    }));

    claims.push(claim("position_anchor_settles", || {
        let trace = sim_from_preset("stable_q5")?;
        let snap = trace
            .snapshots
            .last()
            .ok_or_else(|| anyhow::anyhow!("no snapshots recorded"))?;
        let su = sup_abs(&snap.u);
        let sv = sup_abs(&snap.v);
        Ok((
            su + sv < 1e-2,
            format!(
                "at t = {:.0}: sup|u| + sup|v| = {:.2e} (< 1e-2); displacements vanish, not just energy",
                snap.t,
                su + sv
            ),
        ))
    }));

    claims.push(claim("pole_line", || {
        let a = alpha_dyn(1.0, -0.27, 0.6)?.finite().unwrap_or(f64::NAN);
        let rect = Rect::new(-0.4, 0.1, -5.0, 5.0)?;
        let line = crate::closed_form_in_rect(1.0, -0.27, 0.6, &rect)?;
        let worst_re = line
            .iter()
            .map(|p| (p.re + a).abs())
            .fold(0.0_f64, f64::max);
        let plant = wavecert::PlantParams::new(1.0, -0.27)?;
        let ctrl = wavecert::ControllerParams::new(1.0, 0.6, 0.0)?;
        let found = find_system_roots(&plant, &ctrl, &rect, 8, 24)?;
        let worst_match = found
            .iter()
            .map(|f| {
                line.iter()
                    .map(|p| (f - p).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max);
        Ok((
            line.len() == 7
                && found.len() == 7
                && worst_re <= 1e-6
                && worst_match <= 1e-6,
            format!(
                "{} poles on Re = -{a:.6}; grid search found {} with worst deviation {:.1e} (tol 1e-6)",
                line.len(),
                found.len(),
                worst_match.max(worst_re)
            ),
        ))
    }));

    claims.push(claim("mismatched_spectrum", || {
        let cfg = Config::parse(crate::preset("spectrum_mismatch")?)?;
        let plant = crate::plant_from(&cfg)?;
        let ctrl = crate::ctrl_from(&cfg)?;
        let (rect, nx, ny) = crate::rect_from(&cfg)?;
        let roots = find_system_roots(&plant, &ctrl, &rect, nx, ny)?;
        let max_re = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
        Ok((
            !roots.is_empty() && max_re < 0.0,
            format!(
                "{} roots for c1 = 0.8 in [-2, 0.5] x [-20i, 20i], rightmost Re = {max_re:.4} (all < 0)",
                roots.len()
            ),
        ))
    }));

    // Exercised here so a regression in the plain feasibility path (as
    // opposed to the bisection) also trips reproduction.
    claims.push(claim("certificate_at_zero", || {
        let plant = wavecert::PlantParams::new(1.0, -0.27)?;
        let ctrl = wavecert::ControllerParams::new(1.0, 0.6, 0.0)?;
        let res = feasibility(&plant, &ctrl, 0.0, Mode::Reduced)?;
        let open = -0.5 * delta(-0.27).abs().ln();
        Ok((
            res.feasible && open < 0.0,
            format!(
                "marginal certificate holds (margin {:.2e}) while the open loop grows at rate {:.4}",
                res.margin, -open
            ),
        ))
    }));

    let passed = claims.iter().filter(|c| c.pass).count();
    let failed = claims.len() - passed;
    println!(
        "{passed}/{} claims hold ({:.1}s)",
        claims.len(),
        start.elapsed().as_secs_f64()
    );

    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
        let report = Report {
            passed,
            failed,
            claims,
        };
        std::fs::write(dir.join("reproduce.json"), crate::to_json(&report)?)?;
        let manifest = crate::Manifest {
            command,
            verb: "reproduce",
            config: BTreeMap::new(),
            overrides: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            seed: 0,
            outputs: vec!["reproduce.json".into()],
        };
        std::fs::write(dir.join("manifest.json"), crate::to_json(&manifest)?)?;
    }

    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
