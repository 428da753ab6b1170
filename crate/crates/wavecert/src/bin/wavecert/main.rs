//! Command-line front end over the wavecert library.
//!
//! Every verb reads the same plain-text `key = value` configuration format,
//! optionally patched by repeated `--set key=value` flags. Results go to
//! stdout (CSV for tabular verbs, JSON for scalar reports; `--format` flips
//! either way) and, with `--out DIR`, to files in their natural formats plus
//! a `manifest.json` recording exactly what was run.

mod reproduce;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wavecert::lmi::CertificationResult;
use wavecert::robust::{ImplicationOutcome, SearchKind, SearchReport};
use wavecert::sim::Snapshot;
use wavecert::{
    alpha_backstepping, alpha_dyn, backstepping_poles, certify_robust, closed_form_poles, delta,
    feasibility, find_system_roots, find_target_roots, implication_check, match_k, max_decay_rate,
    search_box, stability_chart, Complex64, Config, ControllerParams, Error, ExtReal, Mode,
    PlantParams, Rect, RobustReport, SimConfig, SimTrace, UncertaintyBox,
};

const PRESETS: &[(&str, &str)] = &[
    ("stable_q5", include_str!("../../../configs/stable_q5.conf")),
    ("antistable_q0", include_str!("../../../configs/antistable_q0.conf")),
    ("robust_band", include_str!("../../../configs/robust_band.conf")),
    ("robust_band_wide", include_str!("../../../configs/robust_band_wide.conf")),
    (
        "robust_band_negative",
        include_str!("../../../configs/robust_band_negative.conf"),
    ),
    ("chart", include_str!("../../../configs/chart.conf")),
    ("spectrum_mismatch", include_str!("../../../configs/spectrum_mismatch.conf")),
];

pub(crate) fn preset(name: &str) -> anyhow::Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .with_context(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            format!("no bundled preset `{name}`; available: {}", names.join(", "))
        })
}

#[derive(Parser)]
#[command(
    name = "wavecert",
    version,
    about = "Decay certificates, simulations, and spectra for a boundary-coupled pair of wave equations",
    after_help = "Bundled presets (use as --config @NAME): stable_q5, antistable_q0, \
                  robust_band, robust_band_wide, robust_band_negative, chart, spectrum_mismatch"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Test one decay rate for a multiplier certificate
    Certify(CommonArgs),
    /// Maximize the certified decay rate by bisection
    Decay(CommonArgs),
    /// Certify a whole parameter box with one multiplier vector
    Robust(CommonArgs),
    /// Tabulate closed-loop stability over the reflection plane
    Chart(CommonArgs),
    /// Integrate the closed loop and fit the observed decay rate
    Simulate(CommonArgs),
    /// Pole lines in closed form, or root search by winding counts
    Spectrum(CommonArgs),
    /// Run the dynamic and backstepping loops side by side on shared data
    Compare(CommonArgs),
    /// Re-run the reference results and print PASS/FAIL per claim
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file; `@name` picks a bundled preset
    #[arg(long, value_name = "PATH")]
    config: Option<String>,

    /// Set one `key=value`, overriding the file (repeatable, in order)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Directory for result files and the run manifest
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Stdout rendering; files under --out keep their natural formats
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Directory for reproduce.json and the run manifest
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    match cli.verb {
        Verb::Certify(a) => Run::load(a, command, "certify")?.certify(),
        Verb::Decay(a) => Run::load(a, command, "decay")?.decay(),
        Verb::Robust(a) => Run::load(a, command, "robust")?.robust(),
        Verb::Chart(a) => Run::load(a, command, "chart")?.chart(),
        Verb::Simulate(a) => Run::load(a, command, "simulate")?.simulate(),
        Verb::Spectrum(a) => Run::load(a, command, "spectrum")?.spectrum(),
        Verb::Compare(a) => Run::load(a, command, "compare")?.compare(),
        Verb::Reproduce(a) => reproduce::run(a.out, command),
    }
}

#[derive(Serialize)]
pub(crate) struct Manifest {
    pub(crate) command: String,
    pub(crate) verb: &'static str,
    pub(crate) config: BTreeMap<String, String>,
    pub(crate) overrides: Vec<String>,
    pub(crate) version: &'static str,
    pub(crate) seed: u64,
    pub(crate) outputs: Vec<String>,
}

struct Run {
    cfg: Config,
    overrides: Vec<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
    command: String,
    verb: &'static str,
}

impl Run {
    fn load(args: CommonArgs, command: String, verb: &'static str) -> anyhow::Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = match path.strip_prefix('@') {
                    Some(name) => preset(name)?.to_string(),
                    None => std::fs::read_to_string(path)
                        .with_context(|| format!("cannot read config `{path}`"))?,
                };
                Config::parse(&text)?
            }
            None => Config::default(),
        };
        for assignment in &args.set {
            cfg.set(assignment)?;
        }
        Ok(Self {
            cfg,
            overrides: args.set,
            out: args.out,
            format: args.format,
            command,
            verb,
        })
    }

    /// Write the result files plus a manifest naming them. No-op without
    /// `--out`.
    fn write_files(&self, files: &[(String, String)]) -> anyhow::Result<()> {
        let Some(dir) = &self.out else { return Ok(()) };
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory `{}`", dir.display()))?;
        for (name, content) in files {
            std::fs::write(dir.join(name), content)
                .with_context(|| format!("cannot write `{}`", dir.join(name).display()))?;
        }
        let manifest = Manifest {
            command: self.command.clone(),
            verb: self.verb,
            config: self
                .cfg
                .entries()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            overrides: self.overrides.clone(),
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.usize_or("seed", 0)? as u64,
            outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, to_json(&manifest)?)
            .with_context(|| format!("cannot write `{}`", path.display()))?;
        Ok(())
    }

    /// Scalar-report rendering: JSON by default, `key,value` lines as CSV.
    fn emit_report<T: Serialize>(&self, value: &T) -> anyhow::Result<()> {
        match self.format.unwrap_or(Format::Json) {
            Format::Json => print!("{}", to_json(value)?),
            Format::Csv => print!("{}", kv_csv(value)?),
        }
        Ok(())
    }

    /// Tabular rendering: CSV by default, the full structure as JSON.
    fn emit_table<T: Serialize>(&self, csv: &str, value: &T) -> anyhow::Result<()> {
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => print!("{csv}"),
            Format::Json => print!("{}", to_json(value)?),
        }
        Ok(())
    }

    fn certify(self) -> anyhow::Result<ExitCode> {
        let plant = plant_from(&self.cfg)?;
        let ctrl = ctrl_from(&self.cfg)?;
        let mode = mode_from(&self.cfg)?;
        let alpha = self.cfg.f64_or("alpha", 0.0)?;
        let res = feasibility(&plant, &ctrl, alpha, mode)?;
        let view = CertificationView::new(&res, alpha, mode);
        self.emit_report(&view)?;
        self.write_files(&[("certify.json".into(), to_json(&view)?)])?;
        Ok(ExitCode::SUCCESS)
    }

    fn decay(self) -> anyhow::Result<ExitCode> {
        let plant = plant_from(&self.cfg)?;
        let ctrl = ctrl_from(&self.cfg)?;
        let mode = mode_from(&self.cfg)?;
        let tol = self.cfg.f64_or("tol", 1e-4)?;
        let res = max_decay_rate(&plant, &ctrl, mode, tol)?;
        let alpha = res.alpha_star.unwrap_or(0.0);
        let view = CertificationView::new(&res, alpha, mode);
        self.emit_report(&view)?;
        self.write_files(&[("decay.json".into(), to_json(&view)?)])?;
        Ok(ExitCode::SUCCESS)
    }

    fn robust(self) -> anyhow::Result<ExitCode> {
        let bx = box_from(&self.cfg)?;
        let ctrl = ctrl_from(&self.cfg)?;
        let mode = mode_from(&self.cfg)?;
        let samples = self.cfg.usize_or("samples", 50)?;
        let seed = self.cfg.usize_or("seed", 0)? as u64;
        let report = certify_robust(&bx, &ctrl, mode)?;

        let implication = match &report.witness {
            Some(w) if samples > 0 => Some(implication_check(&bx, &ctrl, w, samples, seed)?),
            _ => None,
        };
        let search = match self.cfg.str_or("search", "none") {
            "none" => None,
            "g_min" => Some(search_box(
                &bx,
                &ctrl,
                mode,
                SearchKind::GMin,
                self.cfg.usize_or("max_steps", 50)?,
            )?),
            "c_range" => Some(search_box(
                &bx,
                &ctrl,
                mode,
                SearchKind::CRange,
                self.cfg.usize_or("max_steps", 50)?,
            )?),
            other => {
                return Err(Error::BadConfig(format!(
                    "search must be `none`, `g_min`, or `c_range`, got `{other}`"
                ))
                .into())
            }
        };
        let view = RobustView {
            report,
            implication,
            search,
        };
        self.emit_report(&view)?;
        self.write_files(&[("robust.json".into(), to_json(&view)?)])?;
        Ok(ExitCode::SUCCESS)
    }

    fn chart(self) -> anyhow::Result<ExitCode> {
        let cg = (self.cfg.f64_or("cg_min", -3.0)?, self.cfg.f64_or("cg_max", 3.0)?);
        let ch = (self.cfg.f64_or("ch_min", -3.0)?, self.cfg.f64_or("ch_max", 3.0)?);
        let resolution = self.cfg.usize_or("resolution", 201)?;
        let chart = stability_chart(cg, ch, resolution)?;

        let mut csv = String::from("cg,ch,stable,delta_product\n");
        for cell in &chart.cells {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                cell.cg,
                cell.ch,
                i32::from(cell.stable),
                ext_str(cell.delta_product)
            ));
        }
        self.emit_table(&csv, &chart)?;
        self.write_files(&[("chart.csv".into(), csv.clone())])?;
        Ok(ExitCode::SUCCESS)
    }

    fn simulate(self) -> anyhow::Result<ExitCode> {
        let sc = SimConfig::from_config(&self.cfg)?;
        let trace = wavecert::sim::run(&sc)?;

        let csv = trace_csv(&trace);
        self.emit_table(&csv, &trace)?;

        let mut files: Vec<(String, String)> = vec![
            ("trace.csv".into(), csv),
            ("sim.json".into(), to_json(&SimSummary::new(&trace))?),
        ];
        for (i, snap) in trace.snapshots.iter().enumerate() {
            files.push((format!("snapshot_{i}.csv"), snapshot_csv(snap)));
        }
        self.write_files(&files)?;
        Ok(ExitCode::SUCCESS)
    }

    fn spectrum(self) -> anyhow::Result<ExitCode> {
        let c1 = self.cfg.require_f64("c1")?;
        let backstepping = match self.cfg.str_or("kind", "dynamic") {
            "dynamic" => false,
            "backstepping" => true,
            other => {
                return Err(Error::BadConfig(format!(
                    "spectrum kind must be `dynamic` or `backstepping`, got `{other}`"
                ))
                .into())
            }
        };

        // The closed-loop spectrum is a single explicit vertical line exactly
        // when the speeds match and there is no position term; otherwise the
        // characteristic equation is genuinely transcendental and the grid
        // search is the only honest option.
        let (matched, g, h, c2, q, k) = if backstepping {
            let k = self.cfg.require_f64("k")?;
            (true, 0.0, 0.0, c1, 0.0, k)
        } else {
            let g = self.cfg.require_f64("g")?;
            let h = self.cfg.require_f64("h")?;
            let c2 = self.cfg.f64_or("c2", c1)?;
            let q = self.cfg.f64_or("q", 0.0)?;
            (c2 == c1 && q == 0.0, g, h, c2, q, 0.0)
        };
        let method = match self.cfg.str_or("method", "auto") {
            "auto" => {
                if matched {
                    "closed_form"
                } else {
                    "grid"
                }
            }
            "closed_form" if !matched => {
                return Err(Error::BadConfig(
                    "closed-form pole lines need matched speeds (c2 = c1) and q = 0".into(),
                )
                .into())
            }
            "closed_form" => "closed_form",
            "grid" => "grid",
            other => {
                return Err(Error::BadConfig(format!(
                    "method must be `auto`, `closed_form`, or `grid`, got `{other}`"
                ))
                .into())
            }
        };

        let poles = match (method, backstepping) {
            ("closed_form", false) => {
                let (n_min, n_max) = index_range(&self.cfg)?;
                closed_form_poles(c1, g, h, n_min..=n_max)?
            }
            ("closed_form", true) => {
                let (n_min, n_max) = index_range(&self.cfg)?;
                backstepping_poles(c1, k, n_min..=n_max)?
            }
            (_, false) => {
                let plant = PlantParams::new(c1, g)?;
                let ctrl = ControllerParams::new(c2, h, q)?;
                let (rect, nx, ny) = rect_from(&self.cfg)?;
                find_system_roots(&plant, &ctrl, &rect, nx, ny)?
            }
            (_, true) => {
                let (rect, nx, ny) = rect_from(&self.cfg)?;
                find_target_roots(c1, k, &rect, nx, ny)?
            }
        };

        let mut csv = String::from("re,im\n");
        for p in &poles {
            csv.push_str(&format!("{},{}\n", p.re, p.im));
        }
        let view = SpectrumView {
            method,
            count: poles.len(),
            poles: poles.iter().map(|p| PoleRow { re: p.re, im: p.im }).collect(),
        };
        self.emit_table(&csv, &view)?;
        self.write_files(&[("spectrum.csv".into(), csv.clone())])?;
        Ok(ExitCode::SUCCESS)
    }

    /// Run the dynamic controller and its rate-matched backstepping
    /// counterpart on identical plant initial data, then emit the two traces
    /// joined on a shared time grid next to the closed-form rate summary.
    fn compare(self) -> anyhow::Result<ExitCode> {
        let c1 = self.cfg.require_f64("c1")?;
        let g = self.cfg.require_f64("g")?;
        let h = self.cfg.require_f64("h")?;
        let c2 = self.cfg.f64_or("c2", c1)?;
        let q = self.cfg.f64_or("q", 0.0)?;
        let mode = mode_from(&self.cfg)?;
        let tol = self.cfg.f64_or("tol", 1e-4)?;
        let plant = PlantParams::new(c1, g)?;
        let ctrl = ControllerParams::new(c2, h, q)?;

        let matched = c2 == c1 && q == 0.0;
        let open_loop_rate = -0.5 * c1 * delta(c1 * g).abs().ln();

        let (a_dyn, k_small, k_large) = if matched {
            let a = alpha_dyn(c1, g, h)?;
            let (ks, kl) = match_k(c1, g, h)?;
            (Some(a), Some(ks), Some(kl))
        } else {
            (None, None, None)
        };
        // The matching gain is closed-form only in the matched case; for
        // mismatched speeds the caller must pick k.
        let k = match self.cfg.f64("k")? {
            Some(k) => k,
            None => k_small.ok_or_else(|| {
                Error::BadConfig(
                    "no closed-form matching gain for mismatched speeds; set `k` explicitly"
                        .into(),
                )
            })?,
        };
        let a_bks = alpha_backstepping(c1, k)?;

        let (alpha_star, lmi_note) = match max_decay_rate(&plant, &ctrl, mode, tol) {
            Ok(res) => (res.alpha_star, None),
            Err(Error::InfeasibleAtZero) => (
                None,
                Some(format!(
                    "no certificate at alpha = 0 in {} mode",
                    mode_str(mode)
                )),
            ),
            Err(e) => return Err(e.into()),
        };
        let closed_form_gap = match (a_dyn, alpha_star) {
            (Some(ExtReal::Finite(a)), Some(s)) => Some((a - s).abs()),
            _ => None,
        };

        let mut dyn_cfg = self.cfg.clone();
        dyn_cfg.set("kind=dynamic")?;
        let dyn_trace = wavecert::sim::run(&SimConfig::from_config(&dyn_cfg)?)?;
        // Reuse the dynamic run's plant-side cell count so both traces share
        // dt = 1/(n1*c1) and join row by row.
        let mut bks_cfg = self.cfg.clone();
        bks_cfg.set("kind=backstepping")?;
        bks_cfg.set(&format!("k={k}"))?;
        bks_cfg.set(&format!("N={}", dyn_trace.n1))?;
        let bks_trace = wavecert::sim::run(&SimConfig::from_config(&bks_cfg)?)?;

        let mut csv =
            String::from("t,seminorm_H_dynamic,seminorm_H_backstepping,w_dynamic,w_backstepping\n");
        for (a, b) in dyn_trace.rows.iter().zip(&bks_trace.rows) {
            if (a.t - b.t).abs() > 1e-9 {
                return Err(Error::InvalidSimConfig(format!(
                    "traces fell out of step at t = {} vs {}",
                    a.t, b.t
                ))
                .into());
            }
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                a.t, a.seminorm_h, b.seminorm_h, a.w, b.w
            ));
        }

        let view = CompareView {
            matched,
            k,
            open_loop_rate,
            alpha_dyn: a_dyn,
            k_match_small: k_small,
            k_match_large: k_large,
            alpha_backstepping: a_bks,
            mode: mode_str(mode),
            alpha_star,
            lmi_note,
            closed_form_gap,
            fit_dynamic: FitView::new(&dyn_trace),
            fit_backstepping: FitView::new(&bks_trace),
        };
        self.emit_table(&csv, &view)?;
        self.write_files(&[
            ("compare.csv".into(), csv.clone()),
            ("compare.json".into(), to_json(&view)?),
        ])?;
        Ok(ExitCode::SUCCESS)
    }
}

#[derive(Serialize)]
struct CertificationView {
    mode: &'static str,
    alpha: f64,
    feasible: bool,
    margin: f64,
    alpha_star: Option<f64>,
    #[serde(rename = "S")]
    s: Vec<f64>,
    gamma: Option<f64>,
    iterations: usize,
}

impl CertificationView {
    fn new(res: &CertificationResult, alpha: f64, mode: Mode) -> Self {
        Self {
            mode: mode_str(mode),
            alpha,
            feasible: res.feasible,
            margin: res.margin,
            alpha_star: res.alpha_star,
            s: res.witness.as_ref().map(|w| w.weights()).unwrap_or_default(),
            gamma: res.gamma,
            iterations: res.iterations,
        }
    }
}

#[derive(Serialize)]
struct RobustView {
    #[serde(flatten)]
    report: RobustReport,
    implication: Option<ImplicationOutcome>,
    search: Option<SearchReport>,
}

#[derive(Serialize)]
struct PoleRow {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct SpectrumView {
    method: &'static str,
    count: usize,
    poles: Vec<PoleRow>,
}

#[derive(Serialize)]
struct FitView {
    rate: Option<f64>,
    r_squared: Option<f64>,
    inconclusive: bool,
}

impl FitView {
    fn new(trace: &SimTrace) -> Self {
        Self {
            rate: trace.fitted_rate,
            r_squared: trace.r_squared,
            inconclusive: trace.inconclusive,
        }
    }
}

#[derive(Serialize)]
struct CompareView {
    matched: bool,
    k: f64,
    open_loop_rate: f64,
    alpha_dyn: Option<ExtReal>,
    k_match_small: Option<f64>,
    k_match_large: Option<ExtReal>,
    alpha_backstepping: ExtReal,
    mode: &'static str,
    alpha_star: Option<f64>,
    lmi_note: Option<String>,
    closed_form_gap: Option<f64>,
    fit_dynamic: FitView,
    fit_backstepping: FitView,
}

#[derive(Serialize)]
struct SimSummary {
    scheme: &'static str,
    n1: usize,
    n2: usize,
    dt: f64,
    rows: usize,
    fitted_rate: Option<f64>,
    r_squared: Option<f64>,
    inconclusive: bool,
    snapshot_times: Vec<f64>,
    final_seminorm: f64,
    final_norm: f64,
}

impl SimSummary {
    fn new(trace: &SimTrace) -> Self {
        let last = trace.rows.last();
        Self {
            scheme: trace.scheme_used,
            n1: trace.n1,
            n2: trace.n2,
            dt: trace.dt,
            rows: trace.rows.len(),
            fitted_rate: trace.fitted_rate,
            r_squared: trace.r_squared,
            inconclusive: trace.inconclusive,
            snapshot_times: trace.snapshots.iter().map(|s| s.t).collect(),
            final_seminorm: last.map(|r| r.seminorm_h).unwrap_or(f64::NAN),
            final_norm: last.map(|r| r.norm_h0).unwrap_or(f64::NAN),
        }
    }
}

pub(crate) fn mode_from(cfg: &Config) -> wavecert::Result<Mode> {
    match cfg.str_or("mode", "full") {
        "full" => Ok(Mode::Full),
        "reduced" => Ok(Mode::Reduced),
        other => Err(Error::BadConfig(format!(
            "mode must be `full` or `reduced`, got `{other}`"
        ))),
    }
}

fn mode_str(mode: Mode) -> &'static str {
    match mode {
        Mode::Full => "full",
        Mode::Reduced => "reduced",
    }
}

pub(crate) fn plant_from(cfg: &Config) -> wavecert::Result<PlantParams> {
    PlantParams::new(cfg.require_f64("c1")?, cfg.require_f64("g")?)
}

pub(crate) fn ctrl_from(cfg: &Config) -> wavecert::Result<ControllerParams> {
    ControllerParams::new(
        cfg.require_f64("c2")?,
        cfg.require_f64("h")?,
        cfg.f64_or("q", 0.0)?,
    )
}

pub(crate) fn box_from(cfg: &Config) -> wavecert::Result<UncertaintyBox> {
    let g_max = cfg
        .g_bound("g_max")?
        .ok_or_else(|| Error::BadConfig("missing required key `g_max`".into()))?;
    UncertaintyBox::new(
        cfg.require_f64("c_min")?,
        cfg.require_f64("c_max")?,
        cfg.require_f64("g_min")?,
        g_max,
    )
}

pub(crate) fn rect_from(cfg: &Config) -> wavecert::Result<(Rect, usize, usize)> {
    let rect = Rect::new(
        cfg.f64_or("re_min", -2.0)?,
        cfg.f64_or("re_max", 0.5)?,
        cfg.f64_or("im_min", -10.0)?,
        cfg.f64_or("im_max", 10.0)?,
    )?;
    Ok((
        rect,
        cfg.usize_or("grid_nx", 16)?,
        cfg.usize_or("grid_ny", 32)?,
    ))
}

fn ext_str(e: ExtReal) -> String {
    match e {
        ExtReal::Finite(x) => x.to_string(),
        ExtReal::PosInf => "inf".into(),
        ExtReal::NegInf => "-inf".into(),
    }
}

pub(crate) fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::from("t,seminorm_H,norm_H0,u0,w,y,v1\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t, r.seminorm_h, r.norm_h0, r.u0, r.w, r.y, r.v1
        ));
    }
    out
}

fn snapshot_csv(snap: &Snapshot) -> String {
    let mut out = String::from("x,u,u_t,v,v_t\n");
    for i in 0..snap.x.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            snap.x[i], snap.u[i], snap.u_t[i], snap.v[i], snap.v_t[i]
        ));
    }
    out
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing result")?;
    text.push('\n');
    Ok(text)
}

/// Flatten a serialized structure into `key,value` CSV lines with dotted
/// paths, so scalar reports stay grep-friendly.
fn kv_csv<T: Serialize>(value: &T) -> anyhow::Result<String> {
    fn walk(prefix: &str, v: &serde_json::Value, rows: &mut Vec<(String, String)>) {
        let join = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            serde_json::Value::Object(map) => {
                for (k, val) in map {
                    walk(&join(k), val, rows);
                }
            }
            serde_json::Value::Array(items) => {
                for (i, val) in items.iter().enumerate() {
                    walk(&join(&i.to_string()), val, rows);
                }
            }
            serde_json::Value::Null => rows.push((prefix.to_string(), String::new())),
            serde_json::Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
            serde_json::Value::Number(n) => rows.push((prefix.to_string(), n.to_string())),
            serde_json::Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        }
    }
    let tree = serde_json::to_value(value).context("serializing result")?;
    let mut rows = Vec::new();
    walk("", &tree, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    Ok(out)
}

fn index_range(cfg: &Config) -> wavecert::Result<(i64, i64)> {
    let n_min = cfg.i64("n_min")?.unwrap_or(-3);
    let n_max = cfg.i64("n_max")?.unwrap_or(3);
    if n_min > n_max {
        return Err(Error::BadConfig(format!(
            "need n_min <= n_max, got {n_min} > {n_max}"
        )));
    }
    Ok((n_min, n_max))
}

/// Closed-form poles inside a rectangle, for cross-checks against the
/// winding-count finder.
pub(crate) fn closed_form_in_rect(
    c: f64,
    g: f64,
    h: f64,
    rect: &Rect,
) -> wavecert::Result<Vec<Complex64>> {
    // Generous index range, then clip: spacing is pi*c/2 along the line.
    let span = (rect.im_max - rect.im_min).abs() / (std::f64::consts::PI * c / 2.0);
    let n = span.ceil() as i64 + 2;
    let all = closed_form_poles(c, g, h, -n..=n)?;
    Ok(all
        .into_iter()
        .filter(|p| {
            p.re >= rect.re_min && p.re <= rect.re_max && p.im >= rect.im_min && p.im <= rect.im_max
        })
        .collect())
}
