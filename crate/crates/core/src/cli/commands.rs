//! The five commands. Each writes its files under an output directory and
//! returns an exit code plus a short summary for the terminal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{ControlMode, RunConfig};
use crate::biortho::{build_family, BiorthoFamily, ExpSeries};
use crate::classify::{classify, estimate_t0, fattorini_witness, IndexTable, Verdict};
use crate::error::{Error, Result};
use crate::funcspace::{PanelGrid, SineMode, PI};
use crate::moments::{
    assemble_boundary, build_shapes, moment_residuals, solve_boundary, solve_distributed, AdjointProjection,
    BoundaryCoefficients, BoundaryControl, ShapeFunctions, SolverParams,
};
use crate::simulate::{
    forward_distributed, observability_quotient, verify_boundary, verify_null, DistributedSource, Free, GalerkinModel,
    Source, SteppingOptions, StateTrajectory,
};
use crate::spectral::{
    build_records, expand_initial_data, fmt17, write_csv, CouplingPair, InitialCoefficients, InitialData,
    ModeAmplitude, Profile, SpectralOptions, SpectralRecord,
};
use crate::transform::regularize;

/// Modes kept when re-expanding `y1 / theta` after a change of unknown.
const TRANSFORMED_MODES: usize = 64;

/// Result of a command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Provenance lines written at the top of every output file.
#[derive(Clone, Debug)]
pub struct Provenance {
    lines: Vec<String>,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self> {
        let hash = cfg.hash()?;
        let t = &cfg.tolerances;
        let lines = vec![
            format!("momentctl {command}"),
            format!("config={}", cfg.name),
            format!("config_sha256={hash}"),
            format!("mode={:?} K={} T={} seed={}", cfg.mode, cfg.modes, fmt17(cfg.horizon), cfg.seed),
            format!(
                "tolerances biortho={:e} null_ratio={:e} duality={:e} quadrature={:e} stepping={:e}",
                t.biortho, t.null_ratio, t.duality, t.quadrature, t.stepping
            ),
        ];
        Ok(Provenance { lines, config_sha256: hash })
    }

    pub fn header(&self) -> String {
        self.lines.iter().map(|l| format!("# {l}\n")).collect()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

struct Writer<'a> {
    dir: &'a Path,
    prov: &'a Provenance,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path, prov: &'a Provenance) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir, prov, files: Vec::new() })
    }

    fn put(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}{body}", self.prov.header()))?;
        self.files.push(path);
        Ok(())
    }

    fn put_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, exit_code: i32, summary: String) -> Outcome {
        Outcome { exit_code, summary, files: self.files }
    }
}

fn csv_row(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn spectral_options(cfg: &RunConfig, residuals: bool) -> SpectralOptions {
    SpectralOptions { rule: cfg.rule(), residuals }
}

/// `analyze`: per-mode spectral table.
pub fn analyze(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let prov = Provenance::new("analyze", cfg)?;
    let k = cfg.analysis_modes();
    let records = build_records(&Arc::new(cfg.coupling.clone()), &cfg.omega, k, &spectral_options(cfg, true))?;
    let mut body = Vec::new();
    write_csv(&records, &mut body)?;
    let worst = records.iter().map(|r| r.residual_adjoint.max(r.residual_direct)).fold(0.0, f64::max);
    let mut w = Writer::new(out, &prov)?;
    w.put("spectral.csv", &String::from_utf8_lossy(&body))?;
    Ok(w.finish(0, format!("analyzed {k} modes; max eigen-residual {worst:e}")))
}

fn verdict_for(cfg: &RunConfig, distributed: Verdict, boundary: Verdict) -> Verdict {
    match cfg.mode {
        ControlMode::Distributed => distributed,
        ControlMode::Boundary => boundary,
    }
}

/// `classify`: verdicts, minimal-time estimates and the index table. The
/// exit code encodes the verdict for the configured control mode.
pub fn cmd_classify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let prov = Provenance::new("classify", cfg)?;
    let k = cfg.analysis_modes();
    let rule = cfg.rule();
    let report = classify(&cfg.coupling, &cfg.omega, k, &rule)?;
    let verdict = verdict_for(cfg, report.approx_controllable_distributed, report.approx_controllable_boundary);
    let mut text = report.to_text();
    if let Verdict::No { witness } = report.approx_controllable_distributed {
        if let Some(wt) = fattorini_witness(&Arc::new(cfg.coupling.clone()), &cfg.omega, witness, &rule)? {
            let _ = writeln!(text, "witness.k={}\nwitness.tau={}\nwitness.first_component_sup={:e}\nwitness.verified={}", wt.k, fmt17(wt.tau), wt.first_component_sup, wt.verified);
        }
    }
    let _ = writeln!(text, "verdict={verdict}");

    let table = IndexTable::compute(&cfg.coupling, cfg.omega.lo(), k, &rule)?;
    let mut csv = String::from("k,I_k,ln_abs_I_k,I_ak,ln_abs_I_ak,t0_ratio,t1_ratio\n");
    for i in 0..k {
        let kk = ((i + 1) * (i + 1)) as f64;
        let (a, b) = (table.ik[i], table.iak[i]);
        csv += &csv_row([
            (i + 1).to_string(),
            fmt17(a.value),
            fmt17(a.ln_abs),
            fmt17(b.value),
            fmt17(b.ln_abs),
            fmt17((-a.ln_abs).min(-b.ln_abs) / kk),
            fmt17(-a.ln_abs / kk),
        ]);
    }
    let mut w = Writer::new(out, &prov)?;
    w.put("classify.txt", &text)?;
    w.put("indices.csv", &csv)?;
    let t0 = report.t0.as_ref().map_or("undefined".into(), |t| fmt17(t.value));
    Ok(w.finish(verdict.exit_code(), format!("verdict {verdict}; T0 estimate {t0}")))
}

/// Distributed part of a stored control: the shapes and the per-mode
/// coefficients `v[j-1][i-1]`. No shapes means the zero control.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredDistributed {
    pub shapes: Option<ShapeFunctions>,
    pub v: Vec<[[f64; 2]; 2]>,
}

/// Everything `verify` needs to rebuild a synthesized control.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredControl {
    pub provenance: Vec<String>,
    pub config_sha256: String,
    pub mode: ControlMode,
    pub horizon: f64,
    pub modes: usize,
    /// Pair the control was solved for; the transformed pair when regularized.
    pub coupling: CouplingPair,
    /// Initial data of that pair.
    pub initial: InitialData,
    pub regularized: bool,
    pub distributed: Option<StoredDistributed>,
    pub boundary: Option<BoundaryCoefficients>,
}

impl StoredControl {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn is_zero(&self) -> bool {
        match (&self.distributed, &self.boundary) {
            (Some(d), _) => d.shapes.is_none() || d.v.iter().flatten().flatten().all(|&x| x == 0.0),
            (_, Some(b)) => b.u1.iter().chain(&b.u2).all(|&x| x == 0.0),
            _ => true,
        }
    }
}

fn require_verdict(cfg: &RunConfig, verdict: Verdict) -> Result<()> {
    if verdict == Verdict::Yes || cfg.allow_uncontrollable {
        return Ok(());
    }
    let modes = match verdict {
        Verdict::No { witness } => vec![witness],
        _ => Vec::new(),
    };
    Err(Error::FailedPrecondition { modes, reason: format!("classification verdict is {verdict}; set allow_uncontrollable = true to synthesize anyway") })
}

/// `y1 / theta` as a sine expansion.
fn divide_profile(p: &Profile, theta: &crate::funcspace::PiecewisePoly) -> Profile {
    if p.is_zero() {
        return Profile::Zero;
    }
    let grid = PanelGrid::new(0.0, PI, theta.breaks(), PI / 256.0, 16);
    let vals: Vec<f64> = grid.nodes.iter().map(|&x| p.eval(x) / theta.eval(x)).collect();
    let modes = (1..=TRANSFORMED_MODES)
        .map(|k| {
            let phi = SineMode::new_unchecked(k);
            let amp = grid.nodes.iter().zip(&grid.weights).zip(&vals).map(|((&x, &w), &v)| w * v * phi.value(x)).sum();
            ModeAmplitude { k, amp }
        })
        .collect();
    Profile::Modes { modes }
}

struct Synthesis {
    stored: StoredControl,
    log: String,
    extra: Vec<(String, String)>,
}

fn time_grid(cfg: &RunConfig) -> Vec<f64> {
    let n = cfg.samples - 1;
    (0..=n).map(|i| cfg.horizon * i as f64 / n as f64).collect()
}

fn synthesize_distributed(cfg: &RunConfig, prov: &Provenance) -> Result<Synthesis> {
    let rule = cfg.rule();
    let (k, t, omega) = (cfg.modes, cfg.horizon, cfg.omega);
    let mut log = String::new();
    let report = classify(&cfg.coupling, &omega, cfg.analysis_modes(), &rule)?;
    let _ = writeln!(log, "verdict={}", report.approx_controllable_distributed);
    require_verdict(cfg, report.approx_controllable_distributed)?;

    let mut stored = StoredControl {
        provenance: prov.lines().to_vec(),
        config_sha256: prov.config_sha256.clone(),
        mode: ControlMode::Distributed,
        horizon: t,
        modes: k,
        coupling: cfg.coupling.clone(),
        initial: cfg.initial.clone(),
        regularized: false,
        distributed: Some(StoredDistributed { shapes: None, v: vec![[[0.0; 2]; 2]; k] }),
        boundary: None,
    };
    if cfg.initial.is_zero() {
        let _ = writeln!(log, "initial data vanish; control is zero");
        return Ok(Synthesis { stored, log, extra: Vec::new() });
    }

    let table = IndexTable::compute(&cfg.coupling, omega.lo(), k, &rule)?;
    if !table.failing_modes().is_empty() && report.support_intersects {
        let (cp_hat, trace) = regularize(&cfg.coupling, &omega, cfg.analysis_modes().max(k))?;
        let _ = writeln!(log, "regularized=true\n{}", trace.to_log().trim_end());
        if let Some(theta) = trace.theta_total() {
            stored.initial = InitialData { first: divide_profile(&cfg.initial.first, &theta.theta), second: cfg.initial.second.clone() };
        }
        stored.coupling = cp_hat;
        stored.regularized = true;
    }
    let cp = Arc::new(stored.coupling.clone());
    let t0 = estimate_t0(&cp, omega.lo(), cfg.analysis_modes(), &rule).map(|e| e.value).unwrap_or(0.0);
    let _ = writeln!(log, "T0_estimate={}", fmt17(t0));
    if t <= t0 {
        let _ = writeln!(log, "warning=horizon at or below the minimal-time estimate");
    }

    let n = cfg.galerkin_modes();
    let records = build_records(&cp, &omega, k.max(n), &spectral_options(cfg, false))?;
    let raw_shapes = build_shapes(&omega, &records, cfg.seed)?;
    let (y0c, shapes) = if cfg.project_adjoint {
        let proj = AdjointProjection::new(&records, n)?;
        (proj.initial(&stored.initial), proj.shapes(&raw_shapes)?)
    } else {
        (expand_initial_data(&records, &stored.initial)?, raw_shapes)
    };
    let ik: Vec<_> = records[..k].iter().map(|r| r.ik).collect();
    let iak: Vec<_> = records[..k].iter().map(|r| r.iak).collect();
    let params = SolverParams::from_indices(t, t0, &ik, &iak, cp.zero_threshold());
    let family = Arc::new(build_family(k, t, cfg.tolerances.biortho)?);
    let sol = solve_distributed(Arc::new(shapes), family, &records, &y0c, &params)?;
    let residuals = moment_residuals(&sol, &y0c)?;
    let worst = residuals.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let _ = writeln!(
        log,
        "epsilon={}\nk_eps={}\nshape_attempts={}\nshape_c1={}\nshape_c2={}\nbiortho_residual={:e}\ndecay_rate={}\nmax_moment_residual={:e}",
        fmt17(params.epsilon),
        params.k_eps,
        sol.shapes.attempts,
        fmt17(sol.shapes.c1),
        fmt17(sol.shapes.c2),
        sol.family.max_residual,
        fmt17(sol.decay.rate),
        worst
    );

    let mut modes_csv = Vec::new();
    sol.write_modes_csv(&mut modes_csv)?;
    let mut samples = String::from("t,v1,v2\n");
    for &ti in &time_grid(cfg) {
        let s = t - ti;
        samples += &csv_row([fmt17(ti), fmt17(sol.profile(1, s)?), fmt17(sol.profile(2, s)?)]);
    }
    let mut shape_csv = String::from("x,f1,f2\n");
    for i in 0..cfg.samples {
        let x = PI * i as f64 / (cfg.samples - 1) as f64;
        shape_csv += &csv_row([fmt17(x), fmt17(sol.shapes.eval(1, x)), fmt17(sol.shapes.eval(2, x))]);
    }
    stored.distributed = Some(StoredDistributed { shapes: Some(sol.shapes.as_ref().clone()), v: sol.modes.iter().map(|m| m.coefficients.v).collect() });
    let extra = vec![
        ("modes.csv".to_string(), String::from_utf8_lossy(&modes_csv).into_owned()),
        ("control_samples.csv".to_string(), samples),
        ("shape_samples.csv".to_string(), shape_csv),
    ];
    Ok(Synthesis { stored, log, extra })
}

fn boundary_control(coefficients: BoundaryCoefficients, family: Arc<BiorthoFamily>) -> Result<BoundaryControl> {
    BoundaryControl::new(coefficients, family)
}

fn synthesize_boundary(cfg: &RunConfig, prov: &Provenance) -> Result<Synthesis> {
    let rule = cfg.rule();
    let (k, t) = (cfg.modes, cfg.horizon);
    let mut log = String::new();
    let report = classify(&cfg.coupling, &cfg.omega, cfg.analysis_modes(), &rule)?;
    let _ = writeln!(log, "verdict={}", report.approx_controllable_boundary);
    require_verdict(cfg, report.approx_controllable_boundary)?;
    let cp = Arc::new(cfg.coupling.clone());
    let records = build_records(&cp, &cfg.omega, k, &spectral_options(cfg, false))?;
    let z0 = expand_initial_data(&records, &cfg.initial)?;
    let coefficients = solve_boundary(&records, &z0, t, k, cp.zero_threshold())?;
    let ctrl = boundary_control(coefficients.clone(), Arc::new(build_family(k, t, cfg.tolerances.biortho)?))?;
    let _ = writeln!(log, "biortho_residual={:e}\ndecay_rate={}\nl2_norm={}", ctrl.family.max_residual, fmt17(ctrl.decay.rate), fmt17(ctrl.l2_norm()?));

    let mut modes_csv = String::from("k,u1,u2\n");
    for i in 0..k {
        modes_csv += &csv_row([(i + 1).to_string(), fmt17(coefficients.u1[i]), fmt17(coefficients.u2[i])]);
    }
    let mut samples = String::from("t,u\n");
    for &ti in &time_grid(cfg) {
        samples += &csv_row([fmt17(ti), fmt17(assemble_boundary(&ctrl, ti)?)]);
    }
    let stored = StoredControl {
        provenance: prov.lines().to_vec(),
        config_sha256: prov.config_sha256.clone(),
        mode: ControlMode::Boundary,
        horizon: t,
        modes: k,
        coupling: cfg.coupling.clone(),
        initial: cfg.initial.clone(),
        regularized: false,
        distributed: None,
        boundary: Some(coefficients),
    };
    Ok(Synthesis { stored, log, extra: vec![("boundary_modes.csv".into(), modes_csv), ("control_samples.csv".into(), samples)] })
}

/// `synthesize`: solves the moment problem and writes `control.json`.
pub fn synthesize(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let prov = Provenance::new("synthesize", cfg)?;
    let syn = match cfg.mode {
        ControlMode::Distributed => synthesize_distributed(cfg, &prov)?,
        ControlMode::Boundary => synthesize_boundary(cfg, &prov)?,
    };
    let mut w = Writer::new(out, &prov)?;
    w.put("synthesis.txt", &syn.log)?;
    for (name, body) in &syn.extra {
        w.put(name, body)?;
    }
    w.put_json("control.json", &syn.stored)?;
    let zero = if syn.stored.is_zero() { " (zero control)" } else { "" };
    Ok(w.finish(0, format!("synthesized {:?} control with K = {}{zero}", cfg.mode, cfg.modes)))
}

fn stored_source(stored: &StoredControl, n: usize, tol: f64) -> Result<Option<DistributedSource>> {
    let Some(d) = &stored.distributed else {
        return Err(Error::Config("control file holds no distributed control".into()));
    };
    let Some(shapes) = &d.shapes else { return Ok(None) };
    if stored.is_zero() {
        return Ok(None);
    }
    let k = stored.modes;
    if d.v.len() != k {
        return Err(Error::Config(format!("control file lists {} mode coefficients for K = {k}", d.v.len())));
    }
    let family = build_family(k, stored.horizon, tol)?;
    let mut weights: [Vec<(usize, usize, f64)>; 2] = [Vec::new(), Vec::new()];
    for (m, v) in d.v.iter().enumerate() {
        for j in 1..=2 {
            for i in 1..=2 {
                weights[i - 1].push((j, m + 1, v[j - 1][i - 1]));
            }
        }
    }
    let profiles: [ExpSeries; 2] = [family.combine(&weights[0])?, family.combine(&weights[1])?];
    Ok(Some(DistributedSource::new(stored.horizon, profiles, shapes.sine_loads(n))))
}

fn trajectory_csv(traj: &StateTrajectory, rows: usize) -> String {
    let n = traj.c1.nrows();
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend((1..=n).map(|k| format!("c1_{k}")));
    header.extend((1..=n).map(|k| format!("c2_{k}")));
    let mut s = csv_row(header);
    let last = traj.times.len() - 1;
    let stride = last.div_ceil(rows.max(2) - 1).max(1);
    let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
    if idx.last() != Some(&last) {
        idx.push(last);
    }
    for j in idx {
        let mut row = vec![fmt17(traj.times[j]), fmt17(traj.norms[j])];
        row.extend(traj.c1.column(j).iter().map(|&x| fmt17(x)));
        row.extend(traj.c2.column(j).iter().map(|&x| fmt17(x)));
        s += &csv_row(row);
    }
    s
}

/// `verify`: simulates or certifies a stored control against the config
/// thresholds. Exit code 0 on pass, 2 on fail.
pub fn verify(cfg: &RunConfig, control: &Path, out: &Path) -> Result<Outcome> {
    let prov = Provenance::new("verify", cfg)?;
    let stored = StoredControl::load(control)?;
    if stored.modes != cfg.modes {
        return Err(Error::Config(format!("control file has K = {} but the config has K = {}", stored.modes, cfg.modes)));
    }
    if stored.mode != cfg.mode {
        return Err(Error::Config(format!("control file mode {:?} differs from config mode {:?}", stored.mode, cfg.mode)));
    }
    if (stored.horizon - cfg.horizon).abs() > 1e-14 * cfg.horizon {
        return Err(Error::Config(format!("control file has T = {} but the config has T = {}", stored.horizon, cfg.horizon)));
    }
    let (coupling, initial) = if stored.regularized { (&stored.coupling, &stored.initial) } else { (&cfg.coupling, &cfg.initial) };
    let mut text = String::new();
    let _ = writeln!(text, "control_sha256={}", stored.config_sha256);
    let _ = writeln!(text, "config_matches_control={}", stored.config_sha256 == prov.config_sha256);
    let _ = writeln!(text, "regularized={}", stored.regularized);
    let mut w = Writer::new(out, &prov)?;
    let pass = match cfg.mode {
        ControlMode::Distributed => {
            let n = cfg.galerkin_modes();
            let model = GalerkinModel::new(coupling, n)?;
            let a = DVector::from_vec(initial.first.sine_coefficients(n));
            let b = DVector::from_vec(initial.second.sine_coefficients(n));
            let source = stored_source(&stored, n, cfg.tolerances.biortho)?;
            let src: &dyn Source = match &source {
                Some(s) => s,
                None => &Free,
            };
            let opts = SteppingOptions { tol: cfg.tolerances.stepping, ..SteppingOptions::default() };
            let traj = forward_distributed(&model, (&a, &b), src, cfg.horizon, &opts)?;
            let report = verify_null(&traj, initial.norm());
            let pass = report.ratio <= cfg.tolerances.null_ratio;
            let _ = writeln!(
                text,
                "galerkin_modes={n}\nsteps={}\ndoubling_change={:e}\ninitial_norm={}\nterminal_norm={}\nratio={}\nthreshold={:e}\npass={pass}",
                traj.times.len() - 1,
                traj.doubling_change,
                fmt17(report.initial_norm),
                fmt17(report.terminal_norm),
                fmt17(report.ratio),
                cfg.tolerances.null_ratio
            );
            let mut modes = String::from("k,abs_c1,abs_c2\n");
            for (i, (x, y)) in report.per_mode.iter().enumerate() {
                modes += &csv_row([(i + 1).to_string(), fmt17(*x), fmt17(*y)]);
            }
            w.put("trajectory.csv", &trajectory_csv(&traj, cfg.samples))?;
            w.put("terminal_modes.csv", &modes)?;
            pass
        }
        ControlMode::Boundary => {
            let Some(coefficients) = stored.boundary.clone() else {
                return Err(Error::Config("control file holds no boundary control".into()));
            };
            if coefficients.u1.len() != cfg.modes {
                return Err(Error::Config(format!("control file lists {} boundary modes for K = {}", coefficients.u1.len(), cfg.modes)));
            }
            let cp = Arc::new(coupling.clone());
            let records: Vec<SpectralRecord> = build_records(&cp, &cfg.omega, cfg.modes, &spectral_options(cfg, false))?;
            let z0: InitialCoefficients = expand_initial_data(&records, initial)?;
            let residuals = if stored.is_zero() {
                let zero = |ts: &[f64]| -> Result<Vec<f64>> { Ok(vec![0.0; ts.len()]) };
                verify_boundary(&z0, &zero, &records, cfg.horizon, cfg.modes)?
            } else {
                let ctrl = boundary_control(coefficients, Arc::new(build_family(cfg.modes, cfg.horizon, cfg.tolerances.biortho)?))?;
                let sampler = |ts: &[f64]| -> Result<Vec<f64>> { ts.iter().map(|&x| assemble_boundary(&ctrl, x)).collect() };
                verify_boundary(&z0, &sampler, &records, cfg.horizon, cfg.modes)?
            };
            let worst = residuals.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            let pass = worst <= cfg.tolerances.duality;
            let _ = writeln!(text, "max_duality_residual={}\nthreshold={:e}\npass={pass}", fmt17(worst), cfg.tolerances.duality);
            let mut csv = String::from("k,residual_1,residual_2\n");
            for (i, r) in residuals.iter().enumerate() {
                csv += &csv_row([(i + 1).to_string(), fmt17(r[0]), fmt17(r[1])]);
            }
            w.put("duality_residuals.csv", &csv)?;
            pass
        }
    };
    w.put("verify.txt", &text)?;
    let line = text.lines().find(|l| l.starts_with("ratio=") || l.starts_with("max_duality_residual=")).unwrap_or("").to_string();
    Ok(w.finish(if pass { 0 } else { 2 }, format!("{} ({line})", if pass { "PASS" } else { "FAIL" })))
}

/// `quotient`: observability quotients over the configured modes.
pub fn quotient(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let prov = Provenance::new("quotient", cfg)?;
    let modes: Vec<usize> = if cfg.quotient_modes.is_empty() { (1..=cfg.modes).collect() } else { cfg.quotient_modes.clone() };
    let report = observability_quotient(&Arc::new(cfg.coupling.clone()), &cfg.omega, cfg.horizon, &modes, &cfg.rule())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let (lo, hi) = (modes[0], *modes.last().expect("nonempty mode list"));
    let growth = report.growth(lo, hi);
    let base = report.row(lo).map_or(f64::NAN, |r| r.ln_quotient);
    let spread = report.rows.iter().map(|r| (r.ln_quotient - base).exp()).fold(0.0, f64::max);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "degenerate={}\nmodes={lo}..{hi}\ngrowth={}\nmax_ratio_to_first={}\nln_c_obs_lower={}",
        report.degenerate,
        growth.map_or("undefined".into(), fmt17),
        fmt17(spread),
        fmt17(report.ln_c_obs_lower)
    );
    let mut w = Writer::new(out, &prov)?;
    w.put("quotient.csv", &String::from_utf8_lossy(&csv))?;
    w.put("quotient.txt", &text)?;
    let summary = if report.degenerate { "degenerate: observed component vanishes".to_string() } else { format!("growth {lo}..{hi}: {}", growth.map_or("undefined".into(), |g| format!("{g:e}"))) };
    Ok(w.finish(0, summary))
}
