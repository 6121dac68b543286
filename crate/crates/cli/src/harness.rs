//! Experiment drivers behind the `holobeam` subcommands: resumable sweep
//! runs, the single-receiver focusing study, and aperture current maps.
//!
//! Concurrency model: sweep points run on a pool of worker threads, each
//! solve confined to a single-thread rayon pool so one point never fans
//! out; all file writes happen on the calling thread, in sweep order.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use holobeam_core::optimizer::BasisDescriptor;
use holobeam_core::{
    beam_pattern, build_discrete_array, fd_beamformer, fd_solve, fresnel_channel, make_basis_rect,
    matched_beam, mf_solve, poynting_power, radiate_field, sample_user_channel, solve_scenario,
    synthesize_on_grid, upper_bound_rate, Aperture, BeamWeights, FresnelOrder, Point3,
    ReceiverGeometry, RunStatus, SolveReport, UserChannel,
};
use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{
    validate, ExperimentConfig, Profile, ScenarioConfig, SchemeId, SolverConfig, StudyConfig,
    SweepConfig,
};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// resolution of config + command-line overrides
// ---------------------------------------------------------------------------

/// Command-line overrides; every field beats its config counterpart.
#[derive(Debug, Default)]
pub struct CliOverrides {
    pub out: Option<PathBuf>,
    pub profile: Option<Profile>,
    pub schemes: Option<Vec<SchemeId>>,
    pub seed: Option<u64>,
}

/// A fully-resolved run: config merged with CLI flags and profile presets.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepConfig>,
    pub schemes: Vec<SchemeId>,
    pub solver: SolverConfig,
    pub fd_grid: (usize, usize),
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub study: Option<StudyConfig>,
}

pub fn resolve(cfg: ExperimentConfig, ov: CliOverrides) -> Result<ResolvedRun> {
    let scenario = match (ov.profile, cfg.scenario) {
        (Some(p), _) => p.scenario(),
        (None, Some(sc)) => sc,
        (None, None) => Profile::Desk.scenario(),
    };
    let run = ResolvedRun {
        scenario,
        sweep: cfg.sweep,
        schemes: ov.schemes.unwrap_or(cfg.schemes),
        solver: cfg.solver,
        fd_grid: cfg.fd_grid,
        seed: ov.seed.unwrap_or(cfg.seed),
        workers: cfg.workers,
        out_dir: ov
            .out
            .or_else(|| cfg.out_dir.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("holobeam-out")),
        study: cfg.study,
    };
    // re-check after merging: CLI flags can introduce the same problems a
    // hand-written config can
    validate(&ExperimentConfig {
        scenario: Some(run.scenario.clone()),
        sweep: run.sweep.clone(),
        schemes: run.schemes.clone(),
        solver: run.solver.clone(),
        fd_grid: run.fd_grid,
        seed: run.seed,
        out_dir: None,
        workers: run.workers,
        study: run.study.clone(),
    })?;
    Ok(run)
}

/// The reproducibility echo written next to every result set. Identical
/// echoes mean rows are comparable; a changed echo blocks accidental mixing
/// of results from different setups in one directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EchoDoc {
    scenario: ScenarioConfig,
    sweep: Option<SweepConfig>,
    schemes: Vec<SchemeId>,
    solver: SolverConfig,
    fd_grid: (usize, usize),
    seed: u64,
}

impl EchoDoc {
    fn of(run: &ResolvedRun) -> Self {
        Self {
            scenario: run.scenario.clone(),
            sweep: run.sweep.clone(),
            schemes: run.schemes.clone(),
            solver: run.solver.clone(),
            fd_grid: run.fd_grid,
            seed: run.seed,
        }
    }
}

// ---------------------------------------------------------------------------
// sweep runner
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct RunOutcome {
    pub rows_written: usize,
    pub rows_skipped: usize,
    pub results_path: PathBuf,
}

struct PointJob {
    value_str: String,
    scenario: ScenarioConfig,
    /// Schemes still absent from results.csv at this point.
    missing: Vec<SchemeId>,
}

struct PointResult {
    /// (scheme, formatted CSV fields) in execution order.
    rows: Vec<(SchemeId, Vec<String>)>,
    /// (file name, serialized report) pairs to drop into the out dir.
    reports: Vec<(String, String)>,
    /// One human line summarizing the point, for progress output.
    note: String,
}

pub fn run_experiment(run: &ResolvedRun) -> Result<RunOutcome> {
    let sweep = run.sweep.as_ref().ok_or_else(|| {
        Error::Config("holobeam run needs a sweep block (variable + values)".into())
    })?;
    if run.scenario.du_positions_m.is_empty() {
        return Err(Error::Config("scenario.du_positions_m must not be empty".into()));
    }

    fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
    check_or_write_echo(run)?;

    let k_du = run.scenario.du_positions_m.len();
    let l_eu = run.scenario.eu_positions_m.len();
    let header = csv_header(k_du, l_eu);
    let results_path = run.out_dir.join("results.csv");
    let existing = load_existing_keys(&results_path, &header)?;

    // work list: one job per sweep value, carrying only the schemes whose
    // rows are not in the file yet
    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for &value in &sweep.values {
        let value_str = value.to_string();
        let missing: Vec<SchemeId> = run
            .schemes
            .iter()
            .copied()
            .filter(|s| !existing.contains(&(value_str.clone(), s.tag().to_string())))
            .collect();
        skipped += run.schemes.len() - missing.len();
        if missing.is_empty() {
            continue;
        }
        jobs.push(PointJob {
            value_str,
            scenario: run.scenario.with_sweep_value(sweep.variable, value)?,
            missing,
        });
    }

    let mut writer = open_results_writer(&results_path, &header)?;
    let mut written = 0usize;
    if !jobs.is_empty() {
        let workers = run
            .workers
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            })
            .min(jobs.len())
            .max(1);
        let var_name = sweep.variable.name();
        let next_job = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, PointResult)>();

        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let jobs = &jobs;
                let next_job = &next_job;
                scope.spawn(move || {
                    // one isolated rayon pool per worker keeps each point's
                    // solve on a single thread
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(1)
                        .build()
                        .expect("single-thread pool");
                    loop {
                        let i = next_job.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        let result = pool.install(|| run_point(job, run, var_name));
                        if tx.send((i, result)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);

            // single-writer side: buffer out-of-order completions, emit in
            // sweep order, flush per point so interrupted runs resume
            let mut pending: BTreeMap<usize, PointResult> = BTreeMap::new();
            let mut next_write = 0usize;
            for (i, res) in rx {
                pending.insert(i, res);
                while let Some(res) = pending.remove(&next_write) {
                    written += flush_point(&mut writer, &run.out_dir, res)?;
                    next_write += 1;
                }
            }
            // only reachable when a worker died mid-queue; keep whatever
            // finished (the resume pass picks up the rest)
            for (_, res) in std::mem::take(&mut pending) {
                written += flush_point(&mut writer, &run.out_dir, res)?;
            }
            Ok(())
        })?;
    }
    writer.flush()?;

    Ok(RunOutcome {
        rows_written: written,
        rows_skipped: skipped,
        results_path,
    })
}

fn flush_point(
    writer: &mut csv::Writer<fs::File>,
    out_dir: &Path,
    res: PointResult,
) -> Result<usize> {
    let mut n = 0;
    for (_, fields) in &res.rows {
        writer.write_record(fields)?;
        n += 1;
    }
    writer.flush()?;
    for (name, body) in &res.reports {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))?;
    }
    eprintln!("{}", res.note);
    Ok(n)
}

fn check_or_write_echo(run: &ResolvedRun) -> Result<()> {
    let echo = EchoDoc::of(run);
    let path = run.out_dir.join("config_echo.json");
    let results = run.out_dir.join("results.csv");
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let prior: EchoDoc = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        if prior != echo {
            return Err(Error::Config(format!(
                "{} holds results for a different configuration; \
                 point --out at a fresh directory",
                run.out_dir.display()
            )));
        }
    } else {
        if results.exists() {
            return Err(Error::Config(format!(
                "{} has results.csv but no config_echo.json; refusing to \
                 mix rows of unknown provenance",
                run.out_dir.display()
            )));
        }
        let body = serde_json::to_string_pretty(&echo).expect("echo serializes");
        fs::write(&path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn csv_header(k_du: usize, l_eu: usize) -> Vec<String> {
    let mut h = vec![
        "sweep_var".to_string(),
        "sweep_value".to_string(),
        "scheme".to_string(),
        "r_sum_bits".to_string(),
    ];
    for l in 1..=l_eu {
        h.push(format!("eu{l}_harvest_W"));
    }
    for l in 1..=l_eu {
        h.push(format!("eu{l}_harvest_unproj_W"));
    }
    for k in 1..=k_du {
        h.push(format!("du{k}_rate_bits"));
    }
    h.extend(["power_used_A2", "iterations", "status", "seconds"].map(String::from));
    h
}

fn load_existing_keys(path: &Path, header: &[String]) -> Result<HashSet<(String, String)>> {
    let mut keys = HashSet::new();
    if !path.exists() {
        return Ok(keys);
    }
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if found != header {
        return Err(Error::Config(format!(
            "{}: column layout does not match this scenario; \
             point --out at a fresh directory",
            path.display()
        )));
    }
    for record in reader.records() {
        let record = record?;
        if let (Some(value), Some(scheme)) = (record.get(1), record.get(2)) {
            keys.insert((value.to_string(), scheme.to_string()));
        }
    }
    Ok(keys)
}

fn open_results_writer(path: &Path, header: &[String]) -> Result<csv::Writer<fs::File>> {
    let fresh = !path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    if fresh {
        writer.write_record(header)?;
        writer.flush()?;
    }
    Ok(writer)
}

// ---------------------------------------------------------------------------
// one sweep point
// ---------------------------------------------------------------------------

fn status_str(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::MaxIterations => "max_iterations",
        RunStatus::Infeasible => "infeasible",
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

fn report_file_name(var: &str, value_str: &str, scheme: SchemeId) -> String {
    format!("report_{var}_{value_str}_{}.json", scheme.tag())
}

/// Execute every missing scheme at one sweep point. Solver failures become
/// `status=error` rows; the sweep never aborts on a point.
fn run_point(job: &PointJob, run: &ResolvedRun, var_name: &str) -> PointResult {
    let k_du = run.scenario.du_positions_m.len();
    let l_eu = run.scenario.eu_positions_m.len();
    let opts = run.solver.bcd_options(run.seed);

    let mut rows: Vec<(SchemeId, Vec<String>)> = Vec::new();
    let mut reports = Vec::new();
    let mut notes = Vec::new();

    let scenario = match job.scenario.build() {
        Ok(s) => s,
        Err(e) => {
            // the whole point is unbuildable (for example an aperture side
            // the quadrature cannot host): one error row per scheme
            for &scheme in &job.missing {
                rows.push((scheme, error_row(var_name, &job.value_str, scheme, k_du, l_eu)));
            }
            return PointResult {
                rows,
                reports,
                note: format!("{var_name}={}: setup failed: {e}", job.value_str),
            };
        }
    };

    // H-IDET solves first when needed: UPPER is derived from its state
    let mut h_report: Option<SolveReport> = None;
    if job.missing.contains(&SchemeId::HIdet) {
        match solve_scenario(&scenario, &opts) {
            Ok(r) => h_report = Some(r),
            Err(e) => {
                notes.push(format!("H-IDET error: {e}"));
                for &scheme in &job.missing {
                    if matches!(scheme, SchemeId::HIdet | SchemeId::Upper) {
                        rows.push((
                            scheme,
                            error_row(var_name, &job.value_str, scheme, k_du, l_eu),
                        ));
                    }
                }
            }
        }
    } else if job.missing.contains(&SchemeId::Upper) {
        // H-IDET row already in the file: recover its state from the saved
        // report, or re-solve quietly if the file went missing
        let path = run
            .out_dir
            .join(report_file_name(var_name, &job.value_str, SchemeId::HIdet));
        h_report = fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .or_else(|| solve_scenario(&scenario, &opts).ok());
    }

    for &scheme in &job.missing {
        // already emitted as an error row above
        if rows.iter().any(|(s, _)| *s == scheme) {
            continue;
        }
        let solved: Result<SolveReport> = match scheme {
            SchemeId::HIdet => Ok(h_report.clone().expect("solved above")),
            SchemeId::FdIdet => fd_solve(&scenario, run.fd_grid, true, &opts).map_err(Error::from),
            SchemeId::Fd => fd_solve(&scenario, run.fd_grid, false, &opts).map_err(Error::from),
            SchemeId::Mf => scenario
                .channels()
                .and_then(|ch| mf_solve(&scenario, &ch, false))
                .map_err(Error::from),
            SchemeId::Upper => match &h_report {
                Some(h) => Ok(upper_report(h)),
                None => Err(Error::Config("no H-IDET state to derive UPPER from".into())),
            },
        };
        match solved {
            Ok(report) => {
                notes.push(format!(
                    "{} {:.3} bit/s/Hz ({}, {:.1}s)",
                    scheme.tag(),
                    report.r_sum_bits,
                    status_str(report.status),
                    report.wall_seconds
                ));
                rows.push((
                    scheme,
                    report_row(var_name, &job.value_str, scheme, k_du, l_eu, &report),
                ));
                if scheme != SchemeId::Upper {
                    let name = report_file_name(var_name, &job.value_str, scheme);
                    match serde_json::to_string(&report) {
                        Ok(body) => reports.push((name, body)),
                        Err(e) => notes.push(format!("{}: report not saved: {e}", scheme.tag())),
                    }
                }
            }
            Err(e) => {
                notes.push(format!("{} error: {e}", scheme.tag()));
                rows.push((scheme, error_row(var_name, &job.value_str, scheme, k_du, l_eu)));
            }
        }
    }

    PointResult {
        rows,
        reports,
        note: format!("{var_name}={}: {}", job.value_str, notes.join("; ")),
    }
}

/// The interference-free bound presented as a pseudo-report of the H-IDET
/// state: same beams and harvest, rates with interference dropped.
fn upper_report(h: &SolveReport) -> SolveReport {
    let mut r = h.clone();
    r.scheme = "UPPER".into();
    r.du_rates_bits = h
        .du_signal
        .iter()
        .zip(&h.du_noise)
        .map(|(s, n)| (1.0 + s / n).log2())
        .collect();
    r.r_sum_bits = upper_bound_rate(h);
    r.iterations = 0;
    r.wall_seconds = 0.0;
    r
}

fn report_row(
    var: &str,
    value_str: &str,
    scheme: SchemeId,
    k_du: usize,
    l_eu: usize,
    report: &SolveReport,
) -> Vec<String> {
    let mut row = vec![
        var.to_string(),
        value_str.to_string(),
        scheme.tag().to_string(),
        fmt(report.r_sum_bits),
    ];
    // the plain-FD report has no energy users (they are served as data
    // users); its harvest cells stay empty rather than faking zeros
    for l in 0..l_eu {
        row.push(report.eu_harvest_projected_w.get(l).map(|&v| fmt(v)).unwrap_or_default());
    }
    for l in 0..l_eu {
        row.push(report.eu_harvest_unprojected_w.get(l).map(|&v| fmt(v)).unwrap_or_default());
    }
    // the first K stream rates are the original data users in every scheme
    for k in 0..k_du {
        row.push(report.du_rates_bits.get(k).map(|&v| fmt(v)).unwrap_or_default());
    }
    row.push(fmt(report.power_used));
    row.push(report.iterations.to_string());
    row.push(status_str(report.status).to_string());
    row.push(format!("{:.3}", report.wall_seconds));
    row
}

fn error_row(
    var: &str,
    value_str: &str,
    scheme: SchemeId,
    k_du: usize,
    l_eu: usize,
) -> Vec<String> {
    let mut row = vec![
        var.to_string(),
        value_str.to_string(),
        scheme.tag().to_string(),
        String::new(),
    ];
    row.extend(std::iter::repeat(String::new()).take(2 * l_eu + k_du + 2));
    row.push("error".to_string());
    row.push(String::new());
    row
}

// ---------------------------------------------------------------------------
// single-receiver focusing study (`holobeam pattern`)
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct StudyOutcome {
    pub files: Vec<PathBuf>,
}

pub fn run_single_eu_study(run: &ResolvedRun) -> Result<StudyOutcome> {
    let sc = &run.scenario;
    let study = run.study.clone().unwrap_or_default();
    let aperture =
        Aperture::new(sc.aperture.lx_m, sc.aperture.ly_m, sc.aperture.nx, sc.aperture.ny)?;
    let medium = sc.medium()?;
    let geom = ReceiverGeometry::from_wavelength(sc.wavelength_m, sc.phi_rad, sc.z_load_ohm)?;
    let pt = sc.pt_a2;

    fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
    let mut files = Vec::new();

    // design one matched beam per focus; reused by the maps and the
    // focus-scan comparison
    let mut beams = Vec::new();
    for f in &study.foci_m {
        let focus = Point3::new(f[0], f[1], f[2]);
        let channel = sample_user_channel(&focus, &aperture, &medium)?;
        beams.push((focus, matched_beam(&channel, pt, &aperture, &geom)?));
    }

    // (a) x–z pattern map per focus, path-loss compensated, max = 1
    let m = &study.map;
    let mut grid = Vec::with_capacity(m.nx * m.nz);
    for iz in 0..m.nz {
        let z = m.z_from_m + (m.z_to_m - m.z_from_m) * iz as f64 / (m.nz - 1) as f64;
        for ix in 0..m.nx {
            let x = -m.x_halfwidth_m + 2.0 * m.x_halfwidth_m * ix as f64 / (m.nx - 1) as f64;
            grid.push(Point3::new(x, 0.0, z));
        }
    }
    for (focus, beam) in &beams {
        let pattern = beam_pattern(&beam.currents, &aperture, &medium, &grid)?;
        let name = format!("pattern_focus_{}_{}_{}.csv", focus.x, focus.y, focus.z);
        let path = run.out_dir.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["x_m", "z_m", "pattern"])?;
        for (p, v) in grid.iter().zip(&pattern.compensated) {
            w.write_record([p.x.to_string(), p.z.to_string(), fmt(*v)])?;
        }
        w.flush()?;
        files.push(path);
    }

    // boresight scan shared by the remaining two files
    let scan: Vec<f64> = (0..study.scan.points)
        .map(|i| {
            study.scan.from_m
                + (study.scan.to_m - study.scan.from_m) * i as f64
                    / (study.scan.points - 1) as f64
        })
        .collect();

    // (b) exact-kernel versus paraxial designs, all measured through the
    // exact channel; the bound column marks the classical Fresnel region
    let diag = (aperture.lx * aperture.lx + aperture.ly * aperture.ly).sqrt();
    let fresnel_bound = 0.5 * (diag.powi(3) / medium.wavelength).sqrt();
    {
        let path = run.out_dir.join("em_vs_fresnel.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "distance_m",
            "p_eh_exact_W",
            "p_eh_fresnel1_W",
            "p_eh_fresnel2_W",
            "below_fresnel_bound",
        ])?;
        for &d in &scan {
            let user = Point3::new(0.0, 0.0, d);
            let exact = sample_user_channel(&user, &aperture, &medium)?;
            let em = matched_beam(&exact, pt, &aperture, &geom)?;
            let mut harvested = Vec::with_capacity(2);
            for order in [FresnelOrder::First, FresnelOrder::Second] {
                let samples = aperture
                    .samples()
                    .iter()
                    .map(|s| fresnel_channel(&user, &s.position, &medium, order))
                    .collect::<holobeam_core::Result<Vec<_>>>()?;
                let approx = UserChannel::from_samples(user, samples);
                let beam = matched_beam(&approx, pt, &aperture, &geom)?;
                let field = radiate_field(&exact, &beam.currents, &aperture)?;
                harvested.push(poynting_power(std::slice::from_ref(&field), &geom));
            }
            w.write_record([
                d.to_string(),
                fmt(em.p_eh),
                fmt(harvested[0]),
                fmt(harvested[1]),
                if d < fresnel_bound { "1" } else { "0" }.to_string(),
            ])?;
        }
        w.flush()?;
        files.push(path);
    }

    // (c) harvested power along the boresight, one column per designed beam
    {
        let path = run.out_dir.join("multi_focus_harvest.csv");
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["distance_m".to_string()];
        for (focus, _) in &beams {
            header.push(format!("p_eh_beam_{}_{}_{}_W", focus.x, focus.y, focus.z));
        }
        w.write_record(&header)?;
        for &d in &scan {
            let user = Point3::new(0.0, 0.0, d);
            let channel = sample_user_channel(&user, &aperture, &medium)?;
            let mut row = vec![d.to_string()];
            for (_, beam) in &beams {
                let field = radiate_field(&channel, &beam.currents, &aperture)?;
                row.push(fmt(poynting_power(std::slice::from_ref(&field), &geom)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        files.push(path);
    }

    // same reproducibility contract as the sweep harness
    let echo_path = run.out_dir.join("study_echo.json");
    let echo = serde_json::json!({ "scenario": sc, "study": study, "seed": run.seed });
    let body = serde_json::to_string_pretty(&echo).expect("echo serializes");
    fs::write(&echo_path, body).map_err(|e| Error::io(&echo_path, e))?;
    files.push(echo_path);

    Ok(StudyOutcome { files })
}

// ---------------------------------------------------------------------------
// aperture current maps (`holobeam maps`)
// ---------------------------------------------------------------------------

/// Per-stream amplitude/phase CSVs of the x-polarized current component on
/// the aperture grid, amplitude normalized to a maximum of 1.
pub fn emit_current_maps(report_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let report: SolveReport =
        serde_json::from_str(&text).map_err(|e| Error::json(report_path, e))?;
    let echo = &report.scenario_echo;
    let aperture = Aperture::new(echo.lx_m, echo.ly_m, echo.nx, echo.ny)?;

    let streams = stream_currents(&report, &aperture)?;
    let labels = stream_labels(streams.len(), echo.num_du, echo.num_eu);

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let scheme = report.scheme.to_lowercase();
    let mut files = Vec::new();
    for (currents, label) in streams.iter().zip(&labels) {
        let peak = currents.iter().map(|v| v.x.norm()).fold(0.0f64, f64::max);
        let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
        let path = out_dir.join(format!("map_{scheme}_{label}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["x_m", "y_m", "amplitude", "phase"])?;
        for (sample, v) in aperture.samples().iter().zip(currents) {
            let amp = v.x.norm() * scale;
            let mut phase = v.x.im.atan2(v.x.re);
            if phase <= -std::f64::consts::PI {
                phase = std::f64::consts::PI;
            }
            w.write_record([
                sample.position.x.to_string(),
                sample.position.y.to_string(),
                fmt(amp),
                fmt(phase),
            ])?;
        }
        w.flush()?;
        files.push(path);
    }
    Ok(files)
}

/// Reconstruct each stream's aperture-grid current samples from the saved
/// weights and basis descriptor.
fn stream_currents(
    report: &SolveReport,
    aperture: &Aperture,
) -> Result<Vec<Vec<Vector3<Complex64>>>> {
    let echo = &report.scenario_echo;
    match &report.basis {
        BasisDescriptor::Fourier { n_max_x, n_max_y, modes } => {
            let basis = make_basis_rect(echo.lx_m, echo.ly_m, *n_max_x, *n_max_y)?;
            if basis.mode_count() != *modes {
                return Err(Error::Config(format!(
                    "report basis is inconsistent: descriptor says {modes} modes, \
                     bounds give {}",
                    basis.mode_count()
                )));
            }
            report
                .weights
                .iter()
                .map(|flat| {
                    let w = unpack_modes(flat, *modes)?;
                    Ok(synthesize_on_grid(&BeamWeights::from_modes(w), &basis, aperture)?)
                })
                .collect()
        }
        BasisDescriptor::Discrete { elements, .. } => {
            if *elements == aperture.sample_count() {
                // matched-filter reports store the grid currents directly
                return report
                    .weights
                    .iter()
                    .map(|flat| unpack_modes(flat, aperture.sample_count()))
                    .collect();
            }
            let array = build_discrete_array(aperture, echo.wavelength_m)?;
            if array.element_count() != *elements {
                return Err(Error::Config(format!(
                    "report array is inconsistent: descriptor says {elements} elements, \
                     the grid rebuilds {}",
                    array.element_count()
                )));
            }
            report
                .weights
                .iter()
                .map(|flat| {
                    let w = unpack_flat(flat, 3 * elements)?;
                    let v = fd_beamformer(&w, &array);
                    let mut grid = vec![Vector3::zeros(); aperture.sample_count()];
                    for (m, vm) in v.iter().enumerate() {
                        for &(sample, _) in array.captured(m) {
                            grid[sample] = *vm;
                        }
                    }
                    Ok(grid)
                })
                .collect()
        }
    }
}

fn unpack_flat(flat: &[(f64, f64)], expected: usize) -> Result<DVector<Complex64>> {
    if flat.len() != expected {
        return Err(Error::Config(format!(
            "report weights have {} entries, expected {expected}",
            flat.len()
        )));
    }
    Ok(DVector::from_iterator(
        expected,
        flat.iter().map(|&(re, im)| Complex64::new(re, im)),
    ))
}

fn unpack_modes(flat: &[(f64, f64)], modes: usize) -> Result<Vec<Vector3<Complex64>>> {
    let v = unpack_flat(flat, 3 * modes)?;
    Ok((0..modes)
        .map(|n| Vector3::new(v[3 * n], v[3 * n + 1], v[3 * n + 2]))
        .collect())
}

fn stream_labels(streams: usize, num_du: usize, num_eu: usize) -> Vec<String> {
    if streams == num_du + num_eu {
        (1..=num_du)
            .map(|k| format!("du{k}"))
            .chain((1..=num_eu).map(|l| format!("eu{l}")))
            .collect()
    } else {
        (1..=streams).map(|i| format!("stream{i}")).collect()
    }
}
