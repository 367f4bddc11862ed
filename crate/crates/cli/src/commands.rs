//! Subcommand implementations.

use std::path::Path;

use adiabat::analysis::{fit_power_law, fit_rate_vs_size, split_regimes, Regime, RegimeSplit, ScalingFit};
use adiabat::evolution::{evolve, instantaneous_infidelity, sweep, Target};
use adiabat::schedules::{measure_boundary_order, BoundaryOrder, Schedule};
use serde::{Deserialize, Serialize};

use crate::build::{evolution_template, model_path, target, ScheduleFactory};
use crate::config::{ExperimentConfig, Format, ScheduleChoice};
use crate::error::CliError;
use crate::output::{num, opt_num, OutputDir};

/// Tolerance on endpoint derivatives when measuring boundary order.
const ORDER_TOLERANCE: f64 = 1e-6;

fn stem_for(base: &str, index: usize, count: usize) -> String {
    if count == 1 {
        base.to_string()
    } else {
        format!("{base}_{index}")
    }
}

#[derive(Serialize)]
struct ScheduleSummary {
    index: usize,
    kind: ScheduleChoice,
    label: String,
    declared_order: BoundaryOrder,
    measured_order: BoundaryOrder,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_polynomial_monomial_coefficients: Option<Vec<f64>>,
}

pub fn schedule(cfg: &ExperimentConfig, points: usize) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.require_schedules()?;
    let path = model_path(cfg)?;
    let schedules = ScheduleFactory::new(cfg, path.as_ref()).build_all()?;
    let out = OutputDir::create(&cfg.output.directory)?;
    let mut summaries = Vec::new();
    for (i, (s, block)) in schedules.iter().zip(&cfg.schedule).enumerate() {
        let measured = measure_boundary_order(s, ORDER_TOLERANCE);
        println!(
            "{}: declared order {}, measured order {}",
            s.label(),
            s.declared_order(),
            measured
        );
        if cfg.wants(Format::Csv) {
            let name = format!("{}.csv", stem_for("schedule", i, schedules.len()));
            out.write(&name, |w| s.write_csv(points, w))?;
        }
        summaries.push(ScheduleSummary {
            index: i,
            kind: block.kind,
            label: s.label(),
            declared_order: s.declared_order(),
            measured_order: measured,
            gap_polynomial_monomial_coefficients: s.gap_polynomial().map(|p| p.monomial_coefficients()),
        });
    }
    if cfg.wants(Format::Json) {
        out.write_json("schedule.json", &summaries)?;
    }
    out.sidecar("schedule", cfg)?;
    Ok(())
}

pub fn gap(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let path = model_path(cfg)?;
    let profile = adiabat::spectral::gap_profile(path.as_ref(), cfg.run.gap_points)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let (s_min, g_min) = profile.minimum();
    println!("minimum gap {} at s = {}", num(g_min), num(s_min));
    let out = OutputDir::create(&cfg.output.directory)?;
    out.write("gap.csv", |w| profile.write_csv(w))?;
    out.sidecar("gap", cfg)?;
    Ok(())
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    config: &'a ExperimentConfig,
    schedule: String,
    total_time: f64,
    epsilon: f64,
    /// Against the solved ground state at the end of the path.
    final_delta: f64,
    /// Against the configured target.
    target_infidelity: f64,
    steps: usize,
    step_difference: f64,
    max_norm_drift: f64,
}

pub fn evolve_one(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    cfg.require_schedules()?;
    let times = cfg.require_times()?;
    if cfg.schedule.len() != 1 || times.len() != 1 {
        return Err(CliError::Config(format!(
            "evolve needs exactly one schedule and one T, got {} and {}",
            cfg.schedule.len(),
            times.len()
        )));
    }
    let path = model_path(cfg)?;
    let schedule = ScheduleFactory::new(cfg, path.as_ref()).build(&cfg.schedule[0])?;
    let evo = evolution_template(cfg, times[0]);
    let (state, record) =
        evolve(path.as_ref(), &schedule, &evo).map_err(|e| CliError::Numerical(e.to_string()))?;
    let target_infidelity = match target(cfg, path.as_ref()) {
        Target::SolvedGround => record.final_point().delta,
        Target::State(t) => instantaneous_infidelity(&state, &t),
    };
    let summary = EvolveSummary {
        config: cfg,
        schedule: schedule.label(),
        total_time: evo.total_time,
        epsilon: evo.epsilon(),
        final_delta: record.final_point().delta,
        target_infidelity,
        steps: record.steps,
        step_difference: record.step_difference,
        max_norm_drift: record.max_norm_drift(),
    };
    println!(
        "{} T = {}: final infidelity {} ({} steps)",
        summary.schedule,
        num(summary.total_time),
        num(target_infidelity),
        record.steps
    );
    let out = OutputDir::create(&cfg.output.directory)?;
    if cfg.wants(Format::Csv) {
        out.write("trajectory.csv", |w| record.write_csv(w))?;
    }
    out.write_json("evolve.json", &summary)?;
    out.sidecar("trajectory", cfg)?;
    Ok(())
}

/// One sweep result as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: String,
    #[serde(rename = "L")]
    pub sites: usize,
    pub schedule_kind: String,
    pub n: Option<u32>,
    pub d: Option<f64>,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub epsilon: f64,
    pub final_infidelity: Option<f64>,
    pub runtime_s: Option<f64>,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub error: Option<String>,
}

const SWEEP_COLUMNS: [&str; 9] = [
    "model",
    "L",
    "schedule_kind",
    "n",
    "d",
    "T",
    "epsilon",
    "final_infidelity",
    "runtime_s",
];

fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record(&[
            r.model.clone(),
            r.sites.to_string(),
            r.schedule_kind.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            opt_num(r.d),
            num(r.total_time),
            num(r.epsilon),
            opt_num(r.final_infidelity),
            opt_num(r.runtime_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let idx: Vec<usize> = SWEEP_COLUMNS[..8].iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim().to_string();
        let row = line + 1;
        let float = |k: usize| -> Result<Option<f64>, CliError> {
            let v = field(k);
            if v.is_empty() {
                return Ok(None);
            }
            v.parse()
                .map(Some)
                .map_err(|_| bad(format!("data row {row}, column {}: bad number {v:?}", SWEEP_COLUMNS[k])))
        };
        let required = |k: usize| {
            float(k)?.ok_or_else(|| bad(format!("data row {row}: column {} is empty", SWEEP_COLUMNS[k])))
        };
        let n = match field(3) {
            v if v.is_empty() => None,
            v => Some(v.parse().map_err(|_| bad(format!("data row {row}: bad n {v:?}")))?),
        };
        let sites = field(1)
            .parse()
            .map_err(|_| bad(format!("data row {row}: bad L {:?}", field(1))))?;
        rows.push(SweepRecord {
            model: field(0),
            sites,
            schedule_kind: field(2),
            n,
            d: float(4)?,
            total_time: required(5)?,
            epsilon: required(6)?,
            final_infidelity: float(7)?,
            runtime_s: None,
            label: String::new(),
            steps: None,
            error: None,
        });
    }
    Ok(rows)
}

/// Runs every schedule at every T; writes `sweep.csv` (and `sweep.json`).
/// Returns the records and the path of the CSV table.
pub fn sweep_all(cfg: &ExperimentConfig) -> Result<(Vec<SweepRecord>, Option<std::path::PathBuf>), CliError> {
    cfg.validate()?;
    cfg.require_schedules()?;
    let times = cfg.require_times()?;
    let path = model_path(cfg)?;
    let schedules: Vec<Schedule> = ScheduleFactory::new(cfg, path.as_ref()).build_all()?;
    let epsilons: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let tgt = target(cfg, path.as_ref());
    let rows = sweep(
        path.as_ref(),
        &schedules,
        &epsilons,
        &evolution_template(cfg, 1.0),
        &tgt,
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let records: Vec<SweepRecord> = rows
        .into_iter()
        .map(|r| {
            let block = &cfg.schedule[r.schedule_index];
            // report T as configured rather than 1/(1/T)
            let total_time = epsilons
                .iter()
                .position(|&e| e == r.epsilon)
                .map_or(r.total_time, |i| times[i]);
            SweepRecord {
                model: cfg.model.name().to_string(),
                sites: cfg.model.sites(),
                schedule_kind: block.kind.name().to_string(),
                n: r.n,
                d: r.d,
                total_time,
                epsilon: r.epsilon,
                final_infidelity: r.result.as_ref().ok().copied(),
                runtime_s: cfg.output.record_runtime.then_some(r.runtime_s),
                label: r.schedule_label.clone(),
                steps: r.steps,
                error: r.result.err(),
            }
        })
        .collect();
    for r in &records {
        match (&r.final_infidelity, &r.error) {
            (Some(d), _) => println!("{} T = {}: {}", r.label, num(r.total_time), num(*d)),
            (None, Some(e)) => eprintln!("{} T = {}: failed: {e}", r.label, num(r.total_time)),
            _ => {}
        }
    }
    let out = OutputDir::create(&cfg.output.directory)?;
    let csv_path = if cfg.wants(Format::Csv) {
        Some(out.write("sweep.csv", |w| write_sweep_csv(&records, w))?)
    } else {
        None
    };
    if cfg.wants(Format::Json) {
        out.write_json("sweep.json", &records)?;
    }
    out.sidecar("sweep", cfg)?;
    Ok((records, csv_path))
}

pub fn sweep_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (records, _) = sweep_all(cfg)?;
    check_failures(&records)
}

fn check_failures(records: &[SweepRecord]) -> Result<(), CliError> {
    let failed = records.iter().filter(|r| r.final_infidelity.is_none()).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {} sweep runs failed", records.len())));
    }
    Ok(())
}

/// Fits of one schedule curve.
#[derive(Debug, Serialize)]
pub struct CurveFit {
    pub model: String,
    #[serde(rename = "L")]
    pub sites: usize,
    pub schedule_kind: String,
    pub n: Option<u32>,
    pub d: Option<f64>,
    pub points: usize,
    /// Present when the curve is long enough for a regime split.
    pub split: Option<RegimeSplit>,
    /// Power law over the polynomial side, or over every point without a split.
    pub power_law: Option<ScalingFit>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RateVsSize {
    pub model: String,
    pub schedule_kind: String,
    pub n: Option<u32>,
    pub d: Option<f64>,
    pub rates: Vec<(f64, f64)>,
    pub amplitude: f64,
    pub exponent: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub input: String,
    pub curves: Vec<CurveFit>,
    pub rate_vs_size: Vec<RateVsSize>,
}

type CurveKey = (String, usize, String, Option<u32>, Option<u64>);

fn curve_key(r: &SweepRecord) -> CurveKey {
    (
        r.model.clone(),
        r.sites,
        r.schedule_kind.clone(),
        r.n,
        r.d.map(f64::to_bits),
    )
}

fn fit_curve(rows: &[&SweepRecord]) -> CurveFit {
    let first = rows[0];
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.final_infidelity.map(|d| (r.epsilon, d)))
        .collect();
    let mut fit = CurveFit {
        model: first.model.clone(),
        sites: first.sites,
        schedule_kind: first.schedule_kind.clone(),
        n: first.n,
        d: first.d,
        points: points.len(),
        split: None,
        power_law: None,
        note: None,
    };
    match split_regimes(&points) {
        Ok(split) => {
            fit.power_law = Some(split.polynomial_fit.clone());
            fit.split = Some(split);
        }
        Err(split_err) => match fit_power_law(&points) {
            Ok(p) => {
                fit.power_law = Some(p);
                fit.note = Some(format!("no regime split ({split_err}); power law over all points"));
            }
            Err(e) => fit.note = Some(format!("no fit: {e}")),
        },
    }
    fit
}

fn fitted_value(fit: &ScalingFit, epsilon: f64) -> f64 {
    match fit.regime {
        Regime::Polynomial => fit.prefactor * epsilon.powf(fit.exponent_or_rate),
        Regime::Exponential => fit.prefactor * (-fit.exponent_or_rate / epsilon).exp(),
    }
}

pub fn fit_records(records: &[SweepRecord], input: &str) -> FitReport {
    let mut keys: Vec<CurveKey> = Vec::new();
    for r in records {
        let k = curve_key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let curves: Vec<CurveFit> = keys
        .iter()
        .map(|k| {
            let rows: Vec<&SweepRecord> = records.iter().filter(|r| &curve_key(r) == k).collect();
            fit_curve(&rows)
        })
        .collect();
    // size dependence of the exponential rate, per schedule across sizes
    let mut rate_vs_size = Vec::new();
    let mut families: Vec<(String, String, Option<u32>, Option<u64>)> = Vec::new();
    for c in &curves {
        let f = (c.model.clone(), c.schedule_kind.clone(), c.n, c.d.map(f64::to_bits));
        if !families.contains(&f) {
            families.push(f);
        }
    }
    for f in families {
        let rates: Vec<(f64, f64)> = curves
            .iter()
            .filter(|c| (c.model.clone(), c.schedule_kind.clone(), c.n, c.d.map(f64::to_bits)) == f)
            .filter_map(|c| {
                let e = c.split.as_ref()?.exponential_fit.as_ref()?;
                Some((c.sites as f64, e.exponent_or_rate))
            })
            .collect();
        if let Ok((amplitude, exponent)) = fit_rate_vs_size(&rates) {
            rate_vs_size.push(RateVsSize {
                model: f.0,
                schedule_kind: f.1,
                n: f.2,
                d: f.3.map(f64::from_bits),
                rates,
                amplitude,
                exponent,
            });
        }
    }
    FitReport {
        input: input.to_string(),
        curves,
        rate_vs_size,
    }
}

fn write_fit_table<W: std::io::Write>(
    records: &[SweepRecord],
    report: &FitReport,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "L",
        "schedule_kind",
        "n",
        "d",
        "epsilon",
        "final_infidelity",
        "regime",
        "fitted_infidelity",
    ])?;
    for r in records {
        let Some(delta) = r.final_infidelity else { continue };
        let curve = report.curves.iter().find(|c| {
            (c.model.as_str(), c.sites, c.schedule_kind.as_str(), c.n, c.d.map(f64::to_bits))
                == (r.model.as_str(), r.sites, r.schedule_kind.as_str(), r.n, r.d.map(f64::to_bits))
        });
        let assigned = curve.and_then(|c| match &c.split {
            Some(s) if s.exponential.iter().any(|p| p.0 == r.epsilon) => {
                s.exponential_fit.as_ref().map(|f| ("exponential", f))
            }
            Some(s) if s.polynomial.iter().any(|p| p.0 == r.epsilon) => {
                Some(("polynomial", &s.polynomial_fit))
            }
            Some(_) => None,
            None => c.power_law.as_ref().map(|f| ("polynomial", f)),
        });
        let (regime, fitted) = match assigned {
            Some((name, f)) => (name.to_string(), num(fitted_value(f, r.epsilon))),
            None => ("excluded".to_string(), String::new()),
        };
        w.write_record(&[
            r.model.clone(),
            r.sites.to_string(),
            r.schedule_kind.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            opt_num(r.d),
            num(r.epsilon),
            num(delta),
            regime,
            fitted,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_fits(report: &FitReport) {
    for c in &report.curves {
        let n = c.n.map(|n| format!(" n={n}")).unwrap_or_default();
        match (&c.split, &c.power_law) {
            (Some(s), Some(p)) => {
                let exp = s
                    .exponential_fit
                    .as_ref()
                    .map(|e| format!(", exponential rate {:.4}", e.exponent_or_rate))
                    .unwrap_or_default();
                println!(
                    "{} L={} {}{n}: slope {:.3} over {} points, crossover eps {}{exp}",
                    c.model,
                    c.sites,
                    c.schedule_kind,
                    p.exponent_or_rate,
                    p.points,
                    num(s.crossover)
                );
            }
            (None, Some(p)) => println!(
                "{} L={} {}{n}: slope {:.3} over all {} points",
                c.model, c.sites, c.schedule_kind, p.exponent_or_rate, p.points
            ),
            _ => println!(
                "{} L={} {}{n}: {}",
                c.model,
                c.sites,
                c.schedule_kind,
                c.note.as_deref().unwrap_or("no fit")
            ),
        }
    }
    for r in &report.rate_vs_size {
        println!(
            "{} {} rate vs size: c = {:.4} L^{:.3}",
            r.model, r.schedule_kind, r.amplitude, r.exponent
        );
    }
}

#[derive(Serialize)]
struct FitSidecar<'a> {
    input: &'a str,
}

/// Reads a sweep table and writes `fit.json` and `fit.csv` to `out_dir`.
pub fn fit(input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let records = read_sweep_csv(input)?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", input.display())));
    }
    let name = input.display().to_string();
    let report = fit_records(&records, &name);
    print_fits(&report);
    let out = OutputDir::create(out_dir)?;
    out.write_json("fit.json", &report)?;
    out.write("fit.csv", |w| write_fit_table(&records, &report, w))?;
    out.sidecar("fit", &FitSidecar { input: &name })?;
    if report.curves.iter().all(|c| c.power_law.is_none()) {
        return Err(CliError::Numerical("no curve had enough points to fit".into()));
    }
    Ok(())
}

/// Sweep followed by fits of its table.
pub fn sweep_and_fit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (records, _) = sweep_all(cfg)?;
    let report = fit_records(&records, "sweep.csv");
    print_fits(&report);
    let out = OutputDir::create(&cfg.output.directory)?;
    out.write_json("fit.json", &report)?;
    out.write("fit.csv", |w| write_fit_table(&records, &report, w))?;
    out.sidecar("fit", &FitSidecar { input: "sweep.csv" })?;
    check_failures(&records)
}
