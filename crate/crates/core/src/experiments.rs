//! Scenario runs, parameter sweeps with ratio-stability statistics, and the
//! CSV/JSON/plot-data writers behind the command-line tool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    evaluate, queue_delay, relay_number, secondary_cell_area, secondary_floor, simulate_queue, Inputs,
    MobilityKind, Quantity,
};
use crate::channel::Scenario;
use crate::config::{RunConfig, ScenarioKind};
use crate::deployment::{sample_with, Deployment, SampleOptions};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, CLUSTER_SIDE, FRAME_SLOTS};
use crate::interference::probe;
use crate::metrics::{TierReport, Window};
use crate::secondary_mobile::{
    mixing_tau, run_standalone, separation_profile, MobileParams, MobileSim, MobilityModel, StandaloneParams,
    StandaloneReport,
};
use crate::secondary_static::{StaticParams, StaticSim};
use crate::seeds::SeedStreams;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSummary {
    pub slots: u64,
    pub samples: usize,
    pub max_i_p: f64,
    pub max_i_sp_low: f64,
    pub max_i_sp_delivery: f64,
    pub min_rate_hop: f64,
    pub min_rate_delivery: f64,
    pub breaches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: ScenarioKind,
    pub n: f64,
    pub beta: f64,
    pub m: f64,
    pub seed: u64,
    pub p: f64,
    pub a_p: f64,
    pub a_s: f64,
    pub primary_cells_per_side: usize,
    pub secondary_cells_per_side: usize,
    pub s_rw: Option<f64>,
    pub queues: Option<usize>,
    pub n_split: Option<usize>,
    pub primary: TierReport,
    pub secondary: TierReport,
    pub queue_high_water: Option<u32>,
    pub queue_bound: Option<u32>,
    pub measured_q: Option<f64>,
    pub predicted_q: Option<f64>,
    pub secondary_relay_fraction: Option<f64>,
    pub interference: Option<InterferenceSummary>,
    /// Every counter the scenario keeps, by name.
    pub violations: BTreeMap<String, u64>,
    pub invariant_breaches: u64,
    /// One named line per failed invariant; empty for a clean run.
    pub diagnostics: Vec<String>,
    pub notes: Vec<String>,
}

impl RunMetrics {
    pub fn failed(&self) -> bool {
        !self.diagnostics.is_empty()
    }
}

/// Metrics plus the optional event and mobility traces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Trace,
    pub mobility_trace: Vec<(u64, u32, u32)>,
}

fn counters<T: Serialize>(v: &T) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(v) {
        for (k, v) in map {
            if let Some(x) = v.as_u64() {
                out.insert(k, x);
            }
        }
    }
    out
}

fn named_failures(map: &BTreeMap<String, u64>, keys: &[&str]) -> Vec<String> {
    keys.iter()
        .filter_map(|&k| {
            let v = map.get(k).copied().unwrap_or(0);
            (v > 0).then(|| format!("{k}: {v}"))
        })
        .collect()
}

/// Primary grid for a configuration.
pub fn primary_grid(cfg: &RunConfig) -> Result<GridSpec> {
    GridSpec::fitted(cfg.target_ap(), CLUSTER_SIDE)
}

/// Secondary grid of the static scenario: `n^2 a_p^2 / (m ln m)` on the
/// fitted primary grid, never below the connectivity floor `2 ln m / m`.
pub fn static_secondary_grid(n: f64, m: f64, a_p: f64) -> Result<GridSpec> {
    let a_s = secondary_cell_area(n, m, a_p).max(secondary_floor(m));
    GridSpec::fitted(a_s, CLUSTER_SIDE)
}

pub fn deploy(cfg: &RunConfig) -> Result<Deployment> {
    sample_with(
        cfg.n,
        cfg.beta,
        cfg.seed,
        SampleOptions { fixed_count: cfg.fixed_count, mobile_classes: cfg.scenario.is_mobile() },
    )
}

pub fn run(cfg: &RunConfig) -> Result<RunMetrics> {
    run_with_trace(cfg).map(|o| o.metrics)
}

/// One deterministic run of `cfg` with every invariant monitor the config
/// enables.
pub fn run_with_trace(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dep = deploy(cfg)?;
    let pgrid = primary_grid(cfg)?;
    let streams = SeedStreams::new(cfg.seed);
    let window = Window { warmup: cfg.warmup, measure: cfg.measure };
    let m = dep.m;
    let mut notes = Vec::new();
    let (mut metrics, trace, mobility_trace, sgrid) = match cfg.scenario {
        ScenarioKind::Static => {
            let sgrid = static_secondary_grid(cfg.n, m, pgrid.cell_area)?;
            let n_split = cfg.n_split.unwrap_or_else(|| relay_number(m));
            let params = StaticParams {
                p: cfg.p,
                p_s: cfg.p_s,
                n_split,
                tagged_flows: cfg.tagged_flows,
                window,
                audit: cfg.audit,
                trace: cfg.trace,
            };
            let mut sim = StaticSim::new(&dep, pgrid, sgrid, params, &streams)?;
            while sim.slot() < window.end() {
                sim.step();
            }
            let trace = std::mem::take(&mut sim.trace);
            let r = sim.finish()?;
            let violations = counters(&r.violations);
            let diagnostics =
                named_failures(&violations, &["gating_breaches", "lockstep_breaches", "conservation_breaches"]);
            if r.violations.fallback_pairs > 0 {
                notes.push(format!(
                    "{} primary pairs fell back to unassisted relaying",
                    r.violations.fallback_pairs
                ));
            }
            let metrics = RunMetrics {
                scenario: cfg.scenario,
                n: cfg.n,
                beta: cfg.beta,
                m,
                seed: cfg.seed,
                p: cfg.p,
                a_p: pgrid.cell_area,
                a_s: sgrid.cell_area,
                primary_cells_per_side: pgrid.cells_per_side,
                secondary_cells_per_side: sgrid.cells_per_side,
                s_rw: None,
                queues: None,
                n_split: Some(n_split),
                primary: r.primary,
                secondary: r.secondary,
                queue_high_water: None,
                queue_bound: None,
                measured_q: None,
                predicted_q: None,
                secondary_relay_fraction: Some(r.secondary_relay_fraction),
                interference: None,
                invariant_breaches: r.violations.invariant_breaches(),
                violations,
                diagnostics,
                notes: Vec::new(),
            };
            (metrics, trace, Vec::new(), sgrid)
        }
        ScenarioKind::MobileIid | ScenarioKind::MobileRw => {
            let (model, queues) = if cfg.scenario == ScenarioKind::MobileIid {
                (MobilityModel::iid(), cfg.queues.unwrap_or(1))
            } else {
                let s = cfg.s_rw.ok_or_else(|| Error::Config("mobile_rw needs `s_rw`".into()))?;
                let model = MobilityModel::random_walk(s, pgrid.cell_area)?;
                let q = match cfg.queues {
                    Some(q) => q,
                    None => mixing_tau(model.s())?,
                };
                (model, q)
            };
            let params = MobileParams {
                model,
                p: cfg.p,
                queues,
                own_lambda: cfg.own_lambda,
                window,
                audit: cfg.audit,
                trace: cfg.trace,
                mobility_trace_slots: cfg.mobility_trace_slots,
            };
            let mut sim = MobileSim::new(&dep, pgrid, params, &streams)?;
            while sim.slot() < window.end() {
                sim.step();
            }
            let trace = std::mem::take(&mut sim.trace);
            let mobility = std::mem::take(&mut sim.mobility_trace);
            let sgrid = sim.sgrid;
            let r = sim.finish()?;
            let violations = counters(&r.violations);
            let mut diagnostics = named_failures(
                &violations,
                &[
                    "purge_breaches",
                    "class_breaches",
                    "type_k_breaches",
                    "conservation_breaches",
                    "gating_breaches",
                    "primary_moved",
                ],
            );
            if r.violations.queue_bound_exceeded > 0 {
                diagnostics.push(format!(
                    "stability: relay queue high water {} exceeds n + 1 = {}",
                    r.queue_high_water, r.queue_bound
                ));
            }
            if r.violations.unheard_packets > 0 {
                notes.push(format!("{} primary packets were overheard by no secondary", r.violations.unheard_packets));
            }
            let metrics = RunMetrics {
                scenario: cfg.scenario,
                n: cfg.n,
                beta: cfg.beta,
                m,
                seed: cfg.seed,
                p: cfg.p,
                a_p: r.a_p,
                a_s: r.a_s,
                primary_cells_per_side: pgrid.cells_per_side,
                secondary_cells_per_side: sgrid.cells_per_side,
                s_rw: (cfg.scenario == ScenarioKind::MobileRw).then_some(r.s_rw),
                queues: Some(queues),
                n_split: None,
                primary: r.primary,
                secondary: r.secondary,
                queue_high_water: Some(r.queue_high_water),
                queue_bound: Some(r.queue_bound),
                measured_q: Some(r.measured_q),
                predicted_q: Some(r.predicted_q),
                secondary_relay_fraction: None,
                interference: None,
                invariant_breaches: r.violations.invariant_breaches(),
                violations,
                diagnostics,
                notes: Vec::new(),
            };
            (metrics, trace, mobility, sgrid)
        }
    };
    if cfg.interference_slots > 0 {
        if pgrid.is_tiled() {
            let scenario = if cfg.scenario.is_mobile() { Scenario::Mobile } else { Scenario::Static };
            let rep = probe(&dep, &pgrid, &sgrid, scenario, cfg.interference_slots, &cfg.channel()?, cfg.seed)?;
            if rep.breaches > 0 {
                metrics.diagnostics.push(format!("interference_bound_breaches: {}", rep.breaches));
            }
            metrics.interference = Some(InterferenceSummary {
                slots: cfg.interference_slots,
                samples: rep.samples.len(),
                max_i_p: rep.max_i_p,
                max_i_sp_low: rep.max_i_sp_low,
                max_i_sp_delivery: rep.max_i_sp_delivery,
                min_rate_hop: rep.min_rate_hop,
                min_rate_delivery: rep.min_rate_delivery,
                breaches: rep.breaches,
            });
        } else {
            notes.push("interference probe skipped: primary grid has partial clusters".into());
        }
    }
    metrics.notes = notes;
    Ok(RunOutput { metrics, trace, mobility_trace })
}

// ---------------------------------------------------------------------------
// Sweeps.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    pub x: f64,
    pub measured: f64,
    pub predicted: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: String,
    pub rows: Vec<LawRow>,
    /// `max r / min r` across sweep points (infinite if any `r` is not a
    /// positive number).
    pub spread: f64,
}

impl LawReport {
    pub fn new(law: &str, xs: &[f64], measured: &[f64], predicted: &[f64]) -> Self {
        let rows: Vec<LawRow> = xs
            .iter()
            .zip(measured)
            .zip(predicted)
            .map(|((&x, &m), &p)| LawRow { x, measured: m, predicted: p, r: m / p })
            .collect();
        let ok = rows.iter().all(|r| r.r.is_finite() && r.r > 0.0);
        let spread = if ok {
            let max = rows.iter().map(|r| r.r).fold(f64::MIN, f64::max);
            let min = rows.iter().map(|r| r.r).fold(f64::MAX, f64::min);
            max / min
        } else {
            f64::INFINITY
        };
        Self { law: law.to_string(), rows, spread }
    }

    pub fn stable_within(&self, factor: f64) -> bool {
        self.spread <= factor
    }
}

/// A measured law `measured(run) = Theta(predicted(run))`.
pub struct Law {
    pub name: &'static str,
    pub measured: fn(&RunMetrics) -> f64,
    pub predicted: fn(&RunMetrics) -> f64,
}

fn inputs(r: &RunMetrics) -> Inputs {
    let mut i = Inputs::two_tier(r.n, r.beta, r.a_p);
    i.a_s = r.a_s;
    i.p = r.p;
    if let Some(s) = r.s_rw {
        i = i.with_s(s);
    }
    i
}

fn unit(q: Quantity, r: &RunMetrics) -> f64 {
    evaluate(q, inputs(r)).map(|p| p.value).unwrap_or(f64::NAN)
}

/// Laws checked for each scenario. Predictions use unit constants and the
/// fitted cell areas of the run.
pub fn laws_for(s: ScenarioKind) -> Vec<Law> {
    match s {
        ScenarioKind::Static => vec![
            Law {
                name: "lambda_p_times_ln_n",
                measured: |r| r.primary.throughput_per_pair,
                predicted: |r| 1.0 / r.n.ln(),
            },
            Law {
                name: "lambda_p",
                measured: |r| r.primary.throughput_per_pair,
                predicted: |r| unit(Quantity::LambdaP, r),
            },
            Law {
                name: "D_p_times_sqrt_a_s",
                measured: |r| r.primary.delay_mean,
                predicted: |r| unit(Quantity::DSStatic, r),
            },
            Law {
                name: "D_p_static",
                measured: |r| r.primary.delay_mean,
                predicted: |r| unit(Quantity::DPStatic, r),
            },
            Law {
                name: "lambda_s_static",
                measured: |r| r.secondary.throughput_per_pair,
                predicted: |r| unit(Quantity::LambdaSStatic, r),
            },
            Law {
                name: "D_s_static",
                measured: |r| r.secondary.delay_mean,
                predicted: |r| unit(Quantity::DSStatic, r),
            },
        ],
        ScenarioKind::MobileIid => vec![Law {
            name: "D_p_iid",
            measured: |r| r.primary.delay_mean,
            predicted: |r| unit(Quantity::DPIid, r),
        }],
        ScenarioKind::MobileRw => vec![Law {
            name: "D_p_rw",
            measured: |r| r.primary.delay_mean,
            predicted: |r| unit(Quantity::DPRw, r),
        }],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport<R> {
    pub param: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Runs in (value, seed) order.
    pub runs: Vec<R>,
    pub laws: Vec<LawReport>,
}

impl<R> SweepReport<R> {
    pub fn law(&self, name: &str) -> Option<&LawReport> {
        self.laws.iter().find(|l| l.law == name)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    s / k.max(1) as f64
}

fn check_points(values: &[f64], seeds: &[u64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least 3 points, got {}", values.len())));
    }
    if seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed".into()));
    }
    Ok(())
}

/// Run `base` with `param` set to each of `values`, once per seed, and fit
/// every law of the scenario. Points and seeds run in parallel; results are
/// collected in a fixed order.
pub fn sweep(base: &RunConfig, param: &str, values: &[f64], seeds: &[u64]) -> Result<SweepReport<RunMetrics>> {
    check_points(values, seeds)?;
    let mut cfgs = Vec::new();
    for &v in values {
        for &s in seeds {
            let mut c = base.clone();
            c.set(param, &v.to_string())?;
            c.seed = s;
            c.output = None;
            c.trace = false;
            c.validate()?;
            cfgs.push(c);
        }
    }
    let runs: Vec<RunMetrics> = cfgs.par_iter().map(run).collect::<Result<_>>()?;
    let k = seeds.len();
    let laws = laws_for(base.scenario)
        .iter()
        .map(|law| {
            let measured: Vec<f64> = runs.chunks(k).map(|c| mean(c.iter().map(law.measured))).collect();
            let predicted: Vec<f64> = runs.chunks(k).map(|c| mean(c.iter().map(law.predicted))).collect();
            LawReport::new(law.name, values, &measured, &predicted)
        })
        .collect();
    Ok(SweepReport { param: param.to_string(), values: values.to_vec(), seeds: seeds.to_vec(), runs, laws })
}

/// Secondary tier alone: sweep `m` and fit the mobile secondary laws.
pub fn standalone_sweep(
    kind: MobilityKind,
    ms: &[f64],
    params: &StandaloneParams,
    seeds: &[u64],
) -> Result<SweepReport<StandaloneReport>> {
    check_points(ms, seeds)?;
    let jobs: Vec<(f64, u64)> = ms.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let p = StandaloneParams { kind, ..*params };
    let runs: Vec<StandaloneReport> =
        jobs.par_iter().map(|&(m, s)| run_standalone(m, &p, s)).collect::<Result<_>>()?;
    let k = seeds.len();
    let lam: Vec<f64> = runs.chunks(k).map(|c| mean(c.iter().map(|r| r.throughput_per_pair))).collect();
    let delay: Vec<f64> = runs.chunks(k).map(|c| mean(c.iter().map(|r| r.tier.delay_mean))).collect();
    let ones = vec![1.0; ms.len()];
    let pred_d: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let q = match kind {
                MobilityKind::Iid => Quantity::DSIid,
                MobilityKind::RandomWalk => Quantity::DSRw,
            };
            evaluate(q, Inputs::secondary_only(m).with_s(1.0 / m)).map(|p| p.value).unwrap_or(f64::NAN)
        })
        .collect();
    let d_name = match kind {
        MobilityKind::Iid => "D_s_iid",
        MobilityKind::RandomWalk => "D_s_rw",
    };
    let laws = vec![LawReport::new("lambda_s_mobile", ms, &lam, &ones), LawReport::new(d_name, ms, &delay, &pred_d)];
    Ok(SweepReport { param: "m".into(), values: ms.to_vec(), seeds: seeds.to_vec(), runs, laws })
}

// ---------------------------------------------------------------------------
// Tabulations.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueRow {
    pub model: MobilityKind,
    pub p: f64,
    pub q: f64,
    pub tau: f64,
    pub predicted: f64,
    pub simulated: f64,
    pub rel_error: f64,
}

/// Queue-delay formula against the discrete queue, for each `(p, q)`.
pub fn queue_table(pairs: &[(f64, f64)], tau: f64, periods: u64, seed: u64) -> Result<Vec<QueueRow>> {
    let streams = SeedStreams::new(seed);
    let mut rows = Vec::new();
    for (i, &(p, q)) in pairs.iter().enumerate() {
        for (model, t) in [(MobilityKind::Iid, 1.0), (MobilityKind::RandomWalk, tau)] {
            let predicted = queue_delay(model, p, q, t)?;
            let mut rng = streams.indexed("queue", 2 * i as u64 + (model == MobilityKind::RandomWalk) as u64);
            let sim = simulate_queue(p, q, FRAME_SLOTS as f64 * t, periods, &mut rng);
            rows.push(QueueRow {
                model,
                p,
                q,
                tau: t,
                predicted,
                simulated: sim.mean_delay,
                rel_error: (sim.mean_delay - predicted).abs() / predicted,
            });
        }
    }
    Ok(rows)
}

/// Unit-constant predictions of every two-tier law over `ns` at minimal
/// `a_p`, as CSV.
pub fn bounds_csv(ns: &[f64], beta: f64, s_rw: f64) -> Result<String> {
    let mut out = String::from("quantity,n,beta,m,a_p,a_s,S,value\n");
    for &n in ns {
        let a_p = crate::analytics::minimal_ap(n, beta);
        let i = Inputs::two_tier(n, beta, a_p).with_s(s_rw);
        for q in Quantity::ALL {
            let i = match q {
                Quantity::LambdaSMobile | Quantity::DSIid | Quantity::DSRw => {
                    Inputs::secondary_only(i.m).with_s(if s_rw.is_nan() { 1.0 / i.m } else { s_rw })
                }
                _ => i,
            };
            if let Ok(p) = evaluate(q, i) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    q.name(),
                    n,
                    beta,
                    i.m,
                    i.a_p,
                    i.a_s,
                    i.s_rw,
                    p.value
                );
            }
        }
    }
    Ok(out)
}

/// Separation profile of the walk for each RW-cell area, as CSV
/// `S,side,t,s,tau`.
pub fn mixing_csv(areas: &[f64]) -> Result<String> {
    let mut out = String::from("S,side,t,s,tau\n");
    for &s in areas {
        let side = crate::secondary_mobile::rw_side_for(s)?;
        let prof = separation_profile(side, 4 * side * side + 16)?;
        for (t, v) in prof.s.iter().enumerate().take(prof.tau + side * side / 4 + 4) {
            let _ = writeln!(out, "{s},{side},{},{v},{}", t + 1, prof.tau);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Writers.

fn f(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn o<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(runs: &[RunMetrics]) -> String {
    let mut s = String::from(
        "scenario,n,beta,m,seed,p,a_p,a_s,s_rw,queues,n_split,\
         primary_throughput,primary_sum_throughput,primary_delay_mean,primary_delay_p50,primary_delay_p90,primary_delay_p99,primary_delivered,\
         secondary_throughput,secondary_sum_throughput,secondary_delay_mean,secondary_delay_p50,secondary_delay_p90,secondary_delay_p99,secondary_delivered,\
         queue_high_water,queue_bound,measured_q,predicted_q,max_i_p,max_i_sp_low,max_i_sp_delivery,invariant_breaches\n",
    );
    for r in runs {
        let (p, q) = (&r.primary, &r.secondary);
        let i = r.interference.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario.name(),
            r.n,
            r.beta,
            r.m,
            r.seed,
            r.p,
            r.a_p,
            r.a_s,
            o(r.s_rw),
            o(r.queues),
            o(r.n_split),
            f(p.throughput_per_pair),
            f(p.sum_throughput),
            f(p.delay_mean),
            f(p.delay_p50),
            f(p.delay_p90),
            f(p.delay_p99),
            p.delivered,
            f(q.throughput_per_pair),
            f(q.sum_throughput),
            f(q.delay_mean),
            f(q.delay_p50),
            f(q.delay_p90),
            f(q.delay_p99),
            q.delivered,
            o(r.queue_high_water),
            o(r.queue_bound),
            o(r.measured_q),
            o(r.predicted_q),
            o(i.map(|x| x.max_i_p)),
            o(i.map(|x| x.max_i_sp_low)),
            o(i.map(|x| x.max_i_sp_delivery)),
            r.invariant_breaches
        );
    }
    s
}

pub fn law_csv(law: &LawReport) -> String {
    let mut s = String::from("x,measured,predicted,r\n");
    for r in &law.rows {
        let _ = writeln!(s, "{},{},{},{}", r.x, f(r.measured), f(r.predicted), f(r.r));
    }
    s
}

/// Two-column `x measured` data for plotting.
pub fn plot_data(law: &LawReport) -> String {
    let mut s = format!("# {} x measured\n", law.law);
    for r in &law.rows {
        let _ = writeln!(s, "{} {}", r.x, f(r.measured));
    }
    s
}

pub fn ratio_summary<R>(rep: &SweepReport<R>) -> String {
    let mut s = String::from("law,points,spread,stable_within_2\n");
    for l in &rep.laws {
        let _ = writeln!(s, "{},{},{},{}", l.law, l.rows.len(), f(l.spread), l.stable_within(2.0));
    }
    s
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Summary JSON, metrics CSV and (when enabled) traces of one run.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("run.json"), &out.metrics)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(std::slice::from_ref(&out.metrics)))?;
    if out.trace.enabled() {
        fs::write(dir.join("trace.csv"), out.trace.to_csv())?;
    }
    if !out.mobility_trace.is_empty() {
        let mut s = String::from("slot,node,cell\n");
        for (t, i, c) in &out.mobility_trace {
            let _ = writeln!(s, "{t},{i},{c}");
        }
        fs::write(dir.join("mobility.csv"), s)?;
    }
    Ok(())
}

/// Sweep table, per-law CSV and plot data, and the ratio summary.
pub fn write_sweep<R: Serialize>(dir: &Path, rep: &SweepReport<R>, runs_csv: Option<String>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("sweep.json"), rep)?;
    fs::write(dir.join("ratios.csv"), ratio_summary(rep))?;
    for l in &rep.laws {
        fs::write(dir.join(format!("law_{}.csv", l.law)), law_csv(l))?;
        fs::write(dir.join(format!("plot_{}.dat", l.law)), plot_data(l))?;
    }
    if let Some(c) = runs_csv {
        fs::write(dir.join("runs.csv"), c)?;
    }
    Ok(())
}
