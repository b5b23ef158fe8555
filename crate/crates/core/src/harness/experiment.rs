use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{run_two_way, AuctionOutcome, AuctionParams, ExactMechanism};
use crate::error::{Error, Result};
use crate::model::{BidProfile, PopulationSpec, Scenario};
use crate::pricing::{aggregate_response, run_one_way, OneWayRun, PricingConfig};

use super::scenario::{build_scenario, TrafficScenario};
use super::traffic::{generate_synthetic, load_traffic_csv, SyntheticTraffic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    TwoWayExact,
    TwoWayEfficient,
    OneWay,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::TwoWayExact => "two-way-exact",
            Mechanism::TwoWayEfficient => "two-way-efficient",
            Mechanism::OneWay => "one-way",
        }
    }

    pub fn is_two_way(self) -> bool {
        self != Mechanism::OneWay
    }
}

/// Where the scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ScenarioSource {
    /// Scenario JSON file. Demand doubles as the baseline volume.
    Json { path: PathBuf },
    /// Volume CSV plus a sampled population.
    Traffic {
        path: PathBuf,
        #[serde(default)]
        population: PopulationSpec,
        fraction: f64,
        #[serde(default = "default_penalty")]
        penalty: f64,
    },
    /// Generated volumes plus a sampled population.
    Synthetic {
        #[serde(default)]
        traffic: SyntheticTraffic,
        #[serde(default)]
        population: PopulationSpec,
        fraction: f64,
        #[serde(default = "default_penalty")]
        penalty: f64,
    },
    Inline {
        scenario: Box<Scenario>,
        #[serde(default)]
        before: Option<Vec<Vec<f64>>>,
    },
}

fn default_penalty() -> f64 {
    1.0
}

impl ScenarioSource {
    pub fn load(&self) -> Result<TrafficScenario> {
        match self {
            ScenarioSource::Json { path } => {
                let sc = Scenario::from_json(&fs::read_to_string(path)?)?;
                Ok(plain(sc, None))
            }
            ScenarioSource::Traffic {
                path,
                population,
                fraction,
                penalty,
            } => build_scenario(&load_traffic_csv(path)?, population, *fraction, *penalty),
            ScenarioSource::Synthetic {
                traffic,
                population,
                fraction,
                penalty,
            } => build_scenario(&generate_synthetic(traffic)?, population, *fraction, *penalty),
            ScenarioSource::Inline { scenario, before } => {
                Ok(plain((**scenario).clone(), before.clone()))
            }
        }
    }

    /// Same source with the demand fraction replaced.
    pub fn with_fraction(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ScenarioSource::Traffic { fraction, .. } | ScenarioSource::Synthetic { fraction, .. } => {
                *fraction = value;
                Ok(out)
            }
            _ => Err(Error::InvalidParameter(
                "the offload fraction only applies to traffic-based scenarios".into(),
            )),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ScenarioSource::Json { path } | ScenarioSource::Traffic { path, .. } => path
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned()),
            ScenarioSource::Synthetic { traffic, .. } => format!("synthetic-{}", traffic.seed),
            ScenarioSource::Inline { .. } => "inline".into(),
        }
    }
}

fn plain(scenario: Scenario, before: Option<Vec<Vec<f64>>>) -> TrafficScenario {
    let before = before.unwrap_or_else(|| scenario.demand_matrix().to_vec());
    let labels = (0..scenario.num_od()).map(|s| format!("od{s}")).collect();
    TrafficScenario {
        scenario,
        before,
        labels,
    }
}

/// Settings for leakage sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeakageSettings {
    /// Horizon of the one-way leakage instance when sweeping ε.
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LeakageSettings {
    fn default() -> Self {
        LeakageSettings {
            horizon: 12,
            samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanism: Mechanism,
    pub scenario: ScenarioSource,
    #[serde(default = "default_auction")]
    pub auction: AuctionParams,
    /// Seeds listed here are ignored; `seeds` below drives every run.
    #[serde(default)]
    pub pricing: PricingConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub reps: usize,
    pub out_dir: PathBuf,
    /// Time index summarised in `table.csv`.
    #[serde(default = "noon")]
    pub table_hour: usize,
    #[serde(default)]
    pub leakage: LeakageSettings,
}

fn default_auction() -> AuctionParams {
    AuctionParams {
        epsilon: 1.0,
        delta: 0.1,
    }
}

fn one() -> usize {
    1
}

fn noon() -> usize {
    12
}

impl ExperimentConfig {
    pub fn new(mechanism: Mechanism, scenario: ScenarioSource, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            mechanism,
            scenario,
            auction: default_auction(),
            pricing: PricingConfig::default(),
            seeds: vec![0],
            reps: 1,
            out_dir: out_dir.into(),
            table_hour: noon(),
            leakage: LeakageSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("replication count must be positive".into()));
        }
        if self.mechanism.is_two_way() {
            AuctionParams::new(self.auction.epsilon, self.auction.delta)?;
        } else {
            self.pricing.validate()?;
        }
        Ok(())
    }

    /// Seeds of every run, in output order.
    pub fn runs(&self) -> Vec<(u64, usize)> {
        self.seeds
            .iter()
            .flat_map(|&seed| (0..self.reps).map(move |rep| (seed, rep)))
            .collect()
    }
}

/// Metrics of one (s, t) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellMetrics {
    pub t: usize,
    pub s: usize,
    pub od: String,
    pub demand: f64,
    pub before: f64,
    pub offload: f64,
    /// `before − min(offload, before)`
    pub after: f64,
    pub deficit: f64,
    /// Two-way: social welfare of the winners. One-way: social cost.
    pub objective: f64,
    pub payment_total: f64,
    pub participants: usize,
    /// Published price (one-way only).
    pub price: Option<f64>,
    pub cumulative_regret: Option<f64>,
    pub min_utility: Option<f64>,
}

/// One winner of a two-way run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinnerRow {
    pub t: usize,
    pub s: usize,
    pub i: usize,
    pub q: f64,
    pub claimed_cost: f64,
    pub payment: f64,
}

/// Improvement and average payment per OD pair at the table hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub od: String,
    pub hour: usize,
    pub before: f64,
    pub offload: f64,
    pub improvement_pct: f64,
    pub avg_payment: f64,
    pub participants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mechanism: Mechanism,
    pub seed: u64,
    pub rep: usize,
    pub total_demand: f64,
    pub total_offload: f64,
    pub total_deficit: f64,
    pub deficit_cells: usize,
    pub total_payment: f64,
    pub welfare: Option<f64>,
    pub min_welfare_by_od: Option<f64>,
    pub ir_violations: Option<usize>,
    pub social_cost: Option<f64>,
    pub regret: Option<f64>,
    pub regret_bound: Option<f64>,
    pub privacy_budget: Option<f64>,
    pub min_utility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub summary: RunSummary,
    pub cells: Vec<CellMetrics>,
    pub table: Vec<TableRow>,
    pub winners: Vec<WinnerRow>,
    /// Cumulative regret per step (one-way only).
    pub regret_curve: Vec<f64>,
}

/// Runs one replication in memory.
pub fn execute_run(
    cfg: &ExperimentConfig,
    ts: &TrafficScenario,
    seed: u64,
    rep: usize,
) -> Result<RunMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let sc = &ts.scenario;
    if cfg.table_hour >= sc.horizon() {
        return Err(Error::InvalidParameter(format!(
            "table hour {} outside the horizon of {} steps",
            cfg.table_hour,
            sc.horizon()
        )));
    }
    match cfg.mechanism {
        Mechanism::OneWay => {
            let run = run_one_way(sc, &cfg.pricing, rng.random())?;
            Ok(one_way_metrics(cfg, ts, seed, rep, &run))
        }
        m => {
            let params = AuctionParams::new(cfg.auction.epsilon, cfg.auction.delta)?;
            let bids = BidProfile::truthful(sc)?;
            let outcome = if m == Mechanism::TwoWayExact {
                ExactMechanism::new(&bids, sc, params).run(&mut rng)?
            } else {
                run_two_way(&bids, sc, params, &mut rng)?
            };
            Ok(two_way_metrics(cfg, ts, seed, rep, &bids, &outcome))
        }
    }
}

fn cell(ts: &TrafficScenario, s: usize, t: usize, offload: f64) -> CellMetrics {
    let before = ts.before[s][t];
    let demand = ts.scenario.demand(s, t);
    CellMetrics {
        t,
        s,
        od: ts.labels[s].clone(),
        demand,
        before,
        offload,
        after: before - offload.min(before),
        deficit: (demand - offload).max(0.0),
        objective: 0.0,
        payment_total: 0.0,
        participants: 0,
        price: None,
        cumulative_regret: None,
        min_utility: None,
    }
}

fn table_rows(cells: &[CellMetrics], hour: usize) -> Vec<TableRow> {
    cells
        .iter()
        .filter(|c| c.t == hour)
        .map(|c| TableRow {
            od: c.od.clone(),
            hour,
            before: c.before,
            offload: c.offload,
            improvement_pct: improvement_pct(c.offload, c.before),
            avg_payment: if c.participants == 0 {
                0.0
            } else {
                c.payment_total / c.participants as f64
            },
            participants: c.participants,
        })
        .collect()
}

/// Realized offload as a percentage of the baseline volume.
pub fn improvement_pct(offload: f64, before: f64) -> f64 {
    if before > 0.0 {
        100.0 * offload.min(before) / before
    } else {
        0.0
    }
}

fn base_summary(cfg: &ExperimentConfig, seed: u64, rep: usize, cells: &[CellMetrics]) -> RunSummary {
    RunSummary {
        mechanism: cfg.mechanism,
        seed,
        rep,
        total_demand: cells.iter().map(|c| c.demand).sum(),
        total_offload: cells.iter().map(|c| c.offload).sum(),
        total_deficit: cells.iter().map(|c| c.deficit).sum(),
        deficit_cells: cells.iter().filter(|c| c.deficit > 0.0).count(),
        total_payment: cells.iter().map(|c| c.payment_total).sum(),
        welfare: None,
        min_welfare_by_od: None,
        ir_violations: None,
        social_cost: None,
        regret: None,
        regret_bound: None,
        privacy_budget: None,
        min_utility: None,
    }
}

fn two_way_metrics(
    cfg: &ExperimentConfig,
    ts: &TrafficScenario,
    seed: u64,
    rep: usize,
    bids: &BidProfile,
    out: &AuctionOutcome,
) -> RunMetrics {
    let sc = &ts.scenario;
    let mut cells = Vec::with_capacity(sc.num_od() * sc.horizon());
    for t in 0..sc.horizon() {
        for s in 0..sc.num_od() {
            let mut c = cell(ts, s, t, out.offload(bids, s, t));
            c.objective = out.welfare_by_od[s][t];
            c.participants = out.winners[t][s].len();
            c.payment_total = out.winners[t][s]
                .iter()
                .filter_map(|&i| out.payments.get(&(i, s, t)))
                .sum();
            cells.push(c);
        }
    }
    let winners = out
        .payments
        .iter()
        .map(|(&(i, s, t), &payment)| {
            let bid = bids.get(i, s, t).expect("winners carry bids");
            WinnerRow {
                t,
                s,
                i,
                q: bid.q,
                claimed_cost: bid.claimed_cost,
                payment,
            }
        })
        .collect();
    let mut summary = base_summary(cfg, seed, rep, &cells);
    summary.welfare = Some(out.welfare);
    summary.min_welfare_by_od = cells.iter().map(|c| c.objective).reduce(f64::min);
    summary.ir_violations = Some(out.ir_violations);
    RunMetrics {
        summary,
        table: table_rows(&cells, cfg.table_hour),
        cells,
        winners,
        regret_curve: Vec::new(),
    }
}

fn one_way_metrics(
    cfg: &ExperimentConfig,
    ts: &TrafficScenario,
    seed: u64,
    rep: usize,
    run: &OneWayRun,
) -> RunMetrics {
    let sc = &ts.scenario;
    let cells: Vec<CellMetrics> = run
        .rows
        .iter()
        .map(|row| {
            let mut c = cell(ts, row.s, row.t, row.total_offload);
            let step = aggregate_response(sc, row.s, row.t, row.price_published);
            let paid: Vec<f64> = step
                .records
                .iter()
                .filter(|r| r.participating)
                .map(|r| row.price_published * r.q)
                .collect();
            c.objective = row.cost;
            c.deficit = row.deficit;
            c.participants = paid.len();
            c.payment_total = paid.iter().sum();
            c.price = Some(row.price_published);
            c.cumulative_regret = Some(row.cumulative_regret);
            c.min_utility = Some(row.min_utility);
            c
        })
        .collect();
    let mut summary = base_summary(cfg, seed, rep, &cells);
    summary.social_cost = Some(run.report.realized_cost);
    summary.regret = Some(run.report.regret);
    summary.regret_bound = Some(run.report.bound);
    summary.privacy_budget = run.privacy_budget;
    summary.min_utility = Some(run.min_utility());
    RunMetrics {
        summary,
        table: table_rows(&cells, cfg.table_hour),
        cells,
        winners: Vec::new(),
        regret_curve: run.report.cumulative_regret.clone(),
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `trajectory.csv`, `table.csv`, `summary.json` and, for two-way
/// runs, `outcomes.csv` into `dir`.
pub fn write_run(dir: &Path, m: &RunMetrics) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut traj = String::from(
        "t,s,od,demand,before,offload,after,deficit,objective,payment_total,participants,price,cumulative_regret,min_utility\n",
    );
    for c in &m.cells {
        writeln!(
            traj,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.t,
            c.s,
            c.od,
            num(c.demand),
            num(c.before),
            num(c.offload),
            num(c.after),
            num(c.deficit),
            num(c.objective),
            num(c.payment_total),
            c.participants,
            opt(c.price),
            opt(c.cumulative_regret),
            opt(c.min_utility),
        )
        .expect("writing to a string");
    }
    fs::write(dir.join("trajectory.csv"), traj)?;

    let mut table = String::from("od,hour,before,offload,improvement_pct,avg_payment,participants\n");
    for r in &m.table {
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            r.od,
            r.hour,
            num(r.before),
            num(r.offload),
            num(r.improvement_pct),
            num(r.avg_payment),
            r.participants
        )
        .expect("writing to a string");
    }
    fs::write(dir.join("table.csv"), table)?;

    if m.summary.mechanism.is_two_way() {
        let mut rows = String::from("t,s,i,q,claimed_cost,payment\n");
        for w in &m.winners {
            writeln!(
                rows,
                "{},{},{},{},{},{}",
                w.t,
                w.s,
                w.i,
                num(w.q),
                num(w.claimed_cost),
                num(w.payment)
            )
            .expect("writing to a string");
        }
        fs::write(dir.join("outcomes.csv"), rows)?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&m.summary)?)?;
    Ok(())
}

pub fn run_dir(out: &Path, seed: u64, rep: usize) -> PathBuf {
    out.join(format!("run-{seed}-{rep}"))
}

#[derive(Serialize)]
struct Aggregate<'a> {
    mechanism: Mechanism,
    scenario: String,
    complete: bool,
    runs: Vec<&'a RunSummary>,
    failures: Vec<String>,
}

/// Runs every (seed, replication) pair concurrently, writes each run to
/// its own directory and then merges the summaries into
/// `out_dir/summary.json`.
///
/// A failing run leaves an `error.txt` in its directory and marks the
/// merged summary incomplete; the first failure is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let ts = cfg.scenario.load()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let results: Vec<Result<RunMetrics>> = cfg
        .runs()
        .into_par_iter()
        .map(|(seed, rep)| {
            let dir = run_dir(&cfg.out_dir, seed, rep);
            let r = execute_run(cfg, &ts, seed, rep).and_then(|m| write_run(&dir, &m).map(|_| m));
            if let Err(e) = &r {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("error.txt"), format!("{e}\n"))?;
            }
            r
        })
        .collect();

    let failures: Vec<String> = results
        .iter()
        .zip(cfg.runs())
        .filter_map(|(r, (seed, rep))| r.as_ref().err().map(|e| format!("run-{seed}-{rep}: {e}")))
        .collect();
    let agg = Aggregate {
        mechanism: cfg.mechanism,
        scenario: cfg.scenario.label(),
        complete: failures.is_empty(),
        runs: results.iter().filter_map(|r| r.as_ref().ok()).map(|m| &m.summary).collect(),
        failures,
    };
    fs::write(cfg.out_dir.join("summary.json"), serde_json::to_string_pretty(&agg)?)?;
    results.into_iter().collect()
}
