use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::auction::{AuctionParams, DeltaMode, ExactConfig};
use crate::error::{Error, Result};
use crate::privacy::{min_entropy_one_way, min_entropy_two_way, LeakageReport, OneWayLeakage};

use super::experiment::{execute_run, num, ExperimentConfig};
use super::scenario::{one_way_leakage_instance, two_way_leakage_instance};

pub const TWO_WAY_INSTANCE: &str = "two-way-2x2";
pub const ONE_WAY_INSTANCE: &str = "one-way-2x2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "T")]
    Horizon,
    #[serde(rename = "eta_c")]
    EtaC,
    #[serde(rename = "fraction")]
    Fraction,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Horizon => "T",
            SweepParam::EtaC => "eta_c",
            SweepParam::Fraction => "fraction",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepParam::Epsilon),
            "T" => Ok(SweepParam::Horizon),
            "eta_c" => Ok(SweepParam::EtaC),
            "fraction" => Ok(SweepParam::Fraction),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep parameter {other:?} (expected epsilon, T, eta_c or fraction)"
            ))),
        }
    }
}

/// One sweep point. Leakage sweeps fill the leakage columns; run sweeps
/// fill the objective, offload and regret columns, averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub leakage_bits: Option<f64>,
    pub stderr_bits: Option<f64>,
    pub objective: Option<f64>,
    pub total_offload: Option<f64>,
    pub regret: Option<f64>,
    pub instance_id: String,
}

impl SweepRow {
    fn leakage(value: f64, r: &LeakageReport, id: &str) -> Self {
        SweepRow {
            value,
            leakage_bits: Some(r.leakage_bits),
            stderr_bits: Some(r.stderr_bits),
            objective: None,
            total_offload: None,
            regret: None,
            instance_id: id.into(),
        }
    }
}

/// Evaluates `param` at every value.
///
/// `epsilon` measures leakage on a fixed two-passenger instance of the
/// configured mechanism family; `T` measures one-way leakage after each
/// horizon. `eta_c` and `fraction` rerun the configured experiment.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    cfg.validate()?;
    match param {
        SweepParam::Epsilon if cfg.mechanism.is_two_way() => {
            let (sc, space) = two_way_leakage_instance();
            let exact = ExactConfig {
                delta_mode: DeltaMode::OffloadBound,
                ..ExactConfig::default()
            };
            values
                .par_iter()
                .map(|&eps| {
                    let params = AuctionParams::new(eps, cfg.auction.delta)?;
                    let r = min_entropy_two_way(&sc, &space, params, exact)?;
                    Ok(SweepRow::leakage(eps, &r, TWO_WAY_INSTANCE))
                })
                .collect()
        }
        SweepParam::Epsilon => {
            let (sc, space) = one_way_leakage_instance(cfg.leakage.horizon);
            values
                .par_iter()
                .map(|&eps| {
                    let mut pricing = cfg.pricing.clone();
                    pricing.epsilon = eps;
                    pricing.dp = true;
                    let r = min_entropy_one_way(&sc, &space, &pricing, &[cfg.leakage.horizon], mc(cfg))?;
                    Ok(SweepRow::leakage(eps, &r[0], ONE_WAY_INSTANCE))
                })
                .collect()
        }
        SweepParam::Horizon => {
            let horizons = values
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                        Ok(v as usize)
                    } else {
                        Err(Error::InvalidParameter(format!("horizon {v} is not a whole number")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let t_max = horizons.iter().copied().max().unwrap_or(0);
            let (sc, space) = one_way_leakage_instance(t_max);
            let reports = min_entropy_one_way(&sc, &space, &cfg.pricing, &horizons, mc(cfg))?;
            Ok(values
                .iter()
                .zip(&reports)
                .map(|(&v, r)| SweepRow::leakage(v, r, ONE_WAY_INSTANCE))
                .collect())
        }
        SweepParam::EtaC | SweepParam::Fraction => {
            if param == SweepParam::EtaC && cfg.mechanism.is_two_way() {
                return Err(Error::InvalidParameter(
                    "eta_c sweeps apply to the one-way mechanism".into(),
                ));
            }
            values.par_iter().map(|&v| run_point(cfg, param, v)).collect()
        }
    }
}

fn mc(cfg: &ExperimentConfig) -> OneWayLeakage {
    OneWayLeakage {
        samples: cfg.leakage.samples,
        seed: cfg.leakage.seed,
        ..OneWayLeakage::default()
    }
}

fn run_point(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<SweepRow> {
    let mut point = cfg.clone();
    if param == SweepParam::EtaC {
        point.pricing.eta.c = value;
    } else {
        point.scenario = cfg.scenario.with_fraction(value)?;
    }
    point.validate()?;
    let ts = point.scenario.load()?;
    let runs = point
        .runs()
        .into_iter()
        .map(|(seed, rep)| execute_run(&point, &ts, seed, rep))
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: &dyn Fn(&super::experiment::RunSummary) -> Option<f64>| {
        let xs: Vec<f64> = runs.iter().filter_map(|m| f(&m.summary)).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    Ok(SweepRow {
        value,
        leakage_bits: None,
        stderr_bits: None,
        objective: mean(&|s| s.welfare.or(s.social_cost)),
        total_offload: mean(&|s| Some(s.total_offload)),
        regret: mean(&|s| s.regret),
        instance_id: format!("{}-{}", point.mechanism.name(), cfg.scenario.label()),
    })
}

/// CSV with one row per sweep point; absent metrics are left empty.
pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{},leakage_bits,stderr_bits,objective,total_offload,regret,instance_id\n",
        param.name()
    );
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.value),
            opt(r.leakage_bits),
            opt(r.stderr_bits),
            opt(r.objective),
            opt(r.total_offload),
            opt(r.regret),
            r.instance_id
        )
        .expect("writing to a string");
    }
    out
}

/// Runs [`sweep`] and writes `out_dir/sweep-<param>.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<PathBuf> {
    let rows = sweep(cfg, param, values)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("sweep-{}.csv", param.name()));
    fs::write(&path, sweep_csv(param, &rows))?;
    Ok(path)
}
