use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use offload_core::harness::{
    generate_synthetic, privacy_audit, run_experiment, run_sweep, ExperimentConfig, Mechanism,
    ScenarioSource, SweepParam, SyntheticTraffic,
};
use offload_core::model::{CostFamily, PopulationSpec};
use offload_core::pricing::{EtaSchedule, UpdateMode};
use offload_core::privacy::OneWayLeakage;
use offload_core::{AuctionParams, Error, PricingConfig};

#[derive(Parser)]
#[command(name = "offload", version, about = "Private incentive mechanisms for traffic offloading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-way auction over a scenario.
    TwoWay {
        #[command(flatten)]
        run: RunArgs,
        /// Enumerate every feasible profile instead of drawing winners one at a time.
        #[arg(long)]
        exact: bool,
    },
    /// Run the posted-price mechanism over a scenario.
    OneWay {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        pricing: PricingArgs,
    },
    /// Leakage and ratio checks on the built-in two-passenger instances.
    Privacy {
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Horizons at which the posted-price leakage is measured.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 6, 12, 24])]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        pricing: PricingArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate one parameter over a list of values.
    Sweep {
        #[arg(long, value_parser = parse_param)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Setting::TwoWay)]
        mechanism: Setting,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        pricing: PricingArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Write a synthetic traffic volume CSV.
    GenData {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 24)]
        indices: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Setting {
    TwoWay,
    OneWay,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Linear,
    Quadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON; overrides every other run flag.
    #[arg(long, conflicts_with_all = ["scenario", "traffic"])]
    config: Option<PathBuf>,
    /// Scenario JSON.
    #[arg(long, conflicts_with = "traffic")]
    scenario: Option<PathBuf>,
    /// Traffic volume CSV (county,direction,index,volume).
    #[arg(long)]
    traffic: Option<PathBuf>,
    /// Share of the traffic volume to offload when building from volumes.
    #[arg(long, default_value_t = 0.02)]
    fraction: f64,
    /// Deficit penalty per unit when building from volumes.
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
    /// Passengers to sample when building from volumes.
    #[arg(long, default_value_t = 500)]
    passengers: usize,
    /// Cost family of the sampled passengers.
    #[arg(long, value_enum, default_value_t = Family::Linear)]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Time index summarised in table.csv.
    #[arg(long, default_value_t = 12)]
    hour: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PricingArgs {
    #[arg(long, value_parser = parse_mode, default_value = "subgradient")]
    mode: UpdateMode,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    dp: Switch,
    /// Learning-rate scale c.
    #[arg(long, default_value_t = 1.0)]
    eta_c: f64,
    /// Use a constant learning rate instead of c/sqrt(t).
    #[arg(long)]
    eta_constant: bool,
    #[arg(long, default_value_t = 0.02)]
    p_init: f64,
    #[arg(long, default_value_t = 50.0)]
    p_cap: f64,
}

fn parse_mode(s: &str) -> Result<UpdateMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl PricingArgs {
    fn config(&self, epsilon: f64) -> PricingConfig {
        let mut cfg = PricingConfig {
            mode: self.mode,
            dp: matches!(self.dp, Switch::On),
            epsilon,
            p_init: self.p_init,
            p_cap: self.p_cap,
            ..PricingConfig::default()
        };
        cfg.eta.c = self.eta_c;
        if self.eta_constant {
            cfg.eta.schedule = EtaSchedule::Constant;
        }
        cfg
    }
}

impl RunArgs {
    fn experiment(&self, mechanism: Mechanism, pricing: Option<&PricingArgs>) -> anyhow::Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(ExperimentConfig::from_json(&text)?);
        }
        let population = PopulationSpec {
            n: self.passengers,
            seed: self.seed,
            family: match self.family {
                Family::Linear => CostFamily::Linear,
                Family::Quadratic => CostFamily::Quadratic,
            },
            ..PopulationSpec::default()
        };
        let source = match (&self.scenario, &self.traffic) {
            (Some(path), _) => ScenarioSource::Json { path: path.clone() },
            (None, Some(path)) => ScenarioSource::Traffic {
                path: path.clone(),
                population,
                fraction: self.fraction,
                penalty: self.penalty,
            },
            (None, None) => ScenarioSource::Synthetic {
                traffic: SyntheticTraffic::default(),
                population,
                fraction: self.fraction,
                penalty: self.penalty,
            },
        };
        let mut cfg = ExperimentConfig::new(mechanism, source, &self.out);
        cfg.auction = AuctionParams {
            epsilon: self.epsilon,
            delta: self.delta,
        };
        if let Some(p) = pricing {
            cfg.pricing = p.config(self.epsilon);
        }
        cfg.seeds = vec![self.seed];
        cfg.reps = self.reps;
        cfg.table_hour = self.hour;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report_runs(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let runs = run_experiment(cfg)?;
    for m in &runs {
        let s = &m.summary;
        println!(
            "seed {} rep {}: offload {:.3} of {:.3}, deficit cells {}, payments {:.3}",
            s.seed, s.rep, s.total_offload, s.total_demand, s.deficit_cells, s.total_payment
        );
    }
    println!("wrote {}", cfg.out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::TwoWay { run, exact } => {
            let m = if exact { Mechanism::TwoWayExact } else { Mechanism::TwoWayEfficient };
            report_runs(&run.experiment(m, None)?)
        }
        Command::OneWay { run, pricing } => report_runs(&run.experiment(Mechanism::OneWay, Some(&pricing))?),
        Command::Privacy {
            epsilon,
            delta,
            horizons,
            samples,
            seed,
            pricing,
            out,
        } => {
            let params = AuctionParams::new(epsilon, delta)?;
            let mut cfg = pricing.config(epsilon);
            cfg.dp = true;
            let mc = OneWayLeakage {
                samples,
                seed,
                ..OneWayLeakage::default()
            };
            let audit = privacy_audit(params, &cfg, &horizons, mc)?;
            println!(
                "two-way: leakage {:.6} bits, max log-ratio {:.6} (epsilon {epsilon})",
                audit.two_way.leakage.leakage_bits, audit.two_way.max_log_ratio
            );
            for (t, r) in audit.one_way.horizons.iter().zip(&audit.one_way.leakage) {
                println!("one-way T={t}: leakage {:.6} ± {:.6} bits", r.leakage_bits, r.stderr_bits);
            }
            fs::create_dir_all(&out)?;
            let path = out.join("privacy.json");
            fs::write(&path, serde_json::to_string_pretty(&audit)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep {
            param,
            values,
            mechanism,
            run,
            pricing,
            samples,
        } => {
            let m = match mechanism {
                Setting::TwoWay => Mechanism::TwoWayEfficient,
                Setting::OneWay => Mechanism::OneWay,
            };
            let mut cfg = run.experiment(m, Some(&pricing))?;
            cfg.leakage.samples = samples;
            let path = run_sweep(&cfg, param, &values)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::GenData { seed, indices, out } => {
            let spec = SyntheticTraffic {
                seed,
                indices,
                ..SyntheticTraffic::default()
            };
            let table = generate_synthetic(&spec)?;
            fs::create_dir_all(&out)?;
            let path = out.join("traffic.csv");
            table.save(&path)?;
            println!("wrote {} rows to {}", table.len(), path.display());
            Ok(())
        }
    }
}

/// Infeasible instances exit with 3; every other failure is treated as a
/// configuration problem.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
