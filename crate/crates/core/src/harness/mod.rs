//! Traffic data, scenario construction, experiment runs and parameter
//! sweeps.
//!
//! Every run writes plain CSV and JSON files. Numbers are printed with 17
//! significant digits so reruns with the same seeds compare byte for byte.

mod audit;
mod experiment;
mod scenario;
mod sweep;
mod traffic;

pub use audit::{audit_one_way, audit_two_way, privacy_audit, OneWayAudit, PrivacyAudit, TwoWayAudit};
pub use experiment::{
    execute_run, improvement_pct, run_dir, run_experiment, write_run, CellMetrics,
    ExperimentConfig, LeakageSettings, Mechanism, RunMetrics, RunSummary, ScenarioSource,
    TableRow, WinnerRow,
};
pub use scenario::{
    build_scenario, one_way_leakage_instance, two_way_leakage_instance, TrafficScenario,
};
pub use sweep::{run_sweep, sweep, sweep_csv, SweepParam, SweepRow, ONE_WAY_INSTANCE, TWO_WAY_INSTANCE};
pub use traffic::{
    daily_profile, generate_synthetic, load_traffic_csv, Road, SyntheticTraffic,
    TrafficVolumeTable,
};
