//! Configuration report: invariant checks plus a short smoke run.

use std::fmt;

use risemf_core::simulator::{RunOptions, Simulation};
use risemf_core::ScenarioConfig;

const SMOKE_SLOTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn push(&mut self, name: &'static str, status: Status, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            status,
            detail: detail.into(),
        });
    }

    fn result(&mut self, name: &'static str, r: risemf_core::Result<()>, ok: impl Into<String>) {
        match r {
            Ok(()) => self.push(name, Status::Pass, ok),
            Err(e) => self.push(name, Status::Fail, e.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Warn => "WARN",
                Status::Fail => "FAIL",
            };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "validation passed" } else { "validation FAILED" })
    }
}

pub fn validate(config: &ScenarioConfig) -> Report {
    let mut report = Report::default();
    report.result("parameters", config.validate(), "all parameters in range");
    if !report.passed() {
        return report;
    }
    match Simulation::new(config) {
        Ok(sim) => validate_simulation(&sim, report),
        Err(e) => {
            report.push("build", Status::Fail, e.to_string());
            report
        }
    }
}

/// Checks an assembled simulation; `report` carries earlier results.
pub fn validate_simulation(sim: &Simulation, mut report: Report) -> Report {
    let b = &sim.books;
    report.result("codebook unit power", b.validate(), "every beam and RIS profile has unit power");
    let sizes = (b.precoders.len(), b.combiners.len(), b.ris_profiles.len());
    if sizes.0 * sizes.1 * sizes.2 == 0 {
        report.push("codebook cardinality", Status::Fail, format!("{sizes:?}: empty codebook"));
    } else {
        report.push(
            "codebook cardinality",
            Status::Pass,
            format!("{} x {} x {} = {} triples", sizes.0, sizes.1, sizes.2, b.search_space()),
        );
    }
    report.result("radio", sim.radio.validate(), "bandwidth, noise and power valid");
    report.result("service", sim.service.validate(), "queue and CPU parameters valid");
    report.result("pixels", sim.pixels.validate(), format!("{} pixel(s)", sim.pixels.positions.len()));
    if sim.radio.max_tx_power == 0.0 {
        report.push("max power", Status::Warn, "max_tx_power is 0: only P = 0 is feasible");
    }
    if !sim.pixels.has_positive_weight() {
        report.push("pixel weights", Status::Warn, "all weights are 0: exposure is ignored");
    }
    let c = &sim.config;
    match sim.run_with(c.run.policy, c.lyapunov.v, sim.stream(0, c.run.seed), SMOKE_SLOTS, 0, RunOptions::default()) {
        Ok(m) if m.drift_violations == 0 => report.push(
            "smoke run",
            Status::Pass,
            format!("{SMOKE_SLOTS} slots, drift bound held (min slack {:.3e})", m.min_drift_slack),
        ),
        Ok(m) => report.push(
            "smoke run",
            Status::Fail,
            format!("drift bound violated in {} of {SMOKE_SLOTS} slots", m.drift_violations),
        ),
        Err(e) => report.push("smoke run", Status::Fail, e.to_string()),
    }
    report
}
