use std::io::Write;
use std::path::{Path, PathBuf};

use risemf_core::simulator::{self, RunOptions, Simulation, VPoint};
use risemf_core::{PolicyKind, ScenarioConfig};

use crate::args::{CommandKind, ExperimentSpec};
use crate::error::{CliError, Result};
use crate::plot::{render_svg, Chart, Series};
use crate::settings::{config_hash, load_config, to_toml};
use crate::table::{dbm_per_m2, write_csv, ArrivalRow, RangeRow, RunRow, Sci, SweepVRow};
use crate::validate::validate;

/// Runs one experiment; progress goes to `log`. Returns the files written.
pub fn execute(spec: &ExperimentSpec, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let config = load_config(spec.profile, spec.config_path.as_deref(), &spec.overrides, spec.policy)?;
    if spec.command == CommandKind::Validate {
        let report = validate(&config);
        let _ = writeln!(log, "{report}");
        return if report.passed() { Ok(vec![]) } else { Err(CliError::ValidationFailed) };
    }
    config.validate()?;
    let seeds = match &spec.seeds {
        Some(s) => s.clone(),
        None if spec.command == CommandKind::Run => vec![config.run.seed],
        None => (1..=config.sweep.seeds_per_point as u64).collect(),
    };
    if seeds.is_empty() {
        return Err(CliError::usage("seed list is empty"));
    }
    let policies = match (spec.command, spec.policy) {
        (CommandKind::Run, _) => vec![config.run.policy],
        (_, Some(p)) => vec![p],
        (_, None) => PolicyKind::ALL.to_vec(),
    };
    let ctx = Context {
        spec,
        config: &config,
        seeds: &seeds,
        policies: &policies,
    };
    std::fs::create_dir_all(&spec.output_dir)
        .map_err(|e| CliError::io(format!("creating `{}`", spec.output_dir.display()), e))?;
    let mut files = match spec.command {
        CommandKind::Run => run(&ctx, log)?,
        CommandKind::SweepV => sweep_v(&ctx, log)?,
        CommandKind::SweepRange => sweep_range(&ctx, log)?,
        CommandKind::SweepArrival => sweep_arrival(&ctx, log)?,
        CommandKind::Validate => unreachable!(),
    };
    let cfg_path = spec.output_dir.join("config.toml");
    let text = format!("# effective configuration, sha256 {}\n{}", config_hash(&config), to_toml(&config));
    write_file(&cfg_path, text.as_bytes())?;
    files.push(cfg_path);
    Ok(files)
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    config: &'a ScenarioConfig,
    seeds: &'a [u64],
    policies: &'a [PolicyKind],
}

impl Context<'_> {
    fn header(&self) -> Vec<String> {
        let join = |v: Vec<String>, sep: &str| if v.is_empty() { "none".to_string() } else { v.join(sep) };
        vec![
            format!("risemf {} {}", self.spec.command.as_str(), env!("CARGO_PKG_VERSION")),
            format!("config_sha256={}", config_hash(self.config)),
            format!("master_seed={}", self.config.run.seed),
            format!("seeds={}", join(self.seeds.iter().map(u64::to_string).collect(), ",")),
            format!("policies={}", join(self.policies.iter().map(|p| p.as_str().to_string()).collect(), ",")),
            format!("overrides={}", join(self.spec.overrides.clone(), " ")),
        ]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.spec.output_dir.join(name)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing `{}`", path.display()), e))
}

fn write_svg(path: PathBuf, chart: &Chart) -> Result<PathBuf> {
    write_file(&path, render_svg(chart).as_bytes())?;
    Ok(path)
}

fn run(ctx: &Context, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sim = Simulation::new(ctx.config)?;
    let c = &ctx.config;
    let mut rows = Vec::new();
    for &seed in ctx.seeds {
        let m = sim.run_with(c.run.policy, c.lyapunov.v, sim.stream(0, seed), c.run.horizon, c.run.warmup, RunOptions::default())?;
        let _ = writeln!(
            log,
            "seed {seed}: emfe {:.4e} W/m2 ({:.2} dBm/m2), delay {:.4e} s, rate {:.4e} b/s, power {:.4e} W{}",
            m.avg_emfe,
            dbm_per_m2(m.avg_emfe),
            m.avg_delay,
            m.avg_rate,
            m.avg_power,
            if m.stable { "" } else { ", UNSTABLE" }
        );
        rows.push(RunRow {
            seed,
            policy: c.run.policy,
            v: Sci::new(c.lyapunov.v),
            avg_emfe_w_m2: Sci::new(m.avg_emfe),
            avg_emfe_dbm_m2: Sci::new(dbm_per_m2(m.avg_emfe)),
            avg_delay_s: Sci::new(m.avg_delay),
            avg_rate_bps: Sci::new(m.avg_rate),
            avg_power_w: Sci::new(m.avg_power),
            avg_local_bits: Sci::new(m.avg_local_bits),
            avg_remote_bits: Sci::new(m.avg_remote_bits),
            stable: m.stable,
            drift_violations: m.drift_violations,
        });
    }
    let path = ctx.path("run.csv");
    write_csv(&path, &ctx.header(), &rows)?;
    Ok(vec![path])
}

fn sweep_v(ctx: &Context, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sim = Simulation::new(ctx.config)?;
    let mut files = Vec::new();
    let mut series = Vec::new();
    for &policy in ctx.policies {
        let points: Vec<VPoint> = simulator::sweep_v_policy(&sim, policy, &ctx.config.sweep.v_values, ctx.seeds)?;
        let rows: Vec<SweepVRow> = points
            .iter()
            .flat_map(|p| {
                p.runs.iter().map(move |r| SweepVRow {
                    v: Sci::new(p.v),
                    seed: r.seed,
                    avg_emfe_w_m2: Sci::new(r.metrics.avg_emfe),
                    avg_delay_s: Sci::new(r.metrics.avg_delay),
                    avg_rate_bps: Sci::new(r.metrics.avg_rate),
                    avg_power_w: Sci::new(r.metrics.avg_power),
                    stable: r.metrics.stable,
                })
            })
            .collect();
        for p in &points {
            let _ = writeln!(
                log,
                "{:<18} V={:.3e}: emfe {:.4e} ± {:.1e}, delay {:.4e} ± {:.1e}",
                policy.as_str(),
                p.v,
                p.emfe.mean,
                p.emfe.stderr,
                p.delay.mean,
                p.delay.stderr
            );
        }
        let path = ctx.path(&format!("sweep_v_{}.csv", policy.as_str()));
        write_csv(&path, &ctx.header(), &rows)?;
        files.push(path);
        series.push(Series {
            label: policy.as_str().into(),
            points: points.iter().map(|p| (p.delay.mean, dbm_per_m2(p.emfe.mean))).collect(),
        });
    }
    files.push(write_svg(
        ctx.path("tradeoff.svg"),
        &Chart {
            title: "Average EMFE versus average delay (V sweep)".into(),
            x_label: "average E2E delay [s]".into(),
            y_label: "average EMFE [dBm/m²]".into(),
            log_x: true,
            series,
        },
    )?);
    Ok(files)
}

fn sweep_range(ctx: &Context, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sw = &ctx.config.sweep;
    let points = simulator::sweep_range(ctx.config, &sw.range_distances_m, sw.delay_bound_s, ctx.policies, ctx.seeds)?;
    let mut rows = Vec::new();
    for p in &points {
        let t = &p.tuned;
        if !t.feasible {
            let _ = writeln!(log, "warning: {} at {} m cannot meet the delay bound", t.policy.as_str(), p.distance);
        }
        let _ = writeln!(
            log,
            "{:<18} d={:>6.1} m: V*={:.3e}, emfe {:.4e} ({:.2} dBm/m2), delay {:.4e}",
            t.policy.as_str(),
            p.distance,
            t.v_star,
            t.emfe.mean,
            dbm_per_m2(t.emfe.mean),
            t.delay.mean
        );
        rows.push(RangeRow {
            distance_m: Sci::new(p.distance),
            policy: t.policy,
            v_star: Sci::new(t.v_star),
            avg_emfe_w_m2: Sci::new(t.emfe.mean),
            avg_emfe_dbm_m2: Sci::new(dbm_per_m2(t.emfe.mean)),
        });
    }
    let path = ctx.path("sweep_range.csv");
    write_csv(&path, &ctx.header(), &rows)?;
    let series = ctx
        .policies
        .iter()
        .map(|&k| Series {
            label: k.as_str().into(),
            points: rows
                .iter()
                .filter(|r| r.policy == k)
                .map(|r| (r.distance_m.get(), r.avg_emfe_dbm_m2.get()))
                .collect(),
        })
        .collect();
    let svg = write_svg(
        ctx.path("range.svg"),
        &Chart {
            title: format!("Average EMFE versus range (delay bound {} s)", sw.delay_bound_s),
            x_label: "UE-AP distance [m]".into(),
            y_label: "average EMFE [dBm/m²]".into(),
            log_x: false,
            series,
        },
    )?;
    Ok(vec![path, svg])
}

fn sweep_arrival(ctx: &Context, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sw = &ctx.config.sweep;
    let mut policies = ctx.policies.to_vec();
    for k in [PolicyKind::BoaWithRis, PolicyKind::BoaNoRis] {
        if !policies.contains(&k) {
            policies.push(k);
        }
    }
    let points = simulator::sweep_arrival(ctx.config, &sw.arrival_rates_bps, sw.delay_bound_s, &policies, ctx.seeds)?;
    let mut rows = Vec::new();
    for p in &points {
        let t = &p.tuned;
        if !t.feasible {
            let _ = writeln!(
                log,
                "warning: {} at {:.3e} b/s cannot meet the delay bound",
                t.policy.as_str(),
                p.arrival_rate
            );
        }
        let _ = writeln!(
            log,
            "{:<18} A={:.3e} b/s: emfe {:.2} dBm/m2{}",
            t.policy.as_str(),
            p.arrival_rate,
            dbm_per_m2(t.emfe.mean),
            p.gain_db_vs_no_ris.map(|g| format!(", gain {g:.2} dB")).unwrap_or_default()
        );
        rows.push(ArrivalRow {
            arrival_bps: Sci::new(p.arrival_rate),
            policy: t.policy,
            avg_emfe_dbm_m2: Sci::new(dbm_per_m2(t.emfe.mean)),
            gain_db_vs_no_ris: p.gain_db_vs_no_ris.map(Sci::new),
        });
    }
    let path = ctx.path("sweep_arrival.csv");
    write_csv(&path, &ctx.header(), &rows)?;
    let series = policies
        .iter()
        .map(|&k| Series {
            label: k.as_str().into(),
            points: rows
                .iter()
                .filter(|r| r.policy == k)
                .map(|r| (r.arrival_bps.get(), r.avg_emfe_dbm_m2.get()))
                .collect(),
        })
        .collect();
    let svg = write_svg(
        ctx.path("arrival.svg"),
        &Chart {
            title: format!("Average EMFE versus arrival rate (delay bound {} s)", sw.delay_bound_s),
            x_label: "mean arrival rate [bit/s]".into(),
            y_label: "average EMFE [dBm/m²]".into(),
            log_x: true,
            series,
        },
    )?;
    Ok(vec![path, svg])
}
