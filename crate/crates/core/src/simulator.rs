//! The slot loop, long-term averaging, and the three experiment sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelGenerator, Scene, SlotChannels};
use crate::codebook::Codebooks;
use crate::config::ScenarioConfig;
use crate::error::{invalid, Error, Result};
use crate::optimizer::{
    baseline_decision, drift_bound_check, drift_constant, max_channel_gain, LyapunovConfig, Policy, PolicyKind,
};
use crate::queues::{e2e_delay, processed_bits, step_local, step_remote, QueueState, ServiceConfig};
use crate::radio_metrics::{rate_from_gain, PixelSet, RadioConfig};

const CALIBRATION_STREAM: u64 = 0xCA11_B2A7_E000_0001;

/// SplitMix64 finalizer; derives independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub local_bits: f64,
    pub remote_bits: f64,
    pub arrivals: f64,
    pub cpu: f64,
    pub transmitted: f64,
    pub processed: f64,
    pub rate: f64,
    pub emfe: f64,
    pub power: f64,
    pub precoder: usize,
    pub combiner: usize,
    pub ris: usize,
    pub objective: f64,
    pub drift_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// W/m²
    pub avg_emfe: f64,
    pub avg_local_bits: f64,
    pub avg_remote_bits: f64,
    /// seconds
    pub avg_delay: f64,
    /// bits/s
    pub avg_rate: f64,
    /// W
    pub avg_power: f64,
    /// Measured arrivals per slot.
    pub avg_arrival_bits: f64,
    pub stable: bool,
    pub drift_violations: usize,
    pub min_drift_slack: f64,
    pub slots_averaged: usize,
    pub trace: Option<Vec<SlotRecord>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub record_trace: bool,
}

/// Everything a run needs that does not depend on the policy, V or seed.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub scene: Scene,
    pub generator: ChannelGenerator,
    pub books: Codebooks,
    pub radio: RadioConfig,
    pub service: ServiceConfig,
    pub pixels: PixelSet,
    /// Rate bound used in the drift constant, bits/s.
    pub rate_max: f64,
    pub drift_constant: f64,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let scene = config.scene()?;
        let generator = ChannelGenerator::new(&scene, &config.links())?;
        let books = config.codebooks(&scene)?;
        let radio = config.radio()?;
        let service = config.service_config();
        let pixels = config.pixel_set();

        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.run.seed, CALIBRATION_STREAM));
        let mut g_max: f64 = 0.0;
        for _ in 0..config.lyapunov.calibration_slots {
            let ch = generator.generate(&mut rng);
            g_max = g_max.max(max_channel_gain(&ch, &books));
        }
        let rate_max = rate_from_gain(config.lyapunov.rate_max_safety * g_max, radio.max_tx_power, &radio);
        let c = drift_constant(service.arrival_max, rate_max, service.cpu_max, service.slot_duration);

        Ok(Self {
            config: config.clone(),
            scene,
            generator,
            books,
            radio,
            service,
            pixels,
            rate_max,
            drift_constant: c.max(f64::MIN_POSITIVE),
        })
    }

    pub fn lyapunov(&self, v: f64) -> LyapunovConfig {
        LyapunovConfig {
            v_parameter: v,
            drift_constant: self.drift_constant,
        }
    }

    /// RNG seed of one run, derived from the master seed, the sweep point and
    /// the per-point seed.
    pub fn stream(&self, point: u64, seed: u64) -> u64 {
        mix_seed(mix_seed(self.config.run.seed, point), seed)
    }

    /// Runs the configured policy and V on stream `(0, run.seed)`.
    pub fn run(&self, opts: RunOptions) -> Result<RunMetrics> {
        let c = &self.config;
        let stream = self.stream(0, c.run.seed);
        self.run_with(c.run.policy, c.lyapunov.v, stream, c.run.horizon, c.run.warmup, opts)
    }

    pub fn run_with(
        &self,
        kind: PolicyKind,
        v: f64,
        stream_seed: u64,
        horizon: usize,
        warmup: usize,
        opts: RunOptions,
    ) -> Result<RunMetrics> {
        if horizon <= warmup {
            return Err(invalid("horizon", "must exceed warmup"));
        }
        let policy = Policy::new(kind, &self.scene, &self.books)?;
        let lcfg = self.lyapunov(v);
        lcfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let mut state = QueueState::new(self.config.run.initial_local_bits, self.config.run.initial_remote_bits);

        let mut sums = [0.0f64; 6]; // emfe, local, remote, rate, power, arrivals
        let mut totals = Vec::with_capacity(horizon);
        let mut trace = opts.record_trace.then(|| Vec::with_capacity(horizon));
        let mut violations = 0;
        let mut min_slack = f64::INFINITY;

        let env = SlotEnv {
            books: &self.books,
            radio: &self.radio,
            service: &self.service,
            pixels: &self.pixels,
            lyapunov: &lcfg,
        };
        for t in 0..horizon {
            let ch = self.generator.generate(&mut rng);
            let arrivals = self.service.draw_arrivals(&mut rng);
            let cpu = self.service.draw_cpu(&mut rng);
            let (next, rec) = advance_slot(&policy, &env, &ch, &state, arrivals, cpu)?;
            debug_assert!(rec.drift_slack >= 0.0, "drift bound violated at slot {t}: slack {}", rec.drift_slack);
            if rec.drift_slack < 0.0 {
                violations += 1;
            }
            min_slack = min_slack.min(rec.drift_slack);

            if t >= warmup {
                sums[0] += rec.emfe;
                sums[1] += state.local_bits;
                sums[2] += state.remote_bits;
                sums[3] += rec.rate;
                sums[4] += rec.power;
                sums[5] += arrivals;
            }
            totals.push(state.total());
            if let Some(tr) = trace.as_mut() {
                tr.push(rec);
            }
            state = next;
        }

        let n = (horizon - warmup) as f64;
        let avg = |i: usize| sums[i] / n;
        let (avg_local, avg_remote, avg_arr) = (avg(1), avg(2), avg(5));
        let avg_delay = match e2e_delay(avg_local, avg_remote, avg_arr, &self.service) {
            Ok(d) => d,
            Err(Error::UndefinedDelay) if avg_local + avg_remote == 0.0 => 0.0,
            Err(Error::UndefinedDelay) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(RunMetrics {
            avg_emfe: avg(0),
            avg_local_bits: avg_local,
            avg_remote_bits: avg_remote,
            avg_delay,
            avg_rate: avg(3),
            avg_power: avg(4),
            avg_arrival_bits: avg_arr,
            stable: !is_growing(&totals[totals.len() / 2..], self.service.mean_arrival_bits_per_slot()),
            drift_violations: violations,
            min_drift_slack: min_slack,
            slots_averaged: horizon - warmup,
            trace,
        })
    }
}

/// Everything a slot transition reads besides the channel, queues and draws.
#[derive(Debug, Clone, Copy)]
pub struct SlotEnv<'a> {
    pub books: &'a Codebooks,
    pub radio: &'a RadioConfig,
    pub service: &'a ServiceConfig,
    pub pixels: &'a PixelSet,
    pub lyapunov: &'a LyapunovConfig,
}

/// One slot: decide, evaluate, update both buffers and check the drift bound.
pub fn advance_slot(
    policy: &Policy,
    env: &SlotEnv,
    ch: &SlotChannels,
    state: &QueueState,
    arrivals: f64,
    cpu: f64,
) -> Result<(QueueState, SlotRecord)> {
    let d = baseline_decision(policy, ch, env.books, state, env.lyapunov, env.radio, env.pixels)?;
    let (local, transmitted) = step_local(state, d.achieved_rate, arrivals, env.service);
    let processed = processed_bits(state, cpu, env.service);
    let remote = step_remote(state, transmitted, cpu, env.service);
    let next = QueueState::new(local, remote);
    let check = drift_bound_check(state, &next, &d, arrivals, cpu, env.lyapunov, d.achieved_emfe, env.service);
    let rec = SlotRecord {
        local_bits: state.local_bits,
        remote_bits: state.remote_bits,
        arrivals,
        cpu,
        transmitted,
        processed,
        rate: d.achieved_rate,
        emfe: d.achieved_emfe,
        power: d.tx_power,
        precoder: d.precoder_index,
        combiner: d.combiner_index,
        ris: d.ris_index,
        objective: d.objective_value,
        drift_slack: check.slack,
    };
    Ok((next, rec))
}

/// Runs a scenario as configured.
pub fn run(config: &ScenarioConfig) -> Result<RunMetrics> {
    Simulation::new(config)?.run(RunOptions::default())
}

/// Batch-means trend test on a backlog trace: growing when the slope of ten
/// batch means is significantly positive and the rise over the window is
/// material relative to the mean backlog.
pub fn is_growing(backlog: &[f64], arrivals_per_slot: f64) -> bool {
    const BATCHES: usize = 10;
    if backlog.len() < BATCHES * 2 {
        return false;
    }
    let size = backlog.len() / BATCHES;
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| backlog[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let xm = (BATCHES as f64 - 1.0) / 2.0;
    let ym = means.iter().sum::<f64>() / BATCHES as f64;
    let sxx: f64 = (0..BATCHES).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = means.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let resid: f64 = means
        .iter()
        .enumerate()
        .map(|(i, y)| (y - ym - slope * (i as f64 - xm)).powi(2))
        .sum();
    let se = (resid / (BATCHES as f64 - 2.0) / sxx).sqrt();
    let rise = slope * (BATCHES as f64 - 1.0);
    slope > 3.0 * se && rise > 0.1 * ym + arrivals_per_slot
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VPoint {
    pub v: f64,
    pub policy: PolicyKind,
    pub runs: Vec<SeedRun>,
    pub emfe: Aggregate,
    pub delay: Aggregate,
}

impl VPoint {
    fn new(v: f64, policy: PolicyKind, runs: Vec<SeedRun>) -> Self {
        let emfe = Aggregate::of(&runs.iter().map(|r| r.metrics.avg_emfe).collect::<Vec<_>>());
        let delay = Aggregate::of(&runs.iter().map(|r| r.metrics.avg_delay).collect::<Vec<_>>());
        Self { v, policy, runs, emfe, delay }
    }

    pub fn all_stable(&self) -> bool {
        self.runs.iter().all(|r| r.metrics.stable)
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        Err(Error::Empty("seed list"))
    } else {
        Ok(())
    }
}

/// Runs `policy` at every V for every seed, in parallel. V values share the
/// random streams of each seed, so points along the curve are paired.
pub fn sweep_v_policy(sim: &Simulation, policy: PolicyKind, v_values: &[f64], seeds: &[u64]) -> Result<Vec<VPoint>> {
    if v_values.is_empty() {
        return Err(Error::Empty("V list"));
    }
    check_seeds(seeds)?;
    let mut vs = v_values.to_vec();
    vs.sort_by(|a, b| a.total_cmp(b));
    let c = &sim.config.run;
    let jobs: Vec<(f64, u64)> = vs.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let results: Vec<Result<RunMetrics>> = jobs
        .par_iter()
        .map(|&(v, s)| sim.run_with(policy, v, sim.stream(0, s), c.horizon, c.warmup, RunOptions::default()))
        .collect();
    let mut results = results.into_iter();
    vs.iter()
        .map(|&v| {
            let runs = seeds
                .iter()
                .map(|&seed| Ok(SeedRun { seed, metrics: results.next().expect("one result per job")? }))
                .collect::<Result<Vec<_>>>()?;
            Ok(VPoint::new(v, policy, runs))
        })
        .collect()
}

/// Trade-off sweep for the configured policy; output sorted by V.
pub fn sweep_v(config: &ScenarioConfig, v_values: &[f64], seeds: &[u64]) -> Result<Vec<VPoint>> {
    let sim = Simulation::new(config)?;
    sweep_v_policy(&sim, config.run.policy, v_values, seeds)
}

/// Outcome of tuning V against a delay bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedPoint {
    pub policy: PolicyKind,
    pub feasible: bool,
    pub v_star: f64,
    pub emfe: Aggregate,
    pub delay: Aggregate,
    pub evaluations: usize,
}

/// Finds the largest V whose mean delay stays within `delay_bound`, by
/// bisection on log V with early exit inside the tolerance band.
pub fn tune_v(sim: &Simulation, policy: PolicyKind, seeds: &[u64], point: u64, delay_bound: f64) -> Result<TunedPoint> {
    check_seeds(seeds)?;
    let sw = &sim.config.sweep;
    let horizon = if sw.tuning_horizon > 0 { sw.tuning_horizon } else { sim.config.run.horizon };
    let warmup = sim.config.run.warmup.min(horizon / 5);
    let mut evaluations = 0;
    let mut eval = |v: f64| -> Result<VPoint> {
        evaluations += 1;
        let runs = seeds
            .par_iter()
            .map(|&s| {
                sim.run_with(policy, v, sim.stream(point, s), horizon, warmup, RunOptions::default())
                    .map(|m| SeedRun { seed: s, metrics: m })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VPoint::new(v, policy, runs))
    };
    let ok = |p: &VPoint| p.all_stable() && p.delay.mean <= delay_bound;

    let finish = |p: VPoint, feasible: bool, evaluations: usize| TunedPoint {
        policy,
        feasible,
        v_star: p.v,
        emfe: p.emfe,
        delay: p.delay,
        evaluations,
    };

    let (mut lo, mut hi) = (sw.v_search_min.ln(), sw.v_search_max.ln());
    let lo_pt = eval(lo.exp())?;
    if !ok(&lo_pt) {
        return Ok(finish(lo_pt, false, evaluations));
    }
    let hi_pt = eval(hi.exp())?;
    if ok(&hi_pt) {
        return Ok(finish(hi_pt, true, evaluations));
    }
    let mut best = lo_pt;
    for _ in 0..sw.bisection_iterations {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid.exp())?;
        if ok(&p) {
            lo = mid;
            let in_band = p.delay.mean >= (1.0 - sw.delay_tolerance) * delay_bound;
            best = p;
            if in_band {
                break;
            }
        } else {
            hi = mid;
        }
    }
    Ok(finish(best, true, evaluations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangePoint {
    pub distance: f64,
    pub tuned: TunedPoint,
}

/// Average exposure versus UE–AP distance at a fixed delay bound.
pub fn sweep_range(
    config: &ScenarioConfig,
    distances: &[f64],
    delay_bound: f64,
    policies: &[PolicyKind],
    seeds: &[u64],
) -> Result<Vec<RangePoint>> {
    if distances.is_empty() {
        return Err(Error::Empty("distance list"));
    }
    let mut out = Vec::new();
    for (i, &d) in distances.iter().enumerate() {
        let sim = Simulation::new(&config.with_ue_ap_distance(d)?)?;
        for &p in policies {
            out.push(RangePoint {
                distance: d,
                tuned: tune_v(&sim, p, seeds, 1 + i as u64, delay_bound)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalPoint {
    pub arrival_rate: f64,
    pub tuned: TunedPoint,
    /// Exposure reduction of the RIS-aided search over the RIS-free search, dB.
    pub gain_db_vs_no_ris: Option<f64>,
}

/// `10·log10(reference / value)`, with equal zeros mapping to 0 dB.
pub fn gain_db(reference: f64, value: f64) -> f64 {
    if reference == value {
        0.0
    } else {
        10.0 * (reference / value).log10()
    }
}

/// Average exposure versus arrival rate at a fixed delay bound.
pub fn sweep_arrival(
    config: &ScenarioConfig,
    rates: &[f64],
    delay_bound: f64,
    policies: &[PolicyKind],
    seeds: &[u64],
) -> Result<Vec<ArrivalPoint>> {
    if rates.is_empty() {
        return Err(Error::Empty("arrival-rate list"));
    }
    let mut out = Vec::new();
    for (i, &rate) in rates.iter().enumerate() {
        if !(rate > 0.0) {
            return Err(invalid("arrival_rate", "must be positive"));
        }
        let sim = Simulation::new(&config.with_arrival_rate(rate))?;
        let tuned: Vec<TunedPoint> = policies
            .iter()
            .map(|&p| tune_v(&sim, p, seeds, 1000 + i as u64, delay_bound))
            .collect::<Result<_>>()?;
        let find = |k: PolicyKind| tuned.iter().find(|t| t.policy == k && t.feasible);
        let gain = match (find(PolicyKind::BoaWithRis), find(PolicyKind::BoaNoRis)) {
            (Some(w), Some(n)) => Some(gain_db(n.emfe.mean, w.emfe.mean)),
            _ => None,
        };
        for t in tuned {
            let g = if t.policy == PolicyKind::BoaWithRis { gain } else { None };
            out.push(ArrivalPoint {
                arrival_rate: rate,
                tuned: t,
                gain_db_vs_no_ris: g,
            });
        }
    }
    Ok(out)
}
