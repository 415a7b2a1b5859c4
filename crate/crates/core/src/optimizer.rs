//! Per-slot drift-plus-penalty solver, benchmark policies and the Lyapunov
//! bound check.
//!
//! Every candidate (precoder, combiner, RIS profile) triple gets its
//! exposure-optimal transmit power in closed form; the exhaustive search then
//! keeps the triple with the lowest per-slot objective
//! `V·Σ_p ω_p P_{d,p} + (B_r − B_l)·R_u`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Scene, SlotChannels};
use crate::codebook::{nearest_index, Codebooks};
use crate::error::{invalid, Error, Result};
use crate::queues::{QueueState, ServiceConfig};
use crate::radio_metrics::{rate_from_gain, PixelSet, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub v_parameter: f64,
    pub drift_constant: f64,
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_parameter >= 0.0) {
            return Err(invalid("v_parameter", "must be non-negative"));
        }
        if !(self.drift_constant > 0.0) {
            return Err(invalid("drift_constant", "must be positive"));
        }
        Ok(())
    }
}

/// `C = (A_max² + 2(τ R_max)² + (τ f_max)²) / 2`.
pub fn drift_constant(arrival_max: f64, rate_max: f64, cpu_max: f64, slot_duration: f64) -> f64 {
    let tr = slot_duration * rate_max;
    let tf = slot_duration * cpu_max;
    0.5 * (arrival_max * arrival_max + 2.0 * tr * tr + tf * tf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub precoder_index: usize,
    pub combiner_index: usize,
    pub ris_index: usize,
    /// W
    pub tx_power: f64,
    pub objective_value: f64,
    /// bits/s
    pub achieved_rate: f64,
    /// Weighted instantaneous exposure, W/m².
    pub achieved_emfe: f64,
}

impl Decision {
    fn silent(p: usize, c: usize, r: usize) -> Self {
        Self {
            precoder_index: p,
            combiner_index: c,
            ris_index: r,
            tx_power: 0.0,
            objective_value: 0.0,
            achieved_rate: 0.0,
            achieved_emfe: 0.0,
        }
    }

    pub fn indices(&self) -> (usize, usize, usize) {
        (self.precoder_index, self.combiner_index, self.ris_index)
    }
}

/// Closed-form minimizer of the per-slot objective over `P ∈ [0, P_max]`
/// for one fixed triple.
///
/// `weighted_pixel_gain` is `Σ_p ω_p |h_p w_u|²` and `effective_gain` is
/// `|w_aᴴ H w_u|²`. The interior stationary point is
/// `W(B_l − B_r)/(ln2 · V · (4π/λ²) · Σω|h w|²) − N_0 W / |w_aᴴHw_u|²`.
pub fn optimal_power(
    local_bits: f64,
    remote_bits: f64,
    v: f64,
    weighted_pixel_gain: f64,
    effective_gain: f64,
    cfg: &RadioConfig,
) -> f64 {
    if remote_bits >= local_bits || effective_gain <= 0.0 {
        return 0.0;
    }
    let penalty_slope = v * cfg.density_factor() * weighted_pixel_gain;
    if penalty_slope <= 0.0 {
        return cfg.max_tx_power;
    }
    let p = cfg.bandwidth * (local_bits - remote_bits) / (std::f64::consts::LN_2 * penalty_slope)
        - cfg.noise_power() / effective_gain;
    p.clamp(0.0, cfg.max_tx_power)
}

/// `V·emfe + (B_r − B_l)·rate`.
pub fn slot_objective(rate: f64, weighted_emfe: f64, local_bits: f64, remote_bits: f64, v: f64) -> f64 {
    v * weighted_emfe + (remote_bits - local_bits) * rate
}

/// Objective of one triple at power `p`, from its two gains.
pub fn triple_objective(
    p: f64,
    local_bits: f64,
    remote_bits: f64,
    v: f64,
    weighted_pixel_gain: f64,
    effective_gain: f64,
    cfg: &RadioConfig,
) -> f64 {
    let emfe = cfg.density_factor() * p * weighted_pixel_gain;
    slot_objective(rate_from_gain(effective_gain, p, cfg), emfe, local_bits, remote_bits, v)
}

/// Gains of every triple in one slot, with per-profile compositions cached.
pub struct SlotGains {
    /// `[ris][precoder][combiner]` effective gains.
    effective: Vec<f64>,
    /// `[ris][precoder]` weighted pixel gains.
    pixel: Vec<f64>,
    np: usize,
    nc: usize,
}

impl SlotGains {
    pub fn compute(ch: &SlotChannels, books: &Codebooks, pixels: &PixelSet, ris_subset: Option<&[usize]>) -> Self {
        let np = books.precoders.len();
        let nc = books.combiners.len();
        let nr = books.ris_profiles.len();
        let mut effective = vec![0.0; nr * np * nc];
        let mut pixel = vec![0.0; nr * np];
        let all: Vec<usize> = (0..nr).collect();
        let subset = ris_subset.unwrap_or(&all);

        let na = ch.ap_elements();
        let m = ch.ris_elements();
        for &r in subset {
            let diag = books.ris_profiles[r].diagonal();
            // H_ra · diag(e^{jθ})
            let mut ra = ch.h_ris_ap.clone();
            for (j, d) in diag.iter().enumerate() {
                ra.column_mut(j).apply(|x| *x *= *d);
            }
            let h: DMatrix<Complex64> = &ch.h_direct + &ra * &ch.h_ue_ris;
            let mut rp = ch.h_ris_pixel.clone();
            for (j, d) in diag.iter().enumerate().take(m) {
                rp.column_mut(j).apply(|x| *x *= *d);
            }
            let hp: DMatrix<Complex64> = &ch.h_direct_pixel + &rp * &ch.h_ue_ris;

            for (u, w_u) in books.precoders.iter().enumerate() {
                let y: DVector<Complex64> = &h * w_u;
                let z: DVector<Complex64> = &hp * w_u;
                pixel[r * np + u] = z.iter().zip(&pixels.weights).map(|(v, w)| w * v.norm_sqr()).sum();
                let base = (r * np + u) * nc;
                for (c, w_a) in books.combiners.iter().enumerate() {
                    debug_assert_eq!(w_a.len(), na);
                    effective[base + c] = w_a.dotc(&y).norm_sqr();
                }
            }
        }
        Self { effective, pixel, np, nc }
    }

    pub fn effective(&self, p: usize, c: usize, r: usize) -> f64 {
        self.effective[(r * self.np + p) * self.nc + c]
    }

    pub fn pixel(&self, p: usize, r: usize) -> f64 {
        self.pixel[r * self.np + p]
    }
}

fn evaluate(
    gains: &SlotGains,
    (p, c, r): (usize, usize, usize),
    state: &QueueState,
    v: f64,
    cfg: &RadioConfig,
) -> Decision {
    let a = gains.effective(p, c, r);
    let g = gains.pixel(p, r);
    let power = optimal_power(state.local_bits, state.remote_bits, v, g, a, cfg);
    let rate = rate_from_gain(a, power, cfg);
    let emfe = cfg.density_factor() * power * g;
    Decision {
        precoder_index: p,
        combiner_index: c,
        ris_index: r,
        tx_power: power,
        objective_value: slot_objective(rate, emfe, state.local_bits, state.remote_bits, v),
        achieved_rate: rate,
        achieved_emfe: emfe,
    }
}

/// Lower objective wins; equal objectives fall back to the lexicographically smaller triple.
fn better(a: &Decision, b: &Decision) -> bool {
    a.objective_value < b.objective_value
        || (a.objective_value == b.objective_value && a.indices() < b.indices())
}

fn search(
    gains: &SlotGains,
    books: &Codebooks,
    ris_indices: &[usize],
    state: &QueueState,
    v: f64,
    cfg: &RadioConfig,
) -> Decision {
    let mut best: Option<Decision> = None;
    for p in 0..books.precoders.len() {
        for c in 0..books.combiners.len() {
            for &r in ris_indices {
                let d = evaluate(gains, (p, c, r), state, v, cfg);
                if best.as_ref().is_none_or(|b| better(&d, b)) {
                    best = Some(d);
                }
            }
        }
    }
    best.expect("non-empty codebooks")
}

/// Exhaustive search over every codebook triple.
pub fn solve_slot(
    ch: &SlotChannels,
    books: &Codebooks,
    state: &QueueState,
    lcfg: &LyapunovConfig,
    cfg: &RadioConfig,
    pixels: &PixelSet,
) -> Result<Decision> {
    if books.search_space() == 0 {
        return Err(Error::Empty("codebooks"));
    }
    if state.remote_bits >= state.local_bits {
        return Ok(Decision::silent(0, 0, 0));
    }
    let gains = SlotGains::compute(ch, books, pixels, None);
    let all: Vec<usize> = (0..books.ris_profiles.len()).collect();
    Ok(search(&gains, books, &all, state, lcfg.v_parameter, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    BoaWithRis,
    BoaNoRis,
    FixedApNoRis,
    FixedApWithRis,
    FixedRis,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::BoaWithRis,
        PolicyKind::BoaNoRis,
        PolicyKind::FixedApNoRis,
        PolicyKind::FixedApWithRis,
        PolicyKind::FixedRis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::BoaWithRis => "boa_with_ris",
            PolicyKind::BoaNoRis => "boa_no_ris",
            PolicyKind::FixedApNoRis => "fixed_ap_no_ris",
            PolicyKind::FixedApWithRis => "fixed_ap_with_ris",
            PolicyKind::FixedRis => "fixed_ris",
        }
    }

    pub fn uses_ris(&self) -> bool {
        !matches!(self, PolicyKind::BoaNoRis | PolicyKind::FixedApNoRis)
    }

    pub fn searches(&self) -> bool {
        matches!(self, PolicyKind::BoaWithRis | PolicyKind::BoaNoRis)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| invalid("policy", format!("unknown policy `{s}`")))
    }
}

/// A policy with its fixed beams resolved against one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub kind: PolicyKind,
    /// Triple used by the fixed-beam policies.
    pub fixed: (usize, usize, usize),
}

impl Policy {
    pub fn new(kind: PolicyKind, scene: &Scene, books: &Codebooks) -> Result<Self> {
        let ris_to_ap = nearest_index(&books.ris_angles, scene.ris_angle_to_ap()?);
        let fixed = match kind {
            PolicyKind::FixedRis => (
                nearest_index(&books.precoder_angles, scene.ue_angle_to_ris()?),
                nearest_index(&books.combiner_angles, scene.ap_angle_to_ris()?),
                ris_to_ap,
            ),
            PolicyKind::FixedApWithRis => (
                nearest_index(&books.precoder_angles, scene.ue_angle_to_ap()?),
                nearest_index(&books.combiner_angles, scene.ap_angle_to_ue()?),
                ris_to_ap,
            ),
            _ => (
                nearest_index(&books.precoder_angles, scene.ue_angle_to_ap()?),
                nearest_index(&books.combiner_angles, scene.ap_angle_to_ue()?),
                0,
            ),
        };
        Ok(Self { kind, fixed })
    }
}

/// Decision of any policy. Policies without the RIS see the slot with every
/// reflected path removed; fixed policies only optimize power.
pub fn baseline_decision(
    policy: &Policy,
    ch: &SlotChannels,
    books: &Codebooks,
    state: &QueueState,
    lcfg: &LyapunovConfig,
    cfg: &RadioConfig,
    pixels: &PixelSet,
) -> Result<Decision> {
    let stripped;
    let ch = if policy.kind.uses_ris() {
        ch
    } else {
        stripped = ch.without_ris();
        &stripped
    };
    match policy.kind {
        PolicyKind::BoaWithRis => solve_slot(ch, books, state, lcfg, cfg, pixels),
        PolicyKind::BoaNoRis => {
            if state.remote_bits >= state.local_bits {
                return Ok(Decision::silent(0, 0, 0));
            }
            let gains = SlotGains::compute(ch, books, pixels, Some(&[0]));
            Ok(search(&gains, books, &[0], state, lcfg.v_parameter, cfg))
        }
        _ => {
            let (p, c, r) = policy.fixed;
            if state.remote_bits >= state.local_bits {
                return Ok(Decision::silent(p, c, r));
            }
            Ok(evaluate_triple(ch, books, pixels, (p, c, r), state, lcfg.v_parameter, cfg))
        }
    }
}

/// Closed-form decision for one triple, without the cached search.
pub fn evaluate_triple(
    ch: &SlotChannels,
    books: &Codebooks,
    pixels: &PixelSet,
    (p, c, r): (usize, usize, usize),
    state: &QueueState,
    v: f64,
    cfg: &RadioConfig,
) -> Decision {
    let diag = books.ris_profiles[r].diagonal();
    let w_u = &books.precoders[p];
    let w_a = &books.combiners[c];
    let mut ra = ch.h_ris_ap.clone();
    let mut rp = ch.h_ris_pixel.clone();
    for (j, d) in diag.iter().enumerate() {
        ra.column_mut(j).apply(|x| *x *= *d);
        rp.column_mut(j).apply(|x| *x *= *d);
    }
    let ur_w: DVector<Complex64> = &ch.h_ue_ris * w_u;
    let y: DVector<Complex64> = &ch.h_direct * w_u + &ra * &ur_w;
    let z: DVector<Complex64> = &ch.h_direct_pixel * w_u + &rp * &ur_w;
    let a = w_a.dotc(&y).norm_sqr();
    let g: f64 = z.iter().zip(&pixels.weights).map(|(v, w)| w * v.norm_sqr()).sum();
    let power = optimal_power(state.local_bits, state.remote_bits, v, g, a, cfg);
    let rate = rate_from_gain(a, power, cfg);
    let emfe = cfg.density_factor() * power * g;
    Decision {
        precoder_index: p,
        combiner_index: c,
        ris_index: r,
        tx_power: power,
        objective_value: slot_objective(rate, emfe, state.local_bits, state.remote_bits, v),
        achieved_rate: rate,
        achieved_emfe: emfe,
    }
}

/// Outcome of checking one realized slot against the drift-plus-penalty bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCheck {
    pub holds: bool,
    /// Bound minus realized drift-plus-penalty.
    pub slack: f64,
}

/// Verifies `L(b(t+1)) − L(b(t)) + V·penalty ≤ C + (B_r − B_l)τR + A·B_l − τ B_r f/J + V·penalty`
/// on one realized slot.
#[allow(clippy::too_many_arguments)]
pub fn drift_bound_check(
    pre: &QueueState,
    post: &QueueState,
    decision: &Decision,
    arrivals: f64,
    cpu: f64,
    lcfg: &LyapunovConfig,
    penalty: f64,
    service: &ServiceConfig,
) -> DriftCheck {
    let tau = service.slot_duration;
    let vp = lcfg.v_parameter * penalty;
    let realized = post.lyapunov() - pre.lyapunov() + vp;
    let bound = lcfg.drift_constant
        + (pre.remote_bits - pre.local_bits) * tau * decision.achieved_rate
        + arrivals * pre.local_bits
        - tau * pre.remote_bits * cpu / service.cycles_per_bit
        + vp;
    let slack = bound - realized;
    DriftCheck { holds: slack >= 0.0, slack }
}

/// Largest `‖H‖²` (squared spectral norm) over every RIS profile of one slot.
pub fn max_channel_gain(ch: &SlotChannels, books: &Codebooks) -> f64 {
    books
        .ris_profiles
        .iter()
        .map(|r| {
            let h = crate::channel::compose_e2e(ch, r).expect("consistent dimensions");
            let s = h.singular_values()[0];
            s * s
        })
        .fold(0.0, f64::max)
}
