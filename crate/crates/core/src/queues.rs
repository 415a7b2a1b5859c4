//! Local (device) and remote (edge host) bit buffers.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub local_bits: f64,
    pub remote_bits: f64,
}

impl QueueState {
    pub fn new(local_bits: f64, remote_bits: f64) -> Self {
        Self { local_bits, remote_bits }
    }

    pub fn total(&self) -> f64 {
        self.local_bits + self.remote_bits
    }

    /// `(B_l² + B_r²)/2`
    pub fn lyapunov(&self) -> f64 {
        0.5 * (self.local_bits * self.local_bits + self.remote_bits * self.remote_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// τ, seconds.
    pub slot_duration: f64,
    /// J, CPU cycles per bit.
    pub cycles_per_bit: f64,
    /// Ā, bits/s.
    pub mean_arrival_rate: f64,
    /// f_max, cycles/s.
    pub cpu_max: f64,
    /// A_max, bits per slot.
    pub arrival_max: f64,
    /// Bits per arriving packet.
    pub packet_bits: f64,
}

impl ServiceConfig {
    /// Builds a config whose CPU support is `[0, 2·margin·J·Ā]` and whose
    /// arrival cap is the Poisson mean plus ten standard deviations.
    pub fn with_defaults(slot_duration: f64, cycles_per_bit: f64, mean_arrival_rate: f64, packet_bits: f64, cpu_margin: f64) -> Self {
        let mean_packets = mean_arrival_rate * slot_duration / packet_bits;
        let cap_packets = (mean_packets + 10.0 * mean_packets.sqrt()).floor();
        Self {
            slot_duration,
            cycles_per_bit,
            mean_arrival_rate,
            cpu_max: 2.0 * cpu_margin * cycles_per_bit * mean_arrival_rate,
            arrival_max: cap_packets * packet_bits,
            packet_bits,
        }
    }

    pub fn mean_packets_per_slot(&self) -> f64 {
        self.mean_arrival_rate * self.slot_duration / self.packet_bits
    }

    pub fn mean_arrival_bits_per_slot(&self) -> f64 {
        self.mean_arrival_rate * self.slot_duration
    }

    /// Bits per slot the edge host can process at `cpu` cycles/s.
    pub fn service_bits(&self, cpu: f64) -> f64 {
        self.slot_duration * cpu / self.cycles_per_bit
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("slot_duration", self.slot_duration),
            ("cycles_per_bit", self.cycles_per_bit),
            ("packet_bits", self.packet_bits),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("mean_arrival_rate", self.mean_arrival_rate),
            ("cpu_max", self.cpu_max),
            ("arrival_max", self.arrival_max),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Poisson packet count, truncated at `arrival_max`, in bits.
    pub fn draw_arrivals<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mean = self.mean_packets_per_slot();
        if mean <= 0.0 {
            return 0.0;
        }
        let count: f64 = Poisson::new(mean).expect("positive Poisson mean").sample(rng);
        (count * self.packet_bits).min(self.arrival_max)
    }

    /// CPU availability uniform on `[0, cpu_max]`.
    pub fn draw_cpu<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>() * self.cpu_max
    }
}

/// Local buffer update. Returns `(new local bits, transmitted bits)`.
pub fn step_local(state: &QueueState, rate: f64, arrivals: f64, cfg: &ServiceConfig) -> (f64, f64) {
    debug_assert!(rate >= 0.0 && arrivals >= 0.0);
    let drain = cfg.slot_duration * rate;
    let transmitted = state.local_bits.min(drain);
    ((state.local_bits - drain).max(0.0) + arrivals, transmitted)
}

/// Remote buffer update fed by the bits transmitted in the same slot.
pub fn step_remote(state: &QueueState, transmitted: f64, cpu: f64, cfg: &ServiceConfig) -> f64 {
    debug_assert!(transmitted >= 0.0 && cpu >= 0.0);
    (state.remote_bits - cfg.service_bits(cpu)).max(0.0) + transmitted
}

/// Bits actually processed by the edge host in a slot.
pub fn processed_bits(state: &QueueState, cpu: f64, cfg: &ServiceConfig) -> f64 {
    state.remote_bits.min(cfg.service_bits(cpu))
}

/// Little's-law end-to-end delay `τ(B̄_l + B̄_r)/Ā` with Ā in bits per slot.
pub fn e2e_delay(avg_local: f64, avg_remote: f64, avg_arrival: f64, cfg: &ServiceConfig) -> Result<f64> {
    if !(avg_arrival > 0.0) {
        return Err(Error::UndefinedDelay);
    }
    Ok(cfg.slot_duration * (avg_local + avg_remote) / avg_arrival)
}
