//! Scenario configuration and its two built-in profiles.
//!
//! `desk` divides the arrival rate and bandwidth by a common factor so that
//! sweeps finish on a workstation; `paper` keeps the full-scale link budget.


use serde::{Deserialize, Serialize};

use crate::channel::{LinkSet, RicianParams, Scene};
use crate::codebook::{build_beam_codebook, build_ris_codebook, degree_grid, quantize_phases, Codebooks};
use crate::error::{invalid, Result};
use crate::geometry::{wrap_angle, ArraySpec, Position3D, SPEED_OF_LIGHT};
use crate::optimizer::PolicyKind;
use crate::queues::ServiceConfig;
use crate::radio_metrics::{dbm_to_watts, PixelSet, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(invalid("profile", format!("unknown profile `{other}` (expected desk|paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
    pub horizon: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Initial local and remote backlog, bits.
    pub initial_local_bits: f64,
    pub initial_remote_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionsSection {
    pub ue: [f64; 3],
    pub ap: [f64; 3],
    pub ris: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelsSection {
    pub positions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub elements: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Boresight azimuth in degrees; `None` selects the default orientation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boresight_deg: Option<f64>,
    pub element_exponent: f64,
    pub peak_gain_dbi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub k_factor: f64,
    pub pathloss_exponent: f64,
    /// Power gain at 1 m in dB; `None` uses the Friis value `(λ/4π)²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gain_db: Option<f64>,
}

impl LinkSection {
    fn los(k_factor: f64) -> Self {
        Self {
            k_factor,
            pathloss_exponent: 2.0,
            reference_gain_db: None,
        }
    }

    fn params(&self, carrier_frequency: f64) -> RicianParams {
        let mut p = RicianParams::free_space(carrier_frequency, self.k_factor);
        p.pathloss_exponent = self.pathloss_exponent;
        if let Some(db) = self.reference_gain_db {
            p.reference_pathloss = 10f64.powf(db / 10.0);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub carrier_frequency_hz: f64,
    pub direct: LinkSection,
    pub ue_ris: LinkSection,
    pub ris_ap: LinkSection,
    pub ue_pixel: LinkSection,
    pub ris_pixel: LinkSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub max_tx_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    pub slot_duration_s: f64,
    pub cycles_per_bit: f64,
    pub arrival_rate_bps: f64,
    pub packet_bits: f64,
    /// Mean CPU service over mean arrivals; the CPU draw is uniform on `[0, 2·margin·J·Ā]`.
    pub cpu_margin: f64,
}

/// Reference direction for the RIS reflection grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisGridReference {
    /// Grid angles are measured from the RIS normal.
    Normal,
    /// Grid angles are offsets from the RIS→AP direction.
    Ap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSection {
    /// `[start, end, step]` in degrees.
    pub ue_grid_deg: [f64; 3],
    pub ap_grid_deg: [f64; 3],
    pub ris_grid_deg: [f64; 3],
    pub ris_grid_reference: RisGridReference,
    /// RIS phase resolution in bits; 0 keeps continuous phases.
    pub phase_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub v: f64,
    pub calibration_slots: usize,
    pub rate_max_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub v_values: Vec<f64>,
    pub seeds_per_point: usize,
    pub range_distances_m: Vec<f64>,
    pub arrival_rates_bps: Vec<f64>,
    pub delay_bound_s: f64,
    pub v_search_min: f64,
    pub v_search_max: f64,
    pub bisection_iterations: usize,
    /// Relative width of the accepted delay band below the bound.
    pub delay_tolerance: f64,
    /// Horizon of every run inside V tuning; 0 reuses `run.horizon`.
    pub tuning_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub profile: Profile,
    pub run: RunSection,
    pub positions: PositionsSection,
    pub pixels: PixelsSection,
    pub ue_array: ArraySection,
    pub ap_array: ArraySection,
    pub ris_array: ArraySection,
    pub channel: ChannelSection,
    pub radio: RadioSection,
    pub service: ServiceSection,
    pub codebook: CodebookSection,
    pub lyapunov: LyapunovSection,
    pub sweep: SweepSection,
}

fn p3(a: [f64; 3]) -> Position3D {
    Position3D::new(a[0], a[1], a[2])
}

impl ScenarioConfig {
    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Full-scale link budget: 800 MHz, 10 Gbps, 28 GHz, 8/8/20 elements, 100 mW.
    pub fn paper() -> Self {
        let mut c = Self::desk();
        c.profile = Profile::Paper;
        c.radio.bandwidth_hz = 800e6;
        c.service.arrival_rate_bps = 10e9;
        c.service.packet_bits = 1e5;
        c.sweep.arrival_rates_bps = vec![0.1e9, 1e9, 10e9, 12e9, 14e9];
        c
    }

    /// Desk profile: arrival rate and bandwidth divided by 100.
    pub fn desk() -> Self {
        let array = |elements: usize, gain: f64| ArraySection {
            elements,
            spacing_wavelengths: 0.5,
            boresight_deg: None,
            element_exponent: 1.0,
            peak_gain_dbi: gain,
        };
        Self {
            profile: Profile::Desk,
            run: RunSection {
                policy: PolicyKind::BoaWithRis,
                horizon: 10_000,
                warmup: 1_000,
                seed: 1,
                initial_local_bits: 0.0,
                initial_remote_bits: 0.0,
            },
            positions: PositionsSection {
                ue: [0.0, 50.0, 1.0],
                ap: [50.0, 50.0, 1.0],
                ris: [4.0, 48.0, 1.0],
            },
            pixels: PixelsSection {
                positions: vec![[1.0, 50.0, 1.0]],
                weights: vec![1.0],
            },
            ue_array: array(8, 5.0),
            ap_array: array(8, 10.0),
            ris_array: ArraySection {
                element_exponent: 0.0,
                ..array(20, 20.0)
            },
            channel: ChannelSection {
                carrier_frequency_hz: 28e9,
                direct: LinkSection::los(10.0),
                ue_ris: LinkSection::los(10.0),
                ris_ap: LinkSection::los(10.0),
                ue_pixel: LinkSection::los(10.0),
                ris_pixel: LinkSection::los(10.0),
            },
            radio: RadioSection {
                bandwidth_hz: 8e6,
                noise_psd_dbm_hz: -174.0,
                max_tx_power_w: 0.1,
            },
            service: ServiceSection {
                slot_duration_s: 0.01,
                cycles_per_bit: 10.0,
                arrival_rate_bps: 1e8,
                packet_bits: 1e3,
                cpu_margin: 1.25,
            },
            codebook: CodebookSection {
                ue_grid_deg: [-60.0, 60.0, 10.0],
                ap_grid_deg: [-60.0, 60.0, 10.0],
                ris_grid_deg: [-30.0, 30.0, 5.0],
                ris_grid_reference: RisGridReference::Ap,
                phase_bits: 0,
            },
            lyapunov: LyapunovSection {
                v: 1e15,
                calibration_slots: 100,
                rate_max_safety: 2.0,
            },
            sweep: SweepSection {
                v_values: vec![1e13, 1e14, 1e15, 1e16, 1e17, 1e18],
                seeds_per_point: 5,
                range_distances_m: vec![20.0, 35.0, 50.0, 75.0, 100.0],
                arrival_rates_bps: vec![1e6, 1e7, 1e8, 1.2e8, 1.4e8],
                delay_bound_s: 0.1,
                v_search_min: 1e10,
                v_search_max: 1e22,
                bisection_iterations: 20,
                delay_tolerance: 0.1,
                tuning_horizon: 3_000,
            },
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.channel.carrier_frequency_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.horizon <= self.run.warmup {
            return Err(invalid("run.horizon", "must exceed run.warmup"));
        }
        if !(self.run.initial_local_bits >= 0.0 && self.run.initial_remote_bits >= 0.0) {
            return Err(invalid("run.initial_*_bits", "must be non-negative"));
        }
        for (name, p) in [("positions.ue", self.positions.ue), ("positions.ap", self.positions.ap), ("positions.ris", self.positions.ris)] {
            if !p3(p).is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.channel.carrier_frequency_hz > 0.0) {
            return Err(invalid("channel.carrier_frequency_hz", "must be positive"));
        }
        if !(self.lyapunov.v >= 0.0) {
            return Err(invalid("lyapunov.v", "must be non-negative"));
        }
        if !(self.lyapunov.rate_max_safety >= 1.0) {
            return Err(invalid("lyapunov.rate_max_safety", "must be at least 1"));
        }
        if !(self.service.cpu_margin > 0.0) {
            return Err(invalid("service.cpu_margin", "must be positive"));
        }
        self.radio()?.validate()?;
        self.service_config().validate()?;
        self.pixel_set().validate()?;
        self.links().validate()?;
        let scene = self.scene()?;
        for a in [&scene.ue_array, &scene.ap_array, &scene.ris_array] {
            a.validate()?;
        }
        Ok(())
    }

    pub fn radio(&self) -> Result<RadioConfig> {
        Ok(RadioConfig {
            bandwidth: self.radio.bandwidth_hz,
            noise_psd: dbm_to_watts(self.radio.noise_psd_dbm_hz),
            wavelength: self.wavelength(),
            max_tx_power: self.radio.max_tx_power_w,
        })
    }

    pub fn service_config(&self) -> ServiceConfig {
        let s = &self.service;
        ServiceConfig::with_defaults(s.slot_duration_s, s.cycles_per_bit, s.arrival_rate_bps, s.packet_bits, s.cpu_margin)
    }

    pub fn pixel_set(&self) -> PixelSet {
        PixelSet {
            positions: self.pixels.positions.iter().copied().map(p3).collect(),
            weights: self.pixels.weights.clone(),
        }
    }

    pub fn links(&self) -> LinkSet {
        let f = self.channel.carrier_frequency_hz;
        LinkSet {
            direct: self.channel.direct.params(f),
            ue_ris: self.channel.ue_ris.params(f),
            ris_ap: self.channel.ris_ap.params(f),
            ue_pixel: self.channel.ue_pixel.params(f),
            ris_pixel: self.channel.ris_pixel.params(f),
        }
    }

    fn centroid(&self) -> Position3D {
        let mut pts = vec![p3(self.positions.ue), p3(self.positions.ap), p3(self.positions.ris)];
        pts.extend(self.pixels.positions.iter().copied().map(p3));
        let n = pts.len() as f64;
        Position3D::new(
            pts.iter().map(|p| p.x).sum::<f64>() / n,
            pts.iter().map(|p| p.y).sum::<f64>() / n,
            pts.iter().map(|p| p.z).sum::<f64>() / n,
        )
    }

    /// Resolves positions and array orientations.
    ///
    /// UE and AP face the scene centroid unless overridden. The RIS faces the
    /// bisector of its UE and AP directions so that both lie in front of it.
    pub fn scene(&self) -> Result<Scene> {
        let lambda = self.wavelength();
        let ue = p3(self.positions.ue);
        let ap = p3(self.positions.ap);
        let ris = p3(self.positions.ris);
        let centroid = self.centroid();
        let spec = |sec: &ArraySection, default_boresight: f64| ArraySpec {
            num_elements: sec.elements,
            element_spacing: sec.spacing_wavelengths * lambda,
            boresight_azimuth: sec.boresight_deg.map(f64::to_radians).unwrap_or(default_boresight),
            element_exponent: sec.element_exponent,
            peak_gain_dbi: sec.peak_gain_dbi,
        };
        let ris_default = {
            let a = ris.heading_to(&ue)?;
            let b = ris.heading_to(&ap)?;
            wrap_angle(b + wrap_angle(a - b) / 2.0)
        };
        Ok(Scene {
            ue,
            ap,
            ris,
            pixels: self.pixels.positions.iter().copied().map(p3).collect(),
            ue_array: spec(&self.ue_array, ue.heading_to(&centroid)?),
            ap_array: spec(&self.ap_array, ap.heading_to(&centroid)?),
            ris_array: spec(&self.ris_array, ris_default),
        })
    }

    pub fn codebooks(&self, scene: &Scene) -> Result<Codebooks> {
        let lambda = self.wavelength();
        let grid = |g: [f64; 3]| degree_grid(g[0], g[1], g[2]);
        let precoder_angles = grid(self.codebook.ue_grid_deg);
        let combiner_angles = grid(self.codebook.ap_grid_deg);
        let offsets = grid(self.codebook.ris_grid_deg);
        let ris_angles: Vec<f64> = match self.codebook.ris_grid_reference {
            RisGridReference::Normal => offsets,
            RisGridReference::Ap => {
                let ap = scene.ris_angle_to_ap()?;
                offsets.iter().map(|o| ap + o).collect()
            }
        };
        let incident = scene.ris_angle_to_ue()?;
        let mut ris_profiles = build_ris_codebook(&scene.ris_array, lambda, incident, &ris_angles)?;
        if self.codebook.phase_bits > 0 {
            ris_profiles = ris_profiles.iter().map(|p| quantize_phases(p, self.codebook.phase_bits)).collect();
        }
        let books = Codebooks {
            precoders: build_beam_codebook(&scene.ue_array, lambda, &precoder_angles)?,
            combiners: build_beam_codebook(&scene.ap_array, lambda, &combiner_angles)?,
            ris_profiles,
            precoder_angles,
            combiner_angles,
            ris_angles,
        };
        books.validate()?;
        Ok(books)
    }

    /// UE placed `distance` meters from the AP along the original UE→AP
    /// axis; the RIS and the pixels keep their offsets from the UE.
    /// Moves the UE along the AP→UE line to `distance` meters from the AP,
    /// carrying the RIS and pixels along. Array orientations are frozen at
    /// their values in the original scene, so the UE cluster moves rigidly.
    pub fn with_ue_ap_distance(&self, distance: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(invalid("distance", "must be positive"));
        }
        let ue = p3(self.positions.ue);
        let ap = p3(self.positions.ap);
        let d0 = ue.distance(&ap);
        let heading = ap.heading_to(&ue)?;
        let (s, c) = heading.sin_cos();
        let new_ue = [ap.x + distance * c, ap.y + distance * s, ue.z];
        let shift = |p: [f64; 3]| [p[0] - ue.x + new_ue[0], p[1] - ue.y + new_ue[1], p[2]];
        let base = self.scene()?;
        let mut out = self.clone();
        out.ue_array.boresight_deg = Some(base.ue_array.boresight_azimuth.to_degrees());
        out.ap_array.boresight_deg = Some(base.ap_array.boresight_azimuth.to_degrees());
        out.ris_array.boresight_deg = Some(base.ris_array.boresight_azimuth.to_degrees());
        out.positions.ue = new_ue;
        out.positions.ris = shift(self.positions.ris);
        out.pixels.positions = self.pixels.positions.iter().copied().map(shift).collect();
        debug_assert!((p3(out.positions.ue).distance(&ap) - distance).abs() < 1e-9 * d0.max(distance));
        Ok(out)
    }

    pub fn with_arrival_rate(&self, rate_bps: f64) -> Self {
        let mut out = self.clone();
        out.service.arrival_rate_bps = rate_bps;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn profiles_are_valid() {
        ScenarioConfig::desk().validate().unwrap();
        ScenarioConfig::paper().validate().unwrap();
    }

    #[test]
    fn paper_profile_block() {
        let c = ScenarioConfig::paper();
        assert_eq!(c.radio.bandwidth_hz, 800e6);
        assert_eq!(c.service.arrival_rate_bps, 10e9);
        assert_eq!(c.channel.carrier_frequency_hz, 28e9);
        assert_eq!((c.ue_array.elements, c.ap_array.elements, c.ris_array.elements), (8, 8, 20));
        assert_eq!(c.radio.max_tx_power_w, 0.1);
        assert_eq!(c.service.slot_duration_s, 0.01);
        assert_eq!(c.radio.noise_psd_dbm_hz, -174.0);
    }

    #[test]
    fn desk_scales_rate_and_bandwidth_together() {
        let d = ScenarioConfig::desk();
        let p = ScenarioConfig::paper();
        assert_eq!(p.radio.bandwidth_hz / d.radio.bandwidth_hz, 100.0);
        assert_eq!(p.service.arrival_rate_bps / d.service.arrival_rate_bps, 100.0);
    }

    #[test]
    fn default_codebooks_are_13_cubed() {
        let c = ScenarioConfig::desk();
        let scene = c.scene().unwrap();
        let books = c.codebooks(&scene).unwrap();
        assert_eq!(books.precoders.len(), 13);
        assert_eq!(books.combiners.len(), 13);
        assert_eq!(books.ris_profiles.len(), 13);
        assert_eq!(books.search_space(), 2197);
        assert_eq!(books, c.codebooks(&scene).unwrap());
    }

    #[test]
    fn ris_faces_both_endpoints() {
        let scene = ScenarioConfig::desk().scene().unwrap();
        let to_ue = scene.ris_angle_to_ue().unwrap();
        let to_ap = scene.ris_angle_to_ap().unwrap();
        assert!(to_ue.abs() < PI / 2.0 && to_ap.abs() < PI / 2.0);
        assert!((to_ue + to_ap).abs() < 1e-12);
    }

    #[test]
    fn ue_faces_centroid_and_ap_is_ahead() {
        let scene = ScenarioConfig::desk().scene().unwrap();
        assert!(scene.ue_angle_to_ap().unwrap().abs() < 5f64.to_radians());
        assert!(scene.ap_angle_to_ue().unwrap().abs() < 5f64.to_radians());
    }

    #[test]
    fn repositioning_keeps_offsets() {
        let c = ScenarioConfig::desk();
        let moved = c.with_ue_ap_distance(100.0).unwrap();
        let close = |a: [f64; 3], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9);
        assert!(close(moved.positions.ue, [-50.0, 50.0, 1.0]));
        assert!(close(moved.positions.ris, [-46.0, 48.0, 1.0]));
        assert!(close(moved.pixels.positions[0], [-49.0, 50.0, 1.0]));
        assert_eq!(moved.positions.ap, c.positions.ap);
        assert!(c.with_ue_ap_distance(0.0).is_err());
    }

    #[test]
    fn horizon_must_exceed_warmup() {
        let mut c = ScenarioConfig::desk();
        c.run.warmup = c.run.horizon;
        assert!(c.validate().is_err());
    }
}
