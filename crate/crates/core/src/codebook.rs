//! Finite precoder, combiner and RIS-profile codebooks.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::RisProfile;
use crate::error::{invalid, Error, Result};
use crate::geometry::{element_gain, steering_vector, ArraySpec};

pub type Beam = DVector<Complex64>;

/// The three search sets together with the angles that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebooks {
    pub precoders: Vec<Beam>,
    pub combiners: Vec<Beam>,
    pub ris_profiles: Vec<RisProfile>,
    pub precoder_angles: Vec<f64>,
    pub combiner_angles: Vec<f64>,
    pub ris_angles: Vec<f64>,
}

impl Codebooks {
    pub fn search_space(&self) -> usize {
        self.precoders.len() * self.combiners.len() * self.ris_profiles.len()
    }

    /// Checks non-emptiness, unit power of every beam and unit modulus of every RIS profile.
    pub fn validate(&self) -> Result<()> {
        if self.precoders.is_empty() {
            return Err(Error::Empty("precoder codebook"));
        }
        if self.combiners.is_empty() {
            return Err(Error::Empty("combiner codebook"));
        }
        if self.ris_profiles.is_empty() {
            return Err(Error::Empty("RIS codebook"));
        }
        for (name, set) in [("precoder", &self.precoders), ("combiner", &self.combiners)] {
            for (i, w) in set.iter().enumerate() {
                let p = w.norm_squared();
                if (p - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("{name}[{i}]"), format!("power {p} is not 1")));
                }
            }
        }
        let m = self.ris_profiles[0].len();
        for (i, r) in self.ris_profiles.iter().enumerate() {
            if r.len() != m {
                return Err(Error::DimensionMismatch(format!("ris_profiles[{i}] length")));
            }
            if r.diagonal().iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
                return Err(invalid(format!("ris_profiles[{i}]"), "not unit modulus"));
            }
        }
        Ok(())
    }
}

/// Angles from `start` to `end` inclusive in steps of `step` (all in degrees), returned in radians.
pub fn degree_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| (start + step * i as f64).to_radians()).collect()
}

/// One unit-power beam per grid angle, steered toward that angle.
pub fn build_beam_codebook(spec: &ArraySpec, wavelength: f64, angle_grid: &[f64]) -> Result<Vec<Beam>> {
    if angle_grid.is_empty() {
        return Err(Error::Empty("beam angle grid"));
    }
    angle_grid
        .iter()
        .map(|&angle| {
            if angle.abs() >= PI / 2.0 {
                return Err(invalid("angle_grid", format!("{angle} rad is outside (−π/2, π/2)")));
            }
            let g = element_gain(spec, angle);
            let v = DVector::from_iterator(
                spec.num_elements,
                steering_vector(spec, wavelength, angle).into_iter().map(|z| z * g),
            );
            let norm = v.norm();
            if norm == 0.0 {
                return Err(invalid("angle_grid", "element pattern vanishes at grid angle"));
            }
            Ok(v.unscale(norm))
        })
        .collect()
}

/// Linear phase-gradient profiles that redirect a wave arriving from
/// `incident_azimuth` toward each reflection angle of `reflection_grid`.
pub fn build_ris_codebook(
    spec: &ArraySpec,
    wavelength: f64,
    incident_azimuth: f64,
    reflection_grid: &[f64],
) -> Result<Vec<RisProfile>> {
    if reflection_grid.is_empty() {
        return Err(Error::Empty("RIS reflection grid"));
    }
    let k = 2.0 * PI * spec.element_spacing / wavelength;
    Ok(reflection_grid
        .iter()
        .map(|&psi| {
            let slope = -k * (psi.sin() + incident_azimuth.sin());
            RisProfile::new(
                (0..spec.num_elements)
                    .map(|i| (slope * i as f64).rem_euclid(2.0 * PI))
                    .collect(),
            )
        })
        .collect())
}

/// Rounds every phase to the nearest of `2^bits` uniformly spaced levels.
pub fn quantize_phases(profile: &RisProfile, bits: u32) -> RisProfile {
    let levels = (1u64 << bits) as f64;
    let step = 2.0 * PI / levels;
    RisProfile::new(
        profile
            .phases
            .iter()
            .map(|t| ((t / step).round() * step).rem_euclid(2.0 * PI))
            .collect(),
    )
}

/// Index of the grid angle closest to `angle`; the lowest index wins ties.
pub fn nearest_index(grid: &[f64], angle: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let d = (g - angle).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
