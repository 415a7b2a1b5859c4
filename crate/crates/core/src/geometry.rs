//! Node positions, LOS azimuths and uniform-linear-array responses.
//!
//! All arrays are linear in the horizontal plane. An array's orientation is
//! given by its boresight azimuth (the array normal); angles passed to the
//! steering and element-pattern functions are measured from that normal.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }

    /// Absolute azimuth of `other` seen from `self`, radians in (−π, π].
    pub fn heading_to(&self, other: &Position3D) -> Result<f64> {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx.hypot(dy) < 1e-12 {
            return Err(Error::DegenerateGeometry(format!(
                "coincident positions ({}, {}, {}) and ({}, {}, {})",
                self.x, self.y, self.z, other.x, other.y, other.z
            )));
        }
        Ok(dy.atan2(dx))
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Position3D {
        Position3D::new(self.x + dx, self.y + dy, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Geometry and element pattern of one uniform linear array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub num_elements: usize,
    /// Inter-element spacing in meters.
    pub element_spacing: f64,
    /// Azimuth of the array normal, radians.
    pub boresight_azimuth: f64,
    /// Exponent `q` of the cos^q element amplitude pattern.
    pub element_exponent: f64,
    /// Peak element gain in dBi, applied to every link terminating on this array.
    pub peak_gain_dbi: f64,
}

impl ArraySpec {
    /// Half-wavelength ULA with a cos element pattern and 0 dBi peak gain.
    pub fn half_wavelength(num_elements: usize, wavelength: f64, boresight_azimuth: f64) -> Self {
        Self {
            num_elements,
            element_spacing: wavelength / 2.0,
            boresight_azimuth,
            element_exponent: 1.0,
            peak_gain_dbi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(crate::error::invalid("num_elements", "must be at least 1"));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(crate::error::invalid("element_spacing", "must be positive"));
        }
        if !(self.element_exponent >= 0.0) {
            return Err(crate::error::invalid("element_exponent", "must be non-negative"));
        }
        Ok(())
    }

    /// Linear power factor of the peak element gain.
    pub fn peak_gain_linear(&self) -> f64 {
        10f64.powf(self.peak_gain_dbi / 10.0)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Angle of the `from → to` direction measured from `boresight`, in (−π, π].
pub fn azimuth_between(from: &Position3D, to: &Position3D, boresight: f64) -> Result<f64> {
    Ok(wrap_angle(from.heading_to(to)? - boresight))
}

/// ULA response `exp(j·2π·(d/λ)·i·sin θ)` for elements `i = 0..N`.
pub fn steering_vector(spec: &ArraySpec, wavelength: f64, angle: f64) -> Vec<Complex64> {
    debug_assert!(wavelength > 0.0);
    let step = 2.0 * PI * spec.element_spacing / wavelength * angle.sin();
    (0..spec.num_elements)
        .map(|i| Complex64::from_polar(1.0, step * i as f64))
        .collect()
}

/// Amplitude element pattern: `cos(θ)^q` in the front half-space, zero behind.
pub fn element_gain(spec: &ArraySpec, angle: f64) -> f64 {
    let a = wrap_angle(angle);
    if a.abs() < PI / 2.0 {
        a.cos().max(0.0).powf(spec.element_exponent)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ula(n: usize, q: f64) -> ArraySpec {
        ArraySpec {
            num_elements: n,
            element_spacing: 0.5,
            boresight_azimuth: 0.0,
            element_exponent: q,
            peak_gain_dbi: 0.0,
        }
    }

    #[test]
    fn azimuth_examples() {
        let o = Position3D::new(0.0, 0.0, 0.0);
        assert_eq!(azimuth_between(&o, &Position3D::new(1.0, 0.0, 0.0), 0.0).unwrap(), 0.0);
        let b = azimuth_between(&o, &Position3D::new(0.0, 1.0, 0.0), 0.0).unwrap();
        assert!((b - PI / 2.0).abs() < 1e-15);
        let ue = Position3D::new(0.0, 50.0, 1.0);
        let ap = Position3D::new(50.0, 50.0, 1.0);
        assert_eq!(azimuth_between(&ue, &ap, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn coincident_positions_are_degenerate() {
        let p = Position3D::new(1.0, 2.0, 3.0);
        assert!(matches!(
            azimuth_between(&p, &p, 0.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn azimuth_wraps_into_half_open_interval() {
        let o = Position3D::new(0.0, 0.0, 0.0);
        let a = azimuth_between(&o, &Position3D::new(-1.0, 0.0, 0.0), 0.0).unwrap();
        assert!((a - PI).abs() < 1e-15);
        let a = azimuth_between(&o, &Position3D::new(-1.0, 0.0, 0.0), PI).unwrap();
        assert!(a.abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn steering_examples() {
        let v = steering_vector(&ula(5, 1.0), 1.0, 0.0);
        assert!(v.iter().all(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let v = steering_vector(&ula(2, 1.0), 1.0, PI / 2.0);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);

        // per-element phase computed directly: phase_i = π·i·sin(π/6) = π·i/2
        let v = steering_vector(&ula(4, 1.0), 1.0, PI / 6.0);
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (a, b) in v.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn element_gain_examples() {
        assert_eq!(element_gain(&ula(1, 3.0), 0.0), 1.0);
        assert_eq!(element_gain(&ula(1, 0.0), 0.0), 1.0);
        assert!(element_gain(&ula(1, 1.0), PI / 2.0).abs() < 1e-15);
        assert!((element_gain(&ula(1, 2.0), PI / 3.0) - 0.25).abs() < 1e-15);
        assert_eq!(element_gain(&ula(1, 1.0), 2.0), 0.0);
    }

    #[test]
    fn array_spec_validation() {
        assert!(ula(0, 1.0).validate().is_err());
        let mut s = ula(4, 1.0);
        s.element_spacing = 0.0;
        assert!(s.validate().is_err());
        assert!(ula(4, 1.0).validate().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn steering_entries_unit_modulus(n in 1usize..64, angle in -PI..PI, spacing in 0.1f64..2.0) {
                let mut s = ula(n, 1.0);
                s.element_spacing = spacing;
                for z in steering_vector(&s, 1.0, angle) {
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn steering_conjugate_symmetry(n in 1usize..32, angle in -PI..PI) {
                let s = ula(n, 1.0);
                let pos = steering_vector(&s, 1.0, angle);
                let neg = steering_vector(&s, 1.0, -angle);
                for (a, b) in pos.iter().zip(neg.iter()) {
                    prop_assert!((a.conj() - b).norm() < 1e-9);
                }
            }

            #[test]
            fn element_gain_even_and_monotone(q in 0.0f64..6.0, a in 0.0f64..(PI / 2.0), b in 0.0f64..(PI / 2.0)) {
                let s = ula(1, q);
                prop_assert_eq!(element_gain(&s, a), element_gain(&s, -a));
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(element_gain(&s, lo) >= element_gain(&s, hi));
            }
        }
    }
}
