//! Uplink rate, per-pixel incident power density and weighted exposure.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Position3D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Hz
    pub bandwidth: f64,
    /// W/Hz
    pub noise_psd: f64,
    /// m
    pub wavelength: f64,
    /// W
    pub max_tx_power: f64,
}

impl RadioConfig {
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }

    /// `4π/λ²`, the gain-to-density conversion factor.
    pub fn density_factor(&self) -> f64 {
        4.0 * PI / (self.wavelength * self.wavelength)
    }

    /// Every field must be positive; a zero power cap is legal but degenerate.
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        if !(self.noise_psd > 0.0) {
            return Err(invalid("noise_psd", "must be positive"));
        }
        if !(self.wavelength > 0.0) {
            return Err(invalid("wavelength", "must be positive"));
        }
        if !(self.max_tx_power >= 0.0) {
            return Err(invalid("max_tx_power", "must be non-negative"));
        }
        Ok(())
    }
}

/// Exposure pixels and their objective weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelSet {
    pub positions: Vec<Position3D>,
    pub weights: Vec<f64>,
}

impl PixelSet {
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.weights.len() {
            return Err(Error::DimensionMismatch("pixel positions vs weights".into()));
        }
        if self.positions.is_empty() {
            return Err(Error::Empty("pixel set"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("pixels.weights", "must be non-negative"));
        }
        Ok(())
    }

    pub fn has_positive_weight(&self) -> bool {
        self.weights.iter().any(|w| *w > 0.0)
    }
}

/// `|w_aᴴ H w_u|²`.
pub fn effective_gain(h: &DMatrix<Complex64>, w_u: &DVector<Complex64>, w_a: &DVector<Complex64>) -> f64 {
    w_a.dotc(&(h * w_u)).norm_sqr()
}

/// `|h_p w_u|²`.
pub fn pixel_gain(h_p: &RowDVector<Complex64>, w_u: &DVector<Complex64>) -> f64 {
    (h_p * w_u)[(0, 0)].norm_sqr()
}

/// Shannon rate for a given effective gain.
pub fn rate_from_gain(gain: f64, p_tx: f64, cfg: &RadioConfig) -> f64 {
    cfg.bandwidth * (gain * p_tx / cfg.noise_power()).ln_1p() / std::f64::consts::LN_2
}

pub fn uplink_rate(
    h: &DMatrix<Complex64>,
    w_u: &DVector<Complex64>,
    w_a: &DVector<Complex64>,
    p_tx: f64,
    cfg: &RadioConfig,
) -> Result<f64> {
    if !(p_tx >= 0.0) {
        return Err(invalid("p_tx", "transmit power must be non-negative"));
    }
    Ok(rate_from_gain(effective_gain(h, w_u, w_a), p_tx, cfg))
}

/// Incident power density `(4π/λ²)·P·|h_p w_u|²` in W/m².
pub fn pixel_power_density(h_p: &RowDVector<Complex64>, w_u: &DVector<Complex64>, p_tx: f64, cfg: &RadioConfig) -> Result<f64> {
    if !(p_tx >= 0.0) {
        return Err(invalid("p_tx", "transmit power must be non-negative"));
    }
    Ok(cfg.density_factor() * p_tx * pixel_gain(h_p, w_u))
}

/// `Σ_p ω_p · density_p`.
pub fn weighted_emfe(densities: &[f64], pixels: &PixelSet) -> Result<f64> {
    if densities.len() != pixels.weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} densities for {} pixels",
            densities.len(),
            pixels.weights.len()
        )));
    }
    Ok(densities.iter().zip(&pixels.weights).map(|(d, w)| d * w).sum())
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> RadioConfig {
        RadioConfig {
            bandwidth: 8e6,
            noise_psd: dbm_to_watts(-174.0),
            wavelength: 299_792_458.0 / 28e9,
            max_tx_power: 0.1,
        }
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
        let v = DVector::from_fn(n, |_, _| rand_c(rng));
        let nn = v.norm();
        v.unscale(nn)
    }

    #[test]
    fn zero_power_gives_zero_rate_and_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = DMatrix::from_fn(4, 4, |_, _| rand_c(&mut rng));
        let w = unit(&mut rng, 4);
        assert_eq!(uplink_rate(&h, &w, &w, 0.0, &cfg()).unwrap(), 0.0);
        let hp = RowDVector::from_fn(4, |_, _| rand_c(&mut rng));
        assert_eq!(pixel_power_density(&hp, &w, 0.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn unit_snr_gives_bandwidth() {
        let c = cfg();
        let h = DMatrix::from_element(1, 1, Complex64::new(1e-6, 0.0));
        let w = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let p = c.noise_power() / 1e-12;
        let r = uplink_rate(&h, &w, &w, p, &c).unwrap();
        assert!((r - c.bandwidth).abs() < 1e-6 * c.bandwidth);
    }

    #[test]
    fn negative_power_rejected() {
        let h = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let w = DVector::from_element(1, Complex64::new(1.0, 0.0));
        assert!(uplink_rate(&h, &w, &w, -1.0, &cfg()).is_err());
    }

    #[test]
    fn quadratic_form_matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = DMatrix::from_fn(8, 8, |_, _| rand_c(&mut rng));
            let wu = unit(&mut rng, 8);
            let wa = unit(&mut rng, 8);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..8 {
                for j in 0..8 {
                    acc += wa[i].conj() * h[(i, j)] * wu[j];
                }
            }
            let g = effective_gain(&h, &wu, &wa);
            assert!((g - acc.norm_sqr()).abs() < 1e-12 * g.max(1.0));
            let c = cfg();
            let p = 0.05;
            let direct = c.bandwidth * (1.0 + acc.norm_sqr() * p / (c.noise_psd * c.bandwidth)).log2();
            let r = uplink_rate(&h, &wu, &wa, p, &c).unwrap();
            assert!((r - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn isotropic_free_space_density() {
        let c = cfg();
        let d = 3.0;
        let amp = c.wavelength / (4.0 * PI * d);
        let hp = RowDVector::from_element(1, Complex64::new(0.0, amp));
        let w = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let p = 0.07;
        let got = pixel_power_density(&hp, &w, p, &c).unwrap();
        let want = p / (4.0 * PI * d * d);
        assert!((got - want).abs() < 1e-14 * want);
    }

    #[test]
    fn weighted_emfe_examples() {
        let px = |w: Vec<f64>| PixelSet {
            positions: vec![Position3D::new(0.0, 0.0, 0.0); w.len()],
            weights: w,
        };
        assert_eq!(weighted_emfe(&[5.0, 7.0, 9.0], &px(vec![1.0, 0.0, 0.0])).unwrap(), 5.0);
        assert_eq!(weighted_emfe(&[0.0, 0.0], &px(vec![0.3, 0.7])).unwrap(), 0.0);
        assert_eq!(weighted_emfe(&[2.0, 4.0], &px(vec![0.5, 0.5])).unwrap(), 3.0);
        assert!(matches!(
            weighted_emfe(&[1.0], &px(vec![0.5, 0.5])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pixel_set_validation() {
        let mut px = PixelSet {
            positions: vec![Position3D::new(0.0, 0.0, 0.0)],
            weights: vec![-1.0],
        };
        assert!(px.validate().is_err());
        px.weights = vec![0.0];
        assert!(px.validate().is_ok());
        assert!(!px.has_positive_weight());
    }

    #[test]
    fn dbm_round_trip() {
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance(seed: u64) -> (DMatrix<Complex64>, DVector<Complex64>, DVector<Complex64>, RowDVector<Complex64>) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = DMatrix::from_fn(8, 8, |_, _| rand_c(&mut rng) * 1e-4);
            let wu = unit(&mut rng, 8);
            let wa = unit(&mut rng, 8);
            let hp = RowDVector::from_fn(8, |_, _| rand_c(&mut rng) * 1e-3);
            (h, wu, wa, hp)
        }

        proptest! {
            #[test]
            fn rate_increasing_and_concave(seed in 0u64..1000) {
                let (h, wu, wa, _) = instance(seed);
                let c = cfg();
                let step = c.max_tx_power / 64.0;
                let r: Vec<f64> = (0..=64).map(|i| uplink_rate(&h, &wu, &wa, step * i as f64, &c).unwrap()).collect();
                for i in 1..r.len() {
                    prop_assert!(r[i] > r[i - 1]);
                }
                for i in 1..r.len() - 1 {
                    prop_assert!(r[i + 1] - 2.0 * r[i] + r[i - 1] <= 1e-9 * r[i]);
                }
            }

            #[test]
            fn density_linear_in_power(seed in 0u64..1000, p in 0.0f64..1.0, alpha in 0.0f64..10.0) {
                let (_, wu, _, hp) = instance(seed);
                let c = cfg();
                let base = pixel_power_density(&hp, &wu, p, &c).unwrap();
                let scaled = pixel_power_density(&hp, &wu, alpha * p, &c).unwrap();
                prop_assert!((scaled - alpha * base).abs() <= 1e-14 * scaled.abs().max(1e-300));
            }

            #[test]
            fn common_phase_rotation_invariance(seed in 0u64..1000, phi in 0.0f64..6.3) {
                let (h, wu, wa, hp) = instance(seed);
                let c = cfg();
                let rot = wu.clone() * Complex64::from_polar(1.0, phi);
                let r0 = uplink_rate(&h, &wu, &wa, 0.05, &c).unwrap();
                let r1 = uplink_rate(&h, &rot, &wa, 0.05, &c).unwrap();
                prop_assert!((r0 - r1).abs() <= 1e-9 * r0);
                let d0 = pixel_power_density(&hp, &wu, 0.05, &c).unwrap();
                let d1 = pixel_power_density(&hp, &rot, 0.05, &c).unwrap();
                prop_assert!((d0 - d1).abs() <= 1e-12 * d0);
            }

            #[test]
            fn rate_below_spectral_bound(seed in 0u64..1000) {
                let (h, wu, wa, _) = instance(seed);
                let c = cfg();
                let sigma = h.clone().singular_values()[0];
                let bound = c.bandwidth * (1.0 + sigma * sigma * 0.1 / c.noise_power()).log2();
                prop_assert!(uplink_rate(&h, &wu, &wa, 0.1, &c).unwrap() <= bound * (1.0 + 1e-12));
            }
        }
    }
}
