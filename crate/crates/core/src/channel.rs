//! Per-slot Rician channel generation and end-to-end / per-pixel composition.
//!
//! Array-response conventions: the UE enters every block through the
//! conjugate of its steering vector, every other array through the plain
//! steering vector. With this choice a steering-vector precoder beams toward
//! its angle, and a uniform RIS phase profile reflects specularly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{azimuth_between, element_gain, steering_vector, ArraySpec, Position3D, SPEED_OF_LIGHT};

/// Rician fading and path-loss parameters of one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianParams {
    pub carrier_frequency: f64,
    /// Linear LOS-to-diffuse power ratio; `f64::INFINITY` gives a pure LOS link.
    pub k_factor: f64,
    pub pathloss_exponent: f64,
    /// Power gain at 1 m.
    pub reference_pathloss: f64,
}

impl RicianParams {
    /// Free-space parameters: exponent 2 and Friis reference `(λ/4π)²`.
    pub fn free_space(carrier_frequency: f64, k_factor: f64) -> Self {
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Self {
            carrier_frequency,
            k_factor,
            pathloss_exponent: 2.0,
            reference_pathloss: (wavelength / (4.0 * PI)).powi(2),
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn pathloss(&self, distance: f64) -> f64 {
        self.reference_pathloss * distance.powf(-self.pathloss_exponent)
    }

    /// Amplitude weights of the LOS and diffuse parts.
    fn split(&self) -> (f64, f64) {
        if self.k_factor.is_infinite() {
            (1.0, 0.0)
        } else {
            let k = self.k_factor;
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0) {
            return Err(invalid("carrier_frequency", "must be positive"));
        }
        if !(self.k_factor >= 0.0) {
            return Err(invalid("k_factor", "must be non-negative"));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(invalid("pathloss_exponent", "must be at least 2"));
        }
        if !(self.reference_pathloss > 0.0) {
            return Err(invalid("reference_pathloss", "must be positive"));
        }
        Ok(())
    }
}

/// Link parameters per block class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub direct: RicianParams,
    pub ue_ris: RicianParams,
    pub ris_ap: RicianParams,
    pub ue_pixel: RicianParams,
    pub ris_pixel: RicianParams,
}

impl LinkSet {
    pub fn uniform(params: RicianParams) -> Self {
        Self {
            direct: params,
            ue_ris: params,
            ris_ap: params,
            ue_pixel: params,
            ris_pixel: params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.direct, &self.ue_ris, &self.ris_ap, &self.ue_pixel, &self.ris_pixel] {
            p.validate()?;
        }
        Ok(())
    }
}

/// Node positions and arrays of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ue: Position3D,
    pub ap: Position3D,
    pub ris: Position3D,
    pub pixels: Vec<Position3D>,
    pub ue_array: ArraySpec,
    pub ap_array: ArraySpec,
    pub ris_array: ArraySpec,
}

impl Scene {
    /// Angle of `to` as seen by the array at `from`.
    fn angle(from: &Position3D, spec: &ArraySpec, to: &Position3D) -> Result<f64> {
        azimuth_between(from, to, spec.boresight_azimuth)
    }

    pub fn ue_angle_to_ap(&self) -> Result<f64> {
        Self::angle(&self.ue, &self.ue_array, &self.ap)
    }

    pub fn ue_angle_to_ris(&self) -> Result<f64> {
        Self::angle(&self.ue, &self.ue_array, &self.ris)
    }

    pub fn ap_angle_to_ue(&self) -> Result<f64> {
        Self::angle(&self.ap, &self.ap_array, &self.ue)
    }

    pub fn ap_angle_to_ris(&self) -> Result<f64> {
        Self::angle(&self.ap, &self.ap_array, &self.ris)
    }

    pub fn ris_angle_to_ue(&self) -> Result<f64> {
        Self::angle(&self.ris, &self.ris_array, &self.ue)
    }

    pub fn ris_angle_to_ap(&self) -> Result<f64> {
        Self::angle(&self.ris, &self.ris_array, &self.ap)
    }
}

/// A RIS configuration, one phase per element.
#[derive(Debug, Clone, PartialEq)]
pub struct RisProfile {
    pub phases: Vec<f64>,
}

impl RisProfile {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of the reflection matrix, `e^{jθ_i}`.
    pub fn diagonal(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }
}

/// One slot's realization of every channel block.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChannels {
    /// N_a × N_u
    pub h_direct: DMatrix<Complex64>,
    /// M × N_u
    pub h_ue_ris: DMatrix<Complex64>,
    /// N_a × M
    pub h_ris_ap: DMatrix<Complex64>,
    /// One row (1 × N_u) per pixel.
    pub h_direct_pixel: DMatrix<Complex64>,
    /// One row (1 × M) per pixel.
    pub h_ris_pixel: DMatrix<Complex64>,
}

impl SlotChannels {
    pub fn num_pixels(&self) -> usize {
        self.h_direct_pixel.nrows()
    }

    pub fn ue_elements(&self) -> usize {
        self.h_direct.ncols()
    }

    pub fn ap_elements(&self) -> usize {
        self.h_direct.nrows()
    }

    pub fn ris_elements(&self) -> usize {
        self.h_ue_ris.nrows()
    }

    /// Copy with the UE→RIS block zeroed, which removes every RIS-reflected path.
    pub fn without_ris(&self) -> SlotChannels {
        let mut out = self.clone();
        out.h_ue_ris.fill(Complex64::new(0.0, 0.0));
        out
    }

    fn check(&self) -> Result<()> {
        let (na, nu) = self.h_direct.shape();
        let m = self.h_ue_ris.nrows();
        let ok = self.h_ue_ris.ncols() == nu
            && self.h_ris_ap.shape() == (na, m)
            && self.h_direct_pixel.ncols() == nu
            && self.h_ris_pixel.ncols() == m
            && self.h_ris_pixel.nrows() == self.h_direct_pixel.nrows();
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("inconsistent slot channel blocks".into()))
        }
    }
}

/// `H_d + H_{r,a} · diag(e^{jθ}) · H_{u,r}`.
pub fn compose_e2e(ch: &SlotChannels, ris: &RisProfile) -> Result<DMatrix<Complex64>> {
    ch.check()?;
    if ris.len() != ch.ris_elements() {
        return Err(Error::DimensionMismatch(format!(
            "RIS profile has {} phases, channel has {} elements",
            ris.len(),
            ch.ris_elements()
        )));
    }
    let mut scaled = ch.h_ris_ap.clone();
    for (j, d) in ris.diagonal().into_iter().enumerate() {
        scaled.column_mut(j).apply(|x| *x *= d);
    }
    Ok(&ch.h_direct + scaled * &ch.h_ue_ris)
}

/// `h_{d,p} + h_{r,p} · diag(e^{jθ}) · H_{u,r}` for pixel `p`.
pub fn compose_pixel(ch: &SlotChannels, ris: &RisProfile, p: usize) -> Result<RowDVector<Complex64>> {
    ch.check()?;
    if p >= ch.num_pixels() {
        return Err(Error::IndexOutOfRange {
            index: p,
            len: ch.num_pixels(),
        });
    }
    if ris.len() != ch.ris_elements() {
        return Err(Error::DimensionMismatch("RIS profile length".into()));
    }
    let diag = ris.diagonal();
    let reflected = RowDVector::from_iterator(
        ch.ris_elements(),
        ch.h_ris_pixel.row(p).iter().zip(diag.iter()).map(|(h, d)| h * d),
    );
    Ok(ch.h_direct_pixel.row(p).into_owned() + reflected * &ch.h_ue_ris)
}

/// Deterministic LOS part and diffuse scale of one block.
#[derive(Debug, Clone)]
struct BlockModel {
    los: DMatrix<Complex64>,
    diffuse_std: f64,
}

impl BlockModel {
    /// `rx_resp` is the receive column response, `tx_resp` the transmit row response,
    /// both already in their array's convention. `gain` is the product of peak gains.
    fn new(rx_resp: &[Complex64], tx_resp: &[Complex64], los_amplitude: f64, pathloss: f64, params: &RicianParams) -> Self {
        let (w_los, w_nlos) = params.split();
        let scale = pathloss.sqrt();
        let a = DVector::from_column_slice(rx_resp);
        let b = RowDVector::from_row_slice(tx_resp);
        let los = (a * b) * Complex64::new(scale * w_los * los_amplitude, 0.0);
        Self {
            los,
            diffuse_std: scale * w_nlos,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let (r, c) = self.los.shape();
        let mut out = self.los.clone();
        if self.diffuse_std == 0.0 {
            return out;
        }
        let s = self.diffuse_std * std::f64::consts::FRAC_1_SQRT_2;
        // row-major draw order
        for i in 0..r {
            for j in 0..c {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                out[(i, j)] += Complex64::new(s * re, s * im);
            }
        }
        out
    }
}

/// Precomputed per-scene channel model; draws one [`SlotChannels`] per call.
#[derive(Debug, Clone)]
pub struct ChannelGenerator {
    direct: BlockModel,
    ue_ris: BlockModel,
    ris_ap: BlockModel,
    ue_pixel: Vec<BlockModel>,
    ris_pixel: Vec<BlockModel>,
}

fn conj(v: Vec<Complex64>) -> Vec<Complex64> {
    v.into_iter().map(|z| z.conj()).collect()
}

impl ChannelGenerator {
    pub fn new(scene: &Scene, links: &LinkSet) -> Result<Self> {
        links.validate()?;
        for a in [&scene.ue_array, &scene.ap_array, &scene.ris_array] {
            a.validate()?;
        }
        let lambda = links.direct.wavelength();
        let (ue, ap, ris) = (&scene.ue_array, &scene.ap_array, &scene.ris_array);
        let ue_tx = |angle: f64| conj(steering_vector(ue, lambda, angle));
        let resp = |spec: &ArraySpec, angle: f64| steering_vector(spec, lambda, angle);

        let link = |from: &Position3D,
                    from_spec: Option<&ArraySpec>,
                    to: &Position3D,
                    to_spec: Option<&ArraySpec>,
                    params: &RicianParams|
         -> Result<(f64, f64, f64, f64)> {
            let d = from.distance(to);
            if d < 1e-12 {
                return Err(Error::DegenerateGeometry("coincident link endpoints".into()));
            }
            let tx_angle = match from_spec {
                Some(s) => azimuth_between(from, to, s.boresight_azimuth)?,
                None => 0.0,
            };
            let rx_angle = match to_spec {
                Some(s) => azimuth_between(to, from, s.boresight_azimuth)?,
                None => 0.0,
            };
            let mut gain = 1.0;
            let mut amp = 1.0;
            if let Some(s) = from_spec {
                gain *= s.peak_gain_linear();
                amp *= element_gain(s, tx_angle);
            }
            if let Some(s) = to_spec {
                gain *= s.peak_gain_linear();
                amp *= element_gain(s, rx_angle);
            }
            Ok((tx_angle, rx_angle, amp, params.pathloss(d) * gain))
        };

        let (tx, rx, amp, pl) = link(&scene.ue, Some(ue), &scene.ap, Some(ap), &links.direct)?;
        let direct = BlockModel::new(&resp(ap, rx), &ue_tx(tx), amp, pl, &links.direct);

        let (tx, rx, amp, pl) = link(&scene.ue, Some(ue), &scene.ris, Some(ris), &links.ue_ris)?;
        let ue_ris = BlockModel::new(&resp(ris, rx), &ue_tx(tx), amp, pl, &links.ue_ris);

        let (tx, rx, amp, pl) = link(&scene.ris, Some(ris), &scene.ap, Some(ap), &links.ris_ap)?;
        let ris_ap = BlockModel::new(&resp(ap, rx), &resp(ris, tx), amp, pl, &links.ris_ap);

        let one = [Complex64::new(1.0, 0.0)];
        let mut ue_pixel = Vec::with_capacity(scene.pixels.len());
        let mut ris_pixel = Vec::with_capacity(scene.pixels.len());
        for px in &scene.pixels {
            let (tx, _, amp, pl) = link(&scene.ue, Some(ue), px, None, &links.ue_pixel)?;
            ue_pixel.push(BlockModel::new(&one, &ue_tx(tx), amp, pl, &links.ue_pixel));
            let (tx, _, amp, pl) = link(&scene.ris, Some(ris), px, None, &links.ris_pixel)?;
            ris_pixel.push(BlockModel::new(&one, &resp(ris, tx), amp, pl, &links.ris_pixel));
        }

        Ok(Self {
            direct,
            ue_ris,
            ris_ap,
            ue_pixel,
            ris_pixel,
        })
    }

    /// Draws all blocks; the draw order is fixed so a seeded stream is reproducible.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> SlotChannels {
        let h_direct = self.direct.draw(rng);
        let h_ue_ris = self.ue_ris.draw(rng);
        let h_ris_ap = self.ris_ap.draw(rng);
        let nu = h_direct.ncols();
        let m = h_ue_ris.nrows();
        let np = self.ue_pixel.len();
        let mut h_direct_pixel = DMatrix::zeros(np, nu);
        let mut h_ris_pixel = DMatrix::zeros(np, m);
        for p in 0..np {
            h_direct_pixel.row_mut(p).copy_from(&self.ue_pixel[p].draw(rng).row(0));
            h_ris_pixel.row_mut(p).copy_from(&self.ris_pixel[p].draw(rng).row(0));
        }
        SlotChannels {
            h_direct,
            h_ue_ris,
            h_ris_ap,
            h_direct_pixel,
            h_ris_pixel,
        }
    }
}

/// Convenience wrapper: build the model and draw a single slot.
pub fn generate_slot_channels<R: Rng + ?Sized>(scene: &Scene, links: &LinkSet, rng: &mut R) -> Result<SlotChannels> {
    Ok(ChannelGenerator::new(scene, links)?.generate(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const F: f64 = 28e9;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_scene(nu: usize, na: usize, m: usize) -> Scene {
        let lambda = SPEED_OF_LIGHT / F;
        Scene {
            ue: Position3D::new(0.0, 50.0, 1.0),
            ap: Position3D::new(50.0, 50.0, 1.0),
            ris: Position3D::new(4.0, 48.0, 1.0),
            pixels: vec![Position3D::new(1.0, 50.0, 1.0)],
            ue_array: ArraySpec::half_wavelength(nu, lambda, 0.0),
            ap_array: ArraySpec::half_wavelength(na, lambda, PI),
            ris_array: ArraySpec::half_wavelength(m, lambda, PI / 2.0),
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cc: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(r, cc, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_channels(rng: &mut ChaCha8Rng, nu: usize, na: usize, m: usize, np: usize) -> SlotChannels {
        SlotChannels {
            h_direct: random_matrix(rng, na, nu),
            h_ue_ris: random_matrix(rng, m, nu),
            h_ris_ap: random_matrix(rng, na, m),
            h_direct_pixel: random_matrix(rng, np, nu),
            h_ris_pixel: random_matrix(rng, np, m),
        }
    }

    fn random_profile(rng: &mut ChaCha8Rng, m: usize) -> RisProfile {
        RisProfile::new((0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect())
    }

    /// Triple-loop reference for `H_d + H_ra diag(e^{jθ}) H_ur`.
    fn naive_e2e(ch: &SlotChannels, ris: &RisProfile) -> DMatrix<Complex64> {
        let (na, nu) = ch.h_direct.shape();
        let m = ris.phases.len();
        let mut out = ch.h_direct.clone();
        for i in 0..na {
            for j in 0..nu {
                let mut acc = c(0.0, 0.0);
                for k in 0..m {
                    let (s, co) = ris.phases[k].sin_cos();
                    acc += ch.h_ris_ap[(i, k)] * c(co, s) * ch.h_ue_ris[(k, j)];
                }
                out[(i, j)] += acc;
            }
        }
        out
    }

    #[test]
    fn blocked_ris_path_leaves_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ch = random_channels(&mut rng, 3, 4, 5, 2);
        ch.h_ris_ap.fill(c(0.0, 0.0));
        let h = compose_e2e(&ch, &random_profile(&mut rng, 5)).unwrap();
        assert_eq!(h, ch.h_direct);
    }

    #[test]
    fn scalar_composition() {
        let ch = SlotChannels {
            h_direct: DMatrix::from_element(1, 1, c(0.3, -0.2)),
            h_ue_ris: DMatrix::from_element(1, 1, c(1.5, 0.5)),
            h_ris_ap: DMatrix::from_element(1, 1, c(-0.7, 0.1)),
            h_direct_pixel: DMatrix::from_element(1, 1, c(0.2, 0.2)),
            h_ris_pixel: DMatrix::from_element(1, 1, c(0.4, -1.0)),
        };
        let theta: f64 = 0.9;
        let e = c(theta.cos(), theta.sin());
        let ris = RisProfile::new(vec![theta]);
        let h = compose_e2e(&ch, &ris).unwrap()[(0, 0)];
        let want = c(0.3, -0.2) + c(-0.7, 0.1) * e * c(1.5, 0.5);
        assert!((h - want).norm() < 1e-15);
        let hp = compose_pixel(&ch, &ris, 0).unwrap()[0];
        let want = c(0.2, 0.2) + c(0.4, -1.0) * e * c(1.5, 0.5);
        assert!((hp - want).norm() < 1e-15);
    }

    #[test]
    fn e2e_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 8, 8, 20, 3);
            let ris = random_profile(&mut rng, 20);
            let fast = compose_e2e(&ch, &ris).unwrap();
            let slow = naive_e2e(&ch, &ris);
            assert!((fast - slow).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn pixel_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channels(&mut rng, 8, 8, 20, 3);
        let ris = random_profile(&mut rng, 20);
        for p in 0..3 {
            let fast = compose_pixel(&ch, &ris, p).unwrap();
            for j in 0..8 {
                let mut want = ch.h_direct_pixel[(p, j)];
                for k in 0..20 {
                    let (s, co) = ris.phases[k].sin_cos();
                    want += ch.h_ris_pixel[(p, k)] * c(co, s) * ch.h_ue_ris[(k, j)];
                }
                assert!((fast[j] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pixel_without_ris_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ch = random_channels(&mut rng, 4, 4, 6, 2);
        ch.h_ris_pixel.fill(c(0.0, 0.0));
        let hp = compose_pixel(&ch, &random_profile(&mut rng, 6), 1).unwrap();
        assert_eq!(hp, ch.h_direct_pixel.row(1).into_owned());
    }

    #[test]
    fn composition_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_channels(&mut rng, 2, 2, 3, 1);
        assert!(matches!(
            compose_e2e(&ch, &RisProfile::new(vec![0.0; 2])),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            compose_pixel(&ch, &RisProfile::new(vec![0.0; 3]), 1),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn direct_term_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channels(&mut rng, 4, 5, 6, 1);
        let ris = random_profile(&mut rng, 6);
        let alpha = c(2.5, -1.0);
        let mut scaled = ch.clone();
        scaled.h_direct *= alpha;
        let base = compose_e2e(&ch, &ris).unwrap();
        let got = compose_e2e(&scaled, &ris).unwrap();
        let want = base + &ch.h_direct * (alpha - c(1.0, 0.0));
        assert!((got - want).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn identical_profiles_give_identical_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = random_channels(&mut rng, 8, 8, 20, 1);
        let a = random_profile(&mut rng, 20);
        let b = a.clone();
        assert_eq!(compose_e2e(&ch, &a).unwrap(), compose_e2e(&ch, &b).unwrap());
    }

    #[test]
    fn pure_los_is_rank_one() {
        let scene = small_scene(8, 8, 20);
        let links = LinkSet::uniform(RicianParams::free_space(F, f64::INFINITY));
        let g = ChannelGenerator::new(&scene, &links).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = g.generate(&mut r1);
        let b = g.generate(&mut r2);
        assert_eq!(a, b);
        let sv = a.h_direct.clone().svd(false, false).singular_values;
        assert!(sv[1] / sv[0] < 1e-10);
        // UE→AP along the UE boresight; AP sees the UE on its boresight too.
        let pl = links.direct.pathloss(50.0);
        for z in a.h_direct.iter() {
            assert!((z.norm() - pl.sqrt()).abs() < 1e-12 * pl.sqrt());
        }
    }

    #[test]
    fn rayleigh_power_matches_pathloss() {
        let mut scene = small_scene(1, 1, 1);
        scene.ue_array.element_exponent = 0.0;
        scene.ap_array.element_exponent = 0.0;
        scene.ris_array.element_exponent = 0.0;
        let links = LinkSet::uniform(RicianParams::free_space(F, 0.0));
        let g = ChannelGenerator::new(&scene, &links).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += g.generate(&mut rng).h_direct[(0, 0)].norm_sqr();
        }
        let pl = links.direct.pathloss(50.0);
        assert!(((acc / n as f64) / pl - 1.0).abs() < 0.02);
    }

    #[test]
    fn free_space_single_antenna_matches_friis() {
        let scene = small_scene(1, 1, 1);
        let lambda = SPEED_OF_LIGHT / F;
        for k in [0.0, 1.0, 10.0] {
            let links = LinkSet::uniform(RicianParams::free_space(F, k));
            let g = ChannelGenerator::new(&scene, &links).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let n = 100_000;
            let mut acc = 0.0;
            for _ in 0..n {
                acc += g.generate(&mut rng).h_direct[(0, 0)].norm_sqr();
            }
            let friis = (lambda / (4.0 * PI * 50.0)).powi(2);
            assert!(((acc / n as f64) / friis - 1.0).abs() < 0.02, "K={k}");
        }
    }

    #[test]
    fn frobenius_power_tracks_pathloss() {
        let mut scene = small_scene(8, 8, 20);
        for a in [&mut scene.ue_array, &mut scene.ap_array, &mut scene.ris_array] {
            a.element_exponent = 0.0;
        }
        // RIS facing the UE so both endpoints lie in front of it.
        scene.ris_array.boresight_azimuth = scene.ris.heading_to(&scene.ue).unwrap();
        for k in [0.0, 3.0, 30.0] {
            let links = LinkSet::uniform(RicianParams::free_space(F, k));
            let g = ChannelGenerator::new(&scene, &links).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let n = 2_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let h = g.generate(&mut rng).h_ue_ris;
                acc += h.iter().map(|z| z.norm_sqr()).sum::<f64>() / (h.nrows() * h.ncols()) as f64;
            }
            let pl = links.ue_ris.pathloss(scene.ue.distance(&scene.ris));
            assert!(((acc / n as f64) / pl - 1.0).abs() < 0.02, "K={k}");
        }
    }

    #[test]
    fn same_seed_same_channels() {
        let scene = small_scene(8, 8, 20);
        let links = LinkSet::uniform(RicianParams::free_space(F, 10.0));
        let a = generate_slot_channels(&scene, &links, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_slot_channels(&scene, &links, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h_direct.shape(), (8, 8));
        assert_eq!(a.h_ue_ris.shape(), (20, 8));
        assert_eq!(a.h_ris_ap.shape(), (8, 20));
        assert_eq!(a.h_direct_pixel.shape(), (1, 8));
        assert_eq!(a.h_ris_pixel.shape(), (1, 20));
    }

    #[test]
    fn degenerate_geometry_propagates() {
        let mut scene = small_scene(2, 2, 2);
        scene.ris = scene.ue;
        let links = LinkSet::uniform(RicianParams::free_space(F, 10.0));
        assert!(matches!(
            ChannelGenerator::new(&scene, &links),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn without_ris_kills_reflected_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ch = random_channels(&mut rng, 4, 4, 6, 2).without_ris();
        let ris = random_profile(&mut rng, 6);
        assert_eq!(compose_e2e(&ch, &ris).unwrap(), ch.h_direct);
        assert_eq!(compose_pixel(&ch, &ris, 0).unwrap(), ch.h_direct_pixel.row(0).into_owned());
    }
}
