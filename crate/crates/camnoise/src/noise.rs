//! Physics of the sensor signal chain: per-source noise sigma prediction in
//! DN, patch corruption with sampled noise realizations, and the
//! one-parameter-at-a-time sensitivity sweep.
//!
//! The model tracks three time-varying sources through the photon-transfer
//! chain:
//!
//! - **Photon shot noise (PN)** — Poisson fluctuation of collected
//!   photoelectrons; the mean electron count is linear in intensity with the
//!   full well mapping to 255 DN after digital gain.
//! - **Dark-current shot noise (DCSN)** — Poisson fluctuation of thermally
//!   generated electrons integrated over the exposure; the mean dark level
//!   itself is treated as calibrated away (camera offset 0), leaving only the
//!   fluctuation.
//! - **Readout noise (RN)** — sense-node reset (kTC) noise, cancelled by
//!   correlated double sampling fully on CCD and partially on CMOS, plus
//!   source-follower noise integrated from its power spectral density under
//!   the CDS transfer function.
//!
//! Electron-domain sigmas propagate to DN through a single factor
//! `(255 / full_well) · 10^(gain_dB/20)`: the ADC gain is anchored so a full
//! well reads 255 DN at 0 dB, which makes the mean digital signal equal the
//! clean intensity at every gain. Predicted totals additionally account for
//! the observable effect of quantization and clipping to `[0, 255]` at the
//! patch's mean intensity (an exact computation over the 256 output levels,
//! not a heuristic), scaled uniformly onto the components so the quadrature
//! composition stays exact.

use camnoise_tensor::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::metadata::{CameraMetadata, SensorType, FIELD_RANGES};
use crate::patch::Patch;

/// Boltzmann constant in J/K.
const BOLTZMANN_J: f64 = 1.380649e-23;
/// Boltzmann constant in eV/K.
const BOLTZMANN_EV: f64 = 8.617333262e-5;
/// Elementary charge in coulombs.
const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Proportionality constant of the silicon dark-current rate
/// (electrons · s⁻¹ · cm⁻² scaling).
const DARK_CURRENT_COEFF: f64 = 2.55e15;
/// Frequency-grid points for the source-follower PSD integral.
const SF_GRID_POINTS: usize = 4096;

/// The per-source noise decomposition `(σ_PN, σ_DCSN, σ_RN, ξ, σ_Total)` in
/// DN.
///
/// [`NoiseLevels::compose`] is the only constructor, so the composition
/// identity `sigma_total = sqrt(σ_PN² + σ_DCSN² + σ_RN²) + ξ` holds on every
/// value by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevels {
    sigma_pn: f64,
    sigma_dcsn: f64,
    sigma_rn: f64,
    xi: f64,
    sigma_total: f64,
}

impl NoiseLevels {
    /// Composes per-source sigmas and a mismatch term into a total.
    ///
    /// # Panics
    ///
    /// Panics when a sigma is negative or any value is non-finite — those
    /// indicate a caller bug, not recoverable input.
    pub fn compose(sigma_pn: f64, sigma_dcsn: f64, sigma_rn: f64, xi: f64) -> Self {
        assert!(
            sigma_pn >= 0.0 && sigma_dcsn >= 0.0 && sigma_rn >= 0.0,
            "negative noise sigma ({sigma_pn}, {sigma_dcsn}, {sigma_rn})"
        );
        assert!(
            sigma_pn.is_finite() && sigma_dcsn.is_finite() && sigma_rn.is_finite() && xi.is_finite(),
            "non-finite noise component"
        );
        let quadrature =
            (sigma_pn * sigma_pn + sigma_dcsn * sigma_dcsn + sigma_rn * sigma_rn).sqrt();
        NoiseLevels {
            sigma_pn,
            sigma_dcsn,
            sigma_rn,
            xi,
            sigma_total: quadrature + xi,
        }
    }

    /// Photon-shot-noise sigma in DN.
    pub fn sigma_pn(&self) -> f64 {
        self.sigma_pn
    }

    /// Dark-current-shot-noise sigma in DN.
    pub fn sigma_dcsn(&self) -> f64 {
        self.sigma_dcsn
    }

    /// Readout-noise sigma in DN.
    pub fn sigma_rn(&self) -> f64 {
        self.sigma_rn
    }

    /// Signed model-minus-image mismatch in DN.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Composed total: quadrature of the three sources plus `xi`.
    pub fn sigma_total(&self) -> f64 {
        self.sigma_total
    }

    /// The quadrature part of the total, `sigma_total − xi`.
    pub fn quadrature_total(&self) -> f64 {
        self.sigma_total - self.xi
    }
}

/// Mean dark-current electron count for one pixel over the exposure.
///
/// Uses the silicon Arrhenius form with the Varshni band gap:
/// `rate ∝ area · DFM · T^1.5 · exp(−E_gap / (2 k_B T))`, multiplied by the
/// exposure time. Strictly increasing in temperature, exposure time,
/// figure of merit, and pixel size.
pub fn dark_current_electrons(meta: &CameraMetadata) -> f64 {
    let t_k = meta.temperature_kelvin();
    let band_gap_ev = 1.1557 - 7.021e-4 * t_k * t_k / (1108.0 + t_k);
    let pixel_area_cm2 = (meta.sensor_pixel_size * 0.1) * (meta.sensor_pixel_size * 0.1);
    let rate = DARK_CURRENT_COEFF
        * pixel_area_cm2
        * meta.dark_signal_fom
        * t_k.powf(1.5)
        * (-band_gap_ev / (2.0 * BOLTZMANN_EV * t_k)).exp();
    rate * meta.exposure_time
}

/// Sense-node reset (kTC) noise sigma in volts.
///
/// `sqrt(k_B T A_SN / q)`, scaled by the reset factor on CMOS; zero on CCD,
/// where correlated double sampling cancels the reset level exactly.
pub fn reset_sigma_volts(meta: &CameraMetadata) -> f64 {
    match meta.sensor_type {
        SensorType::Ccd => 0.0,
        SensorType::Cmos => {
            meta.sense_node_reset_factor
                * (BOLTZMANN_J * meta.temperature_kelvin() * meta.sense_node_gain
                    / ELEMENTARY_CHARGE)
                    .sqrt()
        }
    }
}

/// Source-follower noise sigma in volts.
///
/// Integrates the PSD — white (`W²`), flicker (`W² f_c / f`), and burst
/// (random telegraph signal) terms — under the CDS transfer function
/// `|H(f)|² = (2 − 2 cos(2π f t_s2s)) / (1 + (2π f τ_D)²)` with
/// `τ_D = cds_time_factor · t_s2s`, over a log-spaced trapezoidal grid from
/// 1 Hz to the pixel clock rate.
pub fn source_follower_sigma_volts(meta: &CameraMetadata) -> f64 {
    let fixed = &meta.fixed;
    let w2 = meta.thermal_white_noise * meta.thermal_white_noise;
    let t_s2s = fixed.cds_sample_to_sample_time;
    let tau_d = fixed.cds_time_factor * t_s2s;
    let tau_rts = 0.1 * t_s2s;
    let i_mod2 =
        fixed.source_follower_current_modulation * fixed.source_follower_current_modulation;
    let f_hi = meta.pixel_clock_rate;

    let log_lo = 0.0_f64; // log10(1 Hz)
    let log_hi = f_hi.log10();
    let psd_weighted = |f: f64| -> f64 {
        let omega = std::f64::consts::TAU * f;
        let white_flicker = w2 * (1.0 + fixed.flicker_corner_frequency / f);
        let burst = 2.0 * i_mod2 * tau_rts / (4.0 + (omega * tau_rts) * (omega * tau_rts));
        let h2 = (2.0 - 2.0 * (omega * t_s2s).cos()) / (1.0 + (omega * tau_d) * (omega * tau_d));
        (white_flicker + burst) * h2
    };

    let mut integral = 0.0;
    let mut prev_f = 10f64.powf(log_lo);
    let mut prev_y = psd_weighted(prev_f);
    for i in 1..SF_GRID_POINTS {
        let f = 10f64.powf(log_lo + (log_hi - log_lo) * i as f64 / (SF_GRID_POINTS - 1) as f64);
        let y = psd_weighted(f);
        integral += 0.5 * (prev_y + y) * (f - prev_f);
        prev_f = f;
        prev_y = y;
    }
    (integral * fixed.cds_gain * fixed.cds_gain).sqrt() * fixed.source_follower_gain
}

/// Combined readout-noise sigma in volts: sense-node reset and
/// source-follower contributions added in quadrature.
pub fn readout_sigma_volts(meta: &CameraMetadata) -> f64 {
    let reset = reset_sigma_volts(meta);
    let sf = source_follower_sigma_volts(meta);
    (reset * reset + sf * sf).sqrt()
}

/// DN produced by one electron at this metadata's gain setting.
fn dn_per_electron(meta: &CameraMetadata) -> f64 {
    255.0 / meta.full_well_capacity * meta.linear_gain()
}

/// Mean photoelectron count at `intensity` DN: the full well maps to 255 DN
/// after digital gain, so the electron count shrinks as gain grows.
fn photoelectrons(meta: &CameraMetadata, intensity: f64) -> f64 {
    intensity / 255.0 * meta.full_well_capacity / meta.linear_gain()
}

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact standard deviation of `clip(round(X), 0, 255)` for
/// `X ~ N(mu, sigma²)`, computed over the 256 discrete output levels.
///
/// This is the noise level actually observable in an 8-bit image: for small
/// sigmas it adds the quantization variance, and near the range ends it
/// shrinks as mass piles onto the clip boundaries.
pub fn observable_sigma(mu: f64, sigma: f64) -> f64 {
    if sigma < 1e-9 {
        return sigma;
    }
    let mut p_prev = 0.0;
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 0..=255u32 {
        let upper = if k == 255 {
            1.0
        } else {
            phi((f64::from(k) + 0.5 - mu) / sigma)
        };
        let p = upper - p_prev;
        p_prev = upper;
        let kf = f64::from(k);
        mean += kf * p;
        second += kf * kf * p;
    }
    (second - mean * mean).max(0.0).sqrt()
}

/// Internal per-source decomposition in raw (pre-quantization) DN.
struct RawSigmas {
    pn: f64,
    dcsn: f64,
    rn: f64,
}

fn raw_sigmas(meta: &CameraMetadata, mean_intensity: f64) -> RawSigmas {
    let to_dn = dn_per_electron(meta);
    let pn = photoelectrons(meta, mean_intensity).sqrt() * to_dn;
    let dcsn = dark_current_electrons(meta).sqrt() * to_dn;
    let rn_electrons = readout_sigma_volts(meta) / meta.sense_node_gain;
    let rn = rn_electrons * to_dn;
    RawSigmas { pn, dcsn, rn }
}

/// Predicts per-source noise sigmas in DN for a homogeneous patch at
/// `mean_intensity`, with `xi = 0`.
///
/// Deterministic — no sampling. The returned components carry the observable
/// quantization/clipping correction at the given mean intensity, applied as
/// a single scale factor so the quadrature composition is exact.
///
/// Metadata ranges are deliberately not re-checked here: fault-injection
/// scenarios evaluate deliberately out-of-range metadata. The intensity must
/// lie within `[0, 255]`.
pub fn predict_sigmas(meta: &CameraMetadata, mean_intensity: f64) -> Result<NoiseLevels> {
    if !(0.0..=255.0).contains(&mean_intensity) {
        return Err(Error::domain(format!(
            "mean intensity {mean_intensity} outside [0, 255]"
        )));
    }
    let raw = raw_sigmas(meta, mean_intensity);
    let total_raw = (raw.pn * raw.pn + raw.dcsn * raw.dcsn + raw.rn * raw.rn).sqrt();
    let scale = if total_raw > 0.0 {
        observable_sigma(mean_intensity, total_raw) / total_raw
    } else {
        1.0
    };
    Ok(NoiseLevels::compose(
        raw.pn * scale,
        raw.dcsn * scale,
        raw.rn * scale,
        0.0,
    ))
}

/// Corrupts a clean patch with one sampled noise realization.
///
/// Per pixel: a Poisson photoelectron draw (signal-dependent), a zero-mean
/// dark-current fluctuation (Poisson draw minus its calibrated mean), and a
/// Gaussian readout draw are summed in the electron domain, propagated
/// through the gain chain, rounded half-to-even, and clipped to `[0, 255]`.
///
/// Returns the noisy patch plus the model truth at the clean patch's mean
/// intensity (`xi = 0`). Deterministic given `(clean, meta, seed)` and
/// independent of worker-thread count: each row consumes its own counter
/// stream of the seeded generator.
pub fn corrupt_patch(clean: &Patch, meta: &CameraMetadata, seed: u64) -> (Patch, NoiseLevels) {
    let truth = predict_sigmas(meta, clean.mean())
        .expect("patch intensities are validated to [0, 255] at construction");

    let to_dn = dn_per_electron(meta);
    let lambda_dark = dark_current_electrons(meta);
    let sigma_rn_e = readout_sigma_volts(meta) / meta.sense_node_gain;
    let dark_dist = (lambda_dark > 0.0).then(|| {
        Poisson::new(lambda_dark).expect("positive finite dark-current mean")
    });

    let width = clean.width();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f32>> = par::map_indexed(clean.height(), |row| {
        let mut rng = base.clone();
        rng.set_stream(row as u64);
        let clean_row = &clean.data()[row * width..(row + 1) * width];
        let mut out = Vec::with_capacity(width);
        for &value in clean_row {
            let lambda_pn = photoelectrons(meta, f64::from(value));
            let mut electrons = 0.0;
            if lambda_pn > 0.0 {
                let pn = Poisson::new(lambda_pn).expect("positive finite photoelectron mean");
                electrons += pn.sample(&mut rng);
            }
            if let Some(dark) = &dark_dist {
                electrons += dark.sample(&mut rng) - lambda_dark;
            }
            if sigma_rn_e > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                electrons += z * sigma_rn_e;
            }
            let dn = (electrons * to_dn).round_ties_even().clamp(0.0, 255.0);
            out.push(dn as f32);
        }
        out
    });

    let mut data = Vec::with_capacity(clean.len());
    for row in rows {
        data.extend_from_slice(&row);
    }
    let noisy = Patch::from_data(width, clean.height(), data)
        .expect("corrupted pixels are clipped to [0, 255]");
    (noisy, truth)
}

/// One row of a sensitivity sweep: the sampled parameter value (in its native
/// unit) and the predicted total noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub sigma_total: f64,
}

/// Names accepted by [`sensitivity_sweep`]: the ten numeric variable fields
/// plus `"mean_intensity"`.
pub fn sweepable_parameters() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = FIELD_RANGES.iter().map(|r| r.name).collect();
    names.push("mean_intensity");
    names
}

/// Evaluates `predict_sigmas` while sweeping one parameter across its
/// declared range (uniform samples: minimum, interior points, maximum),
/// holding everything else at `fixed`.
///
/// `camera_gain` is sampled uniformly in the *linear* gain domain and
/// reported in dB — the sensitivity protocol samples the physical range and
/// converts afterwards. `"mean_intensity"` sweeps the intensity in
/// `[0, 255]` instead of a metadata field. `sensor_type` is a two-state
/// enumeration and not sweepable.
pub fn sensitivity_sweep(
    param: &str,
    n_samples: usize,
    fixed: &CameraMetadata,
    mean_intensity: f64,
) -> Result<Vec<SweepPoint>> {
    if n_samples < 2 {
        return Err(Error::domain("sweep needs at least 2 samples"));
    }
    let steps = (n_samples - 1) as f64;
    let mut points = Vec::with_capacity(n_samples);

    if param == "mean_intensity" {
        for i in 0..n_samples {
            let value = 255.0 * i as f64 / steps;
            let sigma_total = predict_sigmas(fixed, value)?.sigma_total();
            points.push(SweepPoint { value, sigma_total });
        }
        return Ok(points);
    }
    if param == "sensor_type" {
        return Err(Error::domain(
            "sensor_type is an enumeration and cannot be swept over a numeric range",
        ));
    }
    let range = FIELD_RANGES
        .iter()
        .find(|r| r.name == param)
        .ok_or_else(|| {
            Error::domain(format!(
                "unknown sweep parameter {param:?}; expected one of {:?}",
                sweepable_parameters()
            ))
        })?;

    for i in 0..n_samples {
        let frac = i as f64 / steps;
        let value = if param == "camera_gain" {
            // Uniform in linear gain, reported in dB.
            let g_min = 10f64.powf(range.min / 20.0);
            let g_max = 10f64.powf(range.max / 20.0);
            20.0 * (g_min + (g_max - g_min) * frac).log10()
        } else {
            range.min + (range.max - range.min) * frac
        };
        let mut meta = fixed.clone();
        meta.set_numeric_field(param, value)?;
        let sigma_total = predict_sigmas(&meta, mean_intensity)?.sigma_total();
        points.push(SweepPoint { value, sigma_total });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn max_meta() -> CameraMetadata {
        CameraMetadata::at_maxima()
    }

    // ----- dark current -------------------------------------------------

    #[test]
    fn dark_current_vanishes_without_fom_or_exposure() {
        let mut meta = max_meta();
        meta.dark_signal_fom = 0.0;
        assert_eq!(dark_current_electrons(&meta), 0.0);

        let mut meta = max_meta();
        meta.exposure_time = 0.0; // configuration override below the range
        assert_eq!(dark_current_electrons(&meta), 0.0);
    }

    #[test]
    fn dark_current_at_maxima_matches_hand_evaluation() {
        // Hand-evaluated Arrhenius form at T = 353.15 K, 0.2 s, DFM 1,
        // 0.01 mm pixels: band gap 1.09577 eV, rate ≈ 2.568e5 e⁻/s,
        // count ≈ 5.136e4 e⁻.
        let count = dark_current_electrons(&max_meta());
        assert_relative_eq!(count, 5.136e4, max_relative = 5e-3);
    }

    #[test]
    fn dark_current_is_strictly_monotone_in_its_drivers() {
        let base = {
            let mut m = max_meta();
            m.sensor_temperature = 40.0;
            m.exposure_time = 0.1;
            m.dark_signal_fom = 0.5;
            m.sensor_pixel_size = 0.005;
            m
        };
        let reference = dark_current_electrons(&base);
        for (field, bigger) in [
            ("sensor_temperature", 41.0),
            ("exposure_time", 0.11),
            ("dark_signal_fom", 0.55),
            ("sensor_pixel_size", 0.0055),
        ] {
            let mut m = base.clone();
            m.set_numeric_field(field, bigger).unwrap();
            assert!(
                dark_current_electrons(&m) > reference,
                "{field} failed to increase the dark count"
            );
        }
        // Endpoint form of the temperature claim: 80 °C vs 0 °C.
        let mut cold = max_meta();
        cold.sensor_temperature = 0.0;
        assert!(dark_current_electrons(&max_meta()) > dark_current_electrons(&cold));
    }

    // ----- readout ------------------------------------------------------

    #[test]
    fn ccd_and_zero_factor_cancel_reset_noise() {
        let mut meta = max_meta();
        meta.sensor_type = SensorType::Ccd;
        assert_eq!(reset_sigma_volts(&meta), 0.0);

        let mut meta = max_meta();
        meta.sense_node_reset_factor = 0.0;
        assert_eq!(reset_sigma_volts(&meta), 0.0);
        // With reset cancelled, readout is exactly the source follower.
        assert_eq!(readout_sigma_volts(&meta), source_follower_sigma_volts(&meta));
    }

    #[test]
    fn source_follower_matches_white_noise_closed_form() {
        // With the flicker corner at 1e-6 Hz and the burst term suppressed by
        // the tiny current modulation, the integral is dominated by the white
        // term, whose CDS-filtered integral has the closed form
        // (1 / 2τ_D)(1 − e^(−t_s2s/τ_D)) = 1e6 · (1 − e⁻²) ≈ 864 665 Hz.
        let meta = max_meta();
        let sigma = source_follower_sigma_volts(&meta);
        let white_integral = 1e6 * (1.0 - (-2.0f64).exp());
        let expected = meta.thermal_white_noise * white_integral.sqrt();
        assert_relative_eq!(sigma, expected, max_relative = 0.03);
    }

    #[test]
    fn readout_grows_with_thermal_white_noise_and_reset_factor() {
        let meta = max_meta();
        let mut half_thermal = meta.clone();
        half_thermal.thermal_white_noise = 30e-9;
        assert!(readout_sigma_volts(&meta) > readout_sigma_volts(&half_thermal));
        assert!(
            source_follower_sigma_volts(&meta) > source_follower_sigma_volts(&half_thermal)
        );

        let mut half_reset = meta.clone();
        half_reset.sense_node_reset_factor = 0.5;
        assert!(readout_sigma_volts(&meta) > readout_sigma_volts(&half_reset));

        let value = readout_sigma_volts(&meta);
        assert!(value.is_finite() && value > 0.0);
    }

    // ----- observable sigma ---------------------------------------------

    #[test]
    fn observable_sigma_limits() {
        // No noise in, none out.
        assert_eq!(observable_sigma(128.0, 0.0), 0.0);
        // Wide-but-unclipped Gaussian: quantization adds 1/12 variance
        // (Sheppard's correction, exponentially accurate for sigma ≥ 2).
        let sigma = observable_sigma(128.0, 5.0);
        assert_abs_diff_eq!(sigma * sigma, 25.0 + 1.0 / 12.0, epsilon = 1e-6);
        // Near-infinite noise: half the mass clips to each end, so the
        // spread approaches the Bernoulli extreme 255/2 = 127.5.
        assert_abs_diff_eq!(observable_sigma(128.0, 1e6), 127.5, epsilon = 0.1);
    }

    // ----- predict_sigmas -----------------------------------------------

    #[test]
    fn rejects_out_of_range_intensity() {
        assert!(predict_sigmas(&max_meta(), 300.0).is_err());
        assert!(predict_sigmas(&max_meta(), -1.0).is_err());
        assert!(predict_sigmas(&max_meta(), 0.0).is_ok());
        assert!(predict_sigmas(&max_meta(), 255.0).is_ok());
    }

    #[test]
    fn all_sources_vanish_in_the_dark_at_minimum_integration() {
        let mut meta = max_meta();
        meta.exposure_time = 0.001;
        meta.dark_signal_fom = 0.0;
        let levels = predict_sigmas(&meta, 0.0).unwrap();
        assert_eq!(levels.sigma_pn(), 0.0);
        assert_eq!(levels.sigma_dcsn(), 0.0);
    }

    #[test]
    fn published_operating_points_reproduce() {
        // All variable parameters at maxima, CMOS, intensity 128.
        let total = predict_sigmas(&max_meta(), 128.0).unwrap().sigma_total();
        assert_relative_eq!(total, 10.1, max_relative = 0.15);

        // Same but gain at its 0 dB minimum.
        let mut meta = max_meta();
        meta.camera_gain = 0.0;
        let total = predict_sigmas(&meta, 128.0).unwrap().sigma_total();
        assert_relative_eq!(total, 0.82, max_relative = 0.15);

        // Same but the smallest full well: the noise blows far past the
        // 8-bit range and the observable sigma saturates near 118 DN.
        let mut meta = max_meta();
        meta.full_well_capacity = 2e3;
        let total = predict_sigmas(&meta, 128.0).unwrap().sigma_total();
        assert_relative_eq!(total, 118.4, max_relative = 0.15);
    }

    #[test]
    fn composition_identity_is_exact() {
        let levels = predict_sigmas(&max_meta(), 77.3).unwrap();
        let quadrature = (levels.sigma_pn().powi(2)
            + levels.sigma_dcsn().powi(2)
            + levels.sigma_rn().powi(2))
        .sqrt();
        assert_eq!(levels.sigma_total(), quadrature + levels.xi());
        assert_eq!(levels.xi(), 0.0);
    }

    // ----- corrupt_patch ------------------------------------------------

    #[test]
    fn corruption_is_deterministic_and_stream_addressed() {
        let clean = Patch::constant(32, 100.0).unwrap();
        let meta = max_meta();
        let (a, ta) = corrupt_patch(&clean, &meta, 42);
        let (b, tb) = corrupt_patch(&clean, &meta, 42);
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = corrupt_patch(&clean, &meta, 43);
        assert_ne!(a, c);

        // Row 3 reproduced in isolation from its own stream — the layout
        // that makes the output independent of worker count.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(3);
        let lambda_pn = photoelectrons(&meta, 100.0);
        let lambda_dark = dark_current_electrons(&meta);
        let sigma_rn_e = readout_sigma_volts(&meta) / meta.sense_node_gain;
        let to_dn = dn_per_electron(&meta);
        let pn = Poisson::new(lambda_pn).unwrap();
        let dark = Poisson::new(lambda_dark).unwrap();
        let mut expected_row = Vec::new();
        for _ in 0..32 {
            let mut e = pn.sample(&mut rng);
            e += dark.sample(&mut rng) - lambda_dark;
            let z: f64 = rng.sample(StandardNormal);
            e += z * sigma_rn_e;
            expected_row.push((e * to_dn).round_ties_even().clamp(0.0, 255.0) as f32);
        }
        assert_eq!(&a.data()[3 * 32..4 * 32], &expected_row[..]);
    }

    #[test]
    fn suppressed_sources_leave_the_patch_untouched() {
        // Gain 0 dB, no dark current, minimal thermal noise, no reset noise,
        // largest full well, zero intensity: every source is (numerically)
        // dead, so the output equals the clean patch bit for bit.
        let meta = CameraMetadata::new(
            0.0,
            0.001,
            0.0,
            0.0,
            100e3,
            8e6,
            5e-6,
            0.0,
            0.0009,
            SensorType::Cmos,
            1e-9,
        )
        .unwrap();
        let clean = Patch::constant(16, 0.0).unwrap();
        let (noisy, truth) = corrupt_patch(&clean, &meta, 7);
        let max_dev = clean
            .data()
            .iter()
            .zip(noisy.data())
            .map(|(c, n)| (c - n).abs())
            .fold(0.0f32, f32::max);
        assert!(max_dev <= 0.5, "max deviation {max_dev}");
        assert!(truth.sigma_total() < 0.01);
    }

    #[test]
    fn empirical_std_matches_prediction_at_scale() {
        // 320×320 = 102 400 pixels of flat 128 DN at the all-max config.
        let clean = Patch::from_data(320, 320, vec![128.0; 320 * 320]).unwrap();
        let meta = max_meta();
        let (noisy, truth) = corrupt_patch(&clean, &meta, 2024);
        let measured = noisy.std();
        assert_relative_eq!(measured, truth.sigma_total(), max_relative = 0.03);
        // The mean digital level is preserved by the gain anchoring.
        assert_abs_diff_eq!(noisy.mean(), 128.0, epsilon = 0.2);
    }

    #[test]
    fn poisson_sampling_has_poisson_variance() {
        // Electron-domain check: variance/mean of 1e5 draws at λ = 500 within
        // the two-sided 1% band of the χ² variance test (±1.2% here).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dist = Poisson::new(500.0).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let ratio = var / mean;
        assert!(
            (0.985..=1.015).contains(&ratio),
            "variance/mean ratio {ratio}"
        );
    }

    #[test]
    fn disabling_a_source_removes_exactly_its_variance_share() {
        // Empirical variance budget: Var(full) − Var(without DCSN) should
        // equal σ_DCSN² within Monte-Carlo tolerance on 102 400 pixels.
        let clean = Patch::from_data(320, 320, vec![128.0; 320 * 320]).unwrap();
        let full_meta = max_meta();
        let mut no_dark = full_meta.clone();
        no_dark.dark_signal_fom = 0.0;

        let (full, truth_full) = corrupt_patch(&clean, &full_meta, 5);
        let (partial, _) = corrupt_patch(&clean, &no_dark, 5);
        let var_full = full.std().powi(2);
        let var_partial = partial.std().powi(2);
        let removed = var_full - var_partial;
        let expected = truth_full.sigma_dcsn().powi(2);
        assert_relative_eq!(removed, expected, max_relative = 0.05);
    }

    // ----- sensitivity sweep ----------------------------------------------

    #[test]
    fn gain_row_matches_published_values() {
        let rows = sensitivity_sweep("camera_gain", 10, &max_meta(), 128.0).unwrap();
        let published = [0.82, 1.86, 2.88, 3.92, 4.94, 5.96, 6.99, 8.02, 9.02, 10.1];
        for (point, expected) in rows.iter().zip(published) {
            assert_relative_eq!(point.sigma_total, expected, max_relative = 0.15);
        }
        // Reported in dB, covering the full declared range.
        assert_abs_diff_eq!(rows[0].value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[9].value, 24.0, epsilon = 1e-12);
        // Linear-domain sampling: the second sample sits at
        // 20·log10(1 + (10^1.2 − 1)/9) ≈ 8.53 dB, not at 24/9 dB.
        assert_relative_eq!(rows[1].value, 8.53, max_relative = 0.01);
    }

    #[test]
    fn mean_intensity_row_matches_published_values() {
        let rows = sensitivity_sweep("mean_intensity", 10, &max_meta(), 128.0).unwrap();
        let published = [5.54, 9.87, 9.94, 10.0, 10.1, 10.1, 10.2, 10.2, 10.3, 6.1];
        for (point, expected) in rows.iter().zip(published) {
            assert_relative_eq!(point.sigma_total, expected, max_relative = 0.15);
        }
    }

    #[test]
    fn reset_factor_row_is_near_flat_and_exposure_row_monotone() {
        let reset = sensitivity_sweep("sense_node_reset_factor", 10, &max_meta(), 128.0).unwrap();
        let (lo, hi) = reset.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
            (lo.min(p.sigma_total), hi.max(p.sigma_total))
        });
        assert!(hi / lo < 1.15, "reset row spread {lo}..{hi}");

        let exposure = sensitivity_sweep("exposure_time", 10, &max_meta(), 128.0).unwrap();
        assert!(exposure
            .windows(2)
            .all(|w| w[1].sigma_total >= w[0].sigma_total));
        assert_relative_eq!(exposure[0].sigma_total, 4.02, max_relative = 0.15);
        assert_relative_eq!(exposure[9].sigma_total, 10.1, max_relative = 0.15);
    }

    #[test]
    fn sweep_rejects_unknown_and_enum_parameters() {
        assert!(sensitivity_sweep("focal_length", 10, &max_meta(), 128.0).is_err());
        assert!(sensitivity_sweep("sensor_type", 10, &max_meta(), 128.0).is_err());
        assert!(sensitivity_sweep("camera_gain", 1, &max_meta(), 128.0).is_err());
    }

    // ----- properties ------------------------------------------------------

    fn arbitrary_meta() -> impl Strategy<Value = CameraMetadata> {
        (
            0.0..24.0f64,
            0.001..0.2f64,
            0.0..80.0f64,
            0.0..1.0f64,
            2e3..100e3f64,
            8e6..150e6f64,
            1e-6..5e-6f64,
            0.0..1.0f64,
            0.0009..0.01f64,
            any::<bool>(),
            1e-9..60e-9f64,
        )
            .prop_map(
                |(gain, exposure, temp, fom, fwc, clock, sng, reset, size, cmos, thermal)| {
                    CameraMetadata::new(
                        gain,
                        exposure,
                        temp,
                        fom,
                        fwc,
                        clock,
                        sng,
                        reset,
                        size,
                        if cmos { SensorType::Cmos } else { SensorType::Ccd },
                        thermal,
                    )
                    .unwrap()
                },
            )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn composition_identity_holds_for_any_metadata(
            meta in arbitrary_meta(),
            intensity in 0.0..255.0f64,
        ) {
            let levels = predict_sigmas(&meta, intensity).unwrap();
            let quadrature = (levels.sigma_pn().powi(2)
                + levels.sigma_dcsn().powi(2)
                + levels.sigma_rn().powi(2))
            .sqrt();
            prop_assert!((levels.sigma_total() - quadrature).abs() <= 1e-12 * quadrature.max(1.0));
            prop_assert!(levels.sigma_pn() >= 0.0);
            prop_assert!(levels.sigma_dcsn() >= 0.0);
            prop_assert!(levels.sigma_rn() >= 0.0);
            prop_assert_eq!(levels.xi(), 0.0);
            // With xi = 0 the total dominates every component.
            let max_component = levels
                .sigma_pn()
                .max(levels.sigma_dcsn())
                .max(levels.sigma_rn());
            prop_assert!(levels.sigma_total() >= max_component - 1e-12);
        }
    }
}
