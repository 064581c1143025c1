//! Camera metadata: the variable and fixed sensor parameters that drive the
//! noise physics and feed the estimator's side inputs.
//!
//! Variable parameters carry declared ranges; construction validates them.
//! For fault-injection work (deliberately corrupted metadata) the fields are
//! public, so callers can bypass validation explicitly — the physics layer
//! accepts such values, while [`normalize_metadata`] rejects them and
//! [`normalize_metadata_clamped`] clamps them with a logged warning.

use crate::error::{Error, Result};

/// Sensor readout architecture.
///
/// Correlated double sampling cancels sense-node reset noise fully on a CCD
/// and only partially on a CMOS sensor, so the reset-noise term is gated on
/// this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorType {
    Ccd,
    Cmos,
}

impl SensorType {
    /// Canonical text form used in sidecars and manifests.
    pub fn as_str(self) -> &'static str {
        match self {
            SensorType::Ccd => "CCD",
            SensorType::Cmos => "CMOS",
        }
    }

    /// Parses the canonical text form.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "CCD" => Ok(SensorType::Ccd),
            "CMOS" => Ok(SensorType::Cmos),
            other => Err(Error::domain(format!(
                "unknown sensor type {other:?} (expected CCD or CMOS)"
            ))),
        }
    }
}

/// Fixed sensor parameters: constants of the signal chain that real cameras
/// do not expose per frame.
///
/// Defaults are the values used throughout; overriding them is configuration,
/// not per-record data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedMetadata {
    /// Dark offset added by the camera, in DN.
    pub camera_offset: f64,
    /// Gain of the correlated-double-sampling stage.
    pub cds_gain: f64,
    /// CDS sample-to-sample time in seconds.
    pub cds_sample_to_sample_time: f64,
    /// CDS dominant-pole time constant as a fraction of the sample-to-sample
    /// time.
    pub cds_time_factor: f64,
    /// Corner frequency of the source-follower flicker noise, in hertz.
    pub flicker_corner_frequency: f64,
    /// Source-follower current modulation driving burst (RTS) noise.
    pub source_follower_current_modulation: f64,
    /// Gain of the source-follower stage.
    pub source_follower_gain: f64,
}

impl Default for FixedMetadata {
    fn default() -> Self {
        FixedMetadata {
            camera_offset: 0.0,
            cds_gain: 1.0,
            cds_sample_to_sample_time: 1e-6,
            cds_time_factor: 0.5,
            flicker_corner_frequency: 1e-6,
            source_follower_current_modulation: 1e-8,
            source_follower_gain: 1.0,
        }
    }
}

/// Declared range of one variable metadata field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

/// Ranges of the numeric variable parameters, in the canonical field order.
///
/// `sensor_type` sits at index [`SENSOR_TYPE_INDEX`] of the canonical order
/// and is not listed here because it is an enumeration, not a range.
pub const FIELD_RANGES: [FieldRange; 10] = [
    FieldRange { name: "camera_gain", min: 0.0, max: 24.0 },
    FieldRange { name: "exposure_time", min: 0.001, max: 0.2 },
    FieldRange { name: "sensor_temperature", min: 0.0, max: 80.0 },
    FieldRange { name: "dark_signal_fom", min: 0.0, max: 1.0 },
    FieldRange { name: "full_well_capacity", min: 2e3, max: 100e3 },
    FieldRange { name: "pixel_clock_rate", min: 8e6, max: 150e6 },
    FieldRange { name: "sense_node_gain", min: 1e-6, max: 5e-6 },
    FieldRange { name: "sense_node_reset_factor", min: 0.0, max: 1.0 },
    FieldRange { name: "sensor_pixel_size", min: 0.0009, max: 0.01 },
    FieldRange { name: "thermal_white_noise", min: 1e-9, max: 60e-9 },
];

/// Canonical order of all eleven variable fields as they appear in the
/// normalized metadata vector and in every manifest. `sensor_type` is encoded
/// CCD → 0, CMOS → 1.
pub const FIELD_ORDER: [&str; 11] = [
    "camera_gain",
    "exposure_time",
    "sensor_temperature",
    "dark_signal_fom",
    "full_well_capacity",
    "pixel_clock_rate",
    "sense_node_gain",
    "sense_node_reset_factor",
    "sensor_pixel_size",
    "sensor_type",
    "thermal_white_noise",
];

/// Index of `sensor_type` within [`FIELD_ORDER`].
pub const SENSOR_TYPE_INDEX: usize = 9;

/// Variable sensor parameters plus the fixed constants.
///
/// Units: `camera_gain` in dB; `exposure_time` in seconds;
/// `sensor_temperature` in °C; `full_well_capacity` in electrons;
/// `pixel_clock_rate` in Hz; `sense_node_gain` in V/e⁻ (stored at its printed
/// magnitude in `[1e-6, 5e-6]`); `sensor_pixel_size` in mm;
/// `thermal_white_noise` in V/√Hz (printed magnitude in `[1e-9, 60e-9]`);
/// `dark_signal_fom` and `sense_node_reset_factor` dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraMetadata {
    pub camera_gain: f64,
    pub exposure_time: f64,
    pub sensor_temperature: f64,
    pub dark_signal_fom: f64,
    pub full_well_capacity: f64,
    pub pixel_clock_rate: f64,
    pub sense_node_gain: f64,
    pub sense_node_reset_factor: f64,
    pub sensor_pixel_size: f64,
    pub sensor_type: SensorType,
    pub thermal_white_noise: f64,
    pub fixed: FixedMetadata,
}

impl CameraMetadata {
    /// Builds metadata after validating every numeric field against its
    /// declared range.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        camera_gain: f64,
        exposure_time: f64,
        sensor_temperature: f64,
        dark_signal_fom: f64,
        full_well_capacity: f64,
        pixel_clock_rate: f64,
        sense_node_gain: f64,
        sense_node_reset_factor: f64,
        sensor_pixel_size: f64,
        sensor_type: SensorType,
        thermal_white_noise: f64,
    ) -> Result<Self> {
        let meta = CameraMetadata {
            camera_gain,
            exposure_time,
            sensor_temperature,
            dark_signal_fom,
            full_well_capacity,
            pixel_clock_rate,
            sense_node_gain,
            sense_node_reset_factor,
            sensor_pixel_size,
            sensor_type,
            thermal_white_noise,
            fixed: FixedMetadata::default(),
        };
        meta.validate()?;
        Ok(meta)
    }

    /// The numeric variable fields in canonical order (without
    /// `sensor_type`), parallel to [`FIELD_RANGES`].
    pub fn numeric_fields(&self) -> [f64; 10] {
        [
            self.camera_gain,
            self.exposure_time,
            self.sensor_temperature,
            self.dark_signal_fom,
            self.full_well_capacity,
            self.pixel_clock_rate,
            self.sense_node_gain,
            self.sense_node_reset_factor,
            self.sensor_pixel_size,
            self.thermal_white_noise,
        ]
    }

    /// Replaces the numeric field named `name`; `value` is not range-checked
    /// (fault injection relies on this going out of range).
    pub fn set_numeric_field(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "camera_gain" => self.camera_gain = value,
            "exposure_time" => self.exposure_time = value,
            "sensor_temperature" => self.sensor_temperature = value,
            "dark_signal_fom" => self.dark_signal_fom = value,
            "full_well_capacity" => self.full_well_capacity = value,
            "pixel_clock_rate" => self.pixel_clock_rate = value,
            "sense_node_gain" => self.sense_node_gain = value,
            "sense_node_reset_factor" => self.sense_node_reset_factor = value,
            "sensor_pixel_size" => self.sensor_pixel_size = value,
            "thermal_white_noise" => self.thermal_white_noise = value,
            other => {
                return Err(Error::domain(format!(
                    "unknown numeric metadata field {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Checks every numeric field against its declared range.
    pub fn validate(&self) -> Result<()> {
        for (range, value) in FIELD_RANGES.iter().zip(self.numeric_fields()) {
            if !value.is_finite() || value < range.min || value > range.max {
                return Err(Error::domain(format!(
                    "{} = {value} outside declared range [{}, {}]",
                    range.name, range.min, range.max
                )));
            }
        }
        Ok(())
    }

    /// All numeric fields at their range maxima, CMOS sensor.
    ///
    /// This is the fixed operating point of the sensitivity analysis (the
    /// non-swept parameters sit at their maxima).
    pub fn at_maxima() -> Self {
        CameraMetadata {
            camera_gain: 24.0,
            exposure_time: 0.2,
            sensor_temperature: 80.0,
            dark_signal_fom: 1.0,
            full_well_capacity: 100e3,
            pixel_clock_rate: 150e6,
            sense_node_gain: 5e-6,
            sense_node_reset_factor: 1.0,
            sensor_pixel_size: 0.01,
            sensor_type: SensorType::Cmos,
            thermal_white_noise: 60e-9,
            fixed: FixedMetadata::default(),
        }
    }

    /// All numeric fields at their range minima, CMOS sensor.
    pub fn at_minima() -> Self {
        CameraMetadata {
            camera_gain: 0.0,
            exposure_time: 0.001,
            sensor_temperature: 0.0,
            dark_signal_fom: 0.0,
            full_well_capacity: 2e3,
            pixel_clock_rate: 8e6,
            sense_node_gain: 1e-6,
            sense_node_reset_factor: 0.0,
            sensor_pixel_size: 0.0009,
            sensor_type: SensorType::Cmos,
            thermal_white_noise: 1e-9,
            fixed: FixedMetadata::default(),
        }
    }

    /// Linear digital gain factor, `10^(camera_gain/20)`.
    pub fn linear_gain(&self) -> f64 {
        10f64.powf(self.camera_gain / 20.0)
    }

    /// Sensor temperature in kelvin.
    pub fn temperature_kelvin(&self) -> f64 {
        self.sensor_temperature + 273.15
    }
}

/// Min-max normalizes all eleven variable fields into `[0, 1]` in the
/// canonical [`FIELD_ORDER`]; `sensor_type` encodes CCD → 0, CMOS → 1.
///
/// Rejects out-of-range fields; use [`normalize_metadata_clamped`] when the
/// metadata may be deliberately corrupted.
pub fn normalize_metadata(meta: &CameraMetadata) -> Result<[f64; 11]> {
    meta.validate()?;
    Ok(normalize_unchecked(meta))
}

/// Like [`normalize_metadata`] but clamps out-of-range fields to `[0, 1]`
/// and logs a warning naming each clamped field.
///
/// This is the inference path: a deployed estimator cannot know its metadata
/// is corrupt, so it sees the clamped value, exactly like the trained network
/// would.
pub fn normalize_metadata_clamped(meta: &CameraMetadata) -> [f64; 11] {
    for (range, value) in FIELD_RANGES.iter().zip(meta.numeric_fields()) {
        if value < range.min || value > range.max {
            log::warn!(
                "metadata field {} = {value} outside [{}, {}]; clamping for normalization",
                range.name,
                range.min,
                range.max
            );
        }
    }
    let mut v = normalize_unchecked(meta);
    for x in &mut v {
        *x = x.clamp(0.0, 1.0);
    }
    v
}

fn normalize_unchecked(meta: &CameraMetadata) -> [f64; 11] {
    let numeric = meta.numeric_fields();
    let mut out = [0.0; 11];
    let mut n = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        if i == SENSOR_TYPE_INDEX {
            *slot = match meta.sensor_type {
                SensorType::Ccd => 0.0,
                SensorType::Cmos => 1.0,
            };
        } else {
            let range = &FIELD_RANGES[n];
            *slot = (numeric[n] - range.min) / (range.max - range.min);
            n += 1;
        }
    }
    out
}
