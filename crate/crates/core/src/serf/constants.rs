//! Cesium atomic constants, loaded from a versioned `key = value` file.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/cesium_constants.txt");

/// Atomic constants. Rates and frequencies are angular (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesiumConstants {
    pub version: u32,
    pub nuclear_spin: f64,
    pub d1_wavelength: f64,
    pub gamma_nat: f64,
    /// W/m^2.
    pub saturation_intensity: f64,
    pub ground_splitting: f64,
    pub a_hf: f64,
    pub excited_splitting: f64,
    pub g_j: f64,
    pub g_i: f64,
    /// Bohr magneton over hbar, rad/(s T).
    pub mu_b: f64,
    pub atomic_mass: f64,
    pub boltzmann: f64,
}

impl CesiumConstants {
    /// The constants shipped with the crate.
    pub fn bundled() -> Result<Self> {
        Self::parse(BUNDLED)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("constants line {}: expected key = value", lineno + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("constants line {}: {e}", lineno + 1)))?;
            table.insert(key.trim().to_string(), value);
        }
        let get = |key: &str| -> Result<f64> {
            table
                .get(key)
                .copied()
                .ok_or_else(|| Error::Config(format!("constants: missing `{key}`")))
        };
        let two_pi = 2.0 * PI;
        Ok(Self {
            version: get("version")? as u32,
            nuclear_spin: get("nuclear_spin")?,
            d1_wavelength: get("d1_wavelength")?,
            gamma_nat: two_pi * get("d1_natural_linewidth_hz")?,
            saturation_intensity: get("d1_saturation_intensity")?,
            ground_splitting: two_pi * get("ground_hyperfine_splitting_hz")?,
            a_hf: two_pi * get("ground_hyperfine_constant_hz")?,
            excited_splitting: two_pi * get("excited_hyperfine_splitting_hz")?,
            g_j: get("g_j")?,
            g_i: get("g_i")?,
            mu_b: two_pi * get("bohr_magneton_hz_per_tesla")?,
            atomic_mass: get("atomic_mass")?,
            boltzmann: get("boltzmann")?,
        })
    }

    /// Hyperfine Lande factor of the ground level with total spin `f`.
    pub fn g_f(&self, f: f64) -> f64 {
        let (k, s) = (self.nuclear_spin, 0.5);
        let ff = f * (f + 1.0);
        let (kk, ss) = (k * (k + 1.0), s * (s + 1.0));
        self.g_j * (ff - kk + ss) / (2.0 * ff) + self.g_i * (ff + kk - ss) / (2.0 * ff)
    }

    /// Standard deviation of the Doppler shift of the D1 line, rad/s.
    pub fn doppler_sigma(&self, temperature: f64) -> f64 {
        2.0 * PI * (self.boltzmann * temperature / self.atomic_mass).sqrt() / self.d1_wavelength
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_parses() {
        let c = CesiumConstants::bundled().unwrap();
        assert_eq!(c.version, 2);
        assert_eq!(c.nuclear_spin, 3.5);
        // g_F close to +-1/4
        assert!((c.g_f(4.0) - 0.25).abs() < 1e-3);
        assert!((c.g_f(3.0) + 0.25).abs() < 2e-3);
        // room-temperature Doppler width of about 150 MHz
        let sigma_mhz = c.doppler_sigma(294.13) / (2.0 * PI) / 1e6;
        assert!((sigma_mhz - 151.6).abs() < 1.0, "{sigma_mhz}");
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(CesiumConstants::parse("version = 1\n").is_err());
        assert!(CesiumConstants::parse("version 1\n").is_err());
        assert!(CesiumConstants::parse("version = one\n").is_err());
    }
}
