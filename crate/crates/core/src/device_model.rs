//! Cavity-QED figures of merit for a color center coupled to an optical cavity.
//!
//! The emitter-cavity coupling is summarized by the optical enhancement factor
//! `Υ = (λ/n)³ Q / V`, the spontaneous-emission enhancement `F_SE` and the
//! cooperativity `C = F_SE / 2`. For a symmetric, lossless cavity driven far
//! below saturation the cooperativity fixes the reflected, transmitted and
//! scattered power fractions.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Geometry and quality of the optical cavity.
///
/// The mode volume is always stored in units of `(λ/n)³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Free-space wavelength in meters.
    pub wavelength: f64,
    pub refractive_index: f64,
    pub quality_factor: f64,
    /// Mode volume in units of `(λ/n)³`.
    pub mode_volume: f64,
    /// Overlap of the defect dipole with the cavity field, in `[0, 1]`.
    pub dipole_overlap: f64,
}

impl CavityParams {
    pub fn new(
        wavelength: f64,
        refractive_index: f64,
        quality_factor: f64,
        mode_volume: f64,
        dipole_overlap: f64,
    ) -> Result<Self> {
        let params = CavityParams {
            wavelength,
            refractive_index,
            quality_factor,
            mode_volume,
            dipole_overlap,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds the record from an absolute mode volume in cubic meters.
    pub fn from_absolute_volume(
        wavelength: f64,
        refractive_index: f64,
        quality_factor: f64,
        volume_m3: f64,
        dipole_overlap: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0) || !(refractive_index >= 1.0) {
            return Err(Error::domain(
                "wavelength must be > 0 and refractive index >= 1",
            ));
        }
        let unit = (wavelength / refractive_index).powi(3);
        Self::new(
            wavelength,
            refractive_index,
            quality_factor,
            volume_m3 / unit,
            dipole_overlap,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::domain("wavelength must be > 0"));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::domain("refractive index must be >= 1"));
        }
        if !(self.quality_factor > 0.0) {
            return Err(Error::domain("quality factor must be > 0"));
        }
        if !(self.mode_volume > 0.0) {
            return Err(Error::domain("mode volume must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.dipole_overlap) {
            return Err(Error::domain("dipole overlap must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Optical properties of the defect itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectOptics {
    /// Fraction of the total decay rate going into the zero-phonon line.
    pub branching_ratio: f64,
    /// Zero-phonon-line wavelength in meters.
    pub zpl_wavelength: f64,
}

impl DefectOptics {
    pub fn new(branching_ratio: f64, zpl_wavelength: f64) -> Result<Self> {
        if !(branching_ratio > 0.0 && branching_ratio <= 1.0) {
            return Err(Error::domain("branching ratio must lie in (0, 1]"));
        }
        if !(zpl_wavelength > 0.0) {
            return Err(Error::domain("zero-phonon-line wavelength must be > 0"));
        }
        Ok(DefectOptics {
            branching_ratio,
            zpl_wavelength,
        })
    }
}

/// Power fractions of a resonant probe interacting with the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse {
    pub reflect: f64,
    pub transmit: f64,
    pub scatter: f64,
}

/// `Υ = Q / V` with the mode volume in `(λ/n)³` units.
pub fn optical_enhancement(cavity: &CavityParams) -> Result<f64> {
    if !(cavity.quality_factor > 0.0) || !(cavity.mode_volume > 0.0) {
        return Err(Error::domain(
            "quality factor and mode volume must both be > 0",
        ));
    }
    Ok(cavity.quality_factor / cavity.mode_volume)
}

/// Spontaneous-emission enhancement `F_SE = 3/(4π²) · Υ · γ_ZPL/γ_tot · ζ²`.
pub fn spontaneous_emission_factor(cavity: &CavityParams, defect: &DefectOptics) -> Result<f64> {
    cavity.validate()?;
    let upsilon = optical_enhancement(cavity)?;
    Ok(enhancement_from_upsilon(
        upsilon,
        defect.branching_ratio,
        cavity.dipole_overlap,
    ))
}

/// The same expression evaluated directly from `Υ`, useful for design sweeps.
pub fn enhancement_from_upsilon(upsilon: f64, branching_ratio: f64, dipole_overlap: f64) -> f64 {
    3.0 / (4.0 * PI * PI) * upsilon * branching_ratio * dipole_overlap * dipole_overlap
}

pub fn cooperativity(f_se: f64) -> Result<f64> {
    if !(f_se >= 0.0) {
        return Err(Error::domain("enhancement factor must be >= 0"));
    }
    Ok(f_se / 2.0)
}

/// Reflection, transmission and scattering of a symmetric lossless cavity
/// at cooperativity `c`.
pub fn cavity_response(c: f64) -> Result<CavityResponse> {
    if !(c >= 0.0) || c.is_infinite() {
        return Err(Error::domain("cooperativity must be finite and >= 0"));
    }
    let denom = 2.0 * c + 1.0;
    let reflect = (2.0 * c / denom).powi(2);
    let transmit = (1.0 / denom).powi(2);
    let scatter = 4.0 * c / (denom * denom);
    Ok(CavityResponse {
        reflect,
        transmit,
        scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cavity(q: f64, v: f64, zeta: f64) -> CavityParams {
        CavityParams::new(1278e-9, 2.6, q, v, zeta).unwrap()
    }

    #[test]
    fn photonic_crystal_benchmark() {
        let upsilon = optical_enhancement(&cavity(6.3e5, 2.1, 1.0)).unwrap();
        assert!((upsilon - 3e5).abs() <= 3e5 * 1e-12);
        assert_eq!(optical_enhancement(&cavity(1.0, 1.0, 1.0)).unwrap(), 1.0);
        let fp = optical_enhancement(&cavity(2e4 * 2.1, 2.1, 1.0)).unwrap();
        assert!((fp - 2e4).abs() < 1e-8);
    }

    #[test]
    fn enhancement_and_cooperativity() {
        let defect = DefectOptics::new(0.09, 1278e-9).unwrap();
        assert_eq!(
            spontaneous_emission_factor(&cavity(6.3e5, 2.1, 0.0), &defect).unwrap(),
            0.0
        );
        let unit = enhancement_from_upsilon(4.0 * PI * PI / 3.0, 1.0, 1.0);
        assert!((unit - 1.0).abs() < 1e-14);

        let f_se = spontaneous_emission_factor(&cavity(6.3e5, 2.1, 1.0), &defect).unwrap();
        // 3/(4π²)·3e5·0.09 evaluated independently
        assert!((f_se - 2051.75396875734).abs() < 1e-8);
        let c = cooperativity(f_se).unwrap();
        assert!((c - 1025.87698437867).abs() < 1e-8);

        assert_eq!(cooperativity(0.0).unwrap(), 0.0);
        assert_eq!(cooperativity(2.0).unwrap(), 1.0);
        assert_eq!(cooperativity(200.0).unwrap(), 100.0);
        assert!(cooperativity(-1.0).is_err());
    }

    #[test]
    fn response_examples() {
        let r = cavity_response(0.0).unwrap();
        assert_eq!((r.reflect, r.transmit, r.scatter), (0.0, 1.0, 0.0));
        let r = cavity_response(0.5).unwrap();
        assert!((r.reflect - 0.25).abs() < 1e-15);
        assert!((r.transmit - 0.25).abs() < 1e-15);
        assert!((r.scatter - 0.5).abs() < 1e-15);
        let r = cavity_response(1e9).unwrap();
        assert!((1.0 - r.reflect) < 1e-8);
        assert!(r.transmit < 1e-8 && r.scatter < 1e-8);
        assert!(cavity_response(-0.1).is_err());
    }

    #[test]
    fn response_shape_on_grid() {
        let grid: Vec<f64> = (0..=3000).map(|i| 10f64.powf(-6.0 + 15.0 * i as f64 / 3000.0)).collect();
        let mut prev = cavity_response(0.0).unwrap();
        let mut best = (0.0, 0.0);
        for &c in &grid {
            let r = cavity_response(c).unwrap();
            assert!((r.reflect + r.transmit + r.scatter - 1.0).abs() < 1e-12);
            assert!(r.reflect >= prev.reflect);
            assert!(r.transmit <= prev.transmit);
            if r.scatter > best.1 {
                best = (c, r.scatter);
            }
            prev = r;
        }
        assert!((best.1 - 0.5).abs() < 1e-5);
        assert!((best.0 - 0.5).abs() / 0.5 < 0.02);
    }

    #[test]
    fn invalid_cavities_rejected() {
        assert!(CavityParams::new(1278e-9, 2.6, 0.0, 1.0, 1.0).is_err());
        assert!(CavityParams::new(1278e-9, 2.6, 1.0, -1.0, 1.0).is_err());
        assert!(CavityParams::new(1278e-9, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(CavityParams::new(1278e-9, 2.6, 1.0, 1.0, 1.5).is_err());
        assert!(DefectOptics::new(0.0, 1e-6).is_err());
    }

    #[test]
    fn absolute_volume_converts_to_cubic_wavelengths() {
        let (lambda, n): (f64, f64) = (1278e-9, 2.6);
        let unit = (lambda / n).powi(3);
        let c = CavityParams::from_absolute_volume(lambda, n, 1e5, 2.1 * unit, 1.0).unwrap();
        assert!((c.mode_volume - 2.1).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn enhancement_scaling(upsilon in 1.0f64..1e6, br in 0.01f64..1.0, zeta in 0.01f64..1.0, k in 1.1f64..5.0) {
                let base = enhancement_from_upsilon(upsilon, br, zeta);
                let rel = |a: f64, b: f64| ((a - b) / b).abs();
                prop_assert!(rel(enhancement_from_upsilon(k * upsilon, br, zeta), k * base) < 1e-12);
                let br2 = (k * br).min(1.0);
                prop_assert!(rel(enhancement_from_upsilon(upsilon, br2, zeta), base * br2 / br) < 1e-12);
                let z2 = (k * zeta).min(1.0);
                prop_assert!(rel(enhancement_from_upsilon(upsilon, br, z2), base * (z2 / zeta).powi(2)) < 1e-12);
            }
        }
    }
}
