//! Parameter records for the memory node, the optical link and the protocol
//! post-processing, with the default values of the reference SiC setup.

use crate::channel::{self, DetectorSpec, FiberSpec, NodeOptics};
use crate::error::{Error, Result};
use crate::spin_photon::{DecoherenceParams, WriteMap};

/// Spin, cavity and timing parameters of one memory device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    /// Electron-spin amplitude decay time in seconds.
    pub t1: f64,
    /// Electron-spin dephasing time in seconds.
    pub t2: f64,
    pub t1_nuclear: f64,
    pub t2_nuclear: f64,
    /// Electron-to-nuclear conversion time in seconds.
    pub t_en: f64,
    /// Spin readout time in seconds.
    pub tau_r: f64,
    /// Microwave π-pulse duration in seconds.
    pub tau_pi: f64,
    /// Spin initialization time in seconds; `None` means `τ_R + τ_π`.
    pub tau_init: Option<f64>,
    pub eta_up: f64,
    pub eta_down: f64,
    /// Optical linewidth (FWHM) in Hz.
    pub gamma_linewidth: f64,
    /// Optical pulse duration in seconds.
    pub tau_p: f64,
    /// Write-and-herald efficiency for a photon at the memory input.
    pub eta_w: f64,
    /// Retrieval efficiency right after loading.
    pub eta_r0: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            t1: 30.0,
            t2: 10e-3,
            t1_nuclear: 30.0,
            t2_nuclear: 10.0,
            t_en: 10e-6,
            tau_r: 400e-9,
            tau_pi: 100e-9,
            tau_init: None,
            eta_up: 1.0,
            eta_down: 0.0,
            gamma_linewidth: 100e6,
            tau_p: 11.2e-9,
            eta_w: 0.13,
            eta_r0: 1.0,
        }
    }
}

impl DeviceParams {
    pub fn tau_init(&self) -> f64 {
        self.tau_init.unwrap_or(self.tau_r + self.tau_pi)
    }

    /// Length of one protocol round, `2τ_π + 2τ_p`.
    pub fn round_time(&self) -> f64 {
        2.0 * self.tau_pi + 2.0 * self.tau_p
    }

    pub fn repetition_rate(&self) -> Result<f64> {
        channel::repetition_rate(self.tau_pi, self.tau_p)
    }

    pub fn decoherence(&self) -> DecoherenceParams {
        DecoherenceParams {
            t1: self.t1,
            t2: self.t2,
            t1_nuclear: self.t1_nuclear,
            t2_nuclear: self.t2_nuclear,
            conv_time_e_n: self.t_en,
            eta_r0: self.eta_r0,
        }
    }

    pub fn write_map(&self) -> Result<WriteMap> {
        WriteMap::new(self.eta_up, self.eta_down)
    }

    pub fn validate(&self) -> Result<()> {
        self.decoherence().validate()?;
        for (name, v) in [
            ("tau_r", self.tau_r),
            ("tau_pi", self.tau_pi),
            ("tau_p", self.tau_p),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite and > 0")));
            }
        }
        if let Some(t) = self.tau_init {
            if !(t >= 0.0) {
                return Err(Error::domain("tau_init must be >= 0"));
            }
        }
        if !(self.gamma_linewidth >= 0.0) {
            return Err(Error::domain("gamma_linewidth must be >= 0"));
        }
        self.write_map()?;
        for (name, v) in [("eta_w", self.eta_w), ("eta_r0", self.eta_r0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fiber, detector and node-optics parameters shared by all protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Fiber attenuation in dB/km.
    pub alpha: f64,
    pub detector: DetectorSpec,
    pub optics: NodeOptics,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            alpha: 0.3,
            detector: DetectorSpec {
                efficiency: 0.85,
                dark_rate: 100.0,
                timing_jitter: 50e-12,
                background_rate: 0.0,
            },
            optics: NodeOptics {
                circulator_loss: 0.8,
                switch_loss: 0.6,
                switch_rise_fall: 8e-9,
                switch_min_pulse: 90e-9,
            },
        }
    }
}

impl LinkConfig {
    pub fn fiber(&self, length_km: f64) -> Result<FiberSpec> {
        FiberSpec::new(self.alpha, length_km)
    }

    pub fn transmittance(&self, length_km: f64) -> Result<f64> {
        Ok(channel::transmittance(&self.fiber(length_km)?))
    }

    /// Probability of a dark or background click in either of two detectors
    /// during one coincidence window of width `t_SPD`.
    pub fn dark_click_pair(&self) -> Result<f64> {
        let doubled = DetectorSpec {
            dark_rate: 2.0 * self.detector.dark_rate,
            background_rate: 2.0 * self.detector.background_rate,
            ..self.detector
        };
        if self.detector.timing_jitter == 0.0 {
            return Ok(0.0);
        }
        channel::dark_click_prob(&doubled, self.detector.timing_jitter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::domain("alpha_ob must be finite and >= 0"));
        }
        self.detector.validate()?;
        self.optics.validate()
    }
}

/// Everything needed to evaluate a key rate at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub device: DeviceParams,
    pub link: LinkConfig,
    /// Photon rate of the direct-transmission protocols in Hz; `None` means
    /// the memory repetition rate.
    pub source_rate: Option<f64>,
    /// Error-correction inefficiency.
    pub f: f64,
    pub e_a: f64,
    pub e_b: f64,
    /// Memory cutoff time in seconds; `None` means `T₂`.
    pub memory_cutoff: Option<f64>,
    /// Whether the second device accepts photons while the first is being read out.
    pub pipelining: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            device: DeviceParams::default(),
            link: LinkConfig::default(),
            source_rate: None,
            f: 1.16,
            e_a: 0.0,
            e_b: 0.0,
            memory_cutoff: None,
            pipelining: true,
        }
    }
}

impl ProtocolConfig {
    pub fn source_rate(&self) -> Result<f64> {
        match self.source_rate {
            Some(r) => Ok(r),
            None => self.device.repetition_rate(),
        }
    }

    pub fn memory_cutoff(&self) -> f64 {
        self.memory_cutoff.unwrap_or(self.device.t2)
    }

    /// Combined misalignment `e_A(1−e_B) + e_B(1−e_A)` of the two senders.
    pub fn misalignment(&self) -> f64 {
        self.e_a * (1.0 - self.e_b) + self.e_b * (1.0 - self.e_a)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.link.validate()?;
        if let Some(r) = self.source_rate {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::domain("source_rate must be finite and > 0"));
            }
        }
        if !(self.f >= 1.0) {
            return Err(Error::domain("f must be >= 1"));
        }
        for (name, v) in [("e_a", self.e_a), ("e_b", self.e_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1]")));
            }
        }
        if let Some(c) = self.memory_cutoff {
            if !(c > 0.0) {
                return Err(Error::domain("memory_cutoff must be > 0"));
            }
        }
        Ok(())
    }

    /// Warnings that do not prevent evaluation.
    pub fn warnings(&self) -> Vec<String> {
        self.link
            .optics
            .switch_timing_warning(self.device.round_time())
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ProtocolConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.warnings().is_empty());
        assert!((cfg.device.tau_init() - 500e-9).abs() < 1e-18);
        assert!((cfg.source_rate().unwrap() - 4_496_402.877_697_842).abs() < 1e-3);
        assert_eq!(cfg.memory_cutoff(), 10e-3);
        let p = cfg.link.dark_click_pair().unwrap();
        assert!((p - 1e-8).abs() < 1e-16);
    }

    #[test]
    fn short_pulses_warn_about_switch() {
        let mut cfg = ProtocolConfig::default();
        cfg.device.tau_pi = 10e-9;
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn misalignment_combines() {
        let cfg = ProtocolConfig {
            e_a: 0.1,
            e_b: 0.2,
            ..Default::default()
        };
        assert!((cfg.misalignment() - 0.26).abs() < 1e-15);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ProtocolConfig::default();
        cfg.f = 0.9;
        assert!(cfg.validate().is_err());
        let mut cfg = ProtocolConfig::default();
        cfg.device.t2 = 100.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ProtocolConfig::default();
        cfg.memory_cutoff = Some(0.0);
        assert!(cfg.validate().is_err());
    }
}
