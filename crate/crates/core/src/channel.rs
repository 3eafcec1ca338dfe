//! Link-budget primitives: fiber transmittance, detector dark clicks,
//! passive insertion losses and the protocol repetition-rate bound.

use crate::error::{Error, Result};

/// A single fiber span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    /// Attenuation in dB/km.
    pub attenuation: f64,
    /// Length in km.
    pub length: f64,
}

impl FiberSpec {
    pub fn new(attenuation: f64, length: f64) -> Result<Self> {
        if !(attenuation >= 0.0) || !attenuation.is_finite() {
            return Err(Error::domain("fiber attenuation must be finite and >= 0"));
        }
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::domain("fiber length must be finite and >= 0"));
        }
        Ok(FiberSpec {
            attenuation,
            length,
        })
    }
}

/// Single-photon detector figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Dark-count rate in Hz.
    pub dark_rate: f64,
    /// Timing jitter in seconds.
    pub timing_jitter: f64,
    /// Background click rate in Hz.
    pub background_rate: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::domain("detector efficiency must lie in [0, 1]"));
        }
        if !(self.dark_rate >= 0.0) || !(self.background_rate >= 0.0) {
            return Err(Error::domain("detector click rates must be >= 0"));
        }
        if !(self.timing_jitter >= 0.0) {
            return Err(Error::domain("detector timing jitter must be >= 0"));
        }
        Ok(())
    }
}

/// Insertion losses and timing of the passive components at the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeOptics {
    /// Circulator insertion loss in dB.
    pub circulator_loss: f64,
    /// Optical-switch insertion loss in dB.
    pub switch_loss: f64,
    /// Switch rise/fall time in seconds.
    pub switch_rise_fall: f64,
    /// Minimum switch pulse width in seconds.
    pub switch_min_pulse: f64,
}

impl NodeOptics {
    pub fn validate(&self) -> Result<()> {
        if !(self.circulator_loss >= 0.0) || !(self.switch_loss >= 0.0) {
            return Err(Error::domain("insertion losses must be >= 0 dB"));
        }
        if !(self.switch_rise_fall >= 0.0) || !(self.switch_min_pulse >= 0.0) {
            return Err(Error::domain("switch timing values must be >= 0"));
        }
        Ok(())
    }

    /// Returns a warning when one protocol round is shorter than the
    /// minimum pulse width the switch can produce.
    pub fn switch_timing_warning(&self, round_time: f64) -> Option<String> {
        if round_time < self.switch_min_pulse {
            Some(format!(
                "round time {:.3e} s is shorter than the switch minimum pulse width {:.3e} s",
                round_time, self.switch_min_pulse
            ))
        } else {
            None
        }
    }
}

/// Power transmittance `10^(−α·L/10)` of a fiber span.
pub fn transmittance(fiber: &FiberSpec) -> f64 {
    10f64.powf(-fiber.attenuation * fiber.length / 10.0)
}

/// Converts an insertion loss in dB into a transmission probability.
pub fn db_to_efficiency(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::domain("insertion loss must be >= 0 dB"));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Probability of at least one dark or background click within `window`.
pub fn dark_click_prob(det: &DetectorSpec, window: f64) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::domain("detection window must be > 0"));
    }
    let rate = det.dark_rate + det.background_rate;
    if !(rate >= 0.0) {
        return Err(Error::domain("detector click rates must be >= 0"));
    }
    Ok(-(-rate * window).exp_m1())
}

/// Photon repetition rate `1/(2τ_π + 2τ_p)` of the time-bin write sequence.
pub fn repetition_rate(tau_pi: f64, tau_p: f64) -> Result<f64> {
    if !(tau_pi > 0.0) || !(tau_p >= 0.0) {
        return Err(Error::domain("τ_π must be > 0 and τ_p >= 0"));
    }
    Ok(1.0 / (2.0 * tau_pi + 2.0 * tau_p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(dark: f64) -> DetectorSpec {
        DetectorSpec {
            efficiency: 0.85,
            dark_rate: dark,
            timing_jitter: 50e-12,
            background_rate: 0.0,
        }
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance(&FiberSpec::new(0.3, 0.0).unwrap()), 1.0);
        let t = transmittance(&FiberSpec::new(0.3, 100.0).unwrap());
        assert!((t - 1e-3).abs() < 1e-15);
        let t = transmittance(&FiberSpec::new(0.2, 100.0).unwrap());
        assert!((t - 1e-2).abs() < 1e-14);
        assert!(FiberSpec::new(-0.1, 1.0).is_err());
        assert!(FiberSpec::new(0.1, -1.0).is_err());
    }

    #[test]
    fn db_examples() {
        assert_eq!(db_to_efficiency(0.0).unwrap(), 1.0);
        assert!((db_to_efficiency(0.8).unwrap() - 0.831763771102671).abs() < 1e-12);
        assert!((db_to_efficiency(0.6).unwrap() - 0.870963589956081).abs() < 1e-12);
        assert!(db_to_efficiency(-1.0).is_err());
    }

    #[test]
    fn dark_click_examples() {
        assert_eq!(dark_click_prob(&det(0.0), 11.2e-9).unwrap(), 0.0);
        let p = dark_click_prob(&det(100.0), 11.2e-9).unwrap();
        assert!((p - 1.12e-6).abs() < 1e-12);
        let p = dark_click_prob(&det(100.0), 1.0).unwrap();
        assert!((1.0 - p) < 1e-40);
        assert!(dark_click_prob(&det(100.0), 0.0).is_err());
    }

    #[test]
    fn repetition_examples() {
        let r = repetition_rate(100e-9, 11.2e-9).unwrap();
        assert!((r - 4_496_402.877_697_842).abs() < 1e-3);
        assert_eq!(repetition_rate(100e-9, 0.0).unwrap(), 5e6);
        let r = repetition_rate(10e-9, 11.2e-9).unwrap();
        assert!((r - 23_584_905.660_377_36).abs() < 1e-3);
    }

    #[test]
    fn switch_warning() {
        let optics = NodeOptics {
            circulator_loss: 0.8,
            switch_loss: 0.6,
            switch_rise_fall: 8e-9,
            switch_min_pulse: 90e-9,
        };
        assert!(optics.switch_timing_warning(222.4e-9).is_none());
        assert!(optics.switch_timing_warning(42.4e-9).is_some());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transmittance_multiplicative(a in 0.0f64..1.0, l1 in 0.0f64..500.0, l2 in 0.0f64..500.0) {
                let t12 = transmittance(&FiberSpec::new(a, l1 + l2).unwrap());
                let t1 = transmittance(&FiberSpec::new(a, l1).unwrap());
                let t2 = transmittance(&FiberSpec::new(a, l2).unwrap());
                prop_assert!((t12 - t1 * t2).abs() < 1e-12);
            }

            #[test]
            fn dark_click_monotone(rate in 0.0f64..1e6, w in 1e-12f64..1.0, k in 1.0f64..10.0) {
                let p = dark_click_prob(&det(rate), w).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(dark_click_prob(&det(rate), w * k).unwrap() >= p);
                prop_assert!(dark_click_prob(&det(rate * k), w).unwrap() >= p);
            }

            #[test]
            fn repetition_decreasing(pi in 1e-9f64..1e-6, p in 0.0f64..1e-7, d in 1e-12f64..1e-7) {
                let r = repetition_rate(pi, p).unwrap();
                prop_assert!(repetition_rate(pi + d, p).unwrap() < r);
                prop_assert!(repetition_rate(pi, p + d).unwrap() < r);
            }
        }
    }
}
