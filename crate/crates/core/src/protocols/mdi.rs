//! MDI-QKD with a linear-optics Bell measurement at the midpoint.

use super::{mdi_key_fraction, RatePoint};
use crate::error::Result;
use crate::params::ProtocolConfig;

/// MDI-QKD key rate for a node at `distance_km / 2` from each sender.
///
/// A round succeeds when both half-links produce a click, which happens with
/// probability `½·c²` where `c` includes dark clicks. Coincidences involving
/// a dark click carry a random Bell outcome.
pub fn skr_mdi(cfg: &ProtocolConfig, distance_km: f64) -> Result<RatePoint> {
    let rate = cfg.source_rate()?;
    let s = cfg.link.transmittance(distance_km / 2.0)? * cfg.link.detector.efficiency;
    let p_dark = cfg.link.dark_click_pair()?;
    let click = s + (1.0 - s) * p_dark;
    let yield_per_round = 0.5 * click * click;
    let genuine = if click > 0.0 { (s / click).powi(2) } else { 0.0 };
    let e_x = (1.0 - genuine) / 2.0;
    let e_z = genuine * cfg.misalignment() + (1.0 - genuine) / 2.0;
    let fraction = mdi_key_fraction(e_x, e_z, cfg.f);
    Ok(RatePoint {
        distance_km,
        skr: rate * yield_per_round * fraction,
        yield_per_round,
        qber_x: e_x,
        qber_z: e_z,
        cycle_time: 1.0 / rate,
        region: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_components_give_half() {
        let mut cfg = ProtocolConfig::default();
        cfg.link.detector.dark_rate = 0.0;
        cfg.link.detector.efficiency = 1.0;
        cfg.source_rate = Some(1e6);
        let p = skr_mdi(&cfg, 0.0).unwrap();
        assert_eq!(p.skr, 5e5);
        let cfg = ProtocolConfig::default();
        let p = skr_mdi(&cfg, 0.0).unwrap();
        let expected = 0.5 * 0.85f64.powi(2);
        assert!((p.yield_per_round - expected).abs() < 1e-8);
    }

    #[test]
    fn loss_dominated_slope() {
        let cfg = ProtocolConfig::default();
        let r1 = skr_mdi(&cfg, 100.0).unwrap().skr;
        let r2 = skr_mdi(&cfg, 101.0).unwrap().skr;
        let slope = (r2.log10() - r1.log10()) / 1.0;
        assert!((slope + 0.03).abs() < 0.0015, "slope {slope}");
    }

    #[test]
    fn misalignment_raises_z_error() {
        let cfg = ProtocolConfig {
            e_a: 0.01,
            ..Default::default()
        };
        let p = skr_mdi(&cfg, 10.0).unwrap();
        assert!(p.qber_z > 0.0099 && p.qber_z < 0.0101);
    }
}
