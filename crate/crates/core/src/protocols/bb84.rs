//! Point-to-point BB84 with an ideal single-photon source.

use super::{binary_entropy, RatePoint};
use crate::error::Result;
use crate::params::ProtocolConfig;

/// BB84 key rate over `distance_km` of fiber.
///
/// Dark clicks are counted for both detectors of the measurement basis and
/// contribute an error of one half.
pub fn skr_bb84(cfg: &ProtocolConfig, distance_km: f64) -> Result<RatePoint> {
    let rate = cfg.source_rate()?;
    let eta = cfg.link.transmittance(distance_km)? * cfg.link.detector.efficiency;
    let p_dark = cfg.link.dark_click_pair()?;
    let p_click = eta + (1.0 - eta) * p_dark;
    let e_mis = cfg.misalignment();
    let qber = if p_click > 0.0 {
        ((e_mis * eta + 0.5 * p_dark) / p_click).min(0.5)
    } else {
        0.5
    };
    let fraction = (1.0 - (1.0 + cfg.f) * binary_entropy(qber)).max(0.0);
    let sifted = 0.5 * p_click;
    Ok(RatePoint {
        distance_km,
        skr: rate * sifted * fraction,
        yield_per_round: sifted,
        qber_x: qber,
        qber_z: qber,
        cycle_time: 1.0 / rate,
        region: None,
    })
}
