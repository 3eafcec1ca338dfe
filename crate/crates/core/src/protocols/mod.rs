//! Asymptotic secure-key-rate models for BB84, MDI-QKD and memory-assisted
//! MDI-QKD, together with curve generation, multiplexing, region
//! classification and crossover search.
//!
//! All three protocols assume ideal single-photon sources. Distances are the
//! total Alice-to-Bob fiber length, with the node (when present) at the
//! midpoint.

mod bb84;
mod ma_mdi;
mod mdi;
mod regions;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ProtocolConfig;

pub use bb84::skr_bb84;
pub use ma_mdi::{ma_mdi_qber, ma_mdi_yield, skr_ma_mdi, NodeModel, Prediction, WaitMoments};
pub use mdi::skr_mdi;
pub use regions::{classify_regions, label_regions, RegionReport, REGION_TOLERANCE};

/// Which key-distribution scheme a curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Bb84,
    Mdi,
    MaMdi,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Bb84, Protocol::Mdi, Protocol::MaMdi];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Mdi => "mdi",
            Protocol::MaMdi => "ma_mdi",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "mdi" => Ok(Protocol::Mdi),
            "ma_mdi" | "mamdi" => Ok(Protocol::MaMdi),
            other => Err(Error::domain(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Distance regime of a memory-assisted rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    /// Rate scales with the square root of the channel transmittance.
    I,
    /// Rate is limited by memory dephasing.
    II,
    /// Rate is limited by accidental coincidences from dark counts.
    III,
    /// No secure key.
    Zero,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::Zero => "zero",
        }
    }
}

/// Rate and diagnostics at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    /// Secure key rate in bits per second.
    pub skr: f64,
    /// Probability per protocol round that a sifted key bit is produced.
    pub yield_per_round: f64,
    pub qber_x: f64,
    pub qber_z: f64,
    /// Mean time per attempt (direct protocols) or per memory cycle in seconds.
    pub cycle_time: f64,
    pub region: Option<Region>,
}

/// Rate points on a strictly increasing distance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub protocol: Protocol,
    /// Digest of the full effective configuration the curve was computed from.
    pub config_digest: String,
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn new(protocol: Protocol, config_digest: String, points: Vec<RatePoint>) -> Result<Self> {
        if points
            .windows(2)
            .any(|w| !(w[1].distance_km > w[0].distance_km))
        {
            return Err(Error::domain("curve distances must be strictly increasing"));
        }
        Ok(RateCurve {
            protocol,
            config_digest,
            points,
        })
    }

    pub fn distances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.distance_km).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.skr).collect()
    }

    /// First grid distance at which the rate is zero and stays zero.
    pub fn zero_rate_distance(&self) -> Option<f64> {
        let last_positive = self.points.iter().rposition(|p| p.skr > 0.0);
        match last_positive {
            None => self.points.first().map(|p| p.distance_km),
            Some(i) => self.points.get(i + 1).map(|p| p.distance_km),
        }
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// MDI-type key fraction `1 − h(e_x) − f·h(e_z)`, clamped at zero.
pub(crate) fn mdi_key_fraction(e_x: f64, e_z: f64, f: f64) -> f64 {
    (1.0 - binary_entropy(e_x) - f * binary_entropy(e_z)).max(0.0)
}

/// Evaluates one protocol at one total distance.
pub fn evaluate(protocol: Protocol, cfg: &ProtocolConfig, distance_km: f64) -> Result<RatePoint> {
    let point = match protocol {
        Protocol::Bb84 => skr_bb84(cfg, distance_km),
        Protocol::Mdi => skr_mdi(cfg, distance_km),
        Protocol::MaMdi => skr_ma_mdi(cfg, distance_km),
    };
    point.map_err(|e| Error::Evaluation {
        protocol: protocol.name().to_string(),
        distance_km,
        source: Box::new(e),
    })
}

/// Distance grid `min, min + step, …` up to and including `max`.
pub fn distance_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(min >= 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::domain(
            "distance grid needs step > 0 and 0 <= min <= max",
        ));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

/// Evaluates a protocol over a grid. Points are computed independently and
/// assembled by index, so the result does not depend on the thread count.
pub fn rate_curve(protocol: Protocol, cfg: &ProtocolConfig, distances: &[f64]) -> Result<RateCurve> {
    cfg.validate()?;
    let points = distances
        .par_iter()
        .map(|&d| evaluate(protocol, cfg, d))
        .collect::<Result<Vec<_>>>()?;
    RateCurve::new(protocol, crate::config::digest(cfg), points)
}

/// Scales the key rate by the number of independent wavelength and
/// polarization channels.
pub fn apply_multiplexing(point: &RatePoint, n_wavelength: u32, n_polarization: u32) -> Result<RatePoint> {
    if n_wavelength == 0 || n_polarization == 0 {
        return Err(Error::domain("multiplexing counts must be >= 1"));
    }
    let factor = f64::from(n_wavelength) * f64::from(n_polarization);
    Ok(RatePoint {
        skr: point.skr * factor,
        ..*point
    })
}

/// Smallest grid distance where curve `a` is positive and at least `b`, and
/// stays at least `b` for the following three grid points.
pub fn crossover_distance(a: &RateCurve, b: &RateCurve) -> Result<Option<f64>> {
    if a.points.len() != b.points.len()
        || a
            .points
            .iter()
            .zip(&b.points)
            .any(|(pa, pb)| pa.distance_km != pb.distance_km)
    {
        return Err(Error::domain("crossover needs curves on the same distance grid"));
    }
    let n = a.points.len();
    let ahead = |i: usize| a.points[i].skr >= b.points[i].skr;
    for i in 0..n {
        if a.points[i].skr > 0.0 && ahead(i) && (i + 1..(i + 4).min(n)).all(ahead) {
            return Ok(Some(a.points[i].distance_km));
        }
    }
    Ok(None)
}


#[cfg(test)]
mod tests {
    use super::test_util::synthetic;
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
        assert!((binary_entropy(0.11) - 0.499_915_958_164_528_1).abs() < 1e-12);
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("e91".parse::<Protocol>().is_err());
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = distance_grid(0.0, 700.0, 1.0).unwrap();
        assert_eq!(g.len(), 701);
        assert_eq!(g[700], 700.0);
        assert_eq!(distance_grid(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(distance_grid(0.0, 1.0, 0.0).is_err());
        assert!(distance_grid(5.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn curve_rejects_unordered_distances() {
        let p = synthetic(&[(0.0, 1.0)]).points[0];
        let q = RatePoint { distance_km: 0.0, ..p };
        assert!(RateCurve::new(Protocol::Bb84, String::new(), vec![p, q]).is_err());
    }

    #[test]
    fn multiplexing_examples() {
        let p = synthetic(&[(10.0, 3.0)]).points[0];
        assert_eq!(apply_multiplexing(&p, 1, 1).unwrap(), p);
        assert_eq!(apply_multiplexing(&p, 88, 2).unwrap().skr, 3.0 * 176.0);
        let z = RatePoint { skr: 0.0, ..p };
        assert_eq!(apply_multiplexing(&z, 88, 2).unwrap().skr, 0.0);
        assert!(apply_multiplexing(&p, 0, 2).is_err());
    }

    #[test]
    fn crossover_examples() {
        let b = synthetic(&[(0.0, 4.0), (1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (4.0, 0.5)]);
        assert_eq!(crossover_distance(&b, &b).unwrap(), Some(0.0));
        let a2 = synthetic(&[(0.0, 8.0), (1.0, 6.0), (2.0, 4.0), (3.0, 2.0), (4.0, 1.0)]);
        assert_eq!(crossover_distance(&a2, &b).unwrap(), Some(0.0));
        let a = synthetic(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]);
        assert_eq!(crossover_distance(&a, &b).unwrap(), Some(3.0));
        let never = synthetic(&[(0.0, 0.1), (1.0, 0.1), (2.0, 0.1), (3.0, 0.1), (4.0, 0.1)]);
        assert_eq!(crossover_distance(&never, &b).unwrap(), None);
        let other = synthetic(&[(0.0, 1.0), (2.0, 1.0)]);
        assert!(crossover_distance(&other, &b).is_err());
    }

    #[test]
    fn zero_rate_distance() {
        let c = synthetic(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(c.zero_rate_distance(), Some(2.0));
        let c = synthetic(&[(0.0, 2.0), (1.0, 1.0)]);
        assert_eq!(c.zero_rate_distance(), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn entropy_symmetric_and_bounded(p in 0.0f64..=1.0) {
                let h = binary_entropy(p);
                prop_assert!((0.0..=1.0).contains(&h));
                prop_assert!((h - binary_entropy(1.0 - p)).abs() < 1e-12);
            }

            #[test]
            fn key_fraction_never_negative(ex in 0.0f64..=0.5, ez in 0.0f64..=0.5, f in 1.0f64..2.0) {
                prop_assert!(mdi_key_fraction(ex, ez, f) >= 0.0);
            }

            #[test]
            fn multiplexing_scales_exactly(r in 0.0f64..1e9, nw in 1u32..200, np in 1u32..3) {
                let p = synthetic(&[(1.0, r)]).points[0];
                let m = apply_multiplexing(&p, nw, np).unwrap();
                prop_assert_eq!(m.skr, r * f64::from(nw) * f64::from(np));
                prop_assert_eq!((m.qber_x, m.qber_z, m.yield_per_round), (p.qber_x, p.qber_z, p.yield_per_round));
            }
        }
    }
}
