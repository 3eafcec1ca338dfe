//! Slope-based labeling of a rate curve into distance regimes.
//!
//! With fiber attenuation `α` in dB/km, a rate that scales with the square
//! root of the channel transmittance falls by `α/20` decades per km, and one
//! that scales with the full transmittance by `α/10`. Each positive point is
//! labeled from its local decay slope `−d log₁₀R / dL`:
//!
//! * region I inside `α/20 ± 30%` or below it,
//! * region II inside `α/10 ± 30%`,
//! * region III when steeper than `2·α/10`.
//!
//! Slopes falling between two bands go to the nearer band, with the split
//! placed at the geometric mean of the two facing band edges. The last
//! positive point before the rate vanishes is always region III.

use super::{RateCurve, Region};
use crate::error::{Error, Result};

/// Relative half-width of the region I and region II slope bands.
pub const REGION_TOLERANCE: f64 = 0.3;

/// Labels and boundaries found on one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub labels: Vec<Region>,
    /// Local decay slope in decades per km, `None` where the rate is zero.
    pub slopes: Vec<Option<f64>>,
    /// First distance labeled region II.
    pub boundary_i_ii: Option<f64>,
    /// First distance labeled region III.
    pub boundary_ii_iii: Option<f64>,
    pub tolerance: f64,
}

impl RegionReport {
    /// True when the labels read I…, II…, III…, zero… with each block
    /// present at most once and in this order.
    pub fn is_ordered(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn contains(&self, region: Region) -> bool {
        self.labels.contains(&region)
    }

    /// Least-squares decay slope over the points carrying `region`.
    pub fn fitted_slope(&self, curve: &RateCurve, region: Region) -> Option<f64> {
        let pts: Vec<(f64, f64)> = curve
            .points
            .iter()
            .zip(&self.labels)
            .filter(|(p, l)| **l == region && p.skr > 0.0)
            .map(|(p, _)| (p.distance_km, p.skr.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(-sxy / sxx)
    }
}

fn band(slope: f64, s1: f64, s2: f64) -> Region {
    let t = REGION_TOLERANCE;
    let (hi1, lo2, hi2, s3) = ((1.0 + t) * s1, (1.0 - t) * s2, (1.0 + t) * s2, 2.0 * s2);
    if slope <= hi1 {
        Region::I
    } else if slope < lo2 {
        if slope <= (hi1 * lo2).sqrt() {
            Region::I
        } else {
            Region::II
        }
    } else if slope <= hi2 {
        Region::II
    } else if slope <= s3 {
        if slope <= (hi2 * s3).sqrt() {
            Region::II
        } else {
            Region::III
        }
    } else {
        Region::III
    }
}

/// Classifies every point of `curve` for fiber attenuation `alpha` in dB/km.
pub fn classify_regions(curve: &RateCurve, alpha: f64) -> Result<RegionReport> {
    if curve.points.len() < 10 {
        return Err(Error::domain("region classification needs at least 10 points"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain("region classification needs alpha > 0"));
    }
    let s1 = alpha / 20.0;
    let s2 = alpha / 10.0;
    let pts = &curve.points;
    let n = pts.len();
    let positive = |i: usize| pts[i].skr > 0.0;
    let decay = |a: usize, b: usize| -> f64 {
        -(pts[b].skr.log10() - pts[a].skr.log10()) / (pts[b].distance_km - pts[a].distance_km)
    };
    let mut labels = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    for i in 0..n {
        if !positive(i) {
            labels.push(Region::Zero);
            slopes.push(None);
            continue;
        }
        let prev = i > 0 && positive(i - 1);
        let next = i + 1 < n && positive(i + 1);
        let slope = match (prev, next) {
            (true, true) => Some(decay(i - 1, i + 1)),
            (false, true) => Some(decay(i, i + 1)),
            (true, false) => Some(decay(i - 1, i)),
            (false, false) => None,
        };
        slopes.push(slope);
        let label = if i + 1 < n && !next {
            Region::III
        } else {
            match slope {
                Some(s) => band(s, s1, s2),
                None => Region::I,
            }
        };
        labels.push(label);
    }
    let first = |r: Region| {
        labels
            .iter()
            .position(|l| *l == r)
            .map(|i| pts[i].distance_km)
    };
    Ok(RegionReport {
        boundary_i_ii: first(Region::II),
        boundary_ii_iii: first(Region::III),
        labels,
        slopes,
        tolerance: REGION_TOLERANCE,
    })
}

/// Classifies `curve` and stores the labels on its points.
pub fn label_regions(curve: &mut RateCurve, alpha: f64) -> Result<RegionReport> {
    let report = classify_regions(curve, alpha)?;
    for (p, l) in curve.points.iter_mut().zip(&report.labels) {
        p.region = Some(*l);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::synthetic;
    use super::*;

    fn exp_curve(decades_per_km: f64) -> RateCurve {
        let v: Vec<(f64, f64)> = (0..200)
            .map(|i| (i as f64, 1e6 * 10f64.powf(-decades_per_km * i as f64)))
            .collect();
        synthetic(&v)
    }

    #[test]
    fn pure_half_loss_is_region_one() {
        let r = classify_regions(&exp_curve(0.015), 0.3).unwrap();
        assert!(r.labels.iter().all(|l| *l == Region::I));
        assert_eq!(r.boundary_i_ii, None);
    }

    #[test]
    fn pure_full_loss_is_region_two() {
        let r = classify_regions(&exp_curve(0.03), 0.3).unwrap();
        assert!(r.labels.iter().all(|l| *l == Region::II));
        assert_eq!(r.boundary_i_ii, Some(0.0));
    }

    #[test]
    fn piecewise_curve_has_three_ordered_bands() {
        let mut v = Vec::new();
        let mut log = 6.0;
        for i in 0..120 {
            let slope = if i < 50 {
                0.015
            } else if i < 100 {
                0.03
            } else {
                0.2
            };
            v.push((i as f64, 10f64.powf(log)));
            log -= slope;
        }
        v.push((120.0, 0.0));
        v.push((121.0, 0.0));
        let c = synthetic(&v);
        let r = classify_regions(&c, 0.3).unwrap();
        assert!(r.is_ordered());
        assert_eq!(r.boundary_i_ii, Some(50.0));
        assert_eq!(r.boundary_ii_iii, Some(100.0));
        assert_eq!(r.labels[120], Region::Zero);
        let s1 = r.fitted_slope(&c, Region::I).unwrap();
        assert!((s1 - 0.015).abs() < 1e-3);
    }

    #[test]
    fn all_zero_curve_has_no_regions() {
        let c = synthetic(&(0..20).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let r = classify_regions(&c, 0.3).unwrap();
        assert!(r.labels.iter().all(|l| *l == Region::Zero));
        assert_eq!((r.boundary_i_ii, r.boundary_ii_iii), (None, None));
    }

    #[test]
    fn short_curves_rejected() {
        assert!(classify_regions(&exp_curve(0.03).clone_with_len(5), 0.3).is_err());
    }

    #[test]
    fn gap_slopes_go_to_nearer_band() {
        assert_eq!(band(0.0196, 0.015, 0.03), Region::I);
        assert_eq!(band(0.0209, 0.015, 0.03), Region::II);
        assert_eq!(band(0.041, 0.015, 0.03), Region::II);
        assert_eq!(band(0.059, 0.015, 0.03), Region::III);
        assert_eq!(band(-0.01, 0.015, 0.03), Region::I);
    }

    impl RateCurve {
        fn clone_with_len(&self, n: usize) -> RateCurve {
            RateCurve {
                points: self.points[..n].to_vec(),
                ..self.clone()
            }
        }
    }
}
