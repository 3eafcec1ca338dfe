//! Memory-assisted MDI-QKD with a two-device toggling node.
//!
//! A memory cycle has two phases. In the first, both half-links are offered to
//! the idle device until either side heralds; if both herald in the same round
//! one of them is kept. The switch then toggles and the device waits at most
//! `N_max` rounds for a herald from the other side. A success is followed by
//! readout and reinitialization, a timeout by reinitialization only. With
//! pipelining the second device starts its own cycle while the first one is
//! being reset, so the node only stalls when a device is still busy.
//!
//! The waiting time of the second herald is a geometric variable truncated at
//! `N_max`. All of its moments used here have closed forms, evaluated through
//! `ln_1p` and `expm1` so they stay accurate for herald probabilities down to
//! the dark-click level.

use super::{mdi_key_fraction, RatePoint};
use crate::channel::db_to_efficiency;
use crate::error::{Error, Result};
use crate::params::ProtocolConfig;

/// Everything the node dynamics depend on, reduced to round units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeModel {
    /// Round duration in seconds.
    pub round_time: f64,
    /// Probability per round that a photon from one side is written and heralded.
    pub p_photon: f64,
    /// Probability per round of a dark or background herald on one side.
    pub p_dark: f64,
    /// Maximum number of rounds the loaded memory waits for the other side.
    pub n_max: u64,
    /// Rounds a device is unavailable after a successful Bell measurement.
    pub dead_success: u64,
    /// Rounds a device is unavailable after a timeout.
    pub dead_timeout: u64,
    pub t1: f64,
    pub t2: f64,
    pub eta_r0: f64,
    /// Combined sender misalignment.
    pub misalignment: f64,
    pub pipelining: bool,
}

/// Moments of the truncated-geometric second-herald wait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitMoments {
    /// Probability that the second herald arrives within `N_max` rounds.
    pub success_prob: f64,
    /// Mean wait in rounds given success; NaN when success is impossible.
    pub mean_wait_success: f64,
    /// Mean number of rounds spent waiting, timeouts included.
    pub mean_wait_rounds: f64,
    /// Mean phase-flip probability of the stored qubit given success.
    pub mean_dephase_error: f64,
    /// Mean retrieval efficiency given success.
    pub mean_retrieval: f64,
}

/// Closed-form predictions of the node model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Per-round herald probability of one side.
    pub herald_prob: f64,
    /// Per-round probability that at least one side heralds.
    pub first_herald_prob: f64,
    pub wait: WaitMoments,
    /// Mean rounds per cycle, stalls and dead time included.
    pub mean_cycle_rounds: f64,
    /// Successful Bell measurements with a retrieved spin, per round.
    pub yield_per_round: f64,
    /// Fraction of heralds caused by dark or background clicks.
    pub dark_fraction: f64,
    pub e_x: f64,
    pub e_z: f64,
}

fn ceil_rounds(duration: f64, round_time: f64) -> u64 {
    (duration / round_time - 1e-9).ceil().max(0.0) as u64
}

impl NodeModel {
    /// Builds the model for a symmetric link of total length `distance_km`.
    pub fn from_config(cfg: &ProtocolConfig, distance_km: f64) -> Result<Self> {
        cfg.validate()?;
        let dev = &cfg.device;
        let round_time = 1.0 / dev.repetition_rate()?;
        let t_half = cfg.link.transmittance(distance_km / 2.0)?;
        let p_photon = t_half * db_to_efficiency(cfg.link.optics.switch_loss)? * dev.eta_w;
        let p_dark = cfg.link.dark_click_pair()?;
        let n_max = (cfg.memory_cutoff() / round_time + 1e-9).floor() as u64;
        let tau_init = dev.tau_init();
        Ok(NodeModel {
            round_time,
            p_photon,
            p_dark,
            n_max,
            dead_success: ceil_rounds(dev.tau_r + dev.tau_pi + tau_init, round_time),
            dead_timeout: ceil_rounds(tau_init, round_time),
            t1: dev.t1,
            t2: dev.t2,
            eta_r0: dev.eta_r0,
            misalignment: cfg.misalignment(),
            pipelining: cfg.pipelining,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.round_time > 0.0) {
            return Err(Error::domain("round time must be > 0"));
        }
        for (name, v) in [
            ("p_photon", self.p_photon),
            ("p_dark", self.p_dark),
            ("eta_r0", self.eta_r0),
            ("misalignment", self.misalignment),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.t1 > 0.0) || !(self.t2 > 0.0) {
            return Err(Error::domain("t1 and t2 must be > 0"));
        }
        Ok(())
    }

    /// Per-round herald probability of one side, photon or dark click.
    pub fn herald_prob(&self) -> f64 {
        self.p_photon + (1.0 - self.p_photon) * self.p_dark
    }

    pub fn dark_fraction(&self) -> f64 {
        let p = self.herald_prob();
        if p > 0.0 {
            self.p_dark * (1.0 - self.p_photon) / p
        } else {
            0.0
        }
    }

    /// Digest of the parameters that shape the herald and timing statistics.
    /// Two models with the same digest sample identical cycle structures.
    pub fn structure_digest(&self) -> String {
        format!(
            "rt={:e};pp={:e};pd={:e};n={};ds={};dt={};pipe={}",
            self.round_time,
            self.p_photon,
            self.p_dark,
            self.n_max,
            self.dead_success,
            self.dead_timeout,
            self.pipelining
        )
    }

    pub fn wait_moments(&self) -> WaitMoments {
        let p = self.herald_prob();
        let n = self.n_max as f64;
        if p <= 0.0 || self.n_max == 0 {
            return WaitMoments {
                success_prob: 0.0,
                mean_wait_success: f64::NAN,
                mean_wait_rounds: n,
                mean_dephase_error: 0.5,
                mean_retrieval: 0.0,
            };
        }
        let ln_u = (-p).ln_1p();
        let a = n * ln_u;
        let success_prob = -a.exp_m1();
        let mean_wait_success = 1.0 / p - n / (-a).exp_m1();
        let tau = self.round_time;
        let coherence = truncated_power_mean(p, self.n_max, -tau / self.t2, success_prob);
        let retrieval = truncated_power_mean(p, self.n_max, -tau / self.t1, success_prob);
        WaitMoments {
            success_prob,
            mean_wait_success,
            mean_wait_rounds: success_prob / p,
            mean_dephase_error: (1.0 - coherence) / 2.0,
            mean_retrieval: self.eta_r0 * retrieval,
        }
    }

    /// Mean cycle length in rounds.
    pub fn mean_cycle_rounds(&self) -> f64 {
        let p = self.herald_prob();
        if p <= 0.0 {
            return f64::INFINITY;
        }
        let q = p * (2.0 - p);
        let w = self.wait_moments();
        let active = 1.0 / q + w.mean_wait_rounds;
        let dead = w.success_prob * self.dead_success as f64
            + (1.0 - w.success_prob) * self.dead_timeout as f64;
        if self.pipelining {
            active + self.mean_stall_rounds()
        } else {
            active + dead
        }
    }

    /// Stationary mean stall before a pipelined cycle.
    ///
    /// The stall before cycle `n+1` is `max(0, d_{n−1} − ρ_n − K_n)`, where
    /// `d_{n−1}` is the dead time left by the cycle two steps back on the same
    /// device, `ρ_n` the previous stall and `K_n` the active length of cycle
    /// `n`. The pair `(d, ρ)` is a finite Markov chain whose stationary law is
    /// found by power iteration on its lazy version.
    fn mean_stall_rounds(&self) -> f64 {
        let p = self.herald_prob();
        let q = p * (2.0 - p);
        let w = self.wait_moments();
        let dead = [self.dead_success as usize, self.dead_timeout as usize];
        let outcome_prob = [w.success_prob, 1.0 - w.success_prob];
        let jmax = dead[0].max(dead[1]);
        if jmax <= 2 {
            return 0.0;
        }
        // joint law of (outcome, K = K1 + K2) for K < jmax
        let u = 1.0 - p;
        let k1 = |i: usize| q * (1.0 - q).powi(i as i32 - 1);
        let k2 = |k: usize, o: usize| -> f64 {
            let n = self.n_max as usize;
            match o {
                0 if k >= 1 && k <= n => p * u.powi(k as i32 - 1),
                1 if k == n => u.powi(n as i32),
                _ => 0.0,
            }
        };
        let mut joint = vec![[0.0f64; 2]; jmax + 1];
        for (j, row) in joint.iter_mut().enumerate().skip(2) {
            for (o, cell) in row.iter_mut().enumerate() {
                *cell = (1..j).map(|i| k1(i) * k2(j - i, o)).sum();
            }
        }
        let n_rho = jmax + 1;
        let idx = |d: usize, rho: usize| d * n_rho + rho;
        let size = 2 * n_rho;
        let mut trans = vec![vec![0.0f64; size]; size];
        for d in 0..2 {
            for rho in 0..n_rho {
                let from = idx(d, rho);
                let m = dead[d].saturating_sub(rho);
                for o in 0..2 {
                    let mut below = 0.0;
                    for (j, row) in joint.iter().enumerate().take(m).skip(2) {
                        trans[from][idx(o, m - j)] += row[o];
                        below += row[o];
                    }
                    trans[from][idx(o, 0)] += (outcome_prob[o] - below).max(0.0);
                }
            }
        }
        let mut pi = vec![0.0f64; size];
        pi[idx(0, 0)] = 1.0;
        for _ in 0..200_000 {
            let mut next = vec![0.0f64; size];
            for (from, row) in trans.iter().enumerate() {
                if pi[from] == 0.0 {
                    continue;
                }
                for (to, t) in row.iter().enumerate() {
                    next[to] += 0.5 * pi[from] * t;
                }
                next[from] += 0.5 * pi[from];
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        (0..2)
            .flat_map(|d| (0..n_rho).map(move |rho| (d, rho)))
            .map(|(d, rho)| pi[idx(d, rho)] * rho as f64)
            .sum()
    }

    pub fn predict(&self) -> Result<Prediction> {
        self.validate()?;
        let p = self.herald_prob();
        let wait = self.wait_moments();
        let r = self.dark_fraction();
        let g = (1.0 - r).powi(2);
        let mean_cycle_rounds = self.mean_cycle_rounds();
        let yield_per_round = if wait.success_prob > 0.0 && mean_cycle_rounds.is_finite() {
            wait.success_prob * wait.mean_retrieval / mean_cycle_rounds
        } else {
            0.0
        };
        let (e_x, e_z) = if wait.success_prob > 0.0 {
            (
                g * wait.mean_dephase_error + (1.0 - g) / 2.0,
                g * self.misalignment + (1.0 - g) / 2.0,
            )
        } else {
            (0.5, 0.5)
        };
        Ok(Prediction {
            herald_prob: p,
            first_herald_prob: p * (2.0 - p),
            wait,
            mean_cycle_rounds,
            yield_per_round,
            dark_fraction: r,
            e_x,
            e_z,
        })
    }
}

/// `E[x^k | k ≤ n]` for `k` geometric with parameter `p`, where `ln_x = ln x`.
fn truncated_power_mean(p: f64, n: u64, ln_x: f64, success_prob: f64) -> f64 {
    if success_prob <= 0.0 {
        return f64::NAN;
    }
    let ln_ux = (-p).ln_1p() + ln_x;
    let one_minus_ux = -ln_ux.exp_m1();
    let head = -(n as f64 * ln_ux).exp_m1();
    p * ln_x.exp() * head / one_minus_ux / success_prob
}

/// Long-run yield per round, mean cycle duration in seconds and wait moments.
pub fn ma_mdi_yield(cfg: &ProtocolConfig, distance_km: f64) -> Result<(f64, f64, WaitMoments)> {
    let model = NodeModel::from_config(cfg, distance_km)?;
    let pred = model.predict()?;
    Ok((
        pred.yield_per_round,
        pred.mean_cycle_rounds * model.round_time,
        pred.wait,
    ))
}

/// Phase and bit error rates given the wait moments.
pub fn ma_mdi_qber(cfg: &ProtocolConfig, distance_km: f64, wait: &WaitMoments) -> Result<(f64, f64)> {
    let model = NodeModel::from_config(cfg, distance_km)?;
    if wait.success_prob <= 0.0 {
        return Ok((0.5, 0.5));
    }
    let g = (1.0 - model.dark_fraction()).powi(2);
    Ok((
        g * wait.mean_dephase_error + (1.0 - g) / 2.0,
        g * model.misalignment + (1.0 - g) / 2.0,
    ))
}

/// Memory-assisted MDI-QKD key rate at total distance `distance_km`.
pub fn skr_ma_mdi(cfg: &ProtocolConfig, distance_km: f64) -> Result<RatePoint> {
    let model = NodeModel::from_config(cfg, distance_km)?;
    let pred = model.predict()?;
    let fraction = mdi_key_fraction(pred.e_x, pred.e_z, cfg.f);
    Ok(RatePoint {
        distance_km,
        skr: pred.yield_per_round / model.round_time * fraction,
        yield_per_round: pred.yield_per_round,
        qber_x: pred.e_x,
        qber_z: pred.e_z,
        cycle_time: pred.mean_cycle_rounds * model.round_time,
        region: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(p: f64, n: u64) -> NodeModel {
        NodeModel {
            round_time: 1e-7,
            p_photon: p,
            p_dark: 0.0,
            n_max: n,
            dead_success: 0,
            dead_timeout: 0,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            eta_r0: 1.0,
            misalignment: 0.0,
            pipelining: false,
        }
    }

    #[test]
    fn truncated_success_closed_form() {
        let w = model(0.1, 10).wait_moments();
        assert!((w.success_prob - 0.651_321_559_9).abs() < 1e-10);
        // Σ_{k=1}^{10} k·0.1·0.9^{k−1} / P_s, summed independently
        let direct: f64 = (1..=10).map(|k| k as f64 * 0.1 * 0.9f64.powi(k - 1)).sum::<f64>() / w.success_prob;
        assert!((w.mean_wait_success - direct).abs() < 1e-12);
        assert!((w.mean_wait_rounds - w.success_prob / 0.1).abs() < 1e-12);
    }

    #[test]
    fn certain_herald_takes_one_round() {
        let mut m = model(1.0, 3);
        m.dead_success = 5;
        m.dead_timeout = 3;
        let pred = m.predict().unwrap();
        assert_eq!(pred.wait.success_prob, 1.0);
        assert_eq!(pred.wait.mean_wait_success, 1.0);
        assert_eq!(pred.mean_cycle_rounds, 2.0 + 5.0);
        assert!((pred.yield_per_round - 1.0 / 7.0).abs() < 1e-15);
        m.pipelining = true;
        // stalls alternate between 3 and 0 rounds
        let pred = m.predict().unwrap();
        assert!((pred.mean_cycle_rounds - 3.5).abs() < 1e-9);
    }

    #[test]
    fn dephasing_at_fixed_wait() {
        let mut m = model(1.0, 1);
        m.t2 = m.round_time;
        let pred = m.predict().unwrap();
        assert!((pred.wait.mean_dephase_error - 0.316_060_279_414_278_6).abs() < 1e-12);
        assert!((pred.e_x - 0.316_060_279_414_278_6).abs() < 1e-12);
    }

    #[test]
    fn ideal_memory_has_no_errors() {
        let pred = model(0.01, 1000).predict().unwrap();
        assert!(pred.e_x.abs() < 1e-15 && pred.e_z.abs() < 1e-15);
        let mut m = model(1.0, 10);
        m.t2 = 1e-2;
        assert!(m.predict().unwrap().e_x < 1e-3);
    }

    #[test]
    fn moments_match_direct_sums() {
        let mut m = model(0.03, 200);
        m.t2 = 50.0 * m.round_time;
        m.t1 = 400.0 * m.round_time;
        let w = m.wait_moments();
        let p = 0.03f64;
        let ps: f64 = (1..=200).map(|k| p * (1.0 - p).powi(k - 1)).sum();
        let ex: f64 = (1..=200)
            .map(|k| p * (1.0 - p).powi(k - 1) * (-(k as f64) / 50.0).exp())
            .sum::<f64>()
            / ps;
        let er: f64 = (1..=200)
            .map(|k| p * (1.0 - p).powi(k - 1) * (-(k as f64) / 400.0).exp())
            .sum::<f64>()
            / ps;
        assert!((w.success_prob - ps).abs() < 1e-12);
        assert!((w.mean_dephase_error - (1.0 - ex) / 2.0).abs() < 1e-12);
        assert!((w.mean_retrieval - er).abs() < 1e-12);
    }

    #[test]
    fn zero_herald_probability_gives_zero_yield() {
        let pred = model(0.0, 10).predict().unwrap();
        assert_eq!(pred.yield_per_round, 0.0);
        assert_eq!(pred.e_x, 0.5);
    }

    #[test]
    fn default_node_values() {
        let cfg = ProtocolConfig::default();
        let m = NodeModel::from_config(&cfg, 0.0).unwrap();
        assert_eq!(m.n_max, 44_964);
        assert_eq!((m.dead_success, m.dead_timeout), (5, 3));
        assert!((m.p_photon - 0.13 * 0.870_963_589_956_081).abs() < 1e-12);
        assert!((m.p_dark - 1e-8).abs() < 1e-15);
    }

    #[test]
    fn dark_heralds_raise_both_errors() {
        let mut m = model(1e-6, 1_000_000);
        m.p_dark = 1e-7;
        let pred = m.predict().unwrap();
        let r = 1e-7 * (1.0 - 1e-6) / (1e-6 + (1.0 - 1e-6) * 1e-7);
        let g = (1.0 - r) * (1.0 - r);
        assert!((pred.e_z - (1.0 - g) / 2.0).abs() < 1e-12);
        assert!(pred.e_x >= pred.e_z);
    }

    #[test]
    fn accessors_agree_with_point() {
        let cfg = ProtocolConfig::default();
        let (y, cycle, w) = ma_mdi_yield(&cfg, 120.0).unwrap();
        let (ex, ez) = ma_mdi_qber(&cfg, 120.0, &w).unwrap();
        let p = skr_ma_mdi(&cfg, 120.0).unwrap();
        assert_eq!((y, cycle, ex, ez), (p.yield_per_round, p.cycle_time, p.qber_x, p.qber_z));
    }
}
