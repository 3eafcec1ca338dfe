//! Discrete-event simulation of the two-device memory node.
//!
//! The simulation advances in protocol rounds and uses the same reduced
//! [`NodeModel`] as the analytic rate model, so both see identical herald
//! probabilities, cutoffs and dead times. The quantum side of every cycle is
//! carried by the state-vector operations of [`crate::spin_photon`]: the first
//! photon is written and heralded, the stored spin may suffer a phase flip
//! while waiting, the second photon is written on top of it and the spin is
//! read out in the X basis.
//!
//! Given a genuine herald, the sender's BB84 state is drawn with weight
//! proportional to its write probability on the current spin. A dark herald
//! leaves the spin untouched and the sender's recorded state is uniform.
//! Misalignment flips the time-bin value of the first loaded photon.
//!
//! Each seed drives its own ChaCha8 stream, so runs are reproducible and can
//! be spread over any number of workers. Statistics are integer counters and
//! merge by addition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ProtocolConfig;
use crate::protocols::{NodeModel, Prediction};
use crate::spin_photon::{
    async_bsm_accumulate, dephase, herald_measure, init_spin, readout_x, write_photon,
    write_probability, BellOutcome, PhotonState, SpinState, WriteMap,
};

/// Basis of a BB84 state sent by Alice or Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Time-bin basis `{|t₀⟩, |t₁⟩}`.
    Z,
    /// Phase basis `(|t₀⟩ ± |t₁⟩)/√2`.
    X,
}

/// A sender's BB84 choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bb84State {
    pub basis: Basis,
    pub bit: bool,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [
        Bb84State { basis: Basis::Z, bit: false },
        Bb84State { basis: Basis::Z, bit: true },
        Bb84State { basis: Basis::X, bit: false },
        Bb84State { basis: Basis::X, bit: true },
    ];

    pub fn photon(&self) -> PhotonState {
        match (self.basis, self.bit) {
            (Basis::Z, false) => PhotonState::early(),
            (Basis::Z, true) => PhotonState::late(),
            (Basis::X, false) => PhotonState::with_phase(0.0),
            (Basis::X, true) => PhotonState::with_phase(std::f64::consts::PI),
        }
    }
}

/// Fiber connected to the idle device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchOrientation {
    Straight,
    Crossed,
}

/// State of one memory device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceState {
    Idle,
    Loaded { since: u64, spin: SpinState },
    Resetting { until: u64 },
}

/// Snapshot of the node between rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub devices: [DeviceState; 2],
    pub switch_orientation: SwitchOrientation,
    pub round_index: u64,
    /// Device that runs the next cycle.
    pub active: usize,
}

impl NodeState {
    fn new() -> Self {
        NodeState {
            devices: [DeviceState::Idle; 2],
            switch_orientation: SwitchOrientation::Straight,
            round_index: 0,
            active: 0,
        }
    }

    fn toggle(&mut self) {
        self.switch_orientation = match self.switch_orientation {
            SwitchOrientation::Straight => SwitchOrientation::Crossed,
            SwitchOrientation::Crossed => SwitchOrientation::Straight,
        };
    }

    fn ready_at(&self, device: usize) -> u64 {
        match self.devices[device] {
            DeviceState::Resetting { until } => until,
            _ => 0,
        }
    }
}

/// Counters collected by one or more simulation runs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrialStats {
    pub rounds_simulated: u64,
    /// Completed memory cycles.
    pub cycles: u64,
    /// Rounds spent in completed cycles, stalls and dead time included.
    pub cycle_rounds: u64,
    pub cycle_rounds_sq: u128,
    /// Heralds seen on each side, discarded simultaneous heralds included.
    pub heralds_side_a: u64,
    pub heralds_side_b: u64,
    pub first_heralds: u64,
    pub bsm_successes: u64,
    pub timeouts: u64,
    pub readout_failures: u64,
    /// Bell measurements with a successful spin readout.
    pub key_successes: u64,
    /// Sum of cycle lengths over cycles that produced a key success.
    pub key_success_cycle_rounds: u64,
    /// Second-herald wait in rounds; timeouts are recorded at `N_max`.
    pub wait_histogram: BTreeMap<u64, u64>,
    pub wait_sum_success: u64,
    pub wait_sq_sum_success: u128,
    pub x_sifted: u64,
    pub x_errors: u64,
    pub z_sifted: u64,
    pub z_errors: u64,
    pub model_digest: String,
    pub seeds: Vec<u64>,
}

impl TrialStats {
    fn empty(model: &NodeModel, seed: u64) -> Self {
        TrialStats {
            model_digest: model.structure_digest(),
            seeds: vec![seed],
            ..Default::default()
        }
    }

    /// Adds the counters of `other`. Both must come from the same model.
    pub fn merge(&mut self, other: &TrialStats) -> Result<()> {
        if self.seeds.is_empty() && self.model_digest.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.model_digest != other.model_digest {
            return Err(Error::domain("cannot merge statistics of different node models"));
        }
        self.rounds_simulated += other.rounds_simulated;
        self.cycles += other.cycles;
        self.cycle_rounds += other.cycle_rounds;
        self.cycle_rounds_sq += other.cycle_rounds_sq;
        self.heralds_side_a += other.heralds_side_a;
        self.heralds_side_b += other.heralds_side_b;
        self.first_heralds += other.first_heralds;
        self.bsm_successes += other.bsm_successes;
        self.timeouts += other.timeouts;
        self.readout_failures += other.readout_failures;
        self.key_successes += other.key_successes;
        self.key_success_cycle_rounds += other.key_success_cycle_rounds;
        for (k, v) in &other.wait_histogram {
            *self.wait_histogram.entry(*k).or_insert(0) += v;
        }
        self.wait_sum_success += other.wait_sum_success;
        self.wait_sq_sum_success += other.wait_sq_sum_success;
        self.x_sifted += other.x_sifted;
        self.x_errors += other.x_errors;
        self.z_sifted += other.z_sifted;
        self.z_errors += other.z_errors;
        self.seeds.extend(&other.seeds);
        self.seeds.sort_unstable();
        Ok(())
    }

    /// Structured `key = value` rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        let _ = writeln!(out, "model = {}", self.model_digest);
        for (k, v) in [
            ("rounds_simulated", self.rounds_simulated),
            ("cycles", self.cycles),
            ("heralds_side_a", self.heralds_side_a),
            ("heralds_side_b", self.heralds_side_b),
            ("first_heralds", self.first_heralds),
            ("bsm_successes", self.bsm_successes),
            ("timeouts", self.timeouts),
            ("readout_failures", self.readout_failures),
            ("x_sifted", self.x_sifted),
            ("x_errors", self.x_errors),
            ("z_sifted", self.z_sifted),
            ("z_errors", self.z_errors),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

enum Herald {
    Photon,
    Dark,
}

fn draw_herald(rng: &mut ChaCha8Rng, model: &NodeModel, p: f64) -> Option<Herald> {
    let u: f64 = rng.random();
    if u < model.p_photon {
        Some(Herald::Photon)
    } else if u < p {
        Some(Herald::Dark)
    } else {
        None
    }
}

fn uniform_state(rng: &mut ChaCha8Rng) -> Bb84State {
    Bb84State::ALL[rng.random_range(0..4)]
}

/// Draws the sender's recorded state and the photon actually written, given
/// that a genuine herald occurred on `spin`.
fn sample_written_state(
    rng: &mut ChaCha8Rng,
    spin: &SpinState,
    flip_prob: f64,
) -> (Bb84State, PhotonState) {
    let map = WriteMap::ideal();
    let mut options = Vec::with_capacity(8);
    for recorded in Bb84State::ALL {
        for flipped in [false, true] {
            let prior = if flipped { flip_prob } else { 1.0 - flip_prob };
            if prior == 0.0 || (flipped && recorded.basis == Basis::X) {
                continue;
            }
            let prior = if recorded.basis == Basis::X { 1.0 } else { prior };
            let actual = Bb84State {
                bit: recorded.bit ^ flipped,
                ..recorded
            };
            let photon = actual.photon();
            let weight = prior * write_probability(spin, &photon, &map);
            if weight > 0.0 {
                options.push((weight, recorded, photon));
            }
        }
    }
    let total: f64 = options.iter().map(|o| o.0).sum();
    let mut u = rng.random::<f64>() * total;
    for (w, recorded, photon) in &options {
        if u < *w {
            return (*recorded, *photon);
        }
        u -= w;
    }
    let last = options.last().expect("some state can always be written");
    (last.1, last.2)
}

fn simulate_seed(model: &NodeModel, n_rounds: u64, seed: u64) -> Result<TrialStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = TrialStats::empty(model, seed);
    let mut node = NodeState::new();
    let p = model.herald_prob();
    let tau = model.round_time;
    let mut now: u64 = 0;
    'cycles: while now < n_rounds {
        let start = if model.pipelining {
            now.max(node.ready_at(node.active))
        } else {
            now
        };
        let stall = start - now;
        now = start;
        node.round_index = now;
        node.devices[node.active] = DeviceState::Idle;

        // first herald from either side
        let mut k1: u64 = 0;
        let (first_side, first_kind) = loop {
            if now + k1 >= n_rounds {
                stats.rounds_simulated += stall + k1;
                break 'cycles;
            }
            k1 += 1;
            let a = draw_herald(&mut rng, model, p);
            let b = draw_herald(&mut rng, model, p);
            if a.is_some() {
                stats.heralds_side_a += 1;
            }
            if b.is_some() {
                stats.heralds_side_b += 1;
            }
            match (a, b) {
                (None, None) => continue,
                (Some(h), None) => break (0usize, h),
                (None, Some(h)) => break (1usize, h),
                // simultaneous heralds: one side is loaded, the other discarded
                (Some(ha), Some(hb)) => {
                    if rng.random_bool(0.5) {
                        break (0, ha);
                    } else {
                        break (1, hb);
                    }
                }
            }
        };
        stats.first_heralds += 1;
        let (first_state, mut spin) = match first_kind {
            Herald::Photon => {
                let (recorded, photon) =
                    sample_written_state(&mut rng, &init_spin(), model.misalignment);
                let joint = write_photon(&init_spin(), &photon)?;
                let (spin, _) = herald_measure(&joint, rng.random())?;
                (recorded, spin)
            }
            Herald::Dark => (uniform_state(&mut rng), init_spin()),
        };
        node.devices[node.active] = DeviceState::Loaded {
            since: now + k1,
            spin,
        };
        node.toggle();

        // second herald from the other side, at most n_max rounds
        let mut k2: u64 = 0;
        let mut second = None;
        while k2 < model.n_max {
            k2 += 1;
            if let Some(h) = draw_herald(&mut rng, model, p) {
                second = Some(h);
                break;
            }
        }
        now += k1 + k2;
        let mut key_success = false;
        let dead = match second {
            None => {
                stats.timeouts += 1;
                *stats.wait_histogram.entry(model.n_max).or_insert(0) += 1;
                model.dead_timeout
            }
            Some(kind) => {
                stats.bsm_successes += 1;
                if first_side == 0 {
                    stats.heralds_side_b += 1;
                } else {
                    stats.heralds_side_a += 1;
                }
                *stats.wait_histogram.entry(k2).or_insert(0) += 1;
                stats.wait_sum_success += k2;
                stats.wait_sq_sum_success += u128::from(k2) * u128::from(k2);
                let elapsed = k2 as f64 * tau;
                spin = dephase(&spin, elapsed, model.t2, rng.random())?;
                let second_state = match kind {
                    Herald::Photon => {
                        let (recorded, photon) = sample_written_state(&mut rng, &spin, 0.0);
                        spin = async_bsm_accumulate(&spin, &photon, rng.random())?.0;
                        recorded
                    }
                    Herald::Dark => uniform_state(&mut rng),
                };
                let retrieval = model.eta_r0 * (-elapsed / model.t1).exp();
                if rng.random::<f64>() >= retrieval {
                    stats.readout_failures += 1;
                } else {
                    stats.key_successes += 1;
                    key_success = true;
                    let bell = readout_x(&spin, rng.random())?;
                    if first_state.basis == second_state.basis {
                        let differ = first_state.bit != second_state.bit;
                        match first_state.basis {
                            Basis::X => {
                                stats.x_sifted += 1;
                                if differ != (bell == BellOutcome::PhiMinus) {
                                    stats.x_errors += 1;
                                }
                            }
                            Basis::Z => {
                                stats.z_sifted += 1;
                                if differ {
                                    stats.z_errors += 1;
                                }
                            }
                        }
                    }
                }
                model.dead_success
            }
        };
        let cycle_len = if model.pipelining {
            node.devices[node.active] = DeviceState::Resetting { until: now + dead };
            node.active ^= 1;
            stall + k1 + k2
        } else {
            now += dead;
            k1 + k2 + dead
        };
        stats.rounds_simulated += cycle_len;
        stats.cycles += 1;
        stats.cycle_rounds += cycle_len;
        stats.cycle_rounds_sq += u128::from(cycle_len) * u128::from(cycle_len);
        if key_success {
            stats.key_success_cycle_rounds += cycle_len;
        }
    }
    Ok(stats)
}

/// Simulates the reduced node model for `n_rounds` rounds with one seed.
pub fn simulate_model(model: &NodeModel, n_rounds: u64, seed: u64) -> Result<TrialStats> {
    model.validate()?;
    simulate_seed(model, n_rounds, seed)
}

/// Simulates the node of `cfg` at total distance `distance_km`.
pub fn simulate_node(cfg: &ProtocolConfig, distance_km: f64, n_rounds: u64, seed: u64) -> Result<TrialStats> {
    simulate_model(&NodeModel::from_config(cfg, distance_km)?, n_rounds, seed)
}

/// Runs one simulation per seed in parallel and merges the counters in seed order.
pub fn simulate_seeds(model: &NodeModel, n_rounds: u64, seeds: &[u64]) -> Result<TrialStats> {
    let runs = seeds
        .par_iter()
        .map(|&s| simulate_model(model, n_rounds, s))
        .collect::<Result<Vec<_>>>()?;
    let mut total = TrialStats::default();
    for r in &runs {
        total.merge(r)?;
    }
    Ok(total)
}

/// Analytic values to compare a simulation against.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReference {
    pub model_digest: String,
    pub prediction: Prediction,
}

impl AnalyticReference {
    pub fn from_model(model: &NodeModel) -> Result<Self> {
        Ok(AnalyticReference {
            model_digest: model.structure_digest(),
            prediction: model.predict()?,
        })
    }
}

/// One compared quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub observed: f64,
    pub expected: f64,
    pub std_err: f64,
    /// `None` when the statistics do not define the quantity.
    pub z: Option<f64>,
}

impl Metric {
    fn undefined(expected: f64) -> Self {
        Metric {
            observed: f64::NAN,
            expected,
            std_err: f64::NAN,
            z: None,
        }
    }

    fn new(observed: f64, expected: f64, std_err: f64) -> Self {
        let diff = observed - expected;
        let z = if std_err > 0.0 {
            diff / std_err
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Metric {
            observed,
            expected,
            std_err,
            z: Some(z),
        }
    }

    fn passes(&self) -> bool {
        self.z.map(|z| z.abs() < 3.0).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementStatus {
    Pass,
    Fail,
    InsufficientData,
}

impl AgreementStatus {
    pub fn label(&self) -> &'static str {
        match self {
            AgreementStatus::Pass => "pass",
            AgreementStatus::Fail => "fail",
            AgreementStatus::InsufficientData => "insufficient data",
        }
    }
}

/// z-scores of a simulation against the analytic model.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    /// Key successes per round.
    pub yield_per_round: Metric,
    /// Mean second-herald wait given success, in rounds.
    pub mean_wait: Metric,
    pub e_x: Metric,
    pub e_z: Metric,
    /// Fraction of cycles ending in a Bell measurement; reported, not gated.
    pub cycle_success: Metric,
    pub status: AgreementStatus,
}

impl AgreementReport {
    pub fn passed(&self) -> bool {
        self.status == AgreementStatus::Pass
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "status = {}", self.status.label());
        for (name, m) in [
            ("yield_per_round", &self.yield_per_round),
            ("mean_wait", &self.mean_wait),
            ("e_x", &self.e_x),
            ("e_z", &self.e_z),
            ("cycle_success", &self.cycle_success),
        ] {
            match m.z {
                Some(z) => {
                    let _ = writeln!(
                        out,
                        "{name} = observed {:.8e} expected {:.8e} std_err {:.8e} z {:.4}",
                        m.observed, m.expected, m.std_err, z
                    );
                }
                None => {
                    let _ = writeln!(out, "{name} = insufficient data (expected {:.8e})", m.expected);
                }
            }
        }
        out
    }
}

fn proportion(successes: u64, trials: u64, expected: f64) -> Metric {
    if trials == 0 {
        return Metric::undefined(expected);
    }
    let n = trials as f64;
    Metric::new(
        successes as f64 / n,
        expected,
        (expected * (1.0 - expected) / n).sqrt(),
    )
}

/// Compares simulated counters with the analytic prediction of the same node model.
pub fn compare_to_analytic(stats: &TrialStats, analytic: &AnalyticReference) -> Result<AgreementReport> {
    if stats.model_digest != analytic.model_digest {
        return Err(Error::domain(format!(
            "statistics were produced by node model [{}] but the reference is [{}]",
            stats.model_digest, analytic.model_digest
        )));
    }
    let pred = &analytic.prediction;
    let yield_per_round = if stats.cycles >= 2 && stats.cycle_rounds > 0 {
        let n = stats.cycles as f64;
        let y = stats.key_successes as f64 / stats.cycle_rounds as f64;
        let mean_r = stats.cycle_rounds as f64 / n;
        let var = (stats.key_successes as f64 - 2.0 * y * stats.key_success_cycle_rounds as f64
            + y * y * stats.cycle_rounds_sq as f64)
            / n;
        Metric::new(y, pred.yield_per_round, (var.max(0.0) / n).sqrt() / mean_r)
    } else {
        Metric::undefined(pred.yield_per_round)
    };
    let mean_wait = if stats.bsm_successes >= 2 {
        let n = stats.bsm_successes as f64;
        let mean = stats.wait_sum_success as f64 / n;
        let var = (stats.wait_sq_sum_success as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
        Metric::new(mean, pred.wait.mean_wait_success, (var / n).sqrt())
    } else {
        Metric::undefined(pred.wait.mean_wait_success)
    };
    let e_x = proportion(stats.x_errors, stats.x_sifted, pred.e_x);
    let e_z = proportion(stats.z_errors, stats.z_sifted, pred.e_z);
    let cycle_success = proportion(
        stats.bsm_successes,
        stats.bsm_successes + stats.timeouts,
        pred.wait.success_prob,
    );
    let gated = [&yield_per_round, &mean_wait, &e_x, &e_z];
    let status = if gated.iter().any(|m| m.z.is_none()) {
        AgreementStatus::InsufficientData
    } else if gated.iter().all(|m| m.passes()) {
        AgreementStatus::Pass
    } else {
        AgreementStatus::Fail
    };
    Ok(AgreementReport {
        yield_per_round,
        mean_wait,
        e_x,
        e_z,
        cycle_success,
        status,
    })
}
