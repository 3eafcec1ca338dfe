//! State-vector model of one electron-spin memory qubit and one time-bin photon.
//!
//! The joint basis is ordered `{↓t₀, ↓t₁, ↑t₀, ↑t₁}`. Writing a photon keeps the
//! reflected branch of the spin-dependent cavity response, so an input
//! `a|t₀⟩ + b|t₁⟩` on a spin `α|↓⟩ + β|↑⟩` becomes `αa|↓t₀⟩ + βb|↑t₁⟩` after
//! renormalization. Heralding measures the photon in the time-bin X basis and
//! applies the phase correction for the minus port immediately, which makes the
//! post-herald spin state independent of the detector that clicked.
//!
//! Operations that need randomness take a uniform draw in `[0, 1)` from the
//! caller, so every function here is pure.

use num_complex::Complex64;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_draw(draw: f64) -> Result<()> {
    if (0.0..1.0).contains(&draw) {
        Ok(())
    } else {
        Err(Error::domain("random draw must lie in [0, 1)"))
    }
}

/// Electron-spin qubit `amp_down|↓⟩ + amp_up|↑⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub amp_down: Complex64,
    pub amp_up: Complex64,
}

impl SpinState {
    pub fn new(amp_down: Complex64, amp_up: Complex64) -> Result<Self> {
        let s = SpinState { amp_down, amp_up };
        if (s.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain("spin state must be normalized"));
        }
        Ok(s)
    }

    /// `(|↓⟩ + e^{iφ}|↑⟩)/√2`.
    pub fn with_phase(phi: f64) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        SpinState {
            amp_down: c(r, 0.0),
            amp_up: Complex64::from_polar(r, phi),
        }
    }

    pub fn down() -> Self {
        SpinState {
            amp_down: c(1.0, 0.0),
            amp_up: c(0.0, 0.0),
        }
    }

    pub fn up() -> Self {
        SpinState {
            amp_down: c(0.0, 0.0),
            amp_up: c(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_down.norm_sqr() + self.amp_up.norm_sqr()
    }

    /// Relative phase `arg(amp_up / amp_down)` in `(−π, π]`.
    pub fn relative_phase(&self) -> f64 {
        (self.amp_up * self.amp_down.conj()).arg()
    }

    /// Pauli-Z on the spin.
    pub fn phase_flip(&self) -> Self {
        SpinState {
            amp_down: self.amp_down,
            amp_up: -self.amp_up,
        }
    }

    /// `|⟨other|self⟩|²`, which is 1 for states equal up to a global phase.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        (other.amp_down.conj() * self.amp_down + other.amp_up.conj() * self.amp_up).norm_sqr()
    }
}

/// Time-bin photon `amp_t0|t₀⟩ + amp_t1|t₁⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub amp_t0: Complex64,
    pub amp_t1: Complex64,
}

impl PhotonState {
    pub fn new(amp_t0: Complex64, amp_t1: Complex64) -> Result<Self> {
        let p = PhotonState { amp_t0, amp_t1 };
        if (p.amp_t0.norm_sqr() + p.amp_t1.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain("photon state must be normalized"));
        }
        Ok(p)
    }

    /// `(|t₀⟩ + e^{iφ}|t₁⟩)/√2`.
    pub fn with_phase(phi: f64) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        PhotonState {
            amp_t0: c(r, 0.0),
            amp_t1: Complex64::from_polar(r, phi),
        }
    }

    pub fn early() -> Self {
        PhotonState {
            amp_t0: c(1.0, 0.0),
            amp_t1: c(0.0, 0.0),
        }
    }

    pub fn late() -> Self {
        PhotonState {
            amp_t0: c(0.0, 0.0),
            amp_t1: c(1.0, 0.0),
        }
    }
}

/// Joint spin-photon amplitudes in the order `{↓t₀, ↓t₁, ↑t₀, ↑t₁}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub amps: [Complex64; 4],
}

impl JointState {
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let j = JointState { amps };
        if (j.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain("joint state must be normalized"));
        }
        Ok(j)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Unnormalized spin component paired with the early time bin.
    fn early_component(&self) -> (Complex64, Complex64) {
        (self.amps[0], self.amps[2])
    }

    /// Unnormalized spin component paired with the late time bin.
    fn late_component(&self) -> (Complex64, Complex64) {
        (self.amps[1], self.amps[3])
    }
}

/// Output port of the heralding interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Plus,
    Minus,
}

/// Result of a heralding attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeraldOutcome {
    Heralded(Port),
    Failed,
}

impl HeraldOutcome {
    pub fn success(&self) -> bool {
        matches!(self, HeraldOutcome::Heralded(_))
    }

    pub fn port(&self) -> Option<Port> {
        match self {
            HeraldOutcome::Heralded(p) => Some(*p),
            HeraldOutcome::Failed => None,
        }
    }
}

/// Where the photon went in the full write-and-herald map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WriteHeraldEvent {
    /// The spin-dependent reflection failed and the photon was transmitted or scattered.
    NotReflected,
    /// Photon detected in the early slot of the unbalanced interferometer.
    EarlySlot,
    /// Photon detected in the late slot of the unbalanced interferometer.
    LateSlot,
    /// Photon detected in the interfering middle slot at the given port.
    Heralded(Port),
}

/// Bell state announced after reading the spin in the X basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
}

/// Spin-dependent reflection contrast. Coupled pairs (`↓t₀`, `↑t₁`) reflect with
/// probability `eta_up`, uncoupled pairs with `eta_down`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteMap {
    pub eta_up: f64,
    pub eta_down: f64,
}

impl WriteMap {
    pub fn ideal() -> Self {
        WriteMap {
            eta_up: 1.0,
            eta_down: 0.0,
        }
    }

    pub fn new(eta_up: f64, eta_down: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_up) || !(0.0..=1.0).contains(&eta_down) {
            return Err(Error::domain("reflection contrasts must lie in [0, 1]"));
        }
        Ok(WriteMap { eta_up, eta_down })
    }

    /// Unnormalized reflected branch.
    fn reflected(&self, spin: &SpinState, photon: &PhotonState) -> [Complex64; 4] {
        let su = self.eta_up.sqrt();
        let sd = self.eta_down.sqrt();
        [
            spin.amp_down * photon.amp_t0 * su,
            spin.amp_down * photon.amp_t1 * sd,
            spin.amp_up * photon.amp_t0 * sd,
            spin.amp_up * photon.amp_t1 * su,
        ]
    }
}

/// Memory decoherence and retrieval parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceParams {
    /// Electron-spin amplitude decay time `T₁` in seconds.
    pub t1: f64,
    /// Electron-spin dephasing time `T₂` in seconds.
    pub t2: f64,
    /// Nuclear-spin amplitude decay time in seconds.
    pub t1_nuclear: f64,
    /// Nuclear-spin dephasing time in seconds.
    pub t2_nuclear: f64,
    /// Electron-to-nuclear conversion time in seconds.
    pub conv_time_e_n: f64,
    /// Retrieval efficiency right after loading.
    pub eta_r0: f64,
}

impl DecoherenceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("t1n", self.t1_nuclear),
            ("t2n", self.t2_nuclear),
            ("t_en", self.conv_time_e_n),
        ] {
            if !(v > 0.0) {
                return Err(Error::domain(format!("{name} must be > 0")));
            }
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::domain("t2 must not exceed 2·t1"));
        }
        if !(0.0..=1.0).contains(&self.eta_r0) {
            return Err(Error::domain("eta_r0 must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Timing intervals of the write, readout and initialization steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingWindows {
    pub write: f64,
    pub readout: f64,
    pub init: f64,
}

/// Spin initialized in `(|↓⟩ + |↑⟩)/√2`.
pub fn init_spin() -> SpinState {
    SpinState::with_phase(0.0)
}

fn check_inputs(spin: &SpinState, photon: &PhotonState) -> Result<()> {
    SpinState::new(spin.amp_down, spin.amp_up)?;
    PhotonState::new(photon.amp_t0, photon.amp_t1)?;
    Ok(())
}

/// Probability that the photon is reflected and the write branch survives.
pub fn write_probability(spin: &SpinState, photon: &PhotonState, map: &WriteMap) -> f64 {
    map.reflected(spin, photon).iter().map(|a| a.norm_sqr()).sum()
}

/// Post-selected joint state after writing `photon` into `spin` with unit contrast.
pub fn write_photon(spin: &SpinState, photon: &PhotonState) -> Result<JointState> {
    write_photon_with(spin, photon, &WriteMap::ideal())
}

/// Post-selected joint state after writing with a general contrast map.
pub fn write_photon_with(spin: &SpinState, photon: &PhotonState, map: &WriteMap) -> Result<JointState> {
    check_inputs(spin, photon)?;
    let amps = map.reflected(spin, photon);
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(Error::domain(
            "write branch has zero probability for this spin and photon",
        ));
    }
    let s = norm.sqrt();
    Ok(JointState {
        amps: amps.map(|a| a / s),
    })
}

/// Born probabilities of the plus and minus ports for a normalized joint state.
pub fn port_probabilities(joint: &JointState) -> (f64, f64) {
    let (e_d, e_u) = joint.early_component();
    let (l_d, l_u) = joint.late_component();
    let plus = ((e_d + l_d).norm_sqr() + (e_u + l_u).norm_sqr()) / 2.0;
    let minus = ((e_d - l_d).norm_sqr() + (e_u - l_u).norm_sqr()) / 2.0;
    (plus, minus)
}

/// Spin state left after the photon is projected onto `port`, including the
/// phase correction applied for the minus port.
pub fn project(joint: &JointState, port: Port) -> Result<SpinState> {
    let (e_d, e_u) = joint.early_component();
    let (l_d, l_u) = joint.late_component();
    let (down, up) = match port {
        Port::Plus => (e_d + l_d, e_u + l_u),
        Port::Minus => (e_d - l_d, -(e_u - l_u)),
    };
    let n = (down.norm_sqr() + up.norm_sqr()).sqrt();
    if n <= 0.0 {
        return Err(Error::domain("projection onto this port has zero probability"));
    }
    Ok(SpinState {
        amp_down: down / n,
        amp_up: up / n,
    })
}

/// Measures the photon in the time-bin X basis and returns the corrected spin.
pub fn herald_measure(joint: &JointState, draw: f64) -> Result<(SpinState, HeraldOutcome)> {
    check_draw(draw)?;
    JointState::new(joint.amps)?;
    let (plus, minus) = port_probabilities(joint);
    let port = if draw * (plus + minus) < plus {
        Port::Plus
    } else {
        Port::Minus
    };
    Ok((project(joint, port)?, HeraldOutcome::Heralded(port)))
}

/// Probabilities of the four outcomes of the full write-and-herald map, in the
/// order not-reflected, early slot, late slot, plus port, minus port.
pub fn write_herald_probabilities(spin: &SpinState, photon: &PhotonState, map: &WriteMap) -> [f64; 5] {
    let amps = map.reflected(spin, photon);
    let early = amps[0].norm_sqr() + amps[2].norm_sqr();
    let late = amps[1].norm_sqr() + amps[3].norm_sqr();
    let reflected = early + late;
    let plus = ((amps[0] + amps[1]).norm_sqr() + (amps[2] + amps[3]).norm_sqr()) / 4.0;
    let minus = ((amps[0] - amps[1]).norm_sqr() + (amps[2] - amps[3]).norm_sqr()) / 4.0;
    [1.0 - reflected, early / 2.0, late / 2.0, plus, minus]
}

/// Probability that a single photon is written and heralded in the middle slot.
pub fn herald_success_probability(spin: &SpinState, photon: &PhotonState, map: &WriteMap) -> f64 {
    let p = write_herald_probabilities(spin, photon, map);
    p[3] + p[4]
}

/// Samples the full write-and-herald map with a single draw. On success the
/// corrected spin state is returned, otherwise the spin is left as it was
/// for a non-reflected photon and projected onto the detected time bin for
/// an early or late click.
pub fn write_and_herald(
    spin: &SpinState,
    photon: &PhotonState,
    map: &WriteMap,
    draw: f64,
) -> Result<(SpinState, WriteHeraldEvent)> {
    check_draw(draw)?;
    check_inputs(spin, photon)?;
    let probs = write_herald_probabilities(spin, photon, map);
    let amps = map.reflected(spin, photon);
    let mut acc = 0.0;
    let mut pick = 4;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            pick = i;
            break;
        }
    }
    let normalize = |down: Complex64, up: Complex64| -> Result<SpinState> {
        let n = (down.norm_sqr() + up.norm_sqr()).sqrt();
        if n <= 0.0 {
            return Err(Error::domain("selected outcome has zero amplitude"));
        }
        Ok(SpinState {
            amp_down: down / n,
            amp_up: up / n,
        })
    };
    match pick {
        0 => Ok((*spin, WriteHeraldEvent::NotReflected)),
        1 => Ok((normalize(amps[0], amps[2])?, WriteHeraldEvent::EarlySlot)),
        2 => Ok((normalize(amps[1], amps[3])?, WriteHeraldEvent::LateSlot)),
        3 => Ok((
            normalize(amps[0] + amps[1], amps[2] + amps[3])?,
            WriteHeraldEvent::Heralded(Port::Plus),
        )),
        _ => Ok((
            normalize(amps[0] - amps[1], -(amps[2] - amps[3]))?,
            WriteHeraldEvent::Heralded(Port::Minus),
        )),
    }
}

/// Writes a second photon into a loaded spin and heralds it, so the stored
/// relative phase becomes the sum of both photon phases.
pub fn async_bsm_accumulate(
    spin: &SpinState,
    photon2: &PhotonState,
    draw: f64,
) -> Result<(SpinState, HeraldOutcome)> {
    let joint = write_photon(spin, photon2)?;
    herald_measure(&joint, draw)
}

/// Probability of reading `Φ⁺`, i.e. of projecting the spin onto `|+⟩`.
pub fn phi_plus_probability(spin: &SpinState) -> f64 {
    ((spin.amp_down + spin.amp_up).norm_sqr() / 2.0).clamp(0.0, 1.0)
}

/// X-basis spin readout mapped onto the announced Bell state.
pub fn readout_x(spin: &SpinState, draw: f64) -> Result<BellOutcome> {
    check_draw(draw)?;
    SpinState::new(spin.amp_down, spin.amp_up)?;
    Ok(if draw < phi_plus_probability(spin) {
        BellOutcome::PhiPlus
    } else {
        BellOutcome::PhiMinus
    })
}

/// Phase-flip probability `(1 − e^{−t/T₂})/2` after storing for `elapsed` seconds.
pub fn dephase_error_prob(elapsed: f64, t2: f64) -> Result<f64> {
    if !(elapsed >= 0.0) {
        return Err(Error::domain("elapsed time must be >= 0"));
    }
    if !(t2 > 0.0) {
        return Err(Error::domain("t2 must be > 0"));
    }
    Ok(-(-elapsed / t2).exp_m1() / 2.0)
}

/// Applies the phase-flip channel with a single draw.
pub fn dephase(spin: &SpinState, elapsed: f64, t2: f64, draw: f64) -> Result<SpinState> {
    check_draw(draw)?;
    let eps = dephase_error_prob(elapsed, t2)?;
    Ok(if draw < eps { spin.phase_flip() } else { *spin })
}

/// Retrieval efficiency `η_r0·e^{−t/T₁}`.
pub fn retrieval_efficiency(elapsed: f64, params: &DecoherenceParams) -> Result<f64> {
    if !(elapsed >= 0.0) {
        return Err(Error::domain("elapsed time must be >= 0"));
    }
    if !(params.t1 > 0.0) {
        return Err(Error::domain("t1 must be > 0"));
    }
    Ok(params.eta_r0 * (-elapsed / params.t1).exp())
}

/// Write window `2(τ_p + τ_π)`, readout time `τ_R + τ_π` and initialization time `τ_R + τ_π`.
pub fn timing_windows(tau_pi: f64, tau_p: f64, tau_r: f64) -> Result<TimingWindows> {
    if !(tau_pi > 0.0) || !(tau_p > 0.0) || !(tau_r > 0.0) {
        return Err(Error::domain("timing inputs must be > 0"));
    }
    Ok(TimingWindows {
        write: 2.0 * (tau_p + tau_pi),
        readout: tau_r + tau_pi,
        init: tau_r + tau_pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn wrap(x: f64) -> f64 {
        let y = x.rem_euclid(2.0 * PI);
        if y > PI {
            y - 2.0 * PI
        } else {
            y
        }
    }

    #[test]
    fn initialized_spin() {
        let s = init_spin();
        assert!(close(s.amp_down, c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amp_up, c(FRAC_1_SQRT_2, 0.0)));
        assert!((phi_plus_probability(&s) - 1.0).abs() < 1e-15);
        assert_eq!(dephase(&s, 0.0, 10e-3, 0.0).unwrap(), s);
    }

    #[test]
    fn write_examples() {
        let j = write_photon(&init_spin(), &PhotonState::with_phase(0.0)).unwrap();
        let r = c(FRAC_1_SQRT_2, 0.0);
        let zero = c(0.0, 0.0);
        for (a, b) in j.amps.iter().zip([r, zero, zero, r]) {
            assert!(close(*a, b));
        }
        let j = write_photon(&init_spin(), &PhotonState::early()).unwrap();
        assert!(close(j.amps[0], c(1.0, 0.0)));
        assert!(j.amps[1..].iter().all(|a| a.norm() < 1e-15));
        let j = write_photon(&init_spin(), &PhotonState::with_phase(PI / 2.0)).unwrap();
        for (a, b) in j.amps.iter().zip([r, zero, zero, c(0.0, FRAC_1_SQRT_2)]) {
            assert!(close(*a, b));
        }
        let bad = PhotonState {
            amp_t0: c(1.0, 0.0),
            amp_t1: c(1.0, 0.0),
        };
        assert!(write_photon(&init_spin(), &bad).is_err());
        assert!(write_photon(&SpinState::down(), &PhotonState::late()).is_err());
    }

    #[test]
    fn herald_examples() {
        let j = write_photon(&init_spin(), &PhotonState::with_phase(0.0)).unwrap();
        for draw in [0.1, 0.9] {
            let (s, out) = herald_measure(&j, draw).unwrap();
            assert!(out.success());
            assert!((s.fidelity(&init_spin()) - 1.0).abs() < 1e-12);
        }
        let j = write_photon(&init_spin(), &PhotonState::early()).unwrap();
        assert_eq!(port_probabilities(&j), (0.5, 0.5));
        for draw in [0.2, 0.7] {
            let (s, _) = herald_measure(&j, draw).unwrap();
            assert!((s.fidelity(&SpinState::down()) - 1.0).abs() < 1e-12);
        }
        let j = write_photon(&init_spin(), &PhotonState::with_phase(PI)).unwrap();
        let target = SpinState::new(c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)).unwrap();
        let (sp, op) = herald_measure(&j, 0.0).unwrap();
        let (sm, om) = herald_measure(&j, 0.999).unwrap();
        assert_eq!(op, HeraldOutcome::Heralded(Port::Plus));
        assert_eq!(om, HeraldOutcome::Heralded(Port::Minus));
        assert!((sp.fidelity(&target) - 1.0).abs() < 1e-12);
        assert!((sm.fidelity(&target) - 1.0).abs() < 1e-12);
        assert!(herald_measure(&j, 1.0).is_err());
    }

    #[test]
    fn phase_sum_examples() {
        let (s, _) = async_bsm_accumulate(&init_spin(), &PhotonState::with_phase(0.0), 0.3).unwrap();
        assert!(s.relative_phase().abs() < 1e-12);
        let loaded = SpinState::with_phase(PI / 2.0);
        let (s, _) = async_bsm_accumulate(&loaded, &PhotonState::with_phase(PI / 2.0), 0.6).unwrap();
        assert!((s.relative_phase().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn readout_examples() {
        assert_eq!(readout_x(&init_spin(), 0.999_999).unwrap(), BellOutcome::PhiPlus);
        assert_eq!(readout_x(&SpinState::with_phase(PI), 0.5).unwrap(), BellOutcome::PhiMinus);
        let s = SpinState::with_phase(PI / 2.0);
        assert!((phi_plus_probability(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn readout_born_rule_sampled() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = SpinState::with_phase(PI / 2.0);
        let n = 100_000;
        let plus = (0..n)
            .filter(|_| readout_x(&s, rng.random::<f64>()).unwrap() == BellOutcome::PhiPlus)
            .count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((plus - 0.5 * n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn dephasing_examples() {
        assert_eq!(dephase_error_prob(0.0, 1.0).unwrap(), 0.0);
        assert!((dephase_error_prob(1e6, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let e = dephase_error_prob(10e-3, 10e-3).unwrap();
        assert!((e - 0.316_060_279_414_278_6).abs() < 1e-12);
        assert!(dephase_error_prob(-1.0, 1.0).is_err());
        assert_eq!(dephase(&init_spin(), 1e3, 1e-3, 0.1).unwrap(), init_spin().phase_flip());
    }

    #[test]
    fn retrieval_examples() {
        let params = DecoherenceParams {
            t1: 30.0,
            t2: 10e-3,
            t1_nuclear: 30.0,
            t2_nuclear: 10.0,
            conv_time_e_n: 10e-6,
            eta_r0: 1.0,
        };
        params.validate().unwrap();
        assert_eq!(retrieval_efficiency(0.0, &params).unwrap(), 1.0);
        let e = retrieval_efficiency(30.0, &params).unwrap();
        assert!((e - 0.367_879_441_171_442_3).abs() < 1e-12);
        let bad = DecoherenceParams { t2: 61.0, ..params };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn timing_examples() {
        let w = timing_windows(100e-9, 11.2e-9, 400e-9).unwrap();
        assert!((w.write - 222.4e-9).abs() < 1e-18);
        assert!((w.readout - 500e-9).abs() < 1e-18);
        assert!((w.init - 500e-9).abs() < 1e-18);
        let w = timing_windows(10e-9, 11.2e-9, 400e-9).unwrap();
        assert!((w.write - 42.4e-9).abs() < 1e-18);
    }

    #[test]
    fn full_map_ceiling() {
        let map = WriteMap::ideal();
        for phi in [0.0, 0.4, PI / 2.0, PI] {
            let p = herald_success_probability(&init_spin(), &PhotonState::with_phase(phi), &map);
            assert!((p - 0.25).abs() < 1e-15);
            let all = write_herald_probabilities(&init_spin(), &PhotonState::with_phase(phi), &map);
            assert!((all.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let blind = WriteMap::new(0.0, 0.0).unwrap();
        assert_eq!(herald_success_probability(&init_spin(), &PhotonState::early(), &blind), 0.0);
    }

    #[test]
    fn full_map_heralded_state_matches_post_selected() {
        let photon = PhotonState::with_phase(1.1);
        let (s, ev) = write_and_herald(&init_spin(), &photon, &WriteMap::ideal(), 0.9).unwrap();
        assert_eq!(ev, WriteHeraldEvent::Heralded(Port::Minus));
        assert!((s.relative_phase() - 1.1).abs() < 1e-12);
        let (_, ev) = write_and_herald(&init_spin(), &photon, &WriteMap::ideal(), 0.1).unwrap();
        assert_eq!(ev, WriteHeraldEvent::NotReflected);
    }

    #[test]
    fn imperfect_contrast_moves_weight_between_ports() {
        let photon = PhotonState::with_phase(0.0);
        let map = WriteMap::new(0.9, 0.1).unwrap();
        let j = write_photon_with(&init_spin(), &photon, &map).unwrap();
        let (plus, minus) = port_probabilities(&j);
        assert!((plus - 0.8).abs() < 1e-12);
        assert!((minus - 0.2).abs() < 1e-12);
        let s = project(&j, Port::Minus).unwrap();
        assert!((s.fidelity(&init_spin()) - 1.0).abs() < 1e-12);
        assert!((j.norm_sqr() - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spin_strategy() -> impl Strategy<Value = SpinState> {
            (0.0f64..PI, -PI..PI).prop_map(|(theta, phi)| SpinState {
                amp_down: c((theta / 2.0).cos(), 0.0),
                amp_up: Complex64::from_polar((theta / 2.0).sin(), phi),
            })
        }

        fn photon_strategy() -> impl Strategy<Value = PhotonState> {
            (0.0f64..PI, -PI..PI).prop_map(|(theta, phi)| PhotonState {
                amp_t0: c((theta / 2.0).cos(), 0.0),
                amp_t1: Complex64::from_polar((theta / 2.0).sin(), phi),
            })
        }

        proptest! {
            #[test]
            fn phase_additivity(phi in -PI..PI, phi2 in -PI..PI, draw in 0.0f64..1.0) {
                let (s, _) = async_bsm_accumulate(&SpinState::with_phase(phi), &PhotonState::with_phase(phi2), draw).unwrap();
                prop_assert!(wrap(s.relative_phase() - (phi + phi2)).abs() < 1e-10);
            }

            #[test]
            fn port_independence(phi in -PI..PI) {
                let j = write_photon(&init_spin(), &PhotonState::with_phase(phi)).unwrap();
                let plus = project(&j, Port::Plus).unwrap();
                let minus = project(&j, Port::Minus).unwrap();
                prop_assert!((plus.fidelity(&minus) - 1.0).abs() < 1e-10);
            }

            #[test]
            fn norm_preservation(spin in spin_strategy(), photon in photon_strategy(), draw in 0.0f64..1.0,
                                 up in 0.5f64..1.0, down in 0.0f64..0.5) {
                let map = WriteMap::new(up, down).unwrap();
                if write_probability(&spin, &photon, &map) > 1e-9 {
                    let j = write_photon_with(&spin, &photon, &map).unwrap();
                    prop_assert!((j.norm_sqr() - 1.0).abs() < 1e-10);
                    let (s, _) = herald_measure(&j, draw).unwrap();
                    prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
                    let (p, m) = port_probabilities(&j);
                    prop_assert!((p + m - 1.0).abs() < 1e-10);
                }
                let probs = write_herald_probabilities(&spin, &photon, &map);
                prop_assert!(probs.iter().all(|p| *p >= -1e-15));
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                let d = dephase(&spin, 1e-3, 1e-3, draw).unwrap();
                prop_assert!((d.norm_sqr() - 1.0).abs() < 1e-10);
            }

            #[test]
            fn dephasing_shape(t in 0.0f64..50.0, dt in 1e-3f64..5.0) {
                let e0 = dephase_error_prob(t, 1.0).unwrap();
                let e1 = dephase_error_prob(t + dt, 1.0).unwrap();
                let e2 = dephase_error_prob(t + 2.0 * dt, 1.0).unwrap();
                prop_assert!(e1 >= e0 && e2 >= e1 && e2 <= 0.5);
                prop_assert!(e1 - e0 >= e2 - e1 - 1e-15);
            }
        }
    }
}
