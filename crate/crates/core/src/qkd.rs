//! Monte Carlo simulation of key distribution with the number- and
//! polarization-entangled output of the two-source network.
//!
//! Each round Alice keeps arm A, Bob receives arm B (optionally through a
//! lossy channel), both pick a rectilinear or diagonal analyzer at random and
//! count photons in each of its two ports. Rounds with matching bases and at
//! least one photon at Alice are sifted; the key symbol is Alice's count in
//! her second port, which Bob reads off his first port.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeId, QuantumState, Spatial};
use crate::optics::{apply_loss, apply_rotation, build_fig2_circuit, SourceParams, UNIT_PHASE};

/// Tolerance on `norm^2 - 1` accepted by the samplers.
const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    /// H/V analyzer.
    Rectilinear,
    /// +pi/4 / -pi/4 analyzer.
    Diagonal,
}

impl BasisChoice {
    pub const ALL: [BasisChoice; 2] = [BasisChoice::Rectilinear, BasisChoice::Diagonal];

    /// Polarization rotation applied before H/V counting.
    pub fn angle(self) -> f64 {
        match self {
            BasisChoice::Rectilinear => 0.0,
            BasisChoice::Diagonal => FRAC_PI_4,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            BasisChoice::Diagonal
        } else {
            BasisChoice::Rectilinear
        }
    }
}

/// Photon counts at an analyzer's (first, second) port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Counts(pub u32, pub u32);

impl Counts {
    pub fn total(self) -> u32 {
        self.0 + self.1
    }

    pub fn swapped(self) -> Self {
        Counts(self.1, self.0)
    }
}

/// Born-rule sampler over the output-arm photon counts of a fixed state.
#[derive(Debug, Clone)]
pub struct BornSampler {
    outcomes: Vec<(Counts, Counts)>,
    cumulative: Vec<f64>,
}

impl BornSampler {
    /// `state` must already be expressed in the measurement basis.
    pub fn new(state: &QuantumState) -> Result<Self> {
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm_sqr));
        }
        let reg = state.registry();
        let (ah, av) = reg.polarization_pair(Spatial::OutA)?;
        let (bh, bv) = reg.polarization_pair(Spatial::OutB)?;
        let mut outcomes = Vec::with_capacity(state.len());
        let mut cumulative = Vec::with_capacity(state.len());
        let mut acc = 0.0;
        for (k, a) in state.iter() {
            acc += a.norm_sqr();
            outcomes.push((Counts(k.get(ah), k.get(av)), Counts(k.get(bh), k.get(bv))));
            cumulative.push(acc);
        }
        Ok(Self {
            outcomes,
            cumulative,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Counts, Counts) {
        let total = *self.cumulative.last().expect("non-empty state");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[i.min(self.outcomes.len() - 1)]
    }
}

fn rotate_arms(state: &QuantumState, alice: BasisChoice, bob: BasisChoice) -> Result<QuantumState> {
    let a = apply_rotation(state, Spatial::OutA, alice.angle())?;
    apply_rotation(&a, Spatial::OutB, bob.angle())
}

/// Rotates each arm into its analyzer basis and samples photon counts.
pub fn sample_measurement<R: Rng + ?Sized>(
    state: &QuantumState,
    bases: (BasisChoice, BasisChoice),
    rng: &mut R,
) -> Result<(Counts, Counts)> {
    if !state.is_normalized(NORM_TOLERANCE) {
        return Err(Error::NotNormalized(state.norm_sqr()));
    }
    let rotated = rotate_arms(state, bases.0, bases.1)?;
    Ok(BornSampler::new(&rotated)?.sample(rng))
}

/// Key bits carried by a sifted round with `n` photons per arm: `log2(n+1)`.
pub fn bits_per_outcome(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "a key symbol needs at least one photon".into(),
        ));
    }
    Ok(f64::from(n + 1).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkdParams {
    pub r: f64,
    /// Maximum photon number per arm of the simulated source state.
    pub cutoff: u32,
    pub rounds: u64,
    /// Transmissivity of Bob's channel.
    pub eta: f64,
    pub seed: u64,
    pub reflection_phase: Complex64,
}

impl QkdParams {
    pub fn new(r: f64, cutoff: u32, rounds: u64, seed: u64) -> Self {
        Self {
            r,
            cutoff,
            rounds,
            eta: 1.0,
            seed,
            reflection_phase: UNIT_PHASE,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        SourceParams::Squeezed { r: self.r }.validate()?;
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "transmissivity must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if (self.reflection_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "reflection phase must be a unit complex number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub alice_basis: BasisChoice,
    pub bob_basis: BasisChoice,
    pub alice_counts: Counts,
    pub bob_counts: Counts,
    pub sifted: bool,
    /// Alice's count in her second port, for sifted rounds.
    pub symbol: Option<u32>,
    /// Photons seen by Alice.
    pub n: u32,
}

impl RoundRecord {
    fn new(alice_basis: BasisChoice, bob_basis: BasisChoice, alice: Counts, bob: Counts) -> Self {
        let n = alice.total();
        let sifted = alice_basis == bob_basis && n >= 1;
        Self {
            alice_basis,
            bob_basis,
            alice_counts: alice,
            bob_counts: bob,
            sifted,
            symbol: sifted.then_some(alice.1),
            n,
        }
    }

    /// Sifted round where Bob's photon total differs from Alice's.
    pub fn is_erasure(&self) -> bool {
        self.sifted && self.bob_counts.total() != self.n
    }

    /// Bob's reading of the symbol (his first-port count).
    pub fn bob_symbol(&self) -> Option<u32> {
        self.sifted.then_some(self.bob_counts.0)
    }

    pub fn is_symbol_error(&self) -> bool {
        self.sifted && !self.is_erasure() && self.bob_symbol() != self.symbol
    }
}

/// Aggregate statistics of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkdSessionReport {
    pub r: f64,
    pub cutoff: u32,
    pub eta: f64,
    pub seed: u64,
    pub rounds: u64,
    pub sifted: u64,
    pub sift_rate: f64,
    pub erasures: u64,
    pub erasure_rate: f64,
    pub symbol_errors: u64,
    /// Errors over sifted rounds that were not erased.
    pub symbol_error_rate: f64,
    pub mean_bits_per_sifted_round: f64,
    pub mean_bits_std_error: f64,
    /// Key bits from sifted, non-erased rounds divided by all rounds.
    pub raw_key_rate: f64,
    pub mean_photon_number: f64,
    pub mean_photon_number_std_error: f64,
    /// `photon_histogram[n]` = rounds in which Alice saw `n` photons.
    pub photon_histogram: Vec<u64>,
    /// Weight of the ideal source state beyond the cutoff.
    pub truncation_mass: f64,
}

fn mean_and_std_error(sum: f64, sum_sq: f64, count: u64) -> (f64, f64) {
    if count == 0 {
        return (0.0, 0.0);
    }
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

impl QkdSessionReport {
    fn from_records(params: &QkdParams, truncation_mass: f64, records: &[RoundRecord]) -> Self {
        let rounds = records.len() as u64;
        let mut sifted = 0u64;
        let mut erasures = 0u64;
        let mut errors = 0u64;
        let (mut bits, mut bits_sq, mut key_bits) = (0.0, 0.0, 0.0);
        let (mut photons, mut photons_sq) = (0.0, 0.0);
        let mut histogram: Vec<u64> = Vec::new();
        for rec in records {
            let n = rec.n as usize;
            if histogram.len() <= n {
                histogram.resize(n + 1, 0);
            }
            histogram[n] += 1;
            photons += rec.n as f64;
            photons_sq += (rec.n as f64).powi(2);
            if !rec.sifted {
                continue;
            }
            sifted += 1;
            let b = f64::from(rec.n + 1).log2();
            bits += b;
            bits_sq += b * b;
            if rec.is_erasure() {
                erasures += 1;
            } else {
                key_bits += b;
                if rec.is_symbol_error() {
                    errors += 1;
                }
            }
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (mean_bits, bits_se) = mean_and_std_error(bits, bits_sq, sifted);
        let (mean_n, n_se) = mean_and_std_error(photons, photons_sq, rounds);
        Self {
            r: params.r,
            cutoff: params.cutoff,
            eta: params.eta,
            seed: params.seed,
            rounds,
            sifted,
            sift_rate: ratio(sifted, rounds),
            erasures,
            erasure_rate: ratio(erasures, sifted),
            symbol_errors: errors,
            symbol_error_rate: ratio(errors, sifted - erasures),
            mean_bits_per_sifted_round: mean_bits,
            mean_bits_std_error: bits_se,
            raw_key_rate: if rounds == 0 {
                0.0
            } else {
                key_bits / rounds as f64
            },
            mean_photon_number: mean_n,
            mean_photon_number_std_error: n_se,
            photon_histogram: histogram,
            truncation_mass,
        }
    }
}

/// Independent generator for one round.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

pub fn run_session(params: &QkdParams) -> Result<QkdSessionReport> {
    run_session_with_records(params).map(|(report, _)| report)
}

/// Runs every round and returns the per-round records alongside the report.
///
/// Deterministic in `params`: round `i` draws only from
/// [`round_rng`]`(seed, i)` and results are reduced in round order.
pub fn run_session_with_records(
    params: &QkdParams,
) -> Result<(QkdSessionReport, Vec<RoundRecord>)> {
    params.validate()?;
    let source = build_fig2_circuit(
        &SourceParams::Squeezed { r: params.r },
        params.cutoff,
        params.reflection_phase,
    )?;
    let records = if params.eta == 1.0 {
        let mut samplers = Vec::with_capacity(4);
        for alice in BasisChoice::ALL {
            for bob in BasisChoice::ALL {
                samplers.push(BornSampler::new(&rotate_arms(&source, alice, bob)?)?);
            }
        }
        (0..params.rounds)
            .into_par_iter()
            .map(|i| {
                let mut rng = round_rng(params.seed, i);
                let alice = BasisChoice::random(&mut rng);
                let bob = BasisChoice::random(&mut rng);
                let (a, b) = samplers[alice.index() * 2 + bob.index()].sample(&mut rng);
                RoundRecord::new(alice, bob, a, b)
            })
            .collect()
    } else {
        (0..params.rounds)
            .into_par_iter()
            .map(|i| lossy_round(&source, params.eta, &mut round_rng(params.seed, i)))
            .collect::<Result<Vec<_>>>()?
    };
    let report = QkdSessionReport::from_records(params, source.truncation_mass(), &records);
    Ok((report, records))
}

fn lossy_round<R: Rng + ?Sized>(
    source: &QuantumState,
    eta: f64,
    rng: &mut R,
) -> Result<RoundRecord> {
    let alice = BasisChoice::random(rng);
    let bob = BasisChoice::random(rng);
    let mut state = source.clone();
    for mode in [ModeId::h(Spatial::OutB), ModeId::v(Spatial::OutB)] {
        state = apply_loss(&state, mode, eta, rng)?.state;
    }
    let (a, b) = sample_measurement(&state, (alice, bob), rng)?;
    Ok(RoundRecord::new(alice, bob, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{make_target, TargetKind};
    use crate::fock::ModeRegistry;

    #[test]
    fn bits_per_outcome_values() {
        assert_eq!(bits_per_outcome(1).unwrap(), 1.0);
        assert_eq!(bits_per_outcome(3).unwrap(), 2.0);
        assert_eq!(bits_per_outcome(7).unwrap(), 3.0);
        assert!(bits_per_outcome(0).is_err());
    }

    #[test]
    fn vacuum_measures_nothing() {
        let vac = QuantumState::vacuum(ModeRegistry::output(), 4);
        let mut rng = round_rng(1, 0);
        for basis in BasisChoice::ALL {
            let out = sample_measurement(&vac, (basis, basis), &mut rng).unwrap();
            assert_eq!(out, (Counts(0, 0), Counts(0, 0)));
        }
    }

    #[test]
    fn unnormalized_input_rejected() {
        let s = make_target(TargetKind::Singlet, 1).unwrap().realized;
        let doubled = QuantumState::from_amplitudes(
            s.registry().clone(),
            s.cutoff(),
            s.iter().map(|(k, a)| (k.clone(), a * 2.0)),
        )
        .unwrap();
        let mut rng = round_rng(1, 0);
        assert!(matches!(
            sample_measurement(
                &doubled,
                (BasisChoice::Rectilinear, BasisChoice::Rectilinear),
                &mut rng
            ),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn record_sifting_rules() {
        let r = BasisChoice::Rectilinear;
        let d = BasisChoice::Diagonal;
        let kept = RoundRecord::new(r, r, Counts(2, 1), Counts(1, 2));
        assert!(kept.sifted && !kept.is_erasure() && !kept.is_symbol_error());
        assert_eq!(kept.symbol, Some(1));
        let mismatched = RoundRecord::new(r, d, Counts(1, 0), Counts(0, 1));
        assert!(!mismatched.sifted && mismatched.symbol.is_none());
        let empty = RoundRecord::new(d, d, Counts(0, 0), Counts(0, 0));
        assert!(!empty.sifted);
        let erased = RoundRecord::new(d, d, Counts(1, 1), Counts(1, 0));
        assert!(erased.is_erasure() && !erased.is_symbol_error());
        let wrong = RoundRecord::new(d, d, Counts(1, 1), Counts(0, 2));
        assert!(wrong.is_symbol_error());
    }

    #[test]
    fn invalid_params_rejected_up_front() {
        assert!(run_session(&QkdParams::new(0.3, 6, 0, 1)).is_err());
        assert!(run_session(&QkdParams::new(0.3, 6, 10, 1).with_eta(1.2)).is_err());
        assert!(run_session(&QkdParams::new(f64::INFINITY, 6, 10, 1)).is_err());
    }

    #[test]
    fn lossy_sessions_register_erasures_not_errors() {
        let report = run_session(&QkdParams::new(0.6, 6, 3000, 9).with_eta(0.5)).unwrap();
        assert!(report.erasures > 0);
        assert_eq!(report.symbol_errors, 0);
        assert!(report.raw_key_rate < report.sift_rate * report.mean_bits_per_sifted_round);
    }

    #[test]
    fn zero_rounds_report_is_empty() {
        let report = QkdSessionReport::from_records(&QkdParams::new(0.3, 4, 1, 0), 0.0, &[]);
        assert_eq!(report.sift_rate, 0.0);
        assert_eq!(report.symbol_error_rate, 0.0);
    }
}
