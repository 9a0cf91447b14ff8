//! Closed-form reference states and small helpers shared by the integration
//! tests. Everything here is built directly from amplitudes, independent of
//! the optics and target code under test.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pbs_entangle::fock::{ModeRegistry, QuantumState};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn sign(m: u32) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `(|H>_A|V>_B - |V>_A|H>_B)/sqrt 2` over `[A:H, A:V, B:H, B:V]`.
pub fn singlet() -> QuantumState {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    QuantumState::from_amplitudes(
        ModeRegistry::output(),
        2,
        [(vec![1, 0, 0, 1], c(a)), (vec![0, 1, 1, 0], c(-a))],
    )
    .unwrap()
}

/// Unnormalized `sum_{n<=max_n} tanh^n r sum_m (-1)^m |n-m,m>_A |m,n-m>_B`.
pub fn phi_series(r: f64, max_n: u32) -> QuantumState {
    let t = r.tanh();
    let terms = (0..=max_n).flat_map(|n| {
        (0..=n).map(move |m| (vec![n - m, m, m, n - m], c(t.powi(n as i32) * sign(m))))
    });
    QuantumState::from_amplitudes(ModeRegistry::output(), 2 * max_n, terms).unwrap()
}

/// `sum_m (-1)^m |n-m,m>_A |m,n-m>_B / sqrt(n+1)`.
pub fn e_n(n: u32) -> QuantumState {
    let k = 1.0 / f64::from(n + 1).sqrt();
    let terms = (0..=n).map(|m| (vec![n - m, m, m, n - m], c(k * sign(m))));
    QuantumState::from_amplitudes(ModeRegistry::output(), 2 * n, terms).unwrap()
}

/// `(n+1) x^n (1-x)^2` with `x = tanh^2 r`.
pub fn arm_law(r: f64, n: u32) -> f64 {
    let x = r.tanh().powi(2);
    f64::from(n + 1) * x.powi(n as i32) * (1.0 - x).powi(2)
}

/// One photon in each output arm with independent random polarizations.
pub fn random_product_pair(rng: &mut ChaCha8Rng) -> QuantumState {
    let mut pol = || {
        let a = rng.random::<f64>() * std::f64::consts::PI;
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
        (c(a.cos()), phase * a.sin())
    };
    let (ah, av) = pol();
    let (bh, bv) = pol();
    QuantumState::from_amplitudes(
        ModeRegistry::output(),
        2,
        [
            (vec![1, 0, 1, 0], ah * bh),
            (vec![1, 0, 0, 1], ah * bv),
            (vec![0, 1, 1, 0], av * bh),
            (vec![0, 1, 0, 1], av * bv),
        ],
    )
    .unwrap()
}

/// Normalized random superposition of up to `terms` Fock states with at most
/// `max_total` photons over `registry`.
pub fn random_state(
    rng: &mut ChaCha8Rng,
    registry: &ModeRegistry,
    terms: usize,
    max_total: u32,
) -> QuantumState {
    let modes = registry.len();
    let mut amps = Vec::with_capacity(terms);
    for _ in 0..terms {
        let mut occ = vec![0u32; modes];
        let total = rng.random_range(0..=max_total);
        for _ in 0..total {
            occ[rng.random_range(0..modes)] += 1;
        }
        let amp = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        amps.push((occ, amp));
    }
    QuantumState::from_amplitudes(registry.clone(), max_total, amps)
        .unwrap()
        .normalize()
        .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
