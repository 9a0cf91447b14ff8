//! Photon-pair source factories.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeId, ModeRegistry, QuantumState, Spatial};

/// Parameters of one of the two pair sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceParams {
    /// `sqrt(1-P^2)|00> + P|pair>`; requires `0 <= P < 1`.
    WeakPair { p: f64 },
    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    Squeezed { r: f64 },
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceParams::WeakPair { p } if !(0.0..1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!(
                    "weak-pair amplitude P must lie in [0, 1), got {p}"
                )))
            }
            SourceParams::Squeezed { r } if !r.is_finite() => Err(Error::InvalidParameter(
                format!("squeezing parameter must be finite, got {r}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Which polarization goes into the first spatial mode of a squeezed source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationOrder {
    /// k H-photons in mode a, k V-photons in mode b.
    Hv,
    /// k V-photons in mode a, k H-photons in mode b.
    Vh,
}

/// Weak pair source over `[a:H, a:V, b:H, b:V]`.
///
/// `Plus` emits `+P|H>_a|V>_b`, `Minus` emits `-P|V>_a|H>_b`.
pub fn make_weak_pair_source(
    p: f64,
    sign: Sign,
    modes: (Spatial, Spatial),
) -> Result<QuantumState> {
    SourceParams::WeakPair { p }.validate()?;
    let registry = ModeRegistry::for_spatials(&[modes.0, modes.1])?;
    let vacuum = Complex64::new((1.0 - p * p).sqrt(), 0.0);
    let pair = match sign {
        Sign::Plus => (vec![1, 0, 0, 1], Complex64::new(p, 0.0)),
        Sign::Minus => (vec![0, 1, 1, 0], Complex64::new(-p, 0.0)),
    };
    QuantumState::from_amplitudes(registry, 2, [(vec![0, 0, 0, 0], vacuum), pair])
}

/// Two-mode squeezed vacuum `sum_k tanh^k(r)/cosh(r) |k>|k>` truncated at
/// `k <= cutoff` pairs.
///
/// The kept coefficients are those of the normalized infinite series, so the
/// norm falls short of one by the reported truncation mass `tanh^(2(cutoff+1)) r`.
pub fn make_squeezed_source(
    r: f64,
    order: PolarizationOrder,
    modes: (Spatial, Spatial),
    cutoff: u32,
) -> Result<QuantumState> {
    SourceParams::Squeezed { r }.validate()?;
    let registry = ModeRegistry::for_spatials(&[modes.0, modes.1])?;
    let (ia, ib) = match order {
        PolarizationOrder::Hv => (
            registry.require(ModeId::h(modes.0))?,
            registry.require(ModeId::v(modes.1))?,
        ),
        PolarizationOrder::Vh => (
            registry.require(ModeId::v(modes.0))?,
            registry.require(ModeId::h(modes.1))?,
        ),
    };
    let t = r.tanh();
    let c0 = 1.0 / r.cosh();
    let terms = (0..=cutoff).map(|k| {
        let mut occ = vec![0; 4];
        occ[ia] = k;
        occ[ib] = k;
        (occ, Complex64::new(c0 * t.powi(k as i32), 0.0))
    });
    let tail = (t * t).powi(cutoff as i32 + 1);
    Ok(QuantumState::from_amplitudes(registry, 2 * cutoff, terms)?.with_truncation_mass(tail))
}
