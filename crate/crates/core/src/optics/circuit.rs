//! Ordered element lists and the two-source / two-PBS network.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::element::{apply_loss, apply_pbs, apply_rotation, OpticalElement, Pbs};
use super::source::{
    make_squeezed_source, make_weak_pair_source, PolarizationOrder, Sign, SourceParams,
};
use crate::error::{Error, Result};
use crate::fock::{ModeId, ModeRegistry, QuantumState, Spatial};

/// Serializable form of a [`Circuit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDescription {
    pub input: Vec<ModeId>,
    pub elements: Vec<OpticalElement>,
}

/// Elements applied in order to states over `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitDescription", into = "CircuitDescription")]
pub struct Circuit {
    input: ModeRegistry,
    output: ModeRegistry,
    elements: Vec<OpticalElement>,
}

impl TryFrom<CircuitDescription> for Circuit {
    type Error = Error;

    fn try_from(desc: CircuitDescription) -> Result<Self> {
        Circuit::new(ModeRegistry::new(desc.input)?, desc.elements)
    }
}

impl From<Circuit> for CircuitDescription {
    fn from(c: Circuit) -> Self {
        CircuitDescription {
            input: c.input.modes().to_vec(),
            elements: c.elements,
        }
    }
}

impl Circuit {
    /// Validates every port against the registry it will see.
    pub fn new(input: ModeRegistry, elements: Vec<OpticalElement>) -> Result<Self> {
        let mut registry = input.clone();
        for element in &elements {
            match element {
                OpticalElement::Pbs(pbs) => registry = pbs.output_registry(&registry)?,
                OpticalElement::Rotation { spatial, angle } => {
                    registry.polarization_pair(*spatial)?;
                    if !angle.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "rotation angle must be finite, got {angle}"
                        )));
                    }
                }
                OpticalElement::Loss {
                    mode,
                    transmissivity,
                } => {
                    registry.require(*mode)?;
                    if !(0.0..=1.0).contains(transmissivity) {
                        return Err(Error::InvalidParameter(format!(
                            "transmissivity must lie in [0, 1], got {transmissivity}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            input,
            output: registry,
            elements,
        })
    }

    pub fn input(&self) -> &ModeRegistry {
        &self.input
    }

    pub fn output(&self) -> &ModeRegistry {
        &self.output
    }

    pub fn elements(&self) -> &[OpticalElement] {
        &self.elements
    }

    pub fn has_loss(&self) -> bool {
        self.elements
            .iter()
            .any(|e| matches!(e, OpticalElement::Loss { .. }))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Circuit) -> Result<Circuit> {
        if self.output != next.input {
            return Err(Error::RegistryMismatch);
        }
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&next.elements);
        Circuit::new(self.input.clone(), elements)
    }

    /// Applies a loss-free circuit exactly.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if self.has_loss() {
            return Err(Error::InvalidParameter(
                "circuit contains loss; use apply_sampled".into(),
            ));
        }
        self.run(state, |_, _, _| unreachable!())
    }

    /// Applies the circuit, sampling one trajectory through each loss element.
    pub fn apply_sampled<R: Rng + ?Sized>(
        &self,
        state: &QuantumState,
        rng: &mut R,
    ) -> Result<QuantumState> {
        self.run(state, |s, mode, eta| {
            Ok(apply_loss(s, mode, eta, rng)?.state)
        })
    }

    fn run<F>(&self, state: &QuantumState, mut loss: F) -> Result<QuantumState>
    where
        F: FnMut(&QuantumState, ModeId, f64) -> Result<QuantumState>,
    {
        if state.registry() != &self.input {
            return Err(Error::RegistryMismatch);
        }
        let mut current = state.clone();
        for element in &self.elements {
            current = match *element {
                OpticalElement::Pbs(ref pbs) => apply_pbs(&current, pbs)?,
                OpticalElement::Rotation { spatial, angle } => {
                    apply_rotation(&current, spatial, angle)?
                }
                OpticalElement::Loss {
                    mode,
                    transmissivity,
                } => loss(&current, mode, transmissivity)?,
            };
        }
        Ok(current)
    }
}

/// Input registry of the two-source network: source 1 modes, then source 2.
pub fn fig2_input_registry() -> ModeRegistry {
    ModeRegistry::for_spatials(&[
        Spatial::Source1A,
        Spatial::Source1B,
        Spatial::Source2A,
        Spatial::Source2B,
    ])
    .expect("distinct source modes")
}

/// Two PBSs erasing which source a photon came from.
///
/// PBS 1 sends source-1 a:H (transmitted) and source-2 a:V (reflected) to
/// out-A; PBS 2 sends source-1 b:V (reflected) and source-2 b:H
/// (transmitted) to out-B. The remaining ports only ever see vacuum.
pub fn fig2_circuit(reflection_phase: Complex64) -> Result<Circuit> {
    let pbs1 = Pbs::new(
        Spatial::Source1A,
        Spatial::Source2A,
        Spatial::OutA,
        Spatial::IdleA,
    )
    .with_reflection_phase(reflection_phase);
    let pbs2 = Pbs::new(
        Spatial::Source1B,
        Spatial::Source2B,
        Spatial::IdleB,
        Spatial::OutB,
    )
    .with_reflection_phase(reflection_phase);
    Circuit::new(
        fig2_input_registry(),
        vec![OpticalElement::Pbs(pbs1), OpticalElement::Pbs(pbs2)],
    )
}

/// Both sources of the network, tensored, with at most `cutoff` pairs in total.
pub fn fig2_sources(params: &SourceParams, cutoff: u32) -> Result<QuantumState> {
    params.validate()?;
    let arms1 = (Spatial::Source1A, Spatial::Source1B);
    let arms2 = (Spatial::Source2A, Spatial::Source2B);
    let (s1, s2) = match *params {
        SourceParams::WeakPair { p } => (
            make_weak_pair_source(p, Sign::Plus, arms1)?,
            make_weak_pair_source(p, Sign::Minus, arms2)?,
        ),
        SourceParams::Squeezed { r } => (
            make_squeezed_source(r, PolarizationOrder::Hv, arms1, cutoff)?,
            make_squeezed_source(-r, PolarizationOrder::Vh, arms2, cutoff)?,
        ),
    };
    s1.tensor_truncated(&s2, 2 * cutoff)
}

/// Output of the two-source network over [`ModeRegistry::output`], normalized.
///
/// `cutoff` is the maximum photon number per arm. The returned state's
/// `truncation_mass` is the weight of the ideal output beyond that cutoff.
pub fn build_fig2_circuit(
    params: &SourceParams,
    cutoff: u32,
    reflection_phase: Complex64,
) -> Result<QuantumState> {
    let input = fig2_sources(params, cutoff)?;
    let routed = fig2_circuit(reflection_phase)?.apply(&input)?;
    let idle = [
        ModeId::h(Spatial::IdleA),
        ModeId::v(Spatial::IdleA),
        ModeId::h(Spatial::IdleB),
        ModeId::v(Spatial::IdleB),
    ];
    routed
        .drop_vacuum_modes(&idle)?
        .reorder(&ModeRegistry::output())?
        .normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::element::UNIT_PHASE;

    #[test]
    fn fig2_vacuum_inputs_give_vacuum() {
        for params in [
            SourceParams::WeakPair { p: 0.0 },
            SourceParams::Squeezed { r: 0.0 },
        ] {
            let out = build_fig2_circuit(&params, 4, UNIT_PHASE).unwrap();
            assert_eq!(out.len(), 1);
            assert!((out.amplitude(&[0, 0, 0, 0]).re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fig2_weak_pair_two_photon_term_is_singlet_shaped() {
        let out = build_fig2_circuit(&SourceParams::WeakPair { p: 0.1 }, 8, UNIT_PHASE).unwrap();
        // [A:H, A:V, B:H, B:V]
        let hv = out.amplitude(&[1, 0, 0, 1]);
        let vh = out.amplitude(&[0, 1, 1, 0]);
        assert!(hv.re > 0.0);
        assert!((hv + vh).norm() < 1e-15);
        assert_eq!(out.amplitude(&[1, 0, 1, 0]).norm(), 0.0);
    }

    #[test]
    fn fig2_output_registry() {
        let c = fig2_circuit(UNIT_PHASE).unwrap();
        let modes = c.output().modes();
        assert_eq!(modes[0], ModeId::h(Spatial::OutA));
        assert_eq!(modes[3], ModeId::v(Spatial::OutB));
        assert_eq!(modes[5], ModeId::v(Spatial::OutA));
        assert_eq!(modes[6], ModeId::h(Spatial::OutB));
    }

    #[test]
    fn circuit_then_and_serde_roundtrip() {
        let c = fig2_circuit(UNIT_PHASE).unwrap();
        let rot = Circuit::new(
            c.output().clone(),
            vec![OpticalElement::Rotation {
                spatial: Spatial::OutA,
                angle: 0.3,
            }],
        )
        .unwrap();
        let both = c.then(&rot).unwrap();
        assert_eq!(both.elements().len(), 3);
        assert!(rot.then(&c).is_err());
        let json = serde_json::to_string(&both).unwrap();
        let back: Circuit = serde_json::from_str(&json).unwrap();
        assert_eq!(back, both);
    }

    #[test]
    fn circuit_with_loss_needs_sampling() {
        let reg = ModeRegistry::output();
        let c = Circuit::new(
            reg.clone(),
            vec![OpticalElement::Loss {
                mode: ModeId::h(Spatial::OutB),
                transmissivity: 0.5,
            }],
        )
        .unwrap();
        assert!(c.apply(&QuantumState::vacuum(reg, 2)).is_err());
        assert!(Circuit::new(
            ModeRegistry::output(),
            vec![OpticalElement::Loss {
                mode: ModeId::h(Spatial::OutB),
                transmissivity: 1.5,
            }]
        )
        .is_err());
    }
}
