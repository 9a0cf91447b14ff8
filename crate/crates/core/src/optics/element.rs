//! Mode-level optical elements: polarizing beam splitter, polarization
//! rotation and photon loss.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasisState, ModeId, ModeRegistry, Polarization, QuantumState, Spatial};

pub const UNIT_PHASE: Complex64 = Complex64::new(1.0, 0.0);

/// Polarizing beam splitter: H passes `in1 -> out1`, `in2 -> out2`;
/// V swaps ports, `in1 -> out2`, `in2 -> out1`, picking up
/// `reflection_phase` per reflected photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pbs {
    pub in1: Spatial,
    pub in2: Spatial,
    pub out1: Spatial,
    pub out2: Spatial,
    #[serde(default = "unit_phase")]
    pub reflection_phase: Complex64,
}

fn unit_phase() -> Complex64 {
    UNIT_PHASE
}

impl Pbs {
    pub fn new(in1: Spatial, in2: Spatial, out1: Spatial, out2: Spatial) -> Self {
        Self {
            in1,
            in2,
            out1,
            out2,
            reflection_phase: UNIT_PHASE,
        }
    }

    pub fn with_reflection_phase(mut self, phase: Complex64) -> Self {
        self.reflection_phase = phase;
        self
    }

    /// Registry after the element: same positions, relabelled modes.
    pub(crate) fn output_registry(&self, registry: &ModeRegistry) -> Result<ModeRegistry> {
        if self.in1 == self.in2 || self.out1 == self.out2 {
            return Err(Error::PortMismatch(format!(
                "ports must be distinct: in ({}, {}), out ({}, {})",
                self.in1, self.in2, self.out1, self.out2
            )));
        }
        if (self.reflection_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "reflection phase {} is not a unit complex number",
                self.reflection_phase
            )));
        }
        registry.polarization_pair(self.in1)?;
        registry.polarization_pair(self.in2)?;
        for out in [self.out1, self.out2] {
            if out != self.in1 && out != self.in2 && registry.contains_spatial(out) {
                return Err(Error::PortMismatch(format!(
                    "output port {out} is already occupied by another mode"
                )));
            }
        }
        let relabel = |m: ModeId| -> ModeId {
            use Polarization::{H, V};
            match (m.spatial, m.polarization) {
                (s, H) if s == self.in1 => ModeId::h(self.out1),
                (s, H) if s == self.in2 => ModeId::h(self.out2),
                (s, V) if s == self.in1 => ModeId::v(self.out2),
                (s, V) if s == self.in2 => ModeId::v(self.out1),
                _ => m,
            }
        };
        ModeRegistry::new(registry.modes().iter().map(|&m| relabel(m)).collect())
    }
}

/// One step of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OpticalElement {
    Pbs(Pbs),
    Rotation { spatial: Spatial, angle: f64 },
    Loss { mode: ModeId, transmissivity: f64 },
}

pub fn apply_pbs(state: &QuantumState, pbs: &Pbs) -> Result<QuantumState> {
    let registry = pbs.output_registry(state.registry())?;
    let (_, v1) = state.registry().polarization_pair(pbs.in1)?;
    let (_, v2) = state.registry().polarization_pair(pbs.in2)?;
    let phase = pbs.reflection_phase;
    Ok(state.remap(registry, |key, amp, emit| {
        let reflected = key.get(v1) + key.get(v2);
        emit(key.clone(), amp * phase.powu(reflected));
    }))
}

/// Rotates the polarization at `spatial` by `angle` radians:
/// `H -> cos H + sin V`, `V -> -sin H + cos V` on creation operators.
pub fn apply_rotation(state: &QuantumState, spatial: Spatial, angle: f64) -> Result<QuantumState> {
    let (ih, iv) = state.registry().polarization_pair(spatial)?;
    if angle == 0.0 {
        return Ok(state.clone());
    }
    let mut table = RotationTable::new(angle);
    Ok(state.remap(state.registry().clone(), |key, amp, emit| {
        let (a, b) = (key.get(ih), key.get(iv));
        let row = table.row(a, b);
        let n = a + b;
        for (p, &coef) in row.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let mut out = key.clone();
            let occ = out.occupations_mut();
            occ[ih] = p as u32;
            occ[iv] = n - p as u32;
            emit(out, amp * coef);
        }
    }))
}

/// Amplitudes `<p, n-p| R(angle) |a, b>` for every `p`, cached per `(a, b)`.
struct RotationTable {
    cos: f64,
    sin: f64,
    rows: HashMap<(u32, u32), Vec<f64>>,
}

impl RotationTable {
    fn new(angle: f64) -> Self {
        Self {
            cos: angle.cos(),
            sin: angle.sin(),
            rows: HashMap::new(),
        }
    }

    fn row(&mut self, a: u32, b: u32) -> &[f64] {
        let (c, s) = (self.cos, self.sin);
        self.rows.entry((a, b)).or_insert_with(|| {
            let n = a + b;
            (0..=n)
                .map(|p| {
                    let q = n - p;
                    let lo = p.saturating_sub(b);
                    let hi = a.min(p);
                    let mut sum = 0.0;
                    for i in lo..=hi {
                        let j = p - i;
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        sum += sign
                            * binomial(a, i)
                            * binomial(b, j)
                            * c.powi((i + b - j) as i32)
                            * s.powi((a - i + j) as i32);
                    }
                    sum * (factorial(p) * factorial(q) / (factorial(a) * factorial(b))).sqrt()
                })
                .collect()
        })
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (2..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// One sampled trajectory of a loss element.
#[derive(Debug, Clone)]
pub struct LossBranch {
    pub state: QuantumState,
    /// Photons removed from the mode in this trajectory.
    pub lost: u32,
}

/// Samples which photons in `mode` survive a channel of transmissivity `eta`.
///
/// Each photon survives independently with probability `eta`; the returned
/// state is the renormalized branch conditioned on the sampled number lost.
pub fn apply_loss<R: Rng + ?Sized>(
    state: &QuantumState,
    mode: ModeId,
    eta: f64,
    rng: &mut R,
) -> Result<LossBranch> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "transmissivity must lie in [0, 1], got {eta}"
        )));
    }
    let idx = state.registry().require(mode)?;
    let norm_sqr = state.norm_sqr();
    if norm_sqr == 0.0 {
        return Err(Error::ZeroState);
    }
    let max_k = state.iter().map(|(k, _)| k.get(idx)).max().unwrap_or(0);
    let kraus = |k: u32, l: u32| -> f64 {
        binomial(k, l) * eta.powi((k - l) as i32) * (1.0 - eta).powi(l as i32)
    };
    let mut weights = vec![0.0; max_k as usize + 1];
    for (key, amp) in state.iter() {
        let k = key.get(idx);
        for l in 0..=k {
            weights[l as usize] += amp.norm_sqr() * kraus(k, l);
        }
    }
    let u = rng.random::<f64>() * norm_sqr;
    let mut acc = 0.0;
    let mut lost = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32;
    for (l, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            lost = l as u32;
            break;
        }
    }
    let branch = state.remap(state.registry().clone(), |key, amp, emit| {
        let k = key.get(idx);
        if k < lost {
            return;
        }
        let mut out: FockBasisState = key.clone();
        out.occupations_mut()[idx] = k - lost;
        emit(out, amp * kraus(k, lost).sqrt());
    });
    Ok(LossBranch {
        state: branch.normalize()?,
        lost,
    })
}
