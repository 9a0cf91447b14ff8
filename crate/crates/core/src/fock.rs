//! Sparse multimode Fock states over polarization-labelled optical modes.
//!
//! A [`QuantumState`] is an immutable map from occupation-number vectors to
//! complex amplitudes. Keys are ordered lexicographically over the mode
//! registry, so iteration (and therefore sampling) is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];
}

/// Spatial path label of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spatial {
    Source1A,
    Source1B,
    Source2A,
    Source2B,
    OutA,
    OutB,
    /// Unused output port of the arm-A beam splitter.
    IdleA,
    /// Unused output port of the arm-B beam splitter.
    IdleB,
}

impl fmt::Display for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Spatial::Source1A => "source-1-a",
            Spatial::Source1B => "source-1-b",
            Spatial::Source2A => "source-2-a",
            Spatial::Source2B => "source-2-b",
            Spatial::OutA => "out-A",
            Spatial::OutB => "out-B",
            Spatial::IdleA => "idle-A",
            Spatial::IdleB => "idle-B",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub spatial: Spatial,
    pub polarization: Polarization,
}

impl ModeId {
    pub const fn new(spatial: Spatial, polarization: Polarization) -> Self {
        Self {
            spatial,
            polarization,
        }
    }

    pub const fn h(spatial: Spatial) -> Self {
        Self::new(spatial, Polarization::H)
    }

    pub const fn v(spatial: Spatial) -> Self {
        Self::new(spatial, Polarization::V)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}", self.spatial, self.polarization)
    }
}

/// Fixed total order over the modes a state is defined on.
#[derive(Debug, Clone)]
pub struct ModeRegistry {
    modes: Arc<[ModeId]>,
}

impl PartialEq for ModeRegistry {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.modes, &other.modes) || self.modes == other.modes
    }
}

impl Eq for ModeRegistry {}

impl ModeRegistry {
    pub fn new(modes: Vec<ModeId>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::DuplicateMode(*m));
            }
        }
        Ok(Self {
            modes: modes.into(),
        })
    }

    /// H and V modes for each spatial label, in the given order.
    pub fn for_spatials(spatials: &[Spatial]) -> Result<Self> {
        Self::new(
            spatials
                .iter()
                .flat_map(|&s| Polarization::BOTH.map(|p| ModeId::new(s, p)))
                .collect(),
        )
    }

    /// `[out-A:H, out-A:V, out-B:H, out-B:V]`, the registry of every output state.
    pub fn output() -> Self {
        Self::for_spatials(&[Spatial::OutA, Spatial::OutB]).expect("distinct output modes")
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, mode: ModeId) -> Option<usize> {
        self.modes.iter().position(|&m| m == mode)
    }

    pub fn require(&self, mode: ModeId) -> Result<usize> {
        self.index_of(mode).ok_or(Error::UnknownMode(mode))
    }

    /// Indices of the (H, V) pair at a spatial label.
    pub fn polarization_pair(&self, spatial: Spatial) -> Result<(usize, usize)> {
        match (
            self.index_of(ModeId::h(spatial)),
            self.index_of(ModeId::v(spatial)),
        ) {
            (Some(h), Some(v)) => Ok((h, v)),
            _ => Err(Error::UnknownSpatial(spatial)),
        }
    }

    pub fn contains_spatial(&self, spatial: Spatial) -> bool {
        self.modes.iter().any(|m| m.spatial == spatial)
    }

    fn indices(&self, modes: &[ModeId]) -> Result<Vec<usize>> {
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        modes.iter().map(|&m| self.require(m)).collect()
    }
}

/// Photon counts, one per registered mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisState(Vec<u32>);

impl FockBasisState {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, index: usize) -> u32 {
        self.0[index]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn total_in(&self, indices: &[usize]) -> u32 {
        indices.iter().map(|&i| self.0[i]).sum()
    }

    pub(crate) fn occupations_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }
}

impl From<Vec<u32>> for FockBasisState {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Sparse pure state with a total-photon-number cutoff.
///
/// `truncation_mass` is the probability weight of the ideal (untruncated)
/// state that was discarded while building this one.
#[derive(Debug, Clone)]
pub struct QuantumState {
    registry: ModeRegistry,
    amplitudes: BTreeMap<FockBasisState, Complex64>,
    cutoff: u32,
    truncation_mass: f64,
}

impl QuantumState {
    pub fn vacuum(registry: ModeRegistry, cutoff: u32) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(
            FockBasisState::vacuum(registry.len()),
            Complex64::new(1.0, 0.0),
        );
        Self {
            registry,
            amplitudes,
            cutoff,
            truncation_mass: 0.0,
        }
    }

    /// Builds a state from explicit terms. Repeated keys are summed.
    pub fn from_amplitudes<I, K>(registry: ModeRegistry, cutoff: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, Complex64)>,
        K: Into<FockBasisState>,
    {
        let mut amplitudes = BTreeMap::new();
        for (key, amp) in terms {
            let key = key.into();
            if key.0.len() != registry.len() {
                return Err(Error::OccupationLength {
                    expected: registry.len(),
                    found: key.0.len(),
                });
            }
            let total = key.total();
            if total > cutoff {
                return Err(Error::CutoffExceeded { total, cutoff });
            }
            *amplitudes.entry(key).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Ok(Self::from_map(registry, cutoff, amplitudes, 0.0))
    }

    pub(crate) fn from_map(
        registry: ModeRegistry,
        cutoff: u32,
        mut amplitudes: BTreeMap<FockBasisState, Complex64>,
        truncation_mass: f64,
    ) -> Self {
        amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self {
            registry,
            amplitudes,
            cutoff,
            truncation_mass,
        }
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn with_truncation_mass(mut self, mass: f64) -> Self {
        self.truncation_mass = mass;
        self
    }

    /// Number of stored basis states.
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Terms in canonical (lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = (&FockBasisState, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occupations: &[u32]) -> Complex64 {
        self.amplitudes
            .get(&FockBasisState(occupations.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::ZeroState);
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.clone(), a / norm))
            .collect();
        Ok(Self::from_map(
            self.registry.clone(),
            self.cutoff,
            amplitudes,
            self.truncation_mass,
        ))
    }

    /// Product state over the concatenated registry, no truncation.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        self.tensor_truncated(other, self.cutoff + other.cutoff)
    }

    /// Product state keeping only terms with at most `cutoff` photons.
    ///
    /// The discarded weight is added to the combined truncation mass.
    pub fn tensor_truncated(&self, other: &Self, cutoff: u32) -> Result<Self> {
        if let Some(m) = other
            .registry
            .modes()
            .iter()
            .find(|m| self.registry.index_of(**m).is_some())
        {
            return Err(Error::OverlappingModes(*m));
        }
        let registry = ModeRegistry::new(
            self.registry
                .modes()
                .iter()
                .chain(other.registry.modes())
                .copied()
                .collect(),
        )?;
        let mut amplitudes = BTreeMap::new();
        let mut dropped = 0.0;
        for (k1, a1) in &self.amplitudes {
            for (k2, a2) in &other.amplitudes {
                let amp = a1 * a2;
                if k1.total() + k2.total() > cutoff {
                    dropped += amp.norm_sqr();
                    continue;
                }
                let mut occ = Vec::with_capacity(registry.len());
                occ.extend_from_slice(&k1.0);
                occ.extend_from_slice(&k2.0);
                amplitudes.insert(FockBasisState(occ), amp);
            }
        }
        let (m1, m2) = (self.truncation_mass, other.truncation_mass);
        let mass = m1 + m2 - m1 * m2 + dropped;
        Ok(Self::from_map(registry, cutoff, amplitudes, mass))
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        self.check_registry(other)?;
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(k) {
                acc += if conj_small {
                    a.conj() * b
                } else {
                    b.conj() * a
                };
            }
        }
        Ok(acc)
    }

    pub(crate) fn check_registry(&self, other: &Self) -> Result<()> {
        if self.registry == other.registry {
            Ok(())
        } else {
            Err(Error::RegistryMismatch)
        }
    }

    /// Distribution of the total photon number in `modes`, conditioned on
    /// the stored norm.
    pub fn photon_number_distribution(&self, modes: &[ModeId]) -> Result<BTreeMap<u32, f64>> {
        let idx = self.registry.indices(modes)?;
        let norm_sqr = self.norm_sqr();
        if norm_sqr == 0.0 {
            return Err(Error::ZeroState);
        }
        let mut dist = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            *dist.entry(k.total_in(&idx)).or_insert(0.0) += a.norm_sqr() / norm_sqr;
        }
        Ok(dist)
    }

    /// Unnormalized projection onto `n` total photons in `modes`.
    pub fn project_total(&self, modes: &[ModeId], n: u32) -> Result<Self> {
        let idx = self.registry.indices(modes)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .filter(|(k, _)| k.total_in(&idx) == n)
            .map(|(k, a)| (k.clone(), *a))
            .collect();
        Ok(Self::from_map(
            self.registry.clone(),
            self.cutoff,
            amplitudes,
            self.truncation_mass,
        ))
    }

    /// Same state expressed over a permutation of the registry.
    pub fn reorder(&self, registry: &ModeRegistry) -> Result<Self> {
        if registry.len() != self.registry.len() {
            return Err(Error::RegistryMismatch);
        }
        let source: Vec<usize> = registry
            .modes()
            .iter()
            .map(|&m| self.registry.require(m))
            .collect::<Result<_>>()?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (FockBasisState(source.iter().map(|&i| k.0[i]).collect()), *a))
            .collect();
        Ok(Self::from_map(
            registry.clone(),
            self.cutoff,
            amplitudes,
            self.truncation_mass,
        ))
    }

    /// Removes modes that are empty in every stored term.
    pub fn drop_vacuum_modes(&self, modes: &[ModeId]) -> Result<Self> {
        let idx = self.registry.indices(modes)?;
        for k in self.amplitudes.keys() {
            if let Some(&i) = idx.iter().find(|&&i| k.0[i] != 0) {
                return Err(Error::OccupiedMode(self.registry.modes()[i]));
            }
        }
        let keep: Vec<usize> = (0..self.registry.len())
            .filter(|i| !idx.contains(i))
            .collect();
        let registry = ModeRegistry::new(keep.iter().map(|&i| self.registry.modes()[i]).collect())?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (FockBasisState(keep.iter().map(|&i| k.0[i]).collect()), *a))
            .collect();
        Ok(Self::from_map(
            registry,
            self.cutoff,
            amplitudes,
            self.truncation_mass,
        ))
    }

    /// Rebuilds the state term by term; used by the optical elements.
    pub(crate) fn remap<F>(&self, registry: ModeRegistry, mut f: F) -> Self
    where
        F: FnMut(&FockBasisState, Complex64, &mut dyn FnMut(FockBasisState, Complex64)),
    {
        let mut amplitudes: BTreeMap<FockBasisState, Complex64> = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            f(k, *a, &mut |key, amp| {
                *amplitudes.entry(key).or_default() += amp;
            });
        }
        Self::from_map(registry, self.cutoff, amplitudes, self.truncation_mass)
    }

    /// Largest amplitude-wise deviation from `other`.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        self.check_registry(other)?;
        let mut worst: f64 = 0.0;
        for (k, a) in &self.amplitudes {
            let b = other.amplitudes.get(k).copied().unwrap_or_default();
            worst = worst.max((a - b).norm());
        }
        for (k, b) in &other.amplitudes {
            if !self.amplitudes.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(spatial: Spatial) -> ModeRegistry {
        ModeRegistry::for_spatials(&[spatial]).unwrap()
    }

    #[test]
    fn registry_rejects_duplicates() {
        let m = ModeId::h(Spatial::OutA);
        assert_eq!(
            ModeRegistry::new(vec![m, m]).unwrap_err(),
            Error::DuplicateMode(m)
        );
    }

    #[test]
    fn vacuum_tensor_vacuum() {
        let a = QuantumState::vacuum(single(Spatial::OutA), 4);
        let b = QuantumState::vacuum(single(Spatial::OutB), 4);
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.amplitude(&[0, 0, 0, 0]), c(1.0, 0.0));
        assert_eq!(ab.registry(), &ModeRegistry::output());
    }

    #[test]
    fn tensor_product_rule() {
        let alpha = c(0.6, 0.0);
        let beta = c(0.0, 0.8);
        let a =
            QuantumState::from_amplitudes(single(Spatial::OutA), 2, [(vec![1, 0], alpha)]).unwrap();
        let b =
            QuantumState::from_amplitudes(single(Spatial::OutB), 2, [(vec![0, 1], beta)]).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.amplitude(&[1, 0, 0, 1]), alpha * beta);
    }

    #[test]
    fn tensor_rejects_overlap() {
        let a = QuantumState::vacuum(single(Spatial::OutA), 2);
        assert_eq!(
            a.tensor(&a).unwrap_err(),
            Error::OverlappingModes(ModeId::h(Spatial::OutA))
        );
    }

    #[test]
    fn tensor_truncation_reports_dropped_mass() {
        let reg_a = single(Spatial::OutA);
        let reg_b = single(Spatial::OutB);
        let s = 0.5f64.sqrt();
        let a = QuantumState::from_amplitudes(
            reg_a,
            1,
            [(vec![0, 0], c(s, 0.0)), (vec![1, 0], c(s, 0.0))],
        )
        .unwrap();
        let b = QuantumState::from_amplitudes(
            reg_b,
            1,
            [(vec![0, 0], c(s, 0.0)), (vec![0, 1], c(s, 0.0))],
        )
        .unwrap();
        let ab = a.tensor_truncated(&b, 1).unwrap();
        assert_eq!(ab.len(), 3);
        assert!((ab.truncation_mass() - 0.25).abs() < 1e-15);
        assert!((ab.norm_sqr() + ab.truncation_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_three_four_five() {
        let s = QuantumState::from_amplitudes(
            single(Spatial::OutA),
            1,
            [(vec![1, 0], c(3.0, 0.0)), (vec![0, 1], c(0.0, 4.0))],
        )
        .unwrap()
        .normalize()
        .unwrap();
        assert!((s.amplitude(&[1, 0]) - c(0.6, 0.0)).norm() < 1e-15);
        assert!((s.amplitude(&[0, 1]) - c(0.0, 0.8)).norm() < 1e-15);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_vacuum_unchanged_and_zero_rejected() {
        let v = QuantumState::vacuum(single(Spatial::OutA), 3);
        assert_eq!(v.normalize().unwrap().max_deviation(&v).unwrap(), 0.0);
        let zero =
            QuantumState::from_amplitudes(single(Spatial::OutA), 3, [(vec![1, 0], c(0.0, 0.0))])
                .unwrap();
        assert!(zero.is_empty());
        assert_eq!(zero.normalize().unwrap_err(), Error::ZeroState);
    }

    #[test]
    fn prune_drops_tiny_amplitudes() {
        let s = QuantumState::from_amplitudes(
            single(Spatial::OutA),
            1,
            [(vec![1, 0], c(1.0, 0.0)), (vec![0, 1], c(1e-16, 0.0))],
        )
        .unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn cutoff_enforced_on_construction() {
        let err =
            QuantumState::from_amplitudes(single(Spatial::OutA), 1, [(vec![1, 1], c(1.0, 0.0))])
                .unwrap_err();
        assert_eq!(
            err,
            Error::CutoffExceeded {
                total: 2,
                cutoff: 1
            }
        );
    }

    #[test]
    fn overlap_orthogonal_and_self() {
        let reg = single(Spatial::OutA);
        let h = QuantumState::from_amplitudes(reg.clone(), 1, [(vec![1, 0], c(1.0, 0.0))]).unwrap();
        let v = QuantumState::from_amplitudes(reg.clone(), 1, [(vec![0, 1], c(1.0, 0.0))]).unwrap();
        assert_eq!(h.overlap(&v).unwrap(), c(0.0, 0.0));
        assert!((h.overlap(&h).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let other = QuantumState::vacuum(single(Spatial::OutB), 1);
        assert_eq!(h.overlap(&other).unwrap_err(), Error::RegistryMismatch);
    }

    #[test]
    fn overlap_is_conjugate_symmetric() {
        let reg = single(Spatial::OutA);
        let a = QuantumState::from_amplitudes(
            reg.clone(),
            2,
            [
                (vec![1, 0], c(0.3, 0.1)),
                (vec![0, 1], c(-0.2, 0.5)),
                (vec![1, 1], c(0.1, 0.0)),
            ],
        )
        .unwrap();
        let b = QuantumState::from_amplitudes(
            reg,
            2,
            [(vec![0, 1], c(0.7, -0.1)), (vec![1, 0], c(0.0, 1.0))],
        )
        .unwrap();
        let ab = a.overlap(&b).unwrap();
        let ba = b.overlap(&a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        assert!(ab.norm() <= a.norm() * b.norm());
    }

    #[test]
    fn photon_number_distribution_basics() {
        let v = QuantumState::vacuum(ModeRegistry::output(), 2);
        let d = v
            .photon_number_distribution(ModeRegistry::output().modes())
            .unwrap();
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(
            v.photon_number_distribution(&[]).unwrap_err(),
            Error::EmptyModeSet
        );
    }

    #[test]
    fn reorder_and_drop_modes() {
        let reg = ModeRegistry::for_spatials(&[Spatial::OutA, Spatial::IdleA]).unwrap();
        let s = QuantumState::from_amplitudes(reg, 2, [(vec![1, 0, 0, 0], c(1.0, 0.0))]).unwrap();
        let idle = [ModeId::h(Spatial::IdleA), ModeId::v(Spatial::IdleA)];
        let dropped = s.drop_vacuum_modes(&idle).unwrap();
        assert_eq!(dropped.registry(), &single(Spatial::OutA));
        let swapped =
            ModeRegistry::new(vec![ModeId::v(Spatial::OutA), ModeId::h(Spatial::OutA)]).unwrap();
        let r = dropped.reorder(&swapped).unwrap();
        assert_eq!(r.amplitude(&[0, 1]), c(1.0, 0.0));
        let occupied = [ModeId::h(Spatial::OutA)];
        assert_eq!(
            s.drop_vacuum_modes(&occupied).unwrap_err(),
            Error::OccupiedMode(ModeId::h(Spatial::OutA))
        );
    }
}
