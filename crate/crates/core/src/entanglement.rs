//! Closed-form target states, photon-number post-selection, phase-tolerant
//! fidelity and the CHSH correlation test.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeId, ModeRegistry, QuantumState, Spatial};
use crate::optics::apply_rotation;

/// H and V modes of an output arm.
pub fn arm(spatial: Spatial) -> [ModeId; 2] {
    [ModeId::h(spatial), ModeId::v(spatial)]
}

/// Both output arms.
pub fn both_arms() -> [ModeId; 4] {
    [
        ModeId::h(Spatial::OutA),
        ModeId::v(Spatial::OutA),
        ModeId::h(Spatial::OutB),
        ModeId::v(Spatial::OutB),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    /// `(|H>_A|V>_B - |V>_A|H>_B)/sqrt 2`.
    Singlet,
    /// `sum_n tanh^n r sum_m (-1)^m |n-m, m>_A |m, n-m>_B`, normalized, `n <= cutoff`.
    Phi { r: f64 },
    /// `sum_m (-1)^m |n-m, m>_A |m, n-m>_B / sqrt(n+1)`.
    En { n: u32 },
}

#[derive(Debug, Clone)]
pub struct TargetState {
    pub kind: TargetKind,
    pub realized: QuantumState,
}

/// Output-registry occupations `[A:H, A:V, B:H, B:V]` of the `(n, m)` term.
fn pair_term(n: u32, m: u32) -> Vec<u32> {
    vec![n - m, m, m, n - m]
}

fn alternating(m: u32) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Builds the normalized target over [`ModeRegistry::output`].
///
/// `cutoff` is the maximum photon number per arm.
pub fn make_target(kind: TargetKind, cutoff: u32) -> Result<TargetState> {
    let registry = ModeRegistry::output();
    let realized = match kind {
        TargetKind::Singlet => make_target(TargetKind::En { n: 1 }, cutoff.max(1))?.realized,
        TargetKind::En { n } => {
            if n > cutoff {
                return Err(Error::InvalidParameter(format!(
                    "target photon number {n} exceeds cutoff {cutoff}"
                )));
            }
            let c = 1.0 / f64::from(n + 1).sqrt();
            QuantumState::from_amplitudes(
                registry,
                2 * cutoff,
                (0..=n).map(|m| (pair_term(n, m), Complex64::new(alternating(m) * c, 0.0))),
            )?
        }
        TargetKind::Phi { r } => {
            if !r.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "squeezing parameter must be finite, got {r}"
                )));
            }
            let t = r.tanh();
            let terms = (0..=cutoff).flat_map(|n| {
                let weight = t.powi(n as i32);
                (0..=n).map(move |m| {
                    (
                        pair_term(n, m),
                        Complex64::new(alternating(m) * weight, 0.0),
                    )
                })
            });
            QuantumState::from_amplitudes(registry, 2 * cutoff, terms)?
                .normalize()?
                .with_truncation_mass(phi_tail_mass(r, cutoff))
        }
    };
    Ok(TargetState { kind, realized })
}

/// Weight of the normalized infinite `|Phi>` beyond `cutoff` photons per arm:
/// `sum_{n > N} (n+1) x^n (1-x)^2 = x^(N+1) ((N+2) - (N+1) x)`, `x = tanh^2 r`.
pub fn phi_tail_mass(r: f64, cutoff: u32) -> f64 {
    let x = r.tanh().powi(2);
    let n = f64::from(cutoff);
    x.powi(cutoff as i32 + 1) * ((n + 2.0) - (n + 1.0) * x)
}

/// Probability of `n` photons in one arm of the ideal `|Phi>`.
pub fn phi_arm_probability(r: f64, n: u32) -> f64 {
    let x = r.tanh().powi(2);
    f64::from(n + 1) * x.powi(n as i32) * (1.0 - x).powi(2)
}

/// Outcome of projecting onto a total photon number.
#[derive(Debug, Clone)]
pub struct PostSelection {
    /// Renormalized branch; `None` when the outcome cannot occur.
    pub state: Option<QuantumState>,
    pub probability: f64,
}

pub fn postselect_total(state: &QuantumState, modes: &[ModeId], n: u32) -> Result<PostSelection> {
    let norm_sqr = state.norm_sqr();
    if norm_sqr == 0.0 {
        return Err(Error::ZeroState);
    }
    let branch = state.project_total(modes, n)?;
    let weight = branch.norm_sqr();
    Ok(PostSelection {
        probability: weight / norm_sqr,
        state: if weight > 0.0 {
            Some(branch.normalize()?)
        } else {
            None
        },
    })
}

/// `|<target|state>|^2` for unit-normalized copies of both.
pub fn fidelity(state: &QuantumState, target: &QuantumState) -> Result<f64> {
    let norms = state.norm_sqr() * target.norm_sqr();
    if norms == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(target.overlap(state)?.norm_sqr() / norms)
}

/// Fidelity maximized over independent phases on every registered mode.
///
/// A phase `phi_j` on mode `j` multiplies each term by `exp(i n_j phi_j)`.
/// The phases are obtained in closed form by aligning the argument of every
/// product `conj(t_x) s_x` with the dominant one along linearly independent
/// occupation differences; the result is never below the plain fidelity.
pub fn fidelity_up_to_local_phases(state: &QuantumState, target: &QuantumState) -> Result<f64> {
    state.check_registry(target)?;
    let norms = state.norm_sqr() * target.norm_sqr();
    if norms == 0.0 {
        return Err(Error::ZeroState);
    }
    let mut products: Vec<(Vec<f64>, Complex64)> = target
        .iter()
        .filter_map(|(k, t)| {
            let s = state.amplitude(k.occupations());
            (s.norm() > 0.0).then(|| {
                (
                    k.occupations().iter().map(|&n| f64::from(n)).collect(),
                    t.conj() * s,
                )
            })
        })
        .collect();
    if products.is_empty() {
        return Ok(0.0);
    }
    products.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));

    let plain: Complex64 = products.iter().map(|(_, w)| w).sum();
    let phases = align_phases(&products);
    let aligned: Complex64 = products
        .iter()
        .map(|(occ, w)| {
            let arg: f64 = occ.iter().zip(&phases).map(|(n, p)| n * p).sum();
            w * Complex64::from_polar(1.0, arg)
        })
        .sum();
    Ok(plain.norm_sqr().max(aligned.norm_sqr()) / norms)
}

/// Minimal-norm phases solving `d_x . phi = arg(w_0) - arg(w_x)` over the
/// leading independent occupation differences `d_x = n(x) - n(x_0)`.
fn align_phases(products: &[(Vec<f64>, Complex64)]) -> Vec<f64> {
    let modes = products[0].0.len();
    let (reference, w0) = (&products[0].0, products[0].1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (occ, w) in &products[1..] {
        if rows.len() == modes {
            break;
        }
        let d: Vec<f64> = occ.iter().zip(reference).map(|(a, b)| a - b).collect();
        let mut residual = d.clone();
        for b in &basis {
            let proj: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
            residual.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let len = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len < 1e-9 {
            continue;
        }
        basis.push(residual.iter().map(|x| x / len).collect());
        rows.push(d);
        rhs.push((w0 * w.conj()).arg());
    }
    if rows.is_empty() {
        return vec![0.0; modes];
    }
    // phi = D^T (D D^T)^-1 theta
    let k = rows.len();
    let mut gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let y = solve(&mut gram, rhs);
    (0..modes)
        .map(|j| rows.iter().zip(&y).map(|(row, yi)| row[j] * yi).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve(a: &mut [Vec<f64>], mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (offset, r) in rest.iter_mut().enumerate() {
            let f = r[col] / pivot_row[col];
            for (x, p) in r[col..n].iter_mut().zip(&pivot_row[col..n]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `1 - |<E_n| R(angle)_A R(angle)_B |E_n>|^2`.
pub fn rotation_invariance_deviation(n: u32, angle: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "photon number must be at least 1".into(),
        ));
    }
    let target = make_target(TargetKind::En { n }, n)?.realized;
    let rotated = apply_rotation(
        &apply_rotation(&target, Spatial::OutA, angle)?,
        Spatial::OutB,
        angle,
    )?;
    Ok(1.0 - fidelity(&rotated, &target)?)
}

/// Deviation of `|E_n>` from invariance under a joint pi/4 polarization rotation.
pub fn check_pi4_invariance(n: u32) -> Result<f64> {
    rotation_invariance_deviation(n, FRAC_PI_4)
}

/// Analyzer orientations for the CHSH combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub alice: (f64, f64),
    pub bob: (f64, f64),
}

impl ChshSettings {
    /// `(0, pi/4; pi/8, 3pi/8)`.
    pub fn standard() -> Self {
        Self {
            alice: (0.0, FRAC_PI_4),
            bob: (FRAC_PI_8, 3.0 * FRAC_PI_8),
        }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            alice: (self.alice.0 + delta, self.alice.1 + delta),
            bob: (self.bob.0 + delta, self.bob.1 + delta),
        }
    }
}

fn require_one_photon_per_arm(state: &QuantumState) -> Result<()> {
    let reg = state.registry();
    let (ah, av) = reg
        .polarization_pair(Spatial::OutA)
        .map_err(|_| Error::NotTwoPhoton)?;
    let (bh, bv) = reg
        .polarization_pair(Spatial::OutB)
        .map_err(|_| Error::NotTwoPhoton)?;
    if state.is_empty() {
        return Err(Error::NotTwoPhoton);
    }
    for (k, _) in state.iter() {
        if k.get(ah) + k.get(av) != 1 || k.get(bh) + k.get(bv) != 1 || k.total() != 2 {
            return Err(Error::NotTwoPhoton);
        }
    }
    Ok(())
}

/// `E = P(same) - P(different)` with analyzers at `theta_a`, `theta_b`.
///
/// Outcome +1 is the transmitted (rotated-H) port, -1 the reflected one.
pub fn correlation(state: &QuantumState, theta_a: f64, theta_b: f64) -> Result<f64> {
    require_one_photon_per_arm(state)?;
    let rotated_a = apply_rotation(state, Spatial::OutA, -theta_a)?;
    correlation_after_a(&rotated_a, theta_b)
}

fn correlation_after_a(rotated_a: &QuantumState, theta_b: f64) -> Result<f64> {
    let rotated = apply_rotation(rotated_a, Spatial::OutB, -theta_b)?;
    let reg = rotated.registry();
    let (ah, _) = reg.polarization_pair(Spatial::OutA)?;
    let (bh, _) = reg.polarization_pair(Spatial::OutB)?;
    let norm_sqr = rotated.norm_sqr();
    let e: f64 = rotated
        .iter()
        .map(|(k, a)| {
            let same = k.get(ah) == k.get(bh);
            if same {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum();
    Ok(e / norm_sqr)
}

/// `S = E(a, b) - E(a, b') + E(a', b) + E(a', b')`.
pub fn chsh_value(state: &QuantumState, settings: &ChshSettings) -> Result<f64> {
    let (a, a2) = settings.alice;
    let (b, b2) = settings.bob;
    Ok(correlation(state, a, b)? - correlation(state, a, b2)?
        + correlation(state, a2, b)?
        + correlation(state, a2, b2)?)
}

/// `table[i][j] = E(angles[i], angles[j])`.
pub fn correlation_table(state: &QuantumState, angles: &[f64]) -> Result<Vec<Vec<f64>>> {
    require_one_photon_per_arm(state)?;
    angles
        .iter()
        .map(|&ta| {
            let rotated_a = apply_rotation(state, Spatial::OutA, -ta)?;
            angles
                .iter()
                .map(|&tb| correlation_after_a(&rotated_a, tb))
                .collect()
        })
        .collect()
}

/// Largest `|S|` over all angle quadruples of a correlation table.
///
/// Returns the value and the indices `(a, a', b, b')`.
pub fn max_abs_chsh(table: &[Vec<f64>]) -> (f64, [usize; 4]) {
    let g = table.len();
    let mut best = (0.0, [0; 4]);
    for i in 0..g {
        for i2 in 0..g {
            // S = (E[i][j] + E[i2][j]) + (E[i2][j2] - E[i][j2])
            let u = |j: usize| table[i][j] + table[i2][j];
            let v = |j: usize| table[i2][j] - table[i][j];
            let (mut umax, mut umin, mut vmax, mut vmin) =
                ((f64::MIN, 0), (f64::MAX, 0), (f64::MIN, 0), (f64::MAX, 0));
            for j in 0..g {
                if u(j) > umax.0 {
                    umax = (u(j), j);
                }
                if u(j) < umin.0 {
                    umin = (u(j), j);
                }
                if v(j) > vmax.0 {
                    vmax = (v(j), j);
                }
                if v(j) < vmin.0 {
                    vmin = (v(j), j);
                }
            }
            let hi = umax.0 + vmax.0;
            let lo = -(umin.0 + vmin.0);
            if hi > best.0 {
                best = (hi, [i, i2, umax.1, vmax.1]);
            }
            if lo > best.0 {
                best = (lo, [i, i2, umin.1, vmin.1]);
            }
        }
    }
    best
}
