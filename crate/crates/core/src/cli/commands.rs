//! The four experiment commands.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Arm, Command, ConfigError, ExperimentConfig};
use super::record::{ResultEntry, ResultRecord};
use crate::entanglement::{
    arm, both_arms, chsh_value, correlation_table, fidelity, fidelity_up_to_local_phases,
    make_target, max_abs_chsh, phi_arm_probability, phi_tail_mass, postselect_total, TargetKind,
};
use crate::error::Error;
use crate::fock::{QuantumState, Spatial};
use crate::optics::{build_fig2_circuit, SourceParams};
use crate::qkd::{run_session, BornSampler, QkdParams};
use crate::stats::chi_square;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(ConfigError),
    Runtime(Error),
}

impl CliError {
    pub const CONFIG_EXIT: i32 = 2;
    pub const RUNTIME_EXIT: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::CONFIG_EXIT,
            CliError::Runtime(_) => Self::RUNTIME_EXIT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Validates the config for `command` and runs it.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    config.validate(command)?;
    match command {
        Command::Derive => cmd_derive(config),
        Command::Bell => cmd_bell(config),
        Command::Qkd => cmd_qkd(config),
        Command::Dist => cmd_dist(config),
    }
}

fn fig2_output(config: &ExperimentConfig) -> Result<QuantumState, Error> {
    build_fig2_circuit(
        &config.source_params(),
        config.cutoff,
        config.reflection_phase.value(),
    )
}

/// `(n, P(n))` for `n = 0..=max_n`, zero-filled.
fn photon_series(
    state: &QuantumState,
    spatial: &[crate::fock::ModeId],
    max_n: u32,
) -> Result<Vec<(f64, f64)>, Error> {
    let dist = state.photon_number_distribution(spatial)?;
    Ok((0..=max_n)
        .map(|n| (f64::from(n), dist.get(&n).copied().unwrap_or(0.0)))
        .collect())
}

/// Fig. 2 output checked against the singlet, `|Phi>` and `|E_n>` targets.
pub fn cmd_derive(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new(Command::Derive, config);
    let state = fig2_output(config)?;
    let cutoff = config.cutoff;
    rec.push(ResultEntry::scalar(
        "truncation_mass",
        state.truncation_mass(),
    ));
    let arm_a = arm(Spatial::OutA);
    let arm_series = photon_series(&state, &arm_a, cutoff)?;
    rec.push(ResultEntry::scalar("vacuum_probability", arm_series[0].1));

    match config.source_params() {
        SourceParams::WeakPair { p } => {
            let singlet = make_target(TargetKind::Singlet, cutoff)?.realized;
            let ps = postselect_total(&state, &both_arms(), 2)?;
            let (plain, local) = match &ps.state {
                Some(branch) => (
                    fidelity(branch, &singlet)?,
                    fidelity_up_to_local_phases(branch, &singlet)?,
                ),
                None => (0.0, 0.0),
            };
            rec.push(ResultEntry::scalar(
                "two_photon_probability",
                ps.probability,
            ));
            rec.push(ResultEntry::scalar(
                "two_photon_probability_expected",
                2.0 * p * p * (1.0 - p * p),
            ));
            rec.push(ResultEntry::scalar("fidelity_singlet", plain));
            rec.push(ResultEntry::scalar("fidelity_singlet_local_phases", local));
            rec.push(ResultEntry::series(
                "total_photon_probability",
                photon_series(&state, &both_arms(), 2 * cutoff)?,
            ));
        }
        SourceParams::Squeezed { r } => {
            let phi = make_target(TargetKind::Phi { r }, cutoff)?.realized;
            rec.push(ResultEntry::scalar(
                "phi_tail_mass",
                phi_tail_mass(r, cutoff),
            ));
            rec.push(ResultEntry::scalar("fidelity_phi", fidelity(&state, &phi)?));
            rec.push(ResultEntry::scalar(
                "fidelity_phi_local_phases",
                fidelity_up_to_local_phases(&state, &phi)?,
            ));
            let mut branch_fidelity = Vec::new();
            for n in 1..=cutoff {
                let ps = postselect_total(&state, &arm_a, n)?;
                let f = match ps.state {
                    Some(branch) => {
                        let en = make_target(TargetKind::En { n }, cutoff)?.realized;
                        fidelity_up_to_local_phases(&branch, &en)?
                    }
                    None => 0.0,
                };
                branch_fidelity.push((f64::from(n), f));
            }
            rec.push(ResultEntry::series("en_branch_fidelity", branch_fidelity));
            rec.push(ResultEntry::series(
                "arm_a_photon_probability_closed_form",
                (0..=cutoff).map(|n| (f64::from(n), phi_arm_probability(r, n))),
            ));
        }
    }
    rec.push(ResultEntry::series("arm_a_photon_probability", arm_series));
    Ok(rec)
}

/// CHSH test on the branch with one photon in each arm.
pub fn cmd_bell(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new(Command::Bell, config);
    let state = fig2_output(config)?;
    let on_a = postselect_total(&state, &arm(Spatial::OutA), 1)?;
    let branch_a = on_a.state.ok_or(Error::ZeroProbability)?;
    let on_b = postselect_total(&branch_a, &arm(Spatial::OutB), 1)?;
    let branch = on_b.state.ok_or(Error::ZeroProbability)?;
    let singlet = make_target(TargetKind::Singlet, config.cutoff)?.realized;

    rec.push(ResultEntry::scalar(
        "two_photon_probability",
        on_a.probability * on_b.probability,
    ));
    rec.push(ResultEntry::scalar(
        "fidelity_singlet_local_phases",
        fidelity_up_to_local_phases(&branch, &singlet)?,
    ));
    let s = chsh_value(&branch, &config.chsh_settings())?;
    rec.push(ResultEntry::scalar("chsh_s", s));
    rec.push(ResultEntry::scalar("chsh_abs_s", s.abs()));

    let angles = config.angle_grid();
    let table = correlation_table(&branch, &angles)?;
    let (best, [a, a2, b, b2]) = max_abs_chsh(&table);
    rec.push(ResultEntry::scalar("grid_max_abs_s", best));
    rec.push(ResultEntry::series(
        "grid_argmax_angles",
        [angles[a], angles[a2], angles[b], angles[b2]]
            .into_iter()
            .enumerate()
            .map(|(i, t)| (i as f64, t)),
    ));
    rec.push(ResultEntry::Surface {
        name: "correlation".into(),
        x: angles.clone(),
        y: angles,
        values: table,
    });
    Ok(rec)
}

/// Key distribution sessions, one per squeezing value.
pub fn cmd_qkd(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new(Command::Qkd, config);
    let seed = config.seed.expect("validated");
    let rounds = config.rounds.expect("validated");
    let sweep = config.r_grid.clone();
    let rs = sweep
        .clone()
        .unwrap_or_else(|| vec![config.r.expect("validated")]);
    let mut reports = Vec::with_capacity(rs.len());
    for &r in &rs {
        let params = QkdParams {
            r,
            cutoff: config.cutoff,
            rounds,
            eta: config.eta,
            seed,
            reflection_phase: config.reflection_phase.value(),
        };
        reports.push(run_session(&params)?);
    }
    if sweep.is_some() {
        let series = |name: &str, f: fn(&crate::qkd::QkdSessionReport) -> f64| {
            ResultEntry::series(name, reports.iter().map(|rep| (rep.r, f(rep))))
        };
        rec.push(series("mean_bits_per_sifted_round", |r| {
            r.mean_bits_per_sifted_round
        }));
        rec.push(series("mean_bits_std_error", |r| r.mean_bits_std_error));
        rec.push(series("sift_rate", |r| r.sift_rate));
        rec.push(series("raw_key_rate", |r| r.raw_key_rate));
        rec.push(series("mean_photon_number", |r| r.mean_photon_number));
        let increasing = reports
            .windows(2)
            .all(|w| w[1].mean_bits_per_sifted_round > w[0].mean_bits_per_sifted_round);
        rec.push(ResultEntry::scalar(
            "mean_bits_monotone",
            if increasing { 1.0 } else { 0.0 },
        ));
        for rep in reports {
            rec.push(ResultEntry::QkdReport {
                name: format!("session.r={}", rep.r),
                report: rep,
            });
        }
    } else {
        let rep = reports.pop().expect("one session");
        rec.push(ResultEntry::QkdReport {
            name: "session".into(),
            report: rep,
        });
    }
    Ok(rec)
}

/// Photon-number statistics of one arm, exact and optionally sampled.
pub fn cmd_dist(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new(Command::Dist, config);
    let state = fig2_output(config)?;
    let which = config.arm.unwrap_or(Arm::A);
    let modes = arm(which.spatial());
    let exact = photon_series(&state, &modes, config.cutoff)?;
    rec.push(ResultEntry::scalar(
        "truncation_mass",
        state.truncation_mass(),
    ));
    if let SourceParams::Squeezed { r } = config.source_params() {
        rec.push(ResultEntry::series(
            "photon_probability_closed_form",
            (0..=config.cutoff).map(|n| (f64::from(n), phi_arm_probability(r, n))),
        ));
        rec.push(ResultEntry::series(
            "photon_probability_ratio",
            exact
                .windows(2)
                .filter(|w| w[0].1 > 0.0)
                .map(|w| (w[0].0, w[1].1 / w[0].1)),
        ));
    }
    if let Some(samples) = config.samples.filter(|&s| s > 0) {
        let seed = config.seed.expect("validated");
        let sampler = BornSampler::new(&state)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut histogram = vec![0u64; config.cutoff as usize + 1];
        for _ in 0..samples {
            let (a, b) = sampler.sample(&mut rng);
            let n = match which {
                Arm::A => a.total(),
                Arm::B => b.total(),
            } as usize;
            histogram[n] += 1;
        }
        let probs: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
        let test = chi_square(&histogram, &probs, 5.0);
        rec.push(ResultEntry::series(
            "sampled_histogram",
            histogram
                .iter()
                .enumerate()
                .map(|(n, &c)| (n as f64, c as f64)),
        ));
        rec.push(ResultEntry::scalar("chi_square_statistic", test.statistic));
        rec.push(ResultEntry::scalar("chi_square_dof", test.dof as f64));
        rec.push(ResultEntry::scalar("chi_square_p_value", test.p_value));
    }
    rec.push(ResultEntry::series("photon_probability", exact));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_override;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::load(text, &[]).unwrap()
    }

    #[test]
    fn derive_vacuum_report() {
        let rec = run(Command::Derive, &config("source = \"squeezed\"\nr = 0.0\n")).unwrap();
        assert_eq!(rec.scalar("vacuum_probability"), Some(1.0));
        match rec.get("arm_a_photon_probability").unwrap() {
            ResultEntry::Series { y, .. } => assert!(y[1..].iter().all(|&p| p == 0.0)),
            _ => panic!("series expected"),
        }
        match rec.get("en_branch_fidelity").unwrap() {
            ResultEntry::Series { y, .. } => assert!(y.iter().all(|&f| f == 0.0)),
            _ => panic!("series expected"),
        }
    }

    #[test]
    fn bell_without_photons_is_runtime_error() {
        let err = run(Command::Bell, &config("source = \"weak-pair\"\np = 0.0\n")).unwrap_err();
        assert_eq!(err, CliError::Runtime(Error::ZeroProbability));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn config_errors_exit_with_two() {
        let err = run(Command::Qkd, &config("source = \"squeezed\"\nr = 0.3\n")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dist_ratio_law() {
        let rec = run(
            Command::Dist,
            &config("source = \"squeezed\"\nr = 0.3\ncutoff = 12\n"),
        )
        .unwrap();
        let t2 = 0.3f64.tanh().powi(2);
        match rec.get("photon_probability_ratio").unwrap() {
            ResultEntry::Series { x, y, .. } => {
                for (n, ratio) in x.iter().zip(y) {
                    let expected = (n + 2.0) / (n + 1.0) * t2;
                    assert!((ratio - expected).abs() < 1e-12, "n={n}");
                }
            }
            _ => panic!("series expected"),
        }
    }

    #[test]
    fn qkd_sweep_entries() {
        let mut c = config("source = \"squeezed\"\nrounds = 500\nseed = 3\ncutoff = 6\n");
        let (k, v) = parse_override("r_grid=[0.2, 0.8]").unwrap();
        c = ExperimentConfig::load(&format!("{}\n{k} = {v}\n", c.to_toml()), &[]).unwrap();
        let rec = run(Command::Qkd, &c).unwrap();
        assert!(rec.get("session.r=0.2").is_some());
        assert!(rec.get("session.r=0.8").is_some());
        assert!(rec.scalar("mean_bits_monotone").is_some());
    }
}
