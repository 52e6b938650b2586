use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    derive_seed, reference_fidelity, Depolarizing, ExperimentSpec, SeedPurpose, StateKind,
};
use crate::dist::ProbDist;
use crate::error::{Result, StageContext};
use crate::generative::{exact_distribution, train, RnnParams, StopReason, TrainingConfig};
use crate::metrics::{
    classical_fidelity, pairwise_correlations, pairwise_correlations_from_distribution,
    quantum_fidelity,
};
use crate::mle::mle_project;
use crate::povm::{
    bayes_correct, empirical_distribution, make_povm, povm_distribution, sample_dataset,
    BasisHistograms, CoarseGrain, OutcomeDataset, PovmKind, PovmSet,
};
use crate::sim::{
    build_ghz, calibrate_depolarizing, densify, random_state, Basis, DensityMatrix, NoiseModel,
    ReadoutFidelity, StateVector,
};

/// Largest qubit count for which reconstructed states and quantum fidelities are computed.
pub const MAX_DENSE_RECONSTRUCTION: usize = 5;

/// Target state, its noisy preparation and the master dataset measured on it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub ideal: StateVector<f64>,
    pub rho: DensityMatrix<f64>,
    pub depolarizing_p: f64,
    pub readout: Option<Vec<ReadoutFidelity>>,
    pub data: OutcomeDataset,
}

impl Prepared {
    pub fn n_qubits(&self) -> usize {
        self.ideal.n_qubits()
    }

    /// Fidelity of the noisy preparation with the ideal state.
    pub fn preparation_fidelity(&self) -> Result<f64> {
        quantum_fidelity(&self.rho, &DensityMatrix::from_pure(&self.ideal))
    }
}

fn ideal_state(spec: &ExperimentSpec, n: usize) -> Result<StateVector<f64>> {
    match spec.state {
        StateKind::Ghz => build_ghz(n, false),
        StateKind::GhzExperimental => build_ghz(n, true),
        StateKind::Random => random_state(
            n,
            spec.random_depth,
            derive_seed(spec.seed, SeedPurpose::State, n, 0, 0),
        ),
        StateKind::Zero => StateVector::zero(n),
    }
}

fn resolve_depolarizing(spec: &ExperimentSpec, ideal: &StateVector<f64>) -> Result<f64> {
    match spec.depolarizing {
        Depolarizing::Off => Ok(0.0),
        Depolarizing::Fixed(p) => Ok(p),
        Depolarizing::TargetFidelity(f) => calibrate_depolarizing(ideal, f),
        Depolarizing::Reference => {
            calibrate_depolarizing(ideal, reference_fidelity(ideal.n_qubits()))
        }
    }
}

/// Ideal `n`-qubit target, its depolarized preparation and the depolarizing probability used.
pub fn prepare_state(
    spec: &ExperimentSpec,
    n: usize,
) -> Result<(StateVector<f64>, DensityMatrix<f64>, f64)> {
    let ideal = ideal_state(spec, n).stage("prepare")?;
    let p = resolve_depolarizing(spec, &ideal).stage("prepare")?;
    let rho = densify(&ideal, &NoiseModel::depolarizing(p).stage("prepare")?).stage("prepare")?;
    Ok((ideal, rho, p))
}

/// Builds the `n`-qubit target, applies noise and draws the master dataset.
///
/// With a readout table and Bayes correction, shots are first taken in the
/// Pauli-6 basis, corrected per basis setting, and redrawn into the requested POVM.
/// The dataset provenance records the master seed of `spec`.
pub fn prepare(spec: &ExperimentSpec, n: usize) -> Result<Prepared> {
    spec.validate().stage("prepare")?;
    let (ideal, rho, depolarizing_p) = prepare_state(spec, n)?;
    let mut noise = NoiseModel::depolarizing(depolarizing_p).stage("prepare")?;
    let readout = spec
        .readout
        .as_ref()
        .map(|r| (0..n).map(|q| r[q % r.len()]).collect::<Vec<_>>());
    noise.readout = readout.clone();

    let seed = derive_seed(spec.seed, SeedPurpose::Sample, n, 0, 0);
    let data = match (&readout, spec.bayes_correct) {
        (Some(r), true) => {
            let raw =
                sample_dataset(&rho, PovmKind::Pauli6, spec.shots, &noise, seed).stage("sample")?;
            let hist = BasisHistograms::from_dataset(&raw).stage("bayes")?;
            let corrected = bayes_correct(&hist, r).stage("bayes")?;
            corrected
                .resample_like(
                    &raw,
                    spec.povm,
                    derive_seed(spec.seed, SeedPurpose::Resample, n, 0, 0),
                )
                .stage("bayes")?
        }
        _ => sample_dataset(&rho, spec.povm, spec.shots, &noise, seed).stage("sample")?,
    };
    let mut data = data;
    data.provenance_mut().seed = spec.seed;
    Ok(Prepared {
        ideal,
        rho,
        depolarizing_p,
        readout,
        data,
    })
}

/// Two-body correlation of one qubit pair along one axis, from every source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub axis: String,
    pub j: usize,
    pub k: usize,
    /// Value in the prepared (noisy) state.
    pub truth: f64,
    /// Value in the physical state reconstructed from the model.
    pub model_state: Option<f64>,
    /// Value read directly off the model distribution, with no physicality step.
    pub model_distribution: f64,
}

/// Reconstruction scores of one outcome distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateScores {
    /// Fidelity of the reconstructed state with the prepared state.
    pub f_q: f64,
    /// Fidelity of the reconstructed state with the ideal target.
    pub f_q_ideal: f64,
    pub mle_converged: bool,
}

fn pauli4_view(p: &ProbDist<f64>) -> Result<ProbDist<f64>> {
    match p.alphabet() {
        6 => p.coarse_grain_p6_to_p4(),
        _ => Ok(p.clone()),
    }
}

/// Linear inversion plus physical projection of `p`, scored against the targets.
pub(crate) fn reconstruct_and_score(
    prepared: &Prepared,
    p: &ProbDist<f64>,
    spec: &ExperimentSpec,
    p4: &PovmSet<f64>,
) -> Result<Option<(StateScores, DensityMatrix<f64>)>> {
    if p.n_qubits() > MAX_DENSE_RECONSTRUCTION {
        return Ok(None);
    }
    let fit = mle_project(&pauli4_view(p)?, p4, &spec.mle).stage("reconstruct")?;
    let scores = StateScores {
        f_q: quantum_fidelity(&fit.rho, &prepared.rho).stage("metrics")?,
        f_q_ideal: quantum_fidelity(&fit.rho, &DensityMatrix::from_pure(&prepared.ideal))
            .stage("metrics")?,
        mle_converged: fit.converged,
    };
    Ok(Some((scores, fit.rho)))
}

pub(crate) fn correlations(
    prepared: &Prepared,
    model_dist: &ProbDist<f64>,
    model_rho: Option<&DensityMatrix<f64>>,
    p4: &PovmSet<f64>,
) -> Result<Vec<CorrelationRecord>> {
    let view = pauli4_view(model_dist)?;
    let mut out = Vec::new();
    for (axis, name) in [(Basis::Z, "zz"), (Basis::X, "xx")] {
        let truth = pairwise_correlations(&prepared.rho, axis)?;
        let from_dist = pairwise_correlations_from_distribution(&view, p4, axis)?;
        let from_state = match model_rho {
            Some(r) => Some(pairwise_correlations(r, axis)?),
            None => None,
        };
        for (i, (((j, k), t), (_, d))) in truth.iter().zip(&from_dist).enumerate() {
            out.push(CorrelationRecord {
                axis: name.to_string(),
                j: *j,
                k: *k,
                truth: *t,
                model_state: from_state.as_ref().map(|s| s[i].1),
                model_distribution: *d,
            });
        }
    }
    Ok(out)
}

/// Outcome of one full tomography run on the master dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub n_qubits: usize,
    pub state: StateKind,
    pub povm: PovmKind,
    pub shots: usize,
    pub seed: u64,
    pub train_seed: u64,
    pub depolarizing_p: f64,
    pub preparation_fidelity: f64,
    pub dataset_sha256: String,
    /// Model distribution against the empirical distribution of the data.
    pub f_c: f64,
    /// Model distribution against the exact distribution of the prepared state.
    pub f_c_exact: f64,
    pub model: Option<StateScores>,
    /// Linear inversion plus projection of the empirical distribution.
    pub baseline: Option<StateScores>,
    pub correlations: Vec<CorrelationRecord>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub wall_time_s: Option<f64>,
}

/// Model distribution and training summary of one fit.
pub(crate) struct Fit {
    pub dist: ProbDist<f64>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub params: RnnParams<f64>,
}

pub(crate) fn fit_model(data: &OutcomeDataset, cfg: &TrainingConfig) -> Result<Fit> {
    let model = train::<f64>(data, cfg).stage("train")?;
    let dist = exact_distribution(&model.params, data.n_qubits()).stage("train")?;
    Ok(Fit {
        dist,
        epochs: model.trace.epochs.len(),
        best_epoch: model.trace.best_epoch,
        stop: model.trace.stop,
        params: model.params,
    })
}

/// Prepares, samples, trains on all `spec.shots` shots and scores the `n`-qubit run.
pub fn run_tomography(
    spec: &ExperimentSpec,
    n: usize,
) -> Result<(TomographyRecord, RnnParams<f64>)> {
    let start = Instant::now();
    let prepared = prepare(spec, n)?;
    let train_seed = derive_seed(spec.seed, SeedPurpose::Tomography, n, spec.shots as u64, 0);
    let cfg = TrainingConfig {
        seed: train_seed,
        ..spec.training.clone()
    };
    let fit = fit_model(&prepared.data, &cfg)?;
    let povm = make_povm::<f64>(spec.povm);
    let p4 = make_povm::<f64>(PovmKind::Pauli4);
    let empirical = empirical_distribution::<f64>(&prepared.data).stage("metrics")?;
    let exact = povm_distribution(&prepared.rho, &povm).stage("metrics")?;
    let f_c = classical_fidelity(&fit.dist, &empirical).stage("metrics")?;
    let f_c_exact = classical_fidelity(&fit.dist, &exact).stage("metrics")?;

    let model = reconstruct_and_score(&prepared, &fit.dist, spec, &p4)?;
    let baseline = reconstruct_and_score(&prepared, &empirical, spec, &p4)?;
    let correlations =
        correlations(&prepared, &fit.dist, model.as_ref().map(|m| &m.1), &p4).stage("metrics")?;

    let record = TomographyRecord {
        n_qubits: n,
        state: spec.state,
        povm: spec.povm,
        shots: spec.shots,
        seed: spec.seed,
        train_seed,
        depolarizing_p: prepared.depolarizing_p,
        preparation_fidelity: prepared.preparation_fidelity().stage("metrics")?,
        dataset_sha256: prepared.data.content_hash(),
        f_c,
        f_c_exact,
        model: model.map(|m| m.0),
        baseline: baseline.map(|b| b.0),
        correlations,
        epochs: fit.epochs,
        best_epoch: fit.best_epoch,
        stop: fit.stop,
        wall_time_s: spec.record_wall_time.then(|| start.elapsed().as_secs_f64()),
    };
    Ok((record, fit.params))
}
