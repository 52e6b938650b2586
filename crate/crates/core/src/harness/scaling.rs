use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tomography::{
    correlations, fit_model, reconstruct_and_score, CorrelationRecord, StateScores,
};
use super::{derive_seed, prepare, ExperimentSpec, Prepared, SeedPurpose, REPORT_VERSION};
use crate::error::{Result, StageContext};
use crate::generative::TrainingConfig;
use crate::metrics::classical_fidelity;
use crate::povm::{empirical_distribution, make_povm, povm_distribution, PovmKind};

/// Fidelities of all repeats at one shot budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub shots: usize,
    pub mean: f64,
    /// Sample standard deviation across repeats (0 for a single repeat).
    pub std: f64,
    pub values: Vec<f64>,
}

impl GridPoint {
    fn new(shots: usize, values: Vec<f64>) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            shots,
            mean,
            std,
            values,
        }
    }
}

/// Smallest grid budget whose mean fidelity reaches the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsStar {
    /// `None` when censored.
    pub value: Option<usize>,
    /// The threshold was never reached on the grid; the true value exceeds its last point.
    pub censored: bool,
    /// Visited grid points, up to and including the crossing.
    pub curve: Vec<GridPoint>,
}

/// Least-squares line through `(N, N_s*)`, over measured qubit counts only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares; `None` with fewer than two distinct abscissae.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let m = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rnn,
    Baseline,
}

/// One `(N, N_s, repeat)` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub n_qubits: usize,
    pub shots: usize,
    pub repeat: usize,
    pub subsample_seed: u64,
    pub train_seed: Option<u64>,
    /// Against the empirical distribution of the full master dataset.
    pub f_c: f64,
    /// Against the exact distribution of the prepared state.
    pub f_c_exact: f64,
    pub state: Option<StateScores>,
    pub correlations: Vec<CorrelationRecord>,
    pub epochs: Option<usize>,
    pub best_epoch: Option<usize>,
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub n_qubits: usize,
    pub depolarizing_p: f64,
    pub preparation_fidelity: f64,
    pub dataset_sha256: String,
    pub rnn: Option<NsStar>,
    pub baseline: Option<NsStar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub report_version: u32,
    pub spec: ExperimentSpec,
    pub series: Vec<SeriesReport>,
    pub rnn_fit: Option<LinearFit>,
    pub baseline_fit: Option<LinearFit>,
    pub cells: Vec<CellRecord>,
}

impl ScalingReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Validation(e.to_string()))
    }
}

struct Tracker {
    values: Vec<f64>,
    curve: Vec<GridPoint>,
    crossed: Option<usize>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            values: Vec::new(),
            curve: Vec::new(),
            crossed: None,
        }
    }

    fn close_point(&mut self, shots: usize, threshold: f64) {
        let point = GridPoint::new(shots, std::mem::take(&mut self.values));
        if point.mean >= threshold {
            self.crossed = Some(shots);
        }
        self.curve.push(point);
    }

    fn finish(self) -> NsStar {
        NsStar {
            value: self.crossed,
            censored: self.crossed.is_none(),
            curve: self.curve,
        }
    }
}

fn sweep(
    spec: &ExperimentSpec,
    n: usize,
    prepared: &Prepared,
    with_rnn: bool,
    with_baseline: bool,
    cells: &mut Vec<CellRecord>,
) -> Result<(Option<NsStar>, Option<NsStar>)> {
    let data = &prepared.data;
    let full = empirical_distribution::<f64>(data).stage("metrics")?;
    let exact = povm_distribution(&prepared.rho, &make_povm(spec.povm)).stage("metrics")?;
    let p4 = make_povm::<f64>(PovmKind::Pauli4);
    let mut rnn = with_rnn.then(Tracker::new);
    let mut base = with_baseline.then(Tracker::new);
    let active = |t: &Option<Tracker>| t.as_ref().is_some_and(|t| t.crossed.is_none());

    for &shots in &spec.shot_grid {
        if !active(&rnn) && !active(&base) {
            break;
        }
        for repeat in 0..spec.repeats {
            let subsample_seed = derive_seed(
                spec.seed,
                SeedPurpose::Subsample,
                n,
                shots as u64,
                repeat as u64,
            );
            let sub = data.subsample(shots, subsample_seed).stage("sample")?;
            if active(&base) {
                let emp = empirical_distribution::<f64>(&sub).stage("metrics")?;
                let f_c = classical_fidelity(&emp, &full).stage("metrics")?;
                base.as_mut().expect("active").values.push(f_c);
                cells.push(CellRecord {
                    method: Method::Baseline,
                    n_qubits: n,
                    shots,
                    repeat,
                    subsample_seed,
                    train_seed: None,
                    f_c,
                    f_c_exact: classical_fidelity(&emp, &exact).stage("metrics")?,
                    state: None,
                    correlations: Vec::new(),
                    epochs: None,
                    best_epoch: None,
                    wall_time_s: None,
                });
            }
            if active(&rnn) {
                let start = Instant::now();
                let train_seed = derive_seed(
                    spec.seed,
                    SeedPurpose::Train,
                    n,
                    shots as u64,
                    repeat as u64,
                );
                let cfg = TrainingConfig {
                    seed: train_seed,
                    ..spec.training.clone()
                };
                let fit = fit_model(&sub, &cfg)?;
                let f_c = classical_fidelity(&fit.dist, &full).stage("metrics")?;
                let scored = reconstruct_and_score(prepared, &fit.dist, spec, &p4)?;
                let corr = correlations(prepared, &fit.dist, scored.as_ref().map(|s| &s.1), &p4)
                    .stage("metrics")?;
                rnn.as_mut().expect("active").values.push(f_c);
                cells.push(CellRecord {
                    method: Method::Rnn,
                    n_qubits: n,
                    shots,
                    repeat,
                    subsample_seed,
                    train_seed: Some(train_seed),
                    f_c,
                    f_c_exact: classical_fidelity(&fit.dist, &exact).stage("metrics")?,
                    state: scored.map(|s| s.0),
                    correlations: corr,
                    epochs: Some(fit.epochs),
                    best_epoch: Some(fit.best_epoch),
                    wall_time_s: spec.record_wall_time.then(|| start.elapsed().as_secs_f64()),
                });
            }
        }
        for t in [&mut rnn, &mut base].into_iter().flatten() {
            if t.crossed.is_none() {
                t.close_point(shots, spec.threshold);
            }
        }
    }
    Ok((rnn.map(Tracker::finish), base.map(Tracker::finish)))
}

fn run(spec: &ExperimentSpec, with_rnn: bool, with_baseline: bool) -> Result<ScalingReport> {
    spec.validate().stage("prepare")?;
    let mut series = Vec::new();
    let mut cells = Vec::new();
    for &n in &spec.qubits {
        let prepared = prepare(spec, n)?;
        let (rnn, baseline) = sweep(spec, n, &prepared, with_rnn, with_baseline, &mut cells)?;
        series.push(SeriesReport {
            n_qubits: n,
            depolarizing_p: prepared.depolarizing_p,
            preparation_fidelity: prepared.preparation_fidelity().stage("metrics")?,
            dataset_sha256: prepared.data.content_hash(),
            rnn,
            baseline,
        });
    }
    let fit = |pick: fn(&SeriesReport) -> Option<&NsStar>| {
        let points: Vec<(f64, f64)> = series
            .iter()
            .filter_map(|s| {
                pick(s)
                    .and_then(|ns| ns.value)
                    .map(|v| (s.n_qubits as f64, v as f64))
            })
            .collect();
        linear_fit(&points)
    };
    Ok(ScalingReport {
        report_version: REPORT_VERSION,
        spec: spec.clone(),
        rnn_fit: fit(|s| s.rnn.as_ref()),
        baseline_fit: fit(|s| s.baseline.as_ref()),
        series,
        cells,
    })
}

/// Full sweep: model and empirical baseline on paired subsamples.
pub fn run_scaling(spec: &ExperimentSpec) -> Result<ScalingReport> {
    run(spec, true, true)
}

/// Model `N_s*` per qubit count.
pub fn find_ns_star(spec: &ExperimentSpec) -> Result<Vec<(usize, NsStar)>> {
    let report = run(spec, true, false)?;
    Ok(report
        .series
        .into_iter()
        .map(|s| (s.n_qubits, s.rnn.expect("model sweep")))
        .collect())
}

/// `N_s*` per qubit count when the empirical subsample distribution is the estimate.
pub fn baseline_ns_star(spec: &ExperimentSpec) -> Result<Vec<(usize, NsStar)>> {
    let report = run(spec, false, true)?;
    Ok(report
        .series
        .into_iter()
        .map(|s| (s.n_qubits, s.baseline.expect("baseline sweep")))
        .collect())
}
