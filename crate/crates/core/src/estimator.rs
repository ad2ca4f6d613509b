//! Online job-size estimation: the initial tasks-times-average guess, the
//! uniform least-squares fit over sample task times, shuffle estimation,
//! progress-based extrapolation and artificial error injection.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{PhaseId, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Sample tasks per phase; jobs with fewer tasks are entirely samples.
    pub sample_count: u32,
    /// Propensity to schedule jobs of unknown size. `None` stands for the
    /// infinite extreme: untrained jobs rank after every estimated one.
    pub xi: Option<f64>,
    /// Timeout after which a still-running sample reduce task has its
    /// execution time extrapolated from progress, seconds.
    pub delta: f64,
    /// Half-width of the injected estimation error; 0 disables injection.
    pub alpha: f64,
    /// Average task duration assumed before anything has completed, seconds.
    pub bootstrap_avg_task: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            sample_count: 5,
            xi: Some(1.0),
            delta: 60.0,
            alpha: 0.0,
            bootstrap_avg_task: 60.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.sample_count < 1 {
            return Err(EstimatorError::InvalidConfig("sample_count must be >= 1"));
        }
        if let Some(xi) = self.xi {
            if !(xi >= 1.0) {
                return Err(EstimatorError::InvalidConfig("xi must be >= 1"));
            }
        }
        if !(self.delta > 0.0) {
            return Err(EstimatorError::InvalidConfig("delta must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(EstimatorError::InvalidConfig("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Measured (or extrapolated) timing of one sample task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub task_index: u32,
    /// Execution-stage seconds, sigma_{i,j}.
    pub execution_time: f64,
    /// Shuffle seconds; zero for map samples.
    pub shuffle_time: f64,
    /// Shuffle input bytes; zero for map samples.
    pub input_bytes: u64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Initial,
    Trained,
}

/// A phase-job's size in serialized form: the sum of its tasks' runtimes,
/// independent of the cluster it runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub phase_id: PhaseId,
    /// Task-seconds; `f64::INFINITY` when the infinite-propensity flag is set.
    pub serialized_size: f64,
    pub provenance: Provenance,
    pub per_task_expected: f64,
    /// Set when xi is infinite and the phase is still untrained; ranking
    /// places such phases after every estimated one.
    pub infinite_propensity: bool,
}

/// Running averages of completed task durations, kept per task kind.
/// The configured bootstrap value answers until the first observation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AverageTaskSizeState {
    bootstrap: f64,
    map_mean: f64,
    map_count: u64,
    reduce_mean: f64,
    reduce_count: u64,
}

impl AverageTaskSizeState {
    pub fn new(bootstrap: f64) -> Self {
        AverageTaskSizeState {
            bootstrap,
            map_mean: 0.0,
            map_count: 0,
            reduce_mean: 0.0,
            reduce_count: 0,
        }
    }

    pub fn average(&self, kind: TaskKind) -> f64 {
        match kind {
            TaskKind::Map if self.map_count > 0 => self.map_mean,
            TaskKind::Reduce if self.reduce_count > 0 => self.reduce_mean,
            _ => self.bootstrap,
        }
    }

    pub fn observations(&self, kind: TaskKind) -> u64 {
        match kind {
            TaskKind::Map => self.map_count,
            TaskKind::Reduce => self.reduce_count,
        }
    }
}

/// Incrementally fold one completed task duration into the running mean.
pub fn update_average_task_size(state: &mut AverageTaskSizeState, duration: f64, kind: TaskKind) {
    debug_assert!(duration > 0.0);
    let (mean, count) = match kind {
        TaskKind::Map => (&mut state.map_mean, &mut state.map_count),
        TaskKind::Reduce => (&mut state.reduce_mean, &mut state.reduce_count),
    };
    *count += 1;
    *mean += (duration - *mean) / *count as f64;
}

/// First rough estimate for a phase with `k` tasks: xi * k * l, where l is
/// the average size of past tasks of the same kind.
pub fn initial_estimate(
    kind: TaskKind,
    k: u32,
    phase_id: PhaseId,
    state: &AverageTaskSizeState,
    cfg: &EstimatorConfig,
) -> SizeEstimate {
    let l = state.average(kind);
    match cfg.xi {
        Some(xi) => SizeEstimate {
            phase_id,
            serialized_size: xi * k as f64 * l,
            provenance: Provenance::Initial,
            per_task_expected: l,
            infinite_propensity: false,
        },
        None => SizeEstimate {
            phase_id,
            serialized_size: f64::INFINITY,
            provenance: Provenance::Initial,
            per_task_expected: l,
            infinite_propensity: true,
        },
    }
}

/// Least-squares fit of Uniform[a, b] to the empirical CDF of the sample
/// execution times: the sorted values are regressed on the ECDF ordinates
/// q_i = (i - 0.5)/n, giving the fitted line x = a + (b - a) q.
///
/// Returns (a, b). With one sample the fit degenerates to a = b = x.
pub fn uniform_ls_fit(samples: &[f64]) -> Result<(f64, f64), EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::NoSamples);
    }
    let n = samples.len();
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    if n == 1 {
        return Ok((xs[0], xs[0]));
    }
    let x_mean = xs.iter().sum::<f64>() / n as f64;
    // q_i mean is exactly 1/2 for the (i - 0.5)/n ordinates
    let mut sqq = 0.0;
    let mut sqx = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let q = (i as f64 + 0.5) / n as f64 - 0.5;
        sqq += q * q;
        sqx += q * (x - x_mean);
    }
    if sqq == 0.0 {
        return Ok((x_mean, x_mean));
    }
    let slope = sqx / sqq;
    let a = x_mean - slope * 0.5;
    let b = a + slope;
    Ok((a, b))
}

/// Trained size of a phase: k times the expected value of the fitted
/// uniform distribution over the sample execution times.
pub fn fit_phase_size(
    samples: &[SampleRecord],
    k: u32,
    phase_id: PhaseId,
) -> Result<SizeEstimate, EstimatorError> {
    let times: Vec<f64> = samples.iter().map(|s| s.execution_time).collect();
    let (a, b) = uniform_ls_fit(&times)?;
    let expected = ((a + b) / 2.0).max(f64::MIN_POSITIVE);
    Ok(SizeEstimate {
        phase_id,
        serialized_size: k as f64 * expected,
        provenance: Provenance::Trained,
        per_task_expected: expected,
        infinite_propensity: false,
    })
}

/// Total shuffle seconds for a reduce phase of `k_reduce` tasks: the
/// per-sample shuffle times averaged with normalized input sizes as
/// weights, multiplied by the task count. Degenerates to the unweighted
/// mean when no sample carries input bytes; the caller is told so.
pub fn estimate_shuffle(samples: &[SampleRecord], k_reduce: u32) -> Result<ShuffleEstimate, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::NoSamples);
    }
    let total_bytes: f64 = samples.iter().map(|s| s.input_bytes as f64).sum();
    if total_bytes > 0.0 {
        let weighted: f64 = samples
            .iter()
            .map(|s| s.shuffle_time * s.input_bytes as f64)
            .sum();
        Ok(ShuffleEstimate {
            total_seconds: k_reduce as f64 * weighted / total_bytes,
            unweighted_fallback: false,
        })
    } else {
        let mean: f64 = samples.iter().map(|s| s.shuffle_time).sum::<f64>() / samples.len() as f64;
        Ok(ShuffleEstimate {
            total_seconds: k_reduce as f64 * mean,
            unweighted_fallback: true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleEstimate {
    pub total_seconds: f64,
    /// True when every sample reported zero input bytes and the plain mean
    /// was used instead of the weighted one.
    pub unweighted_fallback: bool,
}

/// Extrapolated execution time of a sample that is still running when the
/// timeout fires: delta / p with p the execution-stage progress fraction.
pub fn progress_based_size(delta: f64, progress: f64) -> Result<f64, EstimatorError> {
    if !(progress > 0.0) {
        return Err(EstimatorError::NotYetEstimable);
    }
    debug_assert!(progress <= 1.0);
    Ok(delta / progress)
}

/// Perturb an estimate by a Uniform[1 - alpha, 1 + alpha] factor.
/// alpha = 0 is the identity and draws nothing from the rng.
pub fn inject_error<R: Rng>(estimate: &SizeEstimate, alpha: f64, rng: &mut R) -> SizeEstimate {
    debug_assert!((0.0..=1.0).contains(&alpha));
    if alpha == 0.0 || estimate.infinite_propensity {
        return estimate.clone();
    }
    let factor = rng.gen_range(1.0 - alpha..=1.0 + alpha);
    SizeEstimate {
        serialized_size: estimate.serialized_size * factor,
        ..estimate.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    InvalidConfig(&'static str),
    NoSamples,
    /// Progress is still zero; the sample stays pending.
    NotYetEstimable,
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::InvalidConfig(reason) => write!(f, "invalid estimator config: {reason}"),
            EstimatorError::NoSamples => write!(f, "at least one sample record is required"),
            EstimatorError::NotYetEstimable => write!(f, "zero progress: size not yet estimable"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EstimatorError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    fn sample(t: f64) -> SampleRecord {
        SampleRecord {
            task_index: 0,
            execution_time: t,
            shuffle_time: 0.0,
            input_bytes: 0,
            extrapolated: false,
        }
    }

    fn shuffle_sample(shuffle: f64, bytes: u64) -> SampleRecord {
        SampleRecord {
            task_index: 0,
            execution_time: 1.0,
            shuffle_time: shuffle,
            input_bytes: bytes,
            extrapolated: false,
        }
    }

    /// Brute-force least-squares oracle: zooming grid search over (a, b)
    /// minimizing the squared residuals of the sorted samples against the
    /// fitted uniform quantile line.
    fn grid_search_uniform_fit(samples: &[f64]) -> (f64, f64) {
        let mut xs: Vec<f64> = samples.to_vec();
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let loss = |a: f64, b: f64| -> f64 {
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let q = (i as f64 + 0.5) / n as f64;
                    let fitted = a + (b - a) * q;
                    (x - fitted) * (x - fitted)
                })
                .sum()
        };
        let span = xs[n - 1] - xs[0];
        let pad = span.max(1.0);
        let (mut a_lo, mut a_hi) = (xs[0] - 2.0 * pad, xs[0] + 2.0 * pad);
        let (mut b_lo, mut b_hi) = (xs[n - 1] - 2.0 * pad, xs[n - 1] + 2.0 * pad);
        let mut best = (xs[0], xs[n - 1]);
        for _ in 0..40 {
            let mut best_loss = f64::INFINITY;
            let steps = 32;
            for i in 0..=steps {
                let a = a_lo + (a_hi - a_lo) * i as f64 / steps as f64;
                for j in 0..=steps {
                    let b = b_lo + (b_hi - b_lo) * j as f64 / steps as f64;
                    let l = loss(a, b);
                    if l < best_loss {
                        best_loss = l;
                        best = (a, b);
                    }
                }
            }
            let a_step = (a_hi - a_lo) / steps as f64;
            let b_step = (b_hi - b_lo) / steps as f64;
            a_lo = best.0 - 2.0 * a_step;
            a_hi = best.0 + 2.0 * a_step;
            b_lo = best.1 - 2.0 * b_step;
            b_hi = best.1 + 2.0 * b_step;
        }
        best
    }

    #[test]
    fn initial_estimate_is_xi_k_l() {
        let mut st = AverageTaskSizeState::new(60.0);
        update_average_task_size(&mut st, 30.0, TaskKind::Map);
        let cfg = EstimatorConfig::default();
        let e = initial_estimate(TaskKind::Map, 10, PhaseId(0), &st, &cfg);
        assert!((e.serialized_size - 300.0).abs() < TOL);
        assert_eq!(e.provenance, Provenance::Initial);

        let cfg2 = EstimatorConfig {
            xi: Some(2.0),
            ..EstimatorConfig::default()
        };
        let e2 = initial_estimate(TaskKind::Map, 10, PhaseId(0), &st, &cfg2);
        assert!((e2.serialized_size - 600.0).abs() < TOL);
    }

    #[test]
    fn infinite_xi_sets_the_flag() {
        let st = AverageTaskSizeState::new(60.0);
        let cfg = EstimatorConfig {
            xi: None,
            ..EstimatorConfig::default()
        };
        let e = initial_estimate(TaskKind::Reduce, 4, PhaseId(1), &st, &cfg);
        assert!(e.infinite_propensity);
        assert!(e.serialized_size.is_infinite());
    }

    #[test]
    fn degenerate_samples_fit_exactly() {
        let recs = vec![sample(10.0); 5];
        let e = fit_phase_size(&recs, 20, PhaseId(0)).unwrap();
        assert!((e.serialized_size - 200.0).abs() < TOL);
        assert_eq!(e.provenance, Provenance::Trained);
    }

    #[test]
    fn single_sample_is_its_own_expectation() {
        let e = fit_phase_size(&[sample(42.0)], 1, PhaseId(0)).unwrap();
        assert!((e.serialized_size - 42.0).abs() < TOL);
    }

    #[test]
    fn fit_matches_grid_search_oracle() {
        for xs in [
            vec![8.0, 10.0, 12.0],
            vec![40.0, 55.0, 61.0, 70.0, 80.0],
            vec![3.0, 3.5, 9.0],
            vec![100.0, 100.0, 150.0, 220.0, 230.0],
        ] {
            let (a, b) = uniform_ls_fit(&xs).unwrap();
            let (oa, ob) = grid_search_uniform_fit(&xs);
            // the loss surface limits how precisely a grid search can pin
            // the endpoints; the fitted expectation is better conditioned
            let scale = (b - a).abs().max(1.0);
            assert!(
                (a - oa).abs() / scale < 1e-6 && (b - ob).abs() / scale < 1e-6,
                "fit ({a}, {b}) vs oracle ({oa}, {ob}) for {xs:?}"
            );
            let recs: Vec<SampleRecord> = xs.iter().map(|&t| sample(t)).collect();
            let e = fit_phase_size(&recs, 3, PhaseId(0)).unwrap();
            let oracle_expected = 3.0 * (oa + ob) / 2.0;
            assert!(
                (e.serialized_size - oracle_expected).abs() / oracle_expected < 1e-9,
                "size {} vs oracle {oracle_expected} for {xs:?}",
                e.serialized_size
            );
        }
    }

    #[test]
    fn fit_empty_sample_set_errors() {
        assert_eq!(
            fit_phase_size(&[], 1, PhaseId(0)).unwrap_err(),
            EstimatorError::NoSamples
        );
    }

    #[test]
    fn shuffle_equal_weights_is_plain_mean() {
        let gb = 1_000_000_000;
        let recs = vec![shuffle_sample(10.0, gb), shuffle_sample(20.0, gb)];
        let e = estimate_shuffle(&recs, 4).unwrap();
        assert!((e.total_seconds - 60.0).abs() < TOL);
        assert!(!e.unweighted_fallback);
    }

    #[test]
    fn shuffle_weights_by_input_bytes() {
        // {10 s @ 3 GB, 20 s @ 1 GB}, k = 4 -> 4 * (30 + 20)/4 = 50
        let recs = vec![
            shuffle_sample(10.0, 3_000_000_000),
            shuffle_sample(20.0, 1_000_000_000),
        ];
        let e = estimate_shuffle(&recs, 4).unwrap();
        assert!((e.total_seconds - 50.0).abs() < TOL);
    }

    #[test]
    fn shuffle_single_sample() {
        let e = estimate_shuffle(&[shuffle_sample(7.0, 1)], 1).unwrap();
        assert!((e.total_seconds - 7.0).abs() < TOL);
    }

    #[test]
    fn shuffle_zero_bytes_falls_back_to_mean() {
        let recs = vec![shuffle_sample(10.0, 0), shuffle_sample(30.0, 0)];
        let e = estimate_shuffle(&recs, 2).unwrap();
        assert!((e.total_seconds - 40.0).abs() < TOL);
        assert!(e.unweighted_fallback);
    }

    #[test]
    fn progress_extrapolation() {
        assert!((progress_based_size(60.0, 0.5).unwrap() - 120.0).abs() < TOL);
        assert!((progress_based_size(60.0, 1.0).unwrap() - 60.0).abs() < TOL);
        assert!((progress_based_size(60.0, 0.1).unwrap() - 600.0).abs() < TOL);
        assert_eq!(
            progress_based_size(60.0, 0.0).unwrap_err(),
            EstimatorError::NotYetEstimable
        );
    }

    #[test]
    fn error_injection_identity_and_range() {
        let e = SizeEstimate {
            phase_id: PhaseId(0),
            serialized_size: 100.0,
            provenance: Provenance::Trained,
            per_task_expected: 10.0,
            infinite_propensity: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = inject_error(&e, 0.0, &mut rng);
        assert_eq!(same.serialized_size, 100.0);

        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = inject_error(&e, 1.0, &mut rng);
            assert!((0.0..=200.0).contains(&p.serialized_size));
        }

        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            inject_error(&e, 0.5, &mut a).serialized_size,
            inject_error(&e, 0.5, &mut b).serialized_size
        );
    }

    #[test]
    fn injection_preserves_expected_size() {
        let e = SizeEstimate {
            phase_id: PhaseId(0),
            serialized_size: 100.0,
            provenance: Provenance::Trained,
            per_task_expected: 10.0,
            infinite_propensity: false,
        };
        let n = 20_000;
        let mut acc = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..n {
            acc += inject_error(&e, 0.8, &mut rng).serialized_size;
        }
        let mean = acc / n as f64;
        assert!((mean - 100.0).abs() / 100.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn running_mean_updates() {
        let mut st = AverageTaskSizeState::new(60.0);
        assert_eq!(st.average(TaskKind::Map), 60.0); // bootstrap
        update_average_task_size(&mut st, 30.0, TaskKind::Map);
        update_average_task_size(&mut st, 60.0, TaskKind::Map);
        assert!((st.average(TaskKind::Map) - 45.0).abs() < TOL);
        update_average_task_size(&mut st, 45.0, TaskKind::Map);
        assert!((st.average(TaskKind::Map) - 45.0).abs() < TOL);
        // reduce mean untouched
        assert_eq!(st.average(TaskKind::Reduce), 60.0);
    }

    proptest! {
        #[test]
        fn fit_is_linear_in_k(times in prop::collection::vec(1.0f64..500.0, 1..8), k in 1u32..50) {
            let recs: Vec<SampleRecord> = times.iter().map(|&t| sample(t)).collect();
            let one = fit_phase_size(&recs, 1, PhaseId(0)).unwrap().serialized_size;
            let many = fit_phase_size(&recs, k, PhaseId(0)).unwrap().serialized_size;
            prop_assert!((many - k as f64 * one).abs() / many < 1e-12);
        }

        #[test]
        fn fit_midpoint_equals_sample_mean(times in prop::collection::vec(1.0f64..500.0, 2..8)) {
            let (a, b) = uniform_ls_fit(&times).unwrap();
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            prop_assert!(((a + b) / 2.0 - mean).abs() / mean < 1e-12);
        }

        #[test]
        fn shuffle_invariant_under_weight_rescaling(
            shuffles in prop::collection::vec(1.0f64..100.0, 1..6),
            scale in 1u64..1000,
        ) {
            let base: Vec<SampleRecord> = shuffles
                .iter()
                .enumerate()
                .map(|(i, &s)| shuffle_sample(s, (i as u64 + 1) * 1_000_000))
                .collect();
            let scaled: Vec<SampleRecord> = base
                .iter()
                .map(|r| SampleRecord { input_bytes: r.input_bytes * scale, ..r.clone() })
                .collect();
            let a = estimate_shuffle(&base, 7).unwrap().total_seconds;
            let b = estimate_shuffle(&scaled, 7).unwrap().total_seconds;
            prop_assert!((a - b).abs() / a < 1e-12);
        }

        #[test]
        fn extrapolation_never_shrinks_delta(p in 0.0001f64..=1.0) {
            let s = progress_based_size(60.0, p).unwrap();
            prop_assert!(s >= 60.0);
            if p < 1.0 {
                prop_assert!(s > 60.0);
            }
        }
    }
}
