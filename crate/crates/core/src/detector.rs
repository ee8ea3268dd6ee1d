//! CUSUM state machine, stopping rule, and stream runners.
//!
//! The reflected statistic `S_t = max(S_{t−1}, 0) + Δ(x_t)` with `S_0 = 0`
//! equals the max-form statistic `max_{0≤k≤t−1} Σ_{j=k+1}^t Δ_j` on every
//! finite increment sequence (tested by brute force). Only the increment
//! function differs between detection methods; everything else routes
//! through the same recursion.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rng;
use crate::score_net::{online_update, ScoreModel, TrainConfig};
use crate::stats::{increment, ScoreFn, SharedScore};

/// Detection increments are clipped to this magnitude instead of
/// propagating overflowed values from a diverged online model; the number
/// of clipped steps is reported on the run record. NaN still errors.
pub const INCREMENT_CLIP: f64 = 1e12;

/// Maps a data point to a detection increment Δ(x).
pub trait IncrementFn {
    fn dim(&self) -> usize;
    fn delta(&self, x: &[f64]) -> Result<f64>;
}

impl<T: IncrementFn + ?Sized> IncrementFn for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn delta(&self, x: &[f64]) -> Result<f64> {
        (**self).delta(x)
    }
}

impl<T: IncrementFn + ?Sized> IncrementFn for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn delta(&self, x: &[f64]) -> Result<f64> {
        (**self).delta(x)
    }
}

impl<T: IncrementFn + ?Sized> IncrementFn for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn delta(&self, x: &[f64]) -> Result<f64> {
        (**self).delta(x)
    }
}

/// Hyvärinen-score increment `Δ(x) = H(x; s0) − H(x; s1)`.
pub struct ScoreIncrement {
    pub s0: SharedScore,
    pub s1: SharedScore,
}

impl ScoreIncrement {
    pub fn new(s0: SharedScore, s1: SharedScore) -> Self {
        Self { s0, s1 }
    }
}

impl IncrementFn for ScoreIncrement {
    fn dim(&self) -> usize {
        self.s0.dim()
    }
    fn delta(&self, x: &[f64]) -> Result<f64> {
        increment(&self.s0, &self.s1, x)
    }
}

/// Increment backed by a plain function (log-likelihood ratios and other
/// custom statistics).
pub struct FnIncrement<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<f64>> FnIncrement<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Result<f64>> IncrementFn for FnIncrement<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn delta(&self, x: &[f64]) -> Result<f64> {
        (self.f)(x)
    }
}

/// Running CUSUM state: current statistic, time index, clip counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorState {
    pub statistic: f64,
    pub time: usize,
    pub clipped: usize,
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            statistic: 0.0,
            time: 0,
            clipped: 0,
        }
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

/// One CUSUM step: `S_t = max(S_{t−1}, 0) + Δ(x_t)`.
///
/// Returns the advanced state, the new statistic value, and whether it
/// reached the threshold `tau`.
pub fn step<I: IncrementFn + ?Sized>(
    state: &DetectorState,
    x: &[f64],
    inc: &I,
    tau: f64,
) -> Result<(DetectorState, f64, bool)> {
    let delta = inc.delta(x)?;
    let t = state.time + 1;
    if delta.is_nan() {
        return Err(Error::non_finite_at("detection increment", t));
    }
    let mut clipped = state.clipped;
    let delta = if delta.abs() > INCREMENT_CLIP {
        clipped += 1;
        delta.signum() * INCREMENT_CLIP
    } else {
        delta
    };
    let s = state.statistic.max(0.0) + delta;
    let next = DetectorState {
        statistic: s,
        time: t,
        clipped,
    };
    Ok((next, s, s >= tau))
}

/// Convenience for the Hyvärinen-score statistic with explicit score
/// functions.
pub fn step_scores<S0, S1>(
    state: &DetectorState,
    x: &[f64],
    s0: &S0,
    s1: &S1,
    tau: f64,
) -> Result<(DetectorState, f64, bool)>
where
    S0: ScoreFn + ?Sized,
    S1: ScoreFn + ?Sized,
{
    let delta = increment(s0, s1, x)?;
    let probe = FnIncrement::new(s0.dim(), move |_x: &[f64]| Ok(delta));
    step(state, x, &probe, tau)
}

/// Outcome of one monitored trajectory.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// True change point of the generating stream, when known.
    pub change_point: Option<usize>,
    /// First t with `S_t ≥ τ`; `None` when the stream ended first.
    pub stopping_time: Option<usize>,
    pub alarm_raised: bool,
    /// Number of points consumed from the stream.
    pub steps_consumed: usize,
    pub statistic_trace: Vec<(usize, f64)>,
    pub increments: Vec<f64>,
    /// Steps whose increment hit the clip guard.
    pub clipped: usize,
}

impl RunRecord {
    fn new() -> Self {
        Self {
            change_point: None,
            stopping_time: None,
            alarm_raised: false,
            steps_consumed: 0,
            statistic_trace: Vec::new(),
            increments: Vec::new(),
            clipped: 0,
        }
    }
}

/// Runs the CUSUM recursion over a stream until the first alarm or the
/// end of the stream.
pub fn run_offline<I, S>(stream: S, inc: &I, tau: f64) -> Result<RunRecord>
where
    I: IncrementFn + ?Sized,
    S: IntoIterator<Item = Vec<f64>>,
{
    if tau.is_nan() {
        return Err(Error::invalid("threshold must not be NaN"));
    }
    let mut record = RunRecord::new();
    let mut state = DetectorState::new();
    for x in stream {
        let (next, s, alarm) = step(&state, &x, inc, tau)?;
        record.increments.push(s - state.statistic.max(0.0));
        state = next;
        record.steps_consumed = state.time;
        record.statistic_trace.push((state.time, s));
        if alarm {
            record.alarm_raised = true;
            record.stopping_time = Some(state.time);
            break;
        }
    }
    record.clipped = state.clipped;
    Ok(record)
}

/// Multi-alarm variant: after each alarm the statistic resets to zero and
/// monitoring continues, yielding one record per segment. The plain
/// single-stop runner is the default behavior.
pub fn run_offline_resume<I, S>(stream: S, inc: &I, tau: f64) -> Result<Vec<RunRecord>>
where
    I: IncrementFn + ?Sized,
    S: IntoIterator<Item = Vec<f64>>,
{
    let mut records = Vec::new();
    let mut record = RunRecord::new();
    let mut state = DetectorState::new();
    let mut offset = 0usize;
    for x in stream {
        let (next, s, alarm) = step(&state, &x, inc, tau)?;
        record.increments.push(s - state.statistic.max(0.0));
        state = next;
        record.steps_consumed = state.time - offset;
        record.statistic_trace.push((state.time, s));
        if alarm {
            record.alarm_raised = true;
            record.stopping_time = Some(state.time);
            record.clipped = state.clipped;
            records.push(std::mem::replace(&mut record, RunRecord::new()));
            offset = state.time;
            state.statistic = 0.0;
        }
    }
    if !record.statistic_trace.is_empty() {
        record.clipped = state.clipped;
        records.push(record);
    }
    Ok(records)
}

/// Streaming statistic with internal state; the common interface for
/// calibration and run-length estimation across detection methods.
pub trait StatisticProcess {
    /// Consumes `x_t` and returns the statistic `S_t`.
    fn update(&mut self, x: &[f64]) -> Result<f64>;
}

impl<T: StatisticProcess + ?Sized> StatisticProcess for Box<T> {
    fn update(&mut self, x: &[f64]) -> Result<f64> {
        (**self).update(x)
    }
}

/// CUSUM recursion over any increment function.
pub struct CusumProcess<I> {
    inc: I,
    state: DetectorState,
}

impl<I: IncrementFn> CusumProcess<I> {
    pub fn new(inc: I) -> Self {
        Self {
            inc,
            state: DetectorState::new(),
        }
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }
}

impl<I: IncrementFn> StatisticProcess for CusumProcess<I> {
    fn update(&mut self, x: &[f64]) -> Result<f64> {
        let (next, s, _) = step(&self.state, x, &self.inc, f64::INFINITY)?;
        self.state = next;
        Ok(s)
    }
}

/// Online-adapting Hyvärinen-score CUSUM.
///
/// The first `w` statistics are forced to zero while the window fills and
/// the post-change model stays at its initialization. From `t = w+1` on,
/// the increment at time t is computed with the model from time t−1, and
/// the model is then refreshed on the trailing window that includes the
/// current point.
pub struct OnlineScoreProcess {
    s0: SharedScore,
    model: ScoreModel,
    window: VecDeque<Vec<f64>>,
    window_size: usize,
    cfg: TrainConfig,
    steps: usize,
    state: DetectorState,
}

impl OnlineScoreProcess {
    pub fn new(
        s0: SharedScore,
        init_model: ScoreModel,
        window_size: usize,
        cfg: TrainConfig,
        steps: usize,
    ) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::invalid("window size must be ≥ 1"));
        }
        cfg.validate()?;
        if init_model.input_dim() != s0.dim() {
            return Err(Error::DimMismatch {
                expected: s0.dim(),
                got: init_model.input_dim(),
            });
        }
        Ok(Self {
            s0,
            model: init_model,
            window: VecDeque::with_capacity(window_size + 1),
            window_size,
            cfg,
            steps,
            state: DetectorState::new(),
        })
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    /// Current post-change model parameters.
    pub fn model(&self) -> &ScoreModel {
        &self.model
    }
}

impl StatisticProcess for OnlineScoreProcess {
    fn update(&mut self, x: &[f64]) -> Result<f64> {
        let t = self.state.time + 1;
        self.window.push_back(x.to_vec());
        if self.window.len() > self.window_size {
            self.window.pop_front();
        }
        if t <= self.window_size {
            // Warm-up: statistic pinned at zero, model untouched.
            self.state.time = t;
            self.state.statistic = 0.0;
            return Ok(0.0);
        }
        let delta = increment(&self.s0, &self.model, x)?;
        let probe = FnIncrement::new(self.s0.dim(), move |_x: &[f64]| Ok(delta));
        let (next, s, _) = step(&self.state, x, &probe, f64::INFINITY)?;
        self.state = next;
        // Refresh the post-change model on the window including x_t, with
        // a per-step noise substream.
        if self.steps > 0 && self.cfg.learning_rate > 0.0 {
            let window: Vec<Vec<f64>> = self.window.iter().cloned().collect();
            let mut cfg = self.cfg.clone();
            cfg.rng_seed = rng::split_seed(self.cfg.rng_seed, t as u64);
            self.model = online_update(&self.model, &window, &cfg, self.steps)?;
        }
        Ok(s)
    }
}

/// Runs the online-adapting statistic over a stream.
pub fn run_online<S>(
    stream: S,
    s0: SharedScore,
    init_model: ScoreModel,
    tau: f64,
    window_size: usize,
    cfg: TrainConfig,
    steps: usize,
) -> Result<RunRecord>
where
    S: IntoIterator<Item = Vec<f64>>,
{
    if tau.is_nan() {
        return Err(Error::invalid("threshold must not be NaN"));
    }
    let mut proc = OnlineScoreProcess::new(s0, init_model, window_size, cfg, steps)?;
    let mut record = RunRecord::new();
    let mut prev = 0.0f64;
    for x in stream {
        let s = proc.update(&x)?;
        let t = proc.state().time;
        record.increments.push(if t <= window_size {
            0.0
        } else {
            s - prev.max(0.0)
        });
        prev = s;
        record.steps_consumed = t;
        record.statistic_trace.push((t, s));
        if t > window_size && s >= tau {
            record.alarm_raised = true;
            record.stopping_time = Some(t);
            break;
        }
    }
    record.clipped = proc.state().clipped;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::FnScore;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn const_increments(vals: Vec<f64>) -> (Vec<Vec<f64>>, impl IncrementFn) {
        let stream: Vec<Vec<f64>> = (0..vals.len()).map(|i| vec![i as f64]).collect();
        let inc = FnIncrement::new(1, move |x: &[f64]| Ok(vals[x[0] as usize]));
        (stream, inc)
    }

    /// Brute-force max-form statistic over nonempty suffixes.
    fn max_form(deltas: &[f64], t: usize) -> f64 {
        (0..t)
            .map(|k| deltas[k..t].iter().sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn hand_recursion_example() {
        let (stream, inc) = const_increments(vec![1.0, -2.0, 3.0]);
        let rec = run_offline(stream, &inc, f64::INFINITY).unwrap();
        let values: Vec<f64> = rec.statistic_trace.iter().map(|&(_, s)| s).collect();
        assert_eq!(values, vec![1.0, -1.0, 3.0]);
    }

    #[test]
    fn negative_increments_never_alarm() {
        let (stream, inc) = const_increments(vec![-0.5; 40]);
        let rec = run_offline(stream, &inc, 0.1).unwrap();
        assert!(!rec.alarm_raised);
        assert!(rec.statistic_trace.iter().all(|&(_, s)| s <= 0.0));
    }

    #[test]
    fn recursion_equals_max_form_on_random_sequences() {
        let mut rng = crate::rng::rng_from_seed(4);
        for _ in 0..200 {
            let len = rng.random_range(1..=20);
            let deltas: Vec<f64> = (0..len)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let (stream, inc) = const_increments(deltas.clone());
            let rec = run_offline(stream, &inc, f64::INFINITY).unwrap();
            for (i, &(t, s)) in rec.statistic_trace.iter().enumerate() {
                assert_eq!(t, i + 1);
                let brute = max_form(&deltas, t);
                assert!(
                    (s - brute).abs() < 1e-12,
                    "t={t}: recursive {s} vs max-form {brute}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn recursion_equals_max_form_property(deltas in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
            let (stream, inc) = const_increments(deltas.clone());
            let rec = run_offline(stream, &inc, f64::INFINITY).unwrap();
            for &(t, s) in &rec.statistic_trace {
                let brute = max_form(&deltas, t);
                prop_assert!((s - brute).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn step_errors_on_nan_increment() {
        let inc = FnIncrement::new(1, |_: &[f64]| Ok(f64::NAN));
        let state = DetectorState::new();
        match step(&state, &[0.0], &inc, 1.0) {
            Err(Error::NonFinite { time, .. }) => assert_eq!(time, Some(1)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn step_clips_huge_increments() {
        let inc = FnIncrement::new(1, |_: &[f64]| Ok(f64::INFINITY));
        let state = DetectorState::new();
        let (next, s, alarm) = step(&state, &[0.0], &inc, 1e13).unwrap();
        assert_eq!(s, INCREMENT_CLIP);
        assert_eq!(next.clipped, 1);
        assert!(!alarm);
    }

    #[test]
    fn offline_immediate_alarm_and_zero_increment_cases() {
        let (stream, inc) = const_increments(vec![0.5, 0.5]);
        let rec = run_offline(stream, &inc, 0.0).unwrap();
        assert_eq!(rec.stopping_time, Some(1));

        // Identical score models: Δ ≡ 0, never alarms for τ > 0.
        let s: SharedScore = Arc::new(FnScore::new(
            1,
            |x: &[f64]| vec![-x[0]],
            |_: &[f64]| -1.0,
        ));
        let inc = ScoreIncrement::new(s.clone(), s);
        let stream: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1]).collect();
        let rec = run_offline(stream, &inc, 0.5).unwrap();
        assert!(!rec.alarm_raised);
        assert!(rec.statistic_trace.iter().all(|&(_, s)| s == 0.0));
    }

    #[test]
    fn offline_infinite_thresholds() {
        let (stream, inc) = const_increments(vec![5.0; 10]);
        let rec = run_offline(stream, &inc, f64::INFINITY).unwrap();
        assert!(!rec.alarm_raised);
        let (stream, inc) = const_increments(vec![5.0; 10]);
        let rec = run_offline(stream, &inc, f64::NEG_INFINITY).unwrap();
        assert_eq!(rec.stopping_time, Some(1));
    }

    #[test]
    fn offline_detects_mean_shift_with_analytic_scores() {
        // 50 draws of N(0,1) then N(3,1); s0/s1 analytic.
        let mut rng = crate::rng::rng_from_seed(8);
        let mut stream = Vec::new();
        for t in 0..200 {
            let mean = if t < 50 { 0.0 } else { 3.0 };
            stream.push(vec![mean + rng.sample::<f64, _>(rand_distr::StandardNormal)]);
        }
        let s0: SharedScore = Arc::new(FnScore::new(
            1,
            |x: &[f64]| vec![-x[0]],
            |_: &[f64]| -1.0,
        ));
        let s1: SharedScore = Arc::new(FnScore::new(
            1,
            |x: &[f64]| vec![-(x[0] - 3.0)],
            |_: &[f64]| -1.0,
        ));
        let inc = ScoreIncrement::new(s0, s1);
        let rec = run_offline(stream.clone(), &inc, 10.0).unwrap();
        assert!(rec.alarm_raised);
        let t_alarm = rec.stopping_time.unwrap();
        assert!(t_alarm > 50, "alarmed before the change at t={t_alarm}");

        // Scripted replay: same recursion, straight-line code.
        let mut s = 0.0f64;
        let mut expect = None;
        for (i, x) in stream.iter().enumerate() {
            let h0 = -1.0 + 0.5 * x[0] * x[0];
            let d = x[0] - 3.0;
            let h1 = -1.0 + 0.5 * d * d;
            s = s.max(0.0) + (h0 - h1);
            if s >= 10.0 {
                expect = Some(i + 1);
                break;
            }
        }
        assert_eq!(rec.stopping_time, expect);
    }

    #[test]
    fn resume_resets_after_alarm() {
        let (stream, inc) = const_increments(vec![2.0, 2.0, 2.0, 2.0, 2.0]);
        let recs = run_offline_resume(stream, &inc, 3.0).unwrap();
        assert!(recs.len() >= 2);
        assert_eq!(recs[0].stopping_time, Some(2));
        assert!(recs[0].alarm_raised);
        assert_eq!(recs[1].stopping_time, Some(4));
    }

    fn frozen_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.0,
            rng_seed: seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn online_zero_learning_rate_never_alarms() {
        let model = ScoreModel::random_init(1, 4, 1.0, 3).unwrap();
        let s0: SharedScore = Arc::new(model.clone());
        let stream: Vec<Vec<f64>> = (0..80).map(|i| vec![(i as f64 * 0.37).sin()]).collect();
        let rec = run_online(stream, s0, model, 0.5, 10, frozen_cfg(1), 5).unwrap();
        assert!(!rec.alarm_raised);
        assert!(rec.increments.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn online_short_stream_is_censored_with_zero_statistics() {
        let model = ScoreModel::random_init(1, 4, 1.0, 3).unwrap();
        let s0: SharedScore = Arc::new(model.clone());
        let stream: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let rec = run_online(stream, s0, model, 1.0, 10, frozen_cfg(1), 5).unwrap();
        assert!(!rec.alarm_raised);
        assert!(rec.stopping_time.is_none());
        assert_eq!(rec.steps_consumed, 5);
        assert!(rec.statistic_trace.iter().all(|&(_, s)| s == 0.0));
    }

    #[test]
    fn online_is_deterministic_across_runs() {
        let mut rng = crate::rng::rng_from_seed(77);
        let stream: Vec<Vec<f64>> = (0..160)
            .map(|t| {
                let m = if t < 100 { 0.0 } else { 2.0 };
                vec![
                    m + rng.sample::<f64, _>(rand_distr::StandardNormal),
                    m + rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]
            })
            .collect();
        let model = ScoreModel::random_init(2, 8, 1.0, 5).unwrap();
        let s0: SharedScore = Arc::new(model.clone());
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            rng_seed: 9,
            ..TrainConfig::default()
        };
        let a = run_online(
            stream.clone(),
            s0.clone(),
            model.clone(),
            1e9,
            10,
            cfg.clone(),
            2,
        )
        .unwrap();
        let b = run_online(stream, s0, model, 1e9, 10, cfg, 2).unwrap();
        assert_eq!(a.statistic_trace, b.statistic_trace);
        assert_eq!(a.increments, b.increments);
    }

    #[test]
    fn online_with_frozen_preset_matches_offline_on_suffix() {
        // η = 0 and ŝ1 preset: increments after the warm-up equal the
        // offline increments on the same suffix.
        let mut rng = crate::rng::rng_from_seed(12);
        let stream: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![rng.sample::<f64, _>(rand_distr::StandardNormal)])
            .collect();
        let s0model = ScoreModel::random_init(1, 6, 1.0, 1).unwrap();
        let s1model = ScoreModel::random_init(1, 6, 1.0, 2).unwrap();
        let w = 10;
        let s0: SharedScore = Arc::new(s0model.clone());
        let online = run_online(
            stream.clone(),
            s0.clone(),
            s1model.clone(),
            f64::INFINITY,
            w,
            frozen_cfg(3),
            0,
        )
        .unwrap();
        let inc = ScoreIncrement::new(s0, Arc::new(s1model));
        let offline = run_offline(stream[w..].to_vec(), &inc, f64::INFINITY).unwrap();
        assert_eq!(online.increments.len(), stream.len());
        for (i, &d) in offline.increments.iter().enumerate() {
            assert!(
                (online.increments[w + i] - d).abs() < 1e-12,
                "increment {i}: online {} vs offline {d}",
                online.increments[w + i]
            );
        }
    }
}
