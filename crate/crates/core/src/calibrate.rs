//! Threshold calibration and run-length / detection-delay estimation.
//!
//! Calibration uses the exponential approximation of the pre-change
//! stopping time: simulate `N1` pre-change trajectories of length `N2`,
//! record each trajectory's running maximum, and take the empirical
//! `exp(−N2/γ)` quantile of the maxima as the threshold for target
//! average run length γ. Estimators report standard errors and never
//! drop censored runs silently.

use serde::{Deserialize, Serialize};

use crate::detector::StatisticProcess;
use crate::error::{Error, Result};
use crate::rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Target average run length γ.
    pub target_arl: f64,
    /// Number of simulated trajectories N1.
    pub iterations: usize,
    /// Steps per trajectory N2.
    pub horizon: usize,
    pub rng_seed: u64,
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_arl > 0.0) || !self.target_arl.is_finite() {
            return Err(Error::invalid("target ARL must be positive and finite"));
        }
        if self.iterations == 0 || self.horizon == 0 {
            return Err(Error::invalid("iterations and horizon must be ≥ 1"));
        }
        let level = self.quantile_level();
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(format!(
                "quantile level exp(−N2/γ) = {level} is outside (0, 1); \
                 the horizon is too long for the target ARL"
            )));
        }
        Ok(())
    }

    /// `exp(−N2/γ)`.
    pub fn quantile_level(&self) -> f64 {
        (-(self.horizon as f64) / self.target_arl).exp()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    /// Per-trajectory maxima the threshold was derived from.
    pub maxima: Vec<f64>,
    pub quantile_level: f64,
    pub config: CalibrationConfig,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n−1)p`; interpolate between `s[⌊h⌋]` and `s[⌊h⌋+1]`).
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Simulates `iterations` pre-change trajectories of `horizon` steps and
/// returns each trajectory's running maximum of the statistic.
///
/// `factory(i)` must produce a fresh process for iteration `i`; the
/// sampler receives iteration substream `i` of `seed`.
pub fn simulate_maxima<P, FP, FS>(
    factory: FP,
    sampler: FS,
    iterations: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    P: StatisticProcess,
    FP: Fn(u64) -> Result<P>,
    FS: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    let mut maxima = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let mut rng = rng::substream(seed, i as u64);
        let mut proc = factory(i as u64)?;
        let mut wmax = f64::NEG_INFINITY;
        for _ in 0..horizon {
            let x = sampler(&mut rng);
            let s = proc.update(&x)?;
            if s > wmax {
                wmax = s;
            }
        }
        maxima.push(wmax);
    }
    Ok(maxima)
}

/// Calibrates a threshold for the target ARL from simulated pre-change
/// maxima.
pub fn calibrate_threshold<P, FP, FS>(
    factory: FP,
    sampler: FS,
    config: &CalibrationConfig,
) -> Result<CalibrationResult>
where
    P: StatisticProcess,
    FP: Fn(u64) -> Result<P>,
    FS: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    config.validate()?;
    let maxima = simulate_maxima(
        factory,
        sampler,
        config.iterations,
        config.horizon,
        config.rng_seed,
    )?;
    let mut sorted = maxima.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let level = config.quantile_level();
    Ok(CalibrationResult {
        threshold: quantile_linear(&sorted, level),
        maxima,
        quantile_level: level,
        config: config.clone(),
    })
}

/// Mean stopping time or detection delay with its standard error.
/// Censored runs contribute their capped value, so a flagged estimate is
/// a lower bound on the true mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
    pub censored: usize,
    pub per_run: Vec<f64>,
    pub lower_bound: bool,
}

impl DelayEstimate {
    fn from_values(values: Vec<f64>, censored: usize) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        DelayEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            runs: n,
            censored,
            per_run: values,
            lower_bound: censored > 0,
        }
    }
}

/// Monte-Carlo average run length: mean stopping time under pure
/// pre-change data, runs capped at `cap`.
pub fn estimate_arl<P, FP, FS>(
    factory: FP,
    sampler: FS,
    tau: f64,
    runs: usize,
    cap: usize,
    seed: u64,
) -> Result<DelayEstimate>
where
    P: StatisticProcess,
    FP: Fn(u64) -> Result<P>,
    FS: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    if runs == 0 || cap == 0 {
        return Err(Error::invalid("runs and cap must be ≥ 1"));
    }
    let mut values = Vec::with_capacity(runs);
    let mut censored = 0;
    for r in 0..runs {
        let mut rng = rng::substream(seed, r as u64);
        let mut proc = factory(r as u64)?;
        let mut stopped = None;
        for t in 1..=cap {
            let x = sampler(&mut rng);
            let s = proc.update(&x)?;
            if s >= tau {
                stopped = Some(t);
                break;
            }
        }
        match stopped {
            Some(t) => values.push(t as f64),
            None => {
                censored += 1;
                values.push(cap as f64);
            }
        }
    }
    Ok(DelayEstimate::from_values(values, censored))
}

/// Monte-Carlo detection delay `(T − ν + 1)⁺` for a stream that switches
/// from the pre-change sampler to the post-change sampler at time ν.
#[allow(clippy::too_many_arguments)]
pub fn estimate_wadd<P, FP, FPre, FPost>(
    factory: FP,
    pre_sampler: FPre,
    post_sampler: FPost,
    tau: f64,
    change_point: usize,
    runs: usize,
    cap: usize,
    seed: u64,
) -> Result<DelayEstimate>
where
    P: StatisticProcess,
    FP: Fn(u64) -> Result<P>,
    FPre: Fn(&mut ChaCha8Rng) -> Vec<f64>,
    FPost: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    if change_point == 0 {
        return Err(Error::invalid("change point ν must be ≥ 1"));
    }
    if runs == 0 || cap < change_point {
        return Err(Error::invalid("need runs ≥ 1 and cap ≥ ν"));
    }
    let mut values = Vec::with_capacity(runs);
    let mut censored = 0;
    for r in 0..runs {
        let mut rng = rng::substream(seed, r as u64);
        let mut proc = factory(r as u64)?;
        let mut stopped = None;
        for t in 1..=cap {
            let x = if t < change_point {
                pre_sampler(&mut rng)
            } else {
                post_sampler(&mut rng)
            };
            let s = proc.update(&x)?;
            if s >= tau {
                stopped = Some(t);
                break;
            }
        }
        let t = match stopped {
            Some(t) => t,
            None => {
                censored += 1;
                cap
            }
        };
        values.push((t as f64 - change_point as f64 + 1.0).max(0.0));
    }
    Ok(DelayEstimate::from_values(values, censored))
}

/// Evaluation knobs for tradeoff tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub calib_iterations: usize,
    pub calib_horizon: usize,
    pub arl_runs: usize,
    /// ARL runs are capped at `arl_cap_factor · γ`.
    pub arl_cap_factor: f64,
    pub wadd_runs: usize,
    pub wadd_cap: usize,
    pub rng_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            calib_iterations: 200,
            calib_horizon: 1000,
            arl_runs: 100,
            arl_cap_factor: 4.0,
            wadd_runs: 200,
            wadd_cap: 4000,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub gamma: f64,
    pub tau: f64,
    pub arl: DelayEstimate,
    pub wadd: DelayEstimate,
}

/// Delay-vs-run-length tradeoff table over an ascending γ grid.
///
/// The pre-change maxima are simulated once and re-used for every γ, so
/// thresholds are monotone in γ by construction; ARL and the ν=1 delay
/// are then estimated per row.
pub fn tradeoff_curve<P, FP, FPre, FPost>(
    factory: FP,
    pre_sampler: FPre,
    post_sampler: FPost,
    gammas: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<TradeoffRow>>
where
    P: StatisticProcess,
    FP: Fn(u64) -> Result<P>,
    FPre: Fn(&mut ChaCha8Rng) -> Vec<f64>,
    FPost: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    if gammas.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    if gammas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("gamma grid must be strictly ascending"));
    }
    let mut maxima = simulate_maxima(
        &factory,
        &pre_sampler,
        cfg.calib_iterations,
        cfg.calib_horizon,
        rng::split_seed(cfg.rng_seed, 1),
    )?;
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::with_capacity(gammas.len());
    for (gi, &gamma) in gammas.iter().enumerate() {
        let calib = CalibrationConfig {
            target_arl: gamma,
            iterations: cfg.calib_iterations,
            horizon: cfg.calib_horizon,
            rng_seed: cfg.rng_seed,
        };
        calib.validate()?;
        let tau = quantile_linear(&maxima, calib.quantile_level());
        let arl = estimate_arl(
            &factory,
            &pre_sampler,
            tau,
            cfg.arl_runs,
            (cfg.arl_cap_factor * gamma).ceil() as usize,
            rng::split_seed(cfg.rng_seed, 100 + gi as u64),
        )?;
        let wadd = estimate_wadd(
            &factory,
            &pre_sampler,
            &post_sampler,
            tau,
            1,
            cfg.wadd_runs,
            cfg.wadd_cap,
            rng::split_seed(cfg.rng_seed, 200 + gi as u64),
        )?;
        rows.push(TradeoffRow {
            gamma,
            tau,
            arl,
            wadd,
        });
    }
    Ok(rows)
}

/// One row of the noise-scale error table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaRow {
    pub sigma: f64,
    /// Mean ‖ŝ(x) − ∇log p_σ(x)‖ under x∼p.
    pub est_error: f64,
    pub est_se: f64,
    /// Mean ‖∇log p_σ(x) − ∇log p(x)‖ under x∼p.
    pub pert_error: f64,
    pub pert_se: f64,
    /// Simple sum of the two (combined proxy, up to constant factors).
    pub combined: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaTradeoffConfig {
    pub n_train: usize,
    pub n_mc: usize,
    pub hidden_dim: usize,
    pub rng_seed: u64,
}

impl Default for SigmaTradeoffConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_mc: 4000,
            hidden_dim: 64,
            rng_seed: 0,
        }
    }
}

/// Trains a denoising score model per σ on samples from an analytic
/// target and decomposes the error into estimation error (model vs the
/// σ-perturbed score) and perturbation error (perturbed vs true score).
///
/// Training data and evaluation draws are shared across the σ grid so
/// differences along the grid isolate the effect of σ.
pub fn sigma_tradeoff(
    target: &crate::stats::GmmSpec,
    sigmas: &[f64],
    train_cfg: &crate::score_net::TrainConfig,
    cfg: &SigmaTradeoffConfig,
) -> Result<Vec<SigmaRow>> {
    use crate::datagen::sample_gmm;
    use crate::score_net::{train_offline, TrainInit};
    use crate::stats::ScoreFn;

    if sigmas.is_empty() {
        return Err(Error::invalid("sigma grid is empty"));
    }
    let train_data = sample_gmm(target, cfg.n_train, rng::split_seed(cfg.rng_seed, 1));
    let eval_points = sample_gmm(target, cfg.n_mc, rng::split_seed(cfg.rng_seed, 2));
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut tc = train_cfg.clone();
        tc.sigma = sigma;
        // Common random numbers across the grid: every σ trains from the
        // same initialization on the same underlying noise draws (scaled
        // by σ), so differences along the grid isolate the effect of σ.
        tc.rng_seed = rng::split_seed(cfg.rng_seed, 100);
        let report = train_offline(
            &train_data,
            &tc,
            TrainInit::Fresh {
                hidden_dim: cfg.hidden_dim,
                standardize: false,
            },
        )?;
        let perturbed = target.perturb(sigma)?;
        let mut est = Vec::with_capacity(eval_points.len());
        let mut pert = Vec::with_capacity(eval_points.len());
        for x in &eval_points {
            let s_hat = report.model.score(x)?;
            let s_sigma = perturbed.score(x)?;
            let s_true = target.score(x)?;
            est.push(l2_dist(&s_hat, &s_sigma));
            pert.push(l2_dist(&s_sigma, &s_true));
        }
        let (est_mean, est_se) = mean_se(&est);
        let (pert_mean, pert_se) = mean_se(&pert);
        rows.push(SigmaRow {
            sigma,
            est_error: est_mean,
            est_se,
            pert_error: pert_mean,
            pert_se,
            combined: est_mean + pert_mean,
        });
    }
    Ok(rows)
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{CusumProcess, FnIncrement};

    fn zero_process(_: u64) -> Result<CusumProcess<FnIncrement<fn(&[f64]) -> Result<f64>>>> {
        fn zero(_: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        Ok(CusumProcess::new(FnIncrement::new(1, zero as _)))
    }

    fn normal_sampler(rng: &mut ChaCha8Rng) -> Vec<f64> {
        use rand::Rng;
        vec![rng.sample::<f64, _>(rand_distr::StandardNormal)]
    }

    #[test]
    fn quantile_level_formula() {
        let cfg = CalibrationConfig {
            target_arl: 10_000.0,
            iterations: 1,
            horizon: 1000,
            rng_seed: 0,
        };
        assert!((cfg.quantile_level() - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn level_underflow_is_input_error() {
        let cfg = CalibrationConfig {
            target_arl: 1.0,
            iterations: 1,
            horizon: 1000,
            rng_seed: 0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn degenerate_statistic_calibrates_to_zero() {
        let cfg = CalibrationConfig {
            target_arl: 500.0,
            iterations: 25,
            horizon: 50,
            rng_seed: 3,
        };
        let res = calibrate_threshold(zero_process, normal_sampler, &cfg).unwrap();
        assert_eq!(res.threshold, 0.0);
        assert!(res.maxima.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn quantile_linear_interpolates() {
        let sorted = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_linear(&sorted, 0.0), 1.0);
        assert_eq!(quantile_linear(&sorted, 1.0), 5.0);
        assert_eq!(quantile_linear(&sorted, 0.5), 3.0);
        assert!((quantile_linear(&sorted, 0.625) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_monotone_in_level() {
        let mut maxima: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=20 {
            let q = quantile_linear(&maxima, i as f64 / 20.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn arl_with_negative_threshold_is_one() {
        let est = estimate_arl(zero_process, normal_sampler, -1.0, 20, 100, 5).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.censored, 0);
        assert!(!est.lower_bound);
    }

    #[test]
    fn arl_all_censored_is_flagged_lower_bound() {
        let est = estimate_arl(zero_process, normal_sampler, 1.0, 10, 50, 5).unwrap();
        assert_eq!(est.censored, 10);
        assert!(est.lower_bound);
        assert_eq!(est.mean, 50.0);
    }

    #[test]
    fn wadd_with_negative_threshold_is_one() {
        let est = estimate_wadd(
            zero_process,
            normal_sampler,
            normal_sampler,
            -1.0,
            1,
            20,
            100,
            5,
        )
        .unwrap();
        assert_eq!(est.mean, 1.0);
    }

    #[test]
    fn wadd_null_change_matches_arl_distribution() {
        // Identical pre/post samplers: stopping times have the same law,
        // so the ν=1 delay (T − 1 + 1) equals the ARL stopping time on the
        // same substreams exactly.
        fn drift(_: u64) -> Result<CusumProcess<FnIncrement<fn(&[f64]) -> Result<f64>>>> {
            fn inc(x: &[f64]) -> Result<f64> {
                Ok(x[0] * 0.5)
            }
            Ok(CusumProcess::new(FnIncrement::new(1, inc as _)))
        }
        let arl = estimate_arl(drift, normal_sampler, 3.0, 30, 2000, 9).unwrap();
        let wadd = estimate_wadd(
            drift,
            normal_sampler,
            normal_sampler,
            3.0,
            1,
            30,
            2000,
            9,
        )
        .unwrap();
        assert_eq!(arl.per_run, wadd.per_run);
    }

    #[test]
    fn gaussian_mean_shift_delay_matches_replay() {
        // 1-D N(0,1) → N(1,1) with analytic-score increments, τ = 20:
        // compare against an independent straight-line simulation.
        fn factory(_: u64) -> Result<CusumProcess<FnIncrement<fn(&[f64]) -> Result<f64>>>> {
            fn inc(x: &[f64]) -> Result<f64> {
                // H0 − H1 for N(0,1) vs N(1,1).
                let h0 = -1.0 + 0.5 * x[0] * x[0];
                let d = x[0] - 1.0;
                let h1 = -1.0 + 0.5 * d * d;
                Ok(h0 - h1)
            }
            Ok(CusumProcess::new(FnIncrement::new(1, inc as _)))
        }
        fn post(rng: &mut ChaCha8Rng) -> Vec<f64> {
            use rand::Rng;
            vec![1.0 + rng.sample::<f64, _>(rand_distr::StandardNormal)]
        }
        let est = estimate_wadd(factory, normal_sampler, post, 20.0, 1, 50, 5000, 21).unwrap();

        // Straight-line replay with the same substream rule.
        let mut delays = Vec::new();
        for r in 0..50u64 {
            let mut rng = rng::substream(21, r);
            let mut s = 0.0f64;
            let mut t = 0usize;
            loop {
                use rand::Rng;
                t += 1;
                let x = 1.0 + rng.sample::<f64, _>(rand_distr::StandardNormal);
                let h0 = -1.0 + 0.5 * x * x;
                let h1 = -1.0 + 0.5 * (x - 1.0) * (x - 1.0);
                s = s.max(0.0) + (h0 - h1);
                if s >= 20.0 || t == 5000 {
                    break;
                }
            }
            delays.push(t as f64);
        }
        let replay_mean = delays.iter().sum::<f64>() / delays.len() as f64;
        assert!((est.mean - replay_mean).abs() < 1e-12);
    }

    #[test]
    fn tradeoff_grid_must_ascend() {
        let cfg = EvalConfig {
            calib_iterations: 5,
            calib_horizon: 20,
            arl_runs: 2,
            wadd_runs: 2,
            wadd_cap: 50,
            ..EvalConfig::default()
        };
        let err = tradeoff_curve(
            zero_process,
            normal_sampler,
            normal_sampler,
            &[100.0, 50.0],
            &cfg,
        );
        assert!(err.is_err());
    }

    #[test]
    fn tradeoff_thresholds_monotone_and_single_point_matches_composition() {
        fn drift(_: u64) -> Result<CusumProcess<FnIncrement<fn(&[f64]) -> Result<f64>>>> {
            fn inc(x: &[f64]) -> Result<f64> {
                Ok(x[0])
            }
            Ok(CusumProcess::new(FnIncrement::new(1, inc as _)))
        }
        let cfg = EvalConfig {
            calib_iterations: 30,
            calib_horizon: 100,
            arl_runs: 5,
            arl_cap_factor: 2.0,
            wadd_runs: 5,
            wadd_cap: 200,
            rng_seed: 13,
        };
        let rows = tradeoff_curve(
            drift,
            normal_sampler,
            normal_sampler,
            &[200.0, 400.0, 800.0],
            &cfg,
        )
        .unwrap();
        assert!(rows[0].tau <= rows[1].tau && rows[1].tau <= rows[2].tau);

        // A single-point grid reproduces the calibrate + estimate
        // composition exactly (same substreams).
        let single = tradeoff_curve(drift, normal_sampler, normal_sampler, &[400.0], &cfg)
            .unwrap();
        let maxima = simulate_maxima(drift, normal_sampler, 30, 100, rng::split_seed(13, 1))
            .unwrap();
        let mut sorted = maxima;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let level = (-(100.0f64) / 400.0).exp();
        let tau = quantile_linear(&sorted, level);
        assert_eq!(single[0].tau, tau);
        let arl = estimate_arl(
            drift,
            normal_sampler,
            tau,
            5,
            800,
            rng::split_seed(13, 100),
        )
        .unwrap();
        assert_eq!(single[0].arl.per_run, arl.per_run);
    }
}
