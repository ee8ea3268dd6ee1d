//! Detection method selection: parsing method names and assembling the
//! increment function or statistic process each method needs.

use std::str::FromStr;
use std::sync::Arc;

use scorewatch::baselines::{
    em_fit_gmm, fit_gaussian_mle, gaussian_llr, exact_cusum_llr, GaussianParams,
    HotellingProcess,
};
use scorewatch::detector::{
    CusumProcess, FnIncrement, IncrementFn, OnlineScoreProcess, ScoreIncrement,
    StatisticProcess,
};
use scorewatch::error::{Error, Result};
use scorewatch::rng::split_seed;
use scorewatch::score_net::{ScoreModel, TrainConfig};
use scorewatch::stats::{GmmSpec, SharedScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    /// Hyvärinen-score CUSUM with two offline-trained score models.
    DsmCusum,
    /// Same statistic with models trained by implicit score matching.
    SmScusum,
    /// Pre-change model frozen, post-change model adapted on a sliding
    /// window.
    DsmCusumOnline,
    /// Likelihood-ratio CUSUM with fitted Gaussians.
    GaussianCusum,
    /// Likelihood-ratio CUSUM with EM-fitted mixtures of n components.
    GmmCusum(usize),
    /// Likelihood-ratio CUSUM with ground-truth mixtures.
    ExactCusum,
    /// Hyvärinen-score CUSUM with ground-truth mixture scores.
    ExactScusum,
    /// Per-observation Hotelling T² monitor (no accumulation).
    Hotelling,
}

impl MethodSpec {
    pub fn name(&self) -> String {
        match self {
            MethodSpec::DsmCusum => "dsm-cusum".into(),
            MethodSpec::SmScusum => "sm-scusum".into(),
            MethodSpec::DsmCusumOnline => "dsm-cusum-online".into(),
            MethodSpec::GaussianCusum => "gaussian-cusum".into(),
            MethodSpec::GmmCusum(n) => format!("gmm{n}-cusum"),
            MethodSpec::ExactCusum => "exact-cusum".into(),
            MethodSpec::ExactScusum => "exact-scusum".into(),
            MethodSpec::Hotelling => "hotelling".into(),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dsm-cusum" => Ok(MethodSpec::DsmCusum),
            "sm-scusum" => Ok(MethodSpec::SmScusum),
            "dsm-cusum-online" => Ok(MethodSpec::DsmCusumOnline),
            "gaussian-cusum" => Ok(MethodSpec::GaussianCusum),
            "exact-cusum" => Ok(MethodSpec::ExactCusum),
            "exact-scusum" => Ok(MethodSpec::ExactScusum),
            "hotelling" => Ok(MethodSpec::Hotelling),
            other => {
                if let Some(rest) = other.strip_prefix("gmm") {
                    if let Some(num) = rest.strip_suffix("-cusum") {
                        if let Ok(n) = num.parse::<usize>() {
                            if n >= 1 {
                                return Ok(MethodSpec::GmmCusum(n));
                            }
                        }
                    }
                }
                Err(Error::invalid(format!(
                    "unknown method '{other}' (expected dsm-cusum, sm-scusum, \
                     dsm-cusum-online, gaussian-cusum, gmm<n>-cusum, exact-cusum, \
                     exact-scusum, or hotelling)"
                )))
            }
        }
    }
}

/// Sliding-window parameters for the online method.
#[derive(Debug, Clone)]
pub struct OnlineParams {
    pub window: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub noise_draws: usize,
    pub rng_seed: u64,
}

impl Default for OnlineParams {
    fn default() -> Self {
        Self {
            window: 10,
            steps: 5,
            learning_rate: 1e-4,
            noise_draws: 1,
            rng_seed: 0,
        }
    }
}

/// Everything a method might need, loaded/fitted by the caller.
#[derive(Default)]
pub struct MethodInputs {
    pub model0: Option<ScoreModel>,
    pub model1: Option<ScoreModel>,
    pub ref0: Option<Vec<Vec<f64>>>,
    pub ref1: Option<Vec<Vec<f64>>>,
    pub gmm0: Option<GmmSpec>,
    pub gmm1: Option<GmmSpec>,
    pub em_iters: usize,
    /// Assumed per-dimension mean shift for gaussian-cusum when no
    /// post-change reference is available: μ1 = μ0 + δ·1/√d, Σ1 = Σ0.
    pub assume_shift: Option<f64>,
    pub online: OnlineParams,
}

/// A method assembled into its runnable pieces.
pub enum BuiltMethod {
    Cusum(Arc<dyn IncrementFn + Send + Sync>),
    Online {
        s0: SharedScore,
        init: ScoreModel,
        window: usize,
        steps: usize,
        cfg: TrainConfig,
    },
    Hotelling(GaussianParams),
}

impl BuiltMethod {
    /// Fresh statistic process for Monte-Carlo iteration `i`. The online
    /// method derives a per-iteration noise substream; everything else is
    /// stateless apart from the CUSUM recursion.
    pub fn process(&self, iteration: u64) -> Result<Box<dyn StatisticProcess>> {
        match self {
            BuiltMethod::Cusum(inc) => Ok(Box::new(CusumProcess::new(inc.clone()))),
            BuiltMethod::Online {
                s0,
                init,
                window,
                steps,
                cfg,
            } => {
                let mut cfg = cfg.clone();
                cfg.rng_seed = split_seed(cfg.rng_seed, 0x4000_0000 + iteration);
                Ok(Box::new(OnlineScoreProcess::new(
                    s0.clone(),
                    init.clone(),
                    *window,
                    cfg,
                    *steps,
                )?))
            }
            BuiltMethod::Hotelling(params) => {
                Ok(Box::new(HotellingProcess::new(params.clone())))
            }
        }
    }

}

fn require<T>(value: Option<T>, what: &str, method: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(format!("method {method} requires {what}")))
}

/// Assembles a method from its inputs, fitting reference-based baselines
/// on the spot.
pub fn build_method(spec: MethodSpec, inputs: MethodInputs) -> Result<BuiltMethod> {
    let name = spec.name();
    match spec {
        MethodSpec::DsmCusum | MethodSpec::SmScusum => {
            let m0 = require(inputs.model0, "a pre-change model (--model0)", &name)?;
            let m1 = require(inputs.model1, "a post-change model (--model1)", &name)?;
            let inc = ScoreIncrement::new(Arc::new(m0), Arc::new(m1));
            Ok(BuiltMethod::Cusum(Arc::new(inc)))
        }
        MethodSpec::DsmCusumOnline => {
            let m0 = require(inputs.model0, "a pre-change model (--model0)", &name)?;
            let online = inputs.online;
            let cfg = TrainConfig {
                epochs: 1,
                learning_rate: online.learning_rate,
                noise_draws: online.noise_draws,
                sigma: m0.sigma(),
                rng_seed: online.rng_seed,
                ..TrainConfig::default()
            };
            Ok(BuiltMethod::Online {
                s0: Arc::new(m0.clone()),
                init: m0,
                window: online.window,
                steps: online.steps,
                cfg,
            })
        }
        MethodSpec::GaussianCusum => {
            let ref0 = require(inputs.ref0, "pre-change reference data (--ref0)", &name)?;
            let p0 = fit_gaussian_mle(&ref0)?;
            let p1 = match (inputs.ref1, inputs.assume_shift) {
                (Some(ref1), None) => fit_gaussian_mle(&ref1)?,
                (None, Some(delta)) => {
                    let d = p0.dim();
                    let unit = 1.0 / (d as f64).sqrt();
                    let mean: Vec<f64> =
                        p0.mean().iter().map(|m| m + delta * unit).collect();
                    GaussianParams::new(mean, p0.cov().clone())?
                }
                (Some(_), Some(_)) => {
                    return Err(Error::invalid(
                        "give either --ref1 or --assume-shift, not both",
                    ))
                }
                (None, None) => {
                    return Err(Error::invalid(format!(
                        "method {name} requires post-change reference data (--ref1) \
                         or an assumed mean-shift (--assume-shift)"
                    )))
                }
            };
            let dim = p0.dim();
            let inc =
                FnIncrement::new(dim, move |x: &[f64]| gaussian_llr(&p0, &p1, x));
            Ok(BuiltMethod::Cusum(Arc::new(inc)))
        }
        MethodSpec::GmmCusum(k) => {
            let ref0 = require(inputs.ref0, "pre-change reference data (--ref0)", &name)?;
            let ref1 = require(inputs.ref1, "post-change reference data (--ref1)", &name)?;
            let iters = if inputs.em_iters == 0 { 200 } else { inputs.em_iters };
            let g0 = em_fit_gmm(&ref0, k, iters, 0xe0)?;
            let g1 = em_fit_gmm(&ref1, k, iters, 0xe1)?;
            let dim = g0.dim();
            let inc =
                FnIncrement::new(dim, move |x: &[f64]| exact_cusum_llr(&g0, &g1, x));
            Ok(BuiltMethod::Cusum(Arc::new(inc)))
        }
        MethodSpec::ExactCusum => {
            let g0 = require(inputs.gmm0, "a pre-change mixture file (--gmm0)", &name)?;
            let g1 = require(inputs.gmm1, "a post-change mixture file (--gmm1)", &name)?;
            let dim = g0.dim();
            let inc =
                FnIncrement::new(dim, move |x: &[f64]| exact_cusum_llr(&g0, &g1, x));
            Ok(BuiltMethod::Cusum(Arc::new(inc)))
        }
        MethodSpec::ExactScusum => {
            let g0 = require(inputs.gmm0, "a pre-change mixture file (--gmm0)", &name)?;
            let g1 = require(inputs.gmm1, "a post-change mixture file (--gmm1)", &name)?;
            let inc = ScoreIncrement::new(Arc::new(g0), Arc::new(g1));
            Ok(BuiltMethod::Cusum(Arc::new(inc)))
        }
        MethodSpec::Hotelling => {
            let ref0 = require(inputs.ref0, "pre-change reference data (--ref0)", &name)?;
            Ok(BuiltMethod::Hotelling(fit_gaussian_mle(&ref0)?))
        }
    }
}
