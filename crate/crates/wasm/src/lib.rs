//! Browser bindings for the interactive demo page: the ring mixtures and
//! their score fields, live change-detection runs, and the noise-scale
//! exploration for denoising score training.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use scorewatch::baselines::{fit_gaussian_mle, gaussian_llr};
use scorewatch::calibrate::{calibrate_threshold, CalibrationConfig};
use scorewatch::datagen::{gmm_sampler, ring_specs, sample_gmm};
use scorewatch::detector::{
    run_offline, CusumProcess, FnIncrement, IncrementFn, ScoreIncrement,
};
use scorewatch::rng::{rng_from_seed, split_seed};
use scorewatch::score_net::{train_offline, TrainConfig, TrainInit};
use scorewatch::stats::{GmmSpec, SharedScore};
use std::sync::Arc;

fn to_js<T: Serialize>(value: &T) -> Result<JsValue, JsValue> {
    serde_wasm_bindgen::to_value(value).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn err_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct VectorField {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    /// Row-major (y-major) arrow components for both mixtures.
    pre_u: Vec<f64>,
    pre_v: Vec<f64>,
    post_u: Vec<f64>,
    post_v: Vec<f64>,
}

#[derive(Serialize)]
struct RingScene {
    pre_points: Vec<[f64; 2]>,
    post_points: Vec<[f64; 2]>,
    field: VectorField,
}

/// Samples both ring mixtures and evaluates their analytic score fields
/// on a regular grid.
#[wasm_bindgen]
pub fn ring_scene(seed: u64, n_per_role: usize, grid: usize) -> Result<JsValue, JsValue> {
    let (pre, post) = ring_specs();
    let to_pairs = |rows: Vec<Vec<f64>>| -> Vec<[f64; 2]> {
        rows.into_iter().map(|r| [r[0], r[1]]).collect()
    };
    let pre_points = to_pairs(sample_gmm(&pre, n_per_role, split_seed(seed, 0)));
    let post_points = to_pairs(sample_gmm(&post, n_per_role, split_seed(seed, 1)));

    let (x0, x1, y0, y1) = (-12.0, 12.0, -12.0, 12.0);
    let nx = grid.max(2);
    let ny = grid.max(2);
    let mut field = VectorField {
        x0,
        x1,
        y0,
        y1,
        nx,
        ny,
        pre_u: Vec::with_capacity(nx * ny),
        pre_v: Vec::with_capacity(nx * ny),
        post_u: Vec::with_capacity(nx * ny),
        post_v: Vec::with_capacity(nx * ny),
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let x = x0 + (x1 - x0) * ix as f64 / (nx - 1) as f64;
            let y = y0 + (y1 - y0) * iy as f64 / (ny - 1) as f64;
            let sp = pre.score(&[x, y]).map_err(err_js)?;
            let sq = post.score(&[x, y]).map_err(err_js)?;
            field.pre_u.push(sp[0]);
            field.pre_v.push(sp[1]);
            field.post_u.push(sq[0]);
            field.post_v.push(sq[1]);
        }
    }
    to_js(&RingScene {
        pre_points,
        post_points,
        field,
    })
}

#[derive(Serialize)]
struct MethodTrace {
    name: String,
    tau: f64,
    statistic: Vec<f64>,
    alarm_at: Option<usize>,
}

#[derive(Serialize)]
struct DetectionRun {
    change_point: usize,
    stream: Vec<[f64; 2]>,
    methods: Vec<MethodTrace>,
}

/// Simulates a ring-mixture stream that switches distribution at
/// `change_point`, calibrates each method's threshold for the target
/// average run length, and runs the detectors over the stream.
#[wasm_bindgen]
pub fn detection_run(
    seed: u64,
    change_point: usize,
    total_steps: usize,
    gamma: f64,
) -> Result<JsValue, JsValue> {
    let (pre, post) = ring_specs();
    let change_point = change_point.clamp(1, total_steps.max(2));
    let mut rng = rng_from_seed(split_seed(seed, 7));
    let mut stream = Vec::with_capacity(total_steps);
    for t in 1..=total_steps {
        let spec = if t < change_point { &pre } else { &post };
        let x = spec.sample_one(&mut rng);
        stream.push(x);
    }

    // Exact score CUSUM with analytic mixture scores.
    let exact_inc: Arc<dyn IncrementFn + Send + Sync> = Arc::new(ScoreIncrement::new(
        Arc::new(pre.clone()) as SharedScore,
        Arc::new(post.clone()) as SharedScore,
    ));
    // Gaussian CUSUM fitted on sampled reference data.
    let g0 = fit_gaussian_mle(&sample_gmm(&pre, 500, split_seed(seed, 8))).map_err(err_js)?;
    let g1 = fit_gaussian_mle(&sample_gmm(&post, 500, split_seed(seed, 9))).map_err(err_js)?;
    let gauss_inc: Arc<dyn IncrementFn + Send + Sync> = Arc::new(FnIncrement::new(
        2,
        move |x: &[f64]| gaussian_llr(&g0, &g1, x),
    ));

    let calib = CalibrationConfig {
        target_arl: gamma.max(50.0),
        iterations: 80,
        horizon: 400,
        rng_seed: split_seed(seed, 10),
    };
    let pre_sampler = gmm_sampler(&pre);
    let mut methods = Vec::new();
    for (name, inc) in [
        ("exact score CUSUM", exact_inc),
        ("Gaussian CUSUM", gauss_inc),
    ] {
        let cal = calibrate_threshold(
            |_| Ok(CusumProcess::new(inc.clone())),
            &pre_sampler,
            &calib,
        )
        .map_err(err_js)?;
        let record = run_offline(stream.clone(), &inc, f64::INFINITY).map_err(err_js)?;
        let statistic: Vec<f64> = record.statistic_trace.iter().map(|&(_, s)| s).collect();
        let alarm_at = statistic.iter().position(|&s| s >= cal.threshold).map(|i| i + 1);
        methods.push(MethodTrace {
            name: name.to_string(),
            tau: cal.threshold,
            statistic,
            alarm_at,
        });
    }
    to_js(&DetectionRun {
        change_point,
        stream: stream.into_iter().map(|r| [r[0], r[1]]).collect(),
        methods,
    })
}

#[derive(Serialize)]
struct ScoreFit {
    xs: Vec<f64>,
    learned: Vec<f64>,
    perturbed_true: Vec<f64>,
    true_score: Vec<f64>,
    density: Vec<f64>,
    final_loss: f64,
}

/// Trains a denoising score model on the two-component 1-D mixture at
/// the requested noise scale and returns the learned score next to the
/// analytic perturbed and unperturbed scores.
#[wasm_bindgen]
pub fn score_fit_1d(
    sigma: f64,
    epochs: usize,
    hidden: usize,
    n_train: usize,
    seed: u64,
) -> Result<JsValue, JsValue> {
    if !(sigma > 0.0) {
        return Err(JsValue::from_str("sigma must be positive"));
    }
    let target = GmmSpec::isotropic(&[vec![-2.0], vec![2.0]], 1.0).map_err(err_js)?;
    let data = sample_gmm(&target, n_train.clamp(10, 5000), split_seed(seed, 0));
    let cfg = TrainConfig {
        epochs: epochs.clamp(1, 4000),
        learning_rate: 1e-2,
        noise_draws: 1,
        sigma,
        rng_seed: split_seed(seed, 1),
        ..TrainConfig::default()
    };
    let report = train_offline(
        &data,
        &cfg,
        TrainInit::Fresh {
            hidden_dim: hidden.clamp(2, 512),
            standardize: false,
        },
    )
    .map_err(err_js)?;
    let perturbed = target.perturb(sigma).map_err(err_js)?;
    let n_grid = 161;
    let (lo, hi) = (-5.0, 5.0);
    let mut out = ScoreFit {
        xs: Vec::with_capacity(n_grid),
        learned: Vec::with_capacity(n_grid),
        perturbed_true: Vec::with_capacity(n_grid),
        true_score: Vec::with_capacity(n_grid),
        density: Vec::with_capacity(n_grid),
        final_loss: report.loss_trace.last().copied().unwrap_or(f64::NAN),
    };
    for i in 0..n_grid {
        let x = lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
        out.xs.push(x);
        out.learned
            .push(report.model.forward(&[x]).map_err(err_js)?[0]);
        out.perturbed_true
            .push(perturbed.score(&[x]).map_err(err_js)?[0]);
        out.true_score.push(target.score(&[x]).map_err(err_js)?[0]);
        out.density
            .push(target.logpdf(&[x]).map_err(err_js)?.exp());
    }
    to_js(&out)
}
