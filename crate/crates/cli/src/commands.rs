//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use scorewatch::baselines::sm_ablation_train;
use scorewatch::calibrate::{
    calibrate_threshold, sigma_tradeoff, tradeoff_curve, CalibrationConfig, EvalConfig,
    SigmaTradeoffConfig, TradeoffRow,
};
use scorewatch::datagen::{
    bootstrap_sampler, gen_nn_dataset, gmm_sampler, ring_specs, sample_gmm, transform_sampler,
    NnDatasetConfig, TransformNet,
};
use scorewatch::detector::{run_offline, run_offline_resume, run_online, RunRecord,
    StatisticProcess};
use scorewatch::error::{Error, Result};
use scorewatch::io::{
    load_calibration, load_gmm, load_model, read_stream_csv, save_calibration, save_gmm,
    save_model, save_run_record, write_stream_csv, write_text_table, StreamData,
};
use scorewatch::rng::{split_seed, ChaCha8Rng};
use scorewatch::score_net::{train_offline, ScoreModel, TrainInit};
use scorewatch::stats::GmmSpec;

use crate::config::{
    load_experiment, parse_optimizer, provenance_lines, ExperimentConfig, TrainSection,
};
use crate::methods::{build_method, BuiltMethod, MethodInputs, MethodSpec, OnlineParams};
use crate::MethodArgs;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.display().to_string(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// datagen
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct DatagenArgs {
    /// Generator: "ring" (2-D mixtures) or "nn" (10-D transformed).
    #[arg(long)]
    generator: String,
    /// Rows per role.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out_dir: PathBuf,
    /// Latent dimension (nn generator).
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,
    /// Output dimension (nn generator).
    #[arg(long, default_value_t = 10)]
    output_dim: usize,
    /// Transform hidden width (nn generator).
    #[arg(long, default_value_t = 32)]
    nn_hidden: usize,
    /// Moment-matching gradient steps (nn generator).
    #[arg(long, default_value_t = 500)]
    match_steps: usize,
    /// Moment-matching learning rate (nn generator).
    #[arg(long, default_value_t = 1e-4)]
    match_lr: f64,
}

pub fn cmd_datagen(args: DatagenArgs) -> Result<()> {
    ensure_dir(&args.out_dir)?;
    let provenance = provenance_lines("datagen", &args);
    match args.generator.as_str() {
        "ring" => {
            let (pre, post) = ring_specs();
            let pre_rows = sample_gmm(&pre, args.n, split_seed(args.seed, 0));
            let post_rows = sample_gmm(&post, args.n, split_seed(args.seed, 1));
            write_stream_csv(
                args.out_dir.join("pre.csv"),
                &StreamData::from_rows_with_dim(pre_rows, 2),
                &provenance,
            )?;
            write_stream_csv(
                args.out_dir.join("post.csv"),
                &StreamData::from_rows_with_dim(post_rows, 2),
                &provenance,
            )?;
            save_gmm(args.out_dir.join("ring_pre.toml"), &pre)?;
            save_gmm(args.out_dir.join("ring_post.toml"), &post)?;
            println!(
                "wrote pre.csv, post.csv, ring_pre.toml, ring_post.toml to {}",
                args.out_dir.display()
            );
        }
        "nn" => {
            let cfg = NnDatasetConfig {
                latent_dim: args.latent_dim,
                output_dim: args.output_dim,
                hidden_dim: args.nn_hidden,
                n_samples: args.n.max(2),
                match_steps: args.match_steps,
                match_lr: args.match_lr,
                seed_net_pre: split_seed(args.seed, 10),
                seed_net_post: split_seed(args.seed, 11),
                seed_latent_pre: split_seed(args.seed, 12),
                seed_latent_post: split_seed(args.seed, 13),
            };
            let ds = gen_nn_dataset(&cfg)?;
            let d = args.output_dim;
            let take = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                rows.into_iter().take(args.n).collect()
            };
            write_stream_csv(
                args.out_dir.join("pre.csv"),
                &StreamData::from_rows_with_dim(take(ds.pre_data), d),
                &provenance,
            )?;
            write_stream_csv(
                args.out_dir.join("post.csv"),
                &StreamData::from_rows_with_dim(take(ds.post_data), d),
                &provenance,
            )?;
            scorewatch::io::save_generator(
                args.out_dir.join("generator.toml"),
                &ds.description,
            )?;
            println!(
                "wrote pre.csv, post.csv, generator.toml to {} (moment gap {} -> {})",
                args.out_dir.display(),
                ds.description.initial_gap,
                ds.description.final_gap
            );
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown generator '{other}' (expected ring or nn)"
            )))
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    /// Reference data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    /// Training objective: "dsm" (denoising) or "implicit-sm" (ablation).
    #[arg(long, default_value = "dsm")]
    objective: String,
    #[arg(long, default_value_t = 2048)]
    hidden: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// Noise draws per point per epoch.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// "adaptive-moment" or "plain-gradient-descent".
    #[arg(long, default_value = "adaptive-moment")]
    optimizer: String,
    /// Mini-batch size (full batch when omitted).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fit per-dimension input standardization on the reference data.
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = read_stream_csv(&args.data)?;
    let section = TrainSection {
        hidden_dim: args.hidden,
        epochs: args.epochs,
        learning_rate: args.lr,
        noise_draws: args.k,
        sigma: args.sigma,
        optimizer: args.optimizer.clone(),
        standardize: args.standardize,
        batch_size: args.batch_size,
    };
    let cfg = section.to_train_config(args.seed)?;
    let init = TrainInit::Fresh {
        hidden_dim: args.hidden,
        standardize: args.standardize,
    };
    let report = match args.objective.as_str() {
        "dsm" => train_offline(&data.rows, &cfg, init)?,
        "implicit-sm" => sm_ablation_train(&data.rows, &cfg, init)?,
        other => {
            return Err(Error::invalid(format!(
                "unknown objective '{other}' (expected dsm or implicit-sm)"
            )))
        }
    };
    save_model(&args.out, &report.model)?;
    match report.loss_trace.last() {
        Some(loss) => println!(
            "trained {} epochs on {} points; final loss {loss}; model written to {}",
            args.epochs,
            data.rows.len(),
            args.out.display()
        ),
        None => println!(
            "no training epochs requested; initial model written to {}",
            args.out.display()
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared method/source loading
// ---------------------------------------------------------------------------

fn load_method_inputs(args: &MethodArgs, seed: u64) -> Result<(MethodSpec, MethodInputs)> {
    let spec: MethodSpec = args.method.parse()?;
    let load_rows = |p: &Option<PathBuf>| -> Result<Option<Vec<Vec<f64>>>> {
        Ok(match p {
            Some(path) => Some(read_stream_csv(path)?.rows),
            None => None,
        })
    };
    let load_spec = |p: &Option<PathBuf>| -> Result<Option<GmmSpec>> {
        Ok(match p {
            Some(path) => Some(load_gmm(path)?),
            None => None,
        })
    };
    let load_net = |p: &Option<PathBuf>| -> Result<Option<ScoreModel>> {
        Ok(match p {
            Some(path) => Some(load_model(path)?),
            None => None,
        })
    };
    let inputs = MethodInputs {
        model0: load_net(&args.model0)?,
        model1: load_net(&args.model1)?,
        ref0: load_rows(&args.ref0)?,
        ref1: load_rows(&args.ref1)?,
        gmm0: load_spec(&args.gmm0)?,
        gmm1: load_spec(&args.gmm1)?,
        em_iters: args.em_iters,
        assume_shift: args.assume_shift,
        online: OnlineParams {
            window: args.window,
            steps: args.steps,
            learning_rate: args.online_lr,
            noise_draws: args.online_k,
            rng_seed: seed,
        },
    };
    Ok((spec, inputs))
}

enum PreSource {
    Gmm(GmmSpec),
    Bootstrap(Vec<Vec<f64>>),
}

impl PreSource {
    fn sampler(&self) -> Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + '_> {
        match self {
            PreSource::Gmm(spec) => Box::new(gmm_sampler(spec)),
            PreSource::Bootstrap(rows) => Box::new(bootstrap_sampler(rows)),
        }
    }
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(skip)]
    method: MethodArgs,
    /// Method name echoed into provenance.
    #[arg(skip)]
    method_name: String,
    /// Target average run length γ.
    #[arg(long)]
    gamma: f64,
    /// Simulated trajectories N1.
    #[arg(long, default_value_t = 200)]
    n1: usize,
    /// Steps per trajectory N2.
    #[arg(long, default_value_t = 1000)]
    n2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Analytic pre-change mixture to sample from.
    #[arg(long)]
    pre_gmm: Option<PathBuf>,
    /// Pre-change reference CSV to bootstrap from.
    #[arg(long)]
    pre_data: Option<PathBuf>,
    /// Output calibration file.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

fn pre_source(pre_gmm: &Option<PathBuf>, pre_data: &Option<PathBuf>) -> Result<PreSource> {
    match (pre_gmm, pre_data) {
        (Some(path), None) => Ok(PreSource::Gmm(load_gmm(path)?)),
        (None, Some(path)) => {
            let rows = read_stream_csv(path)?.rows;
            if rows.is_empty() {
                return Err(Error::invalid("pre-change reference CSV has no rows"));
            }
            Ok(PreSource::Bootstrap(rows))
        }
        _ => Err(Error::invalid(
            "give exactly one of --pre-gmm (analytic sampling) or --pre-data (bootstrap)",
        )),
    }
}

pub fn cmd_calibrate(mut args: CalibrateArgs) -> Result<()> {
    args.method_name = args.method.method.clone();
    let (spec, inputs) = load_method_inputs(&args.method, args.seed)?;
    let built = build_method(spec, inputs)?;
    let source = pre_source(&args.pre_gmm, &args.pre_data)?;
    let config = CalibrationConfig {
        target_arl: args.gamma,
        iterations: args.n1,
        horizon: args.n2,
        rng_seed: args.seed,
    };
    let result = calibrate_threshold(|i| built.process(i), source.sampler(), &config)?;
    save_calibration(&args.out, &result)?;
    println!(
        "calibrated tau = {} at quantile level {} ({} maxima); written to {}",
        result.threshold,
        result.quantile_level,
        result.maxima.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    #[serde(skip)]
    method: MethodArgs,
    #[arg(skip)]
    method_name: String,
    /// Stream CSV to monitor.
    #[arg(long)]
    stream: PathBuf,
    /// Detection threshold (mutually exclusive with --calibration).
    #[arg(long, conflicts_with = "calibration")]
    tau: Option<f64>,
    /// Calibration file providing the threshold.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Reset the statistic and keep monitoring after each alarm.
    #[arg(long, default_value_t = false)]
    resume: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out_dir: PathBuf,
    #[arg(skip)]
    tau_used: f64,
}

pub fn cmd_detect(mut args: DetectArgs) -> Result<()> {
    args.method_name = args.method.method.clone();
    let tau = match (args.tau, &args.calibration) {
        (Some(t), None) => {
            if !t.is_finite() {
                return Err(Error::invalid(format!("threshold {t} must be finite")));
            }
            t
        }
        (None, Some(path)) => load_calibration(path)?.threshold,
        _ => {
            return Err(Error::invalid(
                "give exactly one of --tau or --calibration",
            ))
        }
    };
    args.tau_used = tau;
    let (spec, inputs) = load_method_inputs(&args.method, args.seed)?;
    let built = build_method(spec, inputs)?;
    let stream = read_stream_csv(&args.stream)?;
    ensure_dir(&args.out_dir)?;
    let provenance = provenance_lines("detect", &args);

    let records: Vec<RunRecord> = match &built {
        BuiltMethod::Cusum(inc) => {
            if args.resume {
                run_offline_resume(stream.rows.clone(), inc, tau)?
            } else {
                vec![run_offline(stream.rows.clone(), inc, tau)?]
            }
        }
        BuiltMethod::Online {
            s0,
            init,
            window,
            steps,
            cfg,
        } => vec![run_online(
            stream.rows.clone(),
            s0.clone(),
            init.clone(),
            tau,
            *window,
            cfg.clone(),
            *steps,
        )?],
        BuiltMethod::Hotelling(params) => {
            let mut proc = scorewatch::baselines::HotellingProcess::new(params.clone());
            let mut record = RunRecord {
                change_point: None,
                stopping_time: None,
                alarm_raised: false,
                steps_consumed: 0,
                statistic_trace: Vec::new(),
                increments: Vec::new(),
                clipped: 0,
            };
            for (i, x) in stream.rows.iter().enumerate() {
                let s = proc.update(x)?;
                let t = i + 1;
                record.steps_consumed = t;
                record.statistic_trace.push((t, s));
                // No accumulation: the per-observation statistic doubles
                // as the increment column.
                record.increments.push(s);
                if s >= tau {
                    record.alarm_raised = true;
                    record.stopping_time = Some(t);
                    break;
                }
            }
            vec![record]
        }
    };

    for (i, record) in records.iter().enumerate() {
        let (csv_name, summary_name) = if records.len() == 1 {
            ("record.csv".to_string(), "summary.toml".to_string())
        } else {
            (format!("record_{i}.csv"), format!("summary_{i}.toml"))
        };
        save_run_record(
            args.out_dir.join(csv_name),
            args.out_dir.join(summary_name),
            record,
            &provenance,
        )?;
    }
    let first = &records[0];
    match first.stopping_time {
        Some(t) => println!(
            "alarm at t = {t} (statistic {:.6}, tau {tau}); record written to {}",
            first.statistic_trace.last().map(|&(_, s)| s).unwrap_or(f64::NAN),
            args.out_dir.display()
        ),
        None => println!(
            "no alarm in {} steps (tau {tau}); record written to {}",
            first.steps_consumed,
            args.out_dir.display()
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct ResolvedData {
    pre_ref: Vec<Vec<f64>>,
    post_ref: Vec<Vec<f64>>,
    pre_stream: StreamSource,
    post_stream: StreamSource,
    gmm0: Option<GmmSpec>,
    gmm1: Option<GmmSpec>,
}

enum StreamSource {
    Gmm(GmmSpec),
    Transform(TransformNet),
    Bootstrap(Vec<Vec<f64>>),
}

impl StreamSource {
    fn sampler(&self) -> Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + '_> {
        match self {
            StreamSource::Gmm(spec) => Box::new(gmm_sampler(spec)),
            StreamSource::Transform(net) => Box::new(transform_sampler(net)),
            StreamSource::Bootstrap(rows) => Box::new(bootstrap_sampler(rows)),
        }
    }
}

fn resolve_data(cfg: &ExperimentConfig, seed: u64) -> Result<ResolvedData> {
    let d = &cfg.data;
    match d.generator.as_str() {
        "ring" => {
            let (pre, post) = ring_specs();
            let pre_ref = sample_gmm(&pre, d.n_reference, split_seed(seed, 10));
            let post_ref = sample_gmm(&post, d.n_reference, split_seed(seed, 11));
            Ok(ResolvedData {
                pre_ref,
                post_ref,
                pre_stream: StreamSource::Gmm(pre.clone()),
                post_stream: StreamSource::Gmm(post.clone()),
                gmm0: Some(pre),
                gmm1: Some(post),
            })
        }
        "nn" => {
            let nn = NnDatasetConfig {
                n_samples: d.n_reference.max(2),
                seed_net_pre: split_seed(seed, 20),
                seed_net_post: split_seed(seed, 21),
                seed_latent_pre: split_seed(seed, 22),
                seed_latent_post: split_seed(seed, 23),
                ..NnDatasetConfig::default()
            };
            let ds = gen_nn_dataset(&nn)?;
            Ok(ResolvedData {
                pre_ref: ds.pre_data,
                post_ref: ds.post_data,
                pre_stream: StreamSource::Transform(ds.description.net_pre.clone()),
                post_stream: StreamSource::Transform(ds.description.net_post.clone()),
                gmm0: None,
                gmm1: None,
            })
        }
        "csv" => {
            let pre = d
                .pre
                .as_ref()
                .ok_or_else(|| Error::invalid("data.pre is required for generator = \"csv\""))?;
            let post = d
                .post
                .as_ref()
                .ok_or_else(|| Error::invalid("data.post is required for generator = \"csv\""))?;
            let pre_ref = read_stream_csv(pre)?.rows;
            let post_ref = read_stream_csv(post)?.rows;
            if pre_ref.is_empty() || post_ref.is_empty() {
                return Err(Error::invalid("reference CSVs must be nonempty"));
            }
            let gmm0 = d.pre_gmm.as_ref().map(load_gmm).transpose()?;
            let gmm1 = d.post_gmm.as_ref().map(load_gmm).transpose()?;
            Ok(ResolvedData {
                pre_stream: StreamSource::Bootstrap(pre_ref.clone()),
                post_stream: StreamSource::Bootstrap(post_ref.clone()),
                pre_ref,
                post_ref,
                gmm0,
                gmm1,
            })
        }
        other => Err(Error::invalid(format!(
            "unknown generator '{other}' (expected ring, nn, or csv)"
        ))),
    }
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut cfg = load_experiment(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = args.out_dir {
        cfg.output_dir = dir;
    }
    ensure_dir(&cfg.output_dir)?;
    let provenance = provenance_lines("evaluate", &cfg);
    let data = resolve_data(&cfg, cfg.seed)?;

    // Reference data written out for reproducibility.
    let dim = data.pre_ref.first().map(|r| r.len()).unwrap_or(0);
    write_stream_csv(
        cfg.output_dir.join("pre_reference.csv"),
        &StreamData::from_rows_with_dim(data.pre_ref.clone(), dim),
        &provenance,
    )?;
    write_stream_csv(
        cfg.output_dir.join("post_reference.csv"),
        &StreamData::from_rows_with_dim(data.post_ref.clone(), dim),
        &provenance,
    )?;

    // Score models are trained once and shared across methods.
    let mut dsm_models: Option<(ScoreModel, ScoreModel)> = None;
    let mut sm_models: Option<(ScoreModel, ScoreModel)> = None;
    let train_pair = |objective: &str, seed_lo: u64| -> Result<(ScoreModel, ScoreModel)> {
        let t0 = cfg.train.to_train_config(split_seed(cfg.seed, seed_lo))?;
        let t1 = cfg.train.to_train_config(split_seed(cfg.seed, seed_lo + 1))?;
        let init = || TrainInit::Fresh {
            hidden_dim: cfg.train.hidden_dim,
            standardize: cfg.train.standardize,
        };
        let (m0, m1) = match objective {
            "dsm" => (
                train_offline(&data.pre_ref, &t0, init())?.model,
                train_offline(&data.post_ref, &t1, init())?.model,
            ),
            _ => (
                sm_ablation_train(&data.pre_ref, &t0, init())?.model,
                sm_ablation_train(&data.post_ref, &t1, init())?.model,
            ),
        };
        Ok((m0, m1))
    };

    let eval = EvalConfig {
        calib_iterations: cfg.evaluation.calib_iterations,
        calib_horizon: cfg.evaluation.calib_horizon,
        arl_runs: cfg.evaluation.arl_runs,
        arl_cap_factor: cfg.evaluation.arl_cap_factor,
        wadd_runs: cfg.evaluation.wadd_runs,
        wadd_cap: cfg.evaluation.wadd_cap,
        rng_seed: split_seed(cfg.seed, 1000),
    };

    for method_name in &cfg.evaluation.methods {
        let spec: MethodSpec = method_name.parse()?;
        let mut inputs = MethodInputs {
            em_iters: 200,
            online: OnlineParams {
                window: cfg.detection.window,
                steps: cfg.detection.steps,
                learning_rate: cfg.detection.online_learning_rate,
                noise_draws: cfg.detection.online_noise_draws,
                rng_seed: split_seed(cfg.seed, 2000),
            },
            ..MethodInputs::default()
        };
        match spec {
            MethodSpec::DsmCusum | MethodSpec::DsmCusumOnline => {
                if dsm_models.is_none() {
                    dsm_models = Some(train_pair("dsm", 100)?);
                }
                let (m0, m1) = dsm_models.as_ref().unwrap();
                inputs.model0 = Some(m0.clone());
                inputs.model1 = Some(m1.clone());
            }
            MethodSpec::SmScusum => {
                if sm_models.is_none() {
                    sm_models = Some(train_pair("implicit-sm", 200)?);
                }
                let (m0, m1) = sm_models.as_ref().unwrap();
                inputs.model0 = Some(m0.clone());
                inputs.model1 = Some(m1.clone());
            }
            MethodSpec::GaussianCusum | MethodSpec::GmmCusum(_) | MethodSpec::Hotelling => {
                inputs.ref0 = Some(data.pre_ref.clone());
                inputs.ref1 = Some(data.post_ref.clone());
            }
            MethodSpec::ExactCusum | MethodSpec::ExactScusum => {
                inputs.gmm0 = Some(data.gmm0.clone().ok_or_else(|| {
                    Error::invalid(format!(
                        "{method_name} needs analytic mixtures; the '{}' generator \
                         does not provide them",
                        cfg.data.generator
                    ))
                })?);
                inputs.gmm1 = Some(data.gmm1.clone().ok_or_else(|| {
                    Error::invalid(format!("{method_name} needs analytic mixtures"))
                })?);
            }
        }
        let built = build_method(spec, inputs)?;
        let pre_sampler = data.pre_stream.sampler();
        let post_sampler = data.post_stream.sampler();
        let rows = tradeoff_curve(
            |i| built.process(i),
            &pre_sampler,
            &post_sampler,
            &cfg.evaluation.gammas,
            &eval,
        )?;
        let table_path = cfg.output_dir.join(format!("tradeoff_{method_name}.csv"));
        write_tradeoff_csv(&table_path, &rows, &provenance)?;
        println!("\n{method_name} (written to {}):", table_path.display());
        print_tradeoff_table(&rows)?;
    }
    Ok(())
}

fn write_tradeoff_csv(path: &Path, rows: &[TradeoffRow], provenance: &[String]) -> Result<()> {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(
        "gamma,tau,arl_mean,arl_se,arl_runs,arl_censored,arl_lower_bound,\
         wadd_mean,wadd_se,wadd_runs,wadd_censored,wadd_lower_bound\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.gamma,
            r.tau,
            r.arl.mean,
            r.arl.std_error,
            r.arl.runs,
            r.arl.censored,
            r.arl.lower_bound,
            r.wadd.mean,
            r.wadd.std_error,
            r.wadd.runs,
            r.wadd.censored,
            r.wadd.lower_bound,
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::File {
        path: path.display().to_string(),
        source: e,
    })
}

fn print_tradeoff_table(rows: &[TradeoffRow]) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{:.0}", r.gamma),
                format!("{:.4}", r.tau),
                format!("{:.1}", r.arl.mean),
                format!("{:.1}", r.arl.std_error),
                format!("{}", r.arl.censored),
                format!("{:.2}", r.wadd.mean),
                format!("{:.2}", r.wadd.std_error),
                format!("{}", r.wadd.censored),
            ]
        })
        .collect();
    write_text_table(
        std::io::stdout().lock(),
        &[
            "gamma",
            "tau",
            "arl",
            "arl_se",
            "arl_cens",
            "wadd",
            "wadd_se",
            "wadd_cens",
        ],
        &table,
    )
    .map_err(|e| Error::File {
        path: "<stdout>".into(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// sigma-tradeoff
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct SigmaTradeoffArgs {
    /// Analytic target mixture file; defaults to a two-component 1-D
    /// mixture (means ±2, unit variances, equal weights).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Comma-separated noise-scale grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.25, 0.5, 1.0])]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 4000)]
    n_mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

/// The default 1-D two-component target: equal weights, means ±2, unit
/// variances.
pub fn default_sigma_target() -> GmmSpec {
    GmmSpec::isotropic(&[vec![-2.0], vec![2.0]], 1.0).expect("valid two-component mixture")
}

pub fn cmd_sigma_tradeoff(args: SigmaTradeoffArgs) -> Result<()> {
    let target = match &args.target {
        Some(path) => load_gmm(path)?,
        None => default_sigma_target(),
    };
    let train_cfg = scorewatch::score_net::TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        noise_draws: args.k,
        sigma: 1.0, // overwritten per grid point
        optimizer: parse_optimizer("adaptive-moment")?,
        batch: scorewatch::score_net::BatchPolicy::FullBatch,
        rng_seed: args.seed,
    };
    let cfg = SigmaTradeoffConfig {
        n_train: args.n_train,
        n_mc: args.n_mc,
        hidden_dim: args.hidden,
        rng_seed: args.seed,
    };
    let rows = sigma_tradeoff(&target, &args.sigmas, &train_cfg, &cfg)?;

    let provenance = provenance_lines("sigma-tradeoff", &args);
    let mut out = String::new();
    for line in &provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("sigma,est_error,est_se,pert_error,pert_se,combined\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sigma, r.est_error, r.est_se, r.pert_error, r.pert_se, r.combined
        ));
    }
    std::fs::write(&args.out, out).map_err(|e| Error::File {
        path: args.out.display().to_string(),
        source: e,
    })?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{}", r.sigma),
                format!("{:.4}", r.est_error),
                format!("{:.4}", r.est_se),
                format!("{:.4}", r.pert_error),
                format!("{:.4}", r.pert_se),
                format!("{:.4}", r.combined),
            ]
        })
        .collect();
    write_text_table(
        std::io::stdout().lock(),
        &["sigma", "est", "est_se", "pert", "pert_se", "combined"],
        &table,
    )
    .map_err(|e| Error::File {
        path: "<stdout>".into(),
        source: e,
    })?;
    println!("table written to {}", args.out.display());
    Ok(())
}

