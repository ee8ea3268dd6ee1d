//! Comparison detectors sharing the CUSUM machinery: Gaussian CUSUM,
//! Gaussian-mixture CUSUM fitted by EM, exact likelihood-ratio CUSUM,
//! exact score CUSUM, Hotelling's T², and the vanilla score-matching
//! ablation. Only the increment function differs between methods; the
//! accumulation always routes through [`crate::detector`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::detector::{CusumProcess, FnIncrement, IncrementFn, StatisticProcess};
use crate::error::{Error, Result};
use crate::rng;
use crate::score_net::{run_training, Objective, TrainConfig, TrainInit, TrainReport};
use crate::stats::{check_dim, GmmComponent, GmmSpec};

/// Fitted multivariate Gaussian with cached factorization.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let mean = DVector::from_vec(mean);
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Gaussian parameter"));
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(Self {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `(x − μ)ᵀ Σ⁻¹ (x − μ)`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let diff = DVector::from_row_slice(x) - &self.mean;
        let half = self
            .chol
            .l()
            .solve_lower_triangular(&diff)
            .ok_or(Error::non_finite("mahalanobis triangular solve"))?;
        Ok(half.dot(&half))
    }

    /// View as a one-component mixture.
    pub fn to_gmm(&self) -> GmmSpec {
        GmmSpec::new(vec![GmmComponent {
            weight: 1.0,
            mean: self.mean.clone(),
            cov: self.cov.clone(),
        }])
        .expect("a validated Gaussian is a valid one-component mixture")
    }
}

/// Ridge added to MLE covariances for invertibility.
pub const MLE_RIDGE: f64 = 1e-8;

/// Sample mean and biased (1/n) covariance with a small ridge.
pub fn fit_gaussian_mle(data: &[Vec<f64>]) -> Result<GaussianParams> {
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a Gaussian on empty data"));
    }
    let d = data[0].len();
    if data.len() < d + 1 {
        return Err(Error::invalid(format!(
            "need at least {} points to fit a {d}-dimensional Gaussian, got {}",
            d + 1,
            data.len()
        )));
    }
    let n = data.len() as f64;
    let mut mean = DVector::zeros(d);
    for row in data {
        check_dim(d, row)?;
        mean += DVector::from_row_slice(row);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for row in data {
        let c = DVector::from_row_slice(row) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n;
    cov += DMatrix::identity(d, d) * MLE_RIDGE;
    GaussianParams::new(mean.as_slice().to_vec(), cov)
}

/// Gaussian log-likelihood ratio
/// `½ log(|Σ0|/|Σ1|) + ½(x−μ0)ᵀΣ0⁻¹(x−μ0) − ½(x−μ1)ᵀΣ1⁻¹(x−μ1)`.
pub fn gaussian_llr(p0: &GaussianParams, p1: &GaussianParams, x: &[f64]) -> Result<f64> {
    Ok(0.5 * (p0.log_det - p1.log_det) + 0.5 * p0.mahalanobis_sq(x)?
        - 0.5 * p1.mahalanobis_sq(x)?)
}

/// Mixture log-likelihood ratio `log p1(x) − log p0(x)`.
pub fn exact_cusum_llr(p0: &GmmSpec, p1: &GmmSpec, x: &[f64]) -> Result<f64> {
    Ok(p1.logpdf(x)? - p0.logpdf(x)?)
}

/// Hyvärinen-score increment with ground-truth mixture scores.
pub fn exact_scusum_increment(p0: &GmmSpec, p1: &GmmSpec, x: &[f64]) -> Result<f64> {
    crate::stats::increment(p0, p1, x)
}

/// Hotelling's T² statistic `(x − μ̂)ᵀ Σ̂⁻¹ (x − μ̂)`, monitored directly
/// against a threshold without accumulation.
pub fn hotelling_t2(reference: &GaussianParams, x: &[f64]) -> Result<f64> {
    reference.mahalanobis_sq(x)
}

/// Per-observation Hotelling monitor as a statistic process.
pub struct HotellingProcess {
    reference: GaussianParams,
}

impl HotellingProcess {
    pub fn new(reference: GaussianParams) -> Self {
        Self { reference }
    }
}

impl StatisticProcess for HotellingProcess {
    fn update(&mut self, x: &[f64]) -> Result<f64> {
        hotelling_t2(&self.reference, x)
    }
}

/// Wraps any increment function into the shared CUSUM state machine.
pub fn make_cusum_detector<I: IncrementFn>(inc: I) -> CusumProcess<I> {
    CusumProcess::new(inc)
}

/// Boxed Gaussian-CUSUM increment.
pub fn gaussian_llr_increment(
    p0: GaussianParams,
    p1: GaussianParams,
) -> impl IncrementFn {
    let dim = p0.dim();
    FnIncrement::new(dim, move |x: &[f64]| gaussian_llr(&p0, &p1, x))
}

/// Boxed mixture-likelihood-ratio increment.
pub fn gmm_llr_increment(p0: GmmSpec, p1: GmmSpec) -> impl IncrementFn {
    let dim = p0.dim();
    FnIncrement::new(dim, move |x: &[f64]| exact_cusum_llr(&p0, &p1, x))
}

/// Trains a score model on the implicit (noise-free) score-matching
/// objective with exact divergence gradients; the ablation counterpart of
/// denoising training.
pub fn sm_ablation_train(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    init: TrainInit,
) -> Result<TrainReport> {
    run_training(data, cfg, init, Objective::ImplicitSm)
}

/// Report of one EM fit.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub spec: GmmSpec,
    /// Dataset log-likelihood after each iteration.
    pub loglik_trace: Vec<f64>,
    /// Components re-seeded after collapsing to an empty cluster.
    pub reseeded: usize,
}

/// Covariance ridge used by the EM fits.
pub const EM_RIDGE: f64 = 1e-6;
const EM_TOL: f64 = 1e-9;
const EM_RESTARTS: usize = 3;

/// Fits an `n_components` Gaussian mixture by expectation-maximization,
/// keeping the best of three seeded restarts.
pub fn em_fit_gmm(data: &[Vec<f64>], n_components: usize, iters: usize, seed: u64) -> Result<GmmSpec> {
    Ok(em_fit_gmm_report(data, n_components, iters, seed)?.spec)
}

/// EM fit returning the log-likelihood trace of the winning restart.
pub fn em_fit_gmm_report(
    data: &[Vec<f64>],
    n_components: usize,
    iters: usize,
    seed: u64,
) -> Result<EmFit> {
    if n_components == 0 {
        return Err(Error::invalid("need at least one mixture component"));
    }
    if data.len() < n_components {
        return Err(Error::invalid(format!(
            "need at least {n_components} points to fit {n_components} components"
        )));
    }
    let d = data[0].len();
    for row in data {
        check_dim(d, row)?;
    }
    let mut best: Option<EmFit> = None;
    for restart in 0..EM_RESTARTS {
        let fit = em_single(data, n_components, iters, rng::split_seed(seed, restart as u64))?;
        let better = match &best {
            None => true,
            Some(b) => {
                fit.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
                    > b.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
            }
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn em_single(data: &[Vec<f64>], k: usize, iters: usize, seed: u64) -> Result<EmFit> {
    let d = data[0].len();
    let n = data.len();
    let mut rng = rng::rng_from_seed(seed);

    // k-means++-style seeding for the means.
    let mut means: Vec<DVector<f64>> = Vec::with_capacity(k);
    means.push(DVector::from_row_slice(&data[rng.random_range(0..n)]));
    while means.len() < k {
        let dists: Vec<f64> = data
            .iter()
            .map(|x| {
                let xv = DVector::from_row_slice(x);
                means
                    .iter()
                    .map(|m| (&xv - m).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = dists.iter().sum();
        let idx = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut u: f64 = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in dists.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        means.push(DVector::from_row_slice(&data[idx]));
    }

    // Shared initial covariance: global biased covariance + ridge.
    let global = fit_gaussian_mle(data)?;
    let init_cov = global.cov().clone() + DMatrix::identity(d, d) * EM_RIDGE;
    let mut weights = vec![1.0 / k as f64; k];
    let mut covs = vec![init_cov; k];
    let mut loglik_trace = Vec::new();
    let mut reseeded = 0usize;
    let mut prev_ll = f64::NEG_INFINITY;

    for _ in 0..iters {
        let spec = build_spec(&weights, &means, &covs)?;
        // E-step in log space.
        let mut resp = vec![vec![0.0f64; k]; n];
        let mut loglik = 0.0;
        for (j, x) in data.iter().enumerate() {
            let acts = spec.log_weighted_densities(x)?;
            let lse = crate::stats::log_sum_exp(&acts);
            loglik += lse;
            for (i, a) in acts.iter().enumerate() {
                resp[j][i] = (a - lse).exp();
            }
        }
        loglik_trace.push(loglik);

        // M-step.
        for i in 0..k {
            let ni: f64 = resp.iter().map(|r| r[i]).sum();
            if ni < 1e-10 {
                // Empty cluster: reseed from a random data point.
                means[i] = DVector::from_row_slice(&data[rng.random_range(0..n)]);
                covs[i] = global.cov().clone() + DMatrix::identity(d, d) * EM_RIDGE;
                weights[i] = 1.0 / n as f64;
                reseeded += 1;
                continue;
            }
            weights[i] = ni / n as f64;
            let mut mu = DVector::zeros(d);
            for (j, x) in data.iter().enumerate() {
                mu += DVector::from_row_slice(x) * resp[j][i];
            }
            mu /= ni;
            let mut cov = DMatrix::zeros(d, d);
            for (j, x) in data.iter().enumerate() {
                let c = DVector::from_row_slice(x) - &mu;
                cov += (&c * c.transpose()) * resp[j][i];
            }
            cov /= ni;
            cov += DMatrix::identity(d, d) * EM_RIDGE;
            means[i] = mu;
            covs[i] = cov;
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }

        if loglik - prev_ll < EM_TOL && loglik.is_finite() && prev_ll.is_finite() {
            break;
        }
        prev_ll = loglik;
    }

    Ok(EmFit {
        spec: build_spec(&weights, &means, &covs)?,
        loglik_trace,
        reseeded,
    })
}

fn build_spec(weights: &[f64], means: &[DVector<f64>], covs: &[DMatrix<f64>]) -> Result<GmmSpec> {
    let total: f64 = weights.iter().sum();
    let components = weights
        .iter()
        .zip(means)
        .zip(covs)
        .map(|((w, m), c)| GmmComponent {
            weight: w / total,
            mean: m.clone(),
            cov: c.clone(),
        })
        .collect();
    GmmSpec::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_gmm;
    use crate::detector::StatisticProcess;
    use crate::score_net::ScoreModel;

    #[test]
    fn mle_constant_data_gives_ridge_covariance() {
        let data = vec![vec![2.0, -1.0]; 3];
        let p = fit_gaussian_mle(&data).unwrap();
        assert!((p.mean()[0] - 2.0).abs() < 1e-15);
        assert!((p.mean()[1] + 1.0).abs() < 1e-15);
        assert!((p.cov()[(0, 0)] - MLE_RIDGE).abs() < 1e-20);
        assert!((p.cov()[(0, 1)]).abs() < 1e-20);
    }

    #[test]
    fn mle_two_point_hand_case() {
        let data = vec![vec![-1.0], vec![1.0]];
        let p = fit_gaussian_mle(&data).unwrap();
        assert!(p.mean()[0].abs() < 1e-15);
        assert!((p.cov()[(0, 0)] - (1.0 + MLE_RIDGE)).abs() < 1e-12);
    }

    #[test]
    fn mle_needs_enough_points() {
        assert!(fit_gaussian_mle(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn mle_recovers_known_gaussian() {
        let truth = GmmSpec::single(
            vec![1.0, -2.0],
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        let data = sample_gmm(&truth, 20_000, 3);
        let p = fit_gaussian_mle(&data).unwrap();
        // SE of the mean is √(Σ_ii/n).
        for i in 0..2 {
            let se = (truth.components()[0].cov[(i, i)] / 20_000.0).sqrt();
            assert!((p.mean()[i] - truth.components()[0].mean[i]).abs() < 3.0 * se);
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!((p.cov()[(r, c)] - truth.components()[0].cov[(r, c)]).abs() < 0.1);
            }
        }
    }

    #[test]
    fn gaussian_llr_zero_for_identical_and_midpoint() {
        let p = GaussianParams::new(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let q = GaussianParams::new(vec![1.0], DMatrix::identity(1, 1)).unwrap();
        assert_eq!(gaussian_llr(&p, &p, &[0.3]).unwrap(), 0.0);
        // d=1, unit variance: llr(x) = x − ½; zero at the midpoint.
        assert!(gaussian_llr(&p, &q, &[0.5]).unwrap().abs() < 1e-15);
        assert!((gaussian_llr(&p, &q, &[1.5]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_llr_matches_mixture_density_difference() {
        let mut rng = rng::rng_from_seed(31);
        for _ in 0..10 {
            let m0: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m1: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.5..0.5));
            let c0 = &a * a.transpose() + DMatrix::identity(2, 2);
            let b = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.5..0.5));
            let c1 = &b * b.transpose() + DMatrix::identity(2, 2) * 0.7;
            let p0 = GaussianParams::new(m0.clone(), c0.clone()).unwrap();
            let p1 = GaussianParams::new(m1.clone(), c1.clone()).unwrap();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let llr = gaussian_llr(&p0, &p1, &x).unwrap();
            let oracle = p1.to_gmm().logpdf(&x).unwrap() - p0.to_gmm().logpdf(&x).unwrap();
            assert!((llr - oracle).abs() < 1e-10, "llr {llr} vs oracle {oracle}");
        }
    }

    #[test]
    fn exact_cusum_mirrors_gaussian_llr_for_single_components() {
        let p0 = GaussianParams::new(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let p1 = GaussianParams::new(vec![1.0], DMatrix::identity(1, 1) * 2.0).unwrap();
        let g0 = p0.to_gmm();
        let g1 = p1.to_gmm();
        assert_eq!(exact_cusum_llr(&g0, &g0, &[0.4]).unwrap(), 0.0);
        for x in [-1.0, 0.0, 0.7, 2.5] {
            let a = exact_cusum_llr(&g0, &g1, &[x]).unwrap();
            let b = gaussian_llr(&p0, &p1, &[x]).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_scusum_hand_case_and_identity() {
        let g0 = GmmSpec::single(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let g1 = GmmSpec::single(vec![1.0], DMatrix::identity(1, 1)).unwrap();
        assert_eq!(exact_scusum_increment(&g0, &g0, &[0.9]).unwrap(), 0.0);
        let d = exact_scusum_increment(&g0, &g1, &[1.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_scusum_mean_under_post_matches_half_fisher() {
        // E_{p1}[Δ] = ½·E_{p1}‖∇log p1 − ∇log p0‖², paired Monte-Carlo.
        let p0 = GmmSpec::isotropic(&[vec![-1.0], vec![1.0]], 0.8).unwrap();
        let p1 = GmmSpec::isotropic(&[vec![-0.5], vec![1.5]], 1.1).unwrap();
        let n = 50_000;
        let mut rng = rng::rng_from_seed(5);
        let mut diffs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = p1.sample_one(&mut rng);
            let delta = exact_scusum_increment(&p0, &p1, &x).unwrap();
            let s1 = p1.score(&x).unwrap();
            let s0 = p0.score(&x).unwrap();
            let half_sq = 0.5
                * s1.iter()
                    .zip(&s0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            diffs.push(delta - half_sq);
        }
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var =
            diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "paired mean {mean}, se {se}");
    }

    #[test]
    fn exact_cusum_increment_signs_are_kl_consistent() {
        let p0 = GmmSpec::isotropic(&[vec![-1.0], vec![1.0]], 0.8).unwrap();
        let p1 = GmmSpec::isotropic(&[vec![0.0], vec![2.0]], 1.0).unwrap();
        let n = 20_000;
        let mut rng = rng::rng_from_seed(6);
        let mut under_p1 = 0.0;
        let mut under_p0 = 0.0;
        for _ in 0..n {
            under_p1 += exact_cusum_llr(&p0, &p1, &p1.sample_one(&mut rng)).unwrap();
            under_p0 += exact_cusum_llr(&p0, &p1, &p0.sample_one(&mut rng)).unwrap();
        }
        assert!(under_p1 / (n as f64) > 0.0);
        assert!(under_p0 / (n as f64) < 0.0);
    }

    #[test]
    fn hotelling_basics_and_affine_invariance() {
        let data = sample_gmm(
            &GmmSpec::single(vec![1.0, 2.0], DMatrix::identity(2, 2)).unwrap(),
            500,
            8,
        );
        let p = fit_gaussian_mle(&data).unwrap();
        let mu = vec![p.mean()[0], p.mean()[1]];
        assert!(hotelling_t2(&p, &mu).unwrap().abs() < 1e-20);

        let id = GaussianParams::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let x = [3.0, -4.0];
        assert!((hotelling_t2(&id, &x).unwrap() - 25.0).abs() < 1e-12);

        // Invertible affine map applied to reference data and the query
        // point leaves T² unchanged.
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, -0.2, 0.9]);
        let b = DVector::from_vec(vec![2.0, -1.0]);
        let mapped: Vec<Vec<f64>> = data
            .iter()
            .map(|row| {
                let y = &a * DVector::from_row_slice(row) + &b;
                y.as_slice().to_vec()
            })
            .collect();
        let pm = fit_gaussian_mle(&mapped).unwrap();
        let x_orig = [1.7, 2.3];
        let xm = &a * DVector::from_row_slice(&x_orig) + &b;
        let t_orig = hotelling_t2(&p, &x_orig).unwrap();
        let t_mapped = hotelling_t2(&pm, xm.as_slice()).unwrap();
        assert!(
            (t_orig - t_mapped).abs() < 1e-6,
            "{t_orig} vs {t_mapped}"
        );
    }

    #[test]
    fn cusum_adapter_wraps_increments() {
        let zero = FnIncrement::new(1, |_: &[f64]| Ok(0.0));
        let mut proc = make_cusum_detector(zero);
        for t in 0..20 {
            assert_eq!(proc.update(&[t as f64]).unwrap(), 0.0);
        }

        let g0 = GmmSpec::single(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let inc = gmm_llr_increment(g0.clone(), g0);
        let mut proc = make_cusum_detector(inc);
        for t in 0..20 {
            assert!(proc.update(&[t as f64 * 0.1]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn em_single_component_matches_mle() {
        let truth = GmmSpec::isotropic(&[vec![0.5, -0.5]], 1.0).unwrap();
        let data = sample_gmm(&truth, 300, 12);
        let fit = em_fit_gmm(&data, 1, 50, 7).unwrap();
        let mle = fit_gaussian_mle(&data).unwrap();
        let c = &fit.components()[0];
        for i in 0..2 {
            assert!((c.mean[i] - mle.mean()[i]).abs() < 1e-6);
        }
        for r in 0..2 {
            for cc in 0..2 {
                assert!((c.cov[(r, cc)] - mle.cov()[(r, cc)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn em_loglik_is_non_decreasing() {
        let truth = GmmSpec::isotropic(&[vec![-2.0], vec![2.0]], 0.5).unwrap();
        let data = sample_gmm(&truth, 400, 3);
        let fit = em_fit_gmm_report(&data, 2, 60, 11).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-7,
                "log-likelihood decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn em_recovers_well_separated_clusters() {
        let truth = GmmSpec::isotropic(&[vec![-10.0], vec![10.0]], 1.0).unwrap();
        let data = sample_gmm(&truth, 600, 19);
        let fit = em_fit_gmm(&data, 2, 100, 23).unwrap();
        let mut means: Vec<f64> = fit.components().iter().map(|c| c.mean[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] + 10.0).abs() < 0.2, "low mean {}", means[0]);
        assert!((means[1] - 10.0).abs() < 0.2, "high mean {}", means[1]);
    }

    #[test]
    fn sm_ablation_zero_epochs_and_analytic_recovery() {
        let init = ScoreModel::random_init(1, 8, 1.0, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let data = vec![vec![0.1], vec![-0.2]];
        let out = sm_ablation_train(&data, &cfg, TrainInit::Warm(init.clone())).unwrap();
        assert_eq!(out.model, init);

        // Abundant N(0,1) data: the implicit objective drives s toward −x.
        // (With scarce data it instead overfits spikes at the samples,
        // which is the known weakness the denoising objective avoids.)
        let mut rng = rng::rng_from_seed(4);
        let data: Vec<Vec<f64>> = (0..8000)
            .map(|_| vec![rng.sample::<f64, _>(rand_distr::StandardNormal)])
            .collect();
        let cfg = TrainConfig {
            epochs: 400,
            learning_rate: 1e-2,
            rng_seed: 5,
            ..TrainConfig::default()
        };
        let report = sm_ablation_train(
            &data,
            &cfg,
            TrainInit::Fresh {
                hidden_dim: 32,
                standardize: false,
            },
        )
        .unwrap();
        let mut mae = 0.0;
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        for &x in &grid {
            mae += (report.model.forward(&[x]).unwrap()[0] + x).abs();
        }
        mae /= grid.len() as f64;
        assert!(mae < 0.1, "mean absolute error {mae}");
    }
}
