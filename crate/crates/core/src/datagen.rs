//! Synthetic dataset generators: ring-shaped Gaussian mixtures in 2-D,
//! a 10-D dataset pushed through random feed-forward transforms with
//! first/second-moment matching, and the Gaussian noise-injection kernel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{GmmComponent, GmmSpec};
use rand_chacha::ChaCha8Rng;

/// Equal-weight mixture with components evenly spaced on a circle.
#[derive(Debug, Clone)]
pub struct RingMixtureConfig {
    pub n_components: usize,
    pub radius: f64,
    /// Added to both coordinates of every mean.
    pub offset: f64,
    /// Common component covariance; identity when `None`.
    pub covariance: Option<DMatrix<f64>>,
}

/// The two canonical ring mixtures used by the synthetic change-point
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingRole {
    PreChange,
    PostChange,
}

impl RingMixtureConfig {
    /// 30 components on the radius-8 circle, shifted by −½ per coordinate.
    pub fn pre_change() -> Self {
        Self {
            n_components: 30,
            radius: 8.0,
            offset: -0.5,
            covariance: None,
        }
    }

    /// 8 components on the radius-8 circle, shifted by +½ per coordinate.
    pub fn post_change() -> Self {
        Self {
            n_components: 8,
            radius: 8.0,
            offset: 0.5,
            covariance: None,
        }
    }

    pub fn for_role(role: RingRole) -> Self {
        match role {
            RingRole::PreChange => Self::pre_change(),
            RingRole::PostChange => Self::post_change(),
        }
    }
}

/// Builds the ring mixture: component i (1-based) has mean
/// `(r·cos(2πi/n) + offset, r·sin(2πi/n) + offset)` and weight `1/n`.
pub fn ring_gmm_spec(config: &RingMixtureConfig) -> Result<GmmSpec> {
    if config.n_components == 0 {
        return Err(Error::invalid("ring mixture needs at least one component"));
    }
    if !(config.radius > 0.0) {
        return Err(Error::invalid("ring radius must be positive"));
    }
    let n = config.n_components;
    let cov = match &config.covariance {
        Some(c) => c.clone(),
        None => DMatrix::identity(2, 2),
    };
    let components = (1..=n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            GmmComponent {
                weight: 1.0 / n as f64,
                mean: DVector::from_vec(vec![
                    config.radius * angle.cos() + config.offset,
                    config.radius * angle.sin() + config.offset,
                ]),
                cov: cov.clone(),
            }
        })
        .collect();
    GmmSpec::new(components)
}

/// Convenience pair: the canonical pre- and post-change ring mixtures.
pub fn ring_specs() -> (GmmSpec, GmmSpec) {
    (
        ring_gmm_spec(&RingMixtureConfig::pre_change()).expect("canonical pre-change ring"),
        ring_gmm_spec(&RingMixtureConfig::post_change()).expect("canonical post-change ring"),
    )
}

/// `n` i.i.d. draws from the mixture, deterministic per seed.
pub fn sample_gmm(spec: &GmmSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::rng_from_seed(seed);
    (0..n).map(|_| spec.sample_one(&mut rng)).collect()
}

/// Sampler closure over a mixture, for the calibration/evaluation APIs.
pub fn gmm_sampler(spec: &GmmSpec) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> + '_ {
    move |rng| spec.sample_one(rng)
}

/// Sampler that resamples rows of a reference set i.i.d. (bootstrap).
pub fn bootstrap_sampler(rows: &[Vec<f64>]) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> + '_ {
    move |rng| rows[rng.random_range(0..rows.len())].clone()
}

/// Sampler that pushes fresh standard-Gaussian latents through a saved
/// transform network.
pub fn transform_sampler(net: &TransformNet) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> + '_ {
    move |rng| {
        let z: Vec<f64> = (0..net.in_dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        net.forward(&z)
    }
}

/// `K` noisy copies of `x`: returns `(x + ε_k, ε_k)` with
/// `ε_k ~ N(0, σ²I)` i.i.d.
pub fn inject_noise(x: &[f64], sigma: f64, k: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng::rng_from_seed(seed);
    (0..k)
        .map(|_| {
            let copy: Vec<f64> = x
                .iter()
                .map(|xi| xi + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            // Report the noise as copy − x so the bookkeeping identity
            // holds bit-exactly.
            let eps: Vec<f64> = copy.iter().zip(x).map(|(c, xi)| c - xi).collect();
            (copy, eps)
        })
        .collect()
}

/// Configuration for the transformed-Gaussian dataset: latent draws are
/// pushed through two independently initialized one-hidden-layer
/// networks, whose parameters are then jointly adjusted to match the two
/// outputs' sample means and covariances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NnDatasetConfig {
    pub latent_dim: usize,
    pub output_dim: usize,
    pub hidden_dim: usize,
    pub n_samples: usize,
    pub match_steps: usize,
    pub match_lr: f64,
    pub seed_net_pre: u64,
    pub seed_net_post: u64,
    pub seed_latent_pre: u64,
    pub seed_latent_post: u64,
}

impl Default for NnDatasetConfig {
    fn default() -> Self {
        Self {
            latent_dim: 4,
            output_dim: 10,
            hidden_dim: 32,
            n_samples: 5000,
            match_steps: 500,
            // Standard-Gaussian initialization makes the moment gradients
            // large; 1e-3 overshoots and diverges on typical instances.
            match_lr: 1e-4,
            seed_net_pre: 0,
            seed_net_post: 1,
            seed_latent_pre: 2,
            seed_latent_post: 3,
        }
    }
}

/// One-hidden-layer transform `y = W2·tanh(W1·z + b1) + b2` with
/// rectangular input/output shapes; all parameters initialized `N(0,1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformNet {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl TransformNet {
    fn random(in_dim: usize, hidden_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = rng::rng_from_seed(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        };
        Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1: draw(hidden_dim * in_dim),
            b1: draw(hidden_dim),
            w2: draw(out_dim * hidden_dim),
            b2: draw(out_dim),
        }
    }

    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        let (l, h, d) = (self.in_dim, self.hidden_dim, self.out_dim);
        let mut a = vec![0.0; h];
        for j in 0..h {
            let mut acc = self.b1[j];
            for i in 0..l {
                acc += self.w1[j * l + i] * z[i];
            }
            a[j] = acc.tanh();
        }
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut acc = self.b2[i];
            for j in 0..h {
                acc += self.w2[i * h + j] * a[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Backpropagates `g_y = ∂L/∂y` for one sample and accumulates
    /// parameter gradients.
    fn backward(&self, z: &[f64], g_y: &[f64], grad: &mut TransformGrad) {
        let (l, h, _d) = (self.in_dim, self.hidden_dim, self.out_dim);
        let mut a = vec![0.0; h];
        for j in 0..h {
            let mut acc = self.b1[j];
            for i in 0..l {
                acc += self.w1[j * l + i] * z[i];
            }
            a[j] = acc.tanh();
        }
        for (i, gy) in g_y.iter().enumerate() {
            for j in 0..h {
                grad.w2[i * h + j] += gy * a[j];
            }
            grad.b2[i] += gy;
        }
        for j in 0..h {
            let mut ga = 0.0;
            for (i, gy) in g_y.iter().enumerate() {
                ga += self.w2[i * h + j] * gy;
            }
            let gz = ga * (1.0 - a[j] * a[j]);
            for i in 0..l {
                grad.w1[j * l + i] += gz * z[i];
            }
            grad.b1[j] += gz;
        }
    }

    fn apply(&mut self, grad: &TransformGrad, lr: f64) {
        for (p, g) in self.w1.iter_mut().zip(&grad.w1) {
            *p -= lr * g;
        }
        for (p, g) in self.b1.iter_mut().zip(&grad.b1) {
            *p -= lr * g;
        }
        for (p, g) in self.w2.iter_mut().zip(&grad.w2) {
            *p -= lr * g;
        }
        for (p, g) in self.b2.iter_mut().zip(&grad.b2) {
            *p -= lr * g;
        }
    }
}

struct TransformGrad {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl TransformGrad {
    fn zeros(net: &TransformNet) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }
}

/// Generated dataset pair plus everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct NnDataset {
    pub pre_data: Vec<Vec<f64>>,
    pub post_data: Vec<Vec<f64>>,
    pub description: NnDatasetDescription,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NnDatasetDescription {
    /// Moment gap ‖μ̂1−μ̂2‖² + ‖Σ̂1−Σ̂2‖²_F before and after matching.
    pub initial_gap: f64,
    pub final_gap: f64,
    pub config: NnDatasetConfig,
    pub net_pre: TransformNet,
    pub net_post: TransformNet,
}

/// Sample mean and biased covariance of rows.
fn moments(rows: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = DVector::zeros(d);
    for r in rows {
        mean += DVector::from_row_slice(r);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let c = DVector::from_row_slice(r) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n;
    (mean, cov)
}

fn moment_gap(a: &(DVector<f64>, DMatrix<f64>), b: &(DVector<f64>, DMatrix<f64>)) -> f64 {
    let dm = &a.0 - &b.0;
    let dc = &a.1 - &b.1;
    dm.dot(&dm) + dc.iter().map(|v| v * v).sum::<f64>()
}

/// Draws latents, transforms them through the two networks, then runs
/// gradient descent on both networks' parameters to shrink the gap
/// between the two outputs' first and second moments. The underlying
/// distributions stay distinct; only the moments align.
pub fn gen_nn_dataset(config: &NnDatasetConfig) -> Result<NnDataset> {
    if config.latent_dim == 0 || config.output_dim == 0 || config.hidden_dim == 0 {
        return Err(Error::invalid("dataset dimensions must be positive"));
    }
    if config.n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let draw_latents = |seed: u64| -> Vec<Vec<f64>> {
        let mut rng = rng::rng_from_seed(seed);
        (0..config.n_samples)
            .map(|_| {
                (0..config.latent_dim)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect()
    };
    let z_pre = draw_latents(config.seed_latent_pre);
    let z_post = draw_latents(config.seed_latent_post);
    let mut net_pre = TransformNet::random(
        config.latent_dim,
        config.hidden_dim,
        config.output_dim,
        config.seed_net_pre,
    );
    let mut net_post = TransformNet::random(
        config.latent_dim,
        config.hidden_dim,
        config.output_dim,
        config.seed_net_post,
    );

    let outputs = |net: &TransformNet, zs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        zs.iter().map(|z| net.forward(z)).collect()
    };

    let mut y_pre = outputs(&net_pre, &z_pre);
    let mut y_post = outputs(&net_post, &z_post);
    let initial_gap = moment_gap(&moments(&y_pre), &moments(&y_post));

    let n = config.n_samples as f64;
    let mut final_gap = initial_gap;
    for step in 0..config.match_steps {
        let (m1, c1) = moments(&y_pre);
        let (m2, c2) = moments(&y_post);
        let gap = moment_gap(&(m1.clone(), c1.clone()), &(m2.clone(), c2.clone()));
        if !gap.is_finite() {
            return Err(Error::MatchingDiverged { step, loss: gap });
        }
        final_gap = gap;
        let dmean = &m1 - &m2; // ∂L/∂μ̂1 = 2·dmean, ∂L/∂μ̂2 = −2·dmean
        let dcov = &c1 - &c2; // ∂L/∂Σ̂1 = 2·dcov (Frobenius)
        let mut g_pre = TransformGrad::zeros(&net_pre);
        let mut g_post = TransformGrad::zeros(&net_post);
        for (z, y) in z_pre.iter().zip(&y_pre) {
            let yc = DVector::from_row_slice(y) - &m1;
            let gy = &dmean * (2.0 / n) + (&dcov * yc) * (4.0 / n);
            net_pre.backward(z, gy.as_slice(), &mut g_pre);
        }
        for (z, y) in z_post.iter().zip(&y_post) {
            let yc = DVector::from_row_slice(y) - &m2;
            let gy = &dmean * (-2.0 / n) + (&dcov * yc) * (-4.0 / n);
            net_post.backward(z, gy.as_slice(), &mut g_post);
        }
        net_pre.apply(&g_pre, config.match_lr);
        net_post.apply(&g_post, config.match_lr);
        y_pre = outputs(&net_pre, &z_pre);
        y_post = outputs(&net_post, &z_post);
    }
    if config.match_steps > 0 {
        final_gap = moment_gap(&moments(&y_pre), &moments(&y_post));
        if !final_gap.is_finite() {
            return Err(Error::MatchingDiverged {
                step: config.match_steps,
                loss: final_gap,
            });
        }
    }

    Ok(NnDataset {
        pre_data: y_pre,
        post_data: y_post,
        description: NnDatasetDescription {
            initial_gap,
            final_gap,
            config: config.clone(),
            net_pre,
            net_post,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_post_change_component_4() {
        let spec = ring_gmm_spec(&RingMixtureConfig::post_change()).unwrap();
        // i = 4 of 8: angle π, mean (8·cos π + ½, 8·sin π + ½) = (−7.5, 0.5).
        let m = &spec.components()[3].mean;
        assert!((m[0] - (-7.5)).abs() < 1e-12);
        assert!((m[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ring_pre_change_component_15() {
        let spec = ring_gmm_spec(&RingMixtureConfig::pre_change()).unwrap();
        // i = 15 of 30: angle π, mean (−8.5, −0.5).
        let m = &spec.components()[14].mean;
        assert!((m[0] - (-8.5)).abs() < 1e-12);
        assert!((m[1] - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn ring_weights_sum_to_one_and_means_on_circle() {
        for cfg in [
            RingMixtureConfig::pre_change(),
            RingMixtureConfig::post_change(),
        ] {
            let spec = ring_gmm_spec(&cfg).unwrap();
            let total: f64 = spec.components().iter().map(|c| c.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for c in spec.components() {
                let dx = c.mean[0] - cfg.offset;
                let dy = c.mean[1] - cfg.offset;
                assert!(((dx * dx + dy * dy).sqrt() - cfg.radius).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_pre_and_post_are_distinct() {
        let (pre, post) = ring_specs();
        let mut min_dist = f64::INFINITY;
        for a in pre.components() {
            for b in post.components() {
                let d = (&a.mean - &b.mean).norm();
                min_dist = min_dist.min(d);
            }
        }
        assert!(min_dist > 0.1, "closest means are {min_dist} apart");
    }

    #[test]
    fn sample_gmm_empty_and_deterministic() {
        let (pre, _) = ring_specs();
        assert!(sample_gmm(&pre, 0, 1).is_empty());
        assert_eq!(sample_gmm(&pre, 10, 5), sample_gmm(&pre, 10, 5));
    }

    #[test]
    fn sample_gmm_mean_within_clt_band() {
        let spec = GmmSpec::single(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let n = 10_000;
        let samples = sample_gmm(&spec, n, 9);
        for i in 0..2 {
            let mean: f64 = samples.iter().map(|x| x[i]).sum::<f64>() / n as f64;
            let se = 1.0 / (n as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "coord {i} mean {mean}");
        }
    }

    #[test]
    fn inject_noise_bookkeeping() {
        let x = [1.0, -2.0];
        let pairs = inject_noise(&x, 1e-12, 3, 7);
        assert_eq!(pairs.len(), 3);
        for (copy, eps) in &pairs {
            for i in 0..2 {
                assert!((copy[i] - x[i]).abs() < 1e-9);
                assert!((copy[i] - x[i] - eps[i]).abs() == 0.0);
            }
        }
    }

    #[test]
    fn inject_noise_variance_matches_sigma() {
        let x = [0.0];
        let sigma = 0.7;
        let n = 100_000;
        let pairs = inject_noise(&x, sigma, n, 11);
        let var: f64 = pairs.iter().map(|(_, e)| e[0] * e[0]).sum::<f64>() / n as f64;
        // SE of the sample variance of N(0,σ²) is σ²·√(2/n).
        let se = sigma * sigma * (2.0 / n as f64).sqrt();
        assert!((var - sigma * sigma).abs() < 3.0 * se);
    }

    #[test]
    fn nn_dataset_identical_seeds_have_zero_gap() {
        let cfg = NnDatasetConfig {
            n_samples: 200,
            match_steps: 0,
            seed_net_pre: 5,
            seed_net_post: 5,
            seed_latent_pre: 6,
            seed_latent_post: 6,
            ..NnDatasetConfig::default()
        };
        let ds = gen_nn_dataset(&cfg).unwrap();
        assert!(ds.description.initial_gap < 1e-20);
    }

    #[test]
    fn nn_dataset_matching_shrinks_gap_and_is_reproducible() {
        let cfg = NnDatasetConfig {
            n_samples: 400,
            match_steps: 200,
            ..NnDatasetConfig::default()
        };
        let ds = gen_nn_dataset(&cfg).unwrap();
        assert!(
            ds.description.final_gap < ds.description.initial_gap / 10.0,
            "gap {} -> {}",
            ds.description.initial_gap,
            ds.description.final_gap
        );
        let ds2 = gen_nn_dataset(&cfg).unwrap();
        assert_eq!(ds.pre_data, ds2.pre_data);
        assert_eq!(ds.post_data, ds2.post_data);
    }

    #[test]
    fn nn_dataset_distributions_stay_distinct_after_matching() {
        // Energy-distance permutation test on subsamples: the matched
        // datasets must still differ beyond their first two moments.
        let cfg = NnDatasetConfig {
            n_samples: 300,
            match_steps: 200,
            ..NnDatasetConfig::default()
        };
        let ds = gen_nn_dataset(&cfg).unwrap();
        let a = &ds.pre_data[..150];
        let b = &ds.post_data[..150];
        let observed = energy_distance(a, b);
        let mut pooled: Vec<Vec<f64>> = a.iter().chain(b.iter()).cloned().collect();
        let mut rng = rng::rng_from_seed(17);
        let mut perms = Vec::new();
        for _ in 0..99 {
            for i in (1..pooled.len()).rev() {
                let j = rng.random_range(0..=i);
                pooled.swap(i, j);
            }
            perms.push(energy_distance(&pooled[..150], &pooled[150..]));
        }
        perms.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let p95 = perms[94];
        assert!(
            observed > p95,
            "energy distance {observed} below permutation 95th pct {p95}"
        );
    }

    fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let d = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .zip(y)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        };
        let mut ab = 0.0;
        for x in a {
            for y in b {
                ab += d(x, y);
            }
        }
        ab *= 2.0 / (a.len() * b.len()) as f64;
        let mut aa = 0.0;
        for x in a {
            for y in a {
                aa += d(x, y);
            }
        }
        aa /= (a.len() * a.len()) as f64;
        let mut bb = 0.0;
        for x in b {
            for y in b {
                bb += d(x, y);
            }
        }
        bb /= (b.len() * b.len()) as f64;
        ab - aa - bb
    }
}
