//! Score functions, Hyvärinen scores, and Gaussian-mixture oracles.
//!
//! A [`ScoreFn`] is anything that can evaluate a (Stein) score
//! `s(x) = ∇ log p(x)` and its divergence. The Hyvärinen score
//! `H(x; s) = div s(x) + ½‖s(x)‖²` is computable from a score function
//! alone, without the density's normalizing constant; differences of
//! Hyvärinen scores are the detection increments used throughout the
//! crate. [`GmmSpec`] provides closed-form densities, scores and score
//! divergences for Gaussian mixtures, which serve as analytic oracles
//! for the exact detectors and for tests.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Evaluatable score function together with its divergence.
pub trait ScoreFn {
    fn dim(&self) -> usize;

    /// `s(x) = ∇ log p(x)`.
    fn score(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `div s(x) = Σ_i ∂s_i(x)/∂x_i`.
    fn score_divergence(&self, x: &[f64]) -> Result<f64>;
}

impl<T: ScoreFn + ?Sized> ScoreFn for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).score(x)
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        (**self).score_divergence(x)
    }
}

impl<T: ScoreFn + ?Sized> ScoreFn for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).score(x)
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        (**self).score_divergence(x)
    }
}

impl<T: ScoreFn + ?Sized> ScoreFn for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).score(x)
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        (**self).score_divergence(x)
    }
}

/// Shared, read-only score function handle.
pub type SharedScore = Arc<dyn ScoreFn + Send + Sync>;

/// Score function given by a pair of closures; mostly useful for analytic
/// references in tests and examples.
pub struct FnScore<S, D> {
    dim: usize,
    score: S,
    divergence: D,
}

impl<S, D> FnScore<S, D>
where
    S: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64]) -> f64,
{
    pub fn new(dim: usize, score: S, divergence: D) -> Self {
        Self {
            dim,
            score,
            divergence,
        }
    }
}

impl<S, D> ScoreFn for FnScore<S, D>
where
    S: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        Ok((self.score)(x))
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok((self.divergence)(x))
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Hyvärinen score `H(x; s) = div s(x) + ½‖s(x)‖²`.
pub fn hyvarinen_score<S: ScoreFn + ?Sized>(s: &S, x: &[f64]) -> Result<f64> {
    let sc = s.score(x)?;
    let div = s.score_divergence(x)?;
    let h = div + 0.5 * sc.iter().map(|v| v * v).sum::<f64>();
    if !h.is_finite() {
        return Err(Error::non_finite("hyvarinen_score"));
    }
    Ok(h)
}

/// Detection increment `Δ(x) = H(x; s0) − H(x; s1)`.
pub fn increment<S0, S1>(s0: &S0, s1: &S1, x: &[f64]) -> Result<f64>
where
    S0: ScoreFn + ?Sized,
    S1: ScoreFn + ?Sized,
{
    Ok(hyvarinen_score(s0, x)? - hyvarinen_score(s1, x)?)
}

/// One mixture component: weight, mean, covariance.
#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// A Gaussian mixture with cached Cholesky factorizations.
///
/// Densities are evaluated in log space with log-sum-exp stabilization;
/// the mixtures used around here put components many standard deviations
/// apart and naive density ratios underflow.
#[derive(Clone)]
pub struct GmmSpec {
    components: Vec<GmmComponent>,
    dim: usize,
    // Per component: Cholesky factor, log normalization constant,
    // trace of the precision matrix.
    chol: Vec<Cholesky<f64, Dyn>>,
    log_norm: Vec<f64>,
    prec_trace: Vec<f64>,
}

impl std::fmt::Debug for GmmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GmmSpec")
            .field("dim", &self.dim)
            .field("components", &self.components)
            .finish()
    }
}

const LOG_2PI: f64 = 1.837877066409345483560659472811;

impl GmmSpec {
    /// Builds a mixture from components, validating weights and
    /// covariances. Weights must sum to 1 within 1e-12; every covariance
    /// must be symmetric positive definite.
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let dim = components[0].mean.len();
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "mixture weights sum to {wsum}, expected 1"
            )));
        }
        let mut chol = Vec::with_capacity(components.len());
        let mut log_norm = Vec::with_capacity(components.len());
        let mut prec_trace = Vec::with_capacity(components.len());
        for c in &components {
            if c.weight < 0.0 || !c.weight.is_finite() {
                return Err(Error::invalid(format!("invalid weight {}", c.weight)));
            }
            if c.mean.len() != dim || c.cov.nrows() != dim || c.cov.ncols() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: c.mean.len().max(c.cov.nrows()),
                });
            }
            if c.mean.iter().any(|v| !v.is_finite()) || c.cov.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite mixture parameter"));
            }
            let asym = (&c.cov - c.cov.transpose()).abs().max();
            if asym > 1e-9 {
                return Err(Error::NotPositiveDefinite);
            }
            let fact = Cholesky::new(c.cov.clone()).ok_or(Error::NotPositiveDefinite)?;
            // ln|Σ| from the Cholesky diagonal.
            let log_det: f64 = fact.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            log_norm.push(-0.5 * (dim as f64 * LOG_2PI + log_det));
            let prec = fact.inverse();
            prec_trace.push(prec.trace());
            chol.push(fact);
        }
        Ok(Self {
            components,
            dim,
            chol,
            log_norm,
            prec_trace,
        })
    }

    /// Builds a mixture from plain arrays: `covs[i]` is row-major d×d.
    pub fn from_parts(
        weights: &[f64],
        means: &[Vec<f64>],
        covs: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::invalid(
                "weights, means and covariances must have equal length",
            ));
        }
        let components = weights
            .iter()
            .zip(means)
            .zip(covs)
            .map(|((&w, m), cv)| {
                let d = m.len();
                let mut cov = DMatrix::zeros(d, d);
                if cv.len() != d {
                    return Err(Error::DimMismatch {
                        expected: d,
                        got: cv.len(),
                    });
                }
                for (r, row) in cv.iter().enumerate() {
                    if row.len() != d {
                        return Err(Error::DimMismatch {
                            expected: d,
                            got: row.len(),
                        });
                    }
                    for (c, &v) in row.iter().enumerate() {
                        cov[(r, c)] = v;
                    }
                }
                Ok(GmmComponent {
                    weight: w,
                    mean: DVector::from_row_slice(m),
                    cov,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    /// Single Gaussian as a one-component mixture.
    pub fn single(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![GmmComponent {
            weight: 1.0,
            mean: DVector::from_vec(mean),
            cov,
        }])
    }

    /// Equal-weight isotropic mixture with common variance.
    pub fn isotropic(means: &[Vec<f64>], variance: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let k = means.len();
        let d = means[0].len();
        let components = means
            .iter()
            .map(|m| GmmComponent {
                weight: 1.0 / k as f64,
                mean: DVector::from_row_slice(m),
                cov: DMatrix::identity(d, d) * variance,
            })
            .collect();
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Log-density `log Σ_i π_i N(x; μ_i, Σ_i)`.
    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        let acts = self.log_weighted_densities(x)?;
        Ok(log_sum_exp(&acts))
    }

    /// `∇ log p(x)` in closed form.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (resp, grads) = self.responsibilities(x)?;
        let mut s = DVector::zeros(self.dim);
        for (r, g) in resp.iter().zip(&grads) {
            s += g * *r;
        }
        Ok(s.as_slice().to_vec())
    }

    /// `div ∇ log p(x)` in closed form.
    ///
    /// With responsibilities `r_i` and per-component gradients
    /// `g_i = −Σ_i⁻¹(x−μ_i)`:
    /// `div s = Σ_i r_i (g_iᵀg_i − tr Σ_i⁻¹) − ‖s‖²`.
    pub fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        let (resp, grads) = self.responsibilities(x)?;
        let mut s = DVector::zeros(self.dim);
        let mut acc = 0.0;
        for ((r, g), tr) in resp.iter().zip(&grads).zip(&self.prec_trace) {
            acc += r * (g.dot(g) - tr);
            s += g * *r;
        }
        Ok(acc - s.dot(&s))
    }

    /// The mixture convolved with `N(0, σ²I)`: same weights and means,
    /// every covariance inflated to `Σ_i + σ²I`.
    pub fn perturb(&self, sigma: f64) -> Result<GmmSpec> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise scale {sigma} must be ≥ 0")));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let bump = DMatrix::identity(self.dim, self.dim) * (sigma * sigma);
        let components = self
            .components
            .iter()
            .map(|c| GmmComponent {
                weight: c.weight,
                mean: c.mean.clone(),
                cov: &c.cov + &bump,
            })
            .collect();
        GmmSpec::new(components)
    }

    /// One draw: categorical component choice, then a Gaussian draw
    /// through the component's Cholesky factor.
    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            cum += c.weight;
            if u < cum {
                idx = i;
                break;
            }
        }
        let c = &self.components[idx];
        let z = DVector::from_fn(self.dim, |_, _| rng.sample(rand_distr::StandardNormal));
        let x = &c.mean + self.chol[idx].l() * z;
        x.as_slice().to_vec()
    }

    pub(crate) fn log_weighted_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        let xv = DVector::from_row_slice(x);
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let diff = &xv - &c.mean;
                let half = self.chol[i].l().solve_lower_triangular(&diff).ok_or(
                    Error::non_finite("gmm_logpdf triangular solve"),
                )?;
                let quad = half.dot(&half);
                Ok(c.weight.ln() + self.log_norm[i] - 0.5 * quad)
            })
            .collect()
    }

    /// Posterior component probabilities and per-component log-density
    /// gradients at `x`.
    fn responsibilities(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        let acts = self.log_weighted_densities(x)?;
        let lse = log_sum_exp(&acts);
        let resp: Vec<f64> = acts.iter().map(|a| (a - lse).exp()).collect();
        let xv = DVector::from_row_slice(x);
        let grads = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| -self.chol[i].solve(&(&xv - &c.mean)))
            .collect();
        Ok((resp, grads))
    }
}

impl ScoreFn for GmmSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        GmmSpec::score(self, x)
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        GmmSpec::score_divergence(self, x)
    }
}

/// Free-function aliases mirroring the mixture oracle operations.
pub fn gmm_logpdf(spec: &GmmSpec, x: &[f64]) -> Result<f64> {
    spec.logpdf(x)
}

pub fn gmm_score(spec: &GmmSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.score(x)
}

pub fn gmm_score_divergence(spec: &GmmSpec, x: &[f64]) -> Result<f64> {
    spec.score_divergence(x)
}

pub fn perturb_gmm(spec: &GmmSpec, sigma: f64) -> Result<GmmSpec> {
    spec.perturb(sigma)
}

/// Numerically stable `log Σ exp(a_i)`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Monte-Carlo estimate of `E_{x∼p}‖s1(x) − s0(x)‖²` from `n` draws of
/// `sample`.
pub fn fisher_divergence_mc<F, S0, S1>(
    mut sample: F,
    s0: &S0,
    s1: &S1,
    n: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    S0: ScoreFn + ?Sized,
    S1: ScoreFn + ?Sized,
{
    if n < 2 {
        return Err(Error::invalid("fisher_divergence_mc needs n ≥ 2"));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let x = sample(&mut rng);
        let a = s0.score(&x)?;
        let b = s1.score(&x)?;
        let v: f64 = a
            .iter()
            .zip(&b)
            .map(|(ai, bi)| (bi - ai) * (bi - ai))
            .sum();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var.max(0.0) / n as f64).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_normal_score(d: usize) -> impl ScoreFn {
        FnScore::new(
            d,
            |x: &[f64]| x.iter().map(|v| -v).collect(),
            move |_: &[f64]| -(d as f64),
        )
    }

    #[test]
    fn hyvarinen_standard_normal_2d() {
        let s = standard_normal_score(2);
        let h = hyvarinen_score(&s, &[1.0, 1.0]).unwrap();
        assert!((h - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn hyvarinen_zero_score_is_zero() {
        let s = FnScore::new(3, |x: &[f64]| vec![0.0; x.len()], |_: &[f64]| 0.0);
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]] {
            assert_eq!(hyvarinen_score(&s, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn hyvarinen_single_gaussian_closed_form() {
        // One component N(μ, Σ): H(x) = −tr(Σ⁻¹) + ½‖Σ⁻¹(x−μ)‖².
        let mut rng = rng::rng_from_seed(11);
        let mu = vec![0.3, -0.7];
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.1, 0.9]);
        let cov = &a * a.transpose() + DMatrix::identity(2, 2) * 0.5;
        let spec = GmmSpec::single(mu.clone(), cov.clone()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            let prec = cov.clone().try_inverse().unwrap();
            let diff = DVector::from_row_slice(&x) - DVector::from_row_slice(&mu);
            let g = &prec * diff;
            let expected = -prec.trace() + 0.5 * g.dot(&g);
            let h = hyvarinen_score(&spec, &x).unwrap();
            assert!((h - expected).abs() < 1e-10, "h={h} expected={expected}");
        }
    }

    #[test]
    fn increment_hand_example_1d() {
        // s0 for N(0,1), s1 for N(1,1), x = 1: Δ = −0.5 − (−1) = 0.5.
        let s0 = FnScore::new(1, |x: &[f64]| vec![-x[0]], |_: &[f64]| -1.0);
        let s1 = FnScore::new(1, |x: &[f64]| vec![-(x[0] - 1.0)], |_: &[f64]| -1.0);
        let d = increment(&s0, &s1, &[1.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn increment_antisymmetric_and_zero_on_identical() {
        let s0 = standard_normal_score(2);
        let s1 = FnScore::new(
            2,
            |x: &[f64]| vec![-(x[0] - 1.0), -x[1] * 0.5],
            |_: &[f64]| -1.5,
        );
        let x = [0.4, -1.3];
        assert_eq!(increment(&s0, &s0, &x).unwrap(), 0.0);
        let ab = increment(&s0, &s1, &x).unwrap();
        let ba = increment(&s1, &s0, &x).unwrap();
        assert!((ab + ba).abs() < 1e-15);
    }

    #[test]
    fn gmm_single_isotropic_score() {
        let spec = GmmSpec::single(vec![0.0, 0.0, 0.0], DMatrix::identity(3, 3)).unwrap();
        let x = [0.7, -2.0, 0.1];
        let s = spec.score(&x).unwrap();
        for (si, xi) in s.iter().zip(&x) {
            assert!((si + xi).abs() < 1e-12);
        }
        assert!((spec.score_divergence(&x).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn gmm_symmetric_two_component_score_zero_at_origin() {
        let spec = GmmSpec::isotropic(&[vec![-3.0], vec![3.0]], 1.0).unwrap();
        let s = spec.score(&[0.0]).unwrap();
        assert!(s[0].abs() < 1e-12);
    }

    #[test]
    fn gmm_score_is_gradient_of_logpdf() {
        let spec = random_spec_3(5);
        let mut rng = rng::rng_from_seed(99);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 3.0)
                .collect();
            let s = spec.score(&x).unwrap();
            let h = 1e-6;
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd =
                    (spec.logpdf(&xp).unwrap() - spec.logpdf(&xm).unwrap()) / (2.0 * h);
                assert!(
                    (s[i] - fd).abs() < 1e-6,
                    "coord {i}: analytic {} vs fd {fd}",
                    s[i]
                );
            }
        }
    }

    #[test]
    fn gmm_divergence_matches_finite_difference_of_score() {
        let spec = random_spec_3(17);
        let mut rng = rng::rng_from_seed(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 3.0)
                .collect();
            let div = spec.score_divergence(&x).unwrap();
            let h = 1e-6;
            let mut fd = 0.0;
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd += (spec.score(&xp).unwrap()[i] - spec.score(&xm).unwrap()[i]) / (2.0 * h);
            }
            assert!((div - fd).abs() < 1e-5, "analytic {div} vs fd {fd}");
        }
    }

    #[test]
    fn perturb_identity_and_gaussian_convolution() {
        let spec = GmmSpec::single(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let same = spec.perturb(0.0).unwrap();
        assert_eq!(same.components()[0].cov[(0, 0)], 1.0);
        let wide = spec.perturb(1.0).unwrap();
        assert!((wide.components()[0].cov[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn perturb_commutes_with_mixing() {
        // Perturbing each component separately equals perturbing the mixture.
        let spec = random_spec_3(23);
        let sigma = 0.7;
        let whole = spec.perturb(sigma).unwrap();
        for (i, c) in spec.components().iter().enumerate() {
            let single = GmmSpec::single(
                c.mean.as_slice().to_vec(),
                c.cov.clone(),
            )
            .unwrap()
            .perturb(sigma)
            .unwrap();
            let diff = (&whole.components()[i].cov - &single.components()[0].cov)
                .abs()
                .max();
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn perturb_sampling_moments_match() {
        // Sampling x∼spec and adding N(0, σ²I) matches the analytic
        // perturbed mixture's mean and per-coordinate variance.
        let spec = GmmSpec::isotropic(&[vec![-1.0], vec![2.0]], 0.5).unwrap();
        let sigma = 0.8;
        let pert = spec.perturb(sigma).unwrap();
        // Analytic moments of the perturbed mixture.
        let mean_a = 0.5 * (-1.0) + 0.5 * 2.0;
        let ex2: f64 = pert
            .components()
            .iter()
            .map(|c| c.weight * (c.cov[(0, 0)] + c.mean[0] * c.mean[0]))
            .sum();
        let var_a = ex2 - mean_a * mean_a;
        let n = 100_000;
        let mut rng = rng::rng_from_seed(314);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = spec.sample_one(&mut rng)[0]
                + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
            sum += x;
            sum_sq += x * x;
        }
        let mean_e = sum / n as f64;
        let var_e = sum_sq / n as f64 - mean_e * mean_e;
        let se_mean = (var_a / n as f64).sqrt();
        assert!((mean_e - mean_a).abs() < 3.0 * se_mean);
        // Rough SE for the variance of a mixture; 4th-moment bound.
        let se_var = var_a * (2.0 / n as f64).sqrt() * 3.0;
        assert!((var_e - var_a).abs() < 3.0 * se_var.max(0.01));
    }

    #[test]
    fn hyvarinen_invariant_under_component_permutation() {
        let spec = random_spec_3(41);
        let mut comps = spec.components().to_vec();
        comps.rotate_left(1);
        let rotated = GmmSpec::new(comps).unwrap();
        let x = [0.3, -0.9];
        let a = hyvarinen_score(&spec, &x).unwrap();
        let b = hyvarinen_score(&rotated, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fisher_mc_zero_for_identical() {
        let spec = random_spec_3(5);
        let est = fisher_divergence_mc(
            |rng| spec.sample_one(rng),
            &spec,
            &spec,
            100,
            1,
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn fisher_mc_gaussian_mean_shift() {
        // p1 = N(1,1), p0 = N(0,1): ‖s1−s0‖² ≡ 1.
        let s0 = FnScore::new(1, |x: &[f64]| vec![-x[0]], |_: &[f64]| -1.0);
        let s1 = FnScore::new(1, |x: &[f64]| vec![-(x[0] - 1.0)], |_: &[f64]| -1.0);
        let mut est = fisher_divergence_mc(
            |rng| vec![1.0 + rng.sample::<f64, _>(rand_distr::StandardNormal)],
            &s0,
            &s1,
            1000,
            2,
        )
        .unwrap();
        assert!((est.mean - 1.0).abs() <= 3.0 * est.std_error.max(1e-12));
        // Doubling the score difference quadruples the estimate.
        let s2 = FnScore::new(1, |x: &[f64]| vec![-(x[0] - 2.0)], |_: &[f64]| -1.0);
        est = fisher_divergence_mc(
            |rng| vec![1.0 + rng.sample::<f64, _>(rand_distr::StandardNormal)],
            &s0,
            &s2,
            1000,
            2,
        )
        .unwrap();
        assert!((est.mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spec_rejects_bad_weights_and_non_spd() {
        let bad = GmmSpec::from_parts(
            &[0.6, 0.6],
            &[vec![0.0], vec![1.0]],
            &[vec![vec![1.0]], vec![vec![1.0]]],
        );
        assert!(bad.is_err());
        let not_spd = GmmSpec::from_parts(&[1.0], &[vec![0.0, 0.0]], &[vec![
            vec![1.0, 2.0],
            vec![2.0, 1.0],
        ]]);
        assert!(matches!(not_spd, Err(Error::NotPositiveDefinite)));
    }

    fn random_spec_3(seed: u64) -> GmmSpec {
        let mut rng = rng::rng_from_seed(seed);
        let mut comps = Vec::new();
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for w in raw {
            let mean: Vec<f64> = (0..2)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 2.0)
                .collect();
            let a = DMatrix::from_fn(2, 2, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.5
            });
            let cov = &a * a.transpose() + DMatrix::identity(2, 2) * 0.4;
            comps.push(GmmComponent {
                weight: w / total,
                mean: DVector::from_vec(mean),
                cov,
            });
        }
        GmmSpec::new(comps).unwrap()
    }
}
