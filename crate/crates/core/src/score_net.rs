//! Parametric score model: a one-hidden-layer network `s(x; θ)` with
//! exact divergence, denoising score-matching loss/gradient, offline
//! training, and single-window online updates.
//!
//! Parameters are stored flat in the order `W1 (h×d, row-major), b1,
//! W2 (d×h, row-major), b2`; [`GradientSet`] mirrors the layout. All
//! gradients are exact backpropagation, checked against finite
//! differences in the tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{check_dim, ScoreFn};

/// Hidden-layer activation. Only `tanh` for now; the divergence and the
/// implicit score-matching gradient need first and second derivatives,
/// so additions must supply both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    #[inline]
    fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// First derivative expressed through the activation value `a`.
    #[inline]
    fn deriv_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }

    /// Second derivative expressed through the activation value `a`.
    #[inline]
    fn second_deriv_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// Per-dimension affine input standardization, fitted on a reference set
/// and stored with the model. The score and divergence of the
/// standardized network are mapped back to the original coordinates by
/// the chain rule (`1/scale` and `1/scale²` per dimension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Per-dimension mean and standard deviation of `data`, with the
    /// scale floored at 1e-12.
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("cannot fit standardizer on empty data"));
        }
        let d = data[0].len();
        let n = data.len() as f64;
        let mut shift = vec![0.0; d];
        for row in data {
            check_dim(d, row)?;
            for (s, v) in shift.iter_mut().zip(row) {
                *s += v;
            }
        }
        for s in shift.iter_mut() {
            *s /= n;
        }
        let mut scale = vec![0.0; d];
        for row in data {
            for ((sc, v), m) in scale.iter_mut().zip(row).zip(&shift) {
                *sc += (v - m) * (v - m);
            }
        }
        for sc in scale.iter_mut() {
            *sc = (*sc / n).sqrt().max(1e-12);
        }
        Ok(Self { shift, scale })
    }
}

/// One-hidden-layer score network `s(x) = W2·act(W1·x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    activation: Activation,
    sigma: f64,
    standardizer: Option<Standardizer>,
}

impl ScoreModel {
    /// All-zero parameters.
    pub fn zeros(input_dim: usize, hidden_dim: usize, sigma: f64) -> Result<Self> {
        Self::validate_shape(input_dim, hidden_dim, sigma)?;
        let n = param_count(input_dim, hidden_dim);
        Ok(Self {
            input_dim,
            hidden_dim,
            params: vec![0.0; n],
            activation: Activation::Tanh,
            sigma,
            standardizer: None,
        })
    }

    /// Seeded initialization: weights `N(0, 1/√fan_in)`, biases zero.
    pub fn random_init(
        input_dim: usize,
        hidden_dim: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(input_dim, hidden_dim, sigma)?;
        let mut rng = rng::rng_from_seed(seed);
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden_dim as f64).sqrt();
        let (d, h) = (input_dim, hidden_dim);
        for idx in 0..h * d {
            model.params[idx] = s1 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let w2_off = h * d + h;
        for idx in 0..d * h {
            model.params[w2_off + idx] = s2 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        Ok(model)
    }

    /// Builds a model from explicit parameter arrays (row-major `W1` of
    /// shape h×d, `b1` of length h, row-major `W2` of shape d×h, `b2` of
    /// length d).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        activation: Activation,
        sigma: f64,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        Self::validate_shape(input_dim, hidden_dim, sigma)?;
        let (d, h) = (input_dim, hidden_dim);
        if w1.len() != h * d || b1.len() != h || w2.len() != d * h || b2.len() != d {
            return Err(Error::invalid("parameter array shapes are inconsistent"));
        }
        if let Some(st) = &standardizer {
            if st.shift.len() != d || st.scale.len() != d {
                return Err(Error::invalid("standardizer dimension mismatch"));
            }
            if st.scale.iter().any(|s| !s.is_finite() || *s <= 0.0) {
                return Err(Error::invalid("standardizer scales must be positive"));
            }
        }
        let mut params = Vec::with_capacity(param_count(d, h));
        params.extend_from_slice(w1);
        params.extend_from_slice(b1);
        params.extend_from_slice(w2);
        params.extend_from_slice(b2);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite model parameter"));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            params,
            activation,
            sigma,
            standardizer,
        })
    }

    fn validate_shape(input_dim: usize, hidden_dim: usize, sigma: f64) -> Result<()> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise scale must be strictly positive, got {sigma}"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Training-time perturbation scale σ.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn set_standardizer(&mut self, st: Option<Standardizer>) {
        self.standardizer = st;
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.hidden_dim * self.input_dim]
    }

    pub fn b1(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim;
        &self.params[o..o + self.hidden_dim]
    }

    pub fn w2(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim + self.hidden_dim;
        &self.params[o..o + self.input_dim * self.hidden_dim]
    }

    pub fn b2(&self) -> &[f64] {
        let n = self.params.len();
        &self.params[n - self.input_dim..]
    }

    /// Total number of parameters (flat layout `W1, b1, W2, b2`).
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Flat parameter access, mainly for gradient checking and optimizers.
    pub fn param(&self, idx: usize) -> f64 {
        self.params[idx]
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        self.params[idx] = value;
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `s(x) = W2·act(W1·x + b1) + b2`, mapped through the standardizer
    /// when one is present.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x)?;
        let mut scratch = Scratch::new(self.input_dim, self.hidden_dim);
        self.forward_into(x, &mut scratch);
        Ok(scratch.y)
    }

    /// Exact divergence `Σ_i ∂s_i/∂x_i = tr(W2 · diag(act′(z)) · W1)`,
    /// scaled by `1/scale_i²` per output dimension under standardization.
    pub fn divergence(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim, x)?;
        let (d, h) = (self.input_dim, self.hidden_dim);
        let mut scratch = Scratch::new(d, h);
        self.forward_into(x, &mut scratch);
        let w1 = self.w1();
        let w2 = self.w2();
        let mut div = 0.0;
        for j in 0..h {
            let aj = scratch.a[j];
            let mut cj = 0.0;
            for i in 0..d {
                let inv_sq = match &self.standardizer {
                    Some(st) => 1.0 / (st.scale[i] * st.scale[i]),
                    None => 1.0,
                };
                cj += w2[i * h + j] * w1[j * d + i] * inv_sq;
            }
            div += self.activation.deriv_from_value(aj) * cj;
        }
        Ok(div)
    }

    /// Forward pass writing the intermediate values into `scratch`:
    /// standardized input `v`, activations `a`, output `y` (already
    /// mapped back to data coordinates).
    fn forward_into(&self, x: &[f64], scratch: &mut Scratch) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        match &self.standardizer {
            Some(st) => {
                for i in 0..d {
                    scratch.v[i] = (x[i] - st.shift[i]) / st.scale[i];
                }
            }
            None => scratch.v.copy_from_slice(x),
        }
        let w1 = self.w1();
        let b1 = self.b1();
        for j in 0..h {
            let mut z = b1[j];
            let row = &w1[j * d..(j + 1) * d];
            for i in 0..d {
                z += row[i] * scratch.v[i];
            }
            scratch.a[j] = self.activation.eval(z);
        }
        let w2 = self.w2();
        let b2 = self.b2();
        for i in 0..d {
            let mut y = b2[i];
            let row = &w2[i * h..(i + 1) * h];
            for j in 0..h {
                y += row[j] * scratch.a[j];
            }
            scratch.y[i] = match &self.standardizer {
                Some(st) => y / st.scale[i],
                None => y,
            };
        }
    }

    /// Accumulates the gradient of a squared-residual term into `grad`,
    /// given the forward scratch and `g_y = ∂L/∂y` in data coordinates.
    fn backward_into(&self, scratch: &Scratch, g_y: &[f64], grad: &mut GradientSet) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let w2 = self.w2();
        // dL/dy_net (network output before the 1/scale mapping).
        let mut g_ynet = vec![0.0; d];
        for i in 0..d {
            g_ynet[i] = match &self.standardizer {
                Some(st) => g_y[i] / st.scale[i],
                None => g_y[i],
            };
        }
        let (gw1, gb1, gw2, gb2) = grad.split_mut();
        let mut g_z = vec![0.0; h];
        for j in 0..h {
            let mut ga = 0.0;
            for i in 0..d {
                ga += w2[i * h + j] * g_ynet[i];
            }
            g_z[j] = ga * self.activation.deriv_from_value(scratch.a[j]);
        }
        for i in 0..d {
            for j in 0..h {
                gw2[i * h + j] += g_ynet[i] * scratch.a[j];
            }
            gb2[i] += g_ynet[i];
        }
        for j in 0..h {
            for i in 0..d {
                gw1[j * d + i] += g_z[j] * scratch.v[i];
            }
            gb1[j] += g_z[j];
        }
    }
}

impl ScoreFn for ScoreModel {
    fn dim(&self) -> usize {
        self.input_dim
    }
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }
    fn score_divergence(&self, x: &[f64]) -> Result<f64> {
        self.divergence(x)
    }
}

struct Scratch {
    v: Vec<f64>,
    a: Vec<f64>,
    y: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, h: usize) -> Self {
        Self {
            v: vec![0.0; d],
            a: vec![0.0; h],
            y: vec![0.0; d],
        }
    }
}

fn param_count(d: usize, h: usize) -> usize {
    h * d + h + d * h + d
}

/// Gradient with the same flat layout as the model parameters.
#[derive(Debug, Clone)]
pub struct GradientSet {
    input_dim: usize,
    hidden_dim: usize,
    values: Vec<f64>,
}

impl GradientSet {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            values: vec![0.0; param_count(input_dim, hidden_dim)],
        }
    }

    pub fn d_w1(&self) -> &[f64] {
        &self.values[..self.hidden_dim * self.input_dim]
    }

    pub fn d_b1(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim;
        &self.values[o..o + self.hidden_dim]
    }

    pub fn d_w2(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim + self.hidden_dim;
        &self.values[o..o + self.input_dim * self.hidden_dim]
    }

    pub fn d_b2(&self) -> &[f64] {
        let n = self.values.len();
        &self.values[n - self.input_dim..]
    }

    /// Flat view matching `ScoreModel::param` indices.
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let (w1, rest) = self.values.split_at_mut(h * d);
        let (b1, rest) = rest.split_at_mut(h);
        let (w2, b2) = rest.split_at_mut(d * h);
        (w1, b1, w2, b2)
    }
}

/// One noise draw attached to a data point: index of the point, index of
/// the draw, and the noise vector itself.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub point: usize,
    pub draw: usize,
    pub eps: Vec<f64>,
}

/// Draws `k` Gaussian `N(0, σ²I)` noise vectors per data point, in
/// point-major order, from a single seeded stream.
pub fn draw_noises(data: &[Vec<f64>], k: usize, sigma: f64, seed: u64) -> Vec<NoiseDraw> {
    let mut rng = rng::rng_from_seed(seed);
    let mut out = Vec::with_capacity(data.len() * k);
    for (j, x) in data.iter().enumerate() {
        for kk in 0..k {
            let eps: Vec<f64> = (0..x.len())
                .map(|_| sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            out.push(NoiseDraw {
                point: j,
                draw: kk,
                eps,
            });
        }
    }
    out
}

fn validate_noises(model: &ScoreModel, data: &[Vec<f64>], noises: &[NoiseDraw]) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    if noises.is_empty() || noises.len() % data.len() != 0 {
        return Err(Error::invalid(
            "noise draws must cover each data point with exactly K ≥ 1 draws",
        ));
    }
    let k = noises.len() / data.len();
    let mut counts = vec![0usize; data.len()];
    for nd in noises {
        if nd.point >= data.len() {
            return Err(Error::invalid(format!(
                "noise draw references point {} outside the data",
                nd.point
            )));
        }
        if nd.draw >= k {
            return Err(Error::invalid(format!(
                "noise draw index {} out of range (K = {k})",
                nd.draw
            )));
        }
        check_dim(model.input_dim(), &nd.eps)?;
        counts[nd.point] += 1;
    }
    if counts.iter().any(|&c| c != k) {
        return Err(Error::invalid(
            "noise draws must cover each data point with exactly K draws",
        ));
    }
    for row in data {
        check_dim(model.input_dim(), row)?;
    }
    Ok(k)
}

/// Denoising score-matching loss
/// `Σ_j Σ_k ‖ s(x_j + ε_jk; θ) + ε_jk/σ² ‖²`
/// with caller-supplied noise draws, so the value is a deterministic
/// function of `(model, data, noises)`.
pub fn dsm_loss(model: &ScoreModel, data: &[Vec<f64>], noises: &[NoiseDraw]) -> Result<f64> {
    validate_noises(model, data, noises)?;
    Ok(dsm_accumulate(model, data, noises, None))
}

/// Exact gradient of [`dsm_loss`] with respect to all parameters.
pub fn dsm_grad(
    model: &ScoreModel,
    data: &[Vec<f64>],
    noises: &[NoiseDraw],
) -> Result<GradientSet> {
    validate_noises(model, data, noises)?;
    let mut grad = GradientSet::zeros(model.input_dim(), model.hidden_dim());
    dsm_accumulate(model, data, noises, Some(&mut grad));
    Ok(grad)
}

/// Loss and gradient in a single pass (validated inputs assumed).
fn dsm_accumulate(
    model: &ScoreModel,
    data: &[Vec<f64>],
    noises: &[NoiseDraw],
    mut grad: Option<&mut GradientSet>,
) -> f64 {
    let d = model.input_dim();
    let inv_sigma_sq = 1.0 / (model.sigma() * model.sigma());
    let mut scratch = Scratch::new(d, model.hidden_dim());
    let mut u = vec![0.0; d];
    let mut g_y = vec![0.0; d];
    let mut loss = 0.0;
    for nd in noises {
        let x = &data[nd.point];
        for i in 0..d {
            u[i] = x[i] + nd.eps[i];
        }
        model.forward_into(&u, &mut scratch);
        let mut term = 0.0;
        for i in 0..d {
            let e = scratch.y[i] + nd.eps[i] * inv_sigma_sq;
            term += e * e;
            g_y[i] = 2.0 * e;
        }
        loss += term;
        if let Some(g) = grad.as_deref_mut() {
            model.backward_into(&scratch, &g_y, g);
        }
    }
    loss
}

/// Implicit (noise-free) score-matching objective
/// `Σ_j [ div s(x_j; θ) + ½‖s(x_j; θ)‖² ]`.
pub fn implicit_sm_loss(model: &ScoreModel, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let mut loss = 0.0;
    for x in data {
        let s = model.forward(x)?;
        loss += model.divergence(x)? + 0.5 * s.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(loss)
}

/// Exact gradient of [`implicit_sm_loss`].
///
/// The divergence term needs the second derivative of the activation:
/// with `c_j = Σ_i W2[i,j] W1[j,i] / scale_i²`,
/// `∂div/∂W2[i,j] = act′(z_j) W1[j,i]/scale_i²`,
/// `∂div/∂W1[j,i] = act′(z_j) W2[i,j]/scale_i² + act″(z_j) c_j v_i`,
/// `∂div/∂b1[j] = act″(z_j) c_j`.
pub fn implicit_sm_grad(model: &ScoreModel, data: &[Vec<f64>]) -> Result<GradientSet> {
    if data.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let (d, h) = (model.input_dim(), model.hidden_dim());
    let mut grad = GradientSet::zeros(d, h);
    let mut scratch = Scratch::new(d, h);
    let mut inv_sq = vec![1.0; d];
    if let Some(st) = model.standardizer() {
        for i in 0..d {
            inv_sq[i] = 1.0 / (st.scale[i] * st.scale[i]);
        }
    }
    for x in data {
        check_dim(d, x)?;
        model.forward_into(x, &mut scratch);
        // ½‖s‖² term: g_y = s.
        model.backward_into(&scratch, &scratch.y.clone(), &mut grad);
        // Divergence term.
        let w1: Vec<f64> = model.w1().to_vec();
        let w2: Vec<f64> = model.w2().to_vec();
        let act = model.activation();
        let (gw1, gb1, gw2, _gb2) = grad.split_mut();
        for j in 0..h {
            let aj = scratch.a[j];
            let da = act.deriv_from_value(aj);
            let dda = act.second_deriv_from_value(aj);
            let mut cj = 0.0;
            for i in 0..d {
                cj += w2[i * h + j] * w1[j * d + i] * inv_sq[i];
            }
            for i in 0..d {
                gw2[i * h + j] += da * w1[j * d + i] * inv_sq[i];
                gw1[j * d + i] += da * w2[i * h + j] * inv_sq[i] + dda * cj * scratch.v[i];
            }
            gb1[j] += dda * cj;
        }
    }
    Ok(grad)
}

/// Optimizer choice for offline training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainGradientDescent,
    AdaptiveMoment,
}

/// Full-batch by default; mini-batches re-shuffle every epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchPolicy {
    FullBatch,
    MiniBatch(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Noise draws per data point per epoch (K).
    pub noise_draws: usize,
    pub sigma: f64,
    pub optimizer: OptimizerKind,
    pub batch: BatchPolicy,
    pub rng_seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_draws == 0 {
            return Err(Error::invalid("noise_draws (K) must be ≥ 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and ≥ 0"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be strictly positive"));
        }
        if let BatchPolicy::MiniBatch(b) = self.batch {
            if b == 0 {
                return Err(Error::invalid("mini-batch size must be ≥ 1"));
            }
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-2,
            noise_draws: 1,
            sigma: 1.0,
            optimizer: OptimizerKind::AdaptiveMoment,
            batch: BatchPolicy::FullBatch,
            rng_seed: 0,
        }
    }
}

/// Initial model for offline training.
#[derive(Debug, Clone)]
pub enum TrainInit {
    /// Seeded random initialization with the given width; optionally fit
    /// an input standardizer on the training data first.
    Fresh {
        hidden_dim: usize,
        standardize: bool,
    },
    /// Continue from an existing model.
    Warm(ScoreModel),
}

/// Trained model plus the per-epoch loss trace.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: ScoreModel,
    pub loss_trace: Vec<f64>,
}

pub(crate) enum Objective {
    Denoising,
    ImplicitSm,
}

/// Offline training: `cfg.epochs` optimizer steps on the denoising
/// score-matching loss with fresh noise (K draws per point) every epoch.
pub fn train_offline(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    init: TrainInit,
) -> Result<TrainReport> {
    run_training(data, cfg, init, Objective::Denoising)
}

pub(crate) fn run_training(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    init: TrainInit,
    objective: Objective,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let d = data[0].len();
    for row in data {
        check_dim(d, row)?;
    }
    let mut model = match init {
        TrainInit::Fresh {
            hidden_dim,
            standardize,
        } => {
            let mut m =
                ScoreModel::random_init(d, hidden_dim, cfg.sigma, rng::split_seed(cfg.rng_seed, 0))?;
            if standardize {
                m.set_standardizer(Some(Standardizer::fit(data)?));
            }
            m
        }
        TrainInit::Warm(m) => {
            if m.input_dim() != d {
                return Err(Error::DimMismatch {
                    expected: m.input_dim(),
                    got: d,
                });
            }
            m
        }
    };

    let mut opt = OptimizerState::new(&model, cfg.optimizer);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let n = data.len();
    let batch_size = match cfg.batch {
        BatchPolicy::FullBatch => n,
        BatchPolicy::MiniBatch(b) => b.min(n),
    };
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        // Per-epoch substreams: 1.. for noise, a disjoint range for shuffling.
        let noises = match objective {
            Objective::Denoising => draw_noises(
                data,
                cfg.noise_draws,
                cfg.sigma,
                rng::split_seed(cfg.rng_seed, 1 + epoch as u64),
            ),
            Objective::ImplicitSm => Vec::new(),
        };
        if batch_size < n {
            let mut rng = rng::substream(cfg.rng_seed, 0x8000_0000 + epoch as u64);
            shuffle(&mut indices, &mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(batch_size) {
            let batch_data: Vec<Vec<f64>> = batch.iter().map(|&j| data[j].clone()).collect();
            let (loss, grad) = match objective {
                Objective::Denoising => {
                    let batch_noises: Vec<NoiseDraw> = batch
                        .iter()
                        .enumerate()
                        .flat_map(|(local, &j)| {
                            noises[j * cfg.noise_draws..(j + 1) * cfg.noise_draws]
                                .iter()
                                .map(move |nd| NoiseDraw {
                                    point: local,
                                    draw: nd.draw,
                                    eps: nd.eps.clone(),
                                })
                        })
                        .collect();
                    let mut g = GradientSet::zeros(model.input_dim(), model.hidden_dim());
                    let loss = dsm_accumulate(&model, &batch_data, &batch_noises, Some(&mut g));
                    (loss, g)
                }
                Objective::ImplicitSm => {
                    let g = implicit_sm_grad(&model, &batch_data)?;
                    (implicit_sm_loss(&model, &batch_data)?, g)
                }
            };
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            opt.step(&mut model, &grad, cfg.learning_rate);
            epoch_loss += loss;
        }
        loss_trace.push(epoch_loss);
    }
    Ok(TrainReport { model, loss_trace })
}

/// `steps` plain gradient-descent steps on the windowed denoising loss,
/// drawing fresh noise per step. Plain descent is used regardless of
/// `cfg.optimizer` so a step is exactly `θ ← θ − η ∇L`.
pub fn online_update(
    model: &ScoreModel,
    window: &[Vec<f64>],
    cfg: &TrainConfig,
    steps: usize,
) -> Result<ScoreModel> {
    cfg.validate()?;
    if window.is_empty() {
        return Err(Error::invalid("online update window is empty"));
    }
    let mut updated = model.clone();
    for step in 0..steps {
        let noises = draw_noises(
            window,
            cfg.noise_draws,
            cfg.sigma,
            rng::split_seed(cfg.rng_seed, step as u64),
        );
        let mut grad = GradientSet::zeros(updated.input_dim(), updated.hidden_dim());
        for row in window {
            check_dim(updated.input_dim(), row)?;
        }
        let loss = dsm_accumulate(&updated, window, &noises, Some(&mut grad));
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: step, loss });
        }
        let lr = cfg.learning_rate;
        for (p, g) in updated.params_mut().iter_mut().zip(grad.flat()) {
            *p -= lr * g;
        }
    }
    Ok(updated)
}

enum OptimizerState {
    Plain,
    Adam {
        m: Vec<f64>,
        v: Vec<f64>,
        t: usize,
    },
}

impl OptimizerState {
    fn new(model: &ScoreModel, kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::PlainGradientDescent => OptimizerState::Plain,
            OptimizerKind::AdaptiveMoment => OptimizerState::Adam {
                m: vec![0.0; model.param_count()],
                v: vec![0.0; model.param_count()],
                t: 0,
            },
        }
    }

    fn step(&mut self, model: &mut ScoreModel, grad: &GradientSet, lr: f64) {
        let g = grad.flat();
        match self {
            OptimizerState::Plain => {
                for (p, gi) in model.params_mut().iter_mut().zip(g) {
                    *p -= lr * gi;
                }
            }
            OptimizerState::Adam { m, v, t } => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                *t += 1;
                let bc1 = 1.0 - B1.powi(*t as i32);
                let bc2 = 1.0 - B2.powi(*t as i32);
                for ((p, gi), (mi, vi)) in model
                    .params_mut()
                    .iter_mut()
                    .zip(g)
                    .zip(m.iter_mut().zip(v.iter_mut()))
                {
                    *mi = B1 * *mi + (1.0 - B1) * gi;
                    *vi = B2 * *vi + (1.0 - B2) * gi * gi;
                    let mhat = *mi / bc1;
                    let vhat = *vi / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + EPS);
                }
            }
        }
    }
}

fn shuffle(indices: &mut [usize], rng: &mut rand_chacha::ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}
