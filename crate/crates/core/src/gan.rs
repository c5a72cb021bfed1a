//! Adversarial training of fully-connected generators.
//!
//! Two objectives are supported: the classic minimax ("naive") GAN loss with a
//! sigmoid critic, and the gradient-penalised Wasserstein loss with a linear
//! critic, optionally conditioned on label vectors concatenated to both
//! network inputs.  Both networks are optimised with RMSprop, training is
//! deterministic given the config seed, and trained models round-trip through
//! a JSON checkpoint file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, GradientSet, NodeId};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{self, Prng};

/// Checkpoint format revision understood by [`load_checkpoint`].
pub const CHECKPOINT_VERSION: u32 = 1;

/// Slack allowed before a sigmoid critic output is treated as misconfigured.
const OUTPUT_SLACK: f64 = 1e-9;
/// Floor applied to critic outputs before taking logs.
const LOGIT_FLOOR: f64 = 1e-12;

/// Activation applied between hidden layers. Fixed to ReLU; kept as an
/// explicit enum so checkpoints record it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
}

/// Activation applied by the final layer.
///
/// `Linear` and `Identity` are synonyms in effect (no nonlinearity); both are
/// accepted so configs can use whichever name reads better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalActivation {
    Sigmoid,
    Linear,
    Identity,
}

/// Architecture of a fully-connected network: layer widths from input to
/// output, ReLU between layers, and a configurable final activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub final_activation: FinalActivation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, final_activation: FinalActivation) -> Self {
        MlpSpec { layer_widths, hidden_activation: HiddenActivation::Relu, final_activation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least an input and an output layer, got widths {:?}",
                self.layer_widths
            )));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be positive, got {:?}", self.layer_widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }
}

/// A fully-connected network: spec plus per-layer weight matrices
/// (`in_width x out_width`) and bias rows (`1 x out_width`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub weights: Vec<Mat<f64>>,
    pub biases: Vec<Mat<f64>>,
}

impl Mlp {
    /// Glorot-uniform initialisation: weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero, drawn from `rng`.
    pub fn init(spec: MlpSpec, rng: &mut Prng) -> Result<Self> {
        spec.validate()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in spec.layer_widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data =
                (0..fan_in * fan_out).map(|_| (2.0 * rng::uniform_01(rng) - 1.0) * limit).collect();
            weights.push(Mat::from_vec(fan_in, fan_out, data));
            biases.push(Mat::zeros(1, fan_out));
        }
        Ok(Mlp { spec, weights, biases })
    }

    /// Assemble a network from explicit weights, checking shapes against the spec.
    pub fn from_parts(spec: MlpSpec, weights: Vec<Mat<f64>>, biases: Vec<Mat<f64>>) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layer_widths.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Config(format!(
                "expected {layers} weight and bias matrices, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in spec.layer_widths.windows(2).enumerate() {
            if (weights[l].rows(), weights[l].cols()) != (pair[0], pair[1]) {
                return Err(Error::Config(format!(
                    "weight {l} is {}x{}, spec requires {}x{}",
                    weights[l].rows(), weights[l].cols(), pair[0], pair[1]
                )));
            }
            if (biases[l].rows(), biases[l].cols()) != (1, pair[1]) {
                return Err(Error::Config(format!(
                    "bias {l} is {}x{}, spec requires 1x{}",
                    biases[l].rows(), biases[l].cols(), pair[1]
                )));
            }
        }
        Ok(Mlp { spec, weights, biases })
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Create one graph node per weight and bias, in layer order
    /// (`w0, b0, w1, b1, ...`). Trainable parameters get names under `prefix`;
    /// otherwise the values enter the graph as constants.
    fn param_nodes(&self, g: &mut Graph<f64>, trainable: Option<&str>) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(2 * self.num_layers());
        for l in 0..self.num_layers() {
            match trainable {
                Some(prefix) => {
                    nodes.push(g.parameter(&format!("{prefix}.w{l}"), self.weights[l].clone()));
                    nodes.push(g.parameter(&format!("{prefix}.b{l}"), self.biases[l].clone()));
                }
                None => {
                    nodes.push(g.constant(self.weights[l].clone()));
                    nodes.push(g.constant(self.biases[l].clone()));
                }
            }
        }
        nodes
    }

    /// Extend the graph with this network's forward pass from `input`, reusing
    /// previously created parameter nodes.
    fn forward_nodes(&self, g: &mut Graph<f64>, input: NodeId, params: &[NodeId]) -> Result<NodeId> {
        let mut h = input;
        for l in 0..self.num_layers() {
            let z = g.matmul(h, params[2 * l])?;
            let z = g.add_bias(z, params[2 * l + 1])?;
            h = if l + 1 < self.num_layers() {
                g.relu(z)
            } else {
                match self.spec.final_activation {
                    FinalActivation::Sigmoid => g.sigmoid(z),
                    FinalActivation::Linear | FinalActivation::Identity => z,
                }
            };
        }
        Ok(h)
    }

    /// Evaluate the network on a batch (rows are samples).
    ///
    /// Runs through the graph machinery so the arithmetic is identical to the
    /// training-time forward pass.
    pub fn forward(&self, input: &Mat<f64>) -> Result<Mat<f64>> {
        let mut g = Graph::new();
        let inp = g.constant(input.clone());
        let params = self.param_nodes(&mut g, None);
        let out = self.forward_nodes(&mut g, inp, &params)?;
        Ok(g.value(out).clone())
    }
}

/// Which adversarial objective a training run optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    NaiveGan,
    WganGp,
}

/// Hyper-parameters of a training run. `condition_vocab` is present iff the
/// model is conditional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub iterations: usize,
    pub batch_size: usize,
    pub noise_dim: usize,
    pub lambda_gp: f64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub critic_steps_per_generator_step: usize,
    pub seed: u64,
    pub condition_vocab: Option<Vec<String>>,
}

impl TrainConfig {
    /// A config with the optimiser defaults (RMSprop decay 0.9, epsilon 1e-8,
    /// learning rate 1e-3, one critic step per generator step, no penalty,
    /// unconditional).
    pub fn new(objective: Objective, iterations: usize, batch_size: usize, noise_dim: usize, seed: u64) -> Self {
        TrainConfig {
            objective,
            iterations,
            batch_size,
            noise_dim,
            lambda_gp: if objective == Objective::WganGp { 1.0 } else { 0.0 },
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            critic_steps_per_generator_step: 1,
            seed,
            condition_vocab: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.noise_dim == 0 {
            return Err(Error::Config("noise_dim must be positive".into()));
        }
        if self.lambda_gp < 0.0 || !self.lambda_gp.is_finite() {
            return Err(Error::Config(format!("lambda_gp must be finite and nonnegative, got {}", self.lambda_gp)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(Error::Config(format!("rmsprop_decay must lie in (0,1), got {}", self.rmsprop_decay)));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return Err(Error::Config(format!("rmsprop_epsilon must be positive, got {}", self.rmsprop_epsilon)));
        }
        if self.critic_steps_per_generator_step == 0 {
            return Err(Error::Config("critic_steps_per_generator_step must be positive".into()));
        }
        if let Some(vocab) = &self.condition_vocab {
            if vocab.is_empty() {
                return Err(Error::Config("condition_vocab, when present, must be nonempty".into()));
            }
        }
        Ok(())
    }

    fn vocab_len(&self) -> usize {
        self.condition_vocab.as_ref().map_or(0, |v| v.len())
    }
}

/// A multi-hot label encoding over a condition vocabulary; entries are 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector {
    pub bits: Vec<f64>,
}

impl ConditionVector {
    pub fn new(bits: Vec<f64>) -> Result<Self> {
        if bits.iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(Error::Config(format!("condition entries must be 0 or 1, got {bits:?}")));
        }
        Ok(ConditionVector { bits })
    }

    /// Encode a set of labels against an ordered vocabulary.
    pub fn from_labels(labels: &[&str], vocab: &[String]) -> Result<Self> {
        let mut bits = vec![0.0; vocab.len()];
        for label in labels {
            match vocab.iter().position(|v| v == label) {
                Some(i) => bits[i] = 1.0,
                None => {
                    return Err(Error::UnknownLabel {
                        label: (*label).to_string(),
                        vocabulary: vocab.join(", "),
                    })
                }
            }
        }
        Ok(ConditionVector { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The condition repeated as `n` identical matrix rows.
    pub fn repeat_rows(&self, n: usize) -> Mat<f64> {
        let mut data = Vec::with_capacity(n * self.bits.len());
        for _ in 0..n {
            data.extend_from_slice(&self.bits);
        }
        Mat::from_vec(n, self.bits.len(), data)
    }
}

/// Per-iteration loss values recorded during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub critic: f64,
    pub generator: f64,
}

/// A trained (or freshly initialised) model pair plus everything needed to
/// reproduce it: specs, weights, config, and the loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub generator: Mlp,
    pub critic: Mlp,
    pub config: TrainConfig,
    pub loss_trace: Vec<LossPoint>,
}

impl ModelCheckpoint {
    pub fn is_conditional(&self) -> bool {
        self.config.condition_vocab.is_some()
    }

    /// Width of the samples the generator emits.
    pub fn sample_width(&self) -> usize {
        self.generator.spec.output_width()
    }
}

/// Minimax-GAN losses from critic outputs on real and generated batches:
/// `critic = -mean(log D(x)) - mean(log(1 - D(G(z))))` and the non-saturating
/// `generator = -mean(log D(G(z)))`.
pub fn naive_gan_losses(critic_out_real: &[f64], critic_out_fake: &[f64]) -> Result<(f64, f64)> {
    if critic_out_real.is_empty() || critic_out_fake.is_empty() {
        return Err(Error::Shape { op: "naive_gan_losses", detail: "empty critic output".into() });
    }
    let checked = |v: f64| -> Result<f64> {
        if !(v > -OUTPUT_SLACK && v < 1.0 + OUTPUT_SLACK) {
            return Err(Error::Domain {
                op: "naive_gan_losses",
                detail: format!(
                    "critic output {v} lies outside (0,1); the naive objective needs a sigmoid critic"
                ),
            });
        }
        Ok(v.clamp(LOGIT_FLOOR, 1.0 - LOGIT_FLOOR))
    };
    let mut log_real = 0.0;
    for &v in critic_out_real {
        log_real += checked(v)?.ln();
    }
    let mut log_fake = 0.0;
    let mut log_one_minus_fake = 0.0;
    for &v in critic_out_fake {
        let v = checked(v)?;
        log_fake += v.ln();
        log_one_minus_fake += (1.0 - v).ln();
    }
    let critic_loss =
        -log_real / critic_out_real.len() as f64 - log_one_minus_fake / critic_out_fake.len() as f64;
    let generator_loss = -log_fake / critic_out_fake.len() as f64;
    Ok((critic_loss, generator_loss))
}

/// Per-row convex combination `eps_i * real_i + (1 - eps_i) * fake_i`.
pub fn interpolate(real: &Mat<f64>, fake: &Mat<f64>, eps: &[f64]) -> Result<Mat<f64>> {
    if (real.rows(), real.cols()) != (fake.rows(), fake.cols()) {
        return Err(Error::Shape {
            op: "interpolate",
            detail: format!("real is {}x{}, fake is {}x{}", real.rows(), real.cols(), fake.rows(), fake.cols()),
        });
    }
    if eps.len() != real.rows() {
        return Err(Error::Shape {
            op: "interpolate",
            detail: format!("{} mixing draws for {} rows", eps.len(), real.rows()),
        });
    }
    let mut out = Mat::zeros(real.rows(), real.cols());
    for (i, &e) in eps.iter().enumerate() {
        for (o, (&r, &f)) in out.row_mut(i).iter_mut().zip(real.row(i).iter().zip(fake.row(i))) {
            *o = e * r + (1.0 - e) * f;
        }
    }
    Ok(out)
}

/// Everything needed to take one optimisation step on one network.
struct LossGraph {
    graph: Graph<f64>,
    loss: NodeId,
    params: Vec<NodeId>,
}

impl LossGraph {
    fn loss_value(&self) -> f64 {
        self.graph.value(self.loss)[(0, 0)]
    }
}

fn attach_condition(g: &mut Graph<f64>, x: NodeId, cond: Option<NodeId>) -> Result<NodeId> {
    match cond {
        Some(c) => g.concat_cols(x, c),
        None => Ok(x),
    }
}

/// How the Wasserstein critic objective is written down.
///
/// `EquationValue` is the conventional presentation
/// `mean(1 - D(G(z|y))) - mean(D(x|y)) + lambda * penalty`; it is what
/// [`wgan_gp_critic_loss`] reports. Gradient descent on that expression would
/// push the critic up on generated samples, so the training step instead
/// descends `TrainingDescent`, `mean(D(G(z|y))) - mean(D(x|y)) + lambda *
/// penalty` — the maximisation of `mean(D(x)) - mean(D(G(z)))` minus the
/// penalty, written as a loss. The two differ only in the sign and constant
/// of the generated-sample term.
#[derive(Clone, Copy, PartialEq, Eq)]
enum CriticLossForm {
    EquationValue,
    TrainingDescent,
}

/// Critic-side loss for the gradient-penalised Wasserstein objective, with
/// `penalty = mean((||grad_xhat D(xhat|y)|| - 1)^2)` and
/// `xhat = eps*x + (1-eps)*G(z|y)` per row.
///
/// `lambda = None` omits the penalty nodes entirely (used to verify that a
/// zero coefficient is exactly neutral). The penalty gradient is itself part
/// of the graph, so `backward` on the returned loss differentiates through it.
#[allow(clippy::too_many_arguments)]
fn wgan_critic_loss_graph(
    critic: &Mlp,
    generator: &Mlp,
    real: &Mat<f64>,
    cond: Option<&Mat<f64>>,
    lambda_gp: Option<f64>,
    z: &Mat<f64>,
    eps: &[f64],
    form: CriticLossForm,
    trainable: bool,
) -> Result<LossGraph> {
    let gen_in = match cond {
        Some(c) => z.hstack(c),
        None => z.clone(),
    };
    let fake = generator.forward(&gen_in)?;
    let xhat = interpolate(real, &fake, eps)?;

    let mut g = Graph::new();
    let cond_node = cond.map(|c| g.constant(c.clone()));
    let params = critic.param_nodes(&mut g, trainable.then_some("critic"));

    let real_node = g.constant(real.clone());
    let real_in = attach_condition(&mut g, real_node, cond_node)?;
    let d_real = critic.forward_nodes(&mut g, real_in, &params)?;

    let fake_node = g.constant(fake);
    let fake_in = attach_condition(&mut g, fake_node, cond_node)?;
    let d_fake = critic.forward_nodes(&mut g, fake_in, &params)?;

    let m_fake = g.mean_rows(d_fake);
    let m_real = g.mean_rows(d_real);
    let fake_term = match form {
        CriticLossForm::EquationValue => {
            let neg = g.scalar_mul(m_fake, -1.0);
            g.scalar_add(neg, 1.0)
        }
        CriticLossForm::TrainingDescent => m_fake,
    };
    let neg_real = g.scalar_mul(m_real, -1.0);
    let mut loss = g.add(fake_term, neg_real)?;

    if let Some(lambda) = lambda_gp {
        let xhat_in = g.input(xhat);
        let hat_in = attach_condition(&mut g, xhat_in, cond_node)?;
        let d_hat = critic.forward_nodes(&mut g, hat_in, &params)?;
        let total_hat = g.sum_rows(d_hat);
        let grad_xhat = g.input_gradient_node(total_hat, xhat_in)?;
        let norms = g.row_norm(grad_xhat);
        let shifted = g.scalar_add(norms, -1.0);
        let sq = g.square(shifted);
        let penalty = g.mean_rows(sq);
        let weighted = g.scalar_mul(penalty, lambda);
        loss = g.add(loss, weighted)?;
    }

    Ok(LossGraph { graph: g, loss, params })
}

/// Generator-side Wasserstein loss `-mean(D(G(z|y)))` with the critic frozen.
fn wgan_generator_loss_graph(
    generator: &Mlp,
    critic: &Mlp,
    cond: Option<&Mat<f64>>,
    z: &Mat<f64>,
) -> Result<LossGraph> {
    let mut g = Graph::new();
    let cond_node = cond.map(|c| g.constant(c.clone()));
    let gparams = generator.param_nodes(&mut g, Some("generator"));
    let cparams = critic.param_nodes(&mut g, None);

    let z_node = g.constant(z.clone());
    let gen_in = attach_condition(&mut g, z_node, cond_node)?;
    let fake = generator.forward_nodes(&mut g, gen_in, &gparams)?;
    let fake_in = attach_condition(&mut g, fake, cond_node)?;
    let d_fake = critic.forward_nodes(&mut g, fake_in, &cparams)?;
    let m = g.mean_rows(d_fake);
    let loss = g.scalar_mul(m, -1.0);
    Ok(LossGraph { graph: g, loss, params: gparams })
}

/// Critic-side naive loss `-mean(log D(x|y)) - mean(log(1 - D(G(z|y))))`.
fn naive_critic_loss_graph(
    critic: &Mlp,
    generator: &Mlp,
    real: &Mat<f64>,
    cond: Option<&Mat<f64>>,
    z: &Mat<f64>,
) -> Result<LossGraph> {
    let gen_in = match cond {
        Some(c) => z.hstack(c),
        None => z.clone(),
    };
    let fake = generator.forward(&gen_in)?;

    let mut g = Graph::new();
    let cond_node = cond.map(|c| g.constant(c.clone()));
    let params = critic.param_nodes(&mut g, Some("critic"));

    let real_node = g.constant(real.clone());
    let real_in = attach_condition(&mut g, real_node, cond_node)?;
    let d_real = critic.forward_nodes(&mut g, real_in, &params)?;

    let fake_node = g.constant(fake);
    let fake_in = attach_condition(&mut g, fake_node, cond_node)?;
    let d_fake = critic.forward_nodes(&mut g, fake_in, &params)?;

    let log_real = g.log(d_real);
    let m_log_real = g.mean_rows(log_real);
    let one_minus_fake = {
        let neg = g.scalar_mul(d_fake, -1.0);
        g.scalar_add(neg, 1.0)
    };
    let log_omf = g.log(one_minus_fake);
    let m_log_omf = g.mean_rows(log_omf);
    let sum = g.add(m_log_real, m_log_omf)?;
    let loss = g.scalar_mul(sum, -1.0);
    Ok(LossGraph { graph: g, loss, params })
}

/// Generator-side non-saturating naive loss `-mean(log D(G(z|y)))`.
fn naive_generator_loss_graph(
    generator: &Mlp,
    critic: &Mlp,
    cond: Option<&Mat<f64>>,
    z: &Mat<f64>,
) -> Result<LossGraph> {
    let mut g = Graph::new();
    let cond_node = cond.map(|c| g.constant(c.clone()));
    let gparams = generator.param_nodes(&mut g, Some("generator"));
    let cparams = critic.param_nodes(&mut g, None);

    let z_node = g.constant(z.clone());
    let gen_in = attach_condition(&mut g, z_node, cond_node)?;
    let fake = generator.forward_nodes(&mut g, gen_in, &gparams)?;
    let fake_in = attach_condition(&mut g, fake, cond_node)?;
    let d_fake = critic.forward_nodes(&mut g, fake_in, &cparams)?;
    let log_fake = g.log(d_fake);
    let m = g.mean_rows(log_fake);
    let loss = g.scalar_mul(m, -1.0);
    Ok(LossGraph { graph: g, loss, params: gparams })
}

/// Evaluate the critic-side Wasserstein loss on one batch, drawing the noise
/// batch and the per-row interpolation mix from `rng`.
pub fn wgan_gp_critic_loss(
    critic: &Mlp,
    generator: &Mlp,
    real_batch: &Mat<f64>,
    condition: Option<&ConditionVector>,
    lambda_gp: f64,
    rng: &mut Prng,
) -> Result<f64> {
    if lambda_gp < 0.0 || !lambda_gp.is_finite() {
        return Err(Error::Config(format!("lambda_gp must be finite and nonnegative, got {lambda_gp}")));
    }
    if critic.spec.final_activation == FinalActivation::Sigmoid {
        return Err(Error::Config(
            "the Wasserstein critic must end in a linear layer, not a sigmoid".into(),
        ));
    }
    let cond_width = condition.map_or(0, |c| c.len());
    let noise_dim = generator.spec.input_width().checked_sub(cond_width).ok_or_else(|| {
        Error::Config(format!(
            "condition width {cond_width} exceeds the generator input width {}",
            generator.spec.input_width()
        ))
    })?;
    let n = real_batch.rows();
    let z = Mat::from_vec(n, noise_dim, rng::standard_normals(rng, n * noise_dim));
    let eps: Vec<f64> = (0..n).map(|_| rng::uniform_01(rng)).collect();
    let cond_rows = condition.map(|c| c.repeat_rows(n));
    let lg = wgan_critic_loss_graph(
        critic,
        generator,
        real_batch,
        cond_rows.as_ref(),
        Some(lambda_gp),
        &z,
        &eps,
        CriticLossForm::EquationValue,
        false,
    )?;
    Ok(lg.loss_value())
}

/// Squared-gradient accumulators, one per parameter matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmspropState {
    pub accum: Vec<Mat<f64>>,
}

impl RmspropState {
    /// Zero accumulators matching a network's parameters in layer order
    /// (`w0, b0, w1, b1, ...`).
    pub fn for_mlp(mlp: &Mlp) -> Self {
        let mut accum = Vec::with_capacity(2 * mlp.num_layers());
        for l in 0..mlp.num_layers() {
            accum.push(Mat::zeros(mlp.weights[l].rows(), mlp.weights[l].cols()));
            accum.push(Mat::zeros(1, mlp.biases[l].cols()));
        }
        RmspropState { accum }
    }
}

/// One RMSprop update on a single parameter matrix:
/// `v <- decay*v + (1-decay)*g^2`, `theta <- theta - lr*g/(sqrt(v) + epsilon)`.
pub fn rmsprop_update(
    param: &mut Mat<f64>,
    grad: &Mat<f64>,
    accum: &mut Mat<f64>,
    name: &str,
    lr: f64,
    decay: f64,
    epsilon: f64,
) -> Result<()> {
    if (param.rows(), param.cols()) != (grad.rows(), grad.cols()) || (param.rows(), param.cols()) != (accum.rows(), accum.cols()) {
        return Err(Error::Shape {
            op: "rmsprop_update",
            detail: format!(
                "parameter {name}: param {}x{}, grad {}x{}, accum {}x{}",
                param.rows(), param.cols(), grad.rows(), grad.cols(), accum.rows(), accum.cols()
            ),
        });
    }
    if !grad.all_finite() {
        return Err(Error::NonFiniteGradient { name: name.to_string() });
    }
    for ((p, &g), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(accum.as_mut_slice())
    {
        *v = decay * *v + (1.0 - decay) * g * g;
        *p -= lr * g / (v.sqrt() + epsilon);
    }
    Ok(())
}

/// RMSprop step over a whole network. `grads` follows the layer order
/// `w0, b0, w1, b1, ...` produced by the loss graphs.
pub fn rmsprop_step(
    mlp: &mut Mlp,
    grads: &[Mat<f64>],
    state: &mut RmspropState,
    lr: f64,
    decay: f64,
    epsilon: f64,
) -> Result<()> {
    if grads.len() != 2 * mlp.num_layers() || state.accum.len() != 2 * mlp.num_layers() {
        return Err(Error::Shape {
            op: "rmsprop_step",
            detail: format!(
                "{} gradients and {} accumulators for {} layers",
                grads.len(),
                state.accum.len(),
                mlp.num_layers()
            ),
        });
    }
    for l in 0..mlp.num_layers() {
        rmsprop_update(
            &mut mlp.weights[l],
            &grads[2 * l],
            &mut state.accum[2 * l],
            &format!("w{l}"),
            lr,
            decay,
            epsilon,
        )?;
        rmsprop_update(
            &mut mlp.biases[l],
            &grads[2 * l + 1],
            &mut state.accum[2 * l + 1],
            &format!("b{l}"),
            lr,
            decay,
            epsilon,
        )?;
    }
    Ok(())
}

fn ordered_grads(grads: &GradientSet<f64>, params: &[NodeId]) -> Vec<Mat<f64>> {
    params.iter().map(|&p| grads.get(p).clone()).collect()
}

fn batch_indices(rng: &mut Prng, rows: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows).collect();
    rng::partial_shuffle(rng, &mut idx, k);
    idx.truncate(k);
    idx
}

fn train_validate(
    data: &Mat<f64>,
    conditions: Option<&Mat<f64>>,
    spec_g: &MlpSpec,
    spec_d: &MlpSpec,
    config: &TrainConfig,
) -> Result<()> {
    config.validate()?;
    spec_g.validate()?;
    spec_d.validate()?;
    if data.rows() == 0 {
        return Err(Error::Config("training data is empty".into()));
    }
    if config.batch_size > data.rows() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} available rows; draw a larger pool or shrink the batch",
            config.batch_size, data.rows()
        )));
    }
    let vocab_len = config.vocab_len();
    match (conditions, &config.condition_vocab) {
        (Some(_), None) => {
            return Err(Error::Config("per-row conditions supplied but condition_vocab is absent".into()))
        }
        (None, Some(_)) => {
            return Err(Error::Config("condition_vocab is set but no per-row conditions were supplied".into()))
        }
        _ => {}
    }
    if let Some(c) = conditions {
        if c.rows() != data.rows() || c.cols() != vocab_len {
            return Err(Error::Shape {
                op: "train",
                detail: format!(
                    "conditions are {}x{}, expected {}x{vocab_len}",
                    c.rows(), c.cols(), data.rows()
                ),
            });
        }
        if c.as_slice().iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(Error::Config("condition entries must be 0 or 1".into()));
        }
    }
    if spec_g.input_width() != config.noise_dim + vocab_len {
        return Err(Error::Config(format!(
            "generator input width {} must equal noise_dim {} plus condition width {vocab_len}",
            spec_g.input_width(),
            config.noise_dim
        )));
    }
    if spec_g.output_width() != data.cols() {
        return Err(Error::Config(format!(
            "generator output width {} does not match the data width {}",
            spec_g.output_width(),
            data.cols()
        )));
    }
    if spec_d.input_width() != data.cols() + vocab_len {
        return Err(Error::Config(format!(
            "critic input width {} must equal data width {} plus condition width {vocab_len}",
            spec_d.input_width(),
            data.cols()
        )));
    }
    if spec_d.output_width() != 1 {
        return Err(Error::Config(format!("the critic must emit one value per row, got width {}", spec_d.output_width())));
    }
    match config.objective {
        Objective::NaiveGan => {
            if spec_d.final_activation != FinalActivation::Sigmoid {
                return Err(Error::Config("the naive objective needs a sigmoid critic".into()));
            }
        }
        Objective::WganGp => {
            if spec_d.final_activation == FinalActivation::Sigmoid {
                return Err(Error::Config(
                    "the Wasserstein critic must end in a linear layer, not a sigmoid".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Train a generator/critic pair on `data` (rows are samples), with optional
/// per-row condition encodings. Deterministic given `config.seed`; minibatches
/// are drawn without replacement each iteration.
pub fn train(
    data: &Mat<f64>,
    conditions: Option<&Mat<f64>>,
    spec_g: &MlpSpec,
    spec_d: &MlpSpec,
    config: &TrainConfig,
) -> Result<ModelCheckpoint> {
    train_validate(data, conditions, spec_g, spec_d, config)?;

    let mut init_rng = rng::prng(rng::derive_seed(config.seed, &[0]));
    let mut batch_rng = rng::prng(rng::derive_seed(config.seed, &[1]));
    let mut noise_rng = rng::prng(rng::derive_seed(config.seed, &[2]));
    let mut eps_rng = rng::prng(rng::derive_seed(config.seed, &[3]));

    let mut generator = Mlp::init(spec_g.clone(), &mut init_rng)?;
    let mut critic = Mlp::init(spec_d.clone(), &mut init_rng)?;
    let mut gen_state = RmspropState::for_mlp(&generator);
    let mut critic_state = RmspropState::for_mlp(&critic);
    let mut loss_trace = Vec::with_capacity(config.iterations);

    let n = config.batch_size;
    let step_err = |iteration: usize, e: Error| match e {
        Error::NonFiniteGradient { name } => Error::Train {
            iteration,
            detail: format!("non-finite gradient for parameter {name}; the run diverged"),
        },
        other => other,
    };

    for iteration in 0..config.iterations {
        let mut critic_loss = f64::NAN;
        for _ in 0..config.critic_steps_per_generator_step {
            let idx = batch_indices(&mut batch_rng, data.rows(), n);
            let real = data.select_rows(&idx);
            let cond = conditions.map(|c| c.select_rows(&idx));
            let z = Mat::from_vec(n, config.noise_dim, rng::standard_normals(&mut noise_rng, n * config.noise_dim));
            let mut lg = match config.objective {
                Objective::NaiveGan => naive_critic_loss_graph(&critic, &generator, &real, cond.as_ref(), &z)?,
                Objective::WganGp => {
                    let eps: Vec<f64> = (0..n).map(|_| rng::uniform_01(&mut eps_rng)).collect();
                    wgan_critic_loss_graph(
                        &critic,
                        &generator,
                        &real,
                        cond.as_ref(),
                        Some(config.lambda_gp),
                        &z,
                        &eps,
                        CriticLossForm::TrainingDescent,
                        true,
                    )?
                }
            };
            critic_loss = lg.loss_value();
            if !critic_loss.is_finite() {
                return Err(Error::Train {
                    iteration,
                    detail: format!("critic loss became {critic_loss}; the run diverged"),
                });
            }
            let grads = lg.graph.backward(lg.loss)?;
            let ordered = ordered_grads(&grads, &lg.params);
            rmsprop_step(
                &mut critic,
                &ordered,
                &mut critic_state,
                config.learning_rate,
                config.rmsprop_decay,
                config.rmsprop_epsilon,
            )
            .map_err(|e| step_err(iteration, e))?;
        }

        let cond = conditions.map(|c| {
            let idx = batch_indices(&mut batch_rng, data.rows(), n);
            c.select_rows(&idx)
        });
        let z = Mat::from_vec(n, config.noise_dim, rng::standard_normals(&mut noise_rng, n * config.noise_dim));
        let mut lg = match config.objective {
            Objective::NaiveGan => naive_generator_loss_graph(&generator, &critic, cond.as_ref(), &z)?,
            Objective::WganGp => wgan_generator_loss_graph(&generator, &critic, cond.as_ref(), &z)?,
        };
        let generator_loss = lg.loss_value();
        if !generator_loss.is_finite() {
            return Err(Error::Train {
                iteration,
                detail: format!("generator loss became {generator_loss}; the run diverged"),
            });
        }
        let grads = lg.graph.backward(lg.loss)?;
        let ordered = ordered_grads(&grads, &lg.params);
        rmsprop_step(
            &mut generator,
            &ordered,
            &mut gen_state,
            config.learning_rate,
            config.rmsprop_decay,
            config.rmsprop_epsilon,
        )
        .map_err(|e| step_err(iteration, e))?;

        loss_trace.push(LossPoint { critic: critic_loss, generator: generator_loss });
    }

    Ok(ModelCheckpoint {
        format_version: CHECKPOINT_VERSION,
        generator,
        critic,
        config: config.clone(),
        loss_trace,
    })
}

/// Draw `n` samples from a trained generator. The model's conditionality
/// decides whether a condition is required; noise is `N(0, I_noise_dim)`.
pub fn sample(
    checkpoint: &ModelCheckpoint,
    n: usize,
    condition: Option<&ConditionVector>,
    seed: u64,
) -> Result<Mat<f64>> {
    let vocab_len = checkpoint.config.vocab_len();
    match (condition, checkpoint.is_conditional()) {
        (None, true) => {
            return Err(Error::Config(format!(
                "this model is conditional; pass a condition over [{}]",
                checkpoint.config.condition_vocab.as_deref().unwrap_or_default().join(", ")
            )))
        }
        (Some(_), false) => {
            return Err(Error::Config("this model is unconditional; no condition applies".into()))
        }
        _ => {}
    }
    if let Some(c) = condition {
        if c.len() != vocab_len {
            return Err(Error::Shape {
                op: "sample",
                detail: format!("condition has {} entries for a vocabulary of {vocab_len}", c.len()),
            });
        }
    }
    let noise_dim = checkpoint.config.noise_dim;
    let mut r = rng::prng(seed);
    let z = Mat::from_vec(n, noise_dim, rng::standard_normals(&mut r, n * noise_dim));
    let gen_in = match condition {
        Some(c) => z.hstack(&c.repeat_rows(n)),
        None => z,
    };
    checkpoint.generator.forward(&gen_in)
}

/// Write a checkpoint as pretty-printed JSON.
pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(checkpoint)
        .map_err(|e| Error::Parse { what: "checkpoint", detail: e.to_string() })?;
    fs::write(path, text)?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`], rejecting unknown format
/// versions and malformed files.
pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { what: "checkpoint", detail: e.to_string() })?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse { what: "checkpoint", detail: "missing format_version".into() })?;
    if found != CHECKPOINT_VERSION as u64 {
        return Err(Error::Version { found: found as u32, supported: "1" });
    }
    let checkpoint: ModelCheckpoint = serde_json::from_value(value)
        .map_err(|e| Error::Parse { what: "checkpoint", detail: e.to_string() })?;
    Mlp::from_parts(
        checkpoint.generator.spec.clone(),
        checkpoint.generator.weights.clone(),
        checkpoint.generator.biases.clone(),
    )?;
    Mlp::from_parts(
        checkpoint.critic.spec.clone(),
        checkpoint.critic.weights.clone(),
        checkpoint.critic.biases.clone(),
    )?;
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_mlp(widths: &[usize], weights: Vec<Mat<f64>>, biases: Vec<Mat<f64>>) -> Mlp {
        Mlp::from_parts(MlpSpec::new(widths.to_vec(), FinalActivation::Linear), weights, biases).unwrap()
    }

    #[test]
    fn glorot_init_is_bounded_and_deterministic() {
        let spec = MlpSpec::new(vec![4, 7, 2], FinalActivation::Identity);
        let a = Mlp::init(spec.clone(), &mut rng::prng(9)).unwrap();
        let b = Mlp::init(spec, &mut rng::prng(9)).unwrap();
        assert_eq!(a, b);
        let limit0 = (6.0 / 11.0f64).sqrt();
        assert!(a.weights[0].as_slice().iter().all(|w| w.abs() <= limit0));
        assert!(a.biases.iter().all(|b| b.as_slice().iter().all(|&x| x == 0.0)));
        let c = Mlp::init(MlpSpec::new(vec![4, 7, 2], FinalActivation::Identity), &mut rng::prng(10)).unwrap();
        assert_ne!(a.weights[0], c.weights[0]);
    }

    #[test]
    fn naive_losses_match_hand_values() {
        let (c, g) = naive_gan_losses(&[0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap();
        assert!((c - 2.0 * 2.0f64.ln()).abs() < 1e-12);
        assert!((g - 2.0f64.ln()).abs() < 1e-12);

        let (c, g) = naive_gan_losses(&[0.9], &[0.1]).unwrap();
        assert!((c - (-2.0 * 0.9f64.ln())).abs() < 1e-12);
        assert!((g - (-0.1f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn naive_losses_reject_non_sigmoid_outputs() {
        assert!(matches!(naive_gan_losses(&[1.7], &[0.5]), Err(Error::Domain { .. })));
        assert!(matches!(naive_gan_losses(&[0.5], &[-0.2]), Err(Error::Domain { .. })));
        assert!(matches!(naive_gan_losses(&[], &[0.5]), Err(Error::Shape { .. })));
    }

    #[test]
    fn interpolate_endpoints_and_midpoints() {
        let real = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let fake = Mat::from_vec(2, 2, vec![-1.0, 0.5, 0.0, -4.0]);
        assert_eq!(interpolate(&real, &fake, &[1.0, 1.0]).unwrap(), real);
        assert_eq!(interpolate(&real, &fake, &[0.0, 0.0]).unwrap(), fake);

        let r = Mat::from_vec(1, 1, vec![2.0]);
        let f = Mat::from_vec(1, 1, vec![0.0]);
        assert_eq!(interpolate(&r, &f, &[0.25]).unwrap()[(0, 0)], 0.5);

        assert!(matches!(interpolate(&real, &r, &[0.5, 0.5]), Err(Error::Shape { .. })));
        assert!(matches!(interpolate(&real, &fake, &[0.5]), Err(Error::Shape { .. })));
    }

    #[test]
    fn rmsprop_first_two_updates_match_recurrence() {
        let mut p = Mat::from_vec(1, 1, vec![0.0]);
        let g = Mat::from_vec(1, 1, vec![1.0]);
        let mut v = Mat::zeros(1, 1);
        rmsprop_update(&mut p, &g, &mut v, "w0", 1e-3, 0.9, 1e-8).unwrap();
        let first = -p[(0, 0)];
        let expected_first = 1e-3 / (0.1f64.sqrt() + 1e-8);
        assert!((first - expected_first).abs() < 1e-15);
        assert!((first - 0.0031623).abs() < 1e-6);

        let before = p[(0, 0)];
        rmsprop_update(&mut p, &g, &mut v, "w0", 1e-3, 0.9, 1e-8).unwrap();
        let second = before - p[(0, 0)];
        assert!((second / first - (0.1f64 / 0.19).sqrt()).abs() < 1e-6);
        assert!(second < first);
    }

    #[test]
    fn rmsprop_zero_gradient_is_a_fixed_point() {
        let mut p = Mat::from_vec(1, 2, vec![0.7, -0.3]);
        let orig = p.clone();
        let g = Mat::zeros(1, 2);
        let mut v = Mat::zeros(1, 2);
        rmsprop_update(&mut p, &g, &mut v, "b0", 1e-3, 0.9, 1e-8).unwrap();
        assert_eq!(p, orig);
    }

    #[test]
    fn rmsprop_reports_the_offending_parameter() {
        let mut p = Mat::zeros(1, 1);
        let g = Mat::from_vec(1, 1, vec![f64::NAN]);
        let mut v = Mat::zeros(1, 1);
        let err = rmsprop_update(&mut p, &g, &mut v, "w3", 1e-3, 0.9, 1e-8).unwrap_err();
        match err {
            Error::NonFiniteGradient { name } => assert_eq!(name, "w3"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unit_norm_critic_makes_the_penalty_vanish() {
        let critic = linear_mlp(&[2, 1], vec![Mat::from_vec(2, 1, vec![1.0, 0.0])], vec![Mat::zeros(1, 1)]);
        let generator = linear_mlp(
            &[3, 2],
            vec![Mat::zeros(3, 2)],
            vec![Mat::from_vec(1, 2, vec![0.5, -0.25])],
        );
        let real = Mat::from_vec(2, 2, vec![0.3, 1.0, -0.4, 0.2]);
        let a = wgan_gp_critic_loss(&critic, &generator, &real, None, 0.0, &mut rng::prng(5)).unwrap();
        let b = wgan_gp_critic_loss(&critic, &generator, &real, None, 7.5, &mut rng::prng(5)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn wgan_loss_matches_hand_evaluation() {
        // D(x) = 2*x1, so grad norm 2 and penalty (2-1)^2 = 1 per row. The
        // generator ignores its input and always emits (0.5, -0.25), so
        // D(G(z)) = 1 regardless of the drawn noise.
        let critic = linear_mlp(&[2, 1], vec![Mat::from_vec(2, 1, vec![2.0, 0.0])], vec![Mat::zeros(1, 1)]);
        let generator = linear_mlp(
            &[3, 2],
            vec![Mat::zeros(3, 2)],
            vec![Mat::from_vec(1, 2, vec![0.5, -0.25])],
        );
        let real = Mat::from_vec(2, 2, vec![0.3, 1.0, -0.4, 0.2]);
        let mean_d_real = (2.0 * 0.3 + 2.0 * -0.4) / 2.0;
        let expected = (1.0 - 1.0) - mean_d_real + 1.0;
        let got = wgan_gp_critic_loss(&critic, &generator, &real, None, 1.0, &mut rng::prng(11)).unwrap();
        assert!((got - expected).abs() < 1e-12);

        // D identically zero: only the constant term survives.
        let zero_critic = linear_mlp(&[2, 1], vec![Mat::zeros(2, 1)], vec![Mat::zeros(1, 1)]);
        let got = wgan_gp_critic_loss(&zero_critic, &generator, &real, None, 0.0, &mut rng::prng(3)).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wgan_loss_rejects_bad_configs() {
        let critic = Mlp::init(MlpSpec::new(vec![2, 1], FinalActivation::Sigmoid), &mut rng::prng(0)).unwrap();
        let generator = Mlp::init(MlpSpec::new(vec![3, 2], FinalActivation::Identity), &mut rng::prng(1)).unwrap();
        let real = Mat::from_vec(1, 2, vec![0.0, 0.0]);
        assert!(matches!(
            wgan_gp_critic_loss(&critic, &generator, &real, None, 1.0, &mut rng::prng(2)),
            Err(Error::Config(_))
        ));
        let linear_critic =
            Mlp::init(MlpSpec::new(vec![2, 1], FinalActivation::Linear), &mut rng::prng(0)).unwrap();
        assert!(matches!(
            wgan_gp_critic_loss(&linear_critic, &generator, &real, None, -0.5, &mut rng::prng(2)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_penalty_coefficient_is_exactly_neutral() {
        let mut r = rng::prng(42);
        let critic = Mlp::init(MlpSpec::new(vec![3, 8, 1], FinalActivation::Linear), &mut r).unwrap();
        let generator = Mlp::init(MlpSpec::new(vec![4, 8, 3], FinalActivation::Identity), &mut r).unwrap();
        let real = Mat::from_vec(5, 3, rng::standard_normals(&mut r, 15));
        let z = Mat::from_vec(5, 4, rng::standard_normals(&mut r, 20));
        let eps: Vec<f64> = (0..5).map(|_| rng::uniform_01(&mut r)).collect();

        let form = CriticLossForm::TrainingDescent;
        let mut with =
            wgan_critic_loss_graph(&critic, &generator, &real, None, Some(0.0), &z, &eps, form, true).unwrap();
        let mut without =
            wgan_critic_loss_graph(&critic, &generator, &real, None, None, &z, &eps, form, true).unwrap();
        assert_eq!(with.loss_value(), without.loss_value());

        let gw = with.graph.backward(with.loss).unwrap();
        let go = without.graph.backward(without.loss).unwrap();
        for (&pw, &po) in with.params.iter().zip(&without.params) {
            assert_eq!(gw.get(pw).as_slice(), go.get(po).as_slice());
        }
    }

    #[test]
    fn naive_loss_graphs_match_hand_values_for_a_frozen_critic() {
        // Critic with zero weights emits sigmoid(0) = 1/2 everywhere.
        let critic = Mlp::from_parts(
            MlpSpec::new(vec![2, 1], FinalActivation::Sigmoid),
            vec![Mat::zeros(2, 1)],
            vec![Mat::zeros(1, 1)],
        )
        .unwrap();
        let generator = linear_mlp(&[3, 2], vec![Mat::zeros(3, 2)], vec![Mat::zeros(1, 2)]);
        let real = Mat::from_vec(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.0, 1.0, 2.0, -1.0]);
        let z = Mat::from_vec(4, 3, rng::standard_normals(&mut rng::prng(8), 12));

        let lg = naive_critic_loss_graph(&critic, &generator, &real, None, &z).unwrap();
        assert!((lg.loss_value() - 2.0 * 2.0f64.ln()).abs() < 1e-12);
        let lg = naive_generator_loss_graph(&generator, &critic, None, &z).unwrap();
        assert!((lg.loss_value() - 2.0f64.ln()).abs() < 1e-12);
    }

    fn tiny_config(objective: Objective, iterations: usize) -> TrainConfig {
        let mut c = TrainConfig::new(objective, iterations, 8, 3, 77);
        c.learning_rate = 1e-3;
        c
    }

    fn tiny_data() -> Mat<f64> {
        let mut r = rng::prng(1234);
        let mut data = rng::standard_normals(&mut r, 64 * 2);
        for v in data.iter_mut() {
            *v = 0.5 * *v + 1.0;
        }
        Mat::from_vec(64, 2, data)
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_data();
        let gs = MlpSpec::new(vec![3, 8, 2], FinalActivation::Identity);
        let ds = MlpSpec::new(vec![2, 8, 1], FinalActivation::Sigmoid);
        let config = tiny_config(Objective::NaiveGan, 20);
        let a = train(&data, None, &gs, &ds, &config).unwrap();
        let b = train(&data, None, &gs, &ds, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.loss_trace.len(), 20);
    }

    #[test]
    fn zero_iterations_returns_the_initialisation() {
        let data = tiny_data();
        let gs = MlpSpec::new(vec![3, 8, 2], FinalActivation::Identity);
        let ds = MlpSpec::new(vec![2, 8, 1], FinalActivation::Sigmoid);
        let config = tiny_config(Objective::NaiveGan, 0);
        let ckpt = train(&data, None, &gs, &ds, &config).unwrap();
        assert!(ckpt.loss_trace.is_empty());

        let mut init_rng = rng::prng(rng::derive_seed(config.seed, &[0]));
        let generator = Mlp::init(gs, &mut init_rng).unwrap();
        let critic = Mlp::init(ds, &mut init_rng).unwrap();
        assert_eq!(ckpt.generator, generator);
        assert_eq!(ckpt.critic, critic);
    }

    #[test]
    fn training_rejects_inconsistent_setups() {
        let data = tiny_data();
        let gs = MlpSpec::new(vec![3, 8, 2], FinalActivation::Identity);
        let ds = MlpSpec::new(vec![2, 8, 1], FinalActivation::Sigmoid);

        let mut config = tiny_config(Objective::NaiveGan, 1);
        config.batch_size = 65;
        assert!(matches!(train(&data, None, &gs, &ds, &config), Err(Error::Config(_))));

        let config = tiny_config(Objective::WganGp, 1);
        assert!(matches!(train(&data, None, &gs, &ds, &config), Err(Error::Config(_))));

        let mut config = tiny_config(Objective::NaiveGan, 1);
        config.condition_vocab = Some(vec!["visual".into()]);
        assert!(matches!(train(&data, None, &gs, &ds, &config), Err(Error::Config(_))));

        let config = tiny_config(Objective::NaiveGan, 1);
        let conds = Mat::zeros(64, 1);
        assert!(matches!(train(&data, Some(&conds), &gs, &ds, &config), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_shape_correct() {
        let ckpt = train(
            &tiny_data(),
            None,
            &MlpSpec::new(vec![3, 8, 2], FinalActivation::Identity),
            &MlpSpec::new(vec![2, 8, 1], FinalActivation::Sigmoid),
            &tiny_config(Objective::NaiveGan, 5),
        )
        .unwrap();
        let a = sample(&ckpt, 10, None, 99).unwrap();
        let b = sample(&ckpt, 10, None, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (10, 2));
        let c = sample(&ckpt, 10, None, 100).unwrap();
        assert_ne!(a, c);

        let empty = sample(&ckpt, 0, None, 1).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 2));

        let cond = ConditionVector::new(vec![1.0]).unwrap();
        assert!(matches!(sample(&ckpt, 1, Some(&cond), 1), Err(Error::Config(_))));
    }

    #[test]
    fn linear_generator_samples_have_the_implied_moments() {
        // G(z) = z W + b with W square, so samples follow N(b, W^T W).
        let w = Mat::from_vec(2, 2, vec![1.0, 0.5, 0.0, 0.8]);
        let b = Mat::from_vec(1, 2, vec![0.3, -0.7]);
        let generator = linear_mlp(&[2, 2], vec![w.clone()], vec![b.clone()]);
        let critic = linear_mlp(&[2, 1], vec![Mat::zeros(2, 1)], vec![Mat::zeros(1, 1)]);
        let ckpt = ModelCheckpoint {
            format_version: CHECKPOINT_VERSION,
            generator,
            critic,
            config: TrainConfig::new(Objective::WganGp, 0, 8, 2, 0),
            loss_trace: vec![],
        };
        let draws = sample(&ckpt, 50_000, None, 2024).unwrap();
        let implied = w.transpose().matmul(&w);
        let cov = crate::linalg::sample_covariance(&draws);
        let diff = cov.sub(&implied);
        assert!(diff.frobenius() < 0.1, "covariance off by {}", diff.frobenius());
        let means = draws.col_means();
        assert!((means[0] - 0.3).abs() < 0.02 && (means[1] + 0.7).abs() < 0.02);
    }

    #[test]
    fn checkpoints_round_trip_and_reject_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let ckpt = train(
            &tiny_data(),
            None,
            &MlpSpec::new(vec![3, 4, 2], FinalActivation::Identity),
            &MlpSpec::new(vec![2, 4, 1], FinalActivation::Sigmoid),
            &tiny_config(Objective::NaiveGan, 3),
        )
        .unwrap();
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(ckpt, loaded);

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { .. })));

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["format_version"] = serde_json::json!(99);
        fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        match load_checkpoint(&path) {
            Err(Error::Version { found, supported }) => {
                assert_eq!(found, 99);
                assert_eq!(supported, "1");
            }
            other => panic!("unexpected result {other:?}"),
        }
    }
}
