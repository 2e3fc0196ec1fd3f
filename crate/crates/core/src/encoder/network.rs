//! Parameter layout and forward pass of one encoder path.
//!
//! Per step: the attentive transformer turns the previous attention features
//! into a sparsemax mask scaled by the running prior, the mask gates the
//! normalized input, and the feature transformer (blocks whose weights are
//! shared by all steps, then step-specific blocks) produces a representation that is split into a
//! decision part and an attention part. ReLU'd decision parts are summed over
//! steps and fed to a linear head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::numeric::{BatchNormState, ChunkStats, Matrix, Mode, ParamId, ParamStore, Tape, Var};

/// Entropy floor inside the sparsity penalty.
pub const ENTROPY_EPS: f64 = 1e-15;

/// affine (no bias) → ghost batch norm → GLU.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GluBlock {
    pub weight: ParamId,
    pub bn: usize,
}

/// affine (no bias) → ghost batch norm, followed by prior scaling and sparsemax.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AttentiveBlock {
    pub weight: ParamId,
    pub bn: usize,
}

/// Learnable parameters and running statistics of one encoder path.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub(crate) config: EncoderConfig,
    pub(crate) store: ParamStore,
    /// Human-readable name of every parameter, indexed like `store`.
    pub(crate) names: Vec<String>,
    pub(crate) bns: Vec<BatchNormState>,
    pub(crate) bn_names: Vec<String>,
    pub(crate) input_bn: usize,
    /// Weights of the shared blocks. Each stack holds its own batch norm
    /// for them, since every step feeds them a different distribution.
    pub(crate) shared: Vec<ParamId>,
    /// Stack of the bootstrap pass that feeds the first mask.
    pub(crate) initial: Vec<GluBlock>,
    pub(crate) steps: Vec<Vec<GluBlock>>,
    pub(crate) attentive: Vec<AttentiveBlock>,
    pub(crate) head_weight: ParamId,
    pub(crate) head_bias: ParamId,
}

/// Tape handles for one decision step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub mask: Var,
    pub prior: Var,
    pub contribution: Var,
}

/// Tape handles of a full forward pass plus the batch statistics it observed.
#[derive(Debug)]
pub struct ForwardPass {
    pub logits: Var,
    pub penalty: Var,
    pub steps: Vec<StepVars>,
    pub(crate) bn_updates: Vec<(usize, Vec<ChunkStats>)>,
}

/// Per-step explanation record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub mask: Matrix,
    pub prior: Matrix,
    pub contribution: Matrix,
    /// Row sums of `contribution`.
    pub step_weight: Vec<f64>,
}

/// Materialized output of [`EncoderState::infer`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub logits: Matrix,
    pub traces: Vec<StepTrace>,
    pub penalty: f64,
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized above")
}

impl EncoderState {
    /// Fresh parameters: Xavier-uniform weights, zero biases, unit BN scale.
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = Self {
            store: ParamStore::new(),
            names: Vec::new(),
            bns: Vec::new(),
            bn_names: Vec::new(),
            input_bn: 0,
            shared: Vec::new(),
            initial: Vec::new(),
            steps: Vec::new(),
            attentive: Vec::new(),
            head_weight: ParamId(0),
            head_bias: ParamId(0),
            config,
        };
        let cfg = state.config.clone();
        let d = cfg.n_features;
        let hidden = cfg.hidden();

        state.input_bn = state.add_bn("input_bn", d, usize::MAX);
        for i in 0..cfg.n_shared_glu {
            let fan_in = if i == 0 { d } else { hidden };
            let weight = state.add_param(&format!("shared.{i}.weight"), xavier(&mut rng, fan_in, 2 * hidden));
            state.shared.push(weight);
        }
        let step_stack = |state: &mut Self, prefix: &str, rng: &mut ChaCha8Rng| {
            let mut stack: Vec<GluBlock> = (0..cfg.n_shared_glu)
                .map(|i| {
                    let weight = state.shared[i];
                    let bn = state.add_bn(&format!("{prefix}.shared{i}.bn"), 2 * hidden, cfg.virtual_batch_size);
                    GluBlock { weight, bn }
                })
                .collect();
            for i in 0..cfg.n_step_glu {
                let fan_in = if i == 0 && cfg.n_shared_glu == 0 { d } else { hidden };
                stack.push(state.add_glu(&format!("{prefix}.{i}"), fan_in, rng));
            }
            stack
        };
        state.initial = step_stack(&mut state, "initial", &mut rng);
        for s in 0..cfg.n_steps {
            let stack = step_stack(&mut state, &format!("step{s}"), &mut rng);
            state.steps.push(stack);
            let weight = state.add_param(&format!("attentive{s}.weight"), xavier(&mut rng, cfg.n_a, d));
            let bn = state.add_bn(&format!("attentive{s}.bn"), d, cfg.virtual_batch_size);
            state.attentive.push(AttentiveBlock { weight, bn });
        }
        state.head_weight = state.add_param("head.weight", xavier(&mut rng, cfg.n_d, cfg.n_classes));
        state.head_bias = state.add_param("head.bias", Matrix::zeros(1, cfg.n_classes));
        Ok(state)
    }

    fn add_param(&mut self, name: &str, value: Matrix) -> ParamId {
        self.names.push(name.to_string());
        self.store.add(value)
    }

    fn add_bn(&mut self, name: &str, width: usize, virtual_batch: usize) -> usize {
        let bn = BatchNormState::new(&mut self.store, width, self.config.bn_momentum, virtual_batch);
        self.names.push(format!("{name}.scale"));
        self.names.push(format!("{name}.shift"));
        self.bns.push(bn);
        self.bn_names.push(name.to_string());
        self.bns.len() - 1
    }

    fn add_glu(&mut self, name: &str, fan_in: usize, rng: &mut ChaCha8Rng) -> GluBlock {
        let out = 2 * self.config.hidden();
        let weight = self.add_param(&format!("{name}.weight"), xavier(rng, fan_in, out));
        let bn = self.add_bn(&format!("{name}.bn"), out, self.config.virtual_batch_size);
        GluBlock { weight, bn }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn batch_norms(&self) -> &[BatchNormState] {
        &self.bns
    }

    /// Folds the running statistics observed during a training pass into the state.
    pub fn apply_bn_updates(&mut self, pass: &ForwardPass) {
        for (slot, stats) in &pass.bn_updates {
            self.bns[*slot].apply_stats(stats);
        }
    }

    /// Replaces every running statistic with the average of the chunk
    /// statistics observed in one training-mode pass over `x` (in row order,
    /// `batch_size` rows at a time). Parameters are left untouched.
    pub fn recalibrate_batch_norms(&mut self, x: &Matrix, batch_size: usize) -> Result<()> {
        let mut sums: Vec<Option<(Vec<f64>, Vec<f64>, usize)>> = vec![None; self.bns.len()];
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut batches: Vec<&[usize]> = rows.chunks(batch_size.max(2)).collect();
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            batches.pop();
        }
        for batch in batches {
            let mut tape = Tape::new();
            let xb = tape.constant(x.select_rows(batch));
            let pass = self.forward(&mut tape, xb, Mode::Training)?;
            for (slot, stats) in &pass.bn_updates {
                let acc = sums[*slot].get_or_insert_with(|| {
                    let w = self.bns[*slot].width();
                    (vec![0.0; w], vec![0.0; w], 0)
                });
                for s in stats {
                    acc.0.iter_mut().zip(&s.mean).for_each(|(a, v)| *a += v);
                    acc.1.iter_mut().zip(&s.var).for_each(|(a, v)| *a += v);
                    acc.2 += 1;
                }
            }
        }
        for (bn, acc) in self.bns.iter_mut().zip(sums) {
            if let Some((mean, var, n)) = acc {
                bn.running_mean = mean.iter().map(|m| m / n as f64).collect();
                bn.running_var = var.iter().map(|v| v / n as f64).collect();
            }
        }
        Ok(())
    }

    fn bn(
        &self,
        tape: &mut Tape,
        slot: usize,
        x: Var,
        mode: Mode,
        updates: &mut Vec<(usize, Vec<ChunkStats>)>,
    ) -> Result<Var> {
        let (y, stats) = self.bns[slot].forward(tape, &self.store, x, mode)?;
        if let Some(stats) = stats {
            updates.push((slot, stats));
        }
        Ok(y)
    }

    fn glu_block(
        &self,
        tape: &mut Tape,
        block: &GluBlock,
        x: Var,
        mode: Mode,
        updates: &mut Vec<(usize, Vec<ChunkStats>)>,
    ) -> Result<Var> {
        let w = tape.param(&self.store, block.weight);
        let h = tape.matmul(x, w)?;
        let h = self.bn(tape, block.bn, h, mode, updates)?;
        tape.glu(h)
    }

    /// Runs `stack` (shared-weight blocks first); every block after the
    /// first is residual: `h ← (h + block(h))·√½`.
    fn feature_transform(
        &self,
        tape: &mut Tape,
        stack: &[GluBlock],
        masked: Var,
        mode: Mode,
        updates: &mut Vec<(usize, Vec<ChunkStats>)>,
    ) -> Result<(Var, Var)> {
        let mut h = masked;
        for (i, block) in stack.iter().enumerate() {
            let out = self.glu_block(tape, block, h, mode, updates)?;
            h = if i == 0 {
                out
            } else {
                let sum = tape.add(h, out)?;
                tape.scale(sum, std::f64::consts::FRAC_1_SQRT_2)
            };
        }
        let d = tape.slice_cols(h, 0, self.config.n_d)?;
        let a = tape.slice_cols(h, self.config.n_d, self.config.n_a)?;
        Ok((d, a))
    }

    /// Feature transformer of decision step `step` (the bootstrap stack when `None`).
    /// Returns `(d, a)`: the decision part (`n_d` columns) and attention part (`n_a`).
    pub fn feature_transformer(
        &self,
        tape: &mut Tape,
        step: Option<usize>,
        masked: Var,
        mode: Mode,
    ) -> Result<(Var, Var, Vec<(usize, Vec<ChunkStats>)>)> {
        let cols = tape.value(masked).cols();
        if cols != self.config.n_features {
            return Err(Error::dim(format!(
                "feature transformer expects {} columns, got {cols}",
                self.config.n_features
            )));
        }
        let stack = match step {
            Some(s) => &self.steps[s],
            None => &self.initial,
        };
        let mut updates = Vec::new();
        let (d, a) = self.feature_transform(tape, stack, masked, mode, &mut updates)?;
        Ok((d, a, updates))
    }

    /// Attentive transformer of `step`: `sparsemax(prior ⊙ BN(a·W))`.
    pub fn attentive_transformer(
        &self,
        tape: &mut Tape,
        step: usize,
        a: Var,
        prior: Var,
        mode: Mode,
    ) -> Result<(Var, Vec<(usize, Vec<ChunkStats>)>)> {
        let mut updates = Vec::new();
        let mask = self.attend(tape, step, a, prior, mode, &mut updates)?;
        Ok((mask, updates))
    }

    fn attend(
        &self,
        tape: &mut Tape,
        step: usize,
        a: Var,
        prior: Var,
        mode: Mode,
        updates: &mut Vec<(usize, Vec<ChunkStats>)>,
    ) -> Result<Var> {
        let block = &self.attentive[step];
        let w = tape.param(&self.store, block.weight);
        let z = tape.matmul(a, w)?;
        let z = self.bn(tape, block.bn, z, mode, updates)?;
        if tape.value(z).shape() != tape.value(prior).shape() {
            return Err(Error::dim("prior shape does not match attention logits"));
        }
        let scaled = tape.mul(prior, z)?;
        Ok(tape.sparsemax(scaled))
    }

    /// Records the full encoder on `tape`. Batch statistics observed in
    /// training mode are returned in the pass; apply them with
    /// [`EncoderState::apply_bn_updates`].
    pub fn forward(&self, tape: &mut Tape, x: Var, mode: Mode) -> Result<ForwardPass> {
        let cfg = &self.config;
        let (b, cols) = tape.value(x).shape();
        if cols != cfg.n_features {
            return Err(Error::dim(format!(
                "encoder expects {} features, got {cols}",
                cfg.n_features
            )));
        }
        let mut updates = Vec::new();
        let xn = self.bn(tape, self.input_bn, x, mode, &mut updates)?;
        let (_, mut a) = self.feature_transform(tape, &self.initial, xn, mode, &mut updates)?;
        let mut prior = tape.constant(Matrix::filled(b, cols, 1.0));
        let mut steps = Vec::with_capacity(cfg.n_steps);
        let mut aggregate: Option<Var> = None;
        let mut penalty: Option<Var> = None;
        for s in 0..cfg.n_steps {
            let mask = self.attend(tape, s, a, prior, mode, &mut updates)?;
            let entropy = tape.mask_entropy(mask, ENTROPY_EPS);
            penalty = Some(match penalty {
                Some(p) => tape.add(p, entropy)?,
                None => entropy,
            });
            let masked = apply_mask(tape, xn, mask)?;
            let (d, a_next) = self.feature_transform(tape, &self.steps[s], masked, mode, &mut updates)?;
            let contribution = tape.relu(d);
            aggregate = Some(match aggregate {
                Some(acc) => tape.add(acc, contribution)?,
                None => contribution,
            });
            steps.push(StepVars {
                mask,
                prior,
                contribution,
            });
            prior = update_prior(tape, prior, mask, cfg.gamma)?;
            a = a_next;
        }
        let hw = tape.param(&self.store, self.head_weight);
        let hb = tape.param(&self.store, self.head_bias);
        let logits = tape.affine(aggregate.expect("n_steps >= 1"), hw, hb)?;
        let penalty = tape.scale(penalty.expect("n_steps >= 1"), 1.0 / cfg.n_steps as f64);
        Ok(ForwardPass {
            logits,
            penalty,
            steps,
            bn_updates: updates,
        })
    }

    /// `cross_entropy + lambda_sparse · penalty` recorded on the tape.
    pub fn loss(
        &self,
        tape: &mut Tape,
        pass: &ForwardPass,
        labels: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<Var> {
        let ce = tape.cross_entropy(pass.logits, labels, class_weights)?;
        if self.config.lambda_sparse == 0.0 {
            return Ok(ce);
        }
        let reg = tape.scale(pass.penalty, self.config.lambda_sparse);
        tape.add(ce, reg)
    }

    /// Inference-mode forward pass. Pure: the state is not modified.
    pub fn infer(&self, x: &Matrix) -> Result<EncoderOutput> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let pass = self.forward(&mut tape, xv, Mode::Inference)?;
        Ok(materialize(&tape, &pass))
    }
}

/// Reads the values of a recorded pass off the tape.
pub fn materialize(tape: &Tape, pass: &ForwardPass) -> EncoderOutput {
    let traces = pass
        .steps
        .iter()
        .enumerate()
        .map(|(step, sv)| {
            let contribution = tape.value(sv.contribution).clone();
            let step_weight = (0..contribution.rows())
                .map(|r| contribution.row(r).iter().sum())
                .collect();
            StepTrace {
                step,
                mask: tape.value(sv.mask).clone(),
                prior: tape.value(sv.prior).clone(),
                contribution,
                step_weight,
            }
        })
        .collect();
    EncoderOutput {
        logits: tape.value(pass.logits).clone(),
        traces,
        penalty: tape.value(pass.penalty).item(),
    }
}

/// Elementwise `features ⊙ mask`.
pub fn apply_mask(tape: &mut Tape, features: Var, mask: Var) -> Result<Var> {
    tape.mul(features, mask)
}

/// `prior ⊙ (gamma − mask)`.
pub fn update_prior(tape: &mut Tape, prior: Var, mask: Var, gamma: f64) -> Result<Var> {
    let relief = tape.const_sub(gamma, mask);
    tape.mul(prior, relief)
}

/// Value-level loss of a materialized output; mirrors [`EncoderState::loss`].
pub fn encoder_loss(out: &EncoderOutput, labels: &[usize], config: &EncoderConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let logits = tape.constant(out.logits.clone());
    let ce = tape.cross_entropy(logits, labels, None)?;
    Ok(tape.value(ce).item() + config.lambda_sparse * out.penalty)
}
