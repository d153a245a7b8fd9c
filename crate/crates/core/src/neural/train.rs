use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::conv::ConvGrad;
use super::loss::{combined_loss, ConfusionCounts};
use super::model::Network;
use crate::error::{PvsError, Result};
use crate::froxel::FroxelGrid;
use crate::interleave::{interleave, ChannelTensor};
use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimizer {
    /// Gradient descent without momentum.
    Sgd,
    #[default]
    Adam,
}

impl Optimizer {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(PvsError::invalid(format!("unknown optimizer `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Dice weight of false positives; misses get `1 − alpha`.
    pub alpha: f64,
    /// Dice share of the combined loss.
    pub lambda: f64,
    /// Decision threshold for hard metrics.
    pub tau: f64,
    pub lr: f64,
    /// Per-step multiplicative learning-rate decay: `lr·(1 − decay)^step`.
    pub decay: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            lambda: 0.99,
            tau: 0.5,
            lr: 1e-3,
            decay: 1e-10,
            batch: 3,
            epochs: 40,
            max_steps: None,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PvsError::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("lambda", self.lambda)?;
        unit("tau", self.tau)?;
        unit("decay", self.decay)?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(PvsError::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(PvsError::invalid("batch size must be positive"));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("alpha".into(), self.alpha.to_string()),
            ("lambda".into(), self.lambda.to_string()),
            ("tau".into(), self.tau.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("decay".into(), self.decay.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            (
                "max_steps".into(),
                self.max_steps.map_or_else(|| "none".into(), |s| s.to_string()),
            ),
            ("train_seed".into(), self.seed.to_string()),
            ("optimizer".into(), self.optimizer.name().into()),
        ]
    }

    /// Applies one `key=value` setting. Unknown keys return `Ok(false)`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let v = value.trim();
        let real = || {
            v.parse::<f64>()
                .map_err(|_| PvsError::invalid(format!("`{key}`: expected a number, got `{v}`")))
        };
        let int = || {
            v.parse::<u64>()
                .map_err(|_| PvsError::invalid(format!("`{key}`: expected an integer, got `{v}`")))
        };
        match key {
            "alpha" => self.alpha = real()?,
            "lambda" => self.lambda = real()?,
            "tau" => self.tau = real()?,
            "lr" => self.lr = real()?,
            "decay" => self.decay = real()?,
            "batch" => self.batch = int()? as usize,
            "epochs" => self.epochs = int()? as usize,
            "max_steps" => self.max_steps = if v == "none" { None } else { Some(int()? as usize) },
            "train_seed" => self.seed = int()?,
            "optimizer" => self.optimizer = Optimizer::parse(v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One interleaved training example.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub input: ChannelTensor<T>,
    pub target: Vec<T>,
}

impl<T: Real> Sample<T> {
    pub fn from_pair(geometry: &FroxelGrid, gt: &FroxelGrid, d: usize) -> Result<Self> {
        if geometry.dims() != gt.dims() {
            return Err(PvsError::DimMismatch {
                expected: geometry.dims().to_string(),
                actual: gt.dims().to_string(),
            });
        }
        Ok(Self {
            input: interleave(geometry, d)?,
            target: interleave::<T>(gt, d)?.into_vec(),
        })
    }
}

pub fn samples_from_pairs<T: Real>(pairs: &[(FroxelGrid, FroxelGrid)], d: usize) -> Result<Vec<Sample<T>>> {
    pairs.par_iter().map(|(g, t)| Sample::from_pair(g, t, d)).collect()
}

/// Flattened optimizer state.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: usize) -> Self {
        Self {
            step: 0,
            m: vec![T::zero(); params],
            v: vec![T::zero(); params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn apply(&mut self, net: &mut Network<T>, grads: &[ConvGrad<T>], cfg: &TrainConfig) {
        let lr = cfg.lr * (1.0 - cfg.decay).powf(self.step as f64);
        self.step += 1;
        let flat = grads.iter().flat_map(|g| g.weights.iter().chain(&g.bias));
        match cfg.optimizer {
            Optimizer::Sgd => {
                let lr = T::lit(lr);
                for (p, &g) in net.params_mut().zip(flat) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                let t = self.step as i32;
                let step = T::lit(lr * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t)));
                let (b1, b2, eps) = (T::lit(b1), T::lit(b2), T::lit(eps));
                let state = self.m.iter_mut().zip(self.v.iter_mut());
                for ((p, &g), (m, v)) in net.params_mut().zip(flat).zip(state) {
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    *p -= step * *m / (v.sqrt() + eps);
                }
            }
        }
    }
}

/// Loss and hard counts of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Mean combined loss over the batch, before the update.
    pub loss: f64,
    pub counts: ConfusionCounts,
}

/// One optimizer step on `batch`. Per-sample passes run in parallel; their
/// gradients are summed in batch order, so the result does not depend on
/// the thread count.
pub fn train_step<T: Real>(
    net: &mut Network<T>,
    state: &mut OptimizerState<T>,
    batch: &[&Sample<T>],
    cfg: &TrainConfig,
    batch_index: usize,
) -> Result<StepStats> {
    let scale = T::lit(1.0 / batch.len() as f64);
    let (alpha, lambda, tau) = (T::lit(cfg.alpha), T::lit(cfg.lambda), T::lit(cfg.tau));
    let shared: &Network<T> = net;
    let results: Vec<Result<(f64, ConfusionCounts, Vec<ConvGrad<T>>)>> = batch
        .par_iter()
        .map(|s| {
            let trace = shared.forward_trace(&s.input)?;
            let out = trace.output().expect("nonempty");
            let loss = combined_loss(out.data(), &s.target, alpha, lambda)?;
            let counts = ConfusionCounts::from_threshold(out.data(), &s.target, tau)?;
            let value = loss.value.to_f64_lossy();
            if !value.is_finite() {
                return Err(PvsError::NonFiniteLoss { batch: batch_index });
            }
            let g = ChannelTensor::from_vec(out.dims(), out.channels(), loss.grad.into_iter().map(|v| v * scale).collect())?;
            let (grads, _) = shared.backward(&trace, &g, false)?;
            Ok((value, counts, grads))
        })
        .collect();
    let mut total: Option<Vec<ConvGrad<T>>> = None;
    let mut stats = StepStats {
        loss: 0.0,
        counts: ConfusionCounts::default(),
    };
    for r in results {
        let (value, counts, grads) = r?;
        stats.loss += value / batch.len() as f64;
        stats.counts.add(&counts);
        match total.as_mut() {
            None => total = Some(grads),
            Some(acc) => acc.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
        }
    }
    if let Some(grads) = total {
        if grads.iter().flat_map(|g| g.weights.iter().chain(&g.bias)).any(|v| !v.is_finite()) {
            return Err(PvsError::NonFiniteLoss { batch: batch_index });
        }
        state.apply(net, &grads, cfg);
    }
    Ok(stats)
}

/// Pooled hard counts of the network on `samples`.
pub fn evaluate<T: Real>(net: &Network<T>, samples: &[Sample<T>], tau: f64) -> Result<ConfusionCounts> {
    let tau = T::lit(tau);
    let per: Vec<Result<ConfusionCounts>> = samples
        .par_iter()
        .map(|s| {
            let y = net.forward(&s.input)?;
            ConfusionCounts::from_threshold(y.data(), &s.target, tau)
        })
        .collect();
    let mut c = ConfusionCounts::default();
    for r in per {
        c.add(&r?);
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: u64,
    pub loss: f64,
    /// Rates over the training samples seen this epoch, before each update.
    pub fnr: f64,
    pub fpr: f64,
    /// Held-out rates after the epoch, when a held-out set was given.
    pub val_fnr: Option<f64>,
    pub val_fpr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "epoch,steps,loss,fnr,fpr,val_fnr,val_fpr";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{},{}",
                e.epoch,
                e.steps,
                e.loss,
                e.fnr,
                e.fpr,
                opt(e.val_fnr),
                opt(e.val_fpr)
            );
        }
        s
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

/// Mini-batch training over seeded shuffles of `samples`.
pub fn train<T: Real>(
    net: &mut Network<T>,
    samples: &[Sample<T>],
    held_out: &[Sample<T>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(PvsError::invalid("no training samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(net.config().param_count());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport::default();
    let mut batch_index = 0;
    for epoch in 0..cfg.epochs {
        if cfg.max_steps.is_some_and(|m| state.steps() >= m as u64) {
            break;
        }
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut counts = ConfusionCounts::default();
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            if cfg.max_steps.is_some_and(|m| state.steps() >= m as u64) {
                break;
            }
            let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            let s = train_step(net, &mut state, &batch, cfg, batch_index)?;
            batch_index += 1;
            batches += 1;
            loss += s.loss;
            counts.add(&s.counts);
        }
        let (val_fnr, val_fpr) = if held_out.is_empty() {
            (None, None)
        } else {
            let c = evaluate(net, held_out, cfg.tau)?;
            (Some(c.fnr()), Some(c.fpr()))
        };
        let log = EpochLog {
            epoch,
            steps: state.steps(),
            loss: loss / batches.max(1) as f64,
            fnr: counts.fnr(),
            fpr: counts.fpr(),
            val_fnr,
            val_fpr,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} fnr {:.4} fpr {:.4}{}",
            log.loss,
            log.fnr,
            log.fpr,
            match (val_fnr, val_fpr) {
                (Some(a), Some(b)) => format!(" held-out fnr {a:.4} fpr {b:.4}"),
                _ => String::new(),
            }
        );
        report.epochs.push(log);
    }
    Ok(report)
}
