use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{Activation, Conv3d, ConvGrad, LayerSpec};
use crate::error::{PvsError, Result};
use crate::froxel::{FroxelGrid, GridRole};
use crate::interleave::{deinterleave_threshold, interleave, ChannelTensor};
use crate::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FPVW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Layer stack and interleave factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub d: usize,
    pub layers: Vec<LayerSpec>,
    /// Multiplies the sigmoid output by the input occupancy, so froxels
    /// without geometry are never predicted visible.
    pub gate: bool,
}

impl ModelConfig {
    /// `d³ → 32 → 32 → d³` with 3³ kernels, relu, relu, sigmoid.
    pub fn desk(d: usize) -> Self {
        Self::with_hidden(d, &[32, 32], 3)
    }

    pub fn with_hidden(d: usize, hidden: &[usize], kernel: usize) -> Self {
        let c = d * d * d;
        let mut chain = vec![c];
        chain.extend_from_slice(hidden);
        chain.push(c);
        let n = chain.len() - 1;
        let layers = chain
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n { Activation::Sigmoid } else { Activation::Relu };
                LayerSpec::new(kernel, w[0], w[1], act)
            })
            .collect();
        Self { d, layers, gate: false }
    }

    pub fn gated(self) -> Self {
        Self { gate: true, ..self }
    }

    pub fn channels(&self) -> usize {
        self.d * self.d * self.d
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(PvsError::invalid("interleave factor must be positive"));
        }
        let first = self.layers.first().ok_or_else(|| PvsError::invalid("model has no layers"))?;
        let last = self.layers.last().expect("nonempty");
        if first.in_channels != self.channels() {
            return Err(PvsError::invalid(format!(
                "first layer takes {} channels, d={} needs {}",
                first.in_channels,
                self.d,
                self.channels()
            )));
        }
        if last.out_channels != self.channels() || last.activation != Activation::Sigmoid {
            return Err(PvsError::invalid(format!(
                "last layer must map to {} channels with sigmoid",
                self.channels()
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if let Some(next) = self.layers.get(i + 1) {
                if next.in_channels != l.out_channels {
                    return Err(PvsError::invalid(format!(
                        "layer {} outputs {} channels but layer {} takes {}",
                        i,
                        l.out_channels,
                        i + 1,
                        next.in_channels
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_count() + l.out_channels).sum()
    }

    /// `d=…` followed by one `layer=kernel,in,out,activation` line per layer.
    pub fn to_text(&self) -> String {
        let mut s = format!("d={}\n", self.d);
        if self.gate {
            s.push_str("gate=occupancy\n");
        }
        for l in &self.layers {
            let _ = writeln!(s, "layer={},{},{},{}", l.kernel, l.in_channels, l.out_channels, l.activation);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut d = None;
        let mut gate = false;
        let mut layers = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || PvsError::format("model config", format!("bad line `{line}`"));
            let (k, v) = line.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "d" => d = Some(v.trim().parse().map_err(|_| bad())?),
                "gate" => {
                    gate = match v.trim() {
                        "occupancy" => true,
                        "none" => false,
                        _ => return Err(bad()),
                    }
                }
                "layer" => {
                    let f: Vec<&str> = v.split(',').map(str::trim).collect();
                    if f.len() != 4 {
                        return Err(bad());
                    }
                    let n = |s: &str| s.parse::<usize>().map_err(|_| bad());
                    layers.push(LayerSpec::new(n(f[0])?, n(f[1])?, n(f[2])?, Activation::parse(f[3])?));
                }
                _ => return Err(bad()),
            }
        }
        let cfg = Self {
            d: d.ok_or_else(|| PvsError::format("model config", "missing `d`"))?,
            layers,
            gate,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Activations of one forward pass, input first, and the gated output
/// when the model has a gate.
#[derive(Clone, Debug, Default)]
pub struct Trace<T> {
    pub activations: Vec<ChannelTensor<T>>,
    pub gated: Option<ChannelTensor<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> Option<&ChannelTensor<T>> {
        self.gated.as_ref().or(self.activations.last())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: ModelConfig,
    pub layers: Vec<Conv3d<T>>,
}

impl<T: Real> Network<T> {
    /// All weights and biases zero: every output is 0.5.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layers.iter().map(|&s| Conv3d::zeros(s)).collect();
        Ok(Self { config, layers })
    }

    /// He-normal weights drawn from a seeded stream, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut net.layers {
            let fan_in = (l.spec.kernel.pow(3) * l.spec.in_channels) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive deviation");
            l.weights.iter_mut().for_each(|w| *w = T::lit(normal.sample(&mut rng)));
        }
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn forward(&self, x: &ChannelTensor<T>) -> Result<ChannelTensor<T>> {
        let mut cur = self.layers[0].forward(x)?;
        for l in &self.layers[1..] {
            cur = l.forward(&cur)?;
        }
        if self.config.gate {
            apply_gate(&mut cur, x);
        }
        Ok(cur)
    }

    /// Forward pass keeping every activation for [`Network::backward`].
    pub fn forward_trace(&self, x: &ChannelTensor<T>) -> Result<Trace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for l in &self.layers {
            let y = l.forward(activations.last().expect("nonempty"))?;
            activations.push(y);
        }
        let gated = self.config.gate.then(|| {
            let mut y = activations.last().expect("nonempty").clone();
            apply_gate(&mut y, x);
            y
        });
        Ok(Trace { activations, gated })
    }

    /// Parameter gradients, and the input gradient when `want_input`.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: &ChannelTensor<T>,
        want_input: bool,
    ) -> Result<(Vec<ConvGrad<T>>, Option<ChannelTensor<T>>)> {
        if trace.activations.len() != self.layers.len() + 1 || trace.gated.is_some() != self.config.gate {
            return Err(PvsError::MissingCache);
        }
        let x = &trace.activations[0];
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        if self.config.gate {
            g.same_shape(x)?;
            apply_gate(&mut g, x);
        }
        let mut gx = None;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let need = i > 0 || want_input;
            let (pg, gi) = l.backward(&trace.activations[i], &trace.activations[i + 1], &g, need)?;
            grads.push(pg);
            match gi {
                Some(gi) if i > 0 => g = gi,
                other => gx = other,
            }
        }
        grads.reverse();
        if let (true, Some(gx)) = (self.config.gate, gx.as_mut()) {
            let y = trace.activations.last().expect("nonempty");
            for ((a, &go), &yv) in gx.data_mut().iter_mut().zip(grad_out.data()).zip(y.data()) {
                *a += go * yv;
            }
        }
        Ok((grads, gx))
    }

    /// Parameters in declaration order: each layer's weights, then its bias.
    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Conv3d {
                    spec: l.spec,
                    weights: l.weights.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
                    bias: l.bias.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let text = self.config.to_text();
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        let mut buf = Vec::with_capacity(self.config.param_count() * 4);
        for p in self.params() {
            buf.extend_from_slice(&p.to_f32_lossy().to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| PvsError::format("checkpoint", e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let short = || PvsError::format("checkpoint", "truncated");
        if bytes.get(..4) != Some(CHECKPOINT_MAGIC.as_slice()) {
            return Err(PvsError::format("checkpoint", "bad magic"));
        }
        let u32_at = |o: usize| -> Result<u32> {
            Ok(u32::from_le_bytes(bytes.get(o..o + 4).ok_or_else(short)?.try_into().expect("4 bytes")))
        };
        let version = u32_at(4)?;
        if version != CHECKPOINT_VERSION {
            return Err(PvsError::format("checkpoint", format!("unsupported version {version}")));
        }
        let len = u32_at(8)? as usize;
        let text = bytes.get(12..12 + len).ok_or_else(short)?;
        let text = std::str::from_utf8(text).map_err(|_| PvsError::format("checkpoint", "config is not UTF-8"))?;
        let mut net = Self::zeros(ModelConfig::parse(text)?)?;
        let body = &bytes[12 + len..];
        let n = net.config.param_count();
        if body.len() != n * 4 {
            return Err(PvsError::format(
                "checkpoint",
                format!("expected {} parameter bytes, found {}", n * 4, body.len()),
            ));
        }
        for (p, c) in net.params_mut().zip(body.chunks_exact(4)) {
            *p = T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| PvsError::io(path, e))?;
        fs::write(path, buf).map_err(|e| PvsError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| PvsError::io(path, e))?)
    }
}

fn apply_gate<T: Real>(y: &mut ChannelTensor<T>, x: &ChannelTensor<T>) {
    for (v, &m) in y.data_mut().iter_mut().zip(x.data()) {
        *v *= m;
    }
}

/// Per-froxel visibility probabilities for a geometry grid.
pub fn predict_probabilities<T: Real>(grid: &FroxelGrid, net: &Network<T>) -> Result<ChannelTensor<T>> {
    let x = interleave::<T>(grid, net.config().d)?;
    net.forward(&x)
}

/// Interleave, forward, de-interleave and threshold at `tau`.
pub fn predict_pvs<T: Real>(grid: &FroxelGrid, net: &Network<T>, tau: T) -> Result<FroxelGrid> {
    let y = predict_probabilities(grid, net)?;
    deinterleave_threshold(&y, net.config().d, tau, GridRole::PredictedPvs)
}
