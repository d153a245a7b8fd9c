use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{Activation, LayerSpec};
use super::loss::combined_loss;
use super::model::{ModelConfig, Network};
use crate::error::Result;
use crate::interleave::ChannelTensor;

/// Norm-wise relative errors between analytic and central-difference
/// gradients, one entry per parameter block plus the input.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `(name, relative error)`, e.g. `("layer1.bias", 3e-9)`.
    pub blocks: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.1).fold(0.0, f64::max)
    }
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn param(net: &mut Network<f64>, layer: usize, bias: bool, i: usize) -> &mut f64 {
    let l = &mut net.layers[layer];
    if bias {
        &mut l.bias[i]
    } else {
        &mut l.weights[i]
    }
}

/// Checks `∂L/∂θ` and `∂L/∂x` of the combined loss against central
/// differences with step `h`.
pub fn check_network(
    net: &Network<f64>,
    x: &ChannelTensor<f64>,
    target: &[f64],
    alpha: f64,
    lambda: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let loss_of = |n: &Network<f64>, x: &ChannelTensor<f64>| -> Result<f64> {
        Ok(combined_loss(n.forward(x)?.data(), target, alpha, lambda)?.value)
    };
    let trace = net.forward_trace(x)?;
    let out = trace.output().expect("nonempty");
    let l = combined_loss(out.data(), target, alpha, lambda)?;
    let gy = ChannelTensor::from_vec(out.dims(), out.channels(), l.grad)?;
    let (grads, gx) = net.backward(&trace, &gy, true)?;

    let mut blocks = Vec::new();
    let mut probe = net.clone();
    for (li, g) in grads.iter().enumerate() {
        for bias in [false, true] {
            let analytic = if bias { &g.bias } else { &g.weights };
            let mut numeric = Vec::with_capacity(analytic.len());
            for i in 0..analytic.len() {
                let orig = *param(&mut probe, li, bias, i);
                *param(&mut probe, li, bias, i) = orig + h;
                let up = loss_of(&probe, x)?;
                *param(&mut probe, li, bias, i) = orig - h;
                let dn = loss_of(&probe, x)?;
                *param(&mut probe, li, bias, i) = orig;
                numeric.push((up - dn) / (2.0 * h));
            }
            let name = format!("layer{li}.{}", if bias { "bias" } else { "weights" });
            blocks.push((name, rel_error(analytic, &numeric)));
        }
    }

    let gx = gx.expect("input gradient requested");
    let mut xp = x.clone();
    let mut numeric = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + h;
        let up = loss_of(net, &xp)?;
        xp.data_mut()[i] = orig - h;
        let dn = loss_of(net, &xp)?;
        xp.data_mut()[i] = orig;
        numeric.push((up - dn) / (2.0 * h));
    }
    blocks.push(("input".into(), rel_error(gx.data(), &numeric)));
    Ok(GradCheckReport { blocks })
}

/// Random two-layer problem on an `n³` tensor: He-initialised network with
/// `d = 2`, a sparse binary input, a random binary target and random loss
/// weights.
pub fn random_problem(seed: u64, n: usize) -> Result<(Network<f64>, ChannelTensor<f64>, Vec<f64>, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2;
    let c = d * d * d;
    let hidden = rng.random_range(2..=6);
    let hidden_act = [Activation::Relu, Activation::Sigmoid, Activation::None][rng.random_range(0..3)];
    let cfg = ModelConfig {
        d,
        layers: vec![
            LayerSpec::new(3, c, hidden, hidden_act),
            LayerSpec::new(3, hidden, c, Activation::Sigmoid),
        ],
        gate: rng.random_bool(0.5),
    };
    let mut net = Network::init(cfg, rng.random())?;
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
    }
    let dims = [n; 3];
    let len = n * n * n * c;
    let x = ChannelTensor::from_vec(dims, c, (0..len).map(|_| rng.random_bool(0.3) as u8 as f64).collect())?;
    let target: Vec<f64> = (0..len).map(|_| rng.random_bool(0.2) as u8 as f64).collect();
    Ok((net, x, target, rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)))
}
