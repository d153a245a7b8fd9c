use std::fmt;

use crate::error::{PvsError, Result};
use crate::interleave::ChannelTensor;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "none" | "linear" => Ok(Self::None),
            other => Err(PvsError::invalid(format!("unknown activation `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
            Self::None => "none",
        }
    }

    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Self::Relu => v.max(T::zero()),
            Self::Sigmoid => T::one() / (T::one() + (-v).exp()),
            Self::None => v,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Self::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Sigmoid => y * (T::one() - y),
            Self::None => T::one(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape of one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    /// Odd cubic kernel edge length.
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(kernel: usize, in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        Self {
            kernel,
            in_channels,
            out_channels,
            activation,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.kernel.pow(3) * self.in_channels * self.out_channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel % 2 == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(PvsError::invalid(format!(
                "layer needs an odd kernel and positive channels, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Zero-padded 3D cross-correlation with bias and activation.
///
/// Weights are laid out `[kz][ky][kx][in][out]` so the innermost loops of
/// both passes run over contiguous output channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3d<T> {
    pub spec: LayerSpec,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients of one layer, shaped like its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvGrad<T> {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            weights: vec![T::zero(); spec.weight_count()],
            bias: vec![T::zero(); spec.out_channels],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += *b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= s);
    }
}

/// Valid kernel taps for output coordinate `o` along an axis of length `n`:
/// `(tap index, input coordinate)`.
#[inline]
fn taps(o: usize, n: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    let r = k / 2;
    (0..k).filter_map(move |t| {
        let i = (o + t).checked_sub(r)?;
        (i < n).then_some((t, i))
    })
}

impl<T: Real> Conv3d<T> {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            spec,
            weights: vec![T::zero(); spec.weight_count()],
            bias: vec![T::zero(); spec.out_channels],
        }
    }

    fn check_input(&self, x: &ChannelTensor<T>) -> Result<()> {
        if x.channels() != self.spec.in_channels {
            return Err(PvsError::DimMismatch {
                expected: format!("{} input channels", self.spec.in_channels),
                actual: x.channels().to_string(),
            });
        }
        Ok(())
    }

    #[inline]
    fn tap_offset(&self, tz: usize, ty: usize, tx: usize) -> usize {
        let k = self.spec.kernel;
        ((tz * k + ty) * k + tx) * self.spec.in_channels * self.spec.out_channels
    }

    /// Pre-activation output.
    pub fn linear(&self, x: &ChannelTensor<T>) -> Result<ChannelTensor<T>> {
        self.check_input(x)?;
        let [nx, ny, nz] = x.dims();
        let (cin, cout, k) = (self.spec.in_channels, self.spec.out_channels, self.spec.kernel);
        let mut out = ChannelTensor::zeros(x.dims(), cout);
        let src = x.data();
        let dst = out.data_mut();
        for oz in 0..nz {
            for oy in 0..ny {
                for ox in 0..nx {
                    let o = ((oz * ny + oy) * nx + ox) * cout;
                    let acc = &mut dst[o..o + cout];
                    acc.copy_from_slice(&self.bias);
                    for (tz, iz) in taps(oz, nz, k) {
                        for (ty, iy) in taps(oy, ny, k) {
                            for (tx, ix) in taps(ox, nx, k) {
                                let i = ((iz * ny + iy) * nx + ix) * cin;
                                let w = &self.weights[self.tap_offset(tz, ty, tx)..];
                                for (c, &a) in src[i..i + cin].iter().enumerate() {
                                    if a == T::zero() {
                                        continue;
                                    }
                                    let row = &w[c * cout..(c + 1) * cout];
                                    for (s, &wv) in acc.iter_mut().zip(row) {
                                        *s += a * wv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward(&self, x: &ChannelTensor<T>) -> Result<ChannelTensor<T>> {
        let mut y = self.linear(x)?;
        let act = self.spec.activation;
        if act != Activation::None {
            y.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(y)
    }

    /// Gradients given the layer input `x`, its activated output `y` and the
    /// upstream gradient `gy`. The input gradient is skipped unless
    /// `want_input` is set.
    pub fn backward(
        &self,
        x: &ChannelTensor<T>,
        y: &ChannelTensor<T>,
        gy: &ChannelTensor<T>,
        want_input: bool,
    ) -> Result<(ConvGrad<T>, Option<ChannelTensor<T>>)> {
        self.check_input(x)?;
        y.same_shape(gy)?;
        if y.dims() != x.dims() || y.channels() != self.spec.out_channels {
            return Err(PvsError::DimMismatch {
                expected: format!("{:?}x{}", x.dims(), self.spec.out_channels),
                actual: format!("{:?}x{}", y.dims(), y.channels()),
            });
        }
        let [nx, ny, nz] = x.dims();
        let (cin, cout, k) = (self.spec.in_channels, self.spec.out_channels, self.spec.kernel);
        let act = self.spec.activation;
        let gz: Vec<T> = y
            .data()
            .iter()
            .zip(gy.data())
            .map(|(&yv, &g)| g * act.derivative_from_output(yv))
            .collect();

        let mut grad = ConvGrad::zeros(&self.spec);
        for cell in gz.chunks_exact(cout) {
            for (b, &g) in grad.bias.iter_mut().zip(cell) {
                *b += g;
            }
        }
        let mut gx = want_input.then(|| ChannelTensor::zeros(x.dims(), cin));
        let src = x.data();
        for oz in 0..nz {
            for oy in 0..ny {
                for ox in 0..nx {
                    let o = ((oz * ny + oy) * nx + ox) * cout;
                    let g = &gz[o..o + cout];
                    if g.iter().all(|&v| v == T::zero()) {
                        continue;
                    }
                    for (tz, iz) in taps(oz, nz, k) {
                        for (ty, iy) in taps(oy, ny, k) {
                            for (tx, ix) in taps(ox, nx, k) {
                                let i = ((iz * ny + iy) * nx + ix) * cin;
                                let off = self.tap_offset(tz, ty, tx);
                                for c in 0..cin {
                                    let a = src[i + c];
                                    let r = off + c * cout;
                                    if a != T::zero() {
                                        let gw = &mut grad.weights[r..r + cout];
                                        for (w, &gv) in gw.iter_mut().zip(g) {
                                            *w += a * gv;
                                        }
                                    }
                                    if let Some(gx) = gx.as_mut() {
                                        let row = &self.weights[r..r + cout];
                                        let mut s = T::zero();
                                        for (&wv, &gv) in row.iter().zip(g) {
                                            s += wv * gv;
                                        }
                                        gx.data_mut()[i + c] += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((grad, gx))
    }
}
