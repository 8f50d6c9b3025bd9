//! Network layers: 3-D convolution, transposed 3-D convolution, locally
//! connected 2-D, dense, and temporal fusion.
//!
//! Forward semantics follow the architecture's defining sums exactly,
//! including the shared single bias of a dense layer and the index helper
//! `iota(x, i, s) = x - s*(floor(x/s) - i)` of the transposed convolution.
//! Every layer also exposes an analytic backward pass producing gradients
//! for its input, weights, and bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Activation, Tensor};
use crate::{Error, Result};

/// Zero-padding mode for convolution-like layers.
///
/// `Same` keeps the spatial extent under unit strides by padding
/// asymmetrically: `floor((k-1)/2)` cells before, `ceil((k-1)/2)` after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    fn pads(self, k: usize) -> (usize, usize) {
        match self {
            Padding::Same => ((k - 1) / 2, k / 2),
            Padding::Valid => (0, 0),
        }
    }
}

/// Gradients of one layer: with respect to its input, weights, and bias.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub grad_input: Tensor,
    pub grad_weights: Tensor,
    pub grad_bias: Tensor,
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

// ---------------------------------------------------------------------------
// 3-D convolution
// ---------------------------------------------------------------------------

/// 3-D convolutional layer over inputs of shape `[in_maps, n1, n2, n3]`.
///
/// Output of filter `h` at `(x1,x2,x3)` is the triple sum over the kernel
/// window of `input[m, s1*x1+w1, s2*x2+w2, s3*x3+w3] * w[h,m,w1,w2,w3]`
/// plus a per-filter bias, passed through the activation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv3d {
    pub in_maps: usize,
    pub filters: usize,
    pub kernel: (usize, usize, usize),
    pub stride: (usize, usize, usize),
    pub padding: Padding,
    pub activation: Activation,
    /// Shape `[filters, in_maps, k1, k2, k3]`.
    pub weights: Tensor,
    /// Shape `[filters]`.
    pub bias: Tensor,
}

impl Conv3d {
    pub fn new(
        in_maps: usize,
        filters: usize,
        kernel: (usize, usize, usize),
        stride: (usize, usize, usize),
        padding: Padding,
        activation: Activation,
    ) -> Self {
        let (k1, k2, k3) = kernel;
        Conv3d {
            in_maps,
            filters,
            kernel,
            stride,
            padding,
            activation,
            weights: Tensor::zeros(&[filters, in_maps, k1, k2, k3]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    /// Glorot-uniform weight initialization; bias stays zero.
    pub fn init_glorot(mut self, rng: &mut impl Rng) -> Self {
        let (k1, k2, k3) = self.kernel;
        let kvol = k1 * k2 * k3;
        let n = self.weights.len();
        self.weights = Tensor::new(
            self.weights.shape().to_vec(),
            glorot(rng, self.in_maps * kvol, self.filters * kvol, n),
        )
        .unwrap();
        self
    }

    /// Number of learned parameters: `(k1*k2*k3*in_maps + 1) * filters`.
    pub fn param_count(&self) -> usize {
        let (k1, k2, k3) = self.kernel;
        (k1 * k2 * k3 * self.in_maps + 1) * self.filters
    }

    fn pads(&self) -> [(usize, usize); 4] {
        let (k1, k2, k3) = self.kernel;
        [
            (0, 0),
            self.padding.pads(k1),
            self.padding.pads(k2),
            self.padding.pads(k3),
        ]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.rank() != 4 {
            return Err(Error::Shape(format!(
                "conv3d expects rank-4 input, got {:?}",
                input.shape()
            )));
        }
        if input.shape()[0] != self.in_maps {
            return Err(Error::Shape(format!(
                "conv3d expects {} input maps, got {}",
                self.in_maps,
                input.shape()[0]
            )));
        }
        Ok(())
    }

    fn out_dims(&self, padded: &[usize]) -> Result<[usize; 3]> {
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        let ks = [k1, k2, k3];
        let ss = [s1, s2, s3];
        let mut out = [0usize; 3];
        for a in 0..3 {
            let n = padded[a + 1];
            if n < ks[a] {
                return Err(Error::Shape(format!(
                    "kernel {} exceeds input extent {} on axis {}",
                    ks[a],
                    n,
                    a + 1
                )));
            }
            out[a] = (n - ks[a]) / ss[a] + 1;
        }
        Ok(out)
    }

    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let pads = self.pads();
        let padded: Vec<usize> = input_shape
            .iter()
            .zip(pads.iter())
            .map(|(&d, &(b, a))| d + b + a)
            .collect();
        let [o1, o2, o3] = self.out_dims(&padded)?;
        Ok(vec![self.filters, o1, o2, o3])
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_pre(input)?.0.activate(self.activation))
    }

    /// Forward pass returning the pre-activation tensor (shared by backward).
    fn forward_pre(&self, input: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_input(input)?;
        let padded = input.pad_zero(&self.pads())?;
        let [_, n1, n2, n3] = [
            padded.shape()[0],
            padded.shape()[1],
            padded.shape()[2],
            padded.shape()[3],
        ];
        let [o1, o2, o3] = self.out_dims(padded.shape())?;
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        let mut pre = Tensor::zeros(&[self.filters, o1, o2, o3]);
        let pd = padded.data();
        let wd = self.weights.data();
        let out = pre.data_mut();
        for h in 0..self.filters {
            let b = self.bias.data()[h];
            for x1 in 0..o1 {
                for x2 in 0..o2 {
                    for x3 in 0..o3 {
                        let mut z = b;
                        for m in 0..self.in_maps {
                            for w1 in 0..k1 {
                                let row = ((m * n1 + x1 * s1 + w1) * n2 + x2 * s2) * n3 + x3 * s3;
                                let wrow = (((h * self.in_maps + m) * k1 + w1) * k2) * k3;
                                for w2 in 0..k2 {
                                    let in_base = row + w2 * n3;
                                    let w_base = wrow + w2 * k3;
                                    for w3 in 0..k3 {
                                        z += pd[in_base + w3] * wd[w_base + w3];
                                    }
                                }
                            }
                        }
                        out[((h * o1 + x1) * o2 + x2) * o3 + x3] = z;
                    }
                }
            }
        }
        Ok((pre, padded))
    }

    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<GradientBundle> {
        let (pre, padded) = self.forward_pre(input)?;
        if grad_output.shape() != pre.shape() {
            return Err(Error::Shape(format!(
                "grad_output shape {:?} does not match forward output {:?}",
                grad_output.shape(),
                pre.shape()
            )));
        }
        let act = self.activation;
        let dz = grad_output.zip_map(&pre, |g, z| g * act.derivative(z))?;
        let [o1, o2, o3] = [pre.shape()[1], pre.shape()[2], pre.shape()[3]];
        let [n1, n2, n3] = [padded.shape()[1], padded.shape()[2], padded.shape()[3]];
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        let mut grad_w = Tensor::zeros(self.weights.shape());
        let mut grad_b = Tensor::zeros(&[self.filters]);
        let mut grad_padded = Tensor::zeros(padded.shape());
        {
            let dzd = dz.data();
            let pd = padded.data();
            let wd = self.weights.data();
            let gw = grad_w.data_mut();
            let gp = grad_padded.data_mut();
            for h in 0..self.filters {
                let mut db = 0.0;
                for x1 in 0..o1 {
                    for x2 in 0..o2 {
                        for x3 in 0..o3 {
                            let d = dzd[((h * o1 + x1) * o2 + x2) * o3 + x3];
                            db += d;
                            if d == 0.0 {
                                continue;
                            }
                            for m in 0..self.in_maps {
                                for w1 in 0..k1 {
                                    let row =
                                        ((m * n1 + x1 * s1 + w1) * n2 + x2 * s2) * n3 + x3 * s3;
                                    let wrow = (((h * self.in_maps + m) * k1 + w1) * k2) * k3;
                                    for w2 in 0..k2 {
                                        let in_base = row + w2 * n3;
                                        let w_base = wrow + w2 * k3;
                                        for w3 in 0..k3 {
                                            gw[w_base + w3] += d * pd[in_base + w3];
                                            gp[in_base + w3] += d * wd[w_base + w3];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                grad_b.data_mut()[h] = db;
            }
        }
        let grad_input = grad_padded.crop(&self.pads())?;
        Ok(GradientBundle {
            grad_input,
            grad_weights: grad_w,
            grad_bias: grad_b,
        })
    }
}

// ---------------------------------------------------------------------------
// Transposed 3-D convolution
// ---------------------------------------------------------------------------

/// Transposed 3-D convolution for upsampling; the linear map is the
/// transpose of the corresponding convolution's.
///
/// Output extent per axis is `(in - 1) * stride + kernel`. The kernel tap
/// for summation index `i` at output coordinate `x` is
/// `iota(x, i, s) = x - s*(floor(x/s) - i)`; terms are kept only while the
/// tap is inside the kernel and `floor(x/s) - i` indexes the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransposedConv3d {
    pub in_maps: usize,
    pub filters: usize,
    pub kernel: (usize, usize, usize),
    pub stride: (usize, usize, usize),
    pub activation: Activation,
    /// Shape `[filters, in_maps, k1, k2, k3]`.
    pub weights: Tensor,
    /// Shape `[filters]`.
    pub bias: Tensor,
}

impl TransposedConv3d {
    pub fn new(
        in_maps: usize,
        filters: usize,
        kernel: (usize, usize, usize),
        stride: (usize, usize, usize),
        activation: Activation,
    ) -> Self {
        let (k1, k2, k3) = kernel;
        TransposedConv3d {
            in_maps,
            filters,
            kernel,
            stride,
            activation,
            weights: Tensor::zeros(&[filters, in_maps, k1, k2, k3]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn init_glorot(mut self, rng: &mut impl Rng) -> Self {
        let (k1, k2, k3) = self.kernel;
        let kvol = k1 * k2 * k3;
        let n = self.weights.len();
        self.weights = Tensor::new(
            self.weights.shape().to_vec(),
            glorot(rng, self.in_maps * kvol, self.filters * kvol, n),
        )
        .unwrap();
        self
    }

    pub fn param_count(&self) -> usize {
        let (k1, k2, k3) = self.kernel;
        (k1 * k2 * k3 * self.in_maps + 1) * self.filters
    }

    pub fn output_shape(&self, input_shape: &[usize]) -> Vec<usize> {
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        vec![
            self.filters,
            (input_shape[1] - 1) * s1 + k1,
            (input_shape[2] - 1) * s2 + k2,
            (input_shape[3] - 1) * s3 + k3,
        ]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.rank() != 4 || input.shape()[0] != self.in_maps {
            return Err(Error::Shape(format!(
                "tconv3d expects [{}, n1, n2, n3] input, got {:?}",
                self.in_maps,
                input.shape()
            )));
        }
        if self.stride.0 < 1 || self.stride.1 < 1 || self.stride.2 < 1 {
            return Err(Error::Argument("tconv3d stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Valid `(i, kernel_tap, input_index)` triples for one axis position.
    fn taps(x: usize, s: usize, k: usize, n: usize) -> impl Iterator<Item = (usize, usize)> {
        let q = x / s;
        (0..=q).filter_map(move |i| {
            let tap = x - s * (q - i); // iota(x, i, s)
            let src = q - i;
            (tap < k && src < n).then_some((tap, src))
        })
    }

    fn forward_pre(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let [n1, n2, n3] = [input.shape()[1], input.shape()[2], input.shape()[3]];
        let out_shape = self.output_shape(input.shape());
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        let mut pre = Tensor::zeros(&out_shape);
        let id = input.data();
        let wd = self.weights.data();
        let out = pre.data_mut();
        let (o1, o2, o3) = (out_shape[1], out_shape[2], out_shape[3]);
        for h in 0..self.filters {
            let b = self.bias.data()[h];
            for x1 in 0..o1 {
                let taps1: Vec<_> = Self::taps(x1, s1, k1, n1).collect();
                for x2 in 0..o2 {
                    let taps2: Vec<_> = Self::taps(x2, s2, k2, n2).collect();
                    for x3 in 0..o3 {
                        let mut z = b;
                        for m in 0..self.in_maps {
                            let w_m = ((h * self.in_maps + m) * k1) * k2 * k3;
                            for &(t1, u1) in &taps1 {
                                for &(t2, u2) in &taps2 {
                                    for (t3, u3) in Self::taps(x3, s3, k3, n3) {
                                        z += id[((m * n1 + u1) * n2 + u2) * n3 + u3]
                                            * wd[w_m + (t1 * k2 + t2) * k3 + t3];
                                    }
                                }
                            }
                        }
                        out[((h * o1 + x1) * o2 + x2) * o3 + x3] = z;
                    }
                }
            }
        }
        Ok(pre)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_pre(input)?.activate(self.activation))
    }

    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<GradientBundle> {
        let pre = self.forward_pre(input)?;
        if grad_output.shape() != pre.shape() {
            return Err(Error::Shape(format!(
                "grad_output shape {:?} does not match forward output {:?}",
                grad_output.shape(),
                pre.shape()
            )));
        }
        let act = self.activation;
        let dz = grad_output.zip_map(&pre, |g, z| g * act.derivative(z))?;
        let [n1, n2, n3] = [input.shape()[1], input.shape()[2], input.shape()[3]];
        let (k1, k2, k3) = self.kernel;
        let (s1, s2, s3) = self.stride;
        let (o1, o2, o3) = (pre.shape()[1], pre.shape()[2], pre.shape()[3]);
        let mut grad_w = Tensor::zeros(self.weights.shape());
        let mut grad_b = Tensor::zeros(&[self.filters]);
        let mut grad_in = Tensor::zeros(input.shape());
        let dzd = dz.data();
        let id = input.data();
        let wd = self.weights.data();
        for h in 0..self.filters {
            let mut db = 0.0;
            for x1 in 0..o1 {
                let taps1: Vec<_> = Self::taps(x1, s1, k1, n1).collect();
                for x2 in 0..o2 {
                    let taps2: Vec<_> = Self::taps(x2, s2, k2, n2).collect();
                    for x3 in 0..o3 {
                        let d = dzd[((h * o1 + x1) * o2 + x2) * o3 + x3];
                        db += d;
                        if d == 0.0 {
                            continue;
                        }
                        for m in 0..self.in_maps {
                            let w_m = ((h * self.in_maps + m) * k1) * k2 * k3;
                            for &(t1, u1) in &taps1 {
                                for &(t2, u2) in &taps2 {
                                    for (t3, u3) in Self::taps(x3, s3, k3, n3) {
                                        let wi = w_m + (t1 * k2 + t2) * k3 + t3;
                                        let ii = ((m * n1 + u1) * n2 + u2) * n3 + u3;
                                        grad_w.data_mut()[wi] += d * id[ii];
                                        grad_in.data_mut()[ii] += d * wd[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            grad_b.data_mut()[h] = db;
        }
        Ok(GradientBundle {
            grad_input: grad_in,
            grad_weights: grad_w,
            grad_bias: grad_b,
        })
    }
}

// ---------------------------------------------------------------------------
// Locally connected 2-D
// ---------------------------------------------------------------------------

/// Convolution-like 2-D layer with untied weights: every output position
/// owns its own kernel block and bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocallyConnected2d {
    pub in_maps: usize,
    pub filters: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: Padding,
    pub activation: Activation,
    /// Input spatial extent the untied weights were sized for.
    pub input_hw: (usize, usize),
    /// Shape `[filters, out_h, out_w, in_maps, k1, k2]`.
    pub weights: Tensor,
    /// Shape `[filters, out_h, out_w]`.
    pub bias: Tensor,
}

impl LocallyConnected2d {
    /// Default configuration: stride (1,1) with same padding keeps `q x p`.
    pub fn new(
        in_maps: usize,
        filters: usize,
        kernel: (usize, usize),
        input_hw: (usize, usize),
        activation: Activation,
    ) -> Self {
        Self::with_stride(in_maps, filters, kernel, (1, 1), Padding::Same, input_hw, activation)
    }

    pub fn with_stride(
        in_maps: usize,
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        input_hw: (usize, usize),
        activation: Activation,
    ) -> Self {
        let (k1, k2) = kernel;
        let (p1, a1) = padding.pads(k1);
        let (p2, a2) = padding.pads(k2);
        let o1 = (input_hw.0 + p1 + a1 - k1) / stride.0 + 1;
        let o2 = (input_hw.1 + p2 + a2 - k2) / stride.1 + 1;
        LocallyConnected2d {
            in_maps,
            filters,
            kernel,
            stride,
            padding,
            activation,
            input_hw,
            weights: Tensor::zeros(&[filters, o1, o2, in_maps, k1, k2]),
            bias: Tensor::zeros(&[filters, o1, o2]),
        }
    }

    pub fn init_glorot(mut self, rng: &mut impl Rng) -> Self {
        let (k1, k2) = self.kernel;
        let n = self.weights.len();
        self.weights = Tensor::new(
            self.weights.shape().to_vec(),
            glorot(rng, self.in_maps * k1 * k2, self.filters * k1 * k2, n),
        )
        .unwrap();
        self
    }

    pub fn output_hw(&self) -> (usize, usize) {
        (self.weights.shape()[1], self.weights.shape()[2])
    }

    /// Untied parameter count `(k1*k2*in_maps + 1) * out_h*out_w * filters`.
    ///
    /// With a `(1,1)` kernel and a single filter this reduces to
    /// `(in_maps + 1) * q * p`.
    pub fn param_count(&self) -> usize {
        let (k1, k2) = self.kernel;
        let (o1, o2) = self.output_hw();
        (k1 * k2 * self.in_maps + 1) * o1 * o2 * self.filters
    }

    fn pads(&self) -> [(usize, usize); 3] {
        let (k1, k2) = self.kernel;
        [(0, 0), self.padding.pads(k1), self.padding.pads(k2)]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.rank() != 3
            || input.shape()[0] != self.in_maps
            || (input.shape()[1], input.shape()[2]) != self.input_hw
        {
            return Err(Error::Shape(format!(
                "locally connected layer expects [{}, {}, {}], got {:?}",
                self.in_maps, self.input_hw.0, self.input_hw.1,
                input.shape()
            )));
        }
        Ok(())
    }

    fn forward_pre(&self, input: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_input(input)?;
        let padded = input.pad_zero(&self.pads())?;
        let [n1, n2] = [padded.shape()[1], padded.shape()[2]];
        let (o1, o2) = self.output_hw();
        let (k1, k2) = self.kernel;
        let (s1, s2) = self.stride;
        let mut pre = Tensor::zeros(&[self.filters, o1, o2]);
        let pd = padded.data();
        let wd = self.weights.data();
        let bd = self.bias.data();
        let out = pre.data_mut();
        for h in 0..self.filters {
            for x1 in 0..o1 {
                for x2 in 0..o2 {
                    let mut z = bd[(h * o1 + x1) * o2 + x2];
                    let w_pos = ((((h * o1 + x1) * o2 + x2) * self.in_maps) * k1) * k2;
                    for m in 0..self.in_maps {
                        for w1 in 0..k1 {
                            for w2 in 0..k2 {
                                z += pd[(m * n1 + x1 * s1 + w1) * n2 + x2 * s2 + w2]
                                    * wd[w_pos + (m * k1 + w1) * k2 + w2];
                            }
                        }
                    }
                    out[(h * o1 + x1) * o2 + x2] = z;
                }
            }
        }
        Ok((pre, padded))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_pre(input)?.0.activate(self.activation))
    }

    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<GradientBundle> {
        let (pre, padded) = self.forward_pre(input)?;
        if grad_output.shape() != pre.shape() {
            return Err(Error::Shape(format!(
                "grad_output shape {:?} does not match forward output {:?}",
                grad_output.shape(),
                pre.shape()
            )));
        }
        let act = self.activation;
        let dz = grad_output.zip_map(&pre, |g, z| g * act.derivative(z))?;
        let [n1, n2] = [padded.shape()[1], padded.shape()[2]];
        let (o1, o2) = self.output_hw();
        let (k1, k2) = self.kernel;
        let (s1, s2) = self.stride;
        let mut grad_w = Tensor::zeros(self.weights.shape());
        let mut grad_b = Tensor::zeros(self.bias.shape());
        let mut grad_padded = Tensor::zeros(padded.shape());
        let dzd = dz.data();
        let pd = padded.data();
        let wd = self.weights.data();
        for h in 0..self.filters {
            for x1 in 0..o1 {
                for x2 in 0..o2 {
                    let d = dzd[(h * o1 + x1) * o2 + x2];
                    grad_b.data_mut()[(h * o1 + x1) * o2 + x2] = d;
                    if d == 0.0 {
                        continue;
                    }
                    let w_pos = ((((h * o1 + x1) * o2 + x2) * self.in_maps) * k1) * k2;
                    for m in 0..self.in_maps {
                        for w1 in 0..k1 {
                            for w2 in 0..k2 {
                                let ii = (m * n1 + x1 * s1 + w1) * n2 + x2 * s2 + w2;
                                let wi = w_pos + (m * k1 + w1) * k2 + w2;
                                grad_w.data_mut()[wi] += d * pd[ii];
                                grad_padded.data_mut()[ii] += d * wd[wi];
                            }
                        }
                    }
                }
            }
        }
        let grad_input = grad_padded.crop(&self.pads())?;
        Ok(GradientBundle {
            grad_input,
            grad_weights: grad_w,
            grad_bias: grad_b,
        })
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected layer with one shared bias for the whole layer.
///
/// The reported parameter count follows the dense-layer formula
/// `(in_size + 1) * out_size`, which counts one bias per neuron; the
/// forward pass shares a single bias value across neurons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub in_size: usize,
    pub out_size: usize,
    pub activation: Activation,
    /// Shape `[out_size, in_size]`.
    pub weights: Tensor,
    /// Shape `[1]`: the shared bias.
    pub bias: Tensor,
}

impl Dense {
    pub fn new(in_size: usize, out_size: usize, activation: Activation) -> Self {
        Dense {
            in_size,
            out_size,
            activation,
            weights: Tensor::zeros(&[out_size, in_size]),
            bias: Tensor::zeros(&[1]),
        }
    }

    /// Identity-like layout for tests: weight matrix with ones on the diagonal.
    pub fn identity(size: usize) -> Self {
        let mut l = Dense::new(size, size, Activation::Identity);
        for i in 0..size {
            l.weights.set(&[i, i], 1.0);
        }
        l
    }

    pub fn init_glorot(mut self, rng: &mut impl Rng) -> Self {
        let n = self.weights.len();
        self.weights = Tensor::new(
            self.weights.shape().to_vec(),
            glorot(rng, self.in_size, self.out_size, n),
        )
        .unwrap();
        self
    }

    pub fn param_count(&self) -> usize {
        (self.in_size + 1) * self.out_size
    }

    fn forward_pre(&self, input: &Tensor) -> Result<Tensor> {
        if input.rank() != 1 || input.len() != self.in_size {
            return Err(Error::Shape(format!(
                "dense layer expects a vector of length {}, got {:?}",
                self.in_size,
                input.shape()
            )));
        }
        let b = self.bias.data()[0];
        let wd = self.weights.data();
        let xd = input.data();
        let mut pre = Tensor::zeros(&[self.out_size]);
        for i in 0..self.out_size {
            let mut z = b;
            let row = &wd[i * self.in_size..(i + 1) * self.in_size];
            for (w, x) in row.iter().zip(xd) {
                z += w * x;
            }
            pre.data_mut()[i] = z;
        }
        Ok(pre)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_pre(input)?.activate(self.activation))
    }

    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<GradientBundle> {
        let pre = self.forward_pre(input)?;
        if grad_output.shape() != pre.shape() {
            return Err(Error::Shape(format!(
                "grad_output shape {:?} does not match forward output {:?}",
                grad_output.shape(),
                pre.shape()
            )));
        }
        let act = self.activation;
        let dz = grad_output.zip_map(&pre, |g, z| g * act.derivative(z))?;
        let dzd = dz.data();
        let xd = input.data();
        let wd = self.weights.data();
        let mut grad_w = Tensor::zeros(self.weights.shape());
        let mut grad_in = Tensor::zeros(&[self.in_size]);
        for i in 0..self.out_size {
            let d = dzd[i];
            for j in 0..self.in_size {
                grad_w.data_mut()[i * self.in_size + j] = d * xd[j];
                grad_in.data_mut()[j] += d * wd[i * self.in_size + j];
            }
        }
        let grad_b = Tensor::vector(&[dzd.iter().sum::<f64>()]);
        Ok(GradientBundle {
            grad_input: grad_in,
            grad_weights: grad_w,
            grad_bias: grad_b,
        })
    }
}

// ---------------------------------------------------------------------------
// Temporal fusion
// ---------------------------------------------------------------------------

/// Collapses the temporal axis of `[maps, q, p, L]` feature maps into
/// `[filters, q, p]` via a learnable convolution with kernel `(1,1,L)` and
/// stride `(1,1,L)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalFusion {
    pub conv: Conv3d,
}

impl TemporalFusion {
    pub fn new(in_maps: usize, filters: usize, look_back: usize, activation: Activation) -> Self {
        TemporalFusion {
            conv: Conv3d::new(
                in_maps,
                filters,
                (1, 1, look_back),
                (1, 1, look_back),
                Padding::Valid,
                activation,
            ),
        }
    }

    pub fn init_glorot(mut self, rng: &mut impl Rng) -> Self {
        self.conv = self.conv.init_glorot(rng);
        self
    }

    pub fn param_count(&self) -> usize {
        self.conv.param_count()
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out = self.conv.forward(input)?;
        if out.shape()[3] != 1 {
            return Err(Error::Shape(format!(
                "temporal fusion expected depth-1 output, got {:?}",
                out.shape()
            )));
        }
        out.squeeze(3)
    }

    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<GradientBundle> {
        let mut shape = grad_output.shape().to_vec();
        shape.push(1);
        let grad4 = grad_output.reshape(&shape)?;
        self.conv.backward(input, &grad4)
    }
}
