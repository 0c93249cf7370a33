//! Convolution layers, the shared-weight segmentation network, and its
//! analytic forward/backward passes.

use rand::Rng;

use super::{ConvError, Tensor};
use crate::raster::LabelMap;

/// One convolution: square odd kernel, stride 1, zero padding `k/2`, so the
/// spatial size never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self, ConvError> {
        let s = weight.shape();
        if s.len() != 4 {
            return Err(ConvError::ShapeMismatch(format!(
                "conv weight must be 4-d, got {s:?}"
            )));
        }
        if s[2] != s[3] || s[2].is_multiple_of(2) {
            return Err(ConvError::ShapeMismatch(format!(
                "kernel must be square with odd size, got {}x{}",
                s[2], s[3]
            )));
        }
        if bias.shape() != [s[0]] {
            return Err(ConvError::ShapeMismatch(format!(
                "bias shape {:?} for {} output channels",
                bias.shape(),
                s[0]
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }
}

/// The per-level segmentation network: hidden convolutions with ReLU
/// between them, then a 1x1 classifier. The parameter count depends only
/// on the layer widths, never on how many pyramid levels it is applied to.
#[derive(Debug, Clone, PartialEq)]
pub struct SegNet {
    convs: Vec<ConvLayer>,
}

impl SegNet {
    /// Assembles a network from explicit layers, checking channel chaining
    /// and that the class count fits the label space (ignore sentinel 255).
    pub fn from_layers(convs: Vec<ConvLayer>) -> Result<Self, ConvError> {
        if convs.is_empty() {
            return Err(ConvError::ShapeMismatch("network has no layers".into()));
        }
        for pair in convs.windows(2) {
            if pair[1].in_channels() != pair[0].out_channels() {
                return Err(ConvError::ShapeMismatch(format!(
                    "layer expects {} input channels after a {}-channel layer",
                    pair[1].in_channels(),
                    pair[0].out_channels()
                )));
            }
        }
        let classes = convs[convs.len() - 1].out_channels();
        if classes > 255 {
            return Err(ConvError::ShapeMismatch(format!(
                "{classes} classes exceed the u8 label space"
            )));
        }
        Ok(Self { convs })
    }

    /// Random initialization: hidden `kernel`-sized convolutions over the
    /// given widths, then a 1x1 classifier onto `n_classes`. Weights are
    /// uniform in ±sqrt(1/fan_in), biases zero.
    pub fn random(
        in_channels: usize,
        hidden: &[usize],
        n_classes: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, ConvError> {
        let mut convs = Vec::with_capacity(hidden.len() + 1);
        let mut c_in = in_channels;
        for (idx, &c_out) in hidden.iter().chain(std::iter::once(&n_classes)).enumerate() {
            let k = if idx == hidden.len() { 1 } else { kernel };
            let fan_in = (c_in * k * k) as f64;
            let bound = (1.0 / fan_in).sqrt();
            let data = (0..c_out * c_in * k * k)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            convs.push(ConvLayer::new(
                Tensor::from_data(&[c_out, c_in, k, k], data)?,
                Tensor::zeros(&[c_out]),
            )?);
            c_in = c_out;
        }
        Self::from_layers(convs)
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.convs
    }

    pub fn in_channels(&self) -> usize {
        self.convs[0].in_channels()
    }

    pub fn n_classes(&self) -> usize {
        self.convs[self.convs.len() - 1].out_channels()
    }

    pub fn param_count(&self) -> usize {
        self.convs
            .iter()
            .map(|c| c.weight.len() + c.bias.len())
            .sum()
    }

    /// Runs the network, recording every activation for the backward pass.
    pub fn forward(&self, input: &Tensor) -> Result<Forward, ConvError> {
        if input.shape().len() != 3 || input.shape()[0] != self.in_channels() {
            return Err(ConvError::ShapeMismatch(format!(
                "input shape {:?} for a {}-channel network",
                input.shape(),
                self.in_channels()
            )));
        }
        let mut activations = vec![input.clone()];
        let last = self.convs.len() - 1;
        for (idx, conv) in self.convs.iter().enumerate() {
            let mut z = conv2d_forward(&activations[idx], &conv.weight, &conv.bias)?;
            if idx < last {
                for v in z.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z);
        }
        Ok(Forward { activations })
    }

    /// Propagates the loss gradient through the recorded forward pass and
    /// returns per-layer parameter gradients.
    pub fn backward(&self, fwd: &Forward, dout: &Tensor) -> Result<Gradients, ConvError> {
        if fwd.activations.len() != self.convs.len() + 1 {
            return Err(ConvError::StateError(format!(
                "{} recorded activations for {} layers",
                fwd.activations.len(),
                self.convs.len()
            )));
        }
        for (idx, conv) in self.convs.iter().enumerate() {
            let a = fwd.activations[idx].shape();
            if a[0] != conv.in_channels() {
                return Err(ConvError::StateError(format!(
                    "activation {idx} has {} channels, layer expects {}",
                    a[0],
                    conv.in_channels()
                )));
            }
        }
        if dout.shape() != fwd.output().shape() {
            return Err(ConvError::ShapeMismatch(format!(
                "loss gradient shape {:?} vs output {:?}",
                dout.shape(),
                fwd.output().shape()
            )));
        }

        let mut layers = vec![(Tensor::zeros(&[0]), Tensor::zeros(&[0])); self.convs.len()];
        let mut grad = dout.clone();
        let last = self.convs.len() - 1;
        for idx in (0..self.convs.len()).rev() {
            if idx < last {
                // ReLU gate: the stored activation is post-ReLU, so its
                // positive entries mark the pass-through positions.
                let post = &fwd.activations[idx + 1];
                for (g, &a) in grad.data_mut().iter_mut().zip(post.data()) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let (dx, dw, db) =
                conv2d_backward(&fwd.activations[idx], &self.convs[idx].weight, &grad)?;
            layers[idx] = (dw, db);
            grad = dx;
        }
        Ok(Gradients { layers })
    }

    /// One SGD step; errors if any parameter becomes non-finite.
    pub fn apply_step(&mut self, grads: &Gradients, lr: f64) -> Result<(), ConvError> {
        if grads.layers.len() != self.convs.len() {
            return Err(ConvError::ShapeMismatch(format!(
                "{} gradient entries for {} layers",
                grads.layers.len(),
                self.convs.len()
            )));
        }
        for (conv, (dw, db)) in self.convs.iter_mut().zip(&grads.layers) {
            if dw.shape() != conv.weight.shape() || db.shape() != conv.bias.shape() {
                return Err(ConvError::ShapeMismatch(
                    "gradient shape differs from parameter shape".into(),
                ));
            }
            for (p, g) in conv.weight.data_mut().iter_mut().zip(dw.data()) {
                *p -= lr * g;
            }
            for (p, g) in conv.bias.data_mut().iter_mut().zip(db.data()) {
                *p -= lr * g;
            }
            if conv.weight.data().iter().any(|v| !v.is_finite())
                || conv.bias.data().iter().any(|v| !v.is_finite())
            {
                return Err(ConvError::NonFinite("parameter update".into()));
            }
        }
        Ok(())
    }
}

/// The activation record of one forward pass: the input followed by each
/// layer's output (post-ReLU for hidden layers, raw logits at the end).
#[derive(Debug, Clone)]
pub struct Forward {
    activations: Vec<Tensor>,
}

impl Forward {
    pub fn output(&self) -> &Tensor {
        &self.activations[self.activations.len() - 1]
    }
}

/// Per-layer `(d_weight, d_bias)` in network order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Tensor, Tensor)>,
}

impl Gradients {
    /// Elementwise sum, for reducing gradients computed on separate items.
    pub fn add(&mut self, other: &Gradients) -> Result<(), ConvError> {
        if self.layers.len() != other.layers.len() {
            return Err(ConvError::ShapeMismatch(
                "gradient layer counts differ".into(),
            ));
        }
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            if w.shape() != ow.shape() || b.shape() != ob.shape() {
                return Err(ConvError::ShapeMismatch("gradient shapes differ".into()));
            }
            for (a, v) in w.data_mut().iter_mut().zip(ow.data()) {
                *a += v;
            }
            for (a, v) in b.data_mut().iter_mut().zip(ob.data()) {
                *a += v;
            }
        }
        Ok(())
    }
}

/// Stride-1 cross-correlation with zero padding `k/2`: output spatial size
/// equals input spatial size.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, ConvError> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 3 || ws.len() != 4 {
        return Err(ConvError::ShapeMismatch(format!(
            "conv expects 3-d input and 4-d weight, got {xs:?} and {ws:?}"
        )));
    }
    let (c_in, h, width) = (xs[0], xs[1], xs[2]);
    let (c_out, k) = (ws[0], ws[2]);
    if ws[1] != c_in || ws[3] != k || k % 2 == 0 {
        return Err(ConvError::ShapeMismatch(format!(
            "weight {ws:?} incompatible with input {xs:?}"
        )));
    }
    if b.shape() != [c_out] {
        return Err(ConvError::ShapeMismatch(format!(
            "bias shape {:?} for {c_out} output channels",
            b.shape()
        )));
    }
    let pad = k / 2;

    let mut out = Tensor::zeros(&[c_out, h, width]);
    let xd = x.data();
    let wd = w.data();
    let od = out.data_mut();
    for co in 0..c_out {
        let o_base = co * h * width;
        let bias = b.data()[co];
        od[o_base..o_base + h * width].fill(bias);
        for ci in 0..c_in {
            let x_base = ci * h * width;
            let w_base = (co * c_in + ci) * k * k;
            for dy in 0..k {
                for dx in 0..k {
                    let wv = wd[w_base + dy * k + dx];
                    if wv == 0.0 {
                        continue;
                    }
                    // Source row/col = output row/col + offset - pad.
                    let y_lo = pad.saturating_sub(dy);
                    let y_hi = (h + pad - dy).min(h);
                    let x_lo = pad.saturating_sub(dx);
                    let x_hi = (width + pad - dx).min(width);
                    for y in y_lo..y_hi {
                        let src_row = x_base + (y + dy - pad) * width;
                        let dst_row = o_base + y * width;
                        for xi in x_lo..x_hi {
                            od[dst_row + xi] += wv * xd[src_row + xi + dx - pad];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weight, and bias.
fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dout: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), ConvError> {
    let (xs, ws) = (x.shape(), w.shape());
    let (c_in, h, width) = (xs[0], xs[1], xs[2]);
    let (c_out, k) = (ws[0], ws[2]);
    if dout.shape() != [c_out, h, width] {
        return Err(ConvError::ShapeMismatch(format!(
            "upstream gradient {:?} for output [{c_out}, {h}, {width}]",
            dout.shape()
        )));
    }
    let pad = k / 2;

    let mut dx = Tensor::zeros(&[c_in, h, width]);
    let mut dw = Tensor::zeros(&[c_out, c_in, k, k]);
    let mut db = Tensor::zeros(&[c_out]);
    let xd = x.data();
    let wd = w.data();
    let gd = dout.data();

    for co in 0..c_out {
        let g_base = co * h * width;
        db.data_mut()[co] = gd[g_base..g_base + h * width].iter().sum();
        for ci in 0..c_in {
            let x_base = ci * h * width;
            let w_base = (co * c_in + ci) * k * k;
            for dy in 0..k {
                for dxo in 0..k {
                    let y_lo = pad.saturating_sub(dy);
                    let y_hi = (h + pad - dy).min(h);
                    let x_lo = pad.saturating_sub(dxo);
                    let x_hi = (width + pad - dxo).min(width);
                    let mut acc = 0.0;
                    let wv = wd[w_base + dy * k + dxo];
                    for y in y_lo..y_hi {
                        let src_row = x_base + (y + dy - pad) * width;
                        let g_row = g_base + y * width;
                        let dx_data = dx.data_mut();
                        for xi in x_lo..x_hi {
                            let g = gd[g_row + xi];
                            acc += g * xd[src_row + xi + dxo - pad];
                            dx_data[src_row + xi + dxo - pad] += g * wv;
                        }
                    }
                    dw.data_mut()[w_base + dy * k + dxo] = acc;
                }
            }
        }
    }
    Ok((dx, dw, db))
}

/// Argmax class per pixel of the network output.
pub fn predict_labels(net: &SegNet, input: &Tensor) -> Result<LabelMap, ConvError> {
    let fwd = net.forward(input)?;
    let out = fwd.output();
    let (classes, h, w) = (out.shape()[0], out.shape()[1], out.shape()[2]);
    let data = out.data();
    let mut labels = LabelMap::ignored(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for class in 0..classes {
                let v = data[(class * h + r) * w + c];
                if v > best_v {
                    best_v = v;
                    best = class;
                }
            }
            labels.set(r, c, best as u8);
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_by_one_conv_is_scalar_multiply() {
        let x = Tensor::from_data(&[1, 1, 1], vec![1.0]).unwrap();
        let w = Tensor::from_data(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let out = conv2d_forward(&x, &w, &b).unwrap();
        assert_eq!(out.data(), &[2.0]);
    }

    #[test]
    fn delta_input_imprints_kernel() {
        // The impulse response of a cross-correlation is the kernel
        // reflected through its center.
        let mut data = vec![0.0; 25];
        data[2 * 5 + 2] = 1.0;
        let x = Tensor::from_data(&[1, 5, 5], data).unwrap();
        let w = Tensor::from_data(
            &[1, 1, 3, 3],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let out = conv2d_forward(&x, &w, &Tensor::zeros(&[1])).unwrap();
        for dy in 0..3 {
            for dx in 0..3 {
                assert_eq!(
                    out.data()[(1 + dy) * 5 + (1 + dx)],
                    w.data()[(2 - dy) * 3 + (2 - dx)]
                );
            }
        }
        assert_eq!(out.data()[0], 0.0);
    }

    /// Direct transcription of the cross-correlation definition.
    fn reference_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let (c_in, h, width) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (c_out, k) = (w.shape()[0], w.shape()[2]);
        let pad = k as isize / 2;
        let mut out = Tensor::zeros(&[c_out, h, width]);
        for co in 0..c_out {
            for y in 0..h {
                for xx in 0..width {
                    let mut acc = b.data()[co];
                    for ci in 0..c_in {
                        for dy in 0..k {
                            for dx in 0..k {
                                let sy = y as isize + dy as isize - pad;
                                let sx = xx as isize + dx as isize - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= width as isize {
                                    continue;
                                }
                                acc += x.data()[(ci * h + sy as usize) * width + sx as usize]
                                    * w.data()[((co * c_in + ci) * k + dy) * k + dx];
                            }
                        }
                    }
                    out.data_mut()[(co * h + y) * width + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_reference_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::from_data(
            &[2, 5, 5],
            (0..50).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let w = Tensor::from_data(
            &[3, 2, 3, 3],
            (0..54).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b = Tensor::from_data(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let fast = conv2d_forward(&x, &w, &b).unwrap();
        let slow = reference_conv(&x, &w, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn conv_rejects_mismatched_shapes() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let w = Tensor::zeros(&[3, 1, 3, 3]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[3])).is_err());
        let w = Tensor::zeros(&[3, 2, 2, 2]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn param_count_ignores_level_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = SegNet::random(3, &[8, 8], 5, 3, &mut rng).unwrap();
        let expected = (8 * 3 * 9 + 8) + (8 * 8 * 9 + 8) + (5 * 8 + 5);
        assert_eq!(net.param_count(), expected);
        assert_eq!(net.n_classes(), 5);
        assert_eq!(net.layers().len(), 3);
        assert_eq!(net.layers()[2].kernel(), 1);
    }

    #[test]
    fn from_layers_validates_chaining() {
        let a = ConvLayer::new(Tensor::zeros(&[4, 3, 3, 3]), Tensor::zeros(&[4])).unwrap();
        let bad = ConvLayer::new(Tensor::zeros(&[2, 5, 1, 1]), Tensor::zeros(&[2])).unwrap();
        assert!(SegNet::from_layers(vec![a, bad]).is_err());
        assert!(SegNet::from_layers(vec![]).is_err());
        assert!(ConvLayer::new(Tensor::zeros(&[1, 1, 2, 2]), Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn predict_labels_takes_argmax() {
        let net = SegNet::from_layers(vec![ConvLayer::new(
            Tensor::from_data(&[2, 1, 1, 1], vec![1.0, -1.0]).unwrap(),
            Tensor::zeros(&[2]),
        )
        .unwrap()])
        .unwrap();
        let x = Tensor::from_data(&[1, 1, 2], vec![3.0, -3.0]).unwrap();
        let labels = predict_labels(&net, &x).unwrap();
        assert_eq!(labels.get(0, 0), 0);
        assert_eq!(labels.get(0, 1), 1);
    }

    #[test]
    fn backward_rejects_foreign_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = SegNet::random(1, &[2], 2, 3, &mut rng).unwrap();
        let other = SegNet::random(1, &[], 2, 3, &mut rng).unwrap();
        let x = Tensor::zeros(&[1, 3, 3]);
        let fwd = other.forward(&x).unwrap();
        let dout = Tensor::zeros(&[2, 3, 3]);
        assert!(matches!(
            net.backward(&fwd, &dout),
            Err(ConvError::StateError(_))
        ));
    }
}
