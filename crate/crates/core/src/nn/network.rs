use rand::Rng;

use super::loss::{cross_entropy, cross_entropy_logit_grad, softmax};
use super::spec::LayerPlan;
use super::{DropoutMask, LayerKind, NetworkSpec, NnError, Result, Tensor, WeightVector};

pub type Gradient = WeightVector;

/// He-uniform weights (limit `sqrt(6 / fan_in)`), zero biases.
pub fn init_weights<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> WeightVector {
    let mut w = vec![0.0; spec.param_count()];
    for (layer, plan) in spec.layers().iter().zip(spec.plan()) {
        let (fan_in, n_weights) = match layer.kind {
            LayerKind::Convolution { filters, kernel, .. } => {
                let fan_in = kernel * kernel * plan.in_shape[2];
                (fan_in, fan_in * filters)
            }
            LayerKind::FullyConnected { outputs } => (plan.in_len(), plan.in_len() * outputs),
            LayerKind::Relu | LayerKind::Flatten => continue,
        };
        let limit = (6.0 / fan_in as f64).sqrt();
        for v in &mut w[plan.param_offset..plan.param_offset + n_weights] {
            *v = rng.random_range(-limit..limit);
        }
    }
    WeightVector(w)
}

/// Logits for one input. With a mask, dropped inputs are zeroed and survivors
/// scaled by `1 / (1 - rate)`.
pub fn forward(
    spec: &NetworkSpec,
    w: &WeightVector,
    input: &Tensor,
    mask: Option<&DropoutMask>,
) -> Result<Tensor> {
    if input.shape() != spec.input_shape() {
        return Err(NnError::Shape {
            expected: spec.input_shape().to_vec(),
            actual: input.shape().to_vec(),
        });
    }
    let logits = logits(spec, w.as_slice(), input.data(), mask)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("logits"));
    }
    Tensor::vector(logits)
}

/// Slice-level forward pass used by the samplers; `input` is the flattened tensor.
pub fn logits(
    spec: &NetworkSpec,
    w: &[f64],
    input: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<Vec<f64>> {
    check_args(spec, w, input, mask)?;
    let mut x = input.to_vec();
    for (i, (layer, plan)) in spec.layers().iter().zip(spec.plan()).enumerate() {
        apply_mask(&mut x, layer.dropout_rate, mask.and_then(|m| m.layer(i)));
        x = layer_forward(layer.kind, plan, w, &x);
    }
    Ok(x)
}

/// Gradient of `cross_entropy(softmax(forward(..)), label)` with respect to the weights.
pub fn backward(
    spec: &NetworkSpec,
    w: &WeightVector,
    input: &Tensor,
    label: usize,
    mask: Option<&DropoutMask>,
) -> Result<Gradient> {
    if input.shape() != spec.input_shape() {
        return Err(NnError::Shape {
            expected: spec.input_shape().to_vec(),
            actual: input.shape().to_vec(),
        });
    }
    let mut grad = vec![0.0; spec.param_count()];
    loss_and_gradient(spec, w.as_slice(), input.data(), label, mask, &mut grad)?;
    Ok(WeightVector(grad))
}

/// Forward and backward in one pass. The gradient is *added* into `grad`; the loss
/// and the softmax probabilities are returned.
pub fn loss_and_gradient(
    spec: &NetworkSpec,
    w: &[f64],
    input: &[f64],
    label: usize,
    mask: Option<&DropoutMask>,
    grad: &mut [f64],
) -> Result<(f64, Vec<f64>)> {
    check_args(spec, w, input, mask)?;
    if label >= spec.num_classes() {
        return Err(NnError::Label {
            label,
            classes: spec.num_classes(),
        });
    }
    if grad.len() != w.len() {
        return Err(NnError::Length(grad.len(), w.len()));
    }
    // inputs[i] is what layer i actually consumed (after dropout).
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(spec.layers().len());
    let mut x = input.to_vec();
    for (i, (layer, plan)) in spec.layers().iter().zip(spec.plan()).enumerate() {
        apply_mask(&mut x, layer.dropout_rate, mask.and_then(|m| m.layer(i)));
        let y = layer_forward(layer.kind, plan, w, &x);
        inputs.push(std::mem::replace(&mut x, y));
    }
    let probs = softmax(&x);
    let loss = cross_entropy(&probs, label)?;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("loss"));
    }
    let mut g = cross_entropy_logit_grad(&probs, label)?;
    for (i, (layer, plan)) in spec.layers().iter().zip(spec.plan()).enumerate().rev() {
        let input = inputs.pop().unwrap_or_default();
        let need_input_grad = i > 0;
        let mut g_in = layer_backward(layer.kind, plan, w, &input, &g, grad, need_input_grad);
        if need_input_grad {
            apply_mask(&mut g_in, layer.dropout_rate, mask.and_then(|m| m.layer(i)));
        }
        g = g_in;
    }
    Ok((loss, probs))
}

fn check_args(spec: &NetworkSpec, w: &[f64], input: &[f64], mask: Option<&DropoutMask>) -> Result<()> {
    let expected: usize = spec.input_shape().iter().product();
    if input.len() != expected {
        return Err(NnError::Shape {
            expected: spec.input_shape().to_vec(),
            actual: vec![input.len()],
        });
    }
    if w.len() != spec.param_count() {
        return Err(NnError::WeightLength {
            expected: spec.param_count(),
            actual: w.len(),
        });
    }
    if let Some(m) = mask {
        m.check(spec)?;
    }
    Ok(())
}

fn apply_mask(x: &mut [f64], rate: f64, bits: Option<&[bool]>) {
    if let Some(bits) = bits {
        let scale = 1.0 / (1.0 - rate);
        for (v, &keep) in x.iter_mut().zip(bits) {
            *v = if keep { *v * scale } else { 0.0 };
        }
    }
}

fn layer_forward(kind: LayerKind, plan: &LayerPlan, w: &[f64], x: &[f64]) -> Vec<f64> {
    match kind {
        LayerKind::Convolution {
            filters,
            kernel,
            stride,
        } => {
            let (in_w, c) = (plan.in_shape[1], plan.in_shape[2]);
            let (oh, ow) = (plan.out_shape[0], plan.out_shape[1]);
            let n_weights = filters * kernel * kernel * c;
            let weights = &w[plan.param_offset..plan.param_offset + n_weights];
            let biases = &w[plan.param_offset + n_weights..plan.param_offset + plan.param_count];
            let span = kernel * c;
            let mut out = vec![0.0; oh * ow * filters];
            for oy in 0..oh {
                for ox in 0..ow {
                    let cell = &mut out[(oy * ow + ox) * filters..(oy * ow + ox + 1) * filters];
                    cell.copy_from_slice(biases);
                    for ky in 0..kernel {
                        let start = ((oy * stride + ky) * in_w + ox * stride) * c;
                        let patch = &x[start..start + span];
                        for (f, acc) in cell.iter_mut().enumerate() {
                            let wrow = &weights[(f * kernel + ky) * span..(f * kernel + ky + 1) * span];
                            *acc += dot(wrow, patch);
                        }
                    }
                }
            }
            out
        }
        LayerKind::FullyConnected { outputs } => {
            let n_in = x.len();
            let weights = &w[plan.param_offset..plan.param_offset + outputs * n_in];
            let biases = &w[plan.param_offset + outputs * n_in..plan.param_offset + plan.param_count];
            weights
                .chunks_exact(n_in)
                .zip(biases)
                .map(|(row, b)| b + dot(row, x))
                .collect()
        }
        LayerKind::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
        LayerKind::Flatten => x.to_vec(),
    }
}

/// Accumulates parameter gradients into `grad` and returns the gradient with respect
/// to the layer input (empty when `need_input_grad` is false).
fn layer_backward(
    kind: LayerKind,
    plan: &LayerPlan,
    w: &[f64],
    x: &[f64],
    g: &[f64],
    grad: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    match kind {
        LayerKind::Convolution {
            filters,
            kernel,
            stride,
        } => {
            let (in_w, c) = (plan.in_shape[1], plan.in_shape[2]);
            let (oh, ow) = (plan.out_shape[0], plan.out_shape[1]);
            let n_weights = filters * kernel * kernel * c;
            let weights = &w[plan.param_offset..plan.param_offset + n_weights];
            let (gw, gb) = grad[plan.param_offset..plan.param_offset + plan.param_count].split_at_mut(n_weights);
            let span = kernel * c;
            let mut gx = if need_input_grad { vec![0.0; x.len()] } else { Vec::new() };
            for oy in 0..oh {
                for ox in 0..ow {
                    let cell = &g[(oy * ow + ox) * filters..(oy * ow + ox + 1) * filters];
                    for (b, &gv) in gb.iter_mut().zip(cell) {
                        *b += gv;
                    }
                    for ky in 0..kernel {
                        let start = ((oy * stride + ky) * in_w + ox * stride) * c;
                        let patch = &x[start..start + span];
                        for (f, &gv) in cell.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let off = (f * kernel + ky) * span;
                            for (acc, &xv) in gw[off..off + span].iter_mut().zip(patch) {
                                *acc += gv * xv;
                            }
                            if need_input_grad {
                                for (acc, &wv) in gx[start..start + span].iter_mut().zip(&weights[off..off + span]) {
                                    *acc += gv * wv;
                                }
                            }
                        }
                    }
                }
            }
            gx
        }
        LayerKind::FullyConnected { outputs } => {
            let n_in = x.len();
            let weights = &w[plan.param_offset..plan.param_offset + outputs * n_in];
            let (gw, gb) = grad[plan.param_offset..plan.param_offset + plan.param_count].split_at_mut(outputs * n_in);
            let mut gx = if need_input_grad { vec![0.0; n_in] } else { Vec::new() };
            for (o, &gv) in g.iter().enumerate() {
                gb[o] += gv;
                if gv == 0.0 {
                    continue;
                }
                for (acc, &xv) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *acc += gv * xv;
                }
                if need_input_grad {
                    for (acc, &wv) in gx.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *acc += gv * wv;
                    }
                }
            }
            gx
        }
        LayerKind::Relu => g
            .iter()
            .zip(x)
            .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
            .collect(),
        LayerKind::Flatten => g.to_vec(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{sample_dropout_mask, LayerSpec};
    use crate::rng::seeded;

    #[test]
    fn identity_layer() {
        let spec = NetworkSpec::new(vec![2], vec![LayerSpec::fc(2)], 2).unwrap();
        let w = WeightVector(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let x = Tensor::vector(vec![0.3, -0.7]).unwrap();
        assert_eq!(forward(&spec, &w, &x, None).unwrap().data(), &[0.3, -0.7]);
    }

    #[test]
    fn keep_all_mask_scales_by_inverse_keep_rate() {
        let spec = NetworkSpec::new(vec![3], vec![LayerSpec::fc(2).with_dropout(0.5)], 2).unwrap();
        let w = WeightVector(vec![0.2, -0.4, 1.0, 0.5, 0.1, -0.3, 0.05, -0.07]);
        let x = Tensor::vector(vec![1.0, 2.0, -1.5]).unwrap();
        let plain = forward(&spec, &w, &x, None).unwrap();
        let masked = forward(&spec, &w, &x, Some(&DropoutMask::keep_all(&spec))).unwrap();
        let bias = [0.05, -0.07];
        for ((m, p), b) in masked.data().iter().zip(plain.data()).zip(bias) {
            assert!((m - b - 2.0 * (p - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_logistic_bias_gradient() {
        let spec = NetworkSpec::new(vec![4], vec![LayerSpec::fc(3)], 3).unwrap();
        let w = WeightVector::zeros(spec.param_count());
        let x = Tensor::vector(vec![0.0; 4]).unwrap();
        let g = backward(&spec, &w, &x, 1, None).unwrap();
        let expected = [1.0 / 3.0, 1.0 / 3.0 - 1.0, 1.0 / 3.0];
        for (gb, e) in g.0[12..].iter().zip(expected) {
            assert!((gb - e).abs() < 1e-11);
        }
        assert!(g.0[..12].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropped_units_get_no_gradient() {
        let spec = NetworkSpec::new(
            vec![3],
            vec![LayerSpec::fc(4), LayerSpec::relu(), LayerSpec::fc(2).with_dropout(0.5)],
            2,
        )
        .unwrap();
        let w = init_weights(&spec, &mut seeded(2));
        let x = Tensor::vector(vec![0.5, -1.0, 2.0]).unwrap();
        let mask = DropoutMask::new(&spec, vec![None, None, Some(vec![true, false, true, true])]).unwrap();
        let g = backward(&spec, &w, &x, 0, Some(&mask)).unwrap();
        // Unit 1 of the hidden layer feeds only the dropped input, so its incoming
        // weights, its bias and its outgoing weights all have zero gradient.
        for i in 0..3 {
            assert_eq!(g.0[3 + i], 0.0);
        }
        assert_eq!(g.0[12 + 1], 0.0);
        assert_eq!(g.0[16 + 1], 0.0);
        assert_eq!(g.0[16 + 4 + 1], 0.0);
    }

    #[test]
    fn forward_is_pure() {
        let spec = NetworkSpec::steering(20, [0.1, 0.08, 0.08]).unwrap();
        let mut rng = seeded(5);
        let w = init_weights(&spec, &mut rng);
        let x = Tensor::new(vec![48, 64, 1], (0..3072).map(|i| (i % 255) as f64 / 255.0).collect()).unwrap();
        let mask = sample_dropout_mask(&spec, &mut rng);
        let a = forward(&spec, &w, &x, Some(&mask)).unwrap();
        let b = forward(&spec, &w, &x, Some(&mask)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn shape_errors() {
        let spec = NetworkSpec::new(vec![2], vec![LayerSpec::fc(2)], 2).unwrap();
        let w = WeightVector::zeros(6);
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(forward(&spec, &w, &x, None), Err(NnError::Shape { .. })));
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            forward(&spec, &WeightVector::zeros(5), &x, None),
            Err(NnError::WeightLength { .. })
        ));
        assert!(matches!(backward(&spec, &w, &x, 2, None), Err(NnError::Label { .. })));
    }
}
