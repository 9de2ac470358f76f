//! Fully-connected layer over flattened feature maps.

use super::NnError;
use crate::tensor::{fmt_shape, Real, Tensor};

#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Weights laid out as (out_dim, in_dim).
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            in_dim,
            out_dim,
            weights: Tensor::zeros(&[out_dim, in_dim]),
            bias: vec![T::zero(); out_dim],
        }
    }
}

/// `logits[b,j] = bias[j] + sum_i input[b,i] * w[j,i]` for a (B, in_dim)
/// input batch.
pub fn fully_connected_forward<T: Real>(
    input: &Tensor<T>,
    layer: &Linear<T>,
) -> Result<Tensor<T>, NnError> {
    if input.shape().len() != 2 || input.dim(1) != layer.in_dim {
        return Err(NnError::ShapeMismatch {
            layer: format!("fully-connected {}->{}", layer.in_dim, layer.out_dim),
            expected: format!("Bx{}", layer.in_dim),
            actual: fmt_shape(input.shape()),
        });
    }
    let b = input.dim(0);
    let mut out = Tensor::zeros(&[b, layer.out_dim]);
    let odata = out.data_mut();
    let wdata = layer.weights.data();
    for img in 0..b {
        let in_row = &input.data()[img * layer.in_dim..][..layer.in_dim];
        for j in 0..layer.out_dim {
            let w_row = &wdata[j * layer.in_dim..][..layer.in_dim];
            let mut acc = layer.bias[j];
            for (x, w) in in_row.iter().zip(w_row) {
                acc += *x * *w;
            }
            odata[img * layer.out_dim + j] = acc;
        }
    }
    Ok(out)
}

/// Gradients for [`fully_connected_forward`]: returns
/// `(input_grad, weight_grad, bias_grad)`.
pub fn fully_connected_backward<T: Real>(
    input: &Tensor<T>,
    layer: &Linear<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>), NnError> {
    let b = input.dim(0);
    if upstream.shape() != [b, layer.out_dim] {
        return Err(NnError::ShapeMismatch {
            layer: format!("fully-connected {}->{} backward", layer.in_dim, layer.out_dim),
            expected: fmt_shape(&[b, layer.out_dim]),
            actual: fmt_shape(upstream.shape()),
        });
    }
    let mut dinput = Tensor::zeros(&[b, layer.in_dim]);
    let mut dweights = Tensor::zeros(&[layer.out_dim, layer.in_dim]);
    let mut dbias = vec![T::zero(); layer.out_dim];
    let wdata = layer.weights.data();
    let dw = dweights.data_mut();
    for img in 0..b {
        let in_row = &input.data()[img * layer.in_dim..][..layer.in_dim];
        let up_row = &upstream.data()[img * layer.out_dim..][..layer.out_dim];
        let din_row = &mut dinput.data_mut()[img * layer.in_dim..][..layer.in_dim];
        for j in 0..layer.out_dim {
            let u = up_row[j];
            dbias[j] += u;
            let w_row = &wdata[j * layer.in_dim..][..layer.in_dim];
            let dw_row = &mut dw[j * layer.in_dim..][..layer.in_dim];
            for i in 0..layer.in_dim {
                din_row[i] += u * w_row[i];
                dw_row[i] += u * in_row[i];
            }
        }
    }
    Ok((dinput, dweights, dbias))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = Linear::<f64>::zeros(3, 3);
        for i in 0..3 {
            layer.weights.data_mut()[i * 3 + i] = 1.0;
        }
        let input = Tensor::from_vec(&[1, 3], vec![0.5, -1.0, 2.0]);
        let out = fully_connected_forward(&input, &layer).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_weights_return_bias() {
        let mut layer = Linear::<f64>::zeros(4, 2);
        layer.bias = vec![0.7, -0.2];
        let input = Tensor::from_vec(&[2, 4], vec![1.0; 8]);
        let out = fully_connected_forward(&input, &layer).unwrap();
        assert_eq!(out.data(), &[0.7, -0.2, 0.7, -0.2]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let layer = Linear::<f64>::zeros(4, 2);
        let input = Tensor::from_vec(&[1, 3], vec![1.0; 3]);
        assert!(fully_connected_forward(&input, &layer).is_err());
    }
}
