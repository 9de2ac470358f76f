//! 2x2 stride-2 max pooling with argmax routing for the backward pass.

use crate::tensor::{Real, Tensor};

/// Flat input indices of each pooled maximum, one per output element.
#[derive(Debug, Clone)]
pub struct PoolMask {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Max over non-overlapping 2x2 windows; odd trailing rows/columns are
/// dropped. Ties resolve to the first element in row-major window order.
pub fn maxpool2x2<T: Real>(input: &Tensor<T>) -> (Tensor<T>, PoolMask) {
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    assert!(h >= 2 && w >= 2, "maxpool2x2 needs H,W >= 2, got {h}x{w}");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = vec![0usize; n * c * oh * ow];
    let src = input.data();
    let dst = out.data_mut();

    for plane in 0..n * c {
        let in_base = plane * h * w;
        let out_base = plane * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = in_base + (2 * oy) * w + 2 * ox;
                let mut best = src[best_idx];
                for (dy, dx) in [(0usize, 1usize), (1, 0), (1, 1)] {
                    let idx = in_base + (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > best {
                        best = src[idx];
                        best_idx = idx;
                    }
                }
                dst[out_base + oy * ow + ox] = best;
                argmax[out_base + oy * ow + ox] = best_idx;
            }
        }
    }
    (
        out,
        PoolMask {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    )
}

/// Routes the upstream gradient to the argmax position of each window.
pub fn maxpool2x2_backward<T: Real>(upstream: &Tensor<T>, mask: &PoolMask) -> Tensor<T> {
    assert_eq!(upstream.len(), mask.argmax.len());
    let mut dinput = Tensor::zeros(&mask.input_shape);
    let d = dinput.data_mut();
    for (&idx, &g) in mask.argmax.iter().zip(upstream.iter()) {
        d[idx] += g;
    }
    dinput
}
