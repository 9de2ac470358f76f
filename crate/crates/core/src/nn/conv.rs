//! Same-padded stride-1 convolution for rectangular kernels, plus the
//! channel concatenation that joins parallel branches of one layer.
//!
//! A branch holds every kernel of one shape within a layer. Padding is
//! `(kh-1)/2` rows and `(kw-1)/2` columns of zeros per side; all supported
//! kernel dims are odd, so padding is symmetric and the output feature map
//! keeps the input's height and width.

use super::NnError;
use crate::tensor::{fmt_shape, Real, Tensor};

/// One group of same-shaped kernels inside a mixed convolutional layer.
#[derive(Debug, Clone)]
pub struct ConvBranch<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    /// Weights laid out as (out_channels, in_channels, kernel_h, kernel_w).
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvBranch<T> {
    /// Branch with explicit weights; validates the weight tensor layout.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        weights: Tensor<T>,
        bias: Vec<T>,
    ) -> Self {
        assert!(
            matches!(kernel_h, 1 | 3 | 5) && matches!(kernel_w, 1 | 3 | 5),
            "kernel dims must be odd and within 1..=5, got {kernel_h}x{kernel_w}"
        );
        assert!(out_channels >= 1);
        assert_eq!(
            weights.shape(),
            &[out_channels, in_channels, kernel_h, kernel_w]
        );
        assert_eq!(bias.len(), out_channels);
        ConvBranch {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            weights,
            bias,
        }
    }

    /// Zero-initialized branch (weights filled in later by the initializer).
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        let weights = Tensor::zeros(&[out_channels, in_channels, kernel_h, kernel_w]);
        ConvBranch::new(
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            weights,
            vec![T::zero(); out_channels],
        )
    }

    pub fn pad_h(&self) -> usize {
        (self.kernel_h - 1) / 2
    }

    pub fn pad_w(&self) -> usize {
        (self.kernel_w - 1) / 2
    }
}

fn check_input<T: Real>(input: &Tensor<T>, branch: &ConvBranch<T>) -> Result<(), NnError> {
    if input.shape().len() != 4 || input.dim(1) != branch.in_channels {
        return Err(NnError::ShapeMismatch {
            layer: format!("conv {}x{}", branch.kernel_h, branch.kernel_w),
            expected: format!("Nx{}xHxW", branch.in_channels),
            actual: fmt_shape(input.shape()),
        });
    }
    Ok(())
}

/// Copies (N,C,H,W) into a zero-padded (N,C,H+2ph,W+2pw) buffer.
fn pad_nchw<T: Real>(input: &Tensor<T>, ph: usize, pw: usize) -> Tensor<T> {
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    if ph == 0 && pw == 0 {
        return input.clone();
    }
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut padded = Tensor::zeros(&[n, c, hp, wp]);
    let src = input.data();
    let dst = padded.data_mut();
    for plane in 0..n * c {
        for y in 0..h {
            let s = plane * h * w + y * w;
            let d = plane * hp * wp + (y + ph) * wp + pw;
            dst[d..d + w].copy_from_slice(&src[s..s + w]);
        }
    }
    padded
}

/// Crops the padding back off a (N,C,H+2ph,W+2pw) gradient buffer.
fn unpad_nchw<T: Real>(padded: &Tensor<T>, ph: usize, pw: usize) -> Tensor<T> {
    let (n, c, hp, wp) = (padded.dim(0), padded.dim(1), padded.dim(2), padded.dim(3));
    if ph == 0 && pw == 0 {
        return padded.clone();
    }
    let (h, w) = (hp - 2 * ph, wp - 2 * pw);
    let mut out = Tensor::zeros(&[n, c, h, w]);
    let src = padded.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        for y in 0..h {
            let s = plane * hp * wp + (y + ph) * wp + pw;
            let d = plane * h * w + y * w;
            dst[d..d + w].copy_from_slice(&src[s..s + w]);
        }
    }
    out
}

/// Same-padded stride-1 convolution of a (N,Cin,H,W) input with one branch.
///
/// `out[n,oc,y,x] = bias[oc] + sum over (ic,ky,kx) of
/// padded_in[n,ic,y+ky,x+kx] * w[oc,ic,ky,kx]`; out-of-bounds taps read 0.
/// Output keeps the input's H and W.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    branch: &ConvBranch<T>,
) -> Result<Tensor<T>, NnError> {
    check_input(input, branch)?;
    let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    let (kh, kw) = (branch.kernel_h, branch.kernel_w);
    let (ph, pw) = (branch.pad_h(), branch.pad_w());
    let wp = w + 2 * pw;
    let hp = h + 2 * ph;

    let padded = pad_nchw(input, ph, pw);
    let pdata = padded.data();
    let wdata = branch.weights.data();
    let mut out = Tensor::zeros(&[n, branch.out_channels, h, w]);
    let odata = out.data_mut();

    for img in 0..n {
        for oc in 0..branch.out_channels {
            let out_plane = &mut odata[(img * branch.out_channels + oc) * h * w..][..h * w];
            out_plane.fill(branch.bias[oc]);
            for ic in 0..cin {
                let in_plane = &pdata[(img * cin + ic) * hp * wp..][..hp * wp];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wdata[((oc * cin + ic) * kh + ky) * kw + kx];
                        for y in 0..h {
                            let in_row = &in_plane[(y + ky) * wp + kx..][..w];
                            let out_row = &mut out_plane[y * w..][..w];
                            for (o, i) in out_row.iter_mut().zip(in_row) {
                                *o += wv * *i;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Convolution identical to [`conv2d_forward`] but written as a transparent
/// scalar loop that bumps `mults` once per executed multiplication,
/// including taps that land on padding. This is the instrumented oracle the
/// analytic cost model is checked against, so it must stay a plain
/// tap-by-tap sweep.
pub fn conv2d_forward_counted<T: Real>(
    input: &Tensor<T>,
    branch: &ConvBranch<T>,
    mults: &mut u64,
) -> Result<Tensor<T>, NnError> {
    check_input(input, branch)?;
    let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    let (kh, kw) = (branch.kernel_h, branch.kernel_w);
    let (ph, pw) = (branch.pad_h(), branch.pad_w());
    let wp = w + 2 * pw;
    let hp = h + 2 * ph;

    let padded = pad_nchw(input, ph, pw);
    let pdata = padded.data();
    let wdata = branch.weights.data();
    let mut out = Tensor::zeros(&[n, branch.out_channels, h, w]);
    let odata = out.data_mut();

    for img in 0..n {
        for oc in 0..branch.out_channels {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = branch.bias[oc];
                    for ic in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iv = pdata
                                    [((img * cin + ic) * hp + y + ky) * wp + x + kx];
                                let wv = wdata[((oc * cin + ic) * kh + ky) * kw + kx];
                                acc = acc + iv * wv;
                                *mults += 1;
                            }
                        }
                    }
                    odata[((img * branch.out_channels + oc) * h + y) * w + x] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Reverse-mode gradients for [`conv2d_forward`].
///
/// Returns `(input_grad, weight_grad, bias_grad)` for an upstream gradient
/// of the same shape as the forward output.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    branch: &ConvBranch<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>), NnError> {
    check_input(input, branch)?;
    let (n, cin, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    if upstream.shape() != [n, branch.out_channels, h, w] {
        return Err(NnError::ShapeMismatch {
            layer: format!("conv {}x{} backward", branch.kernel_h, branch.kernel_w),
            expected: fmt_shape(&[n, branch.out_channels, h, w]),
            actual: fmt_shape(upstream.shape()),
        });
    }
    let (kh, kw) = (branch.kernel_h, branch.kernel_w);
    let (ph, pw) = (branch.pad_h(), branch.pad_w());
    let wp = w + 2 * pw;
    let hp = h + 2 * ph;

    let padded = pad_nchw(input, ph, pw);
    let pdata = padded.data();
    let wdata = branch.weights.data();
    let udata = upstream.data();

    let mut dpadded = Tensor::<T>::zeros(&[n, cin, hp, wp]);
    let mut dweights = Tensor::<T>::zeros(&[branch.out_channels, cin, kh, kw]);
    let mut dbias = vec![T::zero(); branch.out_channels];
    let dp = dpadded.data_mut();
    let dw = dweights.data_mut();

    for img in 0..n {
        for oc in 0..branch.out_channels {
            let up_plane = &udata[(img * branch.out_channels + oc) * h * w..][..h * w];
            let mut bias_acc = T::zero();
            for v in up_plane {
                bias_acc += *v;
            }
            dbias[oc] += bias_acc;
            for ic in 0..cin {
                let in_plane = &pdata[(img * cin + ic) * hp * wp..][..hp * wp];
                let din_plane = &mut dp[(img * cin + ic) * hp * wp..][..hp * wp];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let widx = ((oc * cin + ic) * kh + ky) * kw + kx;
                        let wv = wdata[widx];
                        let mut wacc = T::zero();
                        for y in 0..h {
                            let up_row = &up_plane[y * w..][..w];
                            let off = (y + ky) * wp + kx;
                            let in_row = &in_plane[off..][..w];
                            let din_row = &mut din_plane[off..][..w];
                            for ((u, i), di) in up_row.iter().zip(in_row).zip(din_row) {
                                wacc += *u * *i;
                                *di += wv * *u;
                            }
                        }
                        dw[widx] += wacc;
                    }
                }
            }
        }
    }
    Ok((unpad_nchw(&dpadded, ph, pw), dweights, dbias))
}

/// Concatenates feature maps along the channel axis. Callers pass parts in
/// catalogue-ID order of their source branches so the channel layout is
/// deterministic.
pub fn concat_channels<T: Real>(parts: &[Tensor<T>]) -> Result<Tensor<T>, NnError> {
    assert!(!parts.is_empty(), "concat of zero parts");
    let (n, h, w) = (parts[0].dim(0), parts[0].dim(2), parts[0].dim(3));
    for (i, p) in parts.iter().enumerate() {
        if p.dim(0) != n || p.dim(2) != h || p.dim(3) != w {
            return Err(NnError::ConcatMismatch {
                part: i,
                expected: format!("{}x_x{}x{}", n, h, w),
                actual: fmt_shape(p.shape()),
            });
        }
    }
    let c_total: usize = parts.iter().map(|p| p.dim(1)).sum();
    let mut out = Tensor::zeros(&[n, c_total, h, w]);
    let plane = h * w;
    let odata = out.data_mut();
    for img in 0..n {
        let mut c_off = 0;
        for p in parts {
            let c = p.dim(1);
            let src = &p.data()[img * c * plane..][..c * plane];
            let dst = &mut odata[(img * c_total + c_off) * plane..][..c * plane];
            dst.copy_from_slice(src);
            c_off += c;
        }
    }
    Ok(out)
}

/// Splits an upstream gradient of a concatenated tensor back into per-part
/// gradients; exact inverse of [`concat_channels`].
pub fn split_grad<T: Real>(grad: &Tensor<T>, channel_counts: &[usize]) -> Vec<Tensor<T>> {
    let (n, c_total, h, w) = (grad.dim(0), grad.dim(1), grad.dim(2), grad.dim(3));
    assert_eq!(channel_counts.iter().sum::<usize>(), c_total);
    let plane = h * w;
    let gdata = grad.data();
    let mut parts: Vec<Tensor<T>> = channel_counts
        .iter()
        .map(|&c| Tensor::zeros(&[n, c, h, w]))
        .collect();
    for img in 0..n {
        let mut c_off = 0;
        for (part, &c) in parts.iter_mut().zip(channel_counts) {
            let src = &gdata[(img * c_total + c_off) * plane..][..c * plane];
            let dst = &mut part.data_mut()[img * c * plane..][..c * plane];
            dst.copy_from_slice(src);
            c_off += c;
        }
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn branch_with(
        in_c: usize,
        out_c: usize,
        kh: usize,
        kw: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> ConvBranch<f64> {
        ConvBranch::new(
            in_c,
            out_c,
            kh,
            kw,
            Tensor::from_vec(&[out_c, in_c, kh, kw], weights),
            bias,
        )
    }

    #[test]
    fn one_by_one_identity_passes_input_through() {
        let input = Tensor::from_vec(&[1, 1, 2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]);
        let branch = branch_with(1, 1, 1, 1, vec![1.0], vec![0.0]);
        let out = conv2d_forward(&input, &branch).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn column_kernel_on_ones_matches_hand_slide() {
        // 3x3 of ones, single 3x1 kernel of ones: vertical same padding only,
        // so each column reads (2, 3, 2) top to bottom.
        let input = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]);
        let branch = branch_with(1, 1, 3, 1, vec![1.0, 1.0, 1.0], vec![0.0]);
        let out = conv2d_forward(&input, &branch).unwrap();
        assert_eq!(
            out.data(),
            &[2.0, 2.0, 2.0, 3.0, 3.0, 3.0, 2.0, 2.0, 2.0]
        );
    }

    #[test]
    fn row_kernel_matches_hand_slide() {
        // 2x2 input [[1,2],[3,4]], 1x3 kernel (1,0,-1): hand-run windows give
        // [[-2,1],[-4,3]].
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let branch = branch_with(1, 1, 1, 3, vec![1.0, 0.0, -1.0], vec![0.0]);
        let out = conv2d_forward(&input, &branch).unwrap();
        assert_eq!(out.data(), &[-2.0, 1.0, -4.0, 3.0]);
    }

    #[test]
    fn counted_forward_agrees_with_fast_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let input = Tensor::from_vec(
            &[2, 3, 5, 4],
            (0..2 * 3 * 5 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let branch = branch_with(
            3,
            2,
            3,
            5,
            (0..2 * 3 * 3 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            vec![0.3, -0.1],
        );
        let fast = conv2d_forward(&input, &branch).unwrap();
        let mut mults = 0;
        let counted = conv2d_forward_counted(&input, &branch, &mut mults).unwrap();
        assert_eq!(mults, (2 * 5 * 4) as u64 * (2 * 3 * 3 * 5) as u64);
        for (a, b) in fast.iter().zip(counted.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let branch = branch_with(1, 1, 3, 3, vec![0.5; 9], vec![0.1]);
        let upstream = Tensor::zeros(&[1, 1, 2, 2]);
        let (di, dw, db) = conv2d_backward(&input, &branch, &upstream).unwrap();
        assert!(di.iter().all(|&v| v == 0.0));
        assert!(dw.iter().all(|&v| v == 0.0));
        assert!(db.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_branch_linearity_grads() {
        // loss = sum(out) with a 1x1 identity branch: input grad is all ones,
        // weight grad is the sum of the input.
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let branch = branch_with(1, 1, 1, 1, vec![1.0], vec![0.0]);
        let upstream = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0; 4]);
        let (di, dw, db) = conv2d_backward(&input, &branch, &upstream).unwrap();
        assert_eq!(di.data(), &[1.0; 4]);
        assert_eq!(dw.data(), &[10.0]);
        assert_eq!(db, vec![4.0]);
    }

    #[test]
    fn concat_single_part_is_identity() {
        let t = Tensor::from_vec(&[1, 2, 2, 2], (0..8).map(|v| v as f64).collect());
        let out = concat_channels(std::slice::from_ref(&t)).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn concat_preserves_part_order_and_counts() {
        let a = Tensor::from_vec(&[1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::from_vec(&[1, 3, 1, 2], vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let out = concat_channels(&[a, b]).unwrap();
        assert_eq!(out.shape(), &[1, 5, 1, 2]);
        assert_eq!(
            out.data(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
        );
    }

    #[test]
    fn concat_rejects_mismatched_spatial_dims() {
        let a = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let b = Tensor::<f64>::zeros(&[1, 1, 3, 2]);
        let err = concat_channels(&[a, b]).unwrap_err();
        assert!(matches!(err, NnError::ConcatMismatch { part: 1, .. }));
    }

    #[test]
    fn concat_then_split_recovers_parts_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let parts: Vec<Tensor<f64>> = [2usize, 3, 1]
            .iter()
            .map(|&c| {
                Tensor::from_vec(
                    &[2, c, 3, 3],
                    (0..2 * c * 9).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                )
            })
            .collect();
        let joined = concat_channels(&parts).unwrap();
        let split = split_grad(&joined, &[2, 3, 1]);
        assert_eq!(split, parts);
    }
}
