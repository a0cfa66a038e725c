//! Forward and backward kernels over flat channel-major buffers.
//!
//! Feature maps are laid out `[channel][row][col]`. Convolutions are 3×3,
//! stride 1, zero padding 1; pooling is 2×2 with stride 2.

/// Rows `y` of the output whose source row `y + d` is inside `[0, n)`.
#[inline]
fn valid_range(n: usize, d: isize) -> (usize, usize) {
    let lo = if d < 0 { (-d) as usize } else { 0 };
    let hi = if d > 0 { n.saturating_sub(d as usize) } else { n };
    (lo, hi.max(lo))
}

/// `out[c_out][h][w] = bias + sum(weight * input)`; weight is `[c_out][c_in][3][3]`.
pub fn conv3x3_forward(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    c_out: usize,
) -> Vec<f64> {
    let plane = h * w;
    debug_assert_eq!(input.len(), c_in * plane);
    debug_assert_eq!(weight.len(), c_out * c_in * 9);
    let mut out = vec![0.0; c_out * plane];
    for oc in 0..c_out {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(bias[oc]);
        for ic in 0..c_in {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let k = &weight[(oc * c_in + ic) * 9..(oc * c_in + ic + 1) * 9];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    let wv = k[ky * 3 + kx];
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let src = &in_plane[iy * w..(iy + 1) * w];
                        let dst = &mut out_plane[y * w..(y + 1) * w];
                        let sx0 = (x0 as isize + dx) as usize;
                        for (o, i) in dst[x0..x1].iter_mut().zip(&src[sx0..sx0 + (x1 - x0)]) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients, and returns the input gradient when
/// `want_input_grad` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    grad_out: &[f64],
    c_out: usize,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let plane = h * w;
    let mut grad_in = want_input_grad.then(|| vec![0.0; c_in * plane]);
    for oc in 0..c_out {
        let g_plane = &grad_out[oc * plane..(oc + 1) * plane];
        grad_b[oc] += g_plane.iter().sum::<f64>();
        for ic in 0..c_in {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let base = (oc * c_in + ic) * 9;
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    let sx0 = (x0 as isize + dx) as usize;
                    let n = x1 - x0;
                    let wv = weight[base + ky * 3 + kx];
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + dy) as usize;
                        let g = &g_plane[y * w + x0..y * w + x1];
                        let src = &in_plane[iy * w + sx0..iy * w + sx0 + n];
                        acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(gi) = grad_in.as_mut() {
                            let dst = &mut gi[ic * plane + iy * w + sx0..ic * plane + iy * w + sx0 + n];
                            for (d, gv) in dst.iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                    grad_w[base + ky * 3 + kx] += acc;
                }
            }
        }
    }
    grad_in
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose activation was clipped.
pub fn relu_backward_inplace(grad: &mut [f64], activation: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2×2 max pooling. Returns pooled values and, per output, the flat input
/// index of the first (row-major) maximum in its window.
pub fn maxpool2x2_forward(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + (2 * y) * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * w + 2 * x + dx;
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

/// Routes each pooled gradient to the single input position that won its window.
pub fn maxpool2x2_backward(grad_out: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut grad_in = vec![0.0; input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i] += g;
    }
    grad_in
}

/// `y = W x + b` with `W` stored `[out][in]`.
pub fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| {
            b + weight[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
        })
        .collect()
}

/// Accumulates `dW = g xᵀ`, `db = g`; returns `Wᵀ g` when requested.
pub fn dense_backward(
    x: &[f64],
    weight: &[f64],
    grad_y: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let n_in = x.len();
    for (o, &g) in grad_y.iter().enumerate() {
        grad_b[o] += g;
        if g != 0.0 {
            for (dw, &xv) in grad_w[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                *dw += g * xv;
            }
        }
    }
    want_input_grad.then(|| {
        let mut gx = vec![0.0; n_in];
        for (o, &g) in grad_y.iter().enumerate() {
            if g != 0.0 {
                for (d, &wv) in gx.iter_mut().zip(&weight[o * n_in..(o + 1) * n_in]) {
                    *d += g * wv;
                }
            }
        }
        gx
    })
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}
