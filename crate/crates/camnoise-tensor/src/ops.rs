//! Low-level numeric kernels behind the graph operations.
//!
//! Every kernel is deterministic for a fixed input regardless of worker
//! count: parallelism is over disjoint output chunks and every multi-term
//! sum runs in a fixed (index) order. Dense products, losses, and plain
//! sums (bias gradients) accumulate in `f64`; the convolution stencils
//! accumulate in the element type itself so their per-pixel loops vectorize
//! at the native lane width — at `f64` the two conventions coincide, which
//! keeps double-precision graphs usable as gradient-check references.
//!
//! Forward kernels **overwrite** their output buffer; backward kernels
//! **accumulate** into their gradient buffers so a node feeding several
//! consumers collects all contributions. Prefer driving these through
//! [`Graph`](crate::Graph); they are public for reference tests and for
//! callers that need a single layer without graph plumbing.

#![allow(clippy::too_many_arguments)] // kernels take flat buffers plus their dimensions

use crate::element::Element;
use crate::par;

/// Chunk length for embarrassingly parallel elementwise sweeps.
const ELEMENTWISE_CHUNK: usize = 1 << 14;

/// One output row of a 3×3 zero-padded stencil, all nine taps fused.
///
/// `acc_row[x] += Σ t[ky*3+kx] · row_ky[x + kx − 1]` where `row_0/1/2` are
/// the rows above/at/below the output row (ghost rows are all-zero slices).
/// The interior iterates over `windows(3)` of each source row: the window
/// length proves every access in bounds, and the three per-row partial sums
/// are independent chains, so the loop vectorizes instead of serializing on
/// one long floating-point dependency.
#[inline]
fn stencil3x3_row<F: Element>(
    acc_row: &mut [F],
    above: &[F],
    mid: &[F],
    below: &[F],
    t: &[F; 9],
) {
    let w = acc_row.len();
    let (above, mid, below) = (&above[..w], &mid[..w], &below[..w]);
    if w == 1 {
        acc_row[0] += t[1] * above[0] + t[4] * mid[0] + t[7] * below[0];
        return;
    }
    acc_row[0] += t[1] * above[0]
        + t[2] * above[1]
        + t[4] * mid[0]
        + t[5] * mid[1]
        + t[7] * below[0]
        + t[8] * below[1];
    let (inner, _) = acc_row[1..].split_at_mut(w - 2);
    let rows = above.windows(3).zip(mid.windows(3)).zip(below.windows(3));
    for (d, ((wa, wm), wb)) in inner.iter_mut().zip(rows) {
        let a = t[0] * wa[0] + t[1] * wa[1] + t[2] * wa[2];
        let m = t[3] * wm[0] + t[4] * wm[1] + t[5] * wm[2];
        let b = t[6] * wb[0] + t[7] * wb[1] + t[8] * wb[2];
        *d += (a + m) + b;
    }
    acc_row[w - 1] += t[0] * above[w - 2]
        + t[1] * above[w - 1]
        + t[3] * mid[w - 2]
        + t[4] * mid[w - 1]
        + t[6] * below[w - 2]
        + t[7] * below[w - 1];
}

/// `acc[y, x] += Σ_{ky,kx} taps[ky*3+kx] · src[y+ky−1, x+kx−1]` with zero
/// padding. The forward convolution uses the kernel as-is; the input
/// gradient is the same stencil with the kernel flipped by the caller.
#[inline]
fn stencil3x3_acc<F: Element>(
    acc: &mut [F],
    src: &[F],
    height: usize,
    width: usize,
    taps: &[F; 9],
    zero_row: &[F],
) {
    debug_assert_eq!(zero_row.len(), width);
    for y in 0..height {
        let above: &[F] = if y > 0 {
            &src[(y - 1) * width..y * width]
        } else {
            zero_row
        };
        let mid = &src[y * width..(y + 1) * width];
        let below: &[F] = if y + 1 < height {
            &src[(y + 1) * width..(y + 2) * width]
        } else {
            zero_row
        };
        stencil3x3_row(
            &mut acc[y * width..(y + 1) * width],
            above,
            mid,
            below,
            taps,
        );
    }
}

/// Row dot with four independent partial accumulators so consecutive
/// fused multiply-adds do not serialize on one chain. The combination
/// order is fixed, so results are bit-identical from run to run.
#[inline]
fn dot_row<F: Element>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [F::ZERO; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        lanes[0] += pa[0] * pb[0];
        lanes[1] += pa[1] * pb[1];
        lanes[2] += pa[2] * pb[2];
        lanes[3] += pa[3] * pb[3];
    }
    let mut tail = F::ZERO;
    for (&av, &bv) in ca.remainder().iter().zip(cb.remainder()) {
        tail += av * bv;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Three shifted row dots against one reference row:
/// `(Σ_{x≥1} a[x]·b[x−1], Σ a[x]·b[x], Σ_{x<w−1} a[x]·b[x+1])`.
#[inline]
fn shifted_dots3<F: Element>(a: &[F], b: &[F]) -> (F, F, F) {
    let w = a.len();
    debug_assert_eq!(b.len(), w);
    let d1 = dot_row(a, b);
    if w == 1 {
        return (F::ZERO, d1, F::ZERO);
    }
    let d0 = dot_row(&a[1..], &b[..w - 1]);
    let d2 = dot_row(&a[..w - 1], &b[1..]);
    (d0, d1, d2)
}

/// 3×3 convolution with stride 1 and zero padding (same spatial size).
///
/// # Arguments
///
/// * `x` - input, `[batch, in_channels, height, width]` row-major
/// * `weight` - kernels, `[out_channels, in_channels, 3, 3]`
/// * `bias` - one value per output channel
/// * `out` - output, `[batch, out_channels, height, width]`, overwritten
///
/// # Panics
///
/// Panics when a buffer length disagrees with the stated dimensions.
pub fn conv3x3_forward<F: Element>(
    x: &[F],
    weight: &[F],
    bias: &[F],
    batch: usize,
    in_channels: usize,
    out_channels: usize,
    height: usize,
    width: usize,
    out: &mut [F],
) {
    let hw = height * width;
    assert_eq!(x.len(), batch * in_channels * hw, "conv3x3 input length");
    assert_eq!(
        weight.len(),
        out_channels * in_channels * 9,
        "conv3x3 weight length"
    );
    assert_eq!(bias.len(), out_channels, "conv3x3 bias length");
    assert_eq!(out.len(), batch * out_channels * hw, "conv3x3 output length");

    par::for_each_chunk_mut(out, hw, |plane, out_plane| {
        let n = plane / out_channels;
        let oc = plane % out_channels;
        let zero_row = vec![F::ZERO; width];
        let mut taps = [F::ZERO; 9];
        out_plane.fill(bias[oc]);
        for ic in 0..in_channels {
            let x_plane = &x[(n * in_channels + ic) * hw..][..hw];
            taps.copy_from_slice(&weight[(oc * in_channels + ic) * 9..][..9]);
            stencil3x3_acc(out_plane, x_plane, height, width, &taps, &zero_row);
        }
    });
}

/// Backward pass of [`conv3x3_forward`].
///
/// Accumulates the weight gradient into `dweight`, the bias gradient into
/// `dbias`, and — when `dx` is `Some` — the input gradient into `dx`.
/// Passing `dx: None` skips the input-gradient sweep entirely, which roughly
/// halves the cost for a first layer whose input needs no gradient.
pub fn conv3x3_backward<F: Element>(
    x: &[F],
    weight: &[F],
    dy: &[F],
    batch: usize,
    in_channels: usize,
    out_channels: usize,
    height: usize,
    width: usize,
    mut dx: Option<&mut [F]>,
    dweight: &mut [F],
    dbias: &mut [F],
) {
    let hw = height * width;
    assert_eq!(x.len(), batch * in_channels * hw, "conv3x3 input length");
    assert_eq!(
        weight.len(),
        out_channels * in_channels * 9,
        "conv3x3 weight length"
    );
    assert_eq!(dy.len(), batch * out_channels * hw, "conv3x3 dy length");
    assert_eq!(
        dweight.len(),
        out_channels * in_channels * 9,
        "conv3x3 dweight length"
    );
    assert_eq!(dbias.len(), out_channels, "conv3x3 dbias length");
    if let Some(dx) = dx.as_deref() {
        assert_eq!(dx.len(), batch * in_channels * hw, "conv3x3 dx length");
    }

    par::for_each_chunk_mut(dbias, 1, |oc, db| {
        let mut lanes = [0.0f64; 4];
        for n in 0..batch {
            let plane = &dy[(n * out_channels + oc) * hw..][..hw];
            let mut chunks = plane.chunks_exact(4);
            for p in &mut chunks {
                lanes[0] += p[0].to_f64();
                lanes[1] += p[1].to_f64();
                lanes[2] += p[2].to_f64();
                lanes[3] += p[3].to_f64();
            }
            for v in chunks.remainder() {
                lanes[0] += v.to_f64();
            }
        }
        let total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        db[0] = F::from_f64(db[0].to_f64() + total);
    });

    // One chunk per output channel: the `in_channels * 9` taps of its
    // kernel. Each (x_row, dy_row) pair is consumed once per vertical tap
    // with all three horizontal taps extracted in the same cache-hot pass.
    par::for_each_chunk_mut(dweight, in_channels * 9, |oc, dw_oc| {
        let zero_row = vec![F::ZERO; width];
        let mut acc = vec![F::ZERO; in_channels * 9];
        for n in 0..batch {
            let dy_plane = &dy[(n * out_channels + oc) * hw..][..hw];
            for ic in 0..in_channels {
                let x_plane = &x[(n * in_channels + ic) * hw..][..hw];
                let taps = &mut acc[ic * 9..ic * 9 + 9];
                for y in 0..height {
                    let dy_row = &dy_plane[y * width..(y + 1) * width];
                    let above: &[F] = if y > 0 {
                        &x_plane[(y - 1) * width..y * width]
                    } else {
                        &zero_row
                    };
                    let mid = &x_plane[y * width..(y + 1) * width];
                    let below: &[F] = if y + 1 < height {
                        &x_plane[(y + 1) * width..(y + 2) * width]
                    } else {
                        &zero_row
                    };
                    let (a0, a1, a2) = shifted_dots3(dy_row, above);
                    let (m0, m1, m2) = shifted_dots3(dy_row, mid);
                    let (b0, b1, b2) = shifted_dots3(dy_row, below);
                    taps[0] += a0;
                    taps[1] += a1;
                    taps[2] += a2;
                    taps[3] += m0;
                    taps[4] += m1;
                    taps[5] += m2;
                    taps[6] += b0;
                    taps[7] += b1;
                    taps[8] += b2;
                }
            }
        }
        for (d, &a) in dw_oc.iter_mut().zip(acc.iter()) {
            *d += a;
        }
    });

    if let Some(dx) = dx.as_deref_mut() {
        par::for_each_chunk_mut(dx, hw, |plane, dx_plane| {
            let n = plane / in_channels;
            let ic = plane % in_channels;
            let zero_row = vec![F::ZERO; width];
            let mut taps = [F::ZERO; 9];
            for oc in 0..out_channels {
                let dy_plane = &dy[(n * out_channels + oc) * hw..][..hw];
                let kernel = &weight[(oc * in_channels + ic) * 9..][..9];
                // The adjoint of a correlation stencil is the same stencil
                // with the kernel rotated 180°; the stencil adds in place,
                // which is exactly the accumulate contract for `dx`.
                for (i, t) in taps.iter_mut().enumerate() {
                    *t = kernel[8 - i];
                }
                stencil3x3_acc(dx_plane, dy_plane, height, width, &taps, &zero_row);
            }
        });
    }
}

/// Fully connected layer: `out[n, o] = bias[o] + Σ_i x[n, i] · weight[o, i]`.
///
/// `weight` is `[out_features, in_features]` row-major; `out` is overwritten.
///
/// # Panics
///
/// Panics when a buffer length disagrees with the stated dimensions.
pub fn dense_forward<F: Element>(
    x: &[F],
    weight: &[F],
    bias: &[F],
    batch: usize,
    in_features: usize,
    out_features: usize,
    out: &mut [F],
) {
    assert_eq!(x.len(), batch * in_features, "dense input length");
    assert_eq!(
        weight.len(),
        out_features * in_features,
        "dense weight length"
    );
    assert_eq!(bias.len(), out_features, "dense bias length");
    assert_eq!(out.len(), batch * out_features, "dense output length");

    par::for_each_chunk_mut(out, out_features, |n, out_row| {
        let x_row = &x[n * in_features..][..in_features];
        for (o, out_v) in out_row.iter_mut().enumerate() {
            let w_row = &weight[o * in_features..][..in_features];
            let mut acc = bias[o].to_f64();
            for (w, xv) in w_row.iter().zip(x_row) {
                acc += w.to_f64() * xv.to_f64();
            }
            *out_v = F::from_f64(acc);
        }
    });
}

/// Backward pass of [`dense_forward`]; accumulates into the gradient buffers.
pub fn dense_backward<F: Element>(
    x: &[F],
    weight: &[F],
    dy: &[F],
    batch: usize,
    in_features: usize,
    out_features: usize,
    mut dx: Option<&mut [F]>,
    dweight: &mut [F],
    dbias: &mut [F],
) {
    assert_eq!(x.len(), batch * in_features, "dense input length");
    assert_eq!(
        weight.len(),
        out_features * in_features,
        "dense weight length"
    );
    assert_eq!(dy.len(), batch * out_features, "dense dy length");
    assert_eq!(
        dweight.len(),
        out_features * in_features,
        "dense dweight length"
    );
    assert_eq!(dbias.len(), out_features, "dense dbias length");
    if let Some(dx) = dx.as_deref() {
        assert_eq!(dx.len(), batch * in_features, "dense dx length");
    }

    for (o, db) in dbias.iter_mut().enumerate() {
        let mut s = 0.0;
        for n in 0..batch {
            s += dy[n * out_features + o].to_f64();
        }
        *db = F::from_f64(db.to_f64() + s);
    }

    par::for_each_chunk_mut(dweight, in_features, |o, dw_row| {
        let mut acc = vec![0.0f64; in_features];
        for n in 0..batch {
            let g = dy[n * out_features + o].to_f64();
            if g != 0.0 {
                for (a, xv) in acc.iter_mut().zip(&x[n * in_features..][..in_features]) {
                    *a += g * xv.to_f64();
                }
            }
        }
        for (d, &a) in dw_row.iter_mut().zip(acc.iter()) {
            *d = F::from_f64(d.to_f64() + a);
        }
    });

    if let Some(dx) = dx.as_deref_mut() {
        par::for_each_chunk_mut(dx, in_features, |n, dx_row| {
            let mut acc = vec![0.0f64; in_features];
            for o in 0..out_features {
                let g = dy[n * out_features + o].to_f64();
                if g != 0.0 {
                    for (a, wv) in acc.iter_mut().zip(&weight[o * in_features..][..in_features])
                    {
                        *a += g * wv.to_f64();
                    }
                }
            }
            for (d, &a) in dx_row.iter_mut().zip(acc.iter()) {
                *d = F::from_f64(d.to_f64() + a);
            }
        });
    }
}

/// Rectified linear unit: `out[i] = max(x[i], 0)`; `out` is overwritten.
pub fn relu_forward<F: Element>(x: &[F], out: &mut [F]) {
    assert_eq!(x.len(), out.len(), "relu buffer length");
    par::for_each_chunk_mut(out, ELEMENTWISE_CHUNK, |i, chunk| {
        let base = i * ELEMENTWISE_CHUNK;
        let len = chunk.len();
        for (o, v) in chunk.iter_mut().zip(&x[base..base + len]) {
            *o = if *v > F::ZERO { *v } else { F::ZERO };
        }
    });
}

/// Backward pass of ReLU, gated by the forward **output**.
///
/// `y > 0` and `x > 0` select the same elements, and keying on the output
/// lets the graph release input activations earlier during backprop.
pub fn relu_backward<F: Element>(y: &[F], dy: &[F], dx: &mut [F]) {
    assert_eq!(y.len(), dx.len(), "relu buffer length");
    assert_eq!(dy.len(), dx.len(), "relu gradient length");
    par::for_each_chunk_mut(dx, ELEMENTWISE_CHUNK, |i, chunk| {
        let base = i * ELEMENTWISE_CHUNK;
        for (j, d) in chunk.iter_mut().enumerate() {
            let k = base + j;
            if y[k] > F::ZERO {
                *d = F::from_f64(d.to_f64() + dy[k].to_f64());
            }
        }
    });
}

/// Elementwise sum of two equally shaped buffers; `out` is overwritten.
pub fn add_forward<F: Element>(a: &[F], b: &[F], out: &mut [F]) {
    assert_eq!(a.len(), out.len(), "add lhs length");
    assert_eq!(b.len(), out.len(), "add rhs length");
    par::for_each_chunk_mut(out, ELEMENTWISE_CHUNK, |i, chunk| {
        let base = i * ELEMENTWISE_CHUNK;
        for (j, o) in chunk.iter_mut().enumerate() {
            let k = base + j;
            *o = F::from_f64(a[k].to_f64() + b[k].to_f64());
        }
    });
}

/// `dst[i] += src[i]` — the backward pass of both addition operands, and the
/// general gradient-accumulation primitive.
pub fn accumulate<F: Element>(dst: &mut [F], src: &[F]) {
    assert_eq!(dst.len(), src.len(), "accumulate length");
    par::for_each_chunk_mut(dst, ELEMENTWISE_CHUNK, |i, chunk| {
        let base = i * ELEMENTWISE_CHUNK;
        for (j, d) in chunk.iter_mut().enumerate() {
            *d = F::from_f64(d.to_f64() + src[base + j].to_f64());
        }
    });
}

/// Global max pooling: `out[p] = max(x[p * plane_len .. (p+1) * plane_len])`.
///
/// `planes` is typically `batch * channels`. Ties resolve to the earliest
/// element in row-major order, matching [`global_max_pool_backward`].
pub fn global_max_pool_forward<F: Element>(
    x: &[F],
    planes: usize,
    plane_len: usize,
    out: &mut [F],
) {
    assert!(plane_len > 0, "empty pooling plane");
    assert_eq!(x.len(), planes * plane_len, "pool input length");
    assert_eq!(out.len(), planes, "pool output length");
    par::for_each_chunk_mut(out, 1, |p, o| {
        let plane = &x[p * plane_len..][..plane_len];
        let mut best = plane[0];
        for &v in &plane[1..] {
            if v > best {
                best = v;
            }
        }
        o[0] = best;
    });
}

/// Backward pass of [`global_max_pool_forward`]: routes each plane's incoming
/// gradient to the first maximum of that plane (recomputed, nothing stored).
pub fn global_max_pool_backward<F: Element>(
    x: &[F],
    dy: &[F],
    planes: usize,
    plane_len: usize,
    dx: &mut [F],
) {
    assert!(plane_len > 0, "empty pooling plane");
    assert_eq!(x.len(), planes * plane_len, "pool input length");
    assert_eq!(dy.len(), planes, "pool dy length");
    assert_eq!(dx.len(), planes * plane_len, "pool dx length");
    par::for_each_chunk_mut(dx, plane_len, |p, dx_plane| {
        let plane = &x[p * plane_len..][..plane_len];
        let mut best = 0usize;
        for (i, v) in plane.iter().enumerate().skip(1) {
            if *v > plane[best] {
                best = i;
            }
        }
        dx_plane[best] = F::from_f64(dx_plane[best].to_f64() + dy[p].to_f64());
    });
}
