use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{BlockShape, CnnArchitecture};
use super::scalar::Scalar;
use super::CnnError;

/// Offsets of one layer's weights and biases in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    w: usize,
    w_len: usize,
    b: usize,
    b_len: usize,
}

/// Network weights in one flat vector: each convolution (weights
/// `[out][in][ky][kx]`, then biases), then each dense layer (weights
/// `[out][in]`, then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar> {
    arch: CnnArchitecture,
    blocks: Vec<BlockShape>,
    dense: Vec<(usize, usize)>,
    slots: Vec<Slot>,
    params: Vec<T>,
}

struct BlockCache<T> {
    col: Vec<T>,
    act: Vec<T>,
    argmax: Vec<u32>,
}

struct Cache<T> {
    blocks: Vec<BlockCache<T>>,
    /// Input of every dense layer.
    dense_inputs: Vec<Vec<T>>,
}

impl<T: Scalar> Network<T> {
    /// All-zero weights.
    pub fn zeros(arch: CnnArchitecture) -> Result<Self, CnnError> {
        let blocks = arch.blocks()?;
        let dense = arch.dense_layers()?;
        let mut slots = Vec::new();
        let mut offset = 0;
        for (w_len, b_len) in arch.layer_params()? {
            slots.push(Slot {
                w: offset,
                w_len,
                b: offset + w_len,
                b_len,
            });
            offset += w_len + b_len;
        }
        Ok(Self {
            arch,
            blocks,
            dense,
            slots,
            params: vec![T::zero(); offset],
        })
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(arch: CnnArchitecture, seed: u64) -> Result<Self, CnnError> {
        let mut net = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..net.slots.len() {
            let s = net.slots[i];
            let fan_in = s.w_len / s.b_len;
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[s.w..s.w + s.w_len] {
                *p = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(net)
    }

    /// Replaces every parameter; `params` must match the architecture.
    pub fn from_params(arch: CnnArchitecture, params: Vec<T>) -> Result<Self, CnnError> {
        let mut net = Self::zeros(arch)?;
        if params.len() != net.params.len() {
            return Err(CnnError::ShapeMismatch(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch.clone(),
            blocks: self.blocks.clone(),
            dense: self.dense.clone(),
            slots: self.slots.clone(),
            params: self
                .params
                .iter()
                .map(|p| U::from_f64(p.to_f64().expect("finite parameter")))
                .collect(),
        }
    }

    /// Length of the dropout mask in training mode, if the net has dropout.
    pub fn dropout_len(&self) -> Option<usize> {
        self.arch.dropout.map(|d| {
            let b = self.blocks[d.after_block];
            b.out_c * b.pool_h * b.pool_w
        })
    }

    /// Draws an inverted-dropout mask: each entry is 0 with the configured
    /// probability and `1 / (1 - rate)` otherwise.
    pub fn draw_dropout_mask<R: Rng>(&self, rng: &mut R) -> Option<Vec<T>> {
        let spec = self.arch.dropout?;
        let keep = T::from_f64(1.0 / (1.0 - spec.rate as f64));
        let len = self.dropout_len().expect("dropout configured");
        Some(
            (0..len)
                .map(|_| {
                    if rng.gen::<f32>() < spec.rate {
                        T::zero()
                    } else {
                        keep
                    }
                })
                .collect(),
        )
    }

    fn check_input(&self, input: &[T], mask: Option<&[T]>) -> Result<(), CnnError> {
        if input.len() != self.arch.input_len() {
            return Err(CnnError::ShapeMismatch(format!(
                "input has {} values, expected {}",
                input.len(),
                self.arch.input_len()
            )));
        }
        if let Some(m) = mask {
            if Some(m.len()) != self.dropout_len() {
                return Err(CnnError::ShapeMismatch("dropout mask length".into()));
            }
        }
        Ok(())
    }

    /// Logits for one CHW input. A mask selects training-mode dropout;
    /// `None` is evaluation mode.
    pub fn forward(&self, input: &[T], dropout_mask: Option<&[T]>) -> Result<Vec<T>, CnnError> {
        self.check_input(input, dropout_mask)?;
        Ok(self.run(input, dropout_mask, None))
    }

    /// Softmax cross-entropy of one sample. Adds `scale` times its gradient
    /// into `grad` and returns the unscaled loss.
    pub fn accumulate_gradient(
        &self,
        input: &[T],
        target: usize,
        dropout_mask: Option<&[T]>,
        scale: T,
        grad: &mut [T],
    ) -> Result<T, CnnError> {
        self.check_input(input, dropout_mask)?;
        if target >= self.arch.classes {
            return Err(CnnError::ShapeMismatch(format!("target class {target}")));
        }
        if grad.len() != self.params.len() {
            return Err(CnnError::ShapeMismatch("gradient buffer length".into()));
        }
        let mut cache = Cache {
            blocks: Vec::with_capacity(self.blocks.len()),
            dense_inputs: Vec::with_capacity(self.dense.len()),
        };
        let logits = self.run(input, dropout_mask, Some(&mut cache));
        let probs = softmax(&logits);
        let loss = -probs[target].max(T::min_positive_value()).ln();
        let mut delta: Vec<T> = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let y = if i == target { T::one() } else { T::zero() };
                (p - y) * scale
            })
            .collect();
        self.backward(&cache, dropout_mask, &mut delta, grad);
        Ok(loss)
    }

    fn run(&self, input: &[T], mask: Option<&[T]>, mut cache: Option<&mut Cache<T>>) -> Vec<T> {
        let k = self.arch.kernel;
        let pad = self.arch.pad();
        let mut x = input.to_vec();
        for (bi, b) in self.blocks.iter().enumerate() {
            let s = self.slots[bi];
            let hw = b.conv_h * b.conv_w;
            let rows = b.in_c * k * k;
            let mut col = vec![T::zero(); rows * hw];
            im2col(&x, b, k, pad, &mut col);
            let mut act = vec![T::zero(); b.out_c * hw];
            T::gemm(
                b.out_c,
                rows,
                hw,
                T::one(),
                &self.params[s.w..s.w + s.w_len],
                (rows as isize, 1),
                &col,
                (hw as isize, 1),
                T::zero(),
                &mut act,
                (hw as isize, 1),
            );
            for (c, plane) in act.chunks_exact_mut(hw).enumerate() {
                let bias = self.params[s.b + c];
                for v in plane {
                    *v = (*v + bias).max(T::zero());
                }
            }
            let (mut pooled, argmax) = max_pool(&act, b);
            if let Some(d) = self.arch.dropout.filter(|d| d.after_block == bi) {
                if let Some(m) = mask {
                    debug_assert_eq!(d.after_block, bi);
                    for (v, &keep) in pooled.iter_mut().zip(m) {
                        *v = *v * keep;
                    }
                }
            }
            if let Some(c) = cache.as_deref_mut() {
                c.blocks.push(BlockCache { col, act, argmax });
            }
            x = pooled;
        }
        let last = self.dense.len() - 1;
        for (li, &(n_in, n_out)) in self.dense.iter().enumerate() {
            let s = self.slots[self.blocks.len() + li];
            let mut y = self.params[s.b..s.b + s.b_len].to_vec();
            T::gemm(
                n_out,
                n_in,
                1,
                T::one(),
                &self.params[s.w..s.w + s.w_len],
                (n_in as isize, 1),
                &x,
                (1, 1),
                T::one(),
                &mut y,
                (1, 1),
            );
            if li != last {
                for v in &mut y {
                    *v = v.max(T::zero());
                }
            }
            if let Some(c) = cache.as_deref_mut() {
                c.dense_inputs.push(std::mem::take(&mut x));
            }
            x = y;
        }
        x
    }

    fn backward(&self, cache: &Cache<T>, mask: Option<&[T]>, delta: &mut Vec<T>, grad: &mut [T]) {
        let nb = self.blocks.len();
        for li in (0..self.dense.len()).rev() {
            let (n_in, n_out) = self.dense[li];
            let s = self.slots[nb + li];
            let x = &cache.dense_inputs[li];
            T::gemm(
                n_out,
                1,
                n_in,
                T::one(),
                delta,
                (1, 1),
                x,
                (n_in as isize, 1),
                T::one(),
                &mut grad[s.w..s.w + s.w_len],
                (n_in as isize, 1),
            );
            for (g, &d) in grad[s.b..s.b + s.b_len].iter_mut().zip(delta.iter()) {
                *g = *g + d;
            }
            let mut dx = vec![T::zero(); n_in];
            T::gemm(
                n_in,
                n_out,
                1,
                T::one(),
                &self.params[s.w..s.w + s.w_len],
                (1, n_in as isize),
                delta,
                (1, 1),
                T::zero(),
                &mut dx,
                (1, 1),
            );
            if li > 0 {
                // input of this layer is the ReLU output of the previous one
                for (d, &v) in dx.iter_mut().zip(x) {
                    if v <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            *delta = dx;
        }

        let k = self.arch.kernel;
        let pad = self.arch.pad();
        for bi in (0..nb).rev() {
            let b = self.blocks[bi];
            let s = self.slots[bi];
            let bc = &cache.blocks[bi];
            let hw = b.conv_h * b.conv_w;
            let rows = b.in_c * k * k;
            if let (Some(_), Some(m)) = (self.arch.dropout.filter(|d| d.after_block == bi), mask) {
                for (d, &keep) in delta.iter_mut().zip(m) {
                    *d = *d * keep;
                }
            }
            let mut dz = vec![T::zero(); b.out_c * hw];
            let plane = b.pool_h * b.pool_w;
            for (i, &d) in delta.iter().enumerate() {
                let c = i / plane;
                let at = c * hw + bc.argmax[i] as usize;
                dz[at] = dz[at] + d;
            }
            for (d, &a) in dz.iter_mut().zip(&bc.act) {
                if a <= T::zero() {
                    *d = T::zero();
                }
            }
            T::gemm(
                b.out_c,
                hw,
                rows,
                T::one(),
                &dz,
                (hw as isize, 1),
                &bc.col,
                (1, hw as isize),
                T::one(),
                &mut grad[s.w..s.w + s.w_len],
                (rows as isize, 1),
            );
            for (c, g) in grad[s.b..s.b + s.b_len].iter_mut().enumerate() {
                let sum = dz[c * hw..(c + 1) * hw]
                    .iter()
                    .fold(T::zero(), |acc, &v| acc + v);
                *g = *g + sum;
            }
            if bi == 0 {
                break;
            }
            let mut dcol = vec![T::zero(); rows * hw];
            T::gemm(
                rows,
                b.out_c,
                hw,
                T::one(),
                &self.params[s.w..s.w + s.w_len],
                (1, rows as isize),
                &dz,
                (hw as isize, 1),
                T::zero(),
                &mut dcol,
                (hw as isize, 1),
            );
            let mut dx = vec![T::zero(); b.in_c * b.in_h * b.in_w];
            col2im(&dcol, &b, k, pad, &mut dx);
            *delta = dx;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

fn im2col<T: Scalar>(x: &[T], b: &BlockShape, k: usize, pad: usize, col: &mut [T]) {
    let (h, w) = (b.in_h, b.in_w);
    let (oh, ow) = (b.conv_h, b.conv_w);
    for ci in 0..b.in_c {
        let src = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                if pad == 0 {
                    for oy in 0..oh {
                        let from = (oy + ky) * w + kx;
                        dst[oy * ow..(oy + 1) * ow].copy_from_slice(&src[from..from + ow]);
                    }
                    continue;
                }
                for oy in 0..oh {
                    let iy = (oy + ky) as isize - pad as isize;
                    let out = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    for (ox, o) in out.iter_mut().enumerate() {
                        let ix = (ox + kx) as isize - pad as isize;
                        *o = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[iy as usize * w + ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], b: &BlockShape, k: usize, pad: usize, dx: &mut [T]) {
    let (h, w) = (b.in_h, b.in_w);
    let (oh, ow) = (b.conv_h, b.conv_w);
    for ci in 0..b.in_c {
        let dst = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            let at = iy as usize * w + ix as usize;
                            dst[at] = dst[at] + src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 stride-2 max pooling; ties keep the first element in row-major order.
fn max_pool<T: Scalar>(act: &[T], b: &BlockShape) -> (Vec<T>, Vec<u32>) {
    let (h, w) = (b.conv_h, b.conv_w);
    let (ph, pw) = (b.pool_h, b.pool_w);
    let mut out = Vec::with_capacity(b.out_c * ph * pw);
    let mut idx = Vec::with_capacity(b.out_c * ph * pw);
    for c in 0..b.out_c {
        let plane = &act[c * h * w..(c + 1) * h * w];
        for py in 0..ph {
            for px in 0..pw {
                let base = 2 * py * w + 2 * px;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if plane[cand] > plane[best] {
                        best = cand;
                    }
                }
                out.push(plane[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}
