use std::fmt;

use super::CnnError;

/// Spatial padding of every convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; each 3x3 convolution trims one pixel per border.
    Valid,
    /// Zero padding of `kernel / 2`, preserving spatial size.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    /// Zero-based index of the conv block whose pooled output is dropped.
    pub after_block: usize,
    pub rate: f32,
}

/// Convolution blocks (conv, ReLU, 2x2 max-pool) followed by dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnArchitecture {
    /// `(height, width, channels)`.
    pub input: (usize, usize, usize),
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub padding: Padding,
    pub dropout: Option<DropoutSpec>,
    /// Hidden dense widths between the flattened features and the output.
    pub dense_widths: Vec<usize>,
    pub classes: usize,
}

/// Spatial and channel size of one block's tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub conv_h: usize,
    pub conv_w: usize,
    pub out_c: usize,
    pub pool_h: usize,
    pub pool_w: usize,
}

impl CnnArchitecture {
    /// The 150x150x3 network: three 3x3 valid-padded blocks with 32, 64 and
    /// 128 channels, dropout 0.2 after the second block, and dense layers
    /// 36992 -> 20 -> 64 -> 32 -> `classes`.
    pub fn standard(classes: usize) -> Self {
        Self {
            input: (150, 150, 3),
            conv_channels: vec![32, 64, 128],
            kernel: 3,
            padding: Padding::Valid,
            dropout: Some(DropoutSpec {
                after_block: 1,
                rate: 0.2,
            }),
            dense_widths: vec![20, 64, 32],
            classes,
        }
    }

    /// Small same-padded variant (12x12x3, widths 4/8/8, dense 8 -> classes)
    /// used for finite-difference gradient checks and overfit tests.
    pub fn reduced(classes: usize) -> Self {
        Self {
            input: (12, 12, 3),
            conv_channels: vec![4, 8, 8],
            kernel: 3,
            padding: Padding::Same,
            dropout: Some(DropoutSpec {
                after_block: 1,
                rate: 0.2,
            }),
            dense_widths: vec![],
            classes,
        }
    }

    pub fn pad(&self) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => self.kernel / 2,
        }
    }

    /// Checks widths and walks the shape chain.
    pub fn blocks(&self) -> Result<Vec<BlockShape>, CnnError> {
        let (h, w, c) = self.input;
        if h == 0 || w == 0 || c == 0 {
            return Err(CnnError::InvalidArchitecture("input has a zero dimension".into()));
        }
        if self.kernel == 0 || (self.padding == Padding::Same && self.kernel.is_multiple_of(2)) {
            return Err(CnnError::InvalidArchitecture(format!("kernel size {}", self.kernel)));
        }
        if self.conv_channels.is_empty() {
            return Err(CnnError::InvalidArchitecture("no convolution blocks".into()));
        }
        if self.conv_channels.contains(&0) || self.dense_widths.contains(&0) || self.classes == 0 {
            return Err(CnnError::InvalidArchitecture("zero layer width".into()));
        }
        if let Some(d) = self.dropout {
            if d.after_block >= self.conv_channels.len() || !(0.0..1.0).contains(&d.rate) {
                return Err(CnnError::InvalidArchitecture("bad dropout placement or rate".into()));
            }
        }
        let (mut h, mut w, mut c) = (h, w, c);
        let mut out = Vec::with_capacity(self.conv_channels.len());
        for &oc in &self.conv_channels {
            let (ch, cw) = match self.padding {
                Padding::Same => (h, w),
                Padding::Valid => {
                    if h < self.kernel || w < self.kernel {
                        return Err(CnnError::InvalidArchitecture(format!(
                            "{h}x{w} map is smaller than the {0}x{0} kernel",
                            self.kernel
                        )));
                    }
                    (h - self.kernel + 1, w - self.kernel + 1)
                }
            };
            if ch < 2 || cw < 2 {
                return Err(CnnError::InvalidArchitecture(format!(
                    "{ch}x{cw} map cannot be pooled"
                )));
            }
            let shape = BlockShape {
                in_h: h,
                in_w: w,
                in_c: c,
                conv_h: ch,
                conv_w: cw,
                out_c: oc,
                pool_h: ch / 2,
                pool_w: cw / 2,
            };
            out.push(shape);
            (h, w, c) = (shape.pool_h, shape.pool_w, oc);
        }
        Ok(out)
    }

    pub fn flatten_len(&self) -> Result<usize, CnnError> {
        let last = *self.blocks()?.last().expect("at least one block");
        Ok(last.pool_h * last.pool_w * last.out_c)
    }

    /// `(inputs, outputs)` of each dense layer.
    pub fn dense_layers(&self) -> Result<Vec<(usize, usize)>, CnnError> {
        let mut widths = vec![self.flatten_len()?];
        widths.extend(&self.dense_widths);
        widths.push(self.classes);
        Ok(widths.windows(2).map(|w| (w[0], w[1])).collect())
    }

    pub fn input_len(&self) -> usize {
        self.input.0 * self.input.1 * self.input.2
    }

    /// Weight and bias count of every layer, convolutions first.
    pub fn layer_params(&self) -> Result<Vec<(usize, usize)>, CnnError> {
        let k2 = self.kernel * self.kernel;
        let mut out: Vec<(usize, usize)> = self
            .blocks()?
            .iter()
            .map(|b| (b.out_c * b.in_c * k2, b.out_c))
            .collect();
        out.extend(self.dense_layers()?.iter().map(|&(i, o)| (i * o, o)));
        Ok(out)
    }

    /// Total weights plus biases.
    pub fn param_count(&self) -> Result<usize, CnnError> {
        Ok(self.layer_params()?.iter().map(|(w, b)| w + b).sum())
    }

    /// Multiply-accumulates of one forward pass (convolutions and dense
    /// layers; activations and pooling not counted).
    pub fn forward_macs(&self) -> Result<u64, CnnError> {
        let k2 = (self.kernel * self.kernel) as u64;
        let conv: u64 = self
            .blocks()?
            .iter()
            .map(|b| (b.conv_h * b.conv_w * b.out_c * b.in_c) as u64 * k2)
            .sum();
        let dense: u64 = self.dense_layers()?.iter().map(|&(i, o)| (i * o) as u64).sum();
        Ok(conv + dense)
    }
}

impl fmt::Display for CnnArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, w, c) = self.input;
        writeln!(f, "input            {h}x{w}x{c}")?;
        let blocks = self.blocks().map_err(|_| fmt::Error)?;
        let k = self.kernel;
        for (i, b) in blocks.iter().enumerate() {
            writeln!(
                f,
                "conv{} {k}x{k} {:?}  {}x{}x{} -> relu -> maxpool -> {}x{}x{}",
                i + 1,
                self.padding,
                b.conv_h,
                b.conv_w,
                b.out_c,
                b.pool_h,
                b.pool_w,
                b.out_c
            )?;
            if let Some(d) = self.dropout.filter(|d| d.after_block == i) {
                writeln!(f, "dropout          rate {}", d.rate)?;
            }
        }
        for (i, (n_in, n_out)) in self.dense_layers().map_err(|_| fmt::Error)?.iter().enumerate() {
            writeln!(f, "dense{}           {n_in} -> {n_out}", i + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shape_chain() {
        let arch = CnnArchitecture::standard(5);
        let dims: Vec<(usize, usize, usize)> = arch
            .blocks()
            .unwrap()
            .iter()
            .map(|b| (b.conv_h, b.pool_h, b.out_c))
            .collect();
        assert_eq!(dims, vec![(148, 74, 32), (72, 36, 64), (34, 17, 128)]);
        assert_eq!(arch.flatten_len().unwrap(), 36_992);
        assert_eq!(
            arch.dense_layers().unwrap(),
            vec![(36_992, 20), (20, 64), (64, 32), (32, 5)]
        );
    }

    #[test]
    fn parameter_counts() {
        // Layer by layer: conv 896 + 18,496 + 73,856; dense 739,860 + 1,344
        // + 2,080 + 165.
        let sizes: Vec<usize> = CnnArchitecture::standard(5)
            .layer_params()
            .unwrap()
            .iter()
            .map(|(w, b)| w + b)
            .collect();
        assert_eq!(sizes, vec![896, 18_496, 73_856, 739_860, 1_344, 2_080, 165]);
        assert_eq!(CnnArchitecture::standard(5).param_count().unwrap(), 836_697);
        assert_eq!(CnnArchitecture::standard(2).param_count().unwrap(), 836_697 - 99);
    }

    #[test]
    fn zero_widths_rejected() {
        let mut arch = CnnArchitecture::standard(5);
        arch.conv_channels = vec![0, 0, 0];
        arch.dense_widths = vec![0, 0, 0];
        arch.classes = 0;
        assert!(matches!(
            arch.param_count(),
            Err(CnnError::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn reduced_flattens_to_eight() {
        let arch = CnnArchitecture::reduced(5);
        assert_eq!(arch.flatten_len().unwrap(), 8);
        assert_eq!(arch.dense_layers().unwrap(), vec![(8, 5)]);
    }

    #[test]
    fn too_small_for_valid_padding() {
        let mut arch = CnnArchitecture::reduced(5);
        arch.padding = Padding::Valid;
        assert!(arch.blocks().is_err());
    }
}
