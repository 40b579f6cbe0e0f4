//! Convolutional regressor from a swatch image to normalized hair
//! parameters, trained on rendered images with a loss measured purely in
//! parameter space.
//!
//! The network is generic over the float type: training and checkpoints use
//! `f32`, gradient verification runs the same code in `f64`.

mod layers;
pub mod train;

use std::path::Path;

use num_traits::Float;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use layers::{col2im, conv_out, im2col, matmul, relu6, sigmoid};
pub use train::{
    load_checkpoint, save_checkpoint, train, write_loss_csv, AdamState, Checkpoint, TrainConfig,
    TrainOutcome, Trainer,
};

use crate::error::{Error, Result};
use crate::params::{HairParams, NormalizedParams, PARAM_COUNT};
use crate::rng::rng_from_seed;

/// Network layout. Every convolution uses the same kernel, stride and
/// padding and is followed by a rectifier clipped at 6.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_width: usize,
    pub input_height: usize,
    pub in_channels: usize,
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub outputs: usize,
}

impl Architecture {
    pub fn standard(input_size: usize) -> Self {
        Architecture {
            input_width: input_size,
            input_height: input_size,
            in_channels: 3,
            widths: vec![16, 32, 64, 128, 128],
            kernel: 3,
            stride: 2,
            padding: 1,
            outputs: PARAM_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("architecture needs non-empty layer widths".into()));
        }
        if self.kernel == 0 || self.stride == 0 || self.input_width == 0 || self.input_height == 0 {
            return Err(Error::Config("kernel, stride and input size must be positive".into()));
        }
        if self.outputs != PARAM_COUNT || self.in_channels != 3 {
            return Err(Error::Config("architecture must map 3 channels to 6 outputs".into()));
        }
        if self.input_width + 2 * self.padding < self.kernel || self.input_height + 2 * self.padding < self.kernel {
            return Err(Error::Config("input smaller than the kernel".into()));
        }
        Ok(())
    }

    /// Hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("architecture serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn conv_shapes(&self) -> Vec<ConvShape> {
        let (mut c, mut h, mut w) = (self.in_channels, self.input_height, self.input_width);
        let mut out = Vec::with_capacity(self.widths.len());
        for &oc in &self.widths {
            let ho = conv_out(h, self.kernel, self.stride, self.padding);
            let wo = conv_out(w, self.kernel, self.stride, self.padding);
            out.push(ConvShape { c_in: c, h, w, c_out: oc, ho, wo });
            (c, h, w) = (oc, ho, wo);
        }
        out
    }

    fn layout(&self) -> Layout {
        let k2 = self.kernel * self.kernel;
        let mut offset = 0;
        let mut convs = Vec::new();
        for s in self.conv_shapes() {
            let weight = offset;
            offset += s.c_out * s.c_in * k2;
            let bias = offset;
            offset += s.c_out;
            convs.push((weight, bias));
        }
        let last = *self.widths.last().unwrap();
        let head_weight = offset;
        offset += self.outputs * last;
        let head_bias = offset;
        offset += self.outputs;
        Layout {
            convs,
            head_weight,
            head_bias,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Named parameter tensors as `(name, offset, length)`.
    pub fn tensors(&self) -> Vec<(String, usize, usize)> {
        let l = self.layout();
        let k2 = self.kernel * self.kernel;
        let mut out = Vec::new();
        for (i, (s, &(w, b))) in self.conv_shapes().iter().zip(&l.convs).enumerate() {
            out.push((format!("conv{i}.weight"), w, s.c_out * s.c_in * k2));
            out.push((format!("conv{i}.bias"), b, s.c_out));
        }
        out.push(("head.weight".into(), l.head_weight, l.head_bias - l.head_weight));
        out.push(("head.bias".into(), l.head_bias, self.outputs));
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvShape {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    ho: usize,
    wo: usize,
}

struct Layout {
    convs: Vec<(usize, usize)>,
    head_weight: usize,
    head_bias: usize,
    total: usize,
}

/// Planar RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage {
    pub width: usize,
    pub height: usize,
    /// Channel-major: all red values, then green, then blue.
    pub data: Vec<f32>,
}

impl InputImage {
    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut data = vec![0.0f32; 3 * w * h];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = px[c] as f32 / 255.0;
            }
        }
        InputImage { width: w, height: h, data }
    }

    pub fn uniform(width: usize, height: usize, value: f32) -> Self {
        InputImage {
            width,
            height,
            data: vec![value; 3 * width * height],
        }
    }

    fn sample(&self, c: usize, x: f64, y: f64) -> f32 {
        let cx = x.clamp(0.0, (self.width - 1) as f64);
        let cy = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = ((cx - x0 as f64) as f32, (cy - y0 as f64) as f32);
        let at = |x: usize, y: usize| self.data[(c * self.height + y) * self.width + x];
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Center-crops to a square and resamples bilinearly to `size x size`,
    /// with pixel centers aligned. A square image of the target size passes
    /// through unchanged.
    pub fn center_crop_resize(&self, size: usize) -> InputImage {
        let side = self.width.min(self.height);
        let x_off = (self.width - side) as f64 / 2.0;
        let y_off = (self.height - side) as f64 / 2.0;
        let scale = side as f64 / size as f64;
        let mut data = vec![0.0f32; 3 * size * size];
        for c in 0..3 {
            for y in 0..size {
                for x in 0..size {
                    let sx = x_off + (x as f64 + 0.5) * scale - 0.5;
                    let sy = y_off + (y as f64 + 0.5) * scale - 0.5;
                    data[(c * size + y) * size + x] = self.sample(c, sx, sy);
                }
            }
        }
        InputImage {
            width: size,
            height: size,
            data,
        }
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace<T> {
    cols: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    pooled: Vec<T>,
    out: [T; PARAM_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel<T> {
    arch: Architecture,
    params: Vec<T>,
}

impl<T: Float + Send + Sync> EncoderModel<T> {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut params = vec![T::zero(); arch.param_count()];
        let k2 = arch.kernel * arch.kernel;
        let layout = arch.layout();
        for (s, &(w, _)) in arch.conv_shapes().iter().zip(&layout.convs) {
            let bound = (6.0 / (s.c_in * k2) as f64).sqrt();
            for p in &mut params[w..w + s.c_out * s.c_in * k2] {
                *p = T::from(rng.gen_range(-bound..bound)).unwrap();
            }
        }
        let last = *arch.widths.last().unwrap();
        let bound = (3.0 / last as f64).sqrt();
        for p in &mut params[layout.head_weight..layout.head_bias] {
            *p = T::from(rng.gen_range(-bound..bound)).unwrap();
        }
        Ok(EncoderModel { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                arch.param_count()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite weight".into()));
        }
        Ok(EncoderModel { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn cast<U: Float + Send + Sync>(&self) -> EncoderModel<U> {
        EncoderModel {
            arch: self.arch.clone(),
            params: self.params.iter().map(|&p| U::from(p).unwrap()).collect(),
        }
    }

    fn check_input(&self, img: &InputImage) -> Result<()> {
        if img.width != self.arch.input_width || img.height != self.arch.input_height {
            return Err(Error::Dimension(format!(
                "image is {}x{}, model expects {}x{}",
                img.width, img.height, self.arch.input_width, self.arch.input_height
            )));
        }
        if img.data.len() != 3 * img.width * img.height {
            return Err(Error::Dimension("image buffer does not hold 3 channels".into()));
        }
        Ok(())
    }

    fn run(&self, img: &InputImage) -> Trace<T> {
        let arch = &self.arch;
        let layout = arch.layout();
        let k = arch.kernel;
        let half = T::from(0.5).unwrap();
        // Inputs are centered on zero.
        let mut act: Vec<T> = img.data.iter().map(|&v| T::from(v).unwrap() - half).collect();
        let mut cols_all = Vec::with_capacity(arch.widths.len());
        let mut pre_all = Vec::with_capacity(arch.widths.len());
        for (s, &(w, b)) in arch.conv_shapes().iter().zip(&layout.convs) {
            let mut cols = Vec::new();
            im2col(&act, s.c_in, s.h, s.w, k, arch.stride, arch.padding, &mut cols);
            let n = s.ho * s.wo;
            let mut z = vec![T::zero(); s.c_out * n];
            let rows = s.c_in * k * k;
            matmul(&self.params[w..w + s.c_out * rows], &cols, s.c_out, rows, n, &mut z);
            for o in 0..s.c_out {
                let bias = self.params[b + o];
                for v in &mut z[o * n..(o + 1) * n] {
                    *v = *v + bias;
                }
            }
            act = z.iter().map(|&v| relu6(v)).collect();
            cols_all.push(cols);
            pre_all.push(z);
        }
        let last = arch.conv_shapes()[arch.widths.len() - 1];
        let n = T::from(last.ho * last.wo).unwrap();
        let pooled: Vec<T> = (0..last.c_out)
            .map(|c| {
                let sp = last.ho * last.wo;
                act[c * sp..(c + 1) * sp].iter().fold(T::zero(), |a, &v| a + v) / n
            })
            .collect();
        let mut out = [T::zero(); PARAM_COUNT];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.params[layout.head_weight + j * last.c_out..][..last.c_out];
            let y = row.iter().zip(&pooled).fold(self.params[layout.head_bias + j], |a, (&w, &g)| a + w * g);
            *o = sigmoid(y);
        }
        Trace {
            cols: cols_all,
            pre: pre_all,
            pooled,
            out,
        }
    }

    /// Network output for one image, in `[0, 1]^6`.
    pub fn forward_raw(&self, img: &InputImage) -> Result<[T; PARAM_COUNT]> {
        self.check_input(img)?;
        Ok(self.run(img).out)
    }

    pub fn forward(&self, img: &InputImage) -> Result<NormalizedParams> {
        let raw = self.forward_raw(img)?;
        let mut v = [0.0; PARAM_COUNT];
        for i in 0..PARAM_COUNT {
            v[i] = raw[i].to_f64().unwrap().clamp(0.0, 1.0);
        }
        NormalizedParams::new(v)
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    fn backprop(&self, trace: &Trace<T>, d_out: &[T; PARAM_COUNT], grad: &mut [T]) {
        let arch = &self.arch;
        let layout = arch.layout();
        let shapes = arch.conv_shapes();
        let k = arch.kernel;
        let last = shapes[shapes.len() - 1];

        let mut d_pooled = vec![T::zero(); last.c_out];
        for j in 0..PARAM_COUNT {
            let s = trace.out[j];
            let dy = d_out[j] * s * (T::one() - s);
            grad[layout.head_bias + j] = grad[layout.head_bias + j] + dy;
            let w0 = layout.head_weight + j * last.c_out;
            for c in 0..last.c_out {
                grad[w0 + c] = grad[w0 + c] + dy * trace.pooled[c];
                d_pooled[c] = d_pooled[c] + dy * self.params[w0 + c];
            }
        }
        let sp = last.ho * last.wo;
        let inv = T::one() / T::from(sp).unwrap();
        let mut d_act: Vec<T> = (0..last.c_out * sp).map(|i| d_pooled[i / sp] * inv).collect();

        for l in (0..shapes.len()).rev() {
            let s = shapes[l];
            let (w, b) = layout.convs[l];
            let n = s.ho * s.wo;
            let rows = s.c_in * k * k;
            let dz: Vec<T> = d_act
                .iter()
                .zip(&trace.pre[l])
                .map(|(&d, &z)| d * layers::relu6_grad(z))
                .collect();
            for o in 0..s.c_out {
                let sum = dz[o * n..(o + 1) * n].iter().fold(T::zero(), |a, &v| a + v);
                grad[b + o] = grad[b + o] + sum;
            }
            layers::matmul_bt_acc(&dz, &trace.cols[l], s.c_out, n, rows, &mut grad[w..w + s.c_out * rows]);
            if l > 0 {
                let mut d_cols = vec![T::zero(); rows * n];
                layers::matmul_at(&self.params[w..w + s.c_out * rows], &dz, s.c_out, rows, n, &mut d_cols);
                d_act = col2im(&d_cols, s.c_in, s.h, s.w, k, arch.stride, arch.padding);
            }
        }
    }

    /// Batch loss and its exact gradient. Per-sample gradients are computed
    /// in parallel and summed in batch order, so the result does not depend
    /// on the thread count.
    pub fn loss_and_gradient(&self, images: &[&InputImage], labels: &[NormalizedParams]) -> Result<(T, Vec<T>)> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(Error::Dimension(format!(
                "{} images for {} labels",
                images.len(),
                labels.len()
            )));
        }
        for img in images {
            self.check_input(img)?;
        }
        let scale = T::from(2.0 / images.len() as f64).unwrap();
        let per_sample: Vec<(T, Vec<T>)> = images
            .par_iter()
            .zip(labels.par_iter())
            .map(|(img, label)| {
                let trace = self.run(img);
                let mut d_out = [T::zero(); PARAM_COUNT];
                let mut sq = T::zero();
                for j in 0..PARAM_COUNT {
                    let r = trace.out[j] - T::from(label.0[j]).unwrap();
                    sq = sq + r * r;
                    d_out[j] = scale * r;
                }
                let mut g = vec![T::zero(); self.params.len()];
                self.backprop(&trace, &d_out, &mut g);
                (sq, g)
            })
            .collect();
        let mut loss = T::zero();
        let mut grad = vec![T::zero(); self.params.len()];
        for (sq, g) in per_sample {
            loss = loss + sq;
            for (a, b) in grad.iter_mut().zip(g) {
                *a = *a + b;
            }
        }
        Ok((loss / T::from(images.len()).unwrap(), grad))
    }

    pub fn loss(&self, images: &[&InputImage], labels: &[NormalizedParams]) -> Result<T> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(Error::Dimension("batch shapes differ".into()));
        }
        let preds = images
            .iter()
            .map(|img| self.forward_raw(img).map(|o| o.map(|v| v.to_f64().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        let preds: Vec<NormalizedParams> = preds.into_iter().map(NormalizedParams).collect();
        Ok(T::from(loss_graphics(&preds, labels)?).unwrap())
    }
}

/// Mean over the batch of the squared Euclidean distance between
/// prediction and label in normalized parameter space.
pub fn loss_graphics(predictions: &[NormalizedParams], labels: &[NormalizedParams]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| p.0.iter().zip(&l.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Estimates hair parameters from an image of any size.
pub fn digitize<T: Float + Send + Sync>(model: &EncoderModel<T>, image: &InputImage) -> Result<HairParams> {
    let arch = model.architecture();
    let input = if image.width == arch.input_width && image.height == arch.input_height {
        image.clone()
    } else if arch.input_width == arch.input_height {
        image.center_crop_resize(arch.input_width)
    } else {
        return Err(Error::Dimension("non-square model inputs need exact-size images".into()));
    };
    HairParams::denormalize(&model.forward(&input)?)
}

pub fn digitize_file<T: Float + Send + Sync>(model: &EncoderModel<T>, path: &Path) -> Result<HairParams> {
    let img = crate::render::read_rgb(path)?;
    digitize(model, &InputImage::from_rgb8(&img))
}
