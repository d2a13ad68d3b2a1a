//! Per-pixel MLP classifier: five local features, one tanh hidden layer,
//! and a sigmoid output probability per pixel.
//!
//! Features are precomputed once per image; the forward pass then runs
//! layer-major (one hidden plane at a time over all pixels) so the inner
//! loops autovectorize. The backward pass consumes the cached hidden
//! activations and writes per-image gradients that the caller averages,
//! keeping a duplicated image in a batch exactly equivalent to one copy.

use crate::error::{Error, Result};
use crate::fastmath;
use crate::grid::Grid;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Features per pixel: intensity, 3x3 mean, 7x7 mean, x/width, y/height.
pub const N_FEATURES: usize = 5;

pub const DEFAULT_HIDDEN_DIM: usize = 16;

/// Per-pixel feature planes of one image, stored plane-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    planes: Vec<Vec<f64>>,
    width: usize,
    height: usize,
}

impl Features {
    /// Computes locational and box-mean features via a summed-area table.
    /// Box means treat out-of-frame pixels as zero but always divide by the
    /// full window size (9 and 49).
    pub fn from_image(image: &Grid) -> Self {
        let (w, h) = (image.width(), image.height());
        let data = image.data();

        // sat[(y+1)*(w+1) + (x+1)] = sum of data[..=y][..=x].
        let mut sat = vec![0.0f64; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += data[y * w + x];
                sat[(y + 1) * (w + 1) + (x + 1)] = sat[y * (w + 1) + (x + 1)] + row;
            }
        }
        let window_sum = |x: usize, y: usize, r: usize| {
            let x0 = x.saturating_sub(r);
            let y0 = y.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            let y1 = (y + r + 1).min(h);
            sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
                + sat[y0 * (w + 1) + x0]
        };

        let n = w * h;
        let mut mean3 = vec![0.0; n];
        let mut mean7 = vec![0.0; n];
        let mut fx = vec![0.0; n];
        let mut fy = vec![0.0; n];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                mean3[i] = window_sum(x, y, 1) / 9.0;
                mean7[i] = window_sum(x, y, 3) / 49.0;
                fx[i] = x as f64 / w as f64;
                fy[i] = y as f64 / h as f64;
            }
        }
        Self {
            planes: vec![data.to_vec(), mean3, mean7, fx, fy],
            width: w,
            height: h,
        }
    }

    /// Mean of each plane, the model's per-image centering constants.
    fn plane_means(&self) -> [f64; N_FEATURES] {
        let n = self.planes[0].len().max(1);
        let mut means = [0.0; N_FEATURES];
        for (m, plane) in means.iter_mut().zip(&self.planes) {
            *m = plane.iter().sum::<f64>() / n as f64;
        }
        means
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        &self.planes[k]
    }
}

/// Weights of the two-layer per-pixel classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    hidden_dim: usize,
    /// Hidden weights, row-major: w1[j * N_FEATURES + k].
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl MlpModel {
    /// Xavier-uniform weights (biases zero), drawn row-major from `rng`.
    pub fn init<R: Rng>(hidden_dim: usize, rng: &mut R) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        let lim1 = (6.0 / (N_FEATURES + hidden_dim) as f64).sqrt();
        let lim2 = (6.0 / (hidden_dim + 1) as f64).sqrt();
        let w1 = (0..hidden_dim * N_FEATURES)
            .map(|_| rng.gen_range(-lim1..lim1))
            .collect();
        let w2 = (0..hidden_dim).map(|_| rng.gen_range(-lim2..lim2)).collect();
        Ok(Self {
            hidden_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: 0.0,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn n_params(&self) -> usize {
        self.hidden_dim * (N_FEATURES + 2) + 1
    }

    /// Checks internal consistency, e.g. after loading a checkpoint.
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0
            || self.w1.len() != self.hidden_dim * N_FEATURES
            || self.b1.len() != self.hidden_dim
            || self.w2.len() != self.hidden_dim
        {
            return Err(Error::Format("model tensor shapes are inconsistent".into()));
        }
        if self.w1.iter().chain(&self.b1).chain(&self.w2).chain([&self.b2]).any(|v| !v.is_finite())
        {
            return Err(Error::Format("model contains non-finite weights".into()));
        }
        Ok(())
    }

    /// All parameters as one flat vector: w1, b1, w2, b2.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2[0];
        Ok(())
    }

    /// Sigmoid probabilities and cached hidden activations into `ws`.
    ///
    /// Inputs are centered by their per-image plane means before the first
    /// layer (folded into the hidden biases, so the loop cost is
    /// unchanged). Zero-mean inputs decouple the class-separation weight
    /// direction from the output bias; losses with sign-shaped gradients
    /// (MAE and its relatives) collapse to all-background without this.
    pub fn forward(&self, feats: &Features, ws: &mut Workspace) {
        let n = feats.len();
        ws.hidden.resize(self.hidden_dim * n, 0.0);
        ws.probs.resize(n, 0.0);
        ws.centers = feats.plane_means();
        let f0 = &feats.plane(0)[..n];
        let f1 = &feats.plane(1)[..n];
        let f2 = &feats.plane(2)[..n];
        let f3 = &feats.plane(3)[..n];
        let f4 = &feats.plane(4)[..n];

        for j in 0..self.hidden_dim {
            let w = &self.w1[j * N_FEATURES..(j + 1) * N_FEATURES];
            let b = self.b1[j]
                - w.iter()
                    .zip(ws.centers)
                    .map(|(wk, ck)| wk * ck)
                    .sum::<f64>();
            let hj = &mut ws.hidden[j * n..(j + 1) * n];
            for p in 0..n {
                hj[p] = b + w[0] * f0[p] + w[1] * f1[p] + w[2] * f2[p] + w[3] * f3[p] + w[4] * f4[p];
            }
            for v in hj.iter_mut() {
                *v = fastmath::tanh(*v);
            }
        }

        let probs = &mut ws.probs[..n];
        probs.fill(self.b2);
        for j in 0..self.hidden_dim {
            let wj = self.w2[j];
            let hj = &ws.hidden[j * n..(j + 1) * n];
            for p in 0..n {
                probs[p] += wj * hj[p];
            }
        }
        for v in probs.iter_mut() {
            *v = fastmath::sigmoid(*v);
        }
    }

    /// Probabilities for one image as a grid (allocating convenience).
    pub fn predict(&self, feats: &Features) -> Result<Grid> {
        let mut ws = Workspace::new();
        self.forward(feats, &mut ws);
        Grid::from_data(feats.width(), feats.height(), ws.probs)
    }

    /// Per-image parameter gradients from dL/dp(robability), overwriting
    /// `grads`. Requires the workspace of the matching [`forward`] call.
    pub fn backward(
        &self,
        feats: &Features,
        ws: &mut Workspace,
        d_p: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<()> {
        let n = feats.len();
        if d_p.len() != n || ws.probs.len() != n || ws.hidden.len() != self.hidden_dim * n {
            return Err(Error::Shape(format!(
                "gradient input for {} pixels does not match workspace ({} probs, {} hidden)",
                n,
                ws.probs.len(),
                ws.hidden.len()
            )));
        }
        if grads.hidden_dim != self.hidden_dim {
            return Err(Error::Shape(format!(
                "gradient buffer is for hidden_dim {}, model has {}",
                grads.hidden_dim, self.hidden_dim
            )));
        }

        // Output pre-activation gradient: dz2 = dL/dp * sigmoid'(z2).
        ws.dz2.resize(n, 0.0);
        let mut db2 = 0.0;
        for p in 0..n {
            let prob = ws.probs[p];
            let g = d_p[p] * prob * (1.0 - prob);
            ws.dz2[p] = g;
            db2 += g;
        }
        grads.b2 = db2;

        let f0 = &feats.plane(0)[..n];
        let f1 = &feats.plane(1)[..n];
        let f2 = &feats.plane(2)[..n];
        let f3 = &feats.plane(3)[..n];
        let f4 = &feats.plane(4)[..n];
        for j in 0..self.hidden_dim {
            let hj = &ws.hidden[j * n..(j + 1) * n];
            let w2j = self.w2[j];
            let mut dw2 = 0.0;
            let mut db1 = 0.0;
            let mut dw1 = [0.0f64; N_FEATURES];
            for p in 0..n {
                let g2 = ws.dz2[p];
                let h = hj[p];
                dw2 += g2 * h;
                // Through tanh: dz1 = w2 * dz2 * (1 - h^2).
                let g1 = w2j * g2 * (1.0 - h * h);
                db1 += g1;
                dw1[0] += g1 * f0[p];
                dw1[1] += g1 * f1[p];
                dw1[2] += g1 * f2[p];
                dw1[3] += g1 * f3[p];
                dw1[4] += g1 * f4[p];
            }
            grads.w2[j] = dw2;
            grads.b1[j] = db1;
            // Forward sees f_k - c_k, so dL/dw1 picks up a -c_k * db1 term.
            for (k, dv) in dw1.iter().enumerate() {
                grads.w1[j * N_FEATURES + k] = dv - ws.centers[k] * db1;
            }
        }
        Ok(())
    }
}

/// Reusable buffers for forward/backward passes over one image.
#[derive(Debug, Default)]
pub struct Workspace {
    /// tanh activations, plane-major: hidden[j * n + p].
    pub hidden: Vec<f64>,
    /// Sigmoid probabilities per pixel.
    pub probs: Vec<f64>,
    dz2: Vec<f64>,
    /// Per-image plane means recorded by the last forward pass.
    centers: [f64; N_FEATURES],
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Parameter gradients of one image (or an accumulated batch).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    hidden_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpGrads {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            hidden_dim,
            w1: vec![0.0; hidden_dim * N_FEATURES],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim],
            b2: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2 = 0.0;
    }

    /// Elementwise accumulation, used to combine per-image gradients.
    pub fn add_assign(&mut self, other: &MlpGrads) -> Result<()> {
        if self.hidden_dim != other.hidden_dim {
            return Err(Error::Shape(format!(
                "cannot combine gradients for hidden_dim {} and {}",
                self.hidden_dim, other.hidden_dim
            )));
        }
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += b;
        }
        self.b2 += other.b2;
        Ok(())
    }

    /// Same flat order as [`MlpModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image<R: Rng>(rng: &mut R, w: usize, h: usize) -> Grid {
        let data = (0..w * h).map(|_| rng.gen_range(0.0..=1.0)).collect();
        Grid::from_data(w, h, data).unwrap()
    }

    fn random_model<R: Rng>(rng: &mut R, hidden: usize) -> MlpModel {
        let mut m = MlpModel::init(hidden, rng).unwrap();
        // Nonzero biases so gradient tests exercise every parameter.
        let mut flat = m.params_flat();
        for v in flat.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        m.set_params_flat(&flat).unwrap();
        m
    }

    #[test]
    fn features_match_window_scan() {
        let mut rng = crate::seed::stream(&[601]);
        for _ in 0..10 {
            let (w, h) = (rng.gen_range(4..12), rng.gen_range(4..12));
            let image = random_image(&mut rng, w, h);
            let feats = Features::from_image(&image);

            assert_eq!(feats.plane(0), image.data());
            // Box means from a brute-force window scan, zero padding.
            for (k, r, div) in [(1usize, 1i64, 9.0), (2, 3, 49.0)] {
                for y in 0..h {
                    for x in 0..w {
                        let mut sum = 0.0;
                        for dy in -r..=r {
                            for dx in -r..=r {
                                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                                    sum += image.data()[sy as usize * w + sx as usize];
                                }
                            }
                        }
                        let want = sum / div;
                        let got = feats.plane(k)[y * w + x];
                        assert!(
                            (got - want).abs() <= 1e-12,
                            "plane {k} at ({x},{y}): {got} vs {want}"
                        );
                    }
                }
            }
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    assert_eq!(feats.plane(3)[i], x as f64 / w as f64);
                    assert_eq!(feats.plane(4)[i], y as f64 / h as f64);
                }
            }
        }
    }

    #[test]
    fn forward_matches_reference_reimplementation() {
        let mut rng = crate::seed::stream(&[602]);
        for _ in 0..3 {
            let image = random_image(&mut rng, 9, 7);
            let feats = Features::from_image(&image);
            let model = random_model(&mut rng, 6);
            let mut ws = Workspace::new();
            model.forward(&feats, &mut ws);

            // Pixel-major reference with std math, inputs centered by their
            // per-image plane means as in `forward`.
            let c = feats.plane_means();
            for p in 0..feats.len() {
                let mut z2 = model.b2;
                for j in 0..6 {
                    let mut z1 = model.b1[j];
                    for k in 0..N_FEATURES {
                        z1 += model.w1[j * N_FEATURES + k] * (feats.plane(k)[p] - c[k]);
                    }
                    z2 += model.w2[j] * z1.tanh();
                }
                let want = 1.0 / (1.0 + (-z2).exp());
                assert!(
                    (ws.probs[p] - want).abs() <= 1e-12,
                    "pixel {p}: {} vs {want}",
                    ws.probs[p]
                );
                assert!(ws.probs[p] > 0.0 && ws.probs[p] < 1.0);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = crate::seed::stream(&[603]);
        let image = random_image(&mut rng, 8, 8);
        let feats = Features::from_image(&image);
        let model = random_model(&mut rng, 4);
        let n = feats.len();
        let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();

        // Scalar objective: mean squared gap to fixed targets.
        let objective = |m: &MlpModel| {
            let mut ws = Workspace::new();
            m.forward(&feats, &mut ws);
            ws.probs
                .iter()
                .zip(&targets)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n as f64
        };

        let mut ws = Workspace::new();
        model.forward(&feats, &mut ws);
        let d_p: Vec<f64> = ws
            .probs
            .iter()
            .zip(&targets)
            .map(|(p, t)| 2.0 * (p - t) / n as f64)
            .collect();
        let mut grads = MlpGrads::zeros(4);
        model.backward(&feats, &mut ws, &d_p, &mut grads).unwrap();
        let analytic = grads.flat();

        let theta = model.params_flat();
        for i in 0..theta.len() {
            let h = 1e-5 * theta[i].abs().max(1.0);
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut tp = theta.clone();
            tp[i] += h;
            plus.set_params_flat(&tp).unwrap();
            let mut tm = theta.clone();
            tm[i] -= h;
            minus.set_params_flat(&tm).unwrap();
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let denom = fd.abs().max(1e-8);
            assert!(
                (analytic[i] - fd).abs() / denom <= 1e-5,
                "parameter {i}: analytic {} vs fd {fd}",
                analytic[i]
            );
        }
    }

    #[test]
    fn duplicated_image_gradients_are_exact() {
        let mut rng = crate::seed::stream(&[604]);
        let image = random_image(&mut rng, 6, 6);
        let feats = Features::from_image(&image);
        let model = random_model(&mut rng, 5);
        let mut ws = Workspace::new();
        model.forward(&feats, &mut ws);
        let d_p: Vec<f64> = (0..feats.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // Batch of one image at full weight.
        let mut single = MlpGrads::zeros(5);
        model.backward(&feats, &mut ws, &d_p, &mut single).unwrap();

        // Batch of the same image twice at half weight each.
        let half: Vec<f64> = d_p.iter().map(|g| g / 2.0).collect();
        let mut img = MlpGrads::zeros(5);
        let mut batch = MlpGrads::zeros(5);
        model.backward(&feats, &mut ws, &half, &mut img).unwrap();
        batch.add_assign(&img).unwrap();
        model.backward(&feats, &mut ws, &half, &mut img).unwrap();
        batch.add_assign(&img).unwrap();

        assert_eq!(single, batch);
    }

    #[test]
    fn params_roundtrip_and_checkpoint_serde() {
        let mut rng = crate::seed::stream(&[605]);
        let model = random_model(&mut rng, DEFAULT_HIDDEN_DIM);
        assert_eq!(model.n_params(), 16 * 7 + 1);

        let mut copy = MlpModel::init(DEFAULT_HIDDEN_DIM, &mut rng).unwrap();
        copy.set_params_flat(&model.params_flat()).unwrap();
        assert_eq!(copy, model);
        assert!(copy.set_params_flat(&[0.0]).is_err());

        let json = serde_json::to_string(&model).unwrap();
        let back: MlpModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        back.validate().unwrap();

        let mut broken: MlpModel = serde_json::from_str(&json).unwrap();
        broken.w2.pop();
        assert!(broken.validate().is_err());
    }

    #[test]
    fn init_respects_xavier_bounds() {
        let mut rng = crate::seed::stream(&[606]);
        let model = MlpModel::init(16, &mut rng).unwrap();
        let lim1 = (6.0f64 / 21.0).sqrt();
        let lim2 = (6.0f64 / 17.0).sqrt();
        assert!(model.w1.iter().all(|w| w.abs() < lim1));
        assert!(model.w2.iter().all(|w| w.abs() < lim2));
        assert!(model.b1.iter().all(|&b| b == 0.0));
        assert_eq!(model.b2, 0.0);
        assert!(MlpModel::init(0, &mut rng).is_err());

        // Same stream, same weights.
        let mut rng2 = crate::seed::stream(&[606]);
        assert_eq!(MlpModel::init(16, &mut rng2).unwrap(), model);
    }

    #[test]
    fn backward_rejects_mismatched_shapes() {
        let mut rng = crate::seed::stream(&[607]);
        let image = random_image(&mut rng, 4, 4);
        let feats = Features::from_image(&image);
        let model = random_model(&mut rng, 3);
        let mut ws = Workspace::new();
        model.forward(&feats, &mut ws);
        let mut grads = MlpGrads::zeros(3);
        assert!(model.backward(&feats, &mut ws, &[0.0; 3], &mut grads).is_err());
        let mut wrong = MlpGrads::zeros(4);
        let d_p = vec![0.0; 16];
        assert!(model.backward(&feats, &mut ws, &d_p, &mut wrong).is_err());
        assert!(wrong.add_assign(&grads).is_err());
    }
}
