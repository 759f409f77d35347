use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::loss::{column_differences, group_norm, reconstruction_loss, sparsity_penalty};
use crate::error::{Error, Result};
use crate::kan::{init_network_with, GridConfig, KanNetwork, LayerGrad};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// Weights of the regularizers, plus the smoothing constant of the
/// non-smooth norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Sparsity `‖Θs‖₁`.
    pub lambda1: f64,
    /// Self-representation residual `‖Z − Θsᵀ·Z‖_F²`.
    pub lambda2: f64,
    /// Temporal smoothness `‖Θs·R‖_{1,2}`.
    pub lambda3: f64,
    pub eps_norm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 10.0,
            lambda3: 1.0,
            eps_norm: 1e-8,
        }
    }
}

/// Autoencoder shape. The encoder maps `D → hidden… → latent`; the decoder
/// mirrors it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub grid: GridConfig,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            latent_dim: 16,
            grid: GridConfig::default(),
        }
    }
}

impl ArchConfig {
    pub fn encoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(input_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.latent_dim);
        d
    }

    pub fn decoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut d = self.encoder_dims(input_dim);
        d.reverse();
        d
    }
}

/// The four loss terms, unweighted, and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub sparsity: f64,
    pub selfrep: f64,
    pub smoothness: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.reconstruction.is_finite()
            && self.sparsity.is_finite()
            && self.selfrep.is_finite()
            && self.smoothness.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfRepModel {
    pub encoder: KanNetwork,
    pub decoder: KanNetwork,
    /// `n × n`, zero diagonal.
    pub theta_s: Matrix,
    pub loss_weights: LossWeights,
}

/// Gradients of the total loss, mirroring [`SelfRepModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub encoder: Vec<LayerGrad>,
    pub decoder: Vec<LayerGrad>,
    pub theta_s: Matrix,
}

impl ModelGrad {
    /// Tensors in the same order as [`SelfRepModel::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.encoder {
            out.extend(g.tensors());
        }
        out.push(self.theta_s.as_slice());
        for g in &self.decoder {
            out.extend(g.tensors());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(
            self.tensors()
                .iter()
                .map(|t| t.iter().map(|v| v * v).sum::<f64>())
                .sum(),
        )
    }
}

/// Intermediate values of one forward pass through the full model.
#[derive(Debug, Clone)]
pub struct ModelForward {
    pub latent: Matrix,
    pub rebuilt_latent: Matrix,
    pub reconstruction: Matrix,
}

impl SelfRepModel {
    /// Fresh model for `n` patches of dimension `input_dim`; `Θs` starts at zero.
    pub fn init(
        input_dim: usize,
        n: usize,
        arch: &ArchConfig,
        loss_weights: LossWeights,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || arch.latent_dim == 0 {
            return Err(Error::InvalidDims(
                "input and latent widths must be positive".into(),
            ));
        }
        let mut rng = SeededRng::new(seed);
        let encoder = init_network_with(&arch.encoder_dims(input_dim), arch.grid, &mut rng)?;
        let decoder = init_network_with(&arch.decoder_dims(input_dim), arch.grid, &mut rng)?;
        Ok(Self {
            encoder,
            decoder,
            theta_s: Matrix::zeros(n, n),
            loss_weights,
        })
    }

    /// Patch count the coefficient matrix was built for.
    pub fn n(&self) -> usize {
        self.theta_s.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta_s.rows();
        if self.theta_s.cols() != n {
            return Err(Error::dims("theta_s", n, self.theta_s.cols()));
        }
        if self.decoder.in_dim() != self.encoder.out_dim() {
            return Err(Error::dims(
                "decoder input",
                self.encoder.out_dim(),
                self.decoder.in_dim(),
            ));
        }
        if self.decoder.out_dim() != self.encoder.in_dim() {
            return Err(Error::dims(
                "decoder output",
                self.encoder.in_dim(),
                self.decoder.out_dim(),
            ));
        }
        if !self.theta_s.is_finite() {
            return Err(Error::InvalidConfig("theta_s must be finite".into()));
        }
        Ok(())
    }

    pub fn zero_diagonal(&mut self) {
        for i in 0..self.theta_s.rows() {
            self.theta_s.set(i, i, 0.0);
        }
    }

    /// Parameter tensors: encoder layers, `Θs`, decoder layers.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.encoder.layers_mut() {
            out.extend(layer.tensors_mut());
        }
        out.push(self.theta_s.as_mut_slice());
        for layer in self.decoder.layers_mut() {
            out.extend(layer.tensors_mut());
        }
        out
    }

    pub fn encode(&self, patches: &Matrix) -> Result<Matrix> {
        self.encoder.predict(patches)
    }

    pub fn forward(&self, patches: &Matrix) -> Result<ModelForward> {
        self.check_rows(patches)?;
        let latent = self.encoder.predict(patches)?;
        let rebuilt_latent = self.theta_s.t_matmul(&latent)?;
        let reconstruction = self.decoder.predict(&rebuilt_latent)?;
        Ok(ModelForward {
            latent,
            rebuilt_latent,
            reconstruction,
        })
    }

    fn check_rows(&self, patches: &Matrix) -> Result<()> {
        if patches.rows() != self.n() {
            return Err(Error::dims("patch count", self.n(), patches.rows()));
        }
        Ok(())
    }

    fn regularizers(&self, latent: &Matrix, rebuilt: &Matrix) -> Result<(f64, f64, f64)> {
        let eps = self.loss_weights.eps_norm;
        let sparsity = sparsity_penalty(&self.theta_s, eps);
        let selfrep = latent.sub(rebuilt)?.frobenius_sq();
        let smoothness = group_norm(&column_differences(&self.theta_s), eps);
        Ok((sparsity, selfrep, smoothness))
    }

    fn combine(
        &self,
        reconstruction: f64,
        sparsity: f64,
        selfrep: f64,
        smoothness: f64,
    ) -> LossBreakdown {
        let w = self.loss_weights;
        LossBreakdown {
            total: reconstruction
                + w.lambda1 * sparsity
                + w.lambda2 * selfrep
                + w.lambda3 * smoothness,
            reconstruction,
            sparsity,
            selfrep,
            smoothness,
        }
    }

    /// `½‖P − P̂‖² + λ1·‖Θs‖₁ + λ2·‖Z − Θsᵀ·Z‖² + λ3·‖Θs·R‖_{1,2}` with
    /// `P̂ = decoder(Θsᵀ·encoder(P))`.
    pub fn total_loss(&self, patches: &Matrix) -> Result<LossBreakdown> {
        let fwd = self.forward(patches)?;
        let rec = reconstruction_loss(patches, &fwd.reconstruction)?;
        let (sp, sr, sm) = self.regularizers(&fwd.latent, &fwd.rebuilt_latent)?;
        Ok(self.combine(rec, sp, sr, sm))
    }

    /// Loss and exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, patches: &Matrix) -> Result<(LossBreakdown, ModelGrad)> {
        self.check_rows(patches)?;
        let w = self.loss_weights;
        let eps = w.eps_norm;
        let theta = &self.theta_s;
        let n = theta.rows();

        let (latent, enc_cache) = self.encoder.forward(patches)?;
        let rebuilt = theta.t_matmul(&latent)?;
        let (p_hat, dec_cache) = self.decoder.forward(&rebuilt)?;

        let resid_p = p_hat.sub(patches)?;
        let rec = 0.5 * resid_p.frobenius_sq();
        let resid_z = latent.sub(&rebuilt)?;
        let diffs = column_differences(theta);
        let sparsity = sparsity_penalty(theta, eps);
        let selfrep = resid_z.frobenius_sq();
        let smoothness = group_norm(&diffs, eps);
        let breakdown = self.combine(rec, sparsity, selfrep, smoothness);

        // decoder: dL/dP̂ = P̂ − P
        let dec_grad = self.decoder.backward(&dec_cache, &resid_p)?;
        let d_rebuilt = &dec_grad.input;

        // Zhat = Θsᵀ Z  ⇒  dZ += Θs·dZhat,  dΘs += Z·dZhatᵀ
        // E = Z − Θsᵀ Z, G = 2λ2·E  ⇒  dZ += G − Θs·G,  dΘs −= Z·Gᵀ
        let g = resid_z.scale(2.0 * w.lambda2);
        let mut d_latent = g.clone();
        let through_theta = theta.matmul(&d_rebuilt.sub(&g)?)?;
        for (a, b) in d_latent
            .as_mut_slice()
            .iter_mut()
            .zip(through_theta.as_slice())
        {
            *a += b;
        }
        let mut d_theta = latent.matmul_t(&d_rebuilt.sub(&g)?)?;

        for (dt, &t) in d_theta.as_mut_slice().iter_mut().zip(theta.as_slice()) {
            *dt += w.lambda1 * t / libm::sqrt(t * t + eps * eps);
        }

        // column j of Θs·R is θ_{j+1} − θ_j
        if n >= 2 && w.lambda3 != 0.0 {
            let mut col_norm = vec![0.0; n - 1];
            for i in 0..n {
                for (acc, v) in col_norm.iter_mut().zip(diffs.row(i)) {
                    *acc += v * v;
                }
            }
            for c in &mut col_norm {
                *c = libm::sqrt(*c + eps * eps);
            }
            for i in 0..n {
                for j in 0..n - 1 {
                    let gd = w.lambda3 * diffs.get(i, j) / col_norm[j];
                    d_theta.add_at(i, j + 1, gd);
                    d_theta.add_at(i, j, -gd);
                }
            }
        }

        let enc_grad = self.encoder.backward(&enc_cache, &d_latent)?;
        Ok((
            breakdown,
            ModelGrad {
                encoder: enc_grad.layers,
                decoder: dec_grad.layers,
                theta_s: d_theta,
            },
        ))
    }

    /// Plain autoencoder objective `½‖P − decoder(encoder(P))‖²`, used for
    /// optional pre-training. The `Θs` gradient is zero.
    pub fn autoencoder_loss_and_grad(
        &self,
        patches: &Matrix,
    ) -> Result<(LossBreakdown, ModelGrad)> {
        self.check_rows(patches)?;
        let (latent, enc_cache) = self.encoder.forward(patches)?;
        let (p_hat, dec_cache) = self.decoder.forward(&latent)?;
        let resid_p = p_hat.sub(patches)?;
        let rec = 0.5 * resid_p.frobenius_sq();
        let dec_grad = self.decoder.backward(&dec_cache, &resid_p)?;
        let enc_grad = self.encoder.backward(&enc_cache, &dec_grad.input)?;
        let n = self.n();
        Ok((
            LossBreakdown {
                total: rec,
                reconstruction: rec,
                ..LossBreakdown::default()
            },
            ModelGrad {
                encoder: enc_grad.layers,
                decoder: dec_grad.layers,
                theta_s: Matrix::zeros(n, n),
            },
        ))
    }
}

/// Free-function form of [`SelfRepModel::total_loss`].
pub fn total_loss(patches: &Matrix, model: &SelfRepModel) -> Result<LossBreakdown> {
    model.total_loss(patches)
}
