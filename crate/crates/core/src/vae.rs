//! Mixed-type tokenizer and variational autoencoder over compressed tables.
//!
//! Numeric (and datetime, as epoch seconds) columns are standardized;
//! categorical columns are one-hot over the training vocabulary. The encoder
//! MLP outputs mean and log-variance of the latent distribution; training
//! minimizes squared reconstruction error on standardized numerics plus
//! cross-entropy on categorical logits plus a beta-weighted KL term, by
//! reparameterized stochastic gradients.

use crate::compress::CompressedTable;
use crate::error::{CoreError, Result};
use crate::nn::{grad_at, softmax_rows, Adam, Mlp, MlpGrads, ParamAccess};
use crate::rng::{normal_matrix, seeded, SeededRng};
use crate::scalar::Scalar;
use crate::schema::{ColumnKind, ColumnSchema};
use crate::table::{Cell, CellValue, Table};
use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Per-column tokenizer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CodecColumn {
    /// Standardizer plus training range for decode-time clipping.
    Numeric {
        mean: f64,
        std: f64,
        min: f64,
        max: f64,
    },
    /// Vocabulary in first-seen order; one-hot width = vocab length.
    Categorical { vocab: Vec<String> },
}

/// Tokenizer fitted on a compressed training table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnCodec {
    pub schema: Vec<ColumnSchema>,
    pub columns: Vec<CodecColumn>,
}

const STD_FLOOR: f64 = 1e-8;

/// Fits standardizers (population moments) and vocabularies.
pub fn fit_codec(table: &CompressedTable) -> Result<ColumnCodec> {
    let all: Vec<usize> = (0..table.n_columns()).collect();
    if let Some((row, column)) = table.has_missing_in(&all) {
        return Err(CoreError::MissingCell { row, column });
    }
    let mut columns = Vec::with_capacity(table.n_columns());
    for (idx, col) in table.schema().iter().enumerate() {
        match col.kind {
            ColumnKind::Numeric | ColumnKind::Datetime => {
                let values = table.numeric_column(idx)?;
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let mut std = var.sqrt();
                if std < STD_FLOOR {
                    log::warn!(
                        "column '{}' is constant; flooring std to {STD_FLOOR}",
                        col.name
                    );
                    std = STD_FLOOR;
                }
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                columns.push(CodecColumn::Numeric { mean, std, min, max });
            }
            ColumnKind::Categorical => {
                let mut vocab = Vec::new();
                let mut seen = std::collections::HashSet::new();
                for token in table.categorical_column(idx)? {
                    if seen.insert(token) {
                        vocab.push(token.to_string());
                    }
                }
                columns.push(CodecColumn::Categorical { vocab });
            }
        }
    }
    Ok(ColumnCodec {
        schema: table.schema().to_vec(),
        columns,
    })
}

impl ColumnCodec {
    /// Total dense width (numerics contribute 1, categoricals their vocab size).
    pub fn dense_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                CodecColumn::Numeric { .. } => 1,
                CodecColumn::Categorical { vocab } => vocab.len(),
            })
            .sum()
    }

    /// Dense offsets per column, aligned with `columns`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.columns.len());
        let mut offset = 0;
        for c in &self.columns {
            out.push(offset);
            offset += match c {
                CodecColumn::Numeric { .. } => 1,
                CodecColumn::Categorical { vocab } => vocab.len(),
            };
        }
        out
    }

    /// Encodes a conforming table into the dense space.
    pub fn encode_table<T: Scalar>(&self, table: &CompressedTable) -> Result<Array2<T>> {
        if table.n_columns() != self.columns.len() {
            return Err(CoreError::Schema(format!(
                "table has {} columns, codec was fitted on {}",
                table.n_columns(),
                self.columns.len()
            )));
        }
        let offsets = self.offsets();
        let width = self.dense_width();
        let vocab_index: Vec<Option<HashMap<&str, usize>>> = self
            .columns
            .iter()
            .map(|c| match c {
                CodecColumn::Categorical { vocab } => Some(
                    vocab
                        .iter()
                        .enumerate()
                        .map(|(i, t)| (t.as_str(), i))
                        .collect(),
                ),
                CodecColumn::Numeric { .. } => None,
            })
            .collect();

        let mut out = Array2::<T>::zeros((table.n_rows(), width));
        for row in 0..table.n_rows() {
            for (col_idx, codec_col) in self.columns.iter().enumerate() {
                let offset = offsets[col_idx];
                match (codec_col, table.cell(row, col_idx)) {
                    (CodecColumn::Numeric { mean, std, .. }, cell) => {
                        let v = match cell {
                            Cell::Number(v) => v,
                            Cell::Timestamp(ts) => ts as f64,
                            _ => {
                                return Err(CoreError::MissingCell {
                                    row,
                                    column: self.schema[col_idx].name.clone(),
                                })
                            }
                        };
                        out[(row, offset)] = T::of((v - mean) / std);
                    }
                    (CodecColumn::Categorical { .. }, Cell::Category(id)) => {
                        let token = table.token(id);
                        let index = vocab_index[col_idx]
                            .as_ref()
                            .unwrap()
                            .get(token)
                            .copied()
                            .ok_or_else(|| CoreError::OutOfVocabulary {
                                column: self.schema[col_idx].name.clone(),
                                token: token.to_string(),
                            })?;
                        out[(row, offset + index)] = T::one();
                    }
                    (CodecColumn::Categorical { .. }, _) => {
                        return Err(CoreError::MissingCell {
                            row,
                            column: self.schema[col_idx].name.clone(),
                        })
                    }
                }
            }
        }
        Ok(out)
    }

    /// Decodes raw network outputs back to a table: numerics de-standardized
    /// and clipped to the training range, categoricals by argmax (ties to the
    /// lowest vocab index).
    pub fn decode_matrix<T: Scalar>(&self, dense: &Array2<T>) -> Result<CompressedTable> {
        if dense.ncols() != self.dense_width() {
            return Err(CoreError::Schema(format!(
                "dense width {} does not match codec width {}",
                dense.ncols(),
                self.dense_width()
            )));
        }
        let offsets = self.offsets();
        let mut builder = Table::builder(self.schema.clone())?;
        for row in 0..dense.nrows() {
            let mut cells: Vec<CellValue> = Vec::with_capacity(self.columns.len());
            for (col_idx, codec_col) in self.columns.iter().enumerate() {
                let offset = offsets[col_idx];
                match codec_col {
                    CodecColumn::Numeric { mean, std, min, max } => {
                        let raw = dense[(row, offset)].to_f64_lossy();
                        if !raw.is_finite() {
                            return Err(CoreError::Numeric(format!(
                                "non-finite decoder output at row {row}, column '{}'",
                                self.schema[col_idx].name
                            )));
                        }
                        let value = (raw * std + mean).clamp(*min, *max);
                        match self.schema[col_idx].kind {
                            ColumnKind::Datetime => {
                                cells.push(CellValue::Timestamp(value.round() as i64))
                            }
                            _ => cells.push(CellValue::Number(value)),
                        }
                    }
                    CodecColumn::Categorical { vocab } => {
                        let mut best = 0usize;
                        let mut best_score = T::neg_infinity();
                        for (i, _) in vocab.iter().enumerate() {
                            let score = dense[(row, offset + i)];
                            if !score.to_f64_lossy().is_finite() {
                                return Err(CoreError::Numeric(format!(
                                    "non-finite decoder logit at row {row}, column '{}'",
                                    self.schema[col_idx].name
                                )));
                            }
                            if score > best_score {
                                best_score = score;
                                best = i;
                            }
                        }
                        cells.push(CellValue::Category(&vocab[best]));
                    }
                }
            }
            builder.push_row(&cells)?;
        }
        Ok(builder.finish())
    }
}

/// Per-dimension whitening statistics fitted on mean-mode training encodings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Whitening<T: Scalar> {
    pub mean: Array1<T>,
    pub std: Array1<T>,
}

impl<T: Scalar> Whitening<T> {
    fn fit(latents: &Array2<T>) -> Self {
        let n = T::of(latents.nrows() as f64);
        let mean = latents.sum_axis(Axis(0)) / n;
        let mut std = Array1::<T>::zeros(latents.ncols());
        for (dim, s) in std.indexed_iter_mut() {
            let m = mean[dim];
            let var = latents
                .column(dim)
                .iter()
                .map(|&v| (v - m) * (v - m))
                .sum::<T>()
                / n;
            *s = var.sqrt().max(T::of(STD_FLOOR));
        }
        Whitening { mean, std }
    }

    pub fn apply(&self, latents: &Array2<T>) -> Array2<T> {
        let mut out = latents.clone();
        for mut row in out.rows_mut() {
            row -= &self.mean;
            row /= &self.std;
        }
        out
    }

    pub fn invert(&self, whitened: &Array2<T>) -> Array2<T> {
        let mut out = whitened.clone();
        for mut row in out.rows_mut() {
            row *= &self.std;
            row += &self.mean;
        }
        out
    }
}

/// Whitened latent rows plus the stats that whitened them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LatentMatrix<T: Scalar> {
    pub data: Array2<T>,
    pub whitening: Whitening<T>,
}

impl<T: Scalar> LatentMatrix<T> {
    pub fn d_latent(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaeConfig {
    /// Defaults to `min(64, 4 * n_columns)` when None.
    pub d_latent: Option<usize>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta_kl: f64,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            d_latent: None,
            hidden: vec![256, 256],
            epochs: 500,
            batch_size: 256,
            learning_rate: 1e-3,
            beta_kl: 1e-3,
            seed: 0,
        }
    }
}

/// Encoder/decoder pair with whitening stats and a training snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VaeModel<T: Scalar> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub d_latent: usize,
    pub whitening: Whitening<T>,
    pub config: VaeConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
}

pub enum EncodeMode {
    /// Posterior means; deterministic.
    Mean,
    /// Reparameterized draws, seeded.
    Sample(u64),
}

/// Loss and gradients for one batch with the reparameterization noise fixed,
/// so the same function serves training and finite-difference checks.
pub struct VaeBatchGrads<T: Scalar> {
    pub loss: T,
    pub recon_loss: T,
    pub kl: T,
    pub encoder: MlpGrads<T>,
    pub decoder: MlpGrads<T>,
}

pub fn vae_loss_and_grads<T: Scalar>(
    encoder: &Mlp<T>,
    decoder: &Mlp<T>,
    codec: &ColumnCodec,
    batch: &Array2<T>,
    noise: &Array2<T>,
    beta_kl: T,
) -> VaeBatchGrads<T> {
    let batch_rows = T::of(batch.nrows() as f64);
    let d_latent = noise.ncols();

    let (enc_out, enc_cache) = encoder.forward_cached(batch);
    let mu = enc_out.slice(s![.., ..d_latent]).to_owned();
    let logvar = enc_out.slice(s![.., d_latent..]).to_owned();
    let sigma = logvar.mapv(|v| (v * T::of(0.5)).exp());
    let z = &mu + &(&sigma * noise);

    let (dec_out, dec_cache) = decoder.forward_cached(&z);

    // reconstruction loss and its gradient on decoder outputs
    let mut recon = T::zero();
    let mut grad_dec_out = Array2::<T>::zeros(dec_out.dim());
    let offsets = codec.offsets();
    for (col_idx, codec_col) in codec.columns.iter().enumerate() {
        let offset = offsets[col_idx];
        match codec_col {
            CodecColumn::Numeric { .. } => {
                for row in 0..batch.nrows() {
                    let diff = dec_out[(row, offset)] - batch[(row, offset)];
                    recon += diff * diff;
                    grad_dec_out[(row, offset)] = T::of(2.0) * diff / batch_rows;
                }
            }
            CodecColumn::Categorical { vocab } => {
                let width = vocab.len();
                let logits = dec_out.slice(s![.., offset..offset + width]).to_owned();
                let probs = softmax_rows(&logits);
                for row in 0..batch.nrows() {
                    for k in 0..width {
                        let target = batch[(row, offset + k)];
                        if target > T::of(0.5) {
                            recon -= probs[(row, k)].max(T::of(1e-12)).ln();
                        }
                        grad_dec_out[(row, offset + k)] = (probs[(row, k)] - target) / batch_rows;
                    }
                }
            }
        }
    }
    recon = recon / batch_rows;

    // KL(q || N(0, I)) averaged over rows
    let mut kl = T::zero();
    for row in 0..batch.nrows() {
        for d in 0..d_latent {
            let m = mu[(row, d)];
            let lv = logvar[(row, d)];
            kl += T::of(-0.5) * (T::one() + lv - m * m - lv.exp());
        }
    }
    kl = kl / batch_rows;

    let (decoder_grads, grad_z) = decoder.backward(&dec_cache, &grad_dec_out);

    // d loss / d mu and d loss / d logvar
    let grad_mu = &grad_z + &(mu.mapv(|m| beta_kl * m / batch_rows));
    let grad_logvar = &(&grad_z * noise * &sigma * T::of(0.5))
        + &logvar.mapv(|lv| beta_kl * T::of(-0.5) * (T::one() - lv.exp()) / batch_rows);

    let mut grad_enc_out = Array2::<T>::zeros(enc_out.dim());
    grad_enc_out.slice_mut(s![.., ..d_latent]).assign(&grad_mu);
    grad_enc_out
        .slice_mut(s![.., d_latent..])
        .assign(&grad_logvar);
    let (encoder_grads, _) = encoder.backward(&enc_cache, &grad_enc_out);

    VaeBatchGrads {
        loss: recon + beta_kl * kl,
        recon_loss: recon,
        kl,
        encoder: encoder_grads,
        decoder: decoder_grads,
    }
}

/// Trains the VAE; deterministic for a fixed config and seed.
pub fn train_vae<T: Scalar>(
    table: &CompressedTable,
    codec: &ColumnCodec,
    config: &VaeConfig,
) -> Result<VaeModel<T>> {
    if table.n_rows() < 2 {
        return Err(CoreError::InvalidArgument(
            "variational training needs at least 2 rows".into(),
        ));
    }
    let data: Array2<T> = codec.encode_table(table)?;
    let width = codec.dense_width();
    let d_latent = config
        .d_latent
        .unwrap_or_else(|| (4 * table.n_columns()).min(64))
        .max(1);

    let mut rng = seeded(config.seed);
    let mut encoder_dims = vec![width];
    encoder_dims.extend(&config.hidden);
    encoder_dims.push(2 * d_latent);
    let mut decoder_dims = vec![d_latent];
    decoder_dims.extend(config.hidden.iter().rev());
    decoder_dims.push(width);
    let mut encoder: Mlp<T> = Mlp::new(&encoder_dims, &mut rng);
    let mut decoder: Mlp<T> = Mlp::new(&decoder_dims, &mut rng);

    let mut adam_enc = Adam::new(&encoder, T::of(config.learning_rate));
    let mut adam_dec = Adam::new(&decoder, T::of(config.learning_rate));
    let beta = T::of(config.beta_kl);

    let n = table.n_rows();
    let batch_size = config.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut initial_loss = None;
    let mut last_loss = 0.0;

    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        // linear decay to 5% of the base rate; kills the Adam noise floor
        let decay = 1.0 - 0.95 * epoch as f64 / config.epochs.max(1) as f64;
        adam_enc.learning_rate = T::of(config.learning_rate * decay);
        adam_dec.learning_rate = T::of(config.learning_rate * decay);
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch = take_rows(&data, chunk);
            let noise = normal_matrix::<T, SeededRng>(&mut rng, chunk.len(), d_latent);
            let grads = vae_loss_and_grads(&encoder, &decoder, codec, &batch, &noise, beta);
            let loss = grads.loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "non-finite loss at epoch {epoch} (recon {}, kl {})",
                    grads.recon_loss, grads.kl
                )));
            }
            initial_loss.get_or_insert(loss);
            last_loss = loss;
            adam_enc.apply(&mut encoder, &grads.encoder);
            adam_dec.apply(&mut decoder, &grads.decoder);
        }
    }

    // whitening from mean-mode training encodings
    let mu = encoder.forward(&data);
    let mu = mu.slice(s![.., ..d_latent]).to_owned();
    let whitening = Whitening::fit(&mu);

    Ok(VaeModel {
        encoder,
        decoder,
        d_latent,
        whitening,
        config: config.clone(),
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        final_loss: last_loss,
    })
}

pub fn take_rows<T: Scalar>(data: &Array2<T>, indices: &[usize]) -> Array2<T> {
    let mut out = Array2::<T>::zeros((indices.len(), data.ncols()));
    for (i, &idx) in indices.iter().enumerate() {
        out.row_mut(i).assign(&data.row(idx));
    }
    out
}

/// Encodes a table into whitened latents.
pub fn encode<T: Scalar>(
    model: &VaeModel<T>,
    codec: &ColumnCodec,
    table: &CompressedTable,
    mode: EncodeMode,
) -> Result<LatentMatrix<T>> {
    let data: Array2<T> = codec.encode_table(table)?;
    let enc_out = model.encoder.forward(&data);
    let mu = enc_out.slice(s![.., ..model.d_latent]).to_owned();
    let latents = match mode {
        EncodeMode::Mean => mu,
        EncodeMode::Sample(seed) => {
            let logvar = enc_out.slice(s![.., model.d_latent..]).to_owned();
            let sigma = logvar.mapv(|v| (v * T::of(0.5)).exp());
            let noise = normal_matrix::<T, _>(&mut seeded(seed), mu.nrows(), mu.ncols());
            &mu + &(&sigma * &noise)
        }
    };
    Ok(LatentMatrix {
        data: model.whitening.apply(&latents),
        whitening: model.whitening.clone(),
    })
}

/// Decodes whitened latents back to a compressed table.
pub fn decode<T: Scalar>(
    model: &VaeModel<T>,
    codec: &ColumnCodec,
    latents: &LatentMatrix<T>,
) -> Result<CompressedTable> {
    if latents.d_latent() != model.d_latent {
        return Err(CoreError::InvalidArgument(format!(
            "latent width {} does not match the model's {}",
            latents.d_latent(),
            model.d_latent
        )));
    }
    let raw = model.whitening.invert(&latents.data);
    let dense = model.decoder.forward(&raw);
    codec.decode_matrix(&dense)
}

/// Flat access over encoder then decoder parameters, for gradient checks.
impl<T: Scalar> ParamAccess<T> for VaeModel<T> {
    fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    fn param(&self, index: usize) -> T {
        let enc = self.encoder.param_count();
        if index < enc {
            self.encoder.param(index)
        } else {
            self.decoder.param(index - enc)
        }
    }

    fn set_param(&mut self, index: usize, value: T) {
        let enc = self.encoder.param_count();
        if index < enc {
            self.encoder.set_param(index, value);
        } else {
            self.decoder.set_param(index - enc, value);
        }
    }
}

/// Gradient lookup matching [`VaeModel`]'s flat parameter indexing.
pub fn vae_grad_at<T: Scalar>(grads: &VaeBatchGrads<T>, model: &VaeModel<T>, index: usize) -> T {
    let enc = model.encoder.param_count();
    if index < enc {
        grad_at(&grads.encoder, index)
    } else {
        grad_at(&grads.decoder, index - enc)
    }
}

/// Evenly spread parameter indices for finite-difference sampling.
pub fn spread_indices(param_count: usize, wanted: usize) -> Vec<usize> {
    if param_count <= wanted {
        return (0..param_count).collect();
    }
    (0..wanted)
        .map(|i| i * param_count / wanted)
        .collect()
}
