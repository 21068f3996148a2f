//! Score-based diffusion over whitened latents: forward Gaussian
//! perturbation, denoising-score-matching training, and reverse-SDE/ODE
//! sampling with an Euler-Maruyama integrator.
//!
//! The noise scaling is `alpha(t) = t` on a rho-warped grid between
//! `sigma_max` and `sigma_min`; the network predicts the injected noise and
//! the score estimate is `-eta_phi(H_t, t) / alpha(t)`.

use crate::error::{CoreError, Result};
use crate::nn::{Adam, Mlp, MlpGrads, ParamAccess};
use crate::rng::{normal_matrix, seeded, SeededRng};
use crate::scalar::Scalar;
use crate::vae::{take_rows, LatentMatrix};
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

/// Sinusoidal time-embedding width: ln(sigma)/4 plus sin/cos at 4 octaves.
const TIME_FEATURES: usize = 9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseSchedule<T: Scalar> {
    pub sigma_min: T,
    pub sigma_max: T,
    pub rho: T,
}

impl<T: Scalar> NoiseSchedule<T> {
    pub fn new(sigma_min: f64, sigma_max: f64, rho: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min < sigma_max) {
            return Err(CoreError::InvalidArgument(format!(
                "need 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}"
            )));
        }
        Ok(NoiseSchedule {
            sigma_min: T::of(sigma_min),
            sigma_max: T::of(sigma_max),
            rho: T::of(rho),
        })
    }

    /// Default constants: sigma_min 0.002, sigma_max three times the largest
    /// per-dimension std of the (whitened) latents, rho 7.
    pub fn for_latents(latents: &LatentMatrix<T>) -> Self {
        let mut max_std = 0.0f64;
        for dim in 0..latents.d_latent() {
            let col = latents.data.column(dim);
            let n = col.len() as f64;
            let mean = col.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
            let var = col
                .iter()
                .map(|v| (v.to_f64_lossy() - mean).powi(2))
                .sum::<f64>()
                / n;
            max_std = max_std.max(var.sqrt());
        }
        NoiseSchedule {
            sigma_min: T::of(0.002),
            sigma_max: T::of(3.0 * max_std.max(1e-3)),
            rho: T::of(7.0),
        }
    }

    /// Strictly decreasing discretization `t_0 = sigma_max .. t_{S-1} = sigma_min`.
    pub fn times(&self, steps: usize) -> Vec<T> {
        assert!(steps >= 2, "schedule needs at least 2 steps");
        let inv_rho = T::one() / self.rho;
        let hi = self.sigma_max.powf(inv_rho);
        let lo = self.sigma_min.powf(inv_rho);
        (0..steps)
            .map(|i| {
                let frac = T::of(i as f64 / (steps - 1) as f64);
                (hi + frac * (lo - hi)).powf(self.rho)
            })
            .collect()
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.sigma_min && t <= self.sigma_max
    }
}

/// Noise-prediction network over `[latent, time features]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoreModel<T: Scalar> {
    pub mlp: Mlp<T>,
    pub d_latent: usize,
    pub schedule: NoiseSchedule<T>,
    pub loss_trace: Vec<f64>,
}

fn time_features<T: Scalar>(t: T) -> [T; TIME_FEATURES] {
    let s = t.ln() / T::of(4.0);
    let mut out = [T::zero(); TIME_FEATURES];
    out[0] = s;
    for k in 0..4 {
        let w = T::of(2f64.powi(k as i32));
        out[1 + 2 * k] = (w * s).sin();
        out[2 + 2 * k] = (w * s).cos();
    }
    out
}

fn stack_inputs<T: Scalar>(h: &Array2<T>, times: &Array1<T>) -> Array2<T> {
    let d = h.ncols();
    let mut x = Array2::<T>::zeros((h.nrows(), d + TIME_FEATURES));
    x.slice_mut(s![.., ..d]).assign(h);
    for (row, &t) in times.iter().enumerate() {
        let features = time_features(t);
        for (j, &f) in features.iter().enumerate() {
            x[(row, d + j)] = f;
        }
    }
    x
}

impl<T: Scalar> ScoreModel<T> {
    pub fn new(d_latent: usize, hidden: &[usize], schedule: NoiseSchedule<T>, rng: &mut SeededRng) -> Self {
        let mut dims = vec![d_latent + TIME_FEATURES];
        dims.extend(hidden);
        dims.push(d_latent);
        ScoreModel {
            mlp: Mlp::new(&dims, rng),
            d_latent,
            schedule,
            loss_trace: Vec::new(),
        }
    }

    /// Predicted noise for each row at its own level.
    pub fn predict(&self, h: &Array2<T>, times: &Array1<T>) -> Array2<T> {
        self.mlp.forward(&stack_inputs(h, times))
    }
}

/// Forward perturbation `H_t = H_0 + alpha(t) * eta`, `eta ~ N(0, I)` seeded.
pub fn perturb<T: Scalar>(
    h0: &Array2<T>,
    t: T,
    schedule: &NoiseSchedule<T>,
    seed: u64,
) -> Result<(Array2<T>, Array2<T>)> {
    if !schedule.contains(t) {
        return Err(CoreError::InvalidArgument(format!(
            "noise level {t} outside schedule [{}, {}]",
            schedule.sigma_min, schedule.sigma_max
        )));
    }
    let eta = normal_matrix::<T, _>(&mut seeded(seed), h0.nrows(), h0.ncols());
    let ht = h0 + &(&eta * t);
    Ok((ht, eta))
}

/// Denoising-score-matching loss and gradients for fixed draws, shared
/// between training steps and finite-difference checks. The loss is the mean
/// over rows of the squared noise-prediction error summed over dimensions,
/// so a constant zero predictor scores `E||eta||^2 = d_latent`.
pub fn score_loss_and_grads<T: Scalar>(
    model: &ScoreModel<T>,
    h0: &Array2<T>,
    times: &Array1<T>,
    eta: &Array2<T>,
) -> (T, MlpGrads<T>) {
    let rows = T::of(h0.nrows() as f64);
    // ht = h0 + t*eta, row-wise level
    let mut ht = h0.clone();
    for ((mut row, &t), eta_row) in ht
        .rows_mut()
        .into_iter()
        .zip(times.iter())
        .zip(eta.rows())
    {
        row.zip_mut_with(&eta_row, |h, &e| *h += t * e);
    }

    let x = stack_inputs(&ht, times);
    let (pred, cache) = model.mlp.forward_cached(&x);
    let diff = &pred - eta;
    let loss = diff.mapv(|v| v * v).sum() / rows;
    let grad_out = diff.mapv(|v| T::of(2.0) * v / rows);
    let (grads, _) = model.mlp.backward(&cache, &grad_out);
    (loss, grads)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ScoreTrainConfig {
    fn default() -> Self {
        ScoreTrainConfig {
            hidden: vec![256, 256],
            epochs: 500,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Trains the noise predictor with levels sampled log-uniformly over the
/// schedule range. Deterministic for a fixed config and seed.
pub fn train_score<T: Scalar>(
    latents: &LatentMatrix<T>,
    schedule: &NoiseSchedule<T>,
    config: &ScoreTrainConfig,
) -> Result<ScoreModel<T>> {
    if latents.n_rows() == 0 {
        return Err(CoreError::InvalidArgument(
            "score training needs at least 1 row".into(),
        ));
    }
    let data = &latents.data;
    let mut rng = seeded(config.seed);
    let mut model = ScoreModel::new(latents.d_latent(), &config.hidden, schedule.clone(), &mut rng);
    let mut adam = Adam::new(&model.mlp, T::of(config.learning_rate));

    let ln_min = schedule.sigma_min.to_f64_lossy().ln();
    let ln_max = schedule.sigma_max.to_f64_lossy().ln();
    let n = data.nrows();
    let batch_size = config.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        // linear decay to 5% of the base rate; kills the Adam noise floor
        let decay = 1.0 - 0.95 * epoch as f64 / config.epochs.max(1) as f64;
        adam.learning_rate = T::of(config.learning_rate * decay);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let h0 = take_rows(data, chunk);
            let times = Array1::from_iter((0..chunk.len()).map(|_| {
                let u: f64 = rand::Rng::random(&mut rng);
                T::of((ln_min + u * (ln_max - ln_min)).exp())
            }));
            let eta = normal_matrix::<T, SeededRng>(&mut rng, chunk.len(), data.ncols());
            let (loss, grads) = score_loss_and_grads(&model, &h0, &times, &eta);
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "non-finite score-matching loss at epoch {epoch}"
                )));
            }
            adam.apply(&mut model.mlp, &grads);
            epoch_loss += loss;
            batches += 1;
        }
        model.loss_trace.push(epoch_loss / batches as f64);
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    /// Reverse SDE with Wiener increments.
    Sde,
    /// Probability-flow ODE: no stochastic term, half the drift.
    Ode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub steps: usize,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 50,
            mode: SamplerMode::Sde,
            seed: 0,
        }
    }
}

/// Integrates the reverse dynamics from `H ~ N(0, sigma_max^2 I)` down the
/// discretized schedule with Euler-Maruyama. Deterministic per seed.
pub fn sample<T: Scalar>(
    model: &ScoreModel<T>,
    schedule: &NoiseSchedule<T>,
    n_rows: usize,
    config: &SamplerConfig,
) -> Result<Array2<T>> {
    if n_rows == 0 {
        return Err(CoreError::InvalidArgument("need at least 1 sample".into()));
    }
    if config.steps < 2 {
        return Err(CoreError::InvalidArgument(
            "sampler needs at least 2 steps".into(),
        ));
    }
    let d = model.d_latent;
    let mut rng = seeded(config.seed);
    let times = schedule.times(config.steps);
    let mut h = normal_matrix::<T, SeededRng>(&mut rng, n_rows, d) * schedule.sigma_max;

    for i in 0..times.len() - 1 {
        let t = times[i];
        let dt = times[i + 1] - t; // negative
        let t_column = Array1::from_elem(n_rows, t);
        let eta_pred = model.predict(&h, &t_column);
        // score(H, t) = -eta_phi(H, t) / alpha(t), alpha(t) = t, alpha'(t) = 1
        match config.mode {
            SamplerMode::Sde => {
                // drift -2 a'(t) a(t) score dt = 2 eta_pred dt
                h.zip_mut_with(&eta_pred, |hv, &e| *hv += T::of(2.0) * e * dt);
                let noise = normal_matrix::<T, SeededRng>(&mut rng, n_rows, d);
                let diffusion = (T::of(2.0) * t * dt.abs()).sqrt();
                h.zip_mut_with(&noise, |hv, &z| *hv += diffusion * z);
            }
            SamplerMode::Ode => {
                h.zip_mut_with(&eta_pred, |hv, &e| *hv += e * dt);
            }
        }
        if h.iter().any(|v| !v.to_f64_lossy().is_finite()) {
            return Err(CoreError::Numeric(format!(
                "non-finite sampler state at step {i} (t = {t})"
            )));
        }
    }
    Ok(h)
}

impl<T: Scalar> ParamAccess<T> for ScoreModel<T> {
    fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    fn param(&self, index: usize) -> T {
        self.mlp.param(index)
    }

    fn set_param(&mut self, index: usize, value: T) {
        self.mlp.set_param(index, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference_check, grad_at};
    use crate::vae::{spread_indices, Whitening};

    fn unit_whitening(d: usize) -> Whitening<f64> {
        Whitening {
            mean: Array1::zeros(d),
            std: Array1::ones(d),
        }
    }

    fn gaussian_latents(n: usize, d: usize, seed: u64) -> LatentMatrix<f64> {
        LatentMatrix {
            data: normal_matrix::<f64, _>(&mut seeded(seed), n, d),
            whitening: unit_whitening(d),
        }
    }

    #[test]
    fn schedule_is_strictly_decreasing_with_exact_endpoints() {
        let schedule: NoiseSchedule<f64> = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let times = schedule.times(50);
        assert!((times[0] - 3.0).abs() < 1e-12);
        assert!((times[49] - 0.002).abs() < 1e-12);
        for pair in times.windows(2) {
            assert!(pair[0] > pair[1]);
        }
    }

    #[test]
    fn perturb_is_seeded_and_scales_with_t() {
        let schedule: NoiseSchedule<f64> = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let h0 = normal_matrix::<f64, _>(&mut seeded(1), 100, 3);
        let (ht_a, eta_a) = perturb(&h0, 1.0, &schedule, 42).unwrap();
        let (_, eta_b) = perturb(&h0, 1.0, &schedule, 42).unwrap();
        assert_eq!(eta_a, eta_b);
        assert_eq!(ht_a, &h0 + &eta_a);

        // vanishing noise at sigma_min
        let (ht_min, _) = perturb(&h0, 0.002, &schedule, 7).unwrap();
        let max_dev = (&ht_min - &h0)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max_dev < 0.002 * 6.0, "max deviation {max_dev}");

        assert!(perturb(&h0, 10.0, &schedule, 0).is_err());
    }

    #[test]
    fn perturbation_noise_has_unit_std_at_t_one() {
        let schedule: NoiseSchedule<f64> = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let h0 = Array2::<f64>::zeros((100_000, 1));
        let (ht, _) = perturb(&h0, 1.0, &schedule, 3).unwrap();
        let n = ht.len() as f64;
        let mean = ht.sum() / n;
        let std = (ht.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 1.0).abs() < 0.01, "std {std}");
    }

    #[test]
    fn forward_marginal_variance_adds_in_quadrature() {
        // Var(Ht) = Var(H0) + t^2 within 2%
        let schedule: NoiseSchedule<f64> = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let h0 = normal_matrix::<f64, _>(&mut seeded(5), 100_000, 1);
        let t = 1.5;
        let (ht, _) = perturb(&h0, t, &schedule, 11).unwrap();
        let n = ht.len() as f64;
        let mean = ht.sum() / n;
        let var = ht.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = 1.0 + t * t;
        assert!((var / expected - 1.0).abs() < 0.02, "var {var} vs {expected}");
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let latents = gaussian_latents(32, 2, 9);
        let schedule = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let config = ScoreTrainConfig {
            hidden: vec![16],
            epochs: 3,
            batch_size: 16,
            learning_rate: 0.0,
            seed: 4,
        };
        let trained = train_score(&latents, &schedule, &config).unwrap();
        let mut rng = seeded(config.seed);
        let fresh: ScoreModel<f64> =
            ScoreModel::new(2, &config.hidden, schedule.clone(), &mut rng);
        for i in 0..fresh.param_count() {
            assert_eq!(trained.param(i), fresh.param(i));
        }
    }

    #[test]
    fn training_beats_the_zero_predictor_baseline() {
        // 2-component 2-D mixture; zero predictor scores E||eta||^2 = d = 2
        let mut data = normal_matrix::<f64, _>(&mut seeded(21), 512, 2) * 0.3;
        for (i, mut row) in data.rows_mut().into_iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            row[0] += 2.0 * sign;
            row[1] += 2.0 * sign;
        }
        let latents = LatentMatrix {
            data,
            whitening: unit_whitening(2),
        };
        let schedule = NoiseSchedule::new(0.002, 6.0, 7.0).unwrap();
        let config = ScoreTrainConfig {
            hidden: vec![64, 64],
            epochs: 300,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 17,
        };
        let model = train_score(&latents, &schedule, &config).unwrap();
        let tail: f64 = model.loss_trace.iter().rev().take(20).sum::<f64>() / 20.0;
        assert!(tail < 2.0, "tail loss {tail} not below baseline d=2");
    }

    #[test]
    fn score_gradients_match_finite_differences() {
        let latents = gaussian_latents(16, 3, 33);
        let schedule = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let mut model: ScoreModel<f64> =
            ScoreModel::new(3, &[12], schedule, &mut seeded(2));
        let times = Array1::from_iter((0..16).map(|i| 0.01 + 0.15 * i as f64));
        let eta = normal_matrix::<f64, _>(&mut seeded(3), 16, 3);
        let (_, grads) = score_loss_and_grads(&model, &latents.data, &times, &eta);
        let indices = spread_indices(model.param_count(), 120);
        let worst = finite_difference_check(
            &mut model,
            &indices,
            1e-5,
            |m: &ScoreModel<f64>| score_loss_and_grads(m, &latents.data, &times, &eta).0,
            |idx| grad_at(&grads, idx),
        );
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn sampler_is_deterministic_and_handles_minimal_schedules() {
        let latents = gaussian_latents(64, 2, 1);
        let schedule = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let config = ScoreTrainConfig {
            hidden: vec![16],
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        };
        let model = train_score(&latents, &schedule, &config).unwrap();
        let sampler = SamplerConfig {
            steps: 8,
            mode: SamplerMode::Sde,
            seed: 5,
        };
        let a = sample(&model, &schedule, 10, &sampler).unwrap();
        let b = sample(&model, &schedule, 10, &sampler).unwrap();
        assert_eq!(a, b);

        let minimal = SamplerConfig {
            steps: 2,
            mode: SamplerMode::Sde,
            seed: 5,
        };
        let out = sample(&model, &schedule, 4, &minimal).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn samples_from_standard_normal_target_have_correct_moments() {
        let latents = gaussian_latents(8192, 1, 8);
        let schedule = NoiseSchedule::new(0.002, 5.0, 7.0).unwrap();
        let config = ScoreTrainConfig {
            hidden: vec![64, 64],
            epochs: 300,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 12,
        };
        let model = train_score(&latents, &schedule, &config).unwrap();
        let sampler = SamplerConfig {
            steps: 100,
            mode: SamplerMode::Sde,
            seed: 77,
        };
        let out = sample(&model, &schedule, 100_000, &sampler).unwrap();
        let n = out.len() as f64;
        let mean = out.sum() / n;
        let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.02, "sample mean {mean}");
        assert!((std - 1.0).abs() < 0.05, "sample std {std}");
    }

    #[test]
    fn learned_score_approaches_the_closed_form() {
        // for N(0,1) data the optimal prediction is t*H/(1+t^2); the error
        // must shrink as training proceeds (same seed = same trajectory)
        let latents = gaussian_latents(1024, 1, 3);
        let schedule = NoiseSchedule::new(0.002, 3.0, 7.0).unwrap();
        let short = ScoreTrainConfig {
            hidden: vec![32, 32],
            epochs: 5,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 6,
        };
        let long = ScoreTrainConfig {
            epochs: 400,
            ..short.clone()
        };
        let score_mse = |model: &ScoreModel<f64>| -> f64 {
            let mut mse = 0.0;
            let mut count = 0usize;
            let h = normal_matrix::<f64, _>(&mut seeded(50), 256, 1) * 1.5;
            for &t in &[0.1, 0.5, 1.0, 2.0] {
                let times = Array1::from_elem(256, t);
                let pred = model.predict(&h, &times);
                for (row, p) in pred.rows().into_iter().enumerate() {
                    let optimal = t * h[(row, 0)] / (1.0 + t * t);
                    mse += (p[0] - optimal).powi(2);
                    count += 1;
                }
            }
            mse / count as f64
        };
        let early = score_mse(&train_score(&latents, &schedule, &short).unwrap());
        let late = score_mse(&train_score(&latents, &schedule, &long).unwrap());
        assert!(late < early, "score error did not shrink: {early} -> {late}");
    }
}
