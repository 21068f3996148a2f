use ndarray::Array1;
use tabflow_core::diffusion::*;
use tabflow_core::rng::{normal_matrix, seeded};
use tabflow_core::vae::{LatentMatrix, Whitening};
use ndarray::Array2;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let rows: usize = args[1].parse().unwrap();
    let epochs: usize = args[2].parse().unwrap();
    let width: usize = args[3].parse().unwrap();
    let smax: f64 = args[4].parse().unwrap();
    let steps: usize = args[5].parse().unwrap();
    let data = normal_matrix::<f64, _>(&mut seeded(8), rows, 1);
    let dmean = data.sum() / rows as f64;
    let latents = LatentMatrix { data, whitening: Whitening { mean: Array1::zeros(1), std: Array1::ones(1) } };
    let schedule = NoiseSchedule::new(0.002, smax, 7.0).unwrap();
    let config = ScoreTrainConfig { hidden: vec![width, width], epochs, batch_size: 256, learning_rate: 1e-3, seed: 12 };
    let t0 = std::time::Instant::now();
    let model = train_score(&latents, &schedule, &config).unwrap();
    let train_time = t0.elapsed().as_secs_f64();
    for mode in [SamplerMode::Sde, SamplerMode::Ode] {
        let sampler = SamplerConfig { steps, mode, seed: 77 };
        let out: Array2<f64> = sample(&model, &schedule, 100_000, &sampler).unwrap();
        let n = out.len() as f64;
        let mean = out.sum() / n;
        let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        println!("rows={rows} epochs={epochs} width={width} smax={smax} steps={steps} mode={mode:?} data_mean={dmean:.4} mean={mean:.4} std={std:.4} train_s={train_time:.1}");
    }
}
