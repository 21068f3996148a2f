//! Minimal dense-network kernel shared by the variational codec and the
//! score network: linear layers with SiLU activations, exact backprop,
//! Adam updates, and a finite-difference gradient checker.

use crate::rng::{normal_matrix, SeededRng};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

/// Fully connected layer, `y = x @ w + b`, weights shaped (fan_in, fan_out).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Linear<T: Scalar> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    fn new(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        // He-style scaling keeps SiLU preactivations well ranged
        let scale = T::of((2.0 / fan_in as f64).sqrt());
        Linear {
            w: normal_matrix::<T, _>(rng, fan_in, fan_out) * scale,
            b: Array1::zeros(fan_out),
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn silu<T: Scalar>(x: T) -> T {
    x * sigmoid(x)
}

fn silu_derivative<T: Scalar>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() + x * (T::one() - s))
}

/// MLP with SiLU on every hidden layer and a linear output layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T: Scalar> {
    pub layers: Vec<Linear<T>>,
}

/// Per-layer gradients, same shapes as the model.
#[derive(Debug, Clone)]
pub struct MlpGrads<T: Scalar> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        MlpGrads {
            layers: model
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.dim())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.0 += &b.0;
            a.1 += &b.1;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (w, b) in self.layers.iter_mut() {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }
}

/// Cached forward pass: layer inputs and hidden preactivations.
pub struct MlpCache<T: Scalar> {
    inputs: Vec<Array2<T>>,
    preactivations: Vec<Array2<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `dims = [input, hidden..., output]`.
    pub fn new(dims: &[usize], rng: &mut SeededRng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        let layers = dims
            .windows(2)
            .map(|pair| Linear::new(pair[0], pair[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").w.ncols()
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let (out, _) = self.forward_cached(x);
        out
    }

    pub fn forward_cached(&self, x: &Array2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preactivations = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut current = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(current.clone());
            let z = current.dot(&layer.w) + &layer.b;
            if i == last {
                current = z;
            } else {
                preactivations.push(z.clone());
                current = z.mapv(silu);
            }
        }
        (
            current,
            MlpCache {
                inputs,
                preactivations,
            },
        )
    }

    /// Backprop from d(loss)/d(output); returns parameter grads and
    /// d(loss)/d(input).
    pub fn backward(&self, cache: &MlpCache<T>, grad_output: &Array2<T>) -> (MlpGrads<T>, Array2<T>) {
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = grad_output.clone();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            grads.layers[i].0 = input.t().dot(&delta);
            grads.layers[i].1 = delta.sum_axis(Axis(0));
            if i > 0 {
                let upstream = delta.dot(&self.layers[i].w.t());
                let z = &cache.preactivations[i - 1];
                delta = upstream * z.mapv(silu_derivative);
            } else {
                delta = delta.dot(&self.layers[i].w.t());
            }
        }
        (grads, delta)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

/// Flat parameter access, used by the optimizer-independent gradient checker.
pub trait ParamAccess<T: Scalar> {
    fn param_count(&self) -> usize;
    fn param(&self, index: usize) -> T;
    fn set_param(&mut self, index: usize, value: T);
}

impl<T: Scalar> ParamAccess<T> for Mlp<T> {
    fn param_count(&self) -> usize {
        Mlp::param_count(self)
    }

    fn param(&self, index: usize) -> T {
        let mut offset = index;
        for layer in &self.layers {
            if offset < layer.w.len() {
                return *layer.w.as_slice().expect("standard layout").get(offset).unwrap();
            }
            offset -= layer.w.len();
            if offset < layer.b.len() {
                return layer.b[offset];
            }
            offset -= layer.b.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn set_param(&mut self, index: usize, value: T) {
        let mut offset = index;
        for layer in &mut self.layers {
            if offset < layer.w.len() {
                layer.w.as_slice_mut().expect("standard layout")[offset] = value;
                return;
            }
            offset -= layer.w.len();
            if offset < layer.b.len() {
                layer.b[offset] = value;
                return;
            }
            offset -= layer.b.len();
        }
        panic!("parameter index {index} out of range");
    }
}

/// Gradient of an [`MlpGrads`] at the same flat index scheme as [`ParamAccess`].
pub fn grad_at<T: Scalar>(grads: &MlpGrads<T>, index: usize) -> T {
    let mut offset = index;
    for (w, b) in &grads.layers {
        if offset < w.len() {
            return w.as_slice().expect("standard layout")[offset];
        }
        offset -= w.len();
        if offset < b.len() {
            return b[offset];
        }
        offset -= b.len();
    }
    panic!("gradient index {index} out of range");
}

/// Adam over one MLP's parameters.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub learning_rate: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    step: i32,
    m: Vec<(Array2<T>, Array1<T>)>,
    v: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Mlp<T>, learning_rate: T) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| {
                    (
                        Array2::<T>::zeros(l.w.dim()),
                        Array1::<T>::zeros(l.b.dim()),
                    )
                })
                .collect::<Vec<_>>()
        };
        Adam {
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn apply(&mut self, model: &mut Mlp<T>, grads: &MlpGrads<T>) {
        self.step += 1;
        let t = self.step;
        let correction1 = T::one() - self.beta1.powi(t);
        let correction2 = T::one() - self.beta2.powi(t);
        for (layer_idx, layer) in model.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[layer_idx];
            let (mw, mb) = &mut self.m[layer_idx];
            let (vw, vb) = &mut self.v[layer_idx];
            Self::update_array2(
                &mut layer.w, gw, mw, vw, self.beta1, self.beta2, self.epsilon,
                self.learning_rate, correction1, correction2,
            );
            Self::update_array1(
                &mut layer.b, gb, mb, vb, self.beta1, self.beta2, self.epsilon,
                self.learning_rate, correction1, correction2,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn update_array2(
        p: &mut Array2<T>,
        g: &Array2<T>,
        m: &mut Array2<T>,
        v: &mut Array2<T>,
        beta1: T,
        beta2: T,
        epsilon: T,
        lr: T,
        correction1: T,
        correction2: T,
    ) {
        ndarray::Zip::from(p)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = beta1 * *m + (T::one() - beta1) * g;
                *v = beta2 * *v + (T::one() - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + epsilon);
            });
    }

    #[allow(clippy::too_many_arguments)]
    fn update_array1(
        p: &mut Array1<T>,
        g: &Array1<T>,
        m: &mut Array1<T>,
        v: &mut Array1<T>,
        beta1: T,
        beta2: T,
        epsilon: T,
        lr: T,
        correction1: T,
        correction2: T,
    ) {
        ndarray::Zip::from(p)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = beta1 * *m + (T::one() - beta1) * g;
                *v = beta2 * *v + (T::one() - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + epsilon);
            });
    }
}

/// Row-wise softmax.
pub fn softmax_rows<T: Scalar>(logits: &Array2<T>) -> Array2<T> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Worst relative error between analytic gradients and central finite
/// differences over the given parameter indices.
pub fn finite_difference_check<T, M, L, G>(
    model: &mut M,
    indices: &[usize],
    epsilon: f64,
    mut loss: L,
    analytic: G,
) -> f64
where
    T: Scalar,
    M: ParamAccess<T>,
    L: FnMut(&M) -> T,
    G: Fn(usize) -> T,
{
    let eps = T::of(epsilon);
    let mut worst: f64 = 0.0;
    for &idx in indices {
        let original = model.param(idx);
        model.set_param(idx, original + eps);
        let plus = loss(model).to_f64_lossy();
        model.set_param(idx, original - eps);
        let minus = loss(model).to_f64_lossy();
        model.set_param(idx, original);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let exact = analytic(idx).to_f64_lossy();
        let denom = exact.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((numeric - exact).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn forward_shapes() {
        let mlp: Mlp<f64> = Mlp::new(&[3, 8, 2], &mut seeded(0));
        let x = normal_matrix::<f64, _>(&mut seeded(1), 5, 3);
        let y = mlp.forward(&x);
        assert_eq!(y.dim(), (5, 2));
    }

    #[test]
    fn backward_matches_finite_differences_on_quadratic_loss() {
        let mut mlp: Mlp<f64> = Mlp::new(&[4, 10, 3], &mut seeded(3));
        let x = normal_matrix::<f64, _>(&mut seeded(4), 6, 4);
        let target = normal_matrix::<f64, _>(&mut seeded(5), 6, 3);

        let loss_of = |m: &Mlp<f64>| -> f64 {
            let out = m.forward(&x);
            (&out - &target).mapv(|v| v * v).sum() / 6.0
        };
        let (out, cache) = mlp.forward_cached(&x);
        let grad_out = (&out - &target).mapv(|v| 2.0 * v / 6.0);
        let (grads, _) = mlp.backward(&cache, &grad_out);

        let n = mlp.param_count();
        let indices: Vec<usize> = (0..n).step_by((n / 40).max(1)).collect();
        let worst = finite_difference_check(
            &mut mlp,
            &indices,
            1e-5,
            |m| loss_of(m),
            |idx| grad_at(&grads, idx),
        );
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn gradient_of_input_is_exact_for_linear_network() {
        // single linear layer: d(sum(y))/dx = w summed over outputs
        let mut mlp: Mlp<f64> = Mlp::new(&[2, 2], &mut seeded(9));
        mlp.layers[0].w = array![[1.0, 2.0], [3.0, 4.0]];
        mlp.layers[0].b = array![0.5, -0.5];
        let x = array![[1.0, 1.0]];
        let (out, cache) = mlp.forward_cached(&x);
        assert_eq!(out, array![[4.5, 5.5]]);
        let (_, grad_in) = mlp.backward(&cache, &array![[1.0, 1.0]]);
        assert_eq!(grad_in, array![[3.0, 7.0]]);
    }

    #[test]
    fn adam_with_zero_learning_rate_is_a_no_op() {
        let mut mlp: Mlp<f64> = Mlp::new(&[3, 4, 1], &mut seeded(11));
        let before = mlp.clone();
        let mut adam = Adam::new(&mlp, 0.0);
        let mut grads = MlpGrads::zeros_like(&mlp);
        for (w, b) in grads.layers.iter_mut() {
            w.fill(1.0);
            b.fill(-1.0);
        }
        adam.apply(&mut mlp, &grads);
        for (after, orig) in mlp.layers.iter().zip(&before.layers) {
            assert_eq!(after.w, orig.w);
            assert_eq!(after.b, orig.b);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = array![[1.0, 2.0, 3.0], [-5.0, 0.0, 5.0]];
        let probs = softmax_rows(&logits);
        for row in probs.rows() {
            assert!((row.sum() - 1.0f64).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_over_f32_too() {
        let mlp: Mlp<f32> = Mlp::new(&[3, 5, 2], &mut seeded(2));
        let x = normal_matrix::<f32, _>(&mut seeded(3), 4, 3);
        assert_eq!(mlp.forward(&x).dim(), (4, 2));
    }
}
