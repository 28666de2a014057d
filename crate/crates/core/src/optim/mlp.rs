//! Small fully-connected networks trained by full-batch SGD.
//!
//! Hidden layers use the rectifier; the output is either identity
//! (regression, mean-squared-error loss) or softmax (classification,
//! cross-entropy loss). Training runs a fixed two-stage schedule with the
//! learning rate reduced between stages, restarted from several seeded
//! initializations; the restart with the lowest final training loss wins.

use ndarray::{Array1, Array2, Axis};
use rand::{rngs::StdRng, Rng, SeedableRng};

use super::OptimError;

/// Output-layer behavior of an [`MlpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    /// Linear outputs, trained with mean squared error.
    Identity,
    /// Softmax probabilities, trained with cross-entropy.
    Softmax,
}

/// A dense feed-forward network.
///
/// `weights[l]` has shape `(layer_sizes[l+1], layer_sizes[l])`; biases match
/// the output side of each layer.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub output: OutputActivation,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Training hyperparameters for [`mlp_train`].
#[derive(Debug, Clone)]
pub struct MlpTrainSettings {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs per stage; training always runs two stages with the learning
    /// rate multiplied by `lr_decay` between them.
    pub epochs_per_stage: usize,
    pub lr_decay: f64,
    /// Independent seeded initializations; the lowest final loss wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MlpTrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0005,
            epochs_per_stage: 2000,
            lr_decay: 0.1,
            restarts: 4,
            seed: 0,
        }
    }
}

/// Full-batch training data. For softmax models the targets are one-hot rows.
#[derive(Debug, Clone)]
pub struct MlpDataset {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

/// Result of [`mlp_train`].
#[derive(Debug, Clone)]
pub struct MlpTrained {
    pub model: MlpModel,
    /// Training loss of the winning restart.
    pub final_loss: f64,
    /// Final loss of every restart (infinite where a restart diverged).
    pub restart_losses: Vec<f64>,
}

const STAGES: usize = 2;

impl MlpModel {
    /// Glorot-uniform initialized model (biases zero).
    pub fn init(layer_sizes: &[usize], output: OutputActivation, seed: u64) -> Self {
        assert!(layer_sizes.len() >= 2, "need input and output layers");
        assert!(layer_sizes.iter().all(|&s| s > 0), "zero-width layer");
        let mut rng = StdRng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.gen::<f64>() * 2.0 * bound - bound
            });
            weights.push(weight);
            biases.push(Array1::zeros(fan_out));
        }
        Self {
            layer_sizes: layer_sizes.to_vec(),
            output,
            weights,
            biases,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Evaluate a single input. Softmax models return class probabilities.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, OptimError> {
        if x.len() != self.input_dim() {
            return Err(OptimError::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        let out = self.forward_batch(&input);
        Ok(out.row(0).to_vec())
    }

    /// Evaluate a batch of inputs (rows). Softmax models return probability
    /// rows.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Array2<f64> {
        let acts = self.forward_activations(inputs);
        let mut out = acts.into_iter().last().unwrap();
        if self.output == OutputActivation::Softmax {
            softmax_rows(&mut out);
        }
        out
    }

    /// Per-layer post-activation values; the last entry is the raw output
    /// layer (pre-softmax).
    fn forward_activations(&self, inputs: &Array2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let prev = if l == 0 { inputs } else { &acts[l - 1] };
            let mut z = prev.dot(&w.t()) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Training loss of `model` on `data` (MSE summed over outputs and averaged
/// over samples, or mean cross-entropy for softmax models).
pub fn mlp_loss(model: &MlpModel, data: &MlpDataset) -> f64 {
    let n = data.inputs.nrows() as f64;
    let acts = model.forward_activations(&data.inputs);
    let raw = acts.last().unwrap();
    match model.output {
        OutputActivation::Identity => {
            let diff = raw - &data.targets;
            diff.iter().map(|v| v * v).sum::<f64>() / n
        }
        OutputActivation::Softmax => {
            let mut probs = raw.clone();
            softmax_rows(&mut probs);
            let mut loss = 0.0;
            for (p_row, t_row) in probs.rows().into_iter().zip(data.targets.rows()) {
                for (p, t) in p_row.iter().zip(t_row) {
                    if *t > 0.0 {
                        loss -= t * p.max(1e-300).ln();
                    }
                }
            }
            loss / n
        }
    }
}

/// Loss and analytic parameter gradients of `model` on `data`.
///
/// Exposed so the gradients can be verified against finite differences.
pub fn loss_gradients(
    model: &MlpModel,
    data: &MlpDataset,
) -> (f64, Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let n = data.inputs.nrows() as f64;
    let layers = model.weights.len();
    let acts = model.forward_activations(&data.inputs);
    let raw = acts.last().unwrap();

    // Loss and gradient through the output layer.
    let (loss, mut delta) = match model.output {
        OutputActivation::Identity => {
            let diff = raw - &data.targets;
            let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
            (loss, diff * (2.0 / n))
        }
        OutputActivation::Softmax => {
            let mut probs = raw.clone();
            softmax_rows(&mut probs);
            let mut loss = 0.0;
            for (p_row, t_row) in probs.rows().into_iter().zip(data.targets.rows()) {
                for (p, t) in p_row.iter().zip(t_row) {
                    if *t > 0.0 {
                        loss -= t * p.max(1e-300).ln();
                    }
                }
            }
            ((loss / n), (probs - &data.targets) / n)
        }
    };

    let mut grad_w = vec![Array2::zeros((0, 0)); layers];
    let mut grad_b = vec![Array1::zeros(0); layers];
    for l in (0..layers).rev() {
        let prev = if l == 0 { &data.inputs } else { &acts[l - 1] };
        grad_w[l] = delta.t().dot(prev);
        grad_b[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut next = delta.dot(&model.weights[l]);
            next.zip_mut_with(&acts[l - 1], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = next;
        }
    }
    (loss, grad_w, grad_b)
}

/// Train a network of the given shape on `data`.
///
/// Runs [`MlpTrainSettings::restarts`] independent initializations, each for
/// two stages of [`MlpTrainSettings::epochs_per_stage`] full-batch epochs of
/// SGD with momentum and weight decay, decaying the learning rate between
/// stages. A restart whose loss becomes non-finite is abandoned; if every
/// restart diverges the call fails with [`OptimError::NonFiniteLoss`].
pub fn mlp_train(
    layer_sizes: &[usize],
    output: OutputActivation,
    data: &MlpDataset,
    settings: &MlpTrainSettings,
) -> Result<MlpTrained, OptimError> {
    if data.inputs.nrows() == 0 {
        return Err(OptimError::EmptyDataset);
    }
    if data.inputs.ncols() != layer_sizes[0] {
        return Err(OptimError::DimMismatch {
            expected: layer_sizes[0],
            got: data.inputs.ncols(),
        });
    }
    if data.targets.ncols() != *layer_sizes.last().unwrap()
        || data.targets.nrows() != data.inputs.nrows()
    {
        return Err(OptimError::DimMismatch {
            expected: *layer_sizes.last().unwrap(),
            got: data.targets.ncols(),
        });
    }
    assert!(settings.restarts >= 1, "restarts must be at least 1");

    let mut best: Option<(f64, MlpModel)> = None;
    let mut restart_losses = Vec::with_capacity(settings.restarts);
    for restart in 0..settings.restarts {
        let mut model = MlpModel::init(layer_sizes, output, settings.seed + restart as u64);
        let mut vel_w: Vec<Array2<f64>> = model
            .weights
            .iter()
            .map(|w| Array2::zeros(w.raw_dim()))
            .collect();
        let mut vel_b: Vec<Array1<f64>> = model
            .biases
            .iter()
            .map(|b| Array1::zeros(b.raw_dim()))
            .collect();

        let mut lr = settings.learning_rate;
        let mut diverged = false;
        'stages: for _stage in 0..STAGES {
            for _epoch in 0..settings.epochs_per_stage {
                let (loss, grad_w, grad_b) = loss_gradients(&model, data);
                if !loss.is_finite() {
                    diverged = true;
                    break 'stages;
                }
                for l in 0..model.weights.len() {
                    vel_w[l].zip_mut_with(
                        &(&grad_w[l] + &(&model.weights[l] * settings.weight_decay)),
                        |v, &g| {
                            *v = settings.momentum * *v - lr * g;
                        },
                    );
                    model.weights[l] += &vel_w[l];
                    vel_b[l].zip_mut_with(
                        &(&grad_b[l] + &(&model.biases[l] * settings.weight_decay)),
                        |v, &g| {
                            *v = settings.momentum * *v - lr * g;
                        },
                    );
                    model.biases[l] += &vel_b[l];
                }
            }
            lr *= settings.lr_decay;
        }

        let final_loss = if diverged {
            f64::INFINITY
        } else {
            let l = mlp_loss(&model, data);
            if l.is_finite() {
                l
            } else {
                f64::INFINITY
            }
        };
        restart_losses.push(final_loss);
        let better = match &best {
            None => final_loss.is_finite(),
            Some((best_loss, _)) => final_loss < *best_loss,
        };
        if better {
            best = Some((final_loss, model));
        }
    }

    match best {
        Some((final_loss, model)) => Ok(MlpTrained {
            model,
            final_loss,
            restart_losses,
        }),
        None => Err(OptimError::NonFiniteLoss),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_dataset(n: usize) -> MlpDataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        MlpDataset {
            inputs: Array2::from_shape_vec((n, 1), xs.clone()).unwrap(),
            targets: Array2::from_shape_vec((n, 1), xs).unwrap(),
        }
    }

    #[test]
    fn learns_identity_map() {
        let data = identity_dataset(64);
        let trained = mlp_train(
            &[1, 50, 20, 1],
            OutputActivation::Identity,
            &data,
            &MlpTrainSettings {
                seed: 3,
                ..MlpTrainSettings::default()
            },
        )
        .unwrap();
        assert!(
            trained.final_loss < 1e-4,
            "training MSE {}",
            trained.final_loss
        );
    }

    #[test]
    fn training_is_deterministic() {
        let data = identity_dataset(16);
        let settings = MlpTrainSettings {
            epochs_per_stage: 50,
            restarts: 2,
            seed: 9,
            ..MlpTrainSettings::default()
        };
        let a = mlp_train(&[1, 8, 1], OutputActivation::Identity, &data, &settings).unwrap();
        let b = mlp_train(&[1, 8, 1], OutputActivation::Identity, &data, &settings).unwrap();
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
        for (wa, wb) in a.model.weights.iter().zip(&b.model.weights) {
            assert_eq!(wa.as_slice().unwrap(), wb.as_slice().unwrap());
        }
    }

    #[test]
    fn final_loss_not_above_initial_loss() {
        let data = identity_dataset(32);
        let settings = MlpTrainSettings {
            epochs_per_stage: 200,
            restarts: 3,
            seed: 21,
            ..MlpTrainSettings::default()
        };
        let trained = mlp_train(&[1, 10, 1], OutputActivation::Identity, &data, &settings).unwrap();
        for (r, &loss) in trained.restart_losses.iter().enumerate() {
            let init = MlpModel::init(&[1, 10, 1], OutputActivation::Identity, 21 + r as u64);
            assert!(loss <= mlp_loss(&init, &data), "restart {r}");
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let data = MlpDataset {
            inputs: Array2::zeros((0, 1)),
            targets: Array2::zeros((0, 1)),
        };
        assert!(matches!(
            mlp_train(
                &[1, 4, 1],
                OutputActivation::Identity,
                &data,
                &MlpTrainSettings::default()
            ),
            Err(OptimError::EmptyDataset)
        ));
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        let n = 12;
        let inputs = Array2::from_shape_fn((n, 5), |_| rng.gen_range(-1.0..1.0));
        let targets = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let data = MlpDataset { inputs, targets };
        let mut model = MlpModel::init(&[5, 3, 2], OutputActivation::Identity, 5);

        let (_, grad_w, grad_b) = loss_gradients(&model, &data);
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].len() {
                let orig = model.weights[l].as_slice().unwrap()[idx];
                model.weights[l].as_slice_mut().unwrap()[idx] = orig + h;
                let plus = mlp_loss(&model, &data);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig - h;
                let minus = mlp_loss(&model, &data);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grad_w[l].as_slice().unwrap()[idx];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
            for idx in 0..model.biases[l].len() {
                let orig = model.biases[l][idx];
                model.biases[l][idx] = orig + h;
                let plus = mlp_loss(&model, &data);
                model.biases[l][idx] = orig - h;
                let minus = mlp_loss(&model, &data);
                model.biases[l][idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (grad_b[l][idx] - numeric).abs()
                    / grad_b[l][idx].abs().max(numeric.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn softmax_gradients_match_central_differences() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(4);
        let n = 10;
        let inputs = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        let mut targets = Array2::zeros((n, 4));
        for i in 0..n {
            targets[(i, rng.gen_range(0..4))] = 1.0;
        }
        let data = MlpDataset { inputs, targets };
        let mut model = MlpModel::init(&[3, 6, 4], OutputActivation::Softmax, 8);

        let (_, grad_w, _) = loss_gradients(&model, &data);
        let h = 1e-5;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].len() {
                let orig = model.weights[l].as_slice().unwrap()[idx];
                model.weights[l].as_slice_mut().unwrap()[idx] = orig + h;
                let plus = mlp_loss(&model, &data);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig - h;
                let minus = mlp_loss(&model, &data);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grad_w[l].as_slice().unwrap()[idx];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "layer {l} idx {idx}: rel {rel}");
            }
        }
    }
}
