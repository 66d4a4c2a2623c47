use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Weights of a dense network whose last layer has a single logistic unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layers: Vec<Layer>,
}

impl ModelParams {
    /// Validates that layer shapes chain and end in a single output.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::Shape {
                    context: "layer bias",
                    expected: layer.output_dim(),
                    actual: layer.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.input_dim() != layer.output_dim() {
                    return Err(Error::Shape {
                        context: "layer chaining",
                        expected: layer.output_dim(),
                        actual: next.input_dim(),
                    });
                }
            }
        }
        let out = layers.last().map(Layer::output_dim).unwrap_or(0);
        if out != 1 {
            return Err(Error::Shape {
                context: "output layer width",
                expected: 1,
                actual: out,
            });
        }
        Ok(Self { layers })
    }

    /// All-zero network for the layer widths `arch = [input, hidden.., 1]`.
    pub fn zeros(arch: &[usize]) -> Result<Self> {
        check_arch(arch)?;
        let layers = arch
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self::new(layers)
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(arch: &[usize], seed: u64) -> Result<Self> {
        check_arch(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    /// Layer widths, input first.
    pub fn arch(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    /// Network with this architecture holding the values of `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Self> {
        self.check_len(flat.len(), "unflatten")?;
        let mut offset = 0;
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let (rows, cols) = layer.weights.dim();
                let nw = rows * cols;
                let weights = Array2::from_shape_vec((rows, cols), flat[offset..offset + nw].to_vec())
                    .expect("length checked");
                offset += nw;
                let bias = Array1::from(flat[offset..offset + rows].to_vec());
                offset += rows;
                Layer { weights, bias }
            })
            .collect();
        Ok(Self { layers })
    }

    /// `true` on weight coordinates, `false` on biases, in flat order.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            mask.extend(std::iter::repeat_n(true, layer.weights.len()));
            mask.extend(std::iter::repeat_n(false, layer.bias.len()));
        }
        mask
    }

    /// Returns `self + eps` in flat coordinates; `self` is untouched.
    pub fn perturb(&self, eps: &[f64]) -> Result<Self> {
        self.check_len(eps.len(), "perturb")?;
        let mut out = self.clone();
        let mut offset = 0;
        for layer in &mut out.layers {
            for w in layer.weights.iter_mut() {
                *w += eps[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b += eps[offset];
                offset += 1;
            }
        }
        Ok(out)
    }

    /// Euclidean norm of the flat parameter vector.
    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn check_len(&self, actual: usize, context: &'static str) -> Result<()> {
        let expected = self.num_params();
        if actual != expected {
            return Err(Error::Shape {
                context,
                expected,
                actual,
            });
        }
        Ok(())
    }
}

fn check_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(Error::Config(format!(
            "architecture must list at least input and output widths, all positive: {arch:?}"
        )));
    }
    if arch.last() != Some(&1) {
        return Err(Error::Shape {
            context: "output layer width",
            expected: 1,
            actual: *arch.last().unwrap(),
        });
    }
    Ok(())
}
