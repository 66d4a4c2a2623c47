use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{GradOrigin, GradientVector, ModelParams};
use crate::error::{Error, Result};

/// A scalar function of the network's predictions on a batch.
///
/// Implementations return the value together with the derivative with respect
/// to every prediction; the network turns that cotangent into a parameter
/// gradient by backpropagation.
pub trait ScalarObjective {
    fn origin(&self) -> GradOrigin;

    fn value_and_cotangent(&self, predictions: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Mean prediction over a subset of rows.
#[derive(Debug, Clone)]
pub struct MeanPrediction<'a> {
    pub rows: &'a [usize],
    pub origin: GradOrigin,
}

impl ScalarObjective for MeanPrediction<'_> {
    fn origin(&self) -> GradOrigin {
        self.origin
    }

    fn value_and_cotangent(&self, predictions: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.rows.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let w = 1.0 / self.rows.len() as f64;
        let mut cot = vec![0.0; predictions.len()];
        let mut value = 0.0;
        for &i in self.rows {
            value += predictions[i];
            cot[i] += w;
        }
        Ok((value * w, cot))
    }
}

/// `sum_i w_i f_i` for fixed weights.
#[derive(Debug, Clone)]
pub struct WeightedSum {
    pub weights: Vec<f64>,
}

impl ScalarObjective for WeightedSum {
    fn origin(&self) -> GradOrigin {
        GradOrigin::Custom
    }

    fn value_and_cotangent(&self, predictions: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.weights.len() != predictions.len() {
            return Err(Error::Shape {
                context: "weighted-sum objective",
                expected: predictions.len(),
                actual: self.weights.len(),
            });
        }
        let value = self.weights.iter().zip(predictions).map(|(w, f)| w * f).sum();
        Ok((value, self.weights.clone()))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Activations kept from a forward pass: `inputs[l]` feeds layer `l`,
/// `pre[l]` is its pre-activation.
struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array1<f64>,
}

impl ModelParams {
    /// One prediction in `(0, 1)` per row of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.trace(x)?.output)
    }

    fn trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                context: "forward input columns",
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let depth = self.layers().len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut current = x.to_owned();
        for (l, layer) in self.layers().iter().enumerate() {
            let z = current.dot(&layer.weights.t()) + &layer.bias;
            inputs.push(current);
            current = if l + 1 < depth {
                z.mapv(|v| v.max(0.0))
            } else {
                z.mapv(sigmoid)
            };
            pre.push(z);
        }
        let output = current.index_axis_move(Axis(1), 0);
        Ok(Trace { inputs, pre, output })
    }

    /// Gradient of `sum_i c_i f(x_i)` with respect to the flat parameters,
    /// plus the cotangent reaching the inputs (row `i` = `c_i * df(x_i)/dx_i`).
    fn backprop(&self, trace: &Trace, cotangent: &[f64]) -> (Vec<f64>, Array2<f64>) {
        let n = trace.output.len();
        let depth = self.layers().len();
        // dL/dz at the output: c * f * (1 - f)
        let mut delta = Array2::from_shape_fn((n, 1), |(i, _)| {
            let f = trace.output[i];
            cotangent[i] * f * (1.0 - f)
        });
        let mut per_layer: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let layer = &self.layers()[l];
            let dw = delta.t().dot(&trace.inputs[l]);
            let db = delta.sum_axis(Axis(0));
            let mut upstream = delta.dot(&layer.weights);
            if l > 0 {
                upstream.zip_mut_with(&trace.pre[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            per_layer.push((dw, db));
            delta = upstream;
        }
        per_layer.reverse();
        let mut flat = Vec::with_capacity(self.num_params());
        for (dw, db) in per_layer {
            flat.extend(dw.iter().copied());
            flat.extend(db.iter().copied());
        }
        (flat, delta)
    }

    /// Flat gradient of `sum_i c_i f(x_i)`.
    pub fn backward(&self, x: ArrayView2<f64>, cotangent: &[f64]) -> Result<Vec<f64>> {
        if x.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        if cotangent.len() != x.nrows() {
            return Err(Error::Shape {
                context: "backward cotangent",
                expected: x.nrows(),
                actual: cotangent.len(),
            });
        }
        let trace = self.trace(x)?;
        Ok(self.backprop(&trace, cotangent).0)
    }

    /// Runs a forward pass, lets `objective` turn the predictions into an
    /// arbitrary result plus a per-prediction cotangent, and backpropagates.
    pub fn backward_with<T>(
        &self,
        x: ArrayView2<f64>,
        objective: impl FnOnce(&[f64]) -> Result<(T, Vec<f64>)>,
    ) -> Result<(T, Vec<f64>)> {
        if x.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        let trace = self.trace(x)?;
        let (out, cotangent) = objective(trace.output.as_slice().expect("owned, contiguous"))?;
        if cotangent.len() != x.nrows() {
            return Err(Error::Shape {
                context: "backward cotangent",
                expected: x.nrows(),
                actual: cotangent.len(),
            });
        }
        Ok((out, self.backprop(&trace, &cotangent).0))
    }

    /// Row `i` holds `df(x_i)/dx_i`.
    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        let trace = self.trace(x)?;
        let ones = vec![1.0; x.nrows()];
        Ok(self.backprop(&trace, &ones).1)
    }
}

/// Value and exact parameter gradient of `objective` on the batch `x`.
pub fn backward_scalar(
    params: &ModelParams,
    objective: &dyn ScalarObjective,
    x: ArrayView2<f64>,
) -> Result<(f64, GradientVector)> {
    if x.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let trace = params.trace(x)?;
    let predictions = trace.output.as_slice().expect("owned, contiguous");
    let (value, cotangent) = objective.value_and_cotangent(predictions)?;
    let (grad, _) = params.backprop(&trace, &cotangent);
    let grad = GradientVector::new(grad, objective.origin());
    if !value.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite {
            origin: objective.origin(),
        });
    }
    Ok((value, grad))
}
