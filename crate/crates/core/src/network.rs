//! Feed-forward networks: `x_i = act_i(W_i x_{i-1} + b_i)`.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::ActivationKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },
    #[error("layer {layer}: {source}")]
    Activation {
        layer: usize,
        source: crate::activation::ActivationError,
    },
    #[error("input has {got} entries, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("a network needs at least one layer")]
    NoLayers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: ActivationKind,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: ActivationKind) -> Self {
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn eval(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let act = self.activation;
        (self.weights.dot(&x) + &self.bias).mapv(|v| act.eval(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(NetworkError::Shape {
                    layer: i,
                    message: format!(
                        "bias has {} entries but weights have {} rows",
                        layer.bias.len(),
                        layer.output_dim()
                    ),
                });
            }
            if i > 0 && layer.input_dim() != layers[i - 1].output_dim() {
                return Err(NetworkError::Shape {
                    layer: i,
                    message: format!(
                        "weights take {} inputs but the previous layer has {} neurons",
                        layer.input_dim(),
                        layers[i - 1].output_dim()
                    ),
                });
            }
            layer
                .activation
                .validate()
                .map_err(|source| NetworkError::Activation { layer: i, source })?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Concrete forward pass.
    pub fn eval(&self, x: ArrayView1<f64>) -> Result<Array1<f64>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::InputDim {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut cur = x.to_owned();
        for layer in &self.layers {
            cur = layer.eval(cur.view());
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn relu_difference_is_identity() {
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0], [-1.0]]), arr1(&[0.0, 0.0]), ActivationKind::Relu),
            Layer::new(arr2(&[[1.0, -1.0]]), arr1(&[0.0]), ActivationKind::Identity),
        ])
        .unwrap();
        for x in [-1.0, -0.25, 0.0, 0.6, 1.0] {
            assert_eq!(net.eval(arr1(&[x]).view()).unwrap()[0], x);
        }
    }

    #[test]
    fn shape_errors() {
        let bad = Network::new(vec![
            Layer::new(arr2(&[[1.0, 2.0]]), arr1(&[0.0]), ActivationKind::Relu),
            Layer::new(arr2(&[[1.0, 2.0]]), arr1(&[0.0]), ActivationKind::Relu),
        ]);
        assert!(matches!(bad, Err(NetworkError::Shape { layer: 1, .. })));
        let bad_bias = Network::new(vec![Layer::new(arr2(&[[1.0]]), arr1(&[0.0, 1.0]), ActivationKind::Relu)]);
        assert!(matches!(bad_bias, Err(NetworkError::Shape { layer: 0, .. })));
        let bad_act = Network::new(vec![Layer::new(
            arr2(&[[1.0]]),
            arr1(&[0.0]),
            ActivationKind::LeakyRelu { gamma: 2.0 },
        )]);
        assert!(matches!(bad_act, Err(NetworkError::Activation { layer: 0, .. })));
        assert_eq!(Network::new(vec![]), Err(NetworkError::NoLayers));
    }
}
