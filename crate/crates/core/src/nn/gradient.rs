use super::{Mlp, NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    /// Row-major, same shape as the layer's weights.
    pub weights: Vec<f64>,
    /// Always zero for zero-bias layers.
    pub bias: Vec<f64>,
}

/// Gradients for every layer of an [`Mlp`], shape-congruent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights().len()],
                    bias: vec![0.0; l.bias().len()],
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// All entries, layer by layer, weights before bias.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(&mut l.bias).for_each(|v| *v *= factor);
        }
    }

    pub fn is_congruent(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self.layers.iter().zip(net.layers()).all(|(g, l)| {
                g.weights.len() == l.weights().len() && g.bias.len() == l.bias().len()
            })
    }
}

impl Mlp {
    /// Plain SGD step `w -= learning_rate * g` over trainable parameters.
    /// Fails without touching the network if the result would be non-finite.
    pub fn apply_update(&mut self, grads: &GradientSet, learning_rate: f64) -> Result<()> {
        if !grads.is_congruent(self) {
            return Err(NnError::DimensionMismatch {
                what: "gradient layers",
                expected: self.layers().len(),
                got: grads.layers.len(),
            });
        }
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(NnError::InvalidLearningRate(learning_rate));
        }
        let finite = self.layers().iter().zip(&grads.layers).all(|(l, g)| {
            let w_ok = l
                .weights()
                .iter()
                .zip(&g.weights)
                .all(|(w, d)| (w - learning_rate * d).is_finite());
            let b_ok = !l.activation().has_trainable_bias()
                || l.bias().iter().zip(&g.bias).all(|(b, d)| (b - learning_rate * d).is_finite());
            w_ok && b_ok
        });
        if !finite {
            return Err(NnError::NonFinite("updated weights"));
        }
        for (l, g) in self.layers_mut().iter_mut().zip(&grads.layers) {
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * d;
            }
            if l.activation().has_trainable_bias() {
                for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                    *b -= learning_rate * d;
                }
            }
        }
        Ok(())
    }
}
