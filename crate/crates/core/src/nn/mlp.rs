use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{gemm, Matrix, Op};
use crate::par;
use crate::rng::SeededRng;

/// Elementwise nonlinearity. At a kink the derivative takes the value of the
/// left piece: `ReLU'(0) = 0`, `LeakyReLU'(0) = slope`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = Activation::Sigmoid.apply(z);
                s * (1.0 - s)
            }
        }
    }

    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = Activation::Sigmoid.apply(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            _ => 0.0,
        }
    }

    /// True when the second derivative vanishes almost everywhere.
    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Sigmoid)
    }

    fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                Error::InvalidConfig(format!("leaky relu slope {slope} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

/// One affine layer followed by an activation. `weight` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    weight: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        ensure_dim(weight.rows(), bias.len())?;
        activation.validate()?;
        if !weight.all_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| DenseGrad {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Values in parameter order (per layer: weights row-major, then biases).
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|g| g.weight.as_slice().iter().chain(&g.bias).copied())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// Multi-layer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded by a forward pass.
pub(crate) struct Trace<'a> {
    pub input: &'a Matrix,
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl Trace<'_> {
    /// Input to layer `l`.
    pub fn layer_input(&self, l: usize) -> &Matrix {
        if l == 0 {
            self.input
        } else {
            &self.post[l - 1]
        }
    }

    pub fn output(&self) -> &Matrix {
        self.post.last().expect("network has layers")
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            ensure_dim(pair[0].out_dim(), pair[1].in_dim())?;
        }
        if layers[0].in_dim() == 0 {
            return Err(Error::InvalidConfig(
                "input dimension must be positive".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Random initialization: He-uniform (`±√(6/fan_in)`) for rectifier
    /// layers, Glorot-uniform for identity and sigmoid layers, zero biases.
    pub fn init(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Self::build(dims, hidden, output, |fan_in, fan_out, act| {
            let bound = match act {
                Activation::Relu | Activation::LeakyRelu { .. } => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            (2.0 * rng.uniform() - 1.0) * bound
        })
    }

    /// All parameters zero.
    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        Self::build(dims, hidden, output, |_, _, _| 0.0)
    }

    fn build(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        mut draw: impl FnMut(usize, usize, Activation) -> f64,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "need input and output dimensions".into(),
            ));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let act = if l + 1 == n { output } else { hidden };
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let data = (0..fan_in * fan_out)
                    .map(|_| draw(fan_in, fan_out, act))
                    .collect();
                Dense::new(
                    Matrix::from_vec(fan_out, fan_in, data)?,
                    vec![0.0; fan_out],
                    act,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    /// Parameters in the same order as [`Gradients::iter`].
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| {
            let Dense { weight, bias, .. } = l;
            weight.as_mut_slice().iter_mut().chain(bias.iter_mut())
        })
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        ensure_dim(self.num_params(), values.len())?;
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        ensure_dim(self.input_dim(), batch.cols())?;
        if !batch.all_finite() {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Evaluates the network on each row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_batch(batch)?;
        let mut a = batch.clone();
        for layer in &self.layers {
            let mut z = affine(layer, &a);
            let act = layer.activation;
            par::for_each_chunk_mut(z.as_mut_slice(), 1 << 14, |_, c| {
                c.iter_mut().for_each(|v| *v = act.apply(*v))
            });
            a = z;
        }
        Ok(a)
    }

    /// [`Mlp::forward`] for scalar-output networks.
    pub fn forward_scalar(&self, batch: &Matrix) -> Result<Vec<f64>> {
        ensure_dim(1, self.output_dim())?;
        Ok(self.forward(batch)?.into_vec())
    }

    /// `∇_z D(z)` of a scalar network at a single point.
    pub fn input_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let batch = Matrix::from_vec(1, z.len(), z.to_vec())?;
        Ok(self.input_gradients(&batch)?.into_vec())
    }

    /// `∇_z D` at every row of `batch`.
    pub fn input_gradients(&self, batch: &Matrix) -> Result<Matrix> {
        ensure_dim(1, self.output_dim())?;
        self.check_batch(batch)?;
        let trace = self.trace(batch);
        let seed = Matrix::from_vec(batch.rows(), 1, vec![1.0; batch.rows()])?;
        Ok(self.backward_input(&trace, seed).0)
    }

    pub(crate) fn trace<'a>(&self, input: &'a Matrix) -> Trace<'a> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = affine(layer, post.last().unwrap_or(input));
            let a = z.map(|v| layer.activation.apply(v));
            pre.push(z);
            post.push(a);
        }
        Trace { input, pre, post }
    }

    /// Reverse pass seeded with `∂L/∂output`; returns parameter gradients and
    /// `∂L/∂input`.
    pub(crate) fn backward(&self, trace: &Trace<'_>, seed: Matrix) -> (Gradients, Matrix) {
        let mut grads = Gradients::zeros_like(self);
        let mut adj = seed;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let dz = mul_derivative(&adj, &trace.pre[l], layer.activation);
            gemm(
                &dz,
                Op::Transposed,
                trace.layer_input(l),
                Op::Plain,
                &mut grads.layers[l].weight,
                false,
            );
            grads.layers[l].bias = dz.column_sums();
            adj = back_through_weight(layer, &dz);
        }
        (grads, adj)
    }

    /// Like [`Mlp::backward`] without parameter gradients. Also returns the
    /// per-layer `∂out/∂z_l` (the `δ_l`) and `∂out/∂a_l` vectors.
    pub(crate) fn backward_input(
        &self,
        trace: &Trace<'_>,
        seed: Matrix,
    ) -> (Matrix, Vec<Matrix>, Vec<Matrix>) {
        let n = self.layers.len();
        let mut deltas = Vec::with_capacity(n);
        let mut adjs = Vec::with_capacity(n);
        let mut adj = seed;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let dz = mul_derivative(&adj, &trace.pre[l], layer.activation);
            let next = back_through_weight(layer, &dz);
            adjs.push(adj);
            deltas.push(dz);
            adj = next;
        }
        deltas.reverse();
        adjs.reverse();
        (adj, deltas, adjs)
    }
}

/// `a · Wᵀ + b` for every row of `a`.
pub(crate) fn affine(layer: &Dense, a: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(a.rows(), layer.out_dim());
    gemm(a, Op::Plain, &layer.weight, Op::Transposed, &mut z, false);
    let width = layer.out_dim();
    if width > 0 {
        for row in z.as_mut_slice().chunks_mut(width) {
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
    }
    z
}

/// `adj · W`: pulls a pre-activation adjoint back to the layer input.
pub(crate) fn back_through_weight(layer: &Dense, dz: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(dz.rows(), layer.in_dim());
    gemm(dz, Op::Plain, &layer.weight, Op::Plain, &mut out, false);
    out
}

pub(crate) fn mul_derivative(adj: &Matrix, pre: &Matrix, act: Activation) -> Matrix {
    let data = adj
        .as_slice()
        .iter()
        .zip(pre.as_slice())
        .map(|(g, &z)| g * act.derivative(z))
        .collect();
    Matrix::from_vec(adj.rows(), adj.cols(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64, b: f64) -> Mlp {
        Mlp::new(vec![Dense::new(
            Matrix::from_vec(1, 1, vec![w]).unwrap(),
            vec![b],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn affine_single_layer() {
        let net = single(2.0, 1.0);
        let out = net
            .forward_scalar(&Matrix::from_vec(1, 1, vec![3.0]).unwrap())
            .unwrap();
        assert_eq!(out, vec![7.0]);
    }

    #[test]
    fn zero_network_outputs_zero_with_zero_gradient() {
        let net = Mlp::zeros(&[3, 5, 5, 1], Activation::Relu, Activation::Identity).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![4.0, 4.0, 4.0]]).unwrap();
        assert_eq!(net.forward_scalar(&x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.input_gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn affine_network_gradient_is_weight_vector() {
        let net = Mlp::new(vec![Dense::new(
            Matrix::from_vec(1, 3, vec![0.5, -1.5, 2.0]).unwrap(),
            vec![0.25],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        assert_eq!(
            net.input_gradient(&[9.0, -3.0, 1.0]).unwrap(),
            vec![0.5, -1.5, 2.0]
        );
    }

    #[test]
    fn kink_convention() {
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::LeakyRelu { slope: 0.2 }.derivative(0.0), 0.2);
        assert_eq!(Activation::LeakyRelu { slope: 0.2 }.apply(-1.0), -0.2);
    }

    #[test]
    fn rejects_bad_shapes_and_inputs() {
        let net = Mlp::zeros(&[2, 3, 1], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 3)),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        let bad = Matrix::from_vec(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(net.forward(&bad), Err(Error::NonFinite(_))));
        assert!(net.input_gradient(&[1.0]).is_err());
        let l1 = Dense::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Relu).unwrap();
        let l2 = Dense::new(Matrix::zeros(1, 4), vec![0.0], Activation::Identity).unwrap();
        assert!(Mlp::new(vec![l1, l2]).is_err());
        assert!(Dense::new(
            Matrix::zeros(1, 1),
            vec![0.0],
            Activation::LeakyRelu { slope: 1.5 }
        )
        .is_err());
    }

    #[test]
    fn relu_homogeneity_in_one_layer() {
        let mut rng = SeededRng::new(11, 0);
        let mut net = Mlp::init(
            &[3, 8, 8, 1],
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -1.2, 0.8], vec![-0.5, 0.1, 2.0]]).unwrap();
        let before = net.forward_scalar(&x).unwrap();
        for w in net.layers_mut()[1].weight_mut().as_mut_slice() {
            *w *= 2.5;
        }
        let after = net.forward_scalar(&x).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((2.5 * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn params_round_trip_in_order() {
        let mut rng = SeededRng::new(2, 0);
        let mut net =
            Mlp::init(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        assert_eq!(net.num_params(), 2 * 3 + 3 + 3 + 1);
        let values: Vec<f64> = (0..net.num_params()).map(|k| k as f64).collect();
        net.set_params(&values).unwrap();
        assert_eq!(net.params().collect::<Vec<_>>(), values);
        assert_eq!(net.layers()[0].bias(), &[6.0, 7.0, 8.0]);
    }
}
