use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{gemm, Matrix, Op};

use super::mlp::{back_through_weight, mul_derivative, Gradients, Mlp};

/// Added under the square root of `‖∇_z D‖` so the norm is differentiable at 0.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GradBundle {
    /// `mse_term + reg_term`.
    pub loss: f64,
    /// `(1/m) Σ (D(z_i) − H_i)²`
    pub mse_term: f64,
    /// `(λ/m) Σ (‖∇_z D(z_i)‖ − t_i)²`
    pub reg_term: f64,
    pub grads: Gradients,
    /// `∇_z D(z_i)` per row; only computed when `λ > 0`.
    pub input_grads: Option<Matrix>,
}

/// Regularized potential regression loss and its exact parameter gradient.
///
/// `L = (1/m) Σ (D(z_i) − H_i)² + (λ/m) Σ (‖∇_z D(z_i)‖ − t_i)²`
///
/// The regularizer's weight gradient is `∂/∂w ⟨γ, ∇_z D⟩` with
/// `γ_i = (2λ/m)(‖g_i‖ − t_i) g_i / ‖g_i‖` held fixed, i.e. the weight
/// gradient of the directional derivative of `D` along `γ`. It is computed by
/// a tangent forward pass seeded with `γ` followed by one reverse pass over
/// both the primal and tangent computations.
pub fn loss_and_grads(
    net: &Mlp,
    batch: &Matrix,
    targets: &[f64],
    match_dist: &[f64],
    lambda: f64,
) -> Result<GradBundle> {
    ensure_dim(1, net.output_dim())?;
    ensure_dim(net.input_dim(), batch.cols())?;
    let m = batch.rows();
    if m == 0 {
        return Err(Error::Empty("regression batch"));
    }
    ensure_dim(m, targets.len())?;
    ensure_dim(m, match_dist.len())?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if !batch.all_finite() {
        return Err(Error::NonFinite("network input"));
    }

    let inv_m = 1.0 / m as f64;
    let trace = net.trace(batch);
    let out = trace.output().as_slice();
    let residual: Vec<f64> = out.iter().zip(targets).map(|(d, h)| d - h).collect();
    let mse_term = residual.iter().map(|r| r * r).sum::<f64>() * inv_m;
    let seed = Matrix::from_vec(m, 1, residual.iter().map(|r| 2.0 * inv_m * r).collect())?;

    if lambda == 0.0 {
        if !mse_term.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let (grads, _) = net.backward(&trace, seed);
        return Ok(GradBundle {
            loss: mse_term,
            mse_term,
            reg_term: 0.0,
            grads,
            input_grads: None,
        });
    }

    // ∇_z D per sample, keeping δ_l = ∂D/∂z_l and e_l = ∂D/∂a_l.
    let ones = Matrix::from_vec(m, 1, vec![1.0; m])?;
    let (input_grads, deltas, adj_post) = net.backward_input(&trace, ones);

    let d = batch.cols();
    let mut gamma = Matrix::zeros(m, d);
    let mut reg_sum = 0.0;
    for (i, &dist) in match_dist.iter().enumerate() {
        let g = input_grads.row(i);
        let norm = (g.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
        let gap = norm - dist;
        reg_sum += gap * gap;
        let scale = 2.0 * lambda * inv_m * gap / norm;
        for (o, v) in gamma.row_mut(i).iter_mut().zip(g) {
            *o = scale * v;
        }
    }
    let reg_term = lambda * inv_m * reg_sum;
    let loss = mse_term + reg_term;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }

    // Tangent pass: ȧ_0 = γ, ż_l = ȧ_{l−1} W_lᵀ, ȧ_l = f'(z_l) ⊙ ż_l.
    let layers = net.layers();
    let mut tangent_pre = Vec::with_capacity(layers.len());
    let mut tangent_post: Vec<Matrix> = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let prev = tangent_post.last().unwrap_or(&gamma);
        let mut zdot = Matrix::zeros(m, layer.out_dim());
        gemm(
            prev,
            Op::Plain,
            layer.weight(),
            Op::Transposed,
            &mut zdot,
            false,
        );
        let adot = mul_derivative(&zdot, &trace.pre[l], layer.activation());
        tangent_pre.push(zdot);
        tangent_post.push(adot);
    }

    // Joint reverse pass. The tangent output's adjoint is 1, which makes the
    // adjoint of ż_l equal to δ_l and that of ȧ_l equal to e_l.
    let mut grads = Gradients::zeros_like(net);
    let mut adj = seed;
    for (l, layer) in layers.iter().enumerate().rev() {
        let act = layer.activation();
        let mut adj_pre = mul_derivative(&adj, &trace.pre[l], act);
        if !act.is_piecewise_linear() {
            let curvature = adj_pre
                .as_slice()
                .iter()
                .zip(adj_post[l].as_slice())
                .zip(
                    trace.pre[l]
                        .as_slice()
                        .iter()
                        .zip(tangent_pre[l].as_slice()),
                )
                .map(|((a, e), (&z, zdot))| a + e * act.second_derivative(z) * zdot)
                .collect();
            adj_pre = Matrix::from_vec(m, layer.out_dim(), curvature)?;
        }
        let g = &mut grads.layers[l];
        gemm(
            &adj_pre,
            Op::Transposed,
            trace.layer_input(l),
            Op::Plain,
            &mut g.weight,
            false,
        );
        let tangent_in = if l == 0 { &gamma } else { &tangent_post[l - 1] };
        gemm(
            &deltas[l],
            Op::Transposed,
            tangent_in,
            Op::Plain,
            &mut g.weight,
            true,
        );
        g.bias = adj_pre.column_sums();
        if l > 0 {
            adj = back_through_weight(layer, &adj_pre);
        }
    }

    Ok(GradBundle {
        loss,
        mse_term,
        reg_term,
        grads,
        input_grads: Some(input_grads),
    })
}
