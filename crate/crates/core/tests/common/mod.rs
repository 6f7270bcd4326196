#![allow(dead_code)]

use aeot::nn::{Activation, Mlp};
use aeot::ot::{cost_matrix, CostMatrix, DiscreteMeasure};
use aeot::rng::SeededRng;
use aeot::Matrix;

/// Minimum total cost over all permutations, with the lexicographically
/// first minimizer.
pub fn brute_force(cost: &CostMatrix) -> (f64, Vec<usize>) {
    let m = cost.size();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = (f64::INFINITY, perm.clone());
    permute(&mut perm, 0, cost, &mut best);
    best
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &CostMatrix, best: &mut (f64, Vec<usize>)) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
        if total < best.0 {
            *best = (total, perm.clone());
        }
        return;
    }
    // Lexicographic order: rotate the candidate into place, then restore.
    for t in k..perm.len() {
        perm[k..=t].rotate_right(1);
        permute(perm, k + 1, cost, best);
        perm[k..=t].rotate_left(1);
    }
}

pub fn random_points(rng: &mut SeededRng, m: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let mut data = vec![0.0; m * d];
    rng.fill_normal(&mut data);
    data.iter_mut().for_each(|v| *v *= scale);
    DiscreteMeasure::new(Matrix::from_vec(m, d, data).unwrap()).unwrap()
}

pub struct Instance {
    pub src: DiscreteMeasure,
    pub tgt: DiscreteMeasure,
    pub cost: CostMatrix,
}

/// Random instances with `m ∈ 2..=8` and `d ∈ {1, 2, 10}`; Gaussian points
/// are in general position with probability one.
pub fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = SeededRng::new(seed, 99);
    (0..count)
        .map(|k| {
            let m = 2 + rng.below(7);
            let d = [1, 2, 10][k % 3];
            let src = random_points(&mut rng, m, d, 1.0);
            let tgt = random_points(&mut rng, m, d, 2.0);
            let cost = cost_matrix(&src, &tgt).unwrap();
            Instance { src, tgt, cost }
        })
        .collect()
}

/// Forward pass written as plain scalar loops.
pub fn scalar_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in net.layers() {
        let w = layer.weight();
        a = (0..layer.out_dim())
            .map(|o| {
                let mut z = layer.bias()[o];
                for (i, ai) in a.iter().enumerate() {
                    z += w.get(o, i) * ai;
                }
                layer.activation().apply(z)
            })
            .collect();
    }
    a
}

pub fn random_net(rng: &mut SeededRng, dims: &[usize], hidden: Activation) -> Mlp {
    Mlp::init(dims, hidden, Activation::Identity, rng).unwrap()
}

pub struct GradCase {
    pub net: Mlp,
    pub batch: Matrix,
    pub targets: Vec<f64>,
    pub match_dist: Vec<f64>,
    pub lambda: f64,
}

/// Smallest `|z|` over the pre-activations of kinked hidden units.
pub fn kink_margin(net: &Mlp, batch: &Matrix) -> f64 {
    let mut margin = f64::INFINITY;
    for x in batch.iter_rows() {
        let mut a = x.to_vec();
        for layer in net.layers() {
            let w = layer.weight();
            let pre: Vec<f64> = (0..layer.out_dim())
                .map(|o| {
                    layer.bias()[o] + (0..layer.in_dim()).map(|i| w.get(o, i) * a[i]).sum::<f64>()
                })
                .collect();
            if layer.activation().is_piecewise_linear()
                && layer.activation() != Activation::Identity
            {
                margin = pre.iter().fold(margin, |acc, z| acc.min(z.abs()));
            }
            a = pre.iter().map(|&z| layer.activation().apply(z)).collect();
        }
    }
    margin
}

/// Random networks with 2–3 hidden layers of width ≤ 32 and batches of four
/// inputs kept at least `1e-3` away from every kink.
pub fn gradient_cases(count: usize, seed: u64) -> Vec<GradCase> {
    let mut rng = SeededRng::new(seed, 77);
    let hidden_kinds = [
        Activation::Relu,
        Activation::LeakyRelu { slope: 0.2 },
        Activation::Sigmoid,
    ];
    (0..count)
        .map(|k| {
            let depth = 2 + rng.below(2);
            let d = 1 + rng.below(4);
            let mut dims = vec![d];
            dims.extend((0..depth).map(|_| 2 + rng.below(31)));
            dims.push(1);
            let hidden = hidden_kinds[k % 3];
            let mut net = random_net(&mut rng, &dims, hidden);
            for b in net
                .layers_mut()
                .iter_mut()
                .flat_map(|l| l.bias_mut().iter_mut())
            {
                *b = 0.2 * (2.0 * rng.uniform() - 1.0);
            }
            let m = 4;
            let batch = loop {
                let mut data = vec![0.0; m * d];
                rng.fill_normal(&mut data);
                let batch = Matrix::from_vec(m, d, data).unwrap();
                if kink_margin(&net, &batch) > 1e-3 {
                    break batch;
                }
            };
            let mut targets = vec![0.0; m];
            rng.fill_normal(&mut targets);
            let match_dist = (0..m).map(|_| 0.5 + 2.0 * rng.uniform()).collect();
            GradCase {
                net,
                batch,
                targets,
                match_dist,
                lambda: if k % 2 == 0 { 0.0 } else { 0.1 },
            }
        })
        .collect()
}

/// Largest relative error between analytic parameter gradients and central
/// differences, `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn max_param_grad_error(case: &GradCase) -> f64 {
    let loss = |net: &Mlp| {
        aeot::nn::loss_and_grads(
            net,
            &case.batch,
            &case.targets,
            &case.match_dist,
            case.lambda,
        )
        .unwrap()
        .loss
    };
    let analytic = aeot::nn::loss_and_grads(
        &case.net,
        &case.batch,
        &case.targets,
        &case.match_dist,
        case.lambda,
    )
    .unwrap()
    .grads
    .flatten();
    let base: Vec<f64> = case.net.params().collect();
    let mut net = case.net.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let h = 1e-5 * base[k].abs().max(1.0);
        let mut p = base.clone();
        p[k] = base[k] + h;
        net.set_params(&p).unwrap();
        let up = loss(&net);
        p[k] = base[k] - h;
        net.set_params(&p).unwrap();
        let down = loss(&net);
        let numeric = (up - down) / (2.0 * h);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}
