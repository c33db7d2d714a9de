//! Oracles shared by the unit suites and the acceptance run: finite-difference
//! gradient checks and brute-force level-set thresholding.
//!
//! Each layer check contracts the output with a fixed random tensor `r`, so
//! the scalar objective is `Σ r·y` and its analytic gradient is one backward
//! pass with `grad_out = r`. Central differences run in f32 but accumulate in
//! f64; agreement is measured norm-wise per tensor and the worst tensor is
//! reported.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textdet::cemser::ComponentTree;
use textdet::nn::{
    l2_mask_loss, relu, relu_backward, sigmoid, sigmoid_backward, softmax_xent, Conv2d, Deconv2d, Linear, MaxPool,
    Tensor,
};
use textdet::raster::BoundingBox;

pub const EPS: f32 = 1e-3;
/// Losses are evaluated to f32 only, so a wider step keeps round-off down.
pub const LOSS_EPS: f32 = 1e-2;
pub const TOL: f64 = 1e-3;
pub const SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

pub fn rel_err(a: &[f32], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central-difference gradient of `f` with respect to every entry of `x`.
pub fn numeric(x: &mut Tensor, eps: f32, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x.data()[i];
            x.data_mut()[i] = orig + eps;
            let up = f(x);
            x.data_mut()[i] = orig - eps;
            let down = f(x);
            x.data_mut()[i] = orig;
            (up - down) / (2.0 * eps as f64)
        })
        .collect()
}

/// Worst relative error of a `kernel`×`kernel` convolution's input, weight
/// and bias gradients.
pub fn conv_error(kernel: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Conv2d::he_init(2, 3, kernel, &mut rng);
    conv.params.biases = random_tensor(&[3], &mut rng);
    let mut x = random_tensor(&[2, 2, kernel + 3, kernel + 2], &mut rng);
    let r = random_tensor(&[2, 3, 4, 3], &mut rng);

    let gi = conv.backward(&x, &r, true).unwrap().unwrap();
    let probe = conv.clone();
    let ex = rel_err(gi.data(), &numeric(&mut x, EPS, |x| probe.forward(x).unwrap().dot(&r)));

    let mut w = conv.params.weights.clone();
    let nw = numeric(&mut w, EPS, |w| {
        let mut c = conv.clone();
        c.params.weights = w.clone();
        c.forward(&x).unwrap().dot(&r)
    });
    let mut b = conv.params.biases.clone();
    let nb = numeric(&mut b, EPS, |b| {
        let mut c = conv.clone();
        c.params.biases = b.clone();
        c.forward(&x).unwrap().dot(&r)
    });
    ex.max(rel_err(conv.params.grad_weights.data(), &nw))
        .max(rel_err(conv.params.grad_biases.data(), &nb))
}

/// Same as [`conv_error`] for a transposed convolution.
pub fn deconv_error(kernel: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut de = Deconv2d::zeros(3, 2, kernel);
    de.params.weights = random_tensor(&[3, 2, kernel, kernel], &mut rng);
    de.params.biases = random_tensor(&[2], &mut rng);
    let mut x = random_tensor(&[2, 3, 4, 3], &mut rng);
    let r = random_tensor(&[2, 2, kernel + 3, kernel + 2], &mut rng);

    let gi = de.backward(&x, &r, true).unwrap().unwrap();
    let probe = de.clone();
    let ex = rel_err(gi.data(), &numeric(&mut x, EPS, |x| probe.forward(x).unwrap().dot(&r)));

    let mut w = de.params.weights.clone();
    let nw = numeric(&mut w, EPS, |w| {
        let mut d = de.clone();
        d.params.weights = w.clone();
        d.forward(&x).unwrap().dot(&r)
    });
    let mut b = de.params.biases.clone();
    let nb = numeric(&mut b, EPS, |b| {
        let mut d = de.clone();
        d.params.biases = b.clone();
        d.forward(&x).unwrap().dot(&r)
    });
    ex.max(rel_err(de.params.grad_weights.data(), &nw))
        .max(rel_err(de.params.grad_biases.data(), &nb))
}

pub fn linear_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fc = Linear::he_init(7, 5, &mut rng);
    fc.params.biases = random_tensor(&[5], &mut rng);
    let mut x = random_tensor(&[3, 7], &mut rng);
    let r = random_tensor(&[3, 5], &mut rng);

    let gi = fc.backward(&x, &r, true).unwrap().unwrap();
    let probe = fc.clone();
    let ex = rel_err(gi.data(), &numeric(&mut x, EPS, |x| probe.forward(x).unwrap().dot(&r)));

    let mut w = fc.params.weights.clone();
    let nw = numeric(&mut w, EPS, |w| {
        let mut f = fc.clone();
        f.params.weights = w.clone();
        f.forward(&x).unwrap().dot(&r)
    });
    let mut b = fc.params.biases.clone();
    let nb = numeric(&mut b, EPS, |b| {
        let mut f = fc.clone();
        f.params.biases = b.clone();
        f.forward(&x).unwrap().dot(&r)
    });
    ex.max(rel_err(fc.params.grad_weights.data(), &nw))
        .max(rel_err(fc.params.grad_biases.data(), &nb))
}

/// 3×3 stride-3 pooling. Inputs are distinct multiples of 0.01, far wider
/// apart than the probe step, so no probe changes a window's winner.
pub fn pool_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = MaxPool::new(3, 3);
    let shape = [2, 2, 6, 6];
    let mut values: Vec<f32> = (0..144).map(|i| i as f32 * 0.01 - 0.7).collect();
    values.shuffle(&mut rng);
    let mut x = Tensor::new(&shape, values).unwrap();
    let r = random_tensor(&[2, 2, 2, 2], &mut rng);
    let (_, argmax) = pool.forward(&x).unwrap();
    let gi = MaxPool::backward(&r, &argmax, x.shape());
    rel_err(gi.data(), &numeric(&mut x, EPS, |x| pool.forward(x).unwrap().0.dot(&r)))
}

/// ReLU and sigmoid, with inputs kept away from the ReLU kink.
pub fn activation_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_tensor(&[4, 6], &mut rng);
    for v in x.data_mut() {
        if v.abs() < 0.05 {
            *v += 0.1;
        }
    }
    let r = random_tensor(&[4, 6], &mut rng);
    let gr = relu_backward(&relu(&x), &r);
    let er = rel_err(gr.data(), &numeric(&mut x, EPS, |x| relu(x).dot(&r)));
    let gs = sigmoid_backward(&sigmoid(&x), &r);
    let es = rel_err(gs.data(), &numeric(&mut x, EPS, |x| sigmoid(x).dot(&r)));
    er.max(es)
}

/// Softmax cross-entropy over 62 logits.
pub fn xent_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = random_tensor(&[62], &mut rng);
    for v in z.data_mut() {
        *v *= 3.0;
    }
    let label = rng.random_range(0..62);
    let (_, grad) = softmax_xent(z.data(), label);
    rel_err(
        &grad,
        &numeric(&mut z, LOSS_EPS, |z| softmax_xent(z.data(), label).0 as f64),
    )
}

/// Summed squared mask error against a binary target.
pub fn l2_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pred = random_tensor(&[1, 1, 8, 8], &mut rng);
    let target = Tensor::new(
        &[1, 1, 8, 8],
        (0..64).map(|_| f32::from(rng.random_bool(0.3))).collect(),
    )
    .unwrap();
    let (_, grad) = l2_mask_loss(&pred, &target).unwrap();
    rel_err(
        grad.data(),
        &numeric(&mut pred, LOSS_EPS, |p| l2_mask_loss(p, &target).unwrap().0 as f64),
    )
}

/// Every layer check over every seed, as `(name, worst error)`.
pub fn suite() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut worst = |name: String, f: &dyn Fn(u64) -> f64| {
        let e = SEEDS.iter().map(|&s| f(s)).fold(0.0, f64::max);
        out.push((name, e));
    };
    for k in [9, 7, 5] {
        worst(format!("conv {k}x{k}"), &|s| conv_error(k, s));
    }
    for k in [7, 9] {
        worst(format!("deconv {k}x{k}"), &|s| deconv_error(k, s));
    }
    worst("max pool".into(), &pool_error);
    worst("fully connected".into(), &linear_error);
    worst("relu and sigmoid".into(), &activation_error);
    worst("softmax cross-entropy".into(), &xent_error);
    worst("mask l2".into(), &l2_error);
    out
}

/// Connected components (4-neighbourhood) of `{p : levels[p] <= t}`, each as
/// a sorted pixel list.
pub fn components_at(levels: &[u8], w: usize, h: usize, t: u8) -> Vec<Vec<usize>> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] || levels[start] > t {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            let (x, y) = (p % w, p / w);
            let mut nb = Vec::new();
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            for q in nb {
                if !seen[q] && levels[q] <= t {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn levels_from(rng: &mut ChaCha8Rng, alphabet: &[u8]) -> (Vec<u8>, usize, usize) {
    let w = rng.random_range(1..=16);
    let h = rng.random_range(1..=16);
    let levels = (0..w * h)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect();
    (levels, w, h)
}

/// Random image of at most 16×16; even cases draw from all 256 levels, odd
/// cases from a few levels so that plateaus and ties are common.
pub fn random_levels(rng: &mut ChaCha8Rng, case: usize) -> (Vec<u8>, usize, usize) {
    let full: Vec<u8> = (0..=255).collect();
    let few = [0u8, 7, 8, 100, 255];
    levels_from(rng, if case.is_multiple_of(2) { &full } else { &few })
}

/// Compares the component tree against thresholding at every level, plus each
/// node's area and box; returns the first disagreement.
pub fn tree_mismatch(levels: &[u8], w: usize, h: usize) -> Option<String> {
    let tree = ComponentTree::build(levels, w, h);
    let node_pixels: Vec<Vec<usize>> = (0..tree.len()).map(|id| tree.pixels(id)).collect();
    for t in 0..=255u8 {
        let expected: BTreeSet<Vec<usize>> = components_at(levels, w, h, t).into_iter().collect();
        let actual: BTreeSet<Vec<usize>> = (0..tree.len())
            .filter(|&id| tree.nodes[id].level <= t && (t as u16) < tree.end_level(id))
            .map(|id| node_pixels[id].clone())
            .collect();
        if actual != expected {
            return Some(format!("level {t}: tree {actual:?}, thresholding {expected:?}"));
        }
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        let bbox = node_pixels[id]
            .iter()
            .map(|&p| BoundingBox::new((p % w) as i32, (p / w) as i32, 1, 1))
            .reduce(|a, b| a.union(&b))?;
        if node.area != node_pixels[id].len() || node.bbox != bbox {
            return Some(format!("node {id}: area or box disagrees with its pixels"));
        }
    }
    None
}
