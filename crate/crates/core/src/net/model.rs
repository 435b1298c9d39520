//! Permutation-invariant policy/value network over a variable number of
//! action rows.
//!
//! ```text
//! row x_r ──► embed: F → H → H (ReLU, ReLU) ──► e_r
//! g = [mean_r e_r ; max_r e_r]                         (2H)
//! policy logit_r = w · relu(W [e_r ; g] + b) + c       (3H → H → 1)
//! value          = tanh(w · relu(W g + b) + c)         (2H → H → 1)
//! policy = softmax over rows
//! ```
//!
//! All parameters live in one flat vector. Each dense layer stores its weight
//! matrix input-major (`w[i * out + o]`) followed by its bias, layers in the
//! order embed1, embed2, policy1, policy2, value1, value2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::FeatureMatrix;
use super::NetError;

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_L2: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub features: usize,
    pub hidden: usize,
}

impl NetShape {
    pub fn new(features: usize, hidden: usize) -> Self {
        NetShape { features, hidden }
    }

    /// `(inputs, outputs)` per dense layer.
    pub fn layers(&self) -> [(usize, usize); 6] {
        let h = self.hidden;
        [
            (self.features, h),
            (h, h),
            (3 * h, h),
            (h, 1),
            (2 * h, h),
            (h, 1),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    fn offsets(&self) -> [Dense; 6] {
        let mut at = 0;
        self.layers().map(|(inputs, outputs)| {
            let d = Dense {
                w: at,
                b: at + inputs * outputs,
                inputs,
                outputs,
            };
            at += inputs * outputs + outputs;
            d
        })
    }
}

pub const LAYER_NAMES: [&str; 6] = ["embed1", "embed2", "policy1", "policy2", "value1", "value2"];

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

impl Dense {
    fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.inputs * self.outputs]
    }

    fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + self.outputs]
    }
}

/// `out += Wᵀ x` for an input-major weight block. Zero inputs are skipped,
/// which is where post-ReLU sparsity pays off.
#[inline]
fn accumulate(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let row = &w[i * n..(i + 1) * n];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
    }
}

#[inline]
fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e−8 and bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// Applies one update to `params`. Nothing is modified when the gradient
    /// or the resulting update is not finite.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), NetError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(NetError::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NetError::NonFinite(format!("gradient entry {i}")));
        }
        let t = self.step + 1;
        let c1 = 1.0 - Self::BETA1.powi(t as i32);
        let c2 = 1.0 - Self::BETA2.powi(t as i32);
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        let mut next = params.to_vec();
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g;
            v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g * g;
            next[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
        }
        if let Some(i) = next.iter().position(|x| !x.is_finite()) {
            return Err(NetError::NonFinite(format!("parameter {i} after update")));
        }
        params.copy_from_slice(&next);
        self.m = m;
        self.v = v;
        self.step = t;
        Ok(())
    }
}

/// Network weights together with their optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    shape: NetShape,
    pub weights: Vec<f64>,
    pub adam: Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetOutput {
    pub policy: Vec<f64>,
    pub value: f64,
}

/// One training example: feature rows, a target distribution over them and a
/// value target.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub features: &'a FeatureMatrix,
    pub policy: &'a [f64],
    pub value: f64,
}

struct Trace {
    rows: usize,
    /// Post-ReLU first embedding, `rows × H`.
    h1: Vec<f64>,
    /// Post-ReLU embedding, `rows × H`.
    e: Vec<f64>,
    g: Vec<f64>,
    argmax: Vec<usize>,
    /// Post-ReLU policy hidden, `rows × H`.
    a: Vec<f64>,
    logits: Vec<f64>,
    policy: Vec<f64>,
    c: Vec<f64>,
    value: f64,
}

impl NetParams {
    /// He-uniform weights, zero biases.
    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; shape.param_count()];
        for d in shape.offsets() {
            let limit = (6.0 / d.inputs as f64).sqrt();
            for w in &mut weights[d.w..d.b] {
                *w = rng.random_range(-limit..limit);
            }
        }
        let n = weights.len();
        NetParams {
            shape,
            weights,
            adam: Adam::new(n),
        }
    }

    pub fn from_parts(shape: NetShape, weights: Vec<f64>, adam: Adam) -> Result<Self, NetError> {
        let n = shape.param_count();
        if weights.len() != n || adam.m.len() != n || adam.v.len() != n {
            return Err(NetError::Shape(format!(
                "expected {n} parameters, got {} / {} / {}",
                weights.len(),
                adam.m.len(),
                adam.v.len()
            )));
        }
        Ok(NetParams {
            shape,
            weights,
            adam,
        })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }

    fn check_input(&self, f: &FeatureMatrix) -> Result<(), NetError> {
        if f.cols() != self.shape.features {
            return Err(NetError::Shape(format!(
                "feature width {} but the network expects {}",
                f.cols(),
                self.shape.features
            )));
        }
        if f.data().iter().any(|x| !x.is_finite()) {
            return Err(NetError::NonFinite("input features".into()));
        }
        Ok(())
    }

    fn run(&self, f: &FeatureMatrix) -> Result<Trace, NetError> {
        self.check_input(f)?;
        let p = &self.weights;
        let [l0, l1, l2, l3, l4, l5] = self.shape.offsets();
        let h = self.shape.hidden;
        let rows = f.rows();

        let mut h1 = vec![0.0; rows * h];
        let mut e = vec![0.0; rows * h];
        for r in 0..rows {
            let hr = &mut h1[r * h..(r + 1) * h];
            hr.copy_from_slice(l0.bias(p));
            accumulate(l0.weights(p), f.row(r), hr);
            relu_in_place(hr);
            let er = &mut e[r * h..(r + 1) * h];
            er.copy_from_slice(l1.bias(p));
            accumulate(l1.weights(p), &h1[r * h..(r + 1) * h], er);
            relu_in_place(er);
        }

        let mut g = vec![0.0; 2 * h];
        let mut argmax = vec![0usize; h];
        for j in 0..h {
            g[h + j] = e[j];
        }
        for r in 0..rows {
            for j in 0..h {
                let x = e[r * h + j];
                g[j] += x;
                if x > g[h + j] {
                    g[h + j] = x;
                    argmax[j] = r;
                }
            }
        }
        for x in &mut g[..h] {
            *x /= rows as f64;
        }

        // global half of the policy hidden layer, shared by every row
        let w2 = l2.weights(p);
        let mut shared = l2.bias(p).to_vec();
        accumulate(&w2[h * h..], &g, &mut shared);
        let w3 = l3.weights(p);
        let b3 = l3.bias(p)[0];
        let mut a = vec![0.0; rows * h];
        let mut logits = vec![0.0; rows];
        for r in 0..rows {
            let ar = &mut a[r * h..(r + 1) * h];
            ar.copy_from_slice(&shared);
            accumulate(&w2[..h * h], &e[r * h..(r + 1) * h], ar);
            relu_in_place(ar);
            logits[r] = b3 + ar.iter().zip(w3).map(|(x, w)| x * w).sum::<f64>();
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(NetError::NonFinite(format!("{} logits", LAYER_NAMES[3])));
        }
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut policy: Vec<f64> = logits.iter().map(|&l| (l - top).exp()).collect();
        let z: f64 = policy.iter().sum();
        for q in &mut policy {
            *q /= z;
        }

        let mut c = l4.bias(p).to_vec();
        accumulate(l4.weights(p), &g, &mut c);
        relu_in_place(&mut c);
        let s = l5.bias(p)[0] + c.iter().zip(l5.weights(p)).map(|(x, w)| x * w).sum::<f64>();
        let value = s.tanh();
        if !value.is_finite() {
            return Err(NetError::NonFinite(format!("{} output", LAYER_NAMES[5])));
        }
        Ok(Trace {
            rows,
            h1,
            e,
            g,
            argmax,
            a,
            logits,
            policy,
            c,
            value,
        })
    }

    pub fn forward(&self, f: &FeatureMatrix) -> Result<NetOutput, NetError> {
        let t = self.run(f)?;
        Ok(NetOutput {
            policy: t.policy,
            value: t.value,
        })
    }

    /// Raw policy logits, one per row.
    pub fn logits(&self, f: &FeatureMatrix) -> Result<Vec<f64>, NetError> {
        self.run(f).map(|t| t.logits)
    }

    /// Batch loss `mean(CE(π, p) + (v − z)²) + λ‖θ‖²` and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[Sample<'_>], l2: f64) -> Result<(f64, Vec<f64>), NetError> {
        if batch.is_empty() {
            return Err(NetError::Shape("empty batch".into()));
        }
        let mut grad = vec![0.0; self.weights.len()];
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for s in batch {
            total += self.accumulate_sample(s, scale, &mut grad)?;
        }
        let mut loss = total * scale;
        if l2 != 0.0 {
            loss += l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
            for (g, w) in grad.iter_mut().zip(&self.weights) {
                *g += 2.0 * l2 * w;
            }
        }
        if !loss.is_finite() {
            return Err(NetError::NonFinite("loss".into()));
        }
        Ok((loss, grad))
    }

    /// Loss value only.
    pub fn loss(&self, batch: &[Sample<'_>], l2: f64) -> Result<f64, NetError> {
        if batch.is_empty() {
            return Err(NetError::Shape("empty batch".into()));
        }
        let mut total = 0.0;
        for s in batch {
            check_targets(s)?;
            let t = self.run(s.features)?;
            total += sample_loss(&t, s);
        }
        let mut loss = total / batch.len() as f64;
        loss += l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok(loss)
    }

    fn accumulate_sample(&self, s: &Sample<'_>, scale: f64, grad: &mut [f64]) -> Result<f64, NetError> {
        check_targets(s)?;
        let t = self.run(s.features)?;
        let loss = sample_loss(&t, s);
        let p = &self.weights;
        let [l0, l1, l2, l3, l4, l5] = self.shape.offsets();
        let h = self.shape.hidden;
        let rows = t.rows;
        let f = s.features;

        let mut dg = vec![0.0; 2 * h];

        // value head
        let ds = scale * 2.0 * (t.value - s.value) * (1.0 - t.value * t.value);
        let w5 = l5.weights(p);
        grad[l5.b] += ds;
        let mut dq = vec![0.0; h];
        for j in 0..h {
            grad[l5.w + j] += ds * t.c[j];
            if t.c[j] > 0.0 {
                dq[j] = ds * w5[j];
            }
        }
        let w4 = l4.weights(p);
        for i in 0..2 * h {
            let gi = t.g[i];
            let row = &w4[i * h..(i + 1) * h];
            let gw = &mut grad[l4.w + i * h..l4.w + (i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gw[j] += gi * dq[j];
                acc += row[j] * dq[j];
            }
            dg[i] += acc;
        }
        for j in 0..h {
            grad[l4.b + j] += dq[j];
        }

        // policy head; dlogit = scale * (p - π) since Σπ = 1
        let w2 = l2.weights(p);
        let w3 = l3.weights(p);
        let mut du_sum = vec![0.0; h];
        let mut de = vec![0.0; rows * h];
        let mut du = vec![0.0; h];
        for r in 0..rows {
            let dl = scale * (t.policy[r] - s.policy[r]);
            grad[l3.b] += dl;
            let ar = &t.a[r * h..(r + 1) * h];
            for j in 0..h {
                grad[l3.w + j] += dl * ar[j];
                du[j] = if ar[j] > 0.0 { dl * w3[j] } else { 0.0 };
                du_sum[j] += du[j];
            }
            let er = &t.e[r * h..(r + 1) * h];
            let der = &mut de[r * h..(r + 1) * h];
            for i in 0..h {
                let row = &w2[i * h..(i + 1) * h];
                let mut acc = 0.0;
                for j in 0..h {
                    acc += row[j] * du[j];
                }
                der[i] += acc;
                let ei = er[i];
                if ei != 0.0 {
                    let gw = &mut grad[l2.w + i * h..l2.w + (i + 1) * h];
                    for j in 0..h {
                        gw[j] += ei * du[j];
                    }
                }
            }
        }
        for j in 0..h {
            grad[l2.b + j] += du_sum[j];
        }
        for i in 0..2 * h {
            let gi = t.g[i];
            let row = &w2[(h + i) * h..(h + i + 1) * h];
            let gw = &mut grad[l2.w + (h + i) * h..l2.w + (h + i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gw[j] += gi * du_sum[j];
                acc += row[j] * du_sum[j];
            }
            dg[i] += acc;
        }

        // pooling
        let inv = 1.0 / rows as f64;
        for r in 0..rows {
            for j in 0..h {
                de[r * h + j] += dg[j] * inv;
            }
        }
        for j in 0..h {
            de[t.argmax[j] * h + j] += dg[h + j];
        }

        // embedding
        let w1 = l1.weights(p);
        let mut dpre = vec![0.0; h];
        let mut dh = vec![0.0; h];
        for r in 0..rows {
            let er = &t.e[r * h..(r + 1) * h];
            for j in 0..h {
                dpre[j] = if er[j] > 0.0 { de[r * h + j] } else { 0.0 };
                grad[l1.b + j] += dpre[j];
            }
            let hr = &t.h1[r * h..(r + 1) * h];
            for i in 0..h {
                let row = &w1[i * h..(i + 1) * h];
                let mut acc = 0.0;
                for j in 0..h {
                    acc += row[j] * dpre[j];
                }
                dh[i] = if hr[i] > 0.0 { acc } else { 0.0 };
                let hi = hr[i];
                if hi != 0.0 {
                    let gw = &mut grad[l1.w + i * h..l1.w + (i + 1) * h];
                    for j in 0..h {
                        gw[j] += hi * dpre[j];
                    }
                }
            }
            let x = f.row(r);
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let gw = &mut grad[l0.w + i * h..l0.w + (i + 1) * h];
                    for j in 0..h {
                        gw[j] += xi * dh[j];
                    }
                }
            }
            for j in 0..h {
                grad[l0.b + j] += dh[j];
            }
        }
        Ok(loss)
    }

    /// One Adam step on the given gradient.
    pub fn adam_step(&mut self, grads: &[f64], lr: f64) -> Result<(), NetError> {
        let NetParams { weights, adam, .. } = self;
        adam.update(weights, grads, lr)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|x| x.is_finite())
    }
}

fn check_targets(s: &Sample<'_>) -> Result<(), NetError> {
    if s.policy.len() != s.features.rows() {
        return Err(NetError::Shape(format!(
            "{} policy targets for {} action rows",
            s.policy.len(),
            s.features.rows()
        )));
    }
    let sum: f64 = s.policy.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || s.policy.iter().any(|&p| p < 0.0) {
        return Err(NetError::Shape(format!("policy target sums to {sum}")));
    }
    Ok(())
}

fn sample_loss(t: &Trace, s: &Sample<'_>) -> f64 {
    // log-softmax from the logits keeps tiny probabilities exact
    let top = t.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + t.logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let ce: f64 = s
        .policy
        .iter()
        .zip(&t.logits)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &l)| -pi * (l - lse))
        .sum();
    ce + (t.value - s.value).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_features(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(0.0..1.5)).collect();
        FeatureMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        let s = NetShape::new(10, 64);
        assert_eq!(
            s.param_count(),
            (10 * 64 + 64) + (64 * 64 + 64) + (192 * 64 + 64) + 65 + (128 * 64 + 64) + 65
        );
    }

    #[test]
    fn single_row_policy_is_one() {
        let net = NetParams::init(NetShape::new(10, 16), 3);
        let out = net.forward(&random_features(1, 10, 1)).unwrap();
        assert_eq!(out.policy, vec![1.0]);
        assert!(out.value > -1.0 && out.value < 1.0);
    }

    #[test]
    fn duplicated_rows_keep_value_and_split_mass() {
        let net = NetParams::init(NetShape::new(10, 32), 5);
        let f = random_features(7, 10, 2);
        let twice = f.permuted(&(0..14).map(|i| i % 7).collect::<Vec<_>>());
        let a = net.forward(&f).unwrap();
        let b = net.forward(&twice).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        for r in 0..7 {
            assert!((b.policy[r] - b.policy[r + 7]).abs() < 1e-15);
            assert!((2.0 * b.policy[r] - a.policy[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_width_is_rejected() {
        let net = NetParams::init(NetShape::new(13, 8), 0);
        assert!(matches!(
            net.forward(&random_features(3, 10, 0)),
            Err(NetError::Shape(_))
        ));
    }

    #[test]
    fn nonfinite_input_is_reported() {
        let net = NetParams::init(NetShape::new(2, 4), 0);
        let f = FeatureMatrix::new(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(net.forward(&f), Err(NetError::NonFinite(_))));
    }

    #[test]
    fn matching_targets_leave_entropy_plus_penalty() {
        let net = NetParams::init(NetShape::new(10, 16), 8);
        let f = random_features(5, 10, 9);
        let out = net.forward(&f).unwrap();
        let s = Sample {
            features: &f,
            policy: &out.policy,
            value: out.value,
        };
        let entropy: f64 = out.policy.iter().map(|p| -p * p.ln()).sum();
        let l2: f64 = 1e-4 * net.weights.iter().map(|w| w * w).sum::<f64>();
        let loss = net.loss(&[s], 1e-4).unwrap();
        assert!((loss - (entropy + l2)).abs() < 1e-12);
    }

    #[test]
    fn mismatched_targets_are_rejected() {
        let net = NetParams::init(NetShape::new(10, 8), 0);
        let f = random_features(3, 10, 0);
        let bad = [0.5, 0.5];
        let s = Sample {
            features: &f,
            policy: &bad,
            value: 1.0,
        };
        assert!(matches!(net.loss_and_grad(&[s], 0.0), Err(NetError::Shape(_))));
    }

    #[test]
    fn gradient_sign_predicts_loss_change() {
        let net = NetParams::init(NetShape::new(10, 8), 21);
        let f = random_features(4, 10, 22);
        let target = [0.1, 0.2, 0.3, 0.4];
        let s = Sample {
            features: &f,
            policy: &target,
            value: -1.0,
        };
        let (base, grad) = net.loss_and_grad(&[s], 0.0).unwrap();
        let i = grad
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let mut moved = net.clone();
        moved.weights[i] += 1e-4 * grad[i].signum();
        assert!(moved.loss(&[s], 0.0).unwrap() > base);
    }

    #[test]
    fn adam_zero_gradient_only_counts() {
        let mut net = NetParams::init(NetShape::new(10, 8), 1);
        let before = net.weights.clone();
        let zeros = vec![0.0; before.len()];
        net.adam_step(&zeros, 1e-3).unwrap();
        assert_eq!(net.weights, before);
        assert_eq!(net.step(), 1);
    }

    #[test]
    fn adam_on_a_scalar_quadratic() {
        // reference trajectory computed by an independent scalar simulation
        let mut x = [1.0];
        let mut opt = Adam::new(1);
        let mut first_hit = None;
        for t in 1..=200 {
            let g = [2.0 * x[0]];
            opt.update(&mut x, &g, 0.1).unwrap();
            if first_hit.is_none() && x[0].abs() < 0.01 {
                first_hit = Some((t, x[0]));
            }
        }
        let (t, v) = first_hit.unwrap();
        assert_eq!(t, 11);
        assert!((v - 0.005131501948057199).abs() < 1e-12);
        assert!((x[0] - -7.21798647770884e-06).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_nonfinite_gradients() {
        let mut x = vec![1.0, 2.0];
        let mut opt = Adam::new(2);
        assert!(opt.update(&mut x, &[f64::INFINITY, 0.0], 0.1).is_err());
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut a = NetParams::init(NetShape::new(10, 8), 4);
        let mut b = NetParams::init(NetShape::new(10, 8), 4);
        let f = random_features(6, 10, 4);
        let target = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let s = Sample {
            features: &f,
            policy: &target,
            value: 1.0,
        };
        for _ in 0..5 {
            let (_, ga) = a.loss_and_grad(&[s], 1e-4).unwrap();
            let (_, gb) = b.loss_and_grad(&[s], 1e-4).unwrap();
            a.adam_step(&ga, 1e-3).unwrap();
            b.adam_step(&gb, 1e-3).unwrap();
        }
        assert_eq!(a, b);
    }
}
