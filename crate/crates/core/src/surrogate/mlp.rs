//! Fully connected network with tanh hidden layers and a linear output layer, trained
//! full-batch with Adam on normalized pairs.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-component affine map to zero mean and unit spread.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| v * s + m).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub target_cost: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 20_000,
            target_cost: 1e-8,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.hidden.iter().any(|&h| h == 0) {
            errs.push("hidden layer sizes must be positive".to_string());
        }
        if !(self.learning_rate > 0.0) {
            errs.push(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            errs.push("decay rates must lie in [0, 1)".to_string());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            errs.push(format!("held-out fraction must lie in [0, 1), got {}", self.holdout_fraction));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(errs.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecord {
    pub epochs: usize,
    pub final_cost: f64,
    /// Max abs output error on the held-out samples, in output units; NaN when none.
    pub held_out_error: f64,
    pub held_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    /// Input lies more than 10% of the training box outside it.
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// Per layer, row-major weights (`out x in`) followed by biases.
    pub params: Vec<f64>,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    pub record: TrainingRecord,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// Forward pass keeping every layer activation (input first).
fn forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = vec![x.to_vec()];
    let mut off = 0;
    let last = sizes.len() - 2;
    for (l, w) in sizes.windows(2).enumerate() {
        let (ni, no) = (w[0], w[1]);
        let a = &acts[l];
        let wts = &params[off..off + no * ni];
        let b = &params[off + no * ni..off + no * (ni + 1)];
        let z: Vec<f64> = (0..no)
            .map(|o| {
                let row = &wts[o * ni..(o + 1) * ni];
                let s = row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() + b[o];
                if l == last {
                    s
                } else {
                    s.tanh()
                }
            })
            .collect();
        acts.push(z);
        off += no * (ni + 1);
    }
    acts
}

/// Mean squared error over all pairs and components, and its gradient.
pub fn cost_and_gradient(sizes: &[usize], params: &[f64], xs: &[Vec<f64>], ys: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let nl = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(nl);
    let mut off = 0;
    for w in sizes.windows(2) {
        offsets.push(off);
        off += w[1] * (w[0] + 1);
    }
    let norm = 1.0 / (xs.len() * sizes[nl]) as f64;
    let mut grad = vec![0.0; params.len()];
    let mut cost = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let acts = forward(sizes, params, x);
        let mut delta: Vec<f64> = acts[nl]
            .iter()
            .zip(y)
            .map(|(a, t)| {
                cost += (a - t) * (a - t) * norm;
                2.0 * (a - t) * norm
            })
            .collect();
        for l in (0..nl).rev() {
            let (ni, no) = (sizes[l], sizes[l + 1]);
            let o = offsets[l];
            let a = &acts[l];
            for r in 0..no {
                let g = &mut grad[o + r * ni..o + (r + 1) * ni];
                for (gv, av) in g.iter_mut().zip(a) {
                    *gv += delta[r] * av;
                }
                grad[o + no * ni + r] += delta[r];
            }
            if l > 0 {
                let wts = &params[o..o + no * ni];
                delta = (0..ni)
                    .map(|c| {
                        let s: f64 = (0..no).map(|r| wts[r * ni + c] * delta[r]).sum();
                        s * (1.0 - a[c] * a[c])
                    })
                    .collect();
            }
        }
    }
    (cost, grad)
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let lim = (6.0 / (w[0] + w[1]) as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-lim..lim)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
            input_norm: Normalizer::identity(sizes[0]),
            output_norm: Normalizer::identity(sizes[sizes.len() - 1]),
            input_lo: vec![f64::NEG_INFINITY; sizes[0]],
            input_hi: vec![f64::INFINITY; sizes[0]],
            record: TrainingRecord {
                epochs: 0,
                final_cost: f64::NAN,
                held_out_error: f64::NAN,
                held_out: 0,
            },
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_inputs() {
            return Err(Error::Argument(format!("expected {} inputs, got {}", self.n_inputs(), x.len())));
        }
        let z = self.input_norm.normalize(x);
        let acts = forward(&self.sizes, &self.params, &z);
        let values = self.output_norm.denormalize(&acts[acts.len() - 1]);
        let extrapolated = x.iter().zip(&self.input_lo).zip(&self.input_hi).any(|((v, lo), hi)| {
            let margin = 0.1 * (hi - lo);
            *v < lo - margin || *v > hi + margin
        });
        Ok(Prediction { values, extrapolated })
    }

    /// Central-difference Jacobian `∂out_i/∂in_j` of the prediction.
    pub fn jacobian(&self, x: &[f64], delta: f64) -> Result<Vec<Vec<f64>>> {
        if !(delta > 0.0) {
            return Err(Error::Argument(format!("difference step must be positive, got {delta}")));
        }
        let mut jac = vec![vec![0.0; x.len()]; self.n_outputs()];
        for j in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += delta;
            xm[j] -= delta;
            let (yp, ym) = (self.predict(&xp)?.values, self.predict(&xm)?.values);
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = (yp[i] - ym[i]) / (2.0 * delta);
            }
        }
        Ok(jac)
    }
}

/// Trains on `(xs, ys)`, holding out a seeded random fraction for the error report.
pub fn train(xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &TrainConfig) -> Result<Mlp> {
    cfg.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "training needs matching nonempty inputs and outputs ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let (ni, no) = (xs[0].len(), ys[0].len());
    if xs.iter().any(|x| x.len() != ni) || ys.iter().any(|y| y.len() != no) {
        return Err(Error::Argument("ragged training data".into()));
    }
    let mut sizes = vec![ni];
    sizes.extend(&cfg.hidden);
    sizes.push(no);
    let mut model = Mlp::init(&sizes, cfg.seed);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = ((xs.len() as f64) * cfg.holdout_fraction).round() as usize;
    let n_hold = n_hold.min(xs.len() - 1);
    let (held, fit) = order.split_at(n_hold);

    let fit_x: Vec<Vec<f64>> = fit.iter().map(|&k| xs[k].clone()).collect();
    let fit_y: Vec<Vec<f64>> = fit.iter().map(|&k| ys[k].clone()).collect();
    model.input_norm = Normalizer::fit(&fit_x);
    model.output_norm = Normalizer::fit(&fit_y);
    model.input_lo = (0..ni).map(|j| xs.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min)).collect();
    model.input_hi = (0..ni).map(|j| xs.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let zx: Vec<Vec<f64>> = fit_x.iter().map(|x| model.input_norm.normalize(x)).collect();
    let zy: Vec<Vec<f64>> = fit_y.iter().map(|y| model.output_norm.normalize(y)).collect();

    let np = model.params.len();
    let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    let mut epoch = 0;
    let mut cost;
    loop {
        let (c, g) = cost_and_gradient(&sizes, &model.params, &zx, &zy);
        cost = c;
        if !cost.is_finite() {
            return Err(Error::Training { epoch, cost });
        }
        if cost < cfg.target_cost || epoch == cfg.max_epochs {
            break;
        }
        epoch += 1;
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for k in 0..np {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let mh = m[k] / (1.0 - b1t);
            let vh = v[k] / (1.0 - b2t);
            model.params[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }

    let mut held_err = if held.is_empty() { f64::NAN } else { 0.0 };
    for &k in held {
        let p = model.predict(&xs[k])?.values;
        for (a, b) in p.iter().zip(&ys[k]) {
            held_err = f64::max(held_err, (a - b).abs());
        }
    }
    model.record = TrainingRecord {
        epochs: epoch,
        final_cost: cost,
        held_out_error: held_err,
        held_out: held.len(),
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| vec![i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]))
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sizes = [2, 32, 32, 3];
        let model = Mlp::init(&sizes, 7);
        let xs = grid(5);
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[1], x[0].sin(), 1.0 - x[1]]).collect();
        let (_, g) = cost_and_gradient(&sizes, &model.params, &xs, &ys);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let k = rng.random_range(0..model.params.len());
            let h = 1e-6;
            let mut p = model.params.clone();
            p[k] += h;
            let cp = cost_and_gradient(&sizes, &p, &xs, &ys).0;
            p[k] -= 2.0 * h;
            let cm = cost_and_gradient(&sizes, &p, &xs, &ys).0;
            let fd = (cp - cm) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-6), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn normalization_round_trips() {
        let rows = vec![vec![1.0, -3.0], vec![2.5, 7.0], vec![-0.25, 0.125]];
        let n = Normalizer::fit(&rows);
        for r in &rows {
            let back = n.denormalize(&n.normalize(r));
            assert!(r.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
        let z: Vec<Vec<f64>> = rows.iter().map(|r| n.normalize(r)).collect();
        for j in 0..2 {
            let m: f64 = z.iter().map(|r| r[j]).sum::<f64>() / 3.0;
            let s: f64 = z.iter().map(|r| r[j] * r[j]).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-14 && (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_map_is_learned() {
        let xs = grid(8);
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.1 * x[0] - 0.05 * x[1] + 0.02]).collect();
        let cfg = TrainConfig {
            hidden: vec![8],
            seed: 1,
            ..Default::default()
        };
        let model = train(&xs, &ys, &cfg).unwrap();
        assert!(model.record.held_out > 0);
        assert!(model.record.held_out_error <= 1e-4, "{:?}", model.record);
        let jac = model.jacobian(&[0.4, 0.6], 1e-6).unwrap();
        assert!((jac[0][0] - 0.1).abs() < 1e-3 && (jac[0][1] + 0.05).abs() < 1e-3, "{jac:?}");
    }

    #[test]
    fn training_is_reproducible() {
        let xs = grid(4);
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[0] - x[1]]).collect();
        let cfg = TrainConfig {
            hidden: vec![6, 6],
            max_epochs: 200,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(train(&xs, &ys, &cfg).unwrap(), train(&xs, &ys, &cfg).unwrap());
    }

    #[test]
    fn prediction_flags_extrapolation() {
        let xs = grid(4);
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0]]).collect();
        let cfg = TrainConfig {
            hidden: vec![4],
            max_epochs: 10,
            ..Default::default()
        };
        let m = train(&xs, &ys, &cfg).unwrap();
        assert!(!m.predict(&[1.05, 0.5]).unwrap().extrapolated);
        assert!(m.predict(&[1.2, 0.5]).unwrap().extrapolated);
        assert!(m.predict(&[0.5]).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let xs = grid(3);
        let ys: Vec<Vec<f64>> = xs.iter().map(|_| vec![f64::NAN]).collect();
        match train(
            &xs,
            &ys,
            &TrainConfig {
                hidden: vec![2],
                ..Default::default()
            },
        ) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("{other:?}"),
        }
    }
}
