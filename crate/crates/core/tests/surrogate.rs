use porohyper::surrogate::{
    adaptive_sample, dataset_from_str, dataset_to_string, model_from_str, model_to_string, replay, surrogate_tangents, train, Axis,
    Dataset, Mlp, Normalizer, SamplerConfig, TrainConfig,
};
use porohyper::Error;
use proptest::prelude::*;

fn cubic_dataset() -> Dataset {
    adaptive_sample(&Axis::new("x", 0.0, 1.0, 0.25), &[], &["y"], &SamplerConfig::default(), || {
        |x: &[f64]| Ok(vec![x[0].powi(3)])
    })
    .unwrap()
}

/// Independent replay of the acceptance rule along each line.
fn replay_violations(ds: &Dataset, tol: f64) -> usize {
    let mut bad = 0;
    let lines = ds.samples.iter().map(|s| s.line).max().map_or(0, |l| l + 1);
    for line in 0..lines {
        let pts: Vec<_> = ds.samples.iter().filter(|s| s.line == line).collect();
        for k in 2..pts.len() {
            if pts[k].flagged {
                continue;
            }
            let (a, b, c) = (pts[k - 2], pts[k - 1], pts[k]);
            let s = (c.input[0] - b.input[0]) / (b.input[0] - a.input[0]);
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for o in 0..c.output.len() {
                let e = b.output[o] + s * (b.output[o] - a.output[o]);
                num = num.max((c.output[o] - e).abs());
                den += c.output[o] * c.output[o];
            }
            if num / den.sqrt().max(1e-8) > tol {
                bad += 1;
            }
        }
    }
    bad
}

#[test]
fn linear_oracle_keeps_the_default_grid() {
    let ds = adaptive_sample(
        &Axis::new("x", 0.0, 1.0, 0.25),
        &[],
        &["y"],
        &SamplerConfig {
            tol: 1e-9,
            ..Default::default()
        },
        || |x: &[f64]| Ok(vec![2.0 * x[0]]),
    )
    .unwrap();
    let xs: Vec<f64> = ds.samples.iter().map(|s| s.input[0]).collect();
    assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn cubic_refinement_concentrates_where_curvature_is_high() {
    let ds = cubic_dataset();
    assert_eq!(replay_violations(&ds, 1e-3), 0);
    assert!(replay(&ds, &SamplerConfig::default()).is_empty());
    ds.check().unwrap();
    let count = |lo: f64, hi: f64| ds.samples.iter().filter(|s| s.input[0] >= lo && s.input[0] <= hi).count();
    let (top, bottom) = (count(0.75, 1.0), count(0.0, 0.25));
    assert!(top >= 2 * bottom, "top quartile {top}, bottom quartile {bottom}");
}

#[test]
fn cubic_surrogate_generalizes() {
    let ds = cubic_dataset();
    let model = train(&ds.inputs(), &ds.outputs(), &TrainConfig::default()).unwrap();
    assert!(model.record.held_out > 0);
    assert!(
        model.record.held_out_error <= 1e-3,
        "held-out error {}",
        model.record.held_out_error
    );
    for s in &ds.samples {
        assert!((model.predict(&s.input).unwrap().values[0] - s.output[0]).abs() <= 1e-2);
    }
    let g: Vec<f64> = [1e-5, 1e-6, 1e-7]
        .iter()
        .map(|&d| model.jacobian(&[0.6], d).unwrap()[0][0])
        .collect();
    for v in &g[1..] {
        assert!((v - g[0]).abs() <= 1e-3 * g[0].abs(), "{g:?}");
    }
    assert!(matches!(model.predict(&[0.1, 0.2]), Err(Error::Argument(_))));
}

#[test]
fn affine_model_tangents_are_exact() {
    let mut m = Mlp::init(&[2, 3], 1);
    let w = [0.5, -1.0, 2.0, 0.25, -0.75, 3.0];
    m.params = w.iter().copied().chain([0.1, 0.2, 0.3]).collect();
    m.input_norm = Normalizer::identity(2);
    m.output_norm = Normalizer::identity(3);
    m.input_lo = vec![-1.0, -1.0];
    m.input_hi = vec![1.0, 1.0];
    let (dg, dp) = surrogate_tangents(&m, &[0.3, -0.2], 1e-6).unwrap();
    for k in 0..3 {
        assert!((dg[k] - w[2 * k]).abs() <= 1e-6);
        assert!((dp[k] - w[2 * k + 1]).abs() <= 1e-6);
    }
}

#[test]
fn grid_lines_are_deterministic() {
    let moving = Axis::new("g", -0.3, 0.0, 0.05);
    let fixed = [Axis::new("p", 0.0, 0.2, 0.1)];
    let oracle = || |x: &[f64]| Ok(vec![x[0] + x[0].powi(3) * (1.0 + x[1]), x[1] * x[0].exp()]);
    let a = adaptive_sample(&moving, &fixed, &["a", "b"], &SamplerConfig::default(), oracle).unwrap();
    let b = adaptive_sample(&moving, &fixed, &["a", "b"], &SamplerConfig::default(), oracle).unwrap();
    assert_eq!(dataset_to_string(&a), dataset_to_string(&b));
    assert_eq!(a.samples.iter().map(|s| s.line).max(), Some(2));
    for s in &a.samples {
        assert_eq!(s.input[1], [0.0, 0.1, 0.2][s.line]);
    }
    assert_eq!(replay_violations(&a, 1e-3), 0);
    a.check().unwrap();
    let text = dataset_to_string(&a);
    assert_eq!(dataset_to_string(&dataset_from_str(&text).unwrap()), text);
}

#[test]
fn persisted_model_predicts_identically() {
    let xs: Vec<Vec<f64>> = (0..40).map(|k| vec![k as f64 / 39.0, (k % 7) as f64 / 6.0]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[1], x[0] - x[1], 0.5]).collect();
    let model = train(
        &xs,
        &ys,
        &TrainConfig {
            max_epochs: 200,
            ..Default::default()
        },
    )
    .unwrap();
    let back = model_from_str(&model_to_string(&model)).unwrap();
    for x in &xs {
        assert_eq!(back.predict(x).unwrap(), model.predict(x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..20), x in prop::collection::vec(-1e3f64..1e3, 3)) {
        let n = Normalizer::fit(&rows);
        let back = n.denormalize(&n.normalize(&x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn replay_holds_for_smooth_oracles(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.5f64..3.0) {
        let ds = adaptive_sample(&Axis::new("x", 0.0, 1.0, 0.1), &[], &["y"], &SamplerConfig::default(), move || {
            move |x: &[f64]| Ok(vec![a * x[0] + b * x[0] * x[0] + (c * x[0]).sin()])
        })
        .unwrap();
        prop_assert_eq!(replay_violations(&ds, 1e-3), 0);
    }
}
