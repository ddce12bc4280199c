use porohyper::macroscale::{run_linear_reference, ColumnOptions, LinearPoroParams};

/// Classical one-dimensional consolidation: drained top, impermeable bottom, load
/// applied at t = 0. `z` is the distance from the drained face.
fn terzaghi(p0: f64, z: f64, h: f64, c: f64, t: f64) -> f64 {
    let tv = c * t / (h * h);
    (0..200)
        .map(|m| {
            let mm = std::f64::consts::PI * (2 * m + 1) as f64 / 2.0;
            2.0 * p0 / mm * (mm * z / h).sin() * (-mm * mm * tv).exp()
        })
        .sum()
}

#[test]
fn pressure_profiles_follow_series_solution() {
    let (lambda, mu, alpha, modulus, k) = (0.4, 0.4, 0.8, 3.0, 0.5);
    let params = LinearPoroParams::isotropic(lambda, mu, alpha, modulus, k).unwrap();
    let h = 1.0;
    let traction = -0.1;
    let dt = 2e-4;
    let opts = ColumnOptions {
        height: h,
        breadth: 0.05,
        divisions: [1, 50, 1],
        traction,
        dt,
        ramp_increments: 1,
        total_time: 0.3,
        max_steps: 100_000,
        steady_tol: 0.0,
        profile_every: 1,
        ..Default::default()
    };
    let series = run_linear_reference(&opts, params).unwrap();
    let cm = lambda + 2.0 * mu;
    let p0 = -traction * modulus * alpha / (alpha * alpha * modulus + cm);
    let c = k * cm * modulus / (cm + alpha * alpha * modulus);
    for target in [0.02, 0.08, 0.25] {
        let pr = series
            .profiles
            .iter()
            .min_by(|a, b| (a.time - target).abs().total_cmp(&(b.time - target).abs()))
            .unwrap();
        let worst = pr
            .nodes
            .iter()
            .map(|n| (n.p - terzaghi(p0, h - n.y, h, c, pr.time)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.02 * p0, "t = {}: error {worst} against p0 = {p0}", pr.time);
    }
}
