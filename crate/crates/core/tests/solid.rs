use porohyper::macroscale::LinearPoroParams;
use porohyper::material::{material_tangent, MaterialParams};
use porohyper::mesh::{generate_voxel_rve, periodic_pairs, PeriodicMap, RvePair};
use porohyper::solid::{biot_modulus, oat_sweep, MacroState, SolidCell, SolveOptions, SweepInput, TangentOptions};
use porohyper::tensor::Mat3;
use porohyper::Error;

fn cell() -> (RvePair, PeriodicMap) {
    let rve = generate_voxel_rve(8, 0.2).unwrap();
    let map = periodic_pairs(&rve.solid, &[0, 1, 2]).unwrap();
    (rve, map)
}

fn state(g22: f64, p: f64) -> MacroState {
    let mut h = Mat3::zeros();
    h[(1, 1)] = g22;
    MacroState::new(h, p)
}

fn rel(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

#[test]
fn rest_state_gives_zero_response() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let r = c.solve(&MacroState::zero(), &SolveOptions::default()).unwrap();
    assert!(r.avg_grad_u1.abs().max() <= 1e-12);
    assert!(r.psi_max <= 1e-12);
}

#[test]
fn converged_field_is_periodic_and_balanced() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let mut target = state(-0.1, 0.1);
    target.grad_u0[(0, 1)] = 0.05;
    let r = c.solve(&target, &SolveOptions::default()).unwrap();
    for (a, b) in map.all_pairs() {
        for d in 0..3 {
            assert!((r.u1[a][d] - r.u1[b][d]).abs() <= 1e-10);
        }
    }
    assert!(
        r.final_residual <= 1e-8 * r.first_residual,
        "{} vs {}",
        r.final_residual,
        r.first_residual
    );
}

#[test]
fn average_gradient_is_gauge_invariant() {
    let (rve, map) = cell();
    let params = MaterialParams::default();
    let target = state(-0.08, 0.05);
    let a = SolidCell::new(&rve.solid, &map, params).unwrap();
    let interior = (0..rve.solid.n_nodes())
        .find(|&n| rve.solid.nodes[n].iter().all(|&v| v > 0.2 && v < 0.8) && map.all_pairs().all(|(m, s)| m != n && s != n))
        .unwrap();
    assert_ne!(interior, a.pinned);
    let b = SolidCell::with_pinned(&rve.solid, &map, params, interior).unwrap();
    let ra = a.solve(&target, &SolveOptions::default()).unwrap();
    let rb = b.solve(&target, &SolveOptions::default()).unwrap();
    assert!((ra.avg_grad_u1 - rb.avg_grad_u1).abs().max() <= 1e-10);
}

#[test]
fn proportional_path_independence() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let target = state(-0.15, 0.15);
    let coarse = c
        .solve(
            &target,
            &SolveOptions {
                increments: 10,
                ..Default::default()
            },
        )
        .unwrap();
    let fine = c
        .solve(
            &target,
            &SolveOptions {
                increments: 20,
                ..Default::default()
            },
        )
        .unwrap();
    assert!((coarse.avg_grad_u1 - fine.avg_grad_u1).abs().max() <= 1e-6);
}

#[test]
fn pore_pressure_contracts_the_solid() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let r = c.solve(&state(0.0, 0.1), &SolveOptions::default()).unwrap();
    for i in 0..3 {
        assert!(r.avg_grad_u1[(i, i)] < 0.0, "{}", r.avg_grad_u1);
    }
    let d = [0, 1, 2].map(|i| r.avg_grad_u1[(i, i)]);
    assert!((d[0] - d[1]).abs() <= 1e-6 * d[0].abs() && (d[1] - d[2]).abs() <= 1e-6 * d[0].abs());
}

#[test]
fn small_load_matches_linearized_cell_problem() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let target = state(1e-4, 0.0);
    let zero = c.dofmap.zero_free();
    let (_, k) = c.system(&MacroState::zero(), &zero).unwrap();
    let r = c.residual(&target, &zero).unwrap();
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    let u = porohyper::fem::solve_linear(&porohyper::fem::SparseSystem { matrix: k, rhs: neg }).unwrap();
    let linear = c.average_gradient(&u).unwrap();
    let full = c.solve(&target, &SolveOptions::default()).unwrap().avg_grad_u1;
    assert!(rel(&full, &linear) <= 1e-3, "{full} vs {linear}");
}

#[test]
fn origin_tangents_are_consistent() {
    let (rve, map) = cell();
    let params = MaterialParams::default();
    let c = SolidCell::new(&rve.solid, &map, params).unwrap();
    let base = c.solve(&MacroState::zero(), &SolveOptions::default()).unwrap();
    let central = c.tangents(&base, &TangentOptions::default()).unwrap();
    let forward = c
        .tangents(
            &base,
            &TangentOptions {
                central: false,
                ..Default::default()
            },
        )
        .unwrap();
    let scale = central.m.max_abs();
    for a in 0..9 {
        for b in 0..9 {
            assert!((central.m.0[a][b] - forward.m.0[a][b]).abs() <= 1e-3 * scale);
        }
    }
    assert!(rel(&forward.q, &central.q) <= 1e-3);

    let m = &central.m;
    let m1111 = m.get(0, 0, 0, 0);
    for i in 1..3 {
        assert!((m.get(i, i, i, i) - m1111).abs() <= 0.01 * m1111.abs());
        assert!((central.q[(i, i)] - central.q[(0, 0)]).abs() <= 0.01 * central.q[(0, 0)].abs());
    }
    assert!(central.q[(0, 1)].abs() <= 1e-6 * central.q[(0, 0)].abs());
    assert!(central.q[(0, 0)] < 0.0);

    // Reciprocity: the Biot coefficient from the stress and from the mass balance agree.
    let vs = rve.solid_fraction();
    let stress_side = Mat3::identity() * rve.porosity - material_tangent(&Mat3::identity(), &params).unwrap().contract(&central.q) * vs;
    let mass_side = LinearPoroParams::mass_side_biot(&central, vs);
    assert!(rel(&mass_side, &stress_side) <= 0.02, "{stress_side} vs {mass_side}");

    let mb = biot_modulus(&central.q, vs).unwrap();
    assert!((mb + 1.0 / (vs * central.q.trace())).abs() <= 1e-12 * mb);
}

#[test]
fn biot_modulus_values() {
    assert!((biot_modulus(&(-Mat3::identity() / 3.0), 1.0).unwrap() - 1.0).abs() < 1e-15);
    let m = biot_modulus(&(-0.113 * Mat3::identity()), 0.71).unwrap();
    assert!((m - 1.0 / (3.0 * 0.71 * 0.113)).abs() < 1e-12);
    assert!((m - 4.16).abs() < 0.01);
    assert!(matches!(biot_modulus(&Mat3::zeros(), 0.7), Err(Error::DegenerateParameter(_))));
}

#[test]
fn shear_sweep_rows_match_cold_solves() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let opts = SolveOptions::default();
    let table = oat_sweep(&c, SweepInput::Gradient(0, 1), (0.0, 0.2), 4, None, &opts).unwrap();
    assert_eq!(table.rows.len(), 5);
    for row in &table.rows {
        assert!(row.error.is_none());
        let cold = c.solve(&SweepInput::Gradient(0, 1).state(row.input), &opts).unwrap();
        assert!((row.avg_grad_u1 - cold.avg_grad_u1).abs().max() <= 1e-8);
    }
    let d: Vec<f64> = table.rows.iter().map(|r| r.avg_grad_u1[(0, 0)]).collect();
    assert!(d[4].abs() > 1e-4, "{d:?}");
    // Even in the shear amount: doubling the input roughly quadruples the diagonal.
    assert!((d[4] / d[2]).abs() > 3.0, "{d:?}");

    let single = oat_sweep(&c, SweepInput::Pressure, (0.0, 0.0), 10, None, &opts).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.rows[0].avg_grad_u1.abs().max() <= 1e-12);
}

#[test]
fn exhausted_bisection_reports_progress() {
    let (rve, map) = cell();
    let c = SolidCell::new(&rve.solid, &map, MaterialParams::default()).unwrap();
    let opts = SolveOptions {
        increments: 1,
        max_bisections: 0,
        newton: porohyper::fem::NewtonOptions {
            max_iter: 2,
            ..Default::default()
        },
    };
    match c.solve(&state(-0.3, 0.3), &opts) {
        Err(Error::IncrementExhausted { converged_fraction, .. }) => assert!(converged_fraction < 1.0),
        other => panic!("expected exhausted increments, got {:?}", other.map(|r| r.avg_grad_u1)),
    }
    assert!(matches!(
        c.solve(&state(-1.0, 0.0), &SolveOptions::default()),
        Err(Error::Kinematic { .. })
    ));
}
