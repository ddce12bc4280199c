use porohyper::fem::hex::FACE_AXES;
use porohyper::fluid::solve_stokes_cell;
use porohyper::mesh::{generate_column_mesh, generate_voxel_rve, periodic_pairs, tags, Domain, Mesh};
use porohyper::Error;

/// Fluid layer of gap `gap` between walls normal to the second axis, periodic along
/// the other two.
fn plane_channel(n: usize, gap: f64) -> Mesh {
    let mut m = generate_column_mesh(gap, 0.1, [2, n, 2]).unwrap();
    for f in &mut m.boundary_faces {
        let (axis, upper) = FACE_AXES[f.face];
        f.tag = if axis == 1 { tags::INTERFACE } else { tags::cube_side(axis, upper) };
    }
    m.domain = Domain::Fluid;
    m
}

#[test]
fn plane_channel_matches_poiseuille() {
    let (mu, gap) = (1e-3, 0.5);
    let mesh = plane_channel(20, gap);
    let periodic = periodic_pairs(&mesh, &[0, 2]).unwrap();
    let s = solve_stokes_cell(&mesh, &periodic, mu).unwrap();
    let exact = gap * gap / (12.0 * mu);
    for i in [0, 2] {
        let k = s.conductivity[(i, i)];
        assert!((k - exact).abs() <= 0.05 * exact, "K{i}{i} = {k}, expected {exact}");
    }
}

#[test]
fn cubic_cell_conductivity() {
    let rve = generate_voxel_rve(12, 0.2).unwrap();
    let periodic = periodic_pairs(&rve.fluid, &[0, 1, 2]).unwrap();
    let s = solve_stokes_cell(&rve.fluid, &periodic, 1e-3).unwrap();
    let k = s.conductivity;
    let d = [k[(0, 0)], k[(1, 1)], k[(2, 2)]];
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    for i in 0..3 {
        assert!(d[i] > 0.0);
        assert!((d[i] - d[0]).abs() <= 0.01 * d[0], "{d:?}");
        for j in 0..3 {
            if i != j {
                assert!(k[(i, j)].abs() <= 0.01 * dmax);
                assert!((k[(i, j)] - k[(j, i)]).abs() <= 0.02 * dmax);
            }
        }
    }
    assert!(k.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    assert!(s.interface_velocity_max <= 1e-10);
    for i in 0..3 {
        assert!(s.pressure_mean[i].abs() <= 1e-10 * s.velocity_max[i].max(1.0));
        assert!(s.net_divergence[i] <= 1e-8 * s.velocity_max[i]);
    }
}

#[test]
fn conductivity_scales_with_inverse_viscosity() {
    let rve = generate_voxel_rve(10, 0.2).unwrap();
    let periodic = periodic_pairs(&rve.fluid, &[0, 1, 2]).unwrap();
    let a = solve_stokes_cell(&rve.fluid, &periodic, 1e-3).unwrap().conductivity;
    let b = solve_stokes_cell(&rve.fluid, &periodic, 2e-3).unwrap().conductivity;
    for i in 0..3 {
        for j in 0..3 {
            assert!((a[(i, j)] - 2.0 * b[(i, j)]).abs() <= 1e-10 * a.abs().max());
        }
    }
}

#[test]
fn viscosity_must_be_positive() {
    let rve = generate_voxel_rve(8, 0.2).unwrap();
    let periodic = periodic_pairs(&rve.fluid, &[0, 1, 2]).unwrap();
    assert!(matches!(solve_stokes_cell(&rve.fluid, &periodic, 0.0), Err(Error::Argument(_))));
}
