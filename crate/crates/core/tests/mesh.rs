use std::collections::HashSet;

use porohyper::mesh::gmsh::{parse_mesh, read_mesh, write_mesh, write_mesh_string};
use porohyper::mesh::{generate_column_mesh, generate_voxel_rve, periodic_pairs, tags, Domain};
use porohyper::Error;
use proptest::prelude::*;

/// Independent voxel classification: centre of voxel `(i, j, k)` against the three
/// channel axes through the cube centre.
fn oracle_fluid_count(n: usize, r: f64) -> usize {
    let mut count = 0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let c = [i, j, k].map(|v| (v as f64 + 0.5) / n as f64 - 0.5);
                let axis_dist = [c[1].hypot(c[2]), c[0].hypot(c[2]), c[0].hypot(c[1])];
                if axis_dist.iter().any(|&d| d < r) {
                    count += 1;
                }
            }
        }
    }
    count
}

#[test]
fn porosity_matches_voxel_oracle() {
    let rve = generate_voxel_rve(40, 0.2).unwrap();
    let expected = oracle_fluid_count(40, 0.2) as f64 / 40f64.powi(3);
    assert!((rve.porosity - expected).abs() < 1e-12, "{} vs {expected}", rve.porosity);
    assert_eq!(rve.fluid.n_cells(), oracle_fluid_count(40, 0.2));
}

#[test]
fn default_cell_porosity() {
    let rve = generate_voxel_rve(20, 0.2).unwrap();
    assert!((rve.porosity - 0.29).abs() <= 0.02 * 0.29, "porosity {}", rve.porosity);
}

#[test]
fn porosity_converges_with_resolution() {
    let exact = porohyper::mesh::three_cylinder_fraction(0.2);
    let coarse = (generate_voxel_rve(10, 0.2).unwrap().porosity - exact).abs();
    let fine = (generate_voxel_rve(40, 0.2).unwrap().porosity - exact).abs();
    assert!(fine <= coarse, "n=40 error {fine} exceeds n=10 error {coarse}");
}

#[test]
fn unresolved_channel_is_a_geometry_error() {
    match generate_voxel_rve(8, 0.01) {
        Err(Error::Geometry(_)) => {}
        other => panic!("expected a geometry error, got {other:?}"),
    }
    assert!(generate_voxel_rve(4, 0.2).is_err());
    assert!(generate_voxel_rve(12, 0.6).is_err());
}

#[test]
fn interface_nodes_coincide() {
    let rve = generate_voxel_rve(12, 0.2).unwrap();
    assert!(!rve.interface.is_empty());
    for &(s, f) in &rve.interface {
        assert_eq!(rve.solid.nodes[s], rve.fluid.nodes[f]);
    }
    let solid: HashSet<usize> = rve.interface.iter().map(|p| p.0).collect();
    assert_eq!(solid.len(), rve.interface.len());
}

#[test]
fn periodic_pairs_match_brute_force() {
    let rve = generate_voxel_rve(10, 0.2).unwrap();
    let mesh = &rve.solid;
    let map = periodic_pairs(mesh, &[0, 1, 2]).unwrap();
    for axis in 0..3 {
        let mut expected = HashSet::new();
        for (a, pa) in mesh.nodes.iter().enumerate() {
            if pa[axis].abs() > 1e-12 {
                continue;
            }
            for (b, pb) in mesh.nodes.iter().enumerate() {
                let mut shifted = *pa;
                shifted[axis] += 1.0;
                if (0..3).all(|d| (shifted[d] - pb[d]).abs() < 1e-12) {
                    expected.insert((a, b));
                }
            }
        }
        let got: HashSet<(usize, usize)> = map.pairs_for(axis).unwrap().iter().copied().collect();
        assert_eq!(got, expected, "axis {axis}");
    }
}

#[test]
fn column_mesh_geometry() {
    let m = generate_column_mesh(7.5, 0.075, [1, 30, 1]).unwrap();
    assert_eq!(m.n_cells(), 30);
    let (lo, hi) = m.bounding_box();
    assert_eq!(lo, [0.0; 3]);
    assert!((hi[1] - 7.5).abs() < 1e-12);
    assert!(m.nodes_with_tag(tags::TOP).iter().all(|&n| (m.nodes[n][1] - 7.5).abs() < 1e-12));
    assert!(m.nodes_with_tag(tags::BOTTOM).iter().all(|&n| m.nodes[n][1] == 0.0));
    assert_eq!(m.domain, Domain::Macro);

    let m = generate_column_mesh(7.5, 0.1, [2, 60, 2]).unwrap();
    assert!((m.volume() - 0.075).abs() < 1e-12);
    m.validate().unwrap();
    assert!(generate_column_mesh(0.0, 1.0, [1, 1, 1]).is_err());
    assert!(generate_column_mesh(1.0, 1.0, [1, 0, 1]).is_err());
}

#[test]
fn gmsh_round_trip() {
    let rve = generate_voxel_rve(10, 0.2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for mesh in [&rve.solid, &rve.fluid] {
        let path = dir.path().join(format!("{}.msh", mesh.domain.name()));
        write_mesh(mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(&back, mesh);
        assert_eq!(write_mesh_string(&back), write_mesh_string(mesh));
    }
}

const ONE_HEX: &str = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
4
2 7 \"bottom\"
2 8 \"top\"
2 9 \"sides\"
3 5 \"macro\"
$EndPhysicalNames
$Nodes
8
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
5 0 0 1
6 1 0 1
7 1 1 1
8 0 1 1
$EndNodes
$Elements
7
1 3 2 7 7 1 2 6 5
2 3 2 8 8 4 8 7 3
3 3 2 9 9 1 5 8 4
4 3 2 9 9 2 3 7 6
5 3 2 9 9 1 4 3 2
6 3 2 9 9 5 6 7 8
7 5 2 5 1 1 2 3 4 5 6 7 8
$EndElements
";

#[test]
fn hand_written_hexahedron() {
    let m = parse_mesh(ONE_HEX).unwrap();
    assert_eq!(m.domain, Domain::Macro);
    assert_eq!(m.n_cells(), 1);
    assert!((m.volume() - 1.0).abs() < 1e-14);
    assert_eq!(m.nodes_with_tag(tags::BOTTOM).len(), 4);
    assert_eq!(m.nodes_with_tag(tags::TOP).len(), 4);
    assert_eq!(m.faces_with_tag(tags::SIDES).count(), 4);

    let missing_face = ONE_HEX.replace("7\n1 3 2 7", "6\n1 3 2 7").replace("6 3 2 9 9 5 6 7 8\n", "");
    assert!(matches!(parse_mesh(&missing_face), Err(Error::Parse { .. })));
    let truncated = &ONE_HEX[..ONE_HEX.find("$EndNodes").unwrap()];
    assert!(matches!(parse_mesh(truncated), Err(Error::Parse { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solid_and_fluid_partition_the_cell(n in 8usize..16, r in 0.12f64..0.4) {
        let rve = generate_voxel_rve(n, r).unwrap();
        prop_assert_eq!(rve.solid.n_cells() + rve.fluid.n_cells(), n * n * n);
        let total = rve.solid.volume() + rve.fluid.volume();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((rve.porosity - oracle_fluid_count(n, r) as f64 / (n * n * n) as f64).abs() < 1e-12);
    }

    #[test]
    fn periodic_map_is_a_lattice_bijection(n in 8usize..14, r in 0.12f64..0.4) {
        let rve = generate_voxel_rve(n, r).unwrap();
        for mesh in [&rve.solid, &rve.fluid] {
            let map = periodic_pairs(mesh, &[0, 1, 2]).unwrap();
            for axis in 0..3 {
                let pairs = map.pairs_for(axis).unwrap();
                let masters: HashSet<usize> = pairs.iter().map(|p| p.0).collect();
                let slaves: HashSet<usize> = pairs.iter().map(|p| p.1).collect();
                prop_assert_eq!(masters.len(), pairs.len());
                prop_assert_eq!(slaves.len(), pairs.len());
                for &(a, b) in pairs {
                    let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
                    for d in 0..3 {
                        let expected = if d == axis { 1.0 } else { 0.0 };
                        prop_assert!((pb[d] - pa[d] - expected).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
