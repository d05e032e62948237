use mae_rve::fem::{gauss_legendre, lagrange_eval, nedelec_eval, Discretization, QuadratureRule};
use mae_rve::mesh::{pair_periodic_entities, Inclusion, Mesh, Phase, LOCAL_EDGES, LOCAL_VERTICES};
use nalgebra::{Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn homogeneous_grid_counts() {
    let m = Mesh::unit_cube(4).unwrap();
    assert_eq!(m.num_cells(), 64);
    assert_eq!(m.num_vertices(), 125);
    assert!(m.phase.iter().all(|&p| p == Phase::Matrix));
    // Edges of a 4x4x4 grid: 3 * 4 * 5 * 5.
    assert_eq!(m.num_edges(), 300);
}

#[test]
fn voxel_volume_fraction_approaches_sphere() {
    let inc = vec![Inclusion { center: [0.5; 3], radius: 0.2 }];
    let m = Mesh::build([16; 3], [1.0; 3], inc).unwrap();
    let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.008;
    assert!((m.analytic_volume_fraction() - exact).abs() < 1e-15);
    assert!((m.volume_fraction() - exact).abs() <= 0.15 * exact, "{}", m.volume_fraction());
}

#[test]
fn periodic_wrapping_of_inclusions() {
    let at = |c: [f64; 3]| Mesh::build([8; 3], [1.0; 3], vec![Inclusion { center: c, radius: 0.2 }]).unwrap().phase;
    assert_eq!(at([0.0; 3]), at([1.0; 3]));
    // A corner particle is split over the eight corner cells.
    let p = at([0.0; 3]);
    let m = Mesh::unit_cube(8).unwrap();
    for corner in [[0, 0, 0], [7, 0, 0], [0, 7, 0], [7, 7, 7]] {
        let c = corner[0] + 8 * (corner[1] + 8 * corner[2]);
        assert_eq!(p[c], Phase::Particle);
    }
    assert_eq!(m.num_cells(), p.len());
}

#[test]
fn invalid_geometry_is_rejected() {
    assert!(Mesh::build([1, 2, 2], [1.0; 3], vec![]).is_err());
    assert!(Mesh::build([2; 3], [1.0, -1.0, 1.0], vec![]).is_err());
    assert!(Mesh::build([4; 3], [1.0; 3], vec![Inclusion { center: [0.5; 3], radius: -0.1 }]).is_err());
    let overlap = vec![
        Inclusion { center: [0.3, 0.5, 0.5], radius: 0.2 },
        Inclusion { center: [0.6, 0.5, 0.5], radius: 0.2 },
    ];
    assert!(Mesh::build([4; 3], [1.0; 3], overlap).is_err());
    // Overlap through the periodic boundary.
    let wrapped = vec![
        Inclusion { center: [0.05, 0.5, 0.5], radius: 0.2 },
        Inclusion { center: [0.9, 0.5, 0.5], radius: 0.2 },
    ];
    assert!(Mesh::build([4; 3], [1.0; 3], wrapped).is_err());
}

#[test]
fn face_pairing_counts_and_corner_chain() {
    let m = Mesh::unit_cube(2).unwrap();
    let pairing = pair_periodic_entities(&m);
    for ap in &pairing.axes {
        assert_eq!(ap.vertex_pairs.len(), 9);
    }
    // 27 vertex pairs over the three axes before chains are collapsed.
    let total: usize = pairing.axes.iter().map(|a| a.vertex_pairs.len()).sum();
    assert_eq!(total, 27);

    let leaders = pairing.vertex_leaders(m.num_vertices());
    let corners: Vec<usize> = [0, 2]
        .iter()
        .flat_map(|&i| [0, 2].map(move |j| (i, j)))
        .flat_map(|(i, j)| [0, 2].map(move |k| (i, j, k)))
        .map(|(i, j, k)| m.vertex_id(i, j, k))
        .collect();
    let mut lead: Vec<usize> = corners.iter().map(|&c| leaders[c].leader).collect();
    lead.sort_unstable();
    lead.dedup();
    assert_eq!(lead, vec![m.vertex_id(0, 0, 0)]);
    // Leaders are the 8 vertices with all indices below n.
    let mut unique: Vec<usize> = leaders.iter().map(|l| l.leader).collect();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), 8);
}

#[test]
fn paired_edges_keep_their_orientation() {
    for n in [2, 3, 5] {
        let m = Mesh::unit_cube(n).unwrap();
        let pairing = pair_periodic_entities(&m);
        for (axis, ap) in pairing.axes.iter().enumerate() {
            assert!(!ap.edge_pairs.is_empty());
            for &(f, l, s) in &ap.edge_pairs {
                assert_eq!(s, 1.0);
                let (fa, fb) = (m.vertices[m.edges[f][0]], m.vertices[m.edges[f][1]]);
                let (la, lb) = (m.vertices[m.edges[l][0]], m.vertices[m.edges[l][1]]);
                for d in 0..3 {
                    let shift = if d == axis { 1.0 } else { 0.0 };
                    assert!((fa[d] - shift - la[d]).abs() < 1e-14);
                    assert!((fb[d] - shift - lb[d]).abs() < 1e-14);
                }
            }
        }
        // Leader edges: 3 n^3 on the torus.
        let el = pairing.edge_leaders(m.num_edges());
        assert_eq!((0..m.num_edges()).filter(|&e| el[e].leader == e).count(), 3 * n * n * n);
    }
}

#[test]
fn lagrange_basis_properties() {
    let (n, _) = lagrange_eval([0.0; 3]);
    assert!(n.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    for (a, r) in LOCAL_VERTICES.iter().enumerate() {
        let (n, _) = lagrange_eval(*r);
        for (b, v) in n.iter().enumerate() {
            assert_eq!(*v, if a == b { 1.0 } else { 0.0 });
        }
    }
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let xi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (n, g) = lagrange_eval(xi);
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for d in 0..3 {
            assert!(g.iter().map(|v| v[d]).sum::<f64>().abs() < 1e-14);
        }
    }
}

#[test]
fn nedelec_circulation_is_kronecker() {
    let (s, w) = gauss_legendre(4);
    for (j, [a, b]) in LOCAL_EDGES.iter().enumerate() {
        let (pa, pb) = (LOCAL_VERTICES[*a], LOCAL_VERTICES[*b]);
        let t: [f64; 3] = std::array::from_fn(|d| pb[d] - pa[d]);
        let mut circ = [0.0; 12];
        for (si, wi) in s.iter().zip(&w) {
            let x = std::array::from_fn(|d| pa[d] + 0.5 * (1.0 + si) * t[d]);
            let (v, _) = nedelec_eval(x);
            for i in 0..12 {
                circ[i] += 0.5 * wi * (v[i][0] * t[0] + v[i][1] * t[1] + v[i][2] * t[2]);
            }
        }
        for (i, c) in circ.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-14, "edge {j}, function {i}: {c}");
        }
    }
}

fn fields_everywhere(disc: &Discretization, x: &[f64], b_macro: Vector3<f64>) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    let mut out = Vec::new();
    for c in 0..disc.mesh.num_cells() {
        let local = disc.local_values(c, x);
        for g in &disc.geometry[c] {
            out.push(mae_rve::fem::fields_at(g, &local, &b_macro));
        }
    }
    out
}

#[test]
fn interpolated_potentials_reproduce_fields() {
    let disc = Discretization::new(Mesh::build([3, 2, 4], [1.0, 0.7, 1.3], vec![]).unwrap()).unwrap();
    let n = disc.dofs.total();

    // Constant potential: zero curl.
    let mut x = vec![0.0; n];
    disc.interpolate_a(&mut x, |_| [0.3, -1.2, 0.7]);
    for (_, b) in fields_everywhere(&disc, &x, Vector3::zeros()) {
        assert!(b.norm() < 1e-13);
    }
    // The constant is represented exactly at interior points too.
    let (f, b) = disc.evaluate_point_state(5, &x, &Vector3::zeros(), [0.3, -0.2, 0.1]).unwrap();
    assert_eq!(f, Matrix3::identity());
    assert!(b.norm() < 1e-13);

    // A = (0, x, 0) has curl e_z.
    let mut x = vec![0.0; n];
    disc.interpolate_a(&mut x, |p| [0.0, p[0], 0.0]);
    for (_, b) in fields_everywhere(&disc, &x, Vector3::zeros()) {
        assert!((b - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-13);
    }

    // Symmetric gauge (-y Bz / 2, x Bz / 2, 0).
    let bz = 0.25;
    let mut x = vec![0.0; n];
    disc.interpolate_a(&mut x, |p| [-0.5 * bz * p[1], 0.5 * bz * p[0], 0.0]);
    for (_, b) in fields_everywhere(&disc, &x, Vector3::zeros()) {
        assert!((b - Vector3::new(0.0, 0.0, bz)).norm() < 1e-13);
    }
}

#[test]
fn affine_displacement_gives_uniform_gradient() {
    let disc = Discretization::new(Mesh::unit_cube(3).unwrap()).unwrap();
    let n = disc.dofs.total();
    let x0 = vec![0.0; n];
    for (f, b) in fields_everywhere(&disc, &x0, Vector3::zeros()) {
        assert_eq!(f, Matrix3::identity());
        assert_eq!(b, Vector3::zeros());
    }
    let g = Matrix3::from_diagonal(&Vector3::new(0.1, -0.1, 0.0));
    let mut x = vec![0.0; n];
    disc.interpolate_u(&mut x, |p| {
        let u = g * Vector3::from(p);
        [u[0], u[1], u[2]]
    });
    for (f, _) in fields_everywhere(&disc, &x, Vector3::zeros()) {
        assert!((f - Matrix3::identity() - g).norm() < 1e-14);
    }
}

#[test]
fn element_jacobian_average() {
    let disc = Discretization::new(Mesh::unit_cube(2).unwrap()).unwrap();
    let n = disc.dofs.total();
    let x = vec![0.0; n];
    assert_eq!(disc.cell_average_jacobian(0, &x).unwrap(), 1.0);

    let fm = Matrix3::from_diagonal(&Vector3::new(1.1, 0.9, 1.0 / 0.99));
    let mut x = vec![0.0; n];
    disc.interpolate_u(&mut x, |p| {
        let u = (fm - Matrix3::identity()) * Vector3::from(p);
        [u[0], u[1], u[2]]
    });
    for c in 0..disc.mesh.num_cells() {
        assert!((disc.cell_average_jacobian(c, &x).unwrap() - fm.determinant()).abs() < 1e-14);
    }

    // det F of a trilinear field is a polynomial of degree 2 per direction,
    // which 2x2x2 Gauss points integrate exactly: compare with 5x5x5.
    let mut rng = StdRng::seed_from_u64(5);
    let mut x = vec![0.0; n];
    for v in x.iter_mut().take(disc.dofs.num_u) {
        *v = rng.random_range(-0.02..0.02);
    }
    let fine = Discretization::with_rule(Mesh::unit_cube(2).unwrap(), QuadratureRule::gauss(5)).unwrap();
    for c in 0..disc.mesh.num_cells() {
        let a = disc.cell_average_jacobian(c, &x).unwrap();
        let b = fine.cell_average_jacobian(c, &x).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn inverted_element_is_reported() {
    let disc = Discretization::new(Mesh::unit_cube(2).unwrap()).unwrap();
    let mut x = vec![0.0; disc.dofs.total()];
    disc.interpolate_u(&mut x, |p| [-2.0 * p[0], 0.0, 0.0]);
    assert!(disc.cell_average_jacobian(0, &x).is_err());
}

#[test]
fn vtk_output_is_well_formed() {
    let m = Mesh::build([2; 3], [1.0; 3], vec![Inclusion { center: [0.25; 3], radius: 0.2 }]).unwrap();
    let u = vec![[0.0; 3]; m.num_vertices()];
    let s = vec![1.5; m.num_cells()];
    let mut buf = Vec::new();
    m.write_vtk(&mut buf, "test", &[("u", &u)], &[("sigma_zz", &s)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains("CELLS 8 72"));
    assert!(text.contains("VECTORS u double"));
    assert!(text.contains("SCALARS phase int 1"));
    assert!(text.contains("SCALARS sigma_zz double 1"));
    assert_eq!(text.lines().filter(|l| *l == "12").count(), 8);
}
