//! Lowest-order hexahedral edge elements: tangential circulations of the
//! twelve basis functions along the reference edges, and the induction of
//! interpolated vector potentials.

use mae_rve::fem::{gauss_legendre, nedelec_eval, Discretization};
use mae_rve::mesh::{Mesh, LOCAL_EDGES, LOCAL_VERTICES};
use nalgebra::Vector3;

fn main() -> mae_rve::Result<()> {
    let (s, w) = gauss_legendre(3);
    println!("circulation of basis i along edge j (rows i, columns j):");
    for i in 0..12 {
        let row: Vec<String> = LOCAL_EDGES
            .iter()
            .map(|[a, b]| {
                let (pa, pb) = (LOCAL_VERTICES[*a], LOCAL_VERTICES[*b]);
                let t: [f64; 3] = std::array::from_fn(|d| pb[d] - pa[d]);
                let c: f64 = s
                    .iter()
                    .zip(&w)
                    .map(|(si, wi)| {
                        let x = std::array::from_fn(|d| pa[d] + 0.5 * (1.0 + si) * t[d]);
                        let v = nedelec_eval(x).0[i];
                        0.5 * wi * (v[0] * t[0] + v[1] * t[1] + v[2] * t[2])
                    })
                    .sum();
                format!("{:>3.0}", c + 0.0)
            })
            .collect();
        println!("{}", row.join(""));
    }

    let disc = Discretization::new(Mesh::unit_cube(3)?)?;
    let cases: [(&str, fn([f64; 3]) -> [f64; 3], Vector3<f64>); 3] = [
        ("A = (0.3, -1.2, 0.7)", |_| [0.3, -1.2, 0.7], Vector3::zeros()),
        ("A = (0, x, 0)", |p| [0.0, p[0], 0.0], Vector3::z()),
        ("A = (-y/2, x/2, 0)", |p| [-0.5 * p[1], 0.5 * p[0], 0.0], Vector3::z()),
    ];
    for (name, field, expected) in cases {
        let mut x = vec![0.0; disc.dofs.total()];
        disc.interpolate_a(&mut x, field);
        let mut worst: f64 = 0.0;
        for c in 0..disc.mesh.num_cells() {
            let (_, b) = disc.evaluate_point_state(c, &x, &Vector3::zeros(), [0.3, -0.5, 0.2])?;
            worst = worst.max((b - expected).norm());
        }
        println!("{name}: max |curl A - B_exact| over cells = {worst:.2e}");
    }
    Ok(())
}
