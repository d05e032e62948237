//! Periodic leader-follower constraints of a 2x2x2 RVE under a macroscopic
//! stretch: face pairings, the resolved constraint list, the anchor vertex
//! and the tree-cotree gauge of the vector potential.

use mae_rve::solver::{Materials, RveProblem};
use mae_rve::mesh::Mesh;
use nalgebra::{Matrix3, Vector3};

fn main() -> mae_rve::Result<()> {
    let p = RveProblem::new(Mesh::unit_cube(2)?, Materials::default())?;
    for (axis, ap) in ["x", "y", "z"].iter().zip(&p.pairing.axes) {
        println!("{axis}: {} vertex pairs, {} edge pairs", ap.vertex_pairs.len(), ap.edge_pairs.len());
    }
    let f = Matrix3::from_diagonal(&Vector3::new(1.1, 0.9, 1.0 / 0.99));
    let set = p.constraints(&f)?;
    let cond = p.condenser(&f)?;
    println!(
        "{} dofs, {} constraints, {} free; anchor vertex {}, {} gauge edges",
        p.num_dofs(),
        set.len(),
        cond.n_reduced(),
        p.gauge.anchor_vertex,
        p.gauge.gauge_edges.len()
    );
    let nu = p.disc.dofs.num_u;
    let mut out = Vec::new();
    set.dump(&mut out, |d| if d < nu { format!("u{}{}", d / 3, ["x", "y", "z"][d % 3]) } else { format!("a{}", d - nu) })?;
    let text = String::from_utf8_lossy(&out);
    println!("first displacement constraints:");
    for line in text.lines().filter(|l| l.starts_with('u')).take(12) {
        println!("  {line}");
    }
    Ok(())
}
