//! Voxelized single-particle mesh: volume fraction against the sphere as the
//! grid is refined, and a VTK file with the phase map.
//!
//! `cargo run --example mesh_and_vtk -- [output.vtk]`

use std::fs::File;
use std::io::BufWriter;

use mae_rve::mesh::{Inclusion, Mesh};

fn main() -> mae_rve::Result<()> {
    let sphere = vec![Inclusion { center: [0.5; 3], radius: 0.2 }];
    println!("{:>6} {:>8} {:>10} {:>12} {:>10}", "n", "cells", "particle", "fraction", "exact");
    for n in [4, 8, 12, 16, 24, 32] {
        let m = Mesh::build([n; 3], [1.0; 3], sphere.clone())?;
        println!(
            "{n:>6} {:>8} {:>10} {:>12.5} {:>10.5}",
            m.num_cells(),
            m.particle_cells(),
            m.volume_fraction(),
            m.analytic_volume_fraction()
        );
    }

    // A particle at the corner wraps around the periodic boundary.
    let m = Mesh::build([16; 3], [1.0; 3], vec![Inclusion { center: [0.0; 3], radius: 0.3 }])?;
    let path = std::env::args().nth(1).unwrap_or_else(|| "out/mesh_corner_particle.vtk".into());
    if let Some(dir) = std::path::Path::new(&path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let u = vec![[0.0; 3]; m.num_vertices()];
    m.write_vtk(&mut BufWriter::new(File::create(&path)?), "corner particle", &[("u", &u)], &[])?;
    println!("wrote {path} ({} cells, {} in the particle)", m.num_cells(), m.particle_cells());
    Ok(())
}
