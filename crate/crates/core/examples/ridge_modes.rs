//! Guided modes of the reference nitride ridge under an organic crystal.

use molguide::modesolver::{group_index, solve_modes, RidgeGeometry};

fn main() -> molguide::Result<()> {
    let geometry = RidgeGeometry::default().with_grid(20.0, 20.0);
    let cs = geometry.cross_section()?;
    let modes = solve_modes(&cs, 785.0, 4)?;
    println!("{} guided mode(s) at 785 nm", modes.len());
    for (k, m) in modes.iter().enumerate() {
        let f = m.component_fractions();
        println!(
            "mode {k}: n_eff {:.5}, n_g {:.4}, |Ex|^2 share {:.3}, |Ez|^2 share {:.3}",
            m.n_eff, m.n_g, f[0], f[2]
        );
    }
    let ng = group_index(&cs, 785.0, 2.0)?;
    println!("group index by finite difference: {ng:.4}");
    Ok(())
}
