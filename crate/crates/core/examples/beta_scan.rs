//! Coupling factor versus emitter height above the ridge on a coarse grid.

use molguide::coupling::{beta_map, MapTemplate, ModeCache};
use molguide::modesolver::SolverConfig;

fn main() -> molguide::Result<()> {
    let template =
        MapTemplate { geometry: MapTemplate::default().geometry.with_grid(20.0, 20.0), ..Default::default() };
    let cache = ModeCache::new(SolverConfig::default());
    let map = beta_map(&template, &[20.0, 40.0, 60.0, 80.0], &[100.0], &cache)?;
    for c in &map.cells {
        match &c.result {
            Ok(r) => println!(
                "h {} nm, d_y {} nm: beta {:.4} (guided {:.4}, free {:.4})",
                c.h_nm, c.dy_nm, r.beta, r.gamma_wg_rel, r.gamma_free_rel
            ),
            Err(e) => println!("h {} nm, d_y {} nm: {e}", c.h_nm, c.dy_nm),
        }
    }
    Ok(())
}
