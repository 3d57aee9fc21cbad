//! Where a dipole in the thin crystal film sends its power, and how much an
//! objective above the chip collects.

use molguide::stratified::{
    collection_efficiency, power_budget, radiation_pattern, DipoleSource, LayerStack, RadiationConfig,
};

fn main() -> molguide::Result<()> {
    let cfg = RadiationConfig::default();
    let stack = LayerStack::chip(100.0)?;
    for (label, o) in [("horizontal", [1.0, 0.0, 0.0]), ("vertical", [0.0, 0.0, 1.0])] {
        let dipole = DipoleSource::in_crystal(785.0, 100.0, 30.0, o)?;
        let b = power_budget(&stack, &dipole, &cfg)?;
        println!("{label}: total rate {:.4}, up {:.4}, down {:.4}, trapped {:.4}", b.total, b.up, b.down, b.trapped);
        for na in [0.6, 0.75, 0.9] {
            println!("  NA {na}: collected {:.2}%", 100.0 * collection_efficiency(&stack, &dipole, na, &cfg)?);
        }
    }
    let dipole = DipoleSource::in_crystal(785.0, 100.0, 30.0, [1.0, 0.0, 0.0])?;
    let (up, down) = radiation_pattern(&stack, &dipole, &RadiationConfig { angular_step_deg: 5.0, ..cfg })?;
    println!("pattern power: up {:.4}, down {:.4}", up.total_power(), down.total_power());
    Ok(())
}
