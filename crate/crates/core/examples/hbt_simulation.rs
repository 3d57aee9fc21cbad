//! Simulated single-molecule photon stream measured in a two-detector
//! correlation setup, with and without background.

use molguide::budget::Quantity;
use molguide::photostats::{
    apply_detection, fit_g2, g2_histogram, hbt_split, on_chip_purity, simulate_emitter, Detection, EmitterParams,
};

fn main() -> molguide::Result<()> {
    let params = EmitterParams { saturation_s: 0.2, ..Default::default() };
    let stream = simulate_emitter(&params, 1e7, 1)?;
    println!("emitted {:.2} MHz (expected {:.2} MHz)", stream.rate() / 1e6, params.expected_rate() / 1e6);
    let (a, b) = hbt_split(&stream, 2);
    for background in [0.0, 2.6e6] {
        let det = Detection { background_rate: background, ..Default::default() };
        let (da, db) = (apply_detection(&a, &det, 3)?, apply_detection(&b, &det, 4)?);
        let fit = fit_g2(&g2_histogram(&da, &db, 200, 50.0)?)?;
        let s_c = 0.5 * (da.rate() + db.rate());
        let corrected = on_chip_purity(
            &Quantity::new(fit.g2_zero, fit.se_g2_zero, "")?,
            &Quantity::exact(s_c, "Hz"),
            &Quantity::exact(background, "Hz"),
        )?;
        println!(
            "background {:.1} MHz/arm: g2(0) {:.3} +- {:.3}, T {:.2} ns, corrected {:.3}",
            background / 1e6,
            fit.g2_zero,
            fit.se_g2_zero,
            fit.t_ns,
            corrected.value
        );
    }
    Ok(())
}
