//! Efficiency budget of the reference device and its derived quantities.

use molguide::budget::{budget_report, EfficiencyBudget};

fn main() -> molguide::Result<()> {
    let report = budget_report(&EfficiencyBudget::reference_device(), &EfficiencyBudget::best_device())?;
    report.write_text(&mut std::io::stdout()).expect("stdout");
    Ok(())
}
