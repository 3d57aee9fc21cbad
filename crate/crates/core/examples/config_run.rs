//! Runs the budget report from the bundled device configuration into a
//! temporary directory and audits the manifest.

use molguide::cli::{load_config, run_command, self_audit, Command};

fn main() -> molguide::Result<()> {
    let loaded = load_config(None, &[("emitter".to_string(), 7)], true)?;
    let out = std::env::temp_dir().join("molguide-config-run");
    let manifest = run_command(Command::BudgetReport, &loaded, &out)?;
    println!("config digest {}", manifest.config_digest);
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, o.path);
    }
    let audit = self_audit(&out)?;
    println!("audit clean: {}", audit.is_clean());
    Ok(())
}
