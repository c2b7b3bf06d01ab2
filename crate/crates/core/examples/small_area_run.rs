//! Monte Carlo sum rates of every scheme in the small room; writes the report
//! to a temporary directory.

use lens_mimo::experiments::{run, small_area, Placement, ScenarioConfig};

fn main() -> lens_mimo::Result<()> {
    let cfg = ScenarioConfig {
        k: 8,
        snr_db: vec![70.0, 90.0, 110.0],
        placement: Placement::Random {
            seed: 1,
            realizations: 10,
        },
        ..small_area()
    };
    let report = run(&cfg)?;
    let dir = std::env::temp_dir().join("lens-mimo-small-area");
    report.emit(&dir)?;
    print!("{}", report.rates_csv());
    println!("written to {}", dir.display());
    Ok(())
}
