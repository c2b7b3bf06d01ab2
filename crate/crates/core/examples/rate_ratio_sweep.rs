//! Median ratio of beam-domain to lens-free rate as the array grows.

use lens_mimo::experiments::{small_area, sweep_m, Placement, ScenarioConfig};

fn main() -> lens_mimo::Result<()> {
    let cfg = ScenarioConfig {
        k: 4,
        snr_db: vec![110.0],
        placement: Placement::Random {
            seed: 3,
            realizations: 30,
        },
        ..small_area()
    };
    let report = sweep_m(&cfg, &[8, 16, 32, 48])?;
    print!("{}", report.ratios_csv());
    Ok(())
}
