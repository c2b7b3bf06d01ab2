//! MRT and RZF on one drop, under both budgets, against the large-array
//! closed forms.

use lens_mimo::experiments::{budget_at, channels, small_area, Constraint};
use lens_mimo::precoding::{asymptotic_linear_rates, mrt, rates, rzf, scale_to_per_led, sinr, RateCoefficient};

fn main() -> lens_mimo::Result<()> {
    let cfg = small_area();
    let array = cfg.layout(cfg.m)?;
    let ch = channels(&cfg, &array, 0)?;
    let h = &ch.lens.h;
    let gamma = RateCoefficient::lower();
    for snr in [70.0, 90.0, 110.0] {
        let power = budget_at(Constraint::Total, snr, cfg.m).level();
        let p = budget_at(Constraint::PerLed, snr, cfg.m).level();
        let m = mrt(h, power)?;
        let z = rzf(h, power, h.nrows() as f64 / power)?;
        for (name, pre) in [("mrt", &m), ("rzf", &z)] {
            let total = rates(&sinr(h, &pre.w), gamma);
            let capped = rates(&sinr(h, &scale_to_per_led(pre, p)?.w), gamma);
            println!(
                "{snr:>5} dB {name}: total [{:.2}, {:.2}] bits, per-LED [{:.2}, {:.2}] bits",
                total.r_lb, total.r_ub, capped.r_lb, capped.r_ub
            );
        }
        if ch.lens.g.iter().all(|&g| g > 0.0) {
            let (am, ar) = asymptotic_linear_rates(&ch.lens.g, cfg.m, power, gamma.value())?;
            println!("          large-array forms: mrt {:.2}, rzf {:.2} (natural log)", am, ar);
        }
    }
    Ok(())
}
