//! Covariance design by convex-concave iteration on a small drop, with the
//! objective trace and KKT residuals.

use lens_mimo::experiments::{budget_at, channels, small_area, Constraint, Placement, ScenarioConfig};
use lens_mimo::optim::{cccp, kkt_residual, CccpOptions};
use lens_mimo::precoding::GAMMA_LB;

fn main() -> lens_mimo::Result<()> {
    let cfg = ScenarioConfig {
        m: 8,
        k: 4,
        placement: Placement::Random {
            seed: 11,
            realizations: 1,
        },
        ..small_area()
    };
    let array = cfg.layout(cfg.m)?;
    let h = channels(&cfg, &array, 0)?.lens.h;
    let opts = CccpOptions {
        record_residuals: true,
        ..CccpOptions::default()
    };
    for c in [Constraint::Total, Constraint::PerLed] {
        let res = cccp(&h, budget_at(c, 100.0, cfg.m), GAMMA_LB, &opts)?;
        let kkt = kkt_residual(&h, &res.q, GAMMA_LB);
        println!(
            "{}: {:.3} bits after {} outer / {} inner steps, comp. slack {:.1e}",
            c.label(),
            res.rate(),
            res.outer_iterations,
            res.inner_iterations,
            kkt.comp_slack
        );
        for q in &res.q.q {
            let e = q.eigenvalues();
            print!("  rank-one ratio {:.1e}", if e[0] > 0.0 { e[1].abs() / e[0] } else { 0.0 });
        }
        println!();
        print!("{}", res.trace_csv());
    }
    Ok(())
}
