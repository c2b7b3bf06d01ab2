//! Greedy beam allocation and the water-filled dominant-beam design on one
//! drop, checked for orthogonality.

use lens_mimo::experiments::{budget_at, channels, small_area, Constraint};
use lens_mimo::optim::{asymptotic_design, beam_allocation_greedy, orthogonality_check, sum_rate_cov};
use lens_mimo::precoding::GAMMA_LB;

fn main() -> lens_mimo::Result<()> {
    let cfg = small_area();
    let array = cfg.layout(cfg.m)?;
    let ch = channels(&cfg, &array, 3)?;
    let h = &ch.lens.h;
    let n = h.ncols();
    for c in [Constraint::Total, Constraint::PerLed] {
        let budget = budget_at(c, 110.0, cfg.m);
        let alloc = beam_allocation_greedy(&h.map(|v| v * v), budget, cfg.b_max, GAMMA_LB)?;
        let ba = alloc.covariances(n, budget);
        let (ad, unserved) = asymptotic_design(&ch.lens.dominant_beams(), &ch.lens.g, n, cfg.m, budget, GAMMA_LB)?;
        println!("{}:", c.label());
        println!(
            "  greedy: {:.2} bits, {} beams in use, orthogonal {}",
            sum_rate_cov(h, &ba, GAMMA_LB),
            alloc.beams.iter().map(Vec::len).sum::<usize>(),
            orthogonality_check(&ba).orthogonal
        );
        println!(
            "  dominant-beam design: {:.2} bits, {unserved} users unserved, orthogonal {}",
            sum_rate_cov(h, &ad, GAMMA_LB),
            orthogonality_check(&ad).orthogonal
        );
    }
    Ok(())
}
