//! Builds the lens and lens-free channels for one drop in the small room.

use lens_mimo::experiments::{channels, small_area};

fn main() -> lens_mimo::Result<()> {
    let cfg = small_area();
    let array = cfg.layout(cfg.m)?;
    println!(
        "{} x {} LEDs, focal length {:.3} m, refraction ratio {:.4}, beam width {:.2} deg",
        array.m,
        array.m,
        array.focal_length,
        array.ratio,
        (2.0 * array.beam_half_width()).to_degrees()
    );
    let ch = channels(&cfg, &array, 0)?;
    let dominant = ch.lens.dominant_beams();
    for k in 0..5 {
        let row = ch.lens.h.row(k);
        let lit = row.iter().filter(|&&v| v > 0.0).count();
        println!(
            "user {k}: dominant beam {:>3}, beams reaching it {lit:>2}, peak gain {:.3e}, lens-free gain {:.3e}",
            dominant[k],
            row.max(),
            ch.no_lens.g[k]
        );
    }
    Ok(())
}
