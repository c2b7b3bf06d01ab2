//! Floor illumination with and without the lens; writes both maps as CSV.

use nalgebra::Vector3;

use lens_mimo::channel::{intensity_map, lattice};
use lens_mimo::experiments::small_area;

fn main() -> lens_mimo::Result<()> {
    let cfg = small_area();
    let array = cfg.layout(cfg.m)?;
    let bs = Vector3::new(0.0, 0.0, cfg.room[2]);
    let axis = lattice(cfg.room[0] / 2.0, 81);
    let out = std::env::temp_dir();
    for with_lens in [true, false] {
        let map = intensity_map(&array, &bs, cfg.area, &axis, &axis, with_lens)?;
        let path = out.join(if with_lens { "intensity_lens.csv" } else { "intensity_no_lens.csv" });
        map.write_csv(&path)?;
        println!(
            "with lens {with_lens:>5}: peak {:.3e}, CV over the central 4 m {:.3}, written to {}",
            map.values.max(),
            map.coefficient_of_variation(2.0),
            path.display()
        );
    }
    Ok(())
}
