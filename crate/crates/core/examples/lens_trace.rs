//! Traces rays from an off-axis LED through a hemispherical lens and compares
//! the exact exit angles with the paraxial model.

use lens_mimo::optics::{compare_profiles, paraxial_theta, trace_exact, EmitterModel, EmitterPose, LensSpec};

fn main() -> lens_mimo::Result<()> {
    let lens = LensSpec::hemispherical(1.5, 0.10)?;
    let led = EmitterPose::new(0.01, 0.0, -0.01);
    println!("focal length {:.3} m", lens.focal_length());
    println!("{:>8} {:>12} {:>12}", "phi deg", "exact deg", "paraxial deg");
    // exit polar angles; the paraxial angle is signed across the axis
    for deg in [0.0, 10.0, 20.0, 30.0, 45.0] {
        let phi = f64::to_radians(deg);
        let exact = trace_exact(&led, &lens, phi, 0.0)?;
        let approx = paraxial_theta(&led, &lens, phi);
        println!("{deg:>8.1} {:>12.4} {:>12.4}", exact.theta.to_degrees(), approx.theta.abs().to_degrees());
    }

    let model = EmitterModel::new(30f64.to_radians())?;
    let cmp = compare_profiles(&led, &lens, &model, 2000, 400)?;
    println!(
        "profile: peak direction error {:.3} deg, RMSE {:.1}% of peak",
        cmp.peak_direction_error.to_degrees(),
        100.0 * cmp.relative_rmse
    );
    Ok(())
}
