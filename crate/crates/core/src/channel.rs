//! Downlink channel from an `M x M` LED array behind a lens to single-detector
//! user terminals.
//!
//! World frame: `z` points up, the floor is `z = 0` and the base station (the
//! lens centre) hangs from the ceiling pointing straight down. The lens frame
//! used by [`crate::optics`] maps world offsets `(dx, dy, dz)` from the lens
//! centre to `(dx, -dy, -dz)`.
//!
//! LEDs are indexed row-major: LED `(i, j)` with `i` along `x` and `j` along
//! `y` sits at linear index `i * M + j`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{
    center_beam_direction, lambertian_unchecked, refracted_intensity, refraction_ratio,
    EmitterModel, EmitterPose, LensSpec,
};

/// Square LED array and the lens it sits behind, laid out so that the `M`
/// beams along each axis tile the illumination angle `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct LedArraySpec {
    /// Grid side; the array holds `M^2` LEDs.
    pub m: usize,
    /// Inter-LED spacing in metres.
    pub d: f64,
    /// Full illumination angle covered by the beam fan.
    pub omega: f64,
    pub emitter: EmitterModel,
    /// Lens resized so that its focal length is `M d / omega`.
    pub lens: LensSpec,
    /// Common emitter height in the lens frame.
    pub z_s: f64,
    pub positions: Vec<EmitterPose>,
    pub focal_length: f64,
    pub ratio: f64,
    /// Centre-light direction of every LED in the lens frame.
    pub beam_dirs: Vec<Vector3<f64>>,
}

impl LedArraySpec {
    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Half-angle of the support of every beam, `r Phi`.
    pub fn beam_half_width(&self) -> f64 {
        self.ratio * self.emitter.limited_angle
    }
}

/// Lays out an `M x M` array behind a lens of focal length `M d / omega`.
///
/// The lens radius is derived from that focal length; the shape of `lens`
/// (plane-surface height as a fraction of the radius) and its refractive index
/// are kept. LEDs share the height that makes every beam `omega / M` wide.
pub fn array_layout(
    m: usize,
    d: f64,
    omega: f64,
    emitter: EmitterModel,
    lens: LensSpec,
) -> Result<LedArraySpec> {
    if m == 0 {
        return Err(Error::Config("array side M must be at least 1".into()));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Config(format!("LED spacing must be positive, got {d}")));
    }
    if !(omega > 0.0 && omega < std::f64::consts::PI) {
        return Err(Error::Config(format!("illumination angle {omega} rad outside (0, pi)")));
    }
    let n = lens.n;
    let mf = m as f64;
    let focal_length = mf * d / omega;
    let lens = lens.with_radius((n - 1.0) * focal_length)?;
    let phi = emitter.limited_angle;
    let z_s = (omega / (2.0 * phi) + omega * (n - 1.0) * lens.z_plane / (n * d) - mf / n) * d / omega;
    if z_s >= lens.z_plane {
        return Err(Error::Config(format!(
            "LED height {z_s:.4e} m is not below the lens plane surface {:.4e} m",
            lens.z_plane
        )));
    }
    let offset = |i: usize| (-(mf - 1.0) / 2.0 + i as f64) * d;
    let mut positions = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            positions.push(EmitterPose::new(offset(i), offset(j), z_s));
        }
    }
    let ratio = refraction_ratio(&positions[0], &lens);
    let beam_dirs = positions.iter().map(|p| center_beam_direction(p, &lens)).collect();
    Ok(LedArraySpec {
        m,
        d,
        omega,
        emitter,
        lens,
        z_s,
        positions,
        focal_length,
        ratio,
        beam_dirs,
    })
}

/// Single-photodetector receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTerminal {
    /// World position of the detector centre.
    pub position: Vector3<f64>,
    /// Detector area in square metres.
    pub area: f64,
    /// Unit receiver normal.
    pub facing: Vector3<f64>,
}

impl UserTerminal {
    /// Upward-facing detector at `position`.
    pub fn new(position: Vector3<f64>, area: f64) -> Self {
        UserTerminal {
            position,
            area,
            facing: Vector3::z(),
        }
    }
}

/// Angles and distance between one user and every LED beam.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    /// Lens centre to detector distance.
    pub distance: f64,
    /// Incidence angle at the detector.
    pub incidence: f64,
    /// Angle between the user and the centre light of each LED.
    pub psi: Vec<f64>,
    /// LED whose centre light points closest to the user.
    pub dominant: usize,
}

/// Angles seen by `ut` from a lens centred at `bs_position`.
pub fn user_angles(ut: &UserTerminal, array: &LedArraySpec, bs_position: &Vector3<f64>) -> Result<UserGeometry> {
    let delta = ut.position - bs_position;
    let distance = delta.norm();
    if distance <= 0.0 || !distance.is_finite() {
        return Err(Error::Geometry("user terminal coincides with the lens centre".into()));
    }
    if delta.z >= 0.0 {
        return Err(Error::Geometry(format!(
            "user terminal at height {:.3} m is not below the base station",
            ut.position.z
        )));
    }
    let cos_inc = (-delta / distance).dot(&ut.facing);
    if cos_inc <= 0.0 {
        return Err(Error::Geometry("user terminal faces away from the base station".into()));
    }
    let toward = Vector3::new(delta.x, -delta.y, -delta.z) / distance;
    let psi: Vec<f64> = array
        .beam_dirs
        .iter()
        .map(|b| toward.cross(b).norm().atan2(toward.dot(b)))
        .collect();
    let dominant = argmin(&psi);
    Ok(UserGeometry {
        distance,
        incidence: cos_inc.min(1.0).acos(),
        psi,
        dominant,
    })
}

/// Index of the smallest entry; the first one wins ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Gain between one LED and one user:
/// `A / (d_k^2 r^2) * I(psi) * cos(incidence)`.
pub fn channel_gain(ut: &UserTerminal, geo: &UserGeometry, array: &LedArraySpec, beam: usize) -> f64 {
    gain_at(ut.area, geo.distance, geo.incidence.cos(), geo.psi[beam], array)
}

fn gain_at(area: f64, distance: f64, cos_inc: f64, psi: f64, array: &LedArraySpec) -> f64 {
    let r = array.ratio;
    area / (distance * distance * r * r) * refracted_intensity(&array.emitter, r, psi) * cos_inc
}

/// Large-array gain `g_k`, defined so that `M^2 g_k` is the peak of `h_k`.
pub fn asymptotic_gain(ut: &UserTerminal, geo: &UserGeometry, array: &LedArraySpec) -> f64 {
    let e = &array.emitter;
    let phi = e.limited_angle;
    e.t_lens * ut.area * 4.0 * phi * phi / (array.omega * array.omega * geo.distance * geo.distance)
        * e.peak_intensity()
        * geo.incidence.cos()
}

/// Base station and the users it serves.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub array: LedArraySpec,
    /// World position of the lens centre.
    pub bs_position: Vector3<f64>,
    pub users: Vec<UserTerminal>,
}

/// `K x M^2` channel with per-user large-array gains and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: DMatrix<f64>,
    /// `g_k` with the lens, the common per-LED gain without it.
    pub g: Vec<f64>,
    pub geo: Vec<UserGeometry>,
}

impl ChannelMatrix {
    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn dominant_beams(&self) -> Vec<usize> {
        self.geo.iter().map(|g| g.dominant).collect()
    }
}

fn geometries(dep: &Deployment) -> Result<Vec<UserGeometry>> {
    if dep.users.is_empty() {
        return Err(Error::Config("deployment has no user terminals".into()));
    }
    dep.users
        .par_iter()
        .map(|ut| user_angles(ut, &dep.array, &dep.bs_position))
        .collect()
}

/// Channel through the lens.
pub fn channel_matrix(dep: &Deployment) -> Result<ChannelMatrix> {
    let geo = geometries(dep)?;
    let n = dep.array.len();
    let mut h = DMatrix::zeros(dep.users.len(), n);
    for (k, (ut, gk)) in dep.users.iter().zip(&geo).enumerate() {
        for beam in 0..n {
            h[(k, beam)] = channel_gain(ut, gk, &dep.array, beam);
        }
    }
    let g = dep
        .users
        .iter()
        .zip(&geo)
        .map(|(ut, gk)| asymptotic_gain(ut, gk, &dep.array))
        .collect();
    Ok(ChannelMatrix { h, g, geo })
}

/// Same array without the lens: every LED reaches user `k` with the common
/// gain `A / d_k^2 * I0(phi_k) * cos(phi_k)`, where the emission angle equals
/// the incidence angle for a horizontal array and an upward detector.
pub fn channel_no_lens(dep: &Deployment) -> Result<ChannelMatrix> {
    let geo = geometries(dep)?;
    let n = dep.array.len();
    let m_l = dep.array.emitter.m_l;
    let g: Vec<f64> = dep
        .users
        .iter()
        .zip(&geo)
        .map(|(ut, gk)| {
            ut.area / (gk.distance * gk.distance)
                * lambertian_unchecked(m_l, gk.incidence)
                * gk.incidence.cos()
        })
        .collect();
    let h = DMatrix::from_fn(dep.users.len(), n, |k, _| g[k]);
    Ok(ChannelMatrix { h, g, geo })
}

/// `|ratio - 1|` between the power collected over the illuminated cap at
/// range `d` and the power leaving the lens.
///
/// The cap integral uses the channel gain per unit detector area (normal
/// incidence) on a `100 x 100` midpoint grid in `(psi, zeta)`. The lens
/// power `2 pi T int_0^Phi I0 sin` has the closed form `T (1 - cos^(m+1) Phi)`.
pub fn energy_conservation_check(array: &LedArraySpec, beam: usize, d: f64) -> Result<f64> {
    if beam >= array.len() {
        return Err(Error::Domain(format!("beam {beam} outside array of {} LEDs", array.len())));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("range must be positive, got {d}")));
    }
    const NODES: usize = 100;
    let e = &array.emitter;
    let half = array.beam_half_width();
    let dpsi = half / NODES as f64;
    let dzeta = 2.0 * std::f64::consts::PI / NODES as f64;
    let mut collected = 0.0;
    for i in 0..NODES {
        let psi = (i as f64 + 0.5) * dpsi;
        let density = gain_at(1.0, d, 1.0, psi, array);
        for _ in 0..NODES {
            collected += density * d * d * psi.sin() * dpsi * dzeta;
        }
    }
    let emitted = e.t_lens * (1.0 - e.limited_angle.cos().powf(e.m_l + 1.0));
    Ok((collected / emitted - 1.0).abs())
}

/// Received intensity `I_r = (1/M) 1^T h` over a lattice on the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[(iy, ix)]`.
    pub values: DMatrix<f64>,
}

impl IntensityMap {
    /// Coefficient of variation over points with `|x|, |y| <= half_extent`.
    pub fn coefficient_of_variation(&self, half_extent: f64) -> f64 {
        let mut samples = Vec::new();
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                if x.abs() <= half_extent && y.abs() <= half_extent {
                    samples.push(self.values[(iy, ix)]);
                }
            }
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }

    /// CSV with header `x,y,intensity`, row-major (`y` outer, `x` inner).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,intensity\n");
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                let _ = writeln!(out, "{x:.8e},{y:.8e},{:.8e}", self.values[(iy, ix)]);
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Evenly spaced points across `[-half, half]` (midpoints of `n` cells).
pub fn lattice(half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -half + 2.0 * half * (i as f64 + 0.5) / n as f64).collect()
}

/// Intensity seen by a probe detector of area `area` at every lattice point on
/// the floor (`z = 0`). `with_lens = false` gives the lens-free map.
pub fn intensity_map(
    array: &LedArraySpec,
    bs_position: &Vector3<f64>,
    area: f64,
    xs: &[f64],
    ys: &[f64],
    with_lens: bool,
) -> Result<IntensityMap> {
    let m = array.m as f64;
    let rows: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| probe_intensity(array, bs_position, area, x, y, with_lens).map(|s| s / m))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(ys.len(), xs.len(), |iy, ix| rows[iy][ix]);
    Ok(IntensityMap {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    })
}

fn probe_intensity(
    array: &LedArraySpec,
    bs_position: &Vector3<f64>,
    area: f64,
    x: f64,
    y: f64,
    with_lens: bool,
) -> Result<f64> {
    let ut = UserTerminal::new(Vector3::new(x, y, 0.0), area);
    let geo = user_angles(&ut, array, bs_position)?;
    if with_lens {
        let half = array.beam_half_width();
        Ok(geo
            .psi
            .iter()
            .filter(|&&p| p < half)
            .map(|&p| gain_at(area, geo.distance, geo.incidence.cos(), p, array))
            .sum())
    } else {
        let per_led = area / (geo.distance * geo.distance)
            * lambertian_unchecked(array.emitter.m_l, geo.incidence)
            * geo.incidence.cos();
        Ok(per_led * array.len() as f64)
    }
}

/// `|h_a . h_b| / (|h_a| |h_b|)`, zero when either row is zero.
pub fn normalized_inner_product(h: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let ra = h.row(a);
    let rb = h.row(b);
    let na = ra.norm();
    let nb = rb.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    ra.dot(&rb).abs() / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const DEG: f64 = PI / 180.0;

    fn emitter() -> EmitterModel {
        EmitterModel::new(30.0 * DEG).unwrap()
    }

    fn hemi() -> LensSpec {
        LensSpec::hemispherical(1.5, 0.1).unwrap()
    }

    fn array(m: usize) -> LedArraySpec {
        array_layout(m, 0.005, 90.0 * DEG, emitter(), hemi()).unwrap()
    }

    fn single() -> LedArraySpec {
        array_layout(1, 0.005, 60.0 * DEG, emitter(), hemi()).unwrap()
    }

    fn ceiling() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 3.0)
    }

    #[test]
    fn layout_positions_and_focal_length() {
        let a = array_layout(2, 0.01, PI / 3.0, emitter(), hemi()).unwrap();
        let xs: Vec<f64> = a.positions.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![-0.005, -0.005, 0.005, 0.005]);
        assert_eq!(a.positions[1].y, 0.005);
        assert!((a.focal_length - 0.02 / (PI / 3.0)).abs() < 1e-15);
        assert!((a.focal_length - 0.019099).abs() < 1e-6);
        assert!((a.lens.focal_length() / a.focal_length - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layout_beam_width_is_omega_over_m() {
        for m in [2, 3, 12, 40] {
            for lens in [hemi(), LensSpec::thin(1.5, 0.1).unwrap(), LensSpec::general(1.6, 0.1, 0.03).unwrap()] {
                let a = array_layout(m, 0.004, 100.0 * DEG, emitter(), lens).unwrap();
                let width = crate::optics::beam_width(a.ratio, a.emitter.limited_angle);
                assert!((width / (a.omega / m as f64) - 1.0).abs() < 1e-9);
                assert!(a.positions.iter().all(|p| p.z == a.z_s && p.z < a.lens.z_plane));
            }
        }
    }

    #[test]
    fn layout_large_array_limits() {
        let (m, d, omega, n) = (200, 0.005, 90.0 * DEG, 1.5);
        let a = array_layout(m, d, omega, emitter(), hemi()).unwrap();
        let limit = -(m as f64) * d / (omega * n);
        assert!(((a.z_s - limit) / limit).abs() < 0.01);
        let thin = array_layout(m, d, omega, emitter(), LensSpec::thin(n, 0.1).unwrap()).unwrap();
        let limit = (n - 2.0) * m as f64 * d / omega;
        assert!(((thin.z_s - limit) / limit).abs() < 0.01);
    }

    #[test]
    fn layout_rejects_bad_input() {
        assert!(matches!(array_layout(0, 0.01, 1.0, emitter(), hemi()), Err(Error::Config(_))));
        assert!(array_layout(4, -0.01, 1.0, emitter(), hemi()).is_err());
        assert!(array_layout(4, 0.01, 4.0, emitter(), hemi()).is_err());
        // a wide limited angle with a thin lens pushes the array above the plane
        let wide = EmitterModel::new(60.0 * DEG).unwrap().with_limited_angle(0.05).unwrap();
        let thin = LensSpec::thin(1.5, 0.1).unwrap();
        assert!(matches!(array_layout(1, 0.01, 1.5, wide, thin), Err(Error::Config(_))));
    }

    #[test]
    fn nadir_user_angles() {
        let a = array(3);
        let ut = UserTerminal::new(Vector3::zeros(), 1e-4);
        let geo = user_angles(&ut, &a, &ceiling()).unwrap();
        assert_eq!(geo.incidence, 0.0);
        assert!((geo.distance - 3.0).abs() < 1e-15);
        assert_eq!(geo.dominant, 4);
        assert!(geo.psi[4].abs() < 1e-15);
    }

    #[test]
    fn oblique_incidence() {
        let a = array(4);
        let ut = UserTerminal::new(Vector3::new(1.0, 0.0, 0.0), 1e-4);
        let geo = user_angles(&ut, &a, &ceiling()).unwrap();
        assert!((geo.incidence / DEG - 18.434_948_822_922_01).abs() < 1e-9);
        assert!((geo.distance - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn user_angle_errors() {
        let a = array(2);
        let at_bs = UserTerminal::new(ceiling(), 1e-4);
        assert!(matches!(user_angles(&at_bs, &a, &ceiling()), Err(Error::Geometry(_))));
        let above = UserTerminal::new(Vector3::new(0.0, 0.0, 4.0), 1e-4);
        assert!(user_angles(&above, &a, &ceiling()).is_err());
        let mut down = UserTerminal::new(Vector3::zeros(), 1e-4);
        down.facing = -Vector3::z();
        assert!(user_angles(&down, &a, &ceiling()).is_err());
    }

    #[test]
    fn gain_oracle() {
        // r = 0.1, A = 1e-4, d = 3, m_L = 1, psi = 0, normal incidence
        let mut a = single();
        a.ratio = 0.1;
        a.emitter = EmitterModel::new(60.0 * DEG).unwrap();
        let ut = UserTerminal::new(Vector3::zeros(), 1e-4);
        let geo = UserGeometry {
            distance: 3.0,
            incidence: 0.0,
            psi: vec![0.0],
            dominant: 0,
        };
        let h = channel_gain(&ut, &geo, &a, 0);
        assert!((h - 1e-4 / 0.09 / PI).abs() < 1e-18);
        assert!((h - 3.537e-4).abs() < 1e-7);
        let far = UserGeometry { distance: 6.0, ..geo.clone() };
        assert!((channel_gain(&ut, &far, &a, 0) - h / 4.0).abs() < 1e-18);
        let outside = UserGeometry {
            psi: vec![a.beam_half_width() * 1.0001],
            ..geo
        };
        assert_eq!(channel_gain(&ut, &outside, &a, 0), 0.0);
    }

    #[test]
    fn single_led_single_user() {
        let a = single();
        let ut = UserTerminal::new(Vector3::new(0.2, 0.1, 0.0), 1e-4);
        let dep = Deployment {
            array: a.clone(),
            bs_position: ceiling(),
            users: vec![ut],
        };
        let ch = channel_matrix(&dep).unwrap();
        assert_eq!(ch.h.shape(), (1, 1));
        assert_eq!(ch.h[(0, 0)], channel_gain(&ut, &ch.geo[0], &a, 0));
    }

    #[test]
    fn peak_gain_matches_asymptotic_gain() {
        let a = array(9);
        let ut = UserTerminal::new(Vector3::zeros(), 1e-4);
        let geo = user_angles(&ut, &a, &ceiling()).unwrap();
        let peak = channel_gain(&ut, &geo, &a, geo.dominant);
        let g = asymptotic_gain(&ut, &geo, &a);
        assert!((peak / (81.0 * g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_users_have_permuted_rows() {
        let a = array(6);
        let users = vec![
            UserTerminal::new(Vector3::new(0.7, 0.3, 0.0), 1e-4),
            UserTerminal::new(Vector3::new(-0.7, 0.3, 0.0), 1e-4),
        ];
        let dep = Deployment {
            array: a,
            bs_position: ceiling(),
            users,
        };
        let ch = channel_matrix(&dep).unwrap();
        let mut r0: Vec<f64> = ch.h.row(0).iter().copied().collect();
        let mut r1: Vec<f64> = ch.h.row(1).iter().copied().collect();
        r0.sort_by(f64::total_cmp);
        r1.sort_by(f64::total_cmp);
        for (x, y) in r0.iter().zip(&r1) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-30));
        }
    }

    #[test]
    fn no_lens_rows() {
        let a = array_layout(4, 0.005, 90.0 * DEG, EmitterModel::new(60.0 * DEG).unwrap(), hemi()).unwrap();
        let dep = Deployment {
            array: a,
            bs_position: ceiling(),
            users: vec![
                UserTerminal::new(Vector3::zeros(), 1e-4),
                UserTerminal::new(Vector3::new(1.0, -2.0, 0.0), 1e-4),
            ],
        };
        let ch = channel_no_lens(&dep).unwrap();
        assert!((ch.h[(0, 5)] - 1e-4 / 9.0 / PI).abs() < 1e-20);
        assert!((ch.h[(0, 5)] - 3.537e-6).abs() < 1e-9);
        for k in 0..2 {
            let row = ch.h.row(k);
            assert!(row.iter().all(|v| *v == row[0]));
            assert!((row.norm() - 4.0 * ch.g[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_conservation_narrow_emitter() {
        // For a narrow emitter sin(r phi) ~ r sin(phi) holds over the whole
        // cone and the normalisation is nearly exact.
        let narrow = EmitterModel::new(5.0 * DEG).unwrap();
        for (m, tol) in [(60, 1e-2), (15, 5e-2)] {
            let a = array_layout(m, 0.005, 60.0 * DEG, narrow, hemi()).unwrap();
            let err = energy_conservation_check(&a, 0, 3.0).unwrap();
            assert!(err <= tol, "M = {m}: {err}");
            let err2 = energy_conservation_check(&a, 0, 7.5).unwrap();
            assert!((err - err2).abs() < 1e-12);
        }
    }

    #[test]
    fn intensity_map_symmetry_and_single_led() {
        let a = array(5);
        let xs = lattice(2.5, 9);
        let map = intensity_map(&a, &ceiling(), 1e-4, &xs, &xs, true).unwrap();
        for iy in 0..9 {
            for ix in 0..9 {
                let v = map.values[(iy, ix)];
                let w = map.values[(8 - iy, 8 - ix)];
                assert!((v - w).abs() <= 1e-9 * v.abs().max(1e-30));
            }
        }
        let one = single();
        let map = intensity_map(&one, &ceiling(), 1e-4, &[0.0], &[0.0], true).unwrap();
        let ut = UserTerminal::new(Vector3::zeros(), 1e-4);
        let geo = user_angles(&ut, &one, &ceiling()).unwrap();
        assert!((map.values[(0, 0)] - channel_gain(&ut, &geo, &one, 0)).abs() < 1e-18);
    }

    #[test]
    fn intensity_csv_format() {
        let map = IntensityMap {
            xs: vec![0.0, 1.5],
            ys: vec![-1.0],
            values: DMatrix::from_row_slice(1, 2, &[1.0, 2.0e-5]),
        };
        assert_eq!(
            map.to_csv(),
            "x,y,intensity\n0.00000000e0,-1.00000000e0,1.00000000e0\n1.50000000e0,-1.00000000e0,2.00000000e-5\n"
        );
    }
}
