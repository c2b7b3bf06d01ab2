//! Geometric optics of a single LED behind a plano-convex transmit lens.
//!
//! Lens frame: the centre of the spherical surface is the origin, the plane
//! surface sits at `z = z_plane` and faces the emitters below it, and `+z` is
//! the broadcast axis. Light leaves an emitter at `S`, refracts at the plane
//! surface (point `P1`), travels inside the glass and refracts again at the
//! spherical surface (point `P2`).
//!
//! Two models are provided:
//!
//! * [`trace_exact`] follows one ray through both surfaces with the vector form
//!   of Snell's law. It is the validation oracle.
//! * [`paraxial_theta`] and [`refraction_ratio`] give the small-angle model in
//!   which the exit angle splits into a centre-light term that only depends on
//!   the horizontal emitter offset and a term linear in the emission angle.
//!   The channel model is built on this one.
//!
//! All angles are radians.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Shape of the plano-convex lens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LensKind {
    /// Plane surface through the sphere centre (`z_plane = 0`).
    Hemispherical,
    /// Plane surface at the pole (`z_plane = R`), the thin-lens limit.
    Thin,
    General,
}

/// Spherical lens geometry and refractive index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    pub n: f64,
    pub radius: f64,
    pub z_plane: f64,
    pub kind: LensKind,
}

impl LensSpec {
    pub fn hemispherical(n: f64, radius: f64) -> Result<Self> {
        Self::new(n, radius, 0.0, LensKind::Hemispherical)
    }

    pub fn thin(n: f64, radius: f64) -> Result<Self> {
        Self::new(n, radius, radius, LensKind::Thin)
    }

    /// Classifies the kind from `z_plane` (0 and `radius` map to the two
    /// special cases).
    pub fn general(n: f64, radius: f64, z_plane: f64) -> Result<Self> {
        let kind = if z_plane.abs() <= 1e-12 * radius {
            LensKind::Hemispherical
        } else if (z_plane - radius).abs() <= 1e-12 * radius {
            LensKind::Thin
        } else {
            LensKind::General
        };
        Self::new(n, radius, z_plane, kind)
    }

    fn new(n: f64, radius: f64, z_plane: f64, kind: LensKind) -> Result<Self> {
        if !(n > 1.0 && n.is_finite()) {
            return Err(Error::Domain(format!("refractive index must exceed 1, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("lens radius must be positive, got {radius}")));
        }
        if !(0.0..=radius).contains(&z_plane) {
            return Err(Error::Domain(format!(
                "plane surface height {z_plane} outside [0, {radius}]"
            )));
        }
        Ok(LensSpec {
            n,
            radius,
            z_plane,
            kind,
        })
    }

    /// `f = R / (n - 1)`.
    pub fn focal_length(&self) -> f64 {
        self.radius / (self.n - 1.0)
    }

    /// Radius of the plane surface disc.
    pub fn aperture_radius(&self) -> f64 {
        (self.radius * self.radius - self.z_plane * self.z_plane).max(0.0).sqrt()
    }

    /// Same lens shape rescaled to a new radius (keeps `z_plane / R`).
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let z_plane = match self.kind {
            LensKind::Hemispherical => 0.0,
            LensKind::Thin => radius,
            LensKind::General => self.z_plane / self.radius * radius,
        };
        Self::new(self.n, radius, z_plane, self.kind)
    }
}

/// Emitter position in the lens frame (metres).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EmitterPose {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        EmitterPose { x, y, z }
    }

    /// Horizontal distance from the lens axis.
    pub fn offset(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }

    /// Far intersection with the origin-centred sphere of radius `radius`.
    fn exit_sphere(&self, radius: f64) -> Option<Vector3<f64>> {
        let b = self.origin.dot(&self.direction);
        let c = self.origin.norm_squared() - radius * radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b + disc.sqrt();
        (t > 0.0).then(|| self.at(t))
    }
}

/// Every intermediate angle and hit point of one exact two-surface trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractionTrace {
    /// Emission polar angle.
    pub phi: f64,
    /// Emission azimuth.
    pub zeta0: f64,
    /// Refraction angle at the plane surface.
    pub xi: f64,
    /// Angle between the sphere normal at `P2` and the axis.
    pub alpha: f64,
    /// Incidence angle at the spherical surface.
    pub alpha1: f64,
    /// Refraction angle at the spherical surface.
    pub alpha2: f64,
    /// Exit polar angle.
    pub theta: f64,
    /// Exit azimuth.
    pub zeta1: f64,
    /// Height of the virtual source seen from inside the glass.
    pub z_virtual: f64,
    pub p1: Vector3<f64>,
    pub p2: Vector3<f64>,
    /// Unit exit direction.
    pub exit: Vector3<f64>,
}

/// Lambertian LED with a limited emission cone and a constant lens gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterModel {
    /// Semi-angle of half intensity.
    pub phi_c: f64,
    /// Lambertian order.
    pub m_l: f64,
    /// Limited angle: emission beyond it never reaches the lens.
    pub limited_angle: f64,
    /// Constant optical lens gain.
    pub t_lens: f64,
}

impl EmitterModel {
    /// Limited angle defaults to `min(2 phi_c, 90 deg)` and lens gain to 1.
    pub fn new(phi_c: f64) -> Result<Self> {
        let m_l = lambertian_order(phi_c)?;
        Ok(EmitterModel {
            phi_c,
            m_l,
            limited_angle: (2.0 * phi_c).min(FRAC_PI_2),
            t_lens: 1.0,
        })
    }

    pub fn with_limited_angle(mut self, limited_angle: f64) -> Result<Self> {
        if !(limited_angle > 0.0 && limited_angle <= FRAC_PI_2) {
            return Err(Error::Domain(format!(
                "limited angle {limited_angle} rad outside (0, pi/2]"
            )));
        }
        self.limited_angle = limited_angle;
        Ok(self)
    }

    pub fn with_lens_gain(mut self, t_lens: f64) -> Result<Self> {
        if !(t_lens > 0.0 && t_lens.is_finite()) {
            return Err(Error::Domain(format!("lens gain must be positive, got {t_lens}")));
        }
        self.t_lens = t_lens;
        Ok(self)
    }

    /// On-axis intensity `(m_L + 1) / 2 pi`.
    pub fn peak_intensity(&self) -> f64 {
        (self.m_l + 1.0) / (2.0 * PI)
    }
}

/// `m_L = -ln 2 / ln cos(phi_c)`.
pub fn lambertian_order(phi_c: f64) -> Result<f64> {
    if !(phi_c > 0.0 && phi_c < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "semi-angle of half intensity {phi_c} rad outside (0, pi/2)"
        )));
    }
    Ok(-(2.0f64.ln()) / phi_c.cos().ln())
}

/// `I0(phi) = (m_L + 1) / (2 pi) cos^m_L(phi)`.
pub fn lambertian_intensity(model: &EmitterModel, phi: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&phi) {
        return Err(Error::Domain(format!("emission angle {phi} rad outside [0, pi/2]")));
    }
    Ok(lambertian_unchecked(model.m_l, phi))
}

#[inline]
pub(crate) fn lambertian_unchecked(m_l: f64, phi: f64) -> f64 {
    (m_l + 1.0) / (2.0 * PI) * phi.cos().max(0.0).powf(m_l)
}

/// Snell's law at the plane surface: `sin phi = n sin xi`.
pub fn refract_plane(phi: f64, n: f64) -> f64 {
    (phi.sin() / n).asin()
}

/// Vector Snell's law leaving the glass through the spherical surface.
///
/// `v` is the unit propagation direction inside the lens and `p2` the hit point
/// on the sphere. The inward normal is `-p2 / R` and `c = -normal . v`.
pub fn refract_sphere(v: &Vector3<f64>, p2: &Vector3<f64>, n: f64) -> Result<Vector3<f64>> {
    let normal = -p2 / p2.norm();
    let c = -normal.dot(v);
    let disc = 1.0 - n * n * (1.0 - c * c);
    if disc < 0.0 {
        return Err(Error::TotalInternalReflection(disc));
    }
    let r = v * n + normal * (n * c - disc.sqrt());
    Ok(r.normalize())
}

/// Exact trace of the ray leaving `emitter` at polar angle `phi` and azimuth
/// `zeta0`.
pub fn trace_exact(
    emitter: &EmitterPose,
    lens: &LensSpec,
    phi: f64,
    zeta0: f64,
) -> Result<RefractionTrace> {
    if emitter.z >= lens.z_plane {
        return Err(Error::Domain(format!(
            "emitter at z = {} is not below the plane surface z = {}",
            emitter.z, lens.z_plane
        )));
    }
    if !(0.0..FRAC_PI_2).contains(&phi) {
        return Err(Error::Domain(format!("emission angle {phi} rad outside [0, pi/2)")));
    }
    let n = lens.n;
    let (sz, cz) = zeta0.sin_cos();
    let source = emitter.position();

    let v0 = Vector3::new(phi.sin() * cz, phi.sin() * sz, phi.cos());
    let p1 = source + v0 * ((lens.z_plane - source.z) / v0.z);
    let aperture = lens.aperture_radius();
    if p1.x.hypot(p1.y) > aperture {
        return Err(Error::ApertureMiss(format!(
            "plane-surface hit at radius {:.4e} m beyond aperture {:.4e} m",
            p1.x.hypot(p1.y),
            aperture
        )));
    }

    let xi = refract_plane(phi, n);
    // Inside the glass the ray appears to come from a virtual source on the
    // emitter's vertical line; at phi = 0 the ratio tan(phi)/tan(xi) tends to n.
    let depth = lens.z_plane - source.z;
    let stretch = if phi.abs() < 1e-9 { n } else { phi.tan() / xi.tan() };
    let z_virtual = lens.z_plane - depth * stretch;
    let v1 = Vector3::new(xi.sin() * cz, xi.sin() * sz, xi.cos());
    let inner = Ray::new(Vector3::new(source.x, source.y, z_virtual), v1);

    let p2 = inner
        .exit_sphere(lens.radius)
        .filter(|p| p.z >= lens.z_plane)
        .ok_or_else(|| Error::ApertureMiss("ray does not reach the spherical surface".into()))?;

    let exit = refract_sphere(&v1, &p2, n)?;
    let outward = p2 / lens.radius;
    let alpha1 = outward.dot(&v1).clamp(-1.0, 1.0).acos();
    let alpha2 = outward.dot(&exit).clamp(-1.0, 1.0).acos();

    Ok(RefractionTrace {
        phi,
        zeta0,
        xi,
        alpha: outward.z.clamp(-1.0, 1.0).acos(),
        alpha1,
        alpha2,
        theta: exit.z.clamp(-1.0, 1.0).acos(),
        zeta1: exit.y.atan2(exit.x),
        z_virtual,
        p1,
        p2,
        exit,
    })
}

/// Small-angle exit angle split into its centre-light and spread terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaxialAngles {
    /// `theta0 - psi`.
    pub theta: f64,
    /// Exit angle of the centre light (`phi = 0`).
    pub theta0: f64,
    /// Angle between this ray and the centre light.
    pub psi: f64,
}

/// Paraxial exit angle. Valid for emission angles up to roughly 0.5 rad.
pub fn paraxial_theta(emitter: &EmitterPose, lens: &LensSpec, phi: f64) -> ParaxialAngles {
    let theta0 = (lens.n - 1.0) * emitter.offset() / lens.radius;
    let psi = phi * refraction_ratio(emitter, lens);
    ParaxialAngles {
        theta: theta0 - psi,
        theta0,
        psi,
    }
}

/// `r = 1/n + z_S (n-1)/R - (n-1)^2 z_p / (n R)`, the slope of the spread
/// angle against the emission angle. Depends only on the emitter height.
pub fn refraction_ratio(emitter: &EmitterPose, lens: &LensSpec) -> f64 {
    let n = lens.n;
    let radius = lens.radius;
    1.0 / n + emitter.z * (n - 1.0) / radius - (n - 1.0).powi(2) * lens.z_plane / (n * radius)
}

/// Full beam width `2 r Phi`.
pub fn beam_width(ratio: f64, limited_angle: f64) -> f64 {
    2.0 * ratio * limited_angle
}

/// Intensity of the refracted beam at angle `psi` from its centre light.
///
/// `T_lens * I0(psi / r)` inside the cone `psi < r Phi`, zero on and beyond
/// the edge.
pub fn refracted_intensity(model: &EmitterModel, ratio: f64, psi: f64) -> f64 {
    let phi = psi / ratio;
    if !(phi >= 0.0 && phi < model.limited_angle) {
        return 0.0;
    }
    model.t_lens * lambertian_unchecked(model.m_l, phi)
}

/// Unit direction of the refracted centre light.
///
/// The polar angle is `(n-1) rho / R`; the beam leans away from the emitter
/// offset, towards azimuth `atan2(-y_S, -x_S)`.
pub fn center_beam_direction(emitter: &EmitterPose, lens: &LensSpec) -> Vector3<f64> {
    let rho = emitter.offset();
    if rho == 0.0 {
        return Vector3::z();
    }
    let theta0 = (lens.n - 1.0) * rho / lens.radius;
    let azimuth = (-emitter.y).atan2(-emitter.x);
    let (st, ct) = theta0.sin_cos();
    Vector3::new(st * azimuth.cos(), st * azimuth.sin(), ct)
}

/// Paraxial versus exact intensity profile in the meridional plane of one
/// emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileComparison {
    /// Angle between the exact and paraxial centre-light directions.
    pub peak_direction_error: f64,
    /// RMS difference over the paraxial beam support, divided by the peak.
    pub relative_rmse: f64,
    /// Exit angles of the comparison grid (signed, positive away from the
    /// emitter offset).
    pub exit_angles: Vec<f64>,
    pub paraxial: Vec<f64>,
    pub exact: Vec<f64>,
    /// Emission angles that could not be traced (TIR or aperture miss).
    pub lost_rays: usize,
}

/// Compares the paraxial and the exactly traced intensity profile of one LED.
///
/// Rays are launched in the meridional plane (axis plus emitter offset) at
/// `2 * rays + 1` signed emission angles across `[-Phi, Phi]`. The exact
/// profile maps each traced exit angle back to the Lambertian intensity of its
/// emission angle, the same radiance mapping the paraxial model uses, and is
/// resampled on `grid` exit angles spanning the paraxial support.
pub fn compare_profiles(
    emitter: &EmitterPose,
    lens: &LensSpec,
    model: &EmitterModel,
    rays: usize,
    grid: usize,
) -> Result<ProfileComparison> {
    let rho = emitter.offset();
    let (ux, uy) = if rho > 0.0 {
        (emitter.x / rho, emitter.y / rho)
    } else {
        (1.0, 0.0)
    };
    let toward = uy.atan2(ux);
    let signed_exit = |exit: &Vector3<f64>| (-(exit.x * ux + exit.y * uy)).atan2(exit.z);

    let ratio = refraction_ratio(emitter, lens);
    if ratio <= 0.0 {
        return Err(Error::Domain(format!(
            "refraction ratio {ratio} is not positive; the lens images the emitter"
        )));
    }
    let limit = model.limited_angle;
    let mut samples = Vec::with_capacity(2 * rays + 1);
    let mut lost = 0;
    for i in 0..=2 * rays {
        let signed = limit * (i as f64 / rays as f64 - 1.0);
        let (phi, zeta0) = if signed >= 0.0 {
            (signed, toward)
        } else {
            (-signed, toward + PI)
        };
        match trace_exact(emitter, lens, phi.min(limit * (1.0 - 1e-12)), zeta0) {
            Ok(trace) => samples.push((
                signed_exit(&trace.exit),
                model.t_lens * lambertian_unchecked(model.m_l, phi),
            )),
            Err(Error::TotalInternalReflection(_) | Error::ApertureMiss(_)) => lost += 1,
            Err(e) => return Err(e),
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));

    let center = trace_exact(emitter, lens, 0.0, 0.0)?;
    let par_center = center_beam_direction(emitter, lens);
    let peak_direction_error = center.exit.cross(&par_center).norm().atan2(center.exit.dot(&par_center));

    let theta0 = (lens.n - 1.0) * rho / lens.radius;
    let half = ratio * limit;
    let peak = model.t_lens * model.peak_intensity();
    let mut exit_angles = Vec::with_capacity(grid);
    let mut paraxial = Vec::with_capacity(grid);
    let mut exact = Vec::with_capacity(grid);
    let mut sq = 0.0;
    for j in 0..grid {
        let s = theta0 - half + 2.0 * half * (j as f64 + 0.5) / grid as f64;
        let par = refracted_intensity(model, ratio, (s - theta0).abs());
        let ex = interpolate(&samples, s);
        sq += (par - ex).powi(2);
        exit_angles.push(s);
        paraxial.push(par);
        exact.push(ex);
    }
    Ok(ProfileComparison {
        peak_direction_error,
        relative_rmse: (sq / grid as f64).sqrt() / peak,
        exit_angles,
        paraxial,
        exact,
        lost_rays: lost,
    })
}

/// Piecewise-linear interpolation on sorted `(x, y)` pairs, zero outside.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 < x);
    if idx == 0 || idx == points.len() {
        return 0.0;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
