//! Normal contact of rigid axisymmetric indenters on an elastic half-space.
//!
//! The half-space is replaced by a one-dimensional bed of independent linear
//! springs with stiffness density `E*` (method of dimensionality reduction).
//! A 3-D power-law profile `c_n r^n` maps onto the 1-D profile `c̃_n |x|^n`,
//! and the normal force then follows in closed form. [`discrete_foundation_force`]
//! sums the springs explicitly and is kept as a numerical oracle for the
//! closed-form laws.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Elastic properties of the specimen.
///
/// Only `E*` and `ν` are stored; `E_f = E* (1 - ν²)` is derived so the two
/// can never disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    e_star: f64,
    nu: f64,
}

impl Material {
    /// Builds a material from its effective (contact) modulus `E*` in Pa.
    pub fn from_effective(e_star: f64, nu: f64) -> Result<Self> {
        if !(e_star.is_finite() && e_star > 0.0) {
            return Err(Error::domain(format!(
                "effective modulus must be positive and finite, got {e_star} Pa"
            )));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::domain(format!(
                "Poisson ratio must lie in [0, 0.5), got {nu}"
            )));
        }
        Ok(Self { e_star, nu })
    }

    /// Builds a material from its elastic modulus `E_f` in Pa.
    pub fn from_elastic(e_f: f64, nu: f64) -> Result<Self> {
        if !(e_f.is_finite() && e_f > 0.0) {
            return Err(Error::domain(format!(
                "elastic modulus must be positive and finite, got {e_f} Pa"
            )));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::domain(format!(
                "Poisson ratio must lie in [0, 0.5), got {nu}"
            )));
        }
        Self::from_effective(e_f / (1.0 - nu * nu), nu)
    }

    pub fn e_star(&self) -> f64 {
        self.e_star
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn e_f(&self) -> f64 {
        self.e_star * (1.0 - self.nu * self.nu)
    }
}

/// 1-D reduction factor of a power-law profile, `√π Γ(n/2 + 1) / Γ((n + 1)/2)`.
///
/// `hess_factor(2) == 2`, so a paraboloid `r²/(2R)` reduces to `x²/R`.
pub fn hess_factor(n: f64) -> Result<f64> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::domain(format!(
            "profile exponent must be > 0, got {n}"
        )));
    }
    let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
    Ok((ln_sqrt_pi + ln_gamma(0.5 * n + 1.0) - ln_gamma(0.5 * (n + 1.0))).exp())
}

/// Reduced 1-D coefficient `c̃_n` of the 3-D profile `c_n r^n`.
pub fn hess_reduce(n: f64, c_n: f64) -> Result<f64> {
    if !(c_n.is_finite() && c_n > 0.0) {
        return Err(Error::domain(format!(
            "profile coefficient must be > 0, got {c_n}"
        )));
    }
    Ok(hess_factor(n)? * c_n)
}

/// Power-law indenter `c_n r^n` together with its reduced coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawProfile {
    n: f64,
    c_n: f64,
    c_tilde: f64,
    r1: Option<f64>,
}

impl PowerLawProfile {
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn c_tilde(&self) -> f64 {
        self.c_tilde
    }

    /// Radius `R₁` of the 1-D parabola `x²/(2R₁)` when built with [`IndenterProfile::sphere`].
    pub fn r1(&self) -> Option<f64> {
        self.r1
    }
}

/// Shape of the rigid indenter tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndenterProfile {
    /// Flat cylindrical punch of contact half-width `a` (m).
    Flat {
        a: f64,
    },
    PowerLaw(PowerLawProfile),
}

impl IndenterProfile {
    pub fn flat(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::domain(format!(
                "flat punch half-width must be > 0 m, got {a}"
            )));
        }
        Ok(Self::Flat { a })
    }

    /// Generic power-law profile from its 3-D coefficient `c_n` (m^(1-n)).
    pub fn power_law(n: f64, c_n: f64) -> Result<Self> {
        let c_tilde = hess_reduce(n, c_n)?;
        Ok(Self::PowerLaw(PowerLawProfile {
            n,
            c_n,
            c_tilde,
            r1: None,
        }))
    }

    /// Spherical tip whose 1-D profile is `x²/(2R₁)`.
    ///
    /// The force is `(4/3) E* d √(2R₁d)`, i.e. the Hertz law for a sphere of
    /// radius `R = 2R₁`; the stored 3-D coefficient is therefore `1/(2R) = 1/(4R₁)`.
    pub fn sphere(r1: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 > 0.0) {
            return Err(Error::domain(format!(
                "sphere radius must be > 0 m, got {r1}"
            )));
        }
        let c_tilde = 1.0 / (2.0 * r1);
        let c_n = c_tilde / hess_factor(2.0)?;
        Ok(Self::PowerLaw(PowerLawProfile {
            n: 2.0,
            c_n,
            c_tilde,
            r1: Some(r1),
        }))
    }

    /// Paraboloid `r²/(2R)` with apex radius `R`; reduces to `x²/R`.
    pub fn paraboloid(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!(
                "paraboloid radius must be > 0 m, got {radius}"
            )));
        }
        Self::power_law(2.0, 1.0 / (2.0 * radius))
    }

    /// Exponent of the force-penetration law `F ∝ d^e`.
    pub fn force_exponent(&self) -> f64 {
        match self {
            Self::Flat { .. } => 1.0,
            Self::PowerLaw(p) => (p.n + 1.0) / p.n,
        }
    }

    /// Reduced radius `1/c̃` of a parabolic (n = 2) profile.
    pub fn reduced_radius(&self) -> Option<f64> {
        match self {
            Self::PowerLaw(p) if p.n == 2.0 => Some(1.0 / p.c_tilde),
            _ => None,
        }
    }

    /// Contact half-width at penetration `d`.
    pub fn contact_half_width(&self, d: f64) -> f64 {
        match self {
            Self::Flat { a } => *a,
            Self::PowerLaw(p) => (d / p.c_tilde).powf(1.0 / p.n),
        }
    }

    /// Height of the reduced 1-D profile above its apex at lateral position `x`.
    pub fn reduced_height(&self, x: f64) -> f64 {
        match self {
            Self::Flat { a } => {
                if x.abs() <= *a {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::PowerLaw(p) => p.c_tilde * x.abs().powf(p.n),
        }
    }

    /// Force per unit `E*`-scaled penetration power: `F = E* · shape_stiffness · d^e`.
    pub fn shape_stiffness(&self) -> f64 {
        match self {
            Self::Flat { a } => 2.0 * a,
            Self::PowerLaw(p) => 2.0 * p.n / (p.n + 1.0) * p.c_tilde.powf(-1.0 / p.n),
        }
    }

    /// Closed-form normal force at penetration `d`.
    pub fn force(&self, material: &Material, d: f64) -> Result<f64> {
        match self {
            Self::Flat { a } => force_flat(material, *a, d),
            Self::PowerLaw(_) => force_power_law(material, self, d),
        }
    }
}

fn check_penetration(d: f64) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::domain(format!(
            "penetration must be >= 0 m (no adhesion), got {d}"
        )));
    }
    Ok(())
}

/// Sphere on the spring bed: `F = (4/3) E* d √(2R₁d)`.
pub fn force_sphere(material: &Material, r1: f64, d: f64) -> Result<f64> {
    check_penetration(d)?;
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(Error::domain(format!(
            "sphere radius must be > 0 m, got {r1}"
        )));
    }
    Ok(4.0 / 3.0 * material.e_star() * d * (2.0 * r1 * d).sqrt())
}

/// Generic power-law force `2n/(n+1) E* c̃^(-1/n) d^((n+1)/n)`.
pub fn force_power_law(material: &Material, profile: &IndenterProfile, d: f64) -> Result<f64> {
    check_penetration(d)?;
    match profile {
        IndenterProfile::PowerLaw(p) => {
            Ok(material.e_star() * profile.shape_stiffness() * d.powf((p.n + 1.0) / p.n))
        }
        IndenterProfile::Flat { .. } => Err(Error::invalid(
            "force_power_law needs a power-law profile, got a flat punch",
        )),
    }
}

/// Flat punch: `F = 2 a E* d`.
pub fn force_flat(material: &Material, a: f64, d: f64) -> Result<f64> {
    check_penetration(d)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!(
            "flat punch half-width must be > 0 m, got {a}"
        )));
    }
    Ok(material.e_star() * 2.0 * a * d)
}

/// Bed of identical springs at cell-centred positions `(i + ½)·dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringFoundation {
    dx: f64,
    half_width: f64,
    material: Material,
}

impl SpringFoundation {
    pub fn new(dx: f64, half_width: f64, material: Material) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::domain(format!(
                "spring spacing must be > 0 m, got {dx}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::domain(format!(
                "foundation half-width must be > 0 m, got {half_width}"
            )));
        }
        Ok(Self {
            dx,
            half_width,
            material,
        })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    /// Stiffness of one spring, `E* Δx`.
    pub fn spring_stiffness(&self) -> f64 {
        self.material.e_star() * self.dx
    }
}

/// Sums the spring forces `E* Δx max(0, d - g(x_i))` under the indenter.
///
/// Fails when the contact zone is wider than the foundation, since the
/// truncated sum would underestimate the force.
pub fn discrete_foundation_force(
    foundation: &SpringFoundation,
    profile: &IndenterProfile,
    d: f64,
) -> Result<f64> {
    check_penetration(d)?;
    if d == 0.0 {
        return Ok(0.0);
    }
    let contact = profile.contact_half_width(d);
    if contact > foundation.half_width {
        return Err(Error::domain(format!(
            "contact half-width {contact} m exceeds foundation half-width {} m",
            foundation.half_width
        )));
    }
    let dx = foundation.dx;
    // Springs outside the contact zone carry no load, so only the index range
    // covering [-contact, contact] is visited.
    let last = ((contact.min(foundation.half_width) / dx) - 0.5).floor() as i64 + 1;
    let mut compression = 0.0;
    for i in -last - 1..=last {
        let x = (i as f64 + 0.5) * dx;
        if x.abs() > foundation.half_width {
            continue;
        }
        let u = d - profile.reduced_height(x);
        if u > 0.0 {
            compression += u;
        }
    }
    Ok(foundation.spring_stiffness() * compression)
}
