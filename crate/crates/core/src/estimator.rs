//! Joint estimation of elasticity and surface height from a logged
//! position/force stream.
//!
//! For a candidate surface height `z`, the penetration of each sample is
//! `d = z - z_ee` and the force model `κ d^e` is linear in `κ`, so the inner
//! fit is closed form. The outer problem searches `z` over the heights where
//! the measured force is still inside the sensor uncertainty band `±F_unc`,
//! keeping the height whose fit leaves the smallest mean squared residual.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::contact::IndenterProfile;
use crate::error::{Error, Result};
use crate::simulator::IndentationRecord;

/// Fraction of the deepest penetration discarded for a flat punch.
pub const FLAT_DISCARD_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitModel {
    profile: IndenterProfile,
    nu: f64,
    discard_fraction: f64,
}

impl FitModel {
    /// Model with the default discard rule: 20 % for a flat punch, none otherwise.
    pub fn new(profile: IndenterProfile, nu: f64) -> Result<Self> {
        let discard = match profile {
            IndenterProfile::Flat { .. } => FLAT_DISCARD_FRACTION,
            IndenterProfile::PowerLaw(_) => 0.0,
        };
        Self::with_discard_fraction(profile, nu, discard)
    }

    pub fn with_discard_fraction(
        profile: IndenterProfile,
        nu: f64,
        discard_fraction: f64,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::domain(format!(
                "Poisson ratio must lie in [0, 0.5), got {nu}"
            )));
        }
        if !(0.0..1.0).contains(&discard_fraction) {
            return Err(Error::domain(format!(
                "discard_fraction must lie in [0, 1), got {discard_fraction}"
            )));
        }
        Ok(Self {
            profile,
            nu,
            discard_fraction,
        })
    }

    pub fn profile(&self) -> &IndenterProfile {
        &self.profile
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn discard_fraction(&self) -> f64 {
        self.discard_fraction
    }

    /// Exponent of the force law: 3/2 for sphere and paraboloid, 1 for a flat punch.
    pub fn n_exp(&self) -> f64 {
        self.profile.force_exponent()
    }

    /// Reference area used to express force residuals as pressures.
    pub fn reference_area(&self, d_max: f64) -> f64 {
        match self.profile {
            IndenterProfile::Flat { a } => PI * a * a,
            IndenterProfile::PowerLaw(_) => {
                let r = self
                    .profile
                    .reduced_radius()
                    .unwrap_or_else(|| self.profile.contact_half_width(d_max));
                PI * r * r
            }
        }
    }
}

/// Closed-form fit of `κ` at a fixed surface height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaFit {
    pub kappa: f64,
    /// Mean squared force error (N²).
    pub residual: f64,
    /// Sum of squared force errors (N²).
    pub loss: f64,
    pub n_used: usize,
    /// Deepest penetration among the used samples (m).
    pub d_max: f64,
}

fn used_samples<'a>(
    records: &'a [IndentationRecord],
    z_surf: f64,
    model: &FitModel,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    let d_max = records
        .iter()
        .map(|r| z_surf - r.z_ee)
        .fold(0.0_f64, f64::max);
    let cutoff = model.discard_fraction * d_max;
    records.iter().filter_map(move |r| {
        let d = z_surf - r.z_ee;
        (d > 0.0 && d >= cutoff).then_some((d, r.f_z))
    })
}

/// Least-squares `κ` for `F ≈ κ d^e` with `d = z_surf - z_ee`.
///
/// Samples with `d <= 0` are dropped, as are samples shallower than
/// `discard_fraction · d_max`.
pub fn fit_kappa(records: &[IndentationRecord], z_surf: f64, model: &FitModel) -> Result<KappaFit> {
    let e = model.n_exp();
    let mut sum_fp = 0.0;
    let mut sum_pp = 0.0;
    let mut n_used = 0;
    let mut d_max = 0.0_f64;
    for (d, f) in used_samples(records, z_surf, model) {
        let phi = d.powf(e);
        sum_fp += f * phi;
        sum_pp += phi * phi;
        n_used += 1;
        d_max = d_max.max(d);
    }
    if n_used < 2 || sum_pp == 0.0 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_used,
        });
    }
    let kappa = sum_fp / sum_pp;
    let loss: f64 = used_samples(records, z_surf, model)
        .map(|(d, f)| (f - kappa * d.powf(e)).powi(2))
        .sum();
    Ok(KappaFit {
        kappa,
        residual: loss / n_used as f64,
        loss,
        n_used,
        d_max,
    })
}

/// Elastic modulus `E_f` from a fitted `κ`.
///
/// Sphere/paraboloid: `E_f = 3κ(1-ν²) / (4√R)` with `R = 1/c̃`; flat punch:
/// `E_f = κ(1-ν²) / (2a)`; general power law: `E_f = κ(1-ν²)(n+1)/(2n) c̃^{1/n}`.
pub fn convert_kappa(kappa: f64, model: &FitModel) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::domain(format!(
            "fitted kappa must be positive, got {kappa}; the fit is non-physical"
        )));
    }
    let poisson = 1.0 - model.nu * model.nu;
    let e_f = match model.profile {
        IndenterProfile::Flat { a } => kappa * poisson / (2.0 * a),
        IndenterProfile::PowerLaw(p) if p.n() == 2.0 => {
            let r = 1.0 / p.c_tilde();
            3.0 * kappa * poisson / (4.0 * r.sqrt())
        }
        IndenterProfile::PowerLaw(p) => {
            let n = p.n();
            kappa * poisson * (n + 1.0) / (2.0 * n) * p.c_tilde().powf(1.0 / n)
        }
    };
    Ok(e_f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    /// N·m^(-e)
    pub kappa: f64,
    /// Pa
    pub e_f: f64,
    /// m
    pub z_surf: f64,
    /// Mean squared force error (N²).
    pub residual_n2: f64,
    /// Same residual expressed as pressure over the reference area (kPa²).
    pub residual_kpa2: f64,
    /// Standard uncertainty of `E_f` with the surface height fitted jointly (Pa).
    pub sigma_e: f64,
    /// Standard uncertainty of `E_f` treating the surface height as known (Pa).
    pub sigma_e_fixed_surface: f64,
    pub n_used: usize,
    pub discard_fraction: f64,
    /// Disjoint height intervals where the force stayed inside `±F_unc`.
    pub feasible_intervals: usize,
}

/// Tuning of the surface search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Coarse grid size spread over the feasible heights.
    pub grid_points: usize,
    /// Final bracket width of the golden-section refinement (m).
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            tolerance: 1e-6,
        }
    }
}

/// Height intervals over which the measured force stays within `±f_unc`.
///
/// Consecutive in-band samples form a run; each run is widened to the
/// linearly interpolated band crossings with its neighbours, and runs that
/// overlap in height are merged.
pub fn feasible_intervals(records: &[IndentationRecord], f_unc: f64) -> Vec<(f64, f64)> {
    let inside = |r: &IndentationRecord| r.f_z.abs() <= f_unc;
    let crossing = |a: &IndentationRecord, b: &IndentationRecord| {
        let band = if b.f_z > f_unc || a.f_z > f_unc {
            f_unc
        } else {
            -f_unc
        };
        let df = b.f_z - a.f_z;
        if df == 0.0 {
            return a.z_ee;
        }
        let s = ((band - a.f_z) / df).clamp(0.0, 1.0);
        a.z_ee + s * (b.z_ee - a.z_ee)
    };

    let mut intervals = Vec::new();
    let mut i = 0;
    while i < records.len() {
        if !inside(&records[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < records.len() && inside(&records[i + 1]) {
            i += 1;
        }
        let end = i;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in &records[start..=end] {
            lo = lo.min(r.z_ee);
            hi = hi.max(r.z_ee);
        }
        if start > 0 {
            let z = crossing(&records[start], &records[start - 1]);
            lo = lo.min(z);
            hi = hi.max(z);
        }
        if end + 1 < records.len() {
            let z = crossing(&records[end], &records[end + 1]);
            lo = lo.min(z);
            hi = hi.max(z);
        }
        intervals.push((lo, hi));
        i += 1;
    }

    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

/// Golden-section search for the minimum of `f` on `[a, b]`; returns `(x, f(x))`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Surface localization with default search options.
pub fn localize_surface(
    records: &[IndentationRecord],
    model: &FitModel,
    f_unc: f64,
) -> Result<EstimationResult> {
    localize_surface_with(records, model, f_unc, &SearchOptions::default())
}

/// Minimizes the mean squared fit residual over feasible surface heights.
///
/// A coarse grid spread over all feasible intervals (in proportion to their
/// width) seeds a golden-section refinement around the best grid point.
pub fn localize_surface_with(
    records: &[IndentationRecord],
    model: &FitModel,
    f_unc: f64,
    options: &SearchOptions,
) -> Result<EstimationResult> {
    if !(f_unc.is_finite() && f_unc > 0.0) {
        return Err(Error::domain(format!("F_unc must be > 0 N, got {f_unc}")));
    }
    if !records.iter().any(|r| r.f_z > f_unc) {
        return Err(Error::NoSurfaceFound(format!(
            "force never exceeds F_unc = {f_unc} N, so contact never starts"
        )));
    }
    let intervals = feasible_intervals(records, f_unc);
    if intervals.is_empty() {
        return Err(Error::NoSurfaceFound(format!(
            "no sample force inside ±{f_unc} N"
        )));
    }
    if intervals.len() > 1 {
        log::info!(
            "force crosses the ±{f_unc} N band non-monotonically: {} disjoint feasible intervals",
            intervals.len()
        );
    }

    let objective = |z: f64| {
        fit_kappa(records, z, model)
            .map(|fit| fit.residual)
            .unwrap_or(f64::INFINITY)
    };

    let total_width: f64 = intervals.iter().map(|(lo, hi)| hi - lo).sum();
    let mut best: Option<(f64, f64, usize, f64)> = None; // (z, L, interval, spacing)
    for (k, &(lo, hi)) in intervals.iter().enumerate() {
        let width = hi - lo;
        let share = if total_width > 0.0 {
            (options.grid_points as f64 * width / total_width).round() as usize
        } else {
            1
        };
        let points = share.max(1);
        let spacing = if points > 1 {
            width / (points - 1) as f64
        } else {
            width
        };
        for j in 0..points {
            let z = if points > 1 {
                lo + spacing * j as f64
            } else {
                0.5 * (lo + hi)
            };
            let l = objective(z);
            if best.is_none_or(|b| l < b.1) {
                best = Some((z, l, k, spacing));
            }
        }
    }
    let (z_grid, l_grid, k, spacing) = best.expect("at least one grid point");
    if !l_grid.is_finite() {
        return Err(Error::NoSurfaceFound(
            "no feasible surface height leaves enough samples in contact".into(),
        ));
    }

    let (lo, hi) = intervals[k];
    let a = (z_grid - spacing).max(lo);
    let b = (z_grid + spacing).min(hi);
    let (z_refined, l_refined) = if b - a > options.tolerance {
        golden_section(objective, a, b, options.tolerance)
    } else {
        (z_grid, l_grid)
    };
    let z_surf = if l_refined <= l_grid {
        z_refined
    } else {
        z_grid
    };

    finish(records, model, z_surf, intervals.len())
}

fn finish(
    records: &[IndentationRecord],
    model: &FitModel,
    z_surf: f64,
    n_intervals: usize,
) -> Result<EstimationResult> {
    let fit = fit_kappa(records, z_surf, model)?;
    let e_f = convert_kappa(fit.kappa, model)?;
    let per_kappa = e_f / fit.kappa;

    // Linearized covariance of (κ, z_surf) with σ² from the post-fit residual.
    let e = model.n_exp();
    let mut jtj = Matrix2::zeros();
    for (d, _) in used_samples(records, z_surf, model) {
        let dk = d.powf(e);
        let dz = e * fit.kappa * d.powf(e - 1.0);
        jtj[(0, 0)] += dk * dk;
        jtj[(0, 1)] += dk * dz;
        jtj[(1, 1)] += dz * dz;
    }
    jtj[(1, 0)] = jtj[(0, 1)];
    let dof = fit.n_used.saturating_sub(2).max(1) as f64;
    let s2 = fit.loss / dof;
    let var_kappa_fixed = s2 / jtj[(0, 0)];
    let var_kappa = jtj
        .try_inverse()
        .map(|inv: Matrix2<f64>| s2 * inv[(0, 0)])
        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
        .unwrap_or(var_kappa_fixed);

    let area = model.reference_area(fit.d_max);
    let residual_kpa2 = fit.residual / (area * area) / 1e6;

    Ok(EstimationResult {
        kappa: fit.kappa,
        e_f,
        z_surf,
        residual_n2: fit.residual,
        residual_kpa2,
        sigma_e: var_kappa.sqrt() * per_kappa,
        sigma_e_fixed_surface: var_kappa_fixed.sqrt() * per_kappa,
        n_used: fit.n_used,
        discard_fraction: model.discard_fraction,
        feasible_intervals: n_intervals,
    })
}

/// Full offline pipeline: surface localization, `κ` fit and modulus conversion.
pub fn estimate(
    records: &[IndentationRecord],
    model: &FitModel,
    f_unc: f64,
) -> Result<EstimationResult> {
    localize_surface(records, model, f_unc)
}

/// Measured and model force for each sample, for plotting fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitCurvePoint {
    pub z_ee: f64,
    pub d: f64,
    pub f_measured: f64,
    pub f_model: f64,
}

pub fn fit_curve(
    records: &[IndentationRecord],
    result: &EstimationResult,
    model: &FitModel,
) -> Vec<FitCurvePoint> {
    let e = model.n_exp();
    records
        .iter()
        .map(|r| {
            let d = result.z_surf - r.z_ee;
            FitCurvePoint {
                z_ee: r.z_ee,
                d,
                f_measured: r.f_z,
                f_model: if d > 0.0 {
                    result.kappa * d.powf(e)
                } else {
                    0.0
                },
            }
        })
        .collect()
}
