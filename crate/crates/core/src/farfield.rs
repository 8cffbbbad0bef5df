//! Pattern multiplication over a spherical grid and the usual far-field
//! figures of merit.
//!
//! Angles: θ is measured from the broadside normal of the patch plane, φ from
//! the array axis (x). The ground plane is infinite, so nothing radiates for
//! θ > 90°.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::mstrip::{fringe_extension, wavenumber, PatchElement, Substrate};
use crate::network::{ArrayLayout, ExcitationVector, NetworkResult, C64};

/// Default angular step of the grid (degrees).
pub const DEFAULT_GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid {
    pub theta_step: f64,
    pub phi_step: f64,
}

impl Default for SphericalGrid {
    fn default() -> Self {
        SphericalGrid {
            theta_step: DEFAULT_GRID_STEP,
            phi_step: DEFAULT_GRID_STEP,
        }
    }
}

fn divisions(range: f64, step: f64, field: &str) -> Result<usize> {
    positive(field, step)?;
    let n = range / step;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::invalid(
            field,
            format!("{step} does not divide {range} degrees evenly"),
        ));
    }
    Ok(rounded as usize)
}

impl SphericalGrid {
    pub fn new(theta_step: f64, phi_step: f64) -> Result<Self> {
        let grid = SphericalGrid {
            theta_step,
            phi_step,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn uniform(step: f64) -> Result<Self> {
        Self::new(step, step)
    }

    pub fn validate(&self) -> Result<()> {
        divisions(180.0, self.theta_step, "grid.theta_step")?;
        divisions(360.0, self.phi_step, "grid.phi_step")?;
        Ok(())
    }

    pub fn n_theta(&self) -> usize {
        (180.0 / self.theta_step).round() as usize + 1
    }

    pub fn n_phi(&self) -> usize {
        (360.0 / self.phi_step).round() as usize
    }

    /// θ samples in degrees, 0 to 180 inclusive.
    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta())
            .map(|i| i as f64 * self.theta_step)
            .collect()
    }

    /// φ samples in degrees, 0 inclusive to 360 exclusive.
    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_phi())
            .map(|j| j as f64 * self.phi_step)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the φ sample at `phi` degrees, if it lies on the grid.
    pub fn phi_index(&self, phi: f64) -> Option<usize> {
        let j = phi.rem_euclid(360.0) / self.phi_step;
        let r = j.round();
        ((j - r).abs() < 1e-9).then_some(r as usize % self.n_phi())
    }
}

/// Radiation intensity sampled θ-major on a [`SphericalGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub grid: SphericalGrid,
    pub intensity: Vec<f64>,
    pub freq: f64,
}

impl FarFieldPattern {
    /// Samples `intensity(theta_deg, phi_deg)` over the grid.
    pub fn from_fn<F>(grid: SphericalGrid, freq: f64, intensity: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        grid.validate()?;
        let (thetas, phis) = (grid.thetas(), grid.phis());
        let n_phi = phis.len();
        let intensity: Vec<f64> = (0..thetas.len() * n_phi)
            .into_par_iter()
            .map(|k| intensity(thetas[k / n_phi], phis[k % n_phi]))
            .collect();
        if intensity.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::invalid(
                "pattern",
                "intensities must be finite and non-negative",
            ));
        }
        Ok(FarFieldPattern {
            grid,
            intensity,
            freq,
        })
    }

    pub fn at(&self, i_theta: usize, i_phi: usize) -> f64 {
        self.intensity[i_theta * self.grid.n_phi() + i_phi]
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().copied().fold(0.0, f64::max)
    }

    /// `(theta_deg, phi_deg)` of the strongest sample (first one on ties).
    pub fn peak_direction(&self) -> (f64, f64) {
        let mut best = 0;
        for (k, &u) in self.intensity.iter().enumerate() {
            if u > self.intensity[best] {
                best = k;
            }
        }
        let n_phi = self.grid.n_phi();
        (
            (best / n_phi) as f64 * self.grid.theta_step,
            (best % n_phi) as f64 * self.grid.phi_step,
        )
    }

    /// ∬ U sinθ dθ dφ: trapezoid in θ, periodic rectangle rule in φ.
    pub fn radiated_power(&self) -> f64 {
        let (dt, dp) = (
            self.grid.theta_step.to_radians(),
            self.grid.phi_step.to_radians(),
        );
        let n_theta = self.grid.n_theta();
        let n_phi = self.grid.n_phi();
        let mut total = 0.0;
        for i in 0..n_theta {
            let weight = if i == 0 || i + 1 == n_theta { 0.5 } else { 1.0 };
            let sin_t = (i as f64 * dt).sin();
            let row: f64 = self.intensity[i * n_phi..(i + 1) * n_phi].iter().sum();
            total += weight * sin_t * row;
        }
        total * dt * dp
    }

    /// Directivity of every sample, linear.
    pub fn directivity_map(&self) -> Result<Vec<f64>> {
        let p = self.radiated_power();
        if !(p > 0.0) {
            return Err(Error::invalid("pattern", "no radiated power"));
        }
        Ok(self.intensity.iter().map(|u| 4.0 * PI * u / p).collect())
    }
}

/// Field magnitude of a single radiator as a function of direction.
pub trait ElementPattern: Sync {
    fn field(&self, theta_deg: f64, phi_deg: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Isotropic;

impl ElementPattern for Isotropic {
    fn field(&self, _theta: f64, _phi: f64) -> f64 {
        1.0
    }
}

/// Two-slot cavity model of a rectangular patch, length along the array axis.
///
/// Field magnitude `|sinc(X)| |cos(Z)| sqrt(1 - sin²θ sin²φ)` with
/// `X = (k0 W/2) sinθ sinφ` and `Z = (k0 Le/2) sinθ cosφ`, `Le = L + 2ΔL`.
/// The square-root term is the projection of the slots' magnetic current,
/// which gives the E-plane (φ = 0) its flat slot response and the H-plane
/// (φ = 90°) its cosθ taper.
#[derive(Debug, Clone, Copy)]
pub struct PatchPattern {
    half_kw: f64,
    half_kle: f64,
}

impl PatchPattern {
    pub fn new(patch: &PatchElement, substrate: &Substrate, freq: f64) -> Result<Self> {
        positive("freq", freq)?;
        patch.validate()?;
        let k0 = wavenumber(freq);
        let le = patch.length + 2.0 * fringe_extension(patch.width, substrate)?;
        Ok(PatchPattern {
            half_kw: 0.5 * k0 * patch.width,
            half_kle: 0.5 * k0 * le,
        })
    }

    /// Electrical half-length `k0 Le / 2` of the slot pair.
    pub fn half_electrical_length(&self) -> f64 {
        self.half_kle
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl ElementPattern for PatchPattern {
    fn field(&self, theta_deg: f64, phi_deg: f64) -> f64 {
        let (st, _) = theta_deg.to_radians().sin_cos();
        let (sp, cp) = phi_deg.to_radians().sin_cos();
        let slot = sinc(self.half_kw * st * sp).abs();
        let pair = (self.half_kle * st * cp).cos().abs();
        let projection = (1.0 - st * st * sp * sp).max(0.0).sqrt();
        slot * pair * projection
    }
}

/// Single-patch field magnitude at one direction.
pub fn patch_element_pattern(
    patch: &PatchElement,
    substrate: &Substrate,
    freq: f64,
    theta_deg: f64,
    phi_deg: f64,
) -> Result<f64> {
    if !(0.0..=180.0).contains(&theta_deg) || !phi_deg.is_finite() {
        return Err(Error::invalid(
            "angle",
            format!("theta {theta_deg} outside [0, 180] or non-finite phi"),
        ));
    }
    Ok(PatchPattern::new(patch, substrate, freq)?.field(theta_deg, phi_deg))
}

/// `Σ aₙ exp(j k0 xₙ sinθ cosφ)` over elements at `positions` on the x axis.
pub fn array_factor(
    excitations: &ExcitationVector,
    positions: &[f64],
    freq: f64,
    theta_deg: f64,
    phi_deg: f64,
) -> Result<C64> {
    if excitations.len() != positions.len() {
        return Err(Error::invalid(
            "positions",
            format!(
                "{} positions for {} excitations",
                positions.len(),
                excitations.len()
            ),
        ));
    }
    let u = wavenumber(freq) * theta_deg.to_radians().sin() * phi_deg.to_radians().cos();
    Ok(excitations
        .amplitudes
        .iter()
        .zip(positions)
        .map(|(a, x)| a * C64::from_polar(1.0, u * x))
        .sum())
}

/// Superposes element patterns with excitations at `positions`; intensity is
/// `|Σ aₙ Eₙ(θ, φ) exp(j k0 xₙ sinθ cosφ)|²`, zero below the ground plane.
pub fn synthesize_pattern<E: ElementPattern>(
    elements: &[E],
    positions: &[f64],
    excitations: &ExcitationVector,
    grid: SphericalGrid,
) -> Result<FarFieldPattern> {
    if elements.len() != excitations.len() || positions.len() != excitations.len() {
        return Err(Error::invalid(
            "excitations",
            format!(
                "{} elements, {} positions, {} excitations",
                elements.len(),
                positions.len(),
                excitations.len()
            ),
        ));
    }
    let k0 = wavenumber(excitations.freq);
    FarFieldPattern::from_fn(grid, excitations.freq, |theta, phi| {
        if theta > 90.0 {
            return 0.0;
        }
        let u = k0 * theta.to_radians().sin() * phi.to_radians().cos();
        let field: C64 = elements
            .iter()
            .zip(positions)
            .zip(&excitations.amplitudes)
            .map(|((e, x), a)| a * e.field(theta, phi) * C64::from_polar(1.0, u * x))
            .sum();
        field.norm_sqr()
    })
}

/// Far field of `layout` driven with `excitations` (pattern multiplication
/// with per-patch cavity element patterns).
pub fn total_pattern(
    layout: &ArrayLayout,
    excitations: &ExcitationVector,
    grid: SphericalGrid,
) -> Result<FarFieldPattern> {
    let freq = excitations.freq;
    let elements = layout
        .patches
        .iter()
        .map(|p| PatchPattern::new(p, &layout.substrate, freq))
        .collect::<Result<Vec<_>>>()?;
    synthesize_pattern(&elements, &layout.element_positions(), excitations, grid)
}

fn to_db10(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Peak directivity in dBi.
pub fn directivity(pattern: &FarFieldPattern) -> Result<f64> {
    let p = pattern.radiated_power();
    if !(p > 0.0) {
        return Err(Error::invalid("pattern", "no radiated power"));
    }
    Ok(to_db10(4.0 * PI * pattern.max() / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutMetrics {
    pub cut_phi: f64,
    /// Signed angle of the cut maximum from broadside; negative values lie in
    /// the φ + 180° half-plane.
    pub peak_theta: f64,
    pub hpbw: f64,
    /// Highest sidelobe relative to the main-lobe peak, `-inf` without sidelobes.
    pub sll_db: f64,
    /// The -3 dB level was not reached before the pattern's horizon on at
    /// least one side.
    pub hpbw_truncated: bool,
}

/// A great-circle cut: signed angles in `[-180, 180)` with their intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCut {
    pub cut_phi: f64,
    pub angles: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl PatternCut {
    /// Cut levels in dB relative to the cut maximum.
    pub fn normalized_db(&self) -> Vec<f64> {
        let peak = self.intensity.iter().copied().fold(0.0, f64::max);
        self.intensity.iter().map(|u| to_db10(u / peak)).collect()
    }
}

/// Extracts the φ = `cut_phi` great circle; the half-plane φ + 180° is mapped
/// to negative angles.
pub fn pattern_cut(pattern: &FarFieldPattern, cut_phi: f64) -> Result<PatternCut> {
    let grid = &pattern.grid;
    let (Some(j_front), Some(j_back)) = (grid.phi_index(cut_phi), grid.phi_index(cut_phi + 180.0))
    else {
        return Err(Error::invalid(
            "cut_phi",
            format!("{cut_phi} and its opposite must lie on the phi grid"),
        ));
    };
    let n_theta = grid.n_theta();
    let mut angles = Vec::with_capacity(2 * (n_theta - 1));
    let mut intensity = Vec::with_capacity(2 * (n_theta - 1));
    // t = -180 .. 0 from the back half-plane, theta running 180 -> 1 step
    for i in (1..n_theta).rev() {
        angles.push(-(i as f64) * grid.theta_step);
        intensity.push(pattern.at(i, j_back));
    }
    for i in 0..n_theta - 1 {
        angles.push(i as f64 * grid.theta_step);
        intensity.push(pattern.at(i, j_front));
    }
    Ok(PatternCut {
        cut_phi,
        angles,
        intensity,
    })
}

pub fn cut_metrics(pattern: &FarFieldPattern, cut_phi: f64) -> Result<CutMetrics> {
    let cut = pattern_cut(pattern, cut_phi)?;
    let n = cut.intensity.len();
    let u = &cut.intensity;
    // ties go to the sample nearest broadside
    let mut peak = 0;
    for k in 0..n {
        if u[k] > u[peak] || (u[k] == u[peak] && cut.angles[k].abs() < cut.angles[peak].abs()) {
            peak = k;
        }
    }
    if !(u[peak] > 0.0) {
        return Err(Error::invalid("pattern", "cut carries no power"));
    }
    let db: Vec<f64> = u.iter().map(|x| to_db10(x / u[peak])).collect();
    let step = pattern.grid.theta_step;
    let wrap = |k: isize| -> usize { k.rem_euclid(n as isize) as usize };

    // -3 dB crossing walking in `dir`; the walk stops at the horizon (zero
    // intensity) or after half the circle.
    let half_power = |dir: isize| -> (f64, bool) {
        let mut k = peak as isize;
        for walked in 1..=n / 2 {
            let next = wrap(k + dir);
            if u[next] <= 0.0 {
                return (walked as f64 - 1.0, true);
            }
            if db[next] <= -3.0 {
                let cur = wrap(k);
                let t = (-3.0 - db[cur]) / (db[next] - db[cur]);
                return (walked as f64 - 1.0 + t, false);
            }
            k += dir;
        }
        ((n / 2) as f64, true)
    };
    let (left, trunc_l) = half_power(-1);
    let (right, trunc_r) = half_power(1);
    let hpbw = (left + right) * step;

    // main lobe: walk down to the first slope reversal (the first null)
    let lobe_edge = |dir: isize| -> usize {
        let mut k = peak as isize;
        for _ in 0..n / 2 {
            let cur = wrap(k);
            let next = wrap(k + dir);
            if u[next] > u[cur] || u[next] <= 0.0 {
                return cur;
            }
            k += dir;
        }
        wrap(k)
    };
    let lo = lobe_edge(-1);
    let hi = lobe_edge(1);
    let in_main = |k: usize| -> bool {
        // circular interval lo ..= hi through the peak
        let from_lo = (k + n - lo) % n;
        let span = (hi + n - lo) % n;
        from_lo <= span
    };

    let mut sll = f64::NEG_INFINITY;
    for k in 0..n {
        if in_main(k) || u[k] <= 0.0 {
            continue;
        }
        let (prev, next) = (u[wrap(k as isize - 1)], u[wrap(k as isize + 1)]);
        if u[k] > prev && u[k] >= next {
            sll = sll.max(db[k]);
        }
    }

    Ok(CutMetrics {
        cut_phi,
        peak_theta: cut.angles[peak],
        hpbw,
        sll_db: sll,
        hpbw_truncated: trunc_l || trunc_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub directivity_dbi: f64,
    pub radiation_efficiency: f64,
    pub mismatch_factor: f64,
    pub realized_gain_dbi: f64,
}

/// Line-loss efficiency `exp(-2 Σ αᵢ lᵢ)` over every line segment of `layout`.
pub fn line_efficiency(layout: &ArrayLayout, freq: f64) -> Result<f64> {
    let mut exponent = 0.0;
    for seg in layout.line_segments() {
        let p = crate::mstrip::line_params(seg.width, &layout.substrate, freq)?;
        exponent += p.alpha() * seg.length;
    }
    Ok((-2.0 * exponent).exp())
}

/// Discounts `directivity_dbi` by line loss and port mismatch at `freq`.
pub fn realized_gain(
    directivity_dbi: f64,
    layout: &ArrayLayout,
    network: &NetworkResult,
    freq: f64,
) -> Result<GainSummary> {
    let gamma = network.s11_at(freq).ok_or_else(|| {
        Error::invalid("freq", format!("{freq} Hz lies outside the network sweep"))
    })?;
    let radiation_efficiency = line_efficiency(layout, freq)?;
    let mismatch_factor = (1.0 - gamma.norm_sqr()).clamp(0.0, 1.0);
    Ok(GainSummary {
        directivity_dbi,
        radiation_efficiency,
        mismatch_factor,
        realized_gain_dbi: directivity_dbi + to_db10(radiation_efficiency * mismatch_factor),
    })
}
