//! Closed-form microstrip physics: Hammerstad line parameters, line loss,
//! rectangular patch synthesis and the radiating-slot admittances of the
//! transmission-line patch model.
//!
//! Everything here is quasi-static: effective permittivity and characteristic
//! impedance do not depend on frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * PI;

/// Electrical thickness above which the closed forms are flagged as outside
/// their thin-substrate regime.
pub const THIN_SUBSTRATE_LIMIT: f64 = 0.05;

/// Default number of trapezoid nodes for the mutual slot conductance integral.
pub const G12_QUADRATURE_POINTS: usize = 2001;

/// Free-space wavenumber at `freq`.
pub fn wavenumber(freq: f64) -> f64 {
    2.0 * PI * freq / SPEED_OF_LIGHT
}

/// Grounded dielectric slab with its metal cladding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Substrate {
    pub eps_r: f64,
    pub tan_delta: f64,
    /// Dielectric height in meters.
    pub height: f64,
    /// Conductor conductivity in S/m. `f64::INFINITY` models a perfect conductor.
    pub metal_conductivity: f64,
    /// Cladding thickness in meters.
    pub metal_thickness: f64,
}

impl Substrate {
    /// Copper conductivity (S/m).
    pub const COPPER_CONDUCTIVITY: f64 = 5.8e7;
    /// 1 oz copper cladding thickness (m).
    pub const COPPER_THICKNESS: f64 = 35e-6;

    pub fn new(
        eps_r: f64,
        tan_delta: f64,
        height: f64,
        metal_conductivity: f64,
        metal_thickness: f64,
    ) -> Result<Self> {
        let substrate = Substrate {
            eps_r,
            tan_delta,
            height,
            metal_conductivity,
            metal_thickness,
        };
        substrate.validate()?;
        Ok(substrate)
    }

    /// Copper-clad laminate with default cladding.
    pub fn copper_clad(eps_r: f64, tan_delta: f64, height: f64) -> Result<Self> {
        Self::new(
            eps_r,
            tan_delta,
            height,
            Self::COPPER_CONDUCTIVITY,
            Self::COPPER_THICKNESS,
        )
    }

    /// 1.574 mm RO3003-class laminate (εr = 3.0, tan δ = 0.0013), copper clad.
    pub fn ro3003() -> Self {
        Substrate {
            eps_r: 3.0,
            tan_delta: 0.0013,
            height: 1.574e-3,
            metal_conductivity: Self::COPPER_CONDUCTIVITY,
            metal_thickness: Self::COPPER_THICKNESS,
        }
    }

    /// Same dielectric with tan δ = 0 and a perfect conductor.
    pub fn lossless(self) -> Self {
        Substrate {
            tan_delta: 0.0,
            metal_conductivity: f64::INFINITY,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r.is_finite() && self.eps_r >= 1.0) {
            return Err(Error::invalid(
                "substrate.eps_r",
                format!("must be >= 1, got {}", self.eps_r),
            ));
        }
        if !(self.tan_delta.is_finite() && self.tan_delta >= 0.0) {
            return Err(Error::invalid(
                "substrate.tan_delta",
                format!("must be >= 0, got {}", self.tan_delta),
            ));
        }
        positive("substrate.height", self.height)?;
        if !(self.metal_conductivity > 0.0) {
            return Err(Error::invalid(
                "substrate.metal_conductivity",
                format!("must be positive, got {}", self.metal_conductivity),
            ));
        }
        if !(self.metal_thickness.is_finite() && self.metal_thickness >= 0.0) {
            return Err(Error::invalid(
                "substrate.metal_thickness",
                format!("must be >= 0, got {}", self.metal_thickness),
            ));
        }
        Ok(())
    }

    /// Height in free-space wavelengths at `freq`.
    pub fn electrical_height(&self, freq: f64) -> f64 {
        self.height * freq / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrostripLine {
    pub width: f64,
    pub length: f64,
}

impl MicrostripLine {
    pub fn new(width: f64, length: f64) -> Result<Self> {
        let line = MicrostripLine { width, length };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        positive("line.width", self.width)?;
        if !(self.length.is_finite() && self.length >= 0.0) {
            return Err(Error::invalid(
                "line.length",
                format!("must be >= 0, got {}", self.length),
            ));
        }
        Ok(())
    }
}

/// Rectangular patch. `length` is the resonant dimension along the feed axis,
/// `width` the transverse one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchElement {
    pub width: f64,
    pub length: f64,
}

impl PatchElement {
    pub fn new(width: f64, length: f64) -> Result<Self> {
        let patch = PatchElement { width, length };
        patch.validate()?;
        Ok(patch)
    }

    pub fn validate(&self) -> Result<()> {
        positive("patch.width", self.width)?;
        positive("patch.length", self.length)?;
        Ok(())
    }

    /// The patch body seen as a wide microstrip section.
    pub fn as_line(&self) -> MicrostripLine {
        MicrostripLine {
            width: self.width,
            length: self.length,
        }
    }
}

/// Line parameters. `alpha_d` and `alpha_c` are in Np/m and are zero when
/// produced by [`characteristic_impedance`] alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub z0: f64,
    pub eps_eff: f64,
    pub alpha_d: f64,
    pub alpha_c: f64,
}

impl LineParams {
    pub fn alpha(&self) -> f64 {
        self.alpha_d + self.alpha_c
    }

    /// Phase constant at `freq` (rad/m).
    pub fn beta(&self, freq: f64) -> f64 {
        wavenumber(freq) * self.eps_eff.sqrt()
    }

    pub fn lossless(z0: f64, eps_eff: f64) -> Self {
        LineParams {
            z0,
            eps_eff,
            alpha_d: 0.0,
            alpha_c: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotAdmittance {
    pub g1: f64,
    pub b1: f64,
    pub g12: f64,
}

/// Hammerstad effective permittivity of a line of `width` on `substrate`.
pub fn effective_permittivity(width: f64, substrate: &Substrate) -> Result<f64> {
    positive("width", width)?;
    let er = substrate.eps_r;
    let u = width / substrate.height;
    let mut fill = (1.0 + 12.0 / u).powf(-0.5);
    if u < 1.0 {
        fill += 0.04 * (1.0 - u) * (1.0 - u);
    }
    Ok((er + 1.0) / 2.0 + (er - 1.0) / 2.0 * fill)
}

/// Hammerstad characteristic impedance. Loss fields are left at zero; see
/// [`line_params`] for the lossy variant.
pub fn characteristic_impedance(width: f64, substrate: &Substrate) -> Result<LineParams> {
    let eps_eff = effective_permittivity(width, substrate)?;
    let u = width / substrate.height;
    let z0 = if u < 1.0 {
        60.0 / eps_eff.sqrt() * (8.0 / u + u / 4.0).ln()
    } else {
        120.0 * PI / (eps_eff.sqrt() * (u + 1.393 + 0.667 * (u + 1.444).ln()))
    };
    Ok(LineParams::lossless(z0, eps_eff))
}

/// Dielectric and conductor attenuation `(alpha_d, alpha_c)` in Np/m.
pub fn line_loss(line: &MicrostripLine, substrate: &Substrate, freq: f64) -> Result<(f64, f64)> {
    positive("freq", freq)?;
    let params = characteristic_impedance(line.width, substrate)?;
    Ok(attenuation(&params, line.width, substrate, freq))
}

fn attenuation(params: &LineParams, width: f64, substrate: &Substrate, freq: f64) -> (f64, f64) {
    let k0 = wavenumber(freq);
    let er = substrate.eps_r;
    let ee = params.eps_eff;
    let alpha_d = if er > 1.0 {
        k0 * er * (ee - 1.0) * substrate.tan_delta / (2.0 * ee.sqrt() * (er - 1.0))
    } else {
        // air dielectric: filling-factor limit, zero because eps_eff == 1
        k0 * (ee - 1.0) * substrate.tan_delta / (2.0 * ee.sqrt())
    };
    let rs = (PI * freq * MU0 / substrate.metal_conductivity).sqrt();
    let alpha_c = rs / (params.z0 * width);
    (alpha_d, alpha_c)
}

/// Characteristic impedance together with the loss terms at `freq`.
pub fn line_params(width: f64, substrate: &Substrate, freq: f64) -> Result<LineParams> {
    positive("freq", freq)?;
    let params = characteristic_impedance(width, substrate)?;
    let (alpha_d, alpha_c) = attenuation(&params, width, substrate, freq);
    Ok(LineParams {
        alpha_d,
        alpha_c,
        ..params
    })
}

/// Open-end fringe extension ΔL of a patch (or line) of `width`.
pub fn fringe_extension(width: f64, substrate: &Substrate) -> Result<f64> {
    let ee = effective_permittivity(width, substrate)?;
    let h = substrate.height;
    let u = width / h;
    Ok(0.412 * h * (ee + 0.3) * (u + 0.264) / ((ee - 0.258) * (u + 0.8)))
}

/// Intermediate values of the patch synthesis, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSynthesis {
    pub f0: f64,
    pub width: f64,
    pub eps_eff: f64,
    pub delta_l: f64,
    pub length: f64,
}

impl PatchSynthesis {
    pub fn compute(f0: f64, substrate: &Substrate) -> Result<Self> {
        positive("f0", f0)?;
        substrate.validate()?;
        let er = substrate.eps_r;
        let width = SPEED_OF_LIGHT / (2.0 * f0) * (2.0 / (er + 1.0)).sqrt();
        let eps_eff = effective_permittivity(width, substrate)?;
        let delta_l = fringe_extension(width, substrate)?;
        let length = SPEED_OF_LIGHT / (2.0 * f0 * eps_eff.sqrt()) - 2.0 * delta_l;
        if !(length > 0.0) {
            return Err(Error::SynthesisInfeasible { delta_l, length });
        }
        Ok(PatchSynthesis {
            f0,
            width,
            eps_eff,
            delta_l,
            length,
        })
    }

    pub fn patch(&self) -> PatchElement {
        PatchElement {
            width: self.width,
            length: self.length,
        }
    }
}

/// Synthesizes a rectangular patch resonant at `f0`.
pub fn design_patch(f0: f64, substrate: &Substrate) -> Result<PatchElement> {
    PatchSynthesis::compute(f0, substrate).map(|s| s.patch())
}

/// Self conductance, self susceptance and mutual conductance of the patch's
/// two radiating slots at `freq`.
pub fn patch_slot_admittance(
    patch: &PatchElement,
    substrate: &Substrate,
    freq: f64,
) -> Result<SlotAdmittance> {
    positive("freq", freq)?;
    patch.validate()?;
    let lambda0 = SPEED_OF_LIGHT / freq;
    let k0h = wavenumber(freq) * substrate.height;
    let scale = patch.width / (120.0 * lambda0);
    Ok(SlotAdmittance {
        g1: scale * (1.0 - k0h * k0h / 24.0),
        b1: scale * (1.0 - 0.636 * k0h.ln()),
        g12: mutual_conductance(patch, freq, G12_QUADRATURE_POINTS),
    })
}

/// Mutual conductance between the two slots of `patch`, by an `points`-node
/// uniform trapezoid rule over θ ∈ [0, π].
pub fn mutual_conductance(patch: &PatchElement, freq: f64, points: usize) -> f64 {
    let points = points.max(2);
    let k0 = wavenumber(freq);
    let half_kw = 0.5 * k0 * patch.width;
    let kl = k0 * patch.length;
    let step = PI / (points - 1) as f64;
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        // sin(a c)/c -> a as c -> 0
        let slot = if c.abs() < 1e-12 {
            half_kw
        } else {
            (half_kw * c).sin() / c
        };
        slot * slot * libm::j0(kl * s) * s * s * s
    };
    let mut sum = 0.5 * (integrand(0.0) + integrand(PI));
    for i in 1..points - 1 {
        sum += integrand(i as f64 * step);
    }
    sum * step / (120.0 * PI * PI)
}

/// Machine-readable model-validity note attached to analysis outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityWarning {
    pub code: String,
    pub message: String,
    pub h_over_lambda0: f64,
}

/// Flags substrates that are electrically thick at `freq`. The closed forms
/// are still evaluated; callers decide what to do with the note.
pub fn validity_warnings(substrate: &Substrate, freq: f64) -> Vec<ValidityWarning> {
    let ratio = substrate.electrical_height(freq);
    if ratio > THIN_SUBSTRATE_LIMIT {
        vec![ValidityWarning {
            code: "electrically_thick_substrate".into(),
            message: format!(
                "h/lambda0 = {ratio:.4} exceeds {THIN_SUBSTRATE_LIMIT}; closed-form microstrip models lose accuracy"
            ),
            h_over_lambda0: ratio,
        }]
    } else {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn air_substrate_has_unit_eps_eff() {
        let air = Substrate::new(1.0, 0.0, 1e-3, 5.8e7, 35e-6).unwrap();
        for w in [1e-5, 1e-4, 1e-3, 1e-2] {
            assert_eq!(effective_permittivity(w, &air).unwrap(), 1.0);
            assert_eq!(characteristic_impedance(w, &air).unwrap().eps_eff, 1.0);
        }
    }

    #[test]
    fn eps_eff_hand_values() {
        let sub = Substrate::ro3003();
        // frozen from an independent hand evaluation of the closed form
        let wide = effective_permittivity(3.788e-3, &sub).unwrap();
        assert!(rel(wide, 2.408716114477027) < 1e-12, "{wide}");
        let narrow = effective_permittivity(0.5e-3, &sub).unwrap();
        assert!(rel(narrow, 2.179213404893563) < 1e-12, "{narrow}");
    }

    #[test]
    fn z0_hand_values() {
        let sub = Substrate::ro3003();
        let feed = characteristic_impedance(0.5e-3, &sub).unwrap();
        assert!(rel(feed.z0, 131.2554879967578) < 1e-12, "{}", feed.z0);
        let wide = characteristic_impedance(3.785451428578272e-3, &sub).unwrap();
        assert!(rel(wide.z0, 51.71662089512687) < 1e-12, "{}", wide.z0);
        let narrower = characteristic_impedance(0.4e-3, &sub).unwrap();
        assert!(narrower.z0 > feed.z0);
    }

    #[test]
    fn non_positive_width_rejected() {
        let sub = Substrate::ro3003();
        assert!(matches!(
            effective_permittivity(0.0, &sub),
            Err(Error::InvalidInput { .. })
        ));
        assert!(characteristic_impedance(-1e-3, &sub).is_err());
    }

    #[test]
    fn lossless_limit_and_linearity() {
        let line = MicrostripLine::new(0.5e-3, 1.5e-3).unwrap();
        let sub = Substrate::ro3003();
        let (ad, ac) = line_loss(&line, &sub.lossless(), 28e9).unwrap();
        assert_eq!((ad, ac), (0.0, 0.0));

        let (ad, ac) = line_loss(&line, &sub, 28e9).unwrap();
        assert!(ad > 0.0 && ad.is_finite());
        assert!(ac > 0.0 && ac.is_finite());

        let doubled = Substrate {
            tan_delta: 2.0 * sub.tan_delta,
            ..sub
        };
        let (ad2, _) = line_loss(&line, &doubled, 28e9).unwrap();
        assert_eq!(ad2, 2.0 * ad);
    }

    #[test]
    fn air_line_loss_is_finite() {
        let air = Substrate::new(1.0, 0.01, 1e-3, 5.8e7, 35e-6).unwrap();
        let line = MicrostripLine::new(1e-3, 1e-2).unwrap();
        let (ad, ac) = line_loss(&line, &air, 10e9).unwrap();
        assert_eq!(ad, 0.0);
        assert!(ac.is_finite() && ac > 0.0);
    }

    #[test]
    fn patch_synthesis_hand_values() {
        let s = PatchSynthesis::compute(28e9, &Substrate::ro3003()).unwrap();
        assert!(rel(s.width, 3.785451428578272e-3) < 1e-6);
        assert!(rel(s.eps_eff, 2.40860156112327) < 1e-6);
        assert!(rel(s.delta_l, 6.801541160900025e-4) < 1e-6);
        assert!(rel(s.length, 2.089144468072285e-3) < 1e-6);
    }

    #[test]
    fn air_patch_width_is_half_wavelength() {
        let air = Substrate::new(1.0, 0.0, 1e-4, 5.8e7, 35e-6).unwrap();
        let p = design_patch(10e9, &air).unwrap();
        assert_eq!(p.width, SPEED_OF_LIGHT / 10e9 / 2.0);
    }

    #[test]
    fn doubling_f0_halves_width() {
        let sub = Substrate::copper_clad(2.2, 0.0009, 0.254e-3).unwrap();
        let a = design_patch(10e9, &sub).unwrap();
        let b = design_patch(20e9, &sub).unwrap();
        assert!(rel(b.width, a.width / 2.0) < 1e-15);
    }

    #[test]
    fn thick_substrate_synthesis_fails() {
        let slab = Substrate::copper_clad(10.2, 0.0, 20e-3).unwrap();
        match design_patch(28e9, &slab) {
            Err(Error::SynthesisInfeasible { delta_l, length }) => {
                assert!(delta_l > 0.0);
                assert!(length <= 0.0);
            }
            other => panic!("expected infeasible synthesis, got {other:?}"),
        }
    }

    #[test]
    fn slot_conductance_vanishes_with_width() {
        let sub = Substrate::ro3003();
        let g = |w: f64| {
            patch_slot_admittance(&PatchElement::new(w, 2e-3).unwrap(), &sub, 28e9)
                .unwrap()
                .g1
        };
        assert!(g(1e-9) < 1e-9);
        assert!(g(1e-9) > 0.0);
        assert!(g(2e-3) > g(1e-3));
    }

    #[test]
    fn slot_admittance_of_designed_patch() {
        let sub = Substrate::ro3003();
        let p = design_patch(28e9, &sub).unwrap();
        let y = patch_slot_admittance(&p, &sub, 28e9).unwrap();
        assert!(y.g1 > 0.0);
        assert!(y.g12.is_finite());
        // independent adaptive quadrature of the same integral
        assert!(rel(y.g12, 9.190243031115648e-4) < 1e-6, "{}", y.g12);
    }

    #[test]
    fn mutual_conductance_at_zero_separation() {
        // J0(0) = 1: the integral collapses to the single-slot radiation integral
        let sub = Substrate::ro3003();
        let w = design_patch(28e9, &sub).unwrap().width;
        let g = mutual_conductance(
            &PatchElement {
                width: w,
                length: 0.0,
            },
            28e9,
            2001,
        );
        assert!(rel(g, 1.282329518217499e-3) < 1e-6, "{g}");
    }

    #[test]
    fn g12_quadrature_converges() {
        let sub = Substrate::ro3003();
        let p = design_patch(28e9, &sub).unwrap();
        let coarse = mutual_conductance(&p, 28e9, 1001);
        let fine = mutual_conductance(&p, 28e9, 2001);
        assert!(rel(coarse, fine) < 1e-3);
    }

    #[test]
    fn thick_substrate_is_flagged() {
        let sub = Substrate::ro3003();
        let w = validity_warnings(&sub, 28e9);
        assert_eq!(w.len(), 1);
        assert!((w[0].h_over_lambda0 - 0.147).abs() < 1e-3);
        let thin = Substrate::copper_clad(3.0, 0.0013, 0.127e-3).unwrap();
        assert!(validity_warnings(&thin, 28e9).is_empty());
    }

    #[test]
    fn invalid_substrates_rejected() {
        assert!(Substrate::copper_clad(0.5, 0.0, 1e-3).is_err());
        assert!(Substrate::copper_clad(3.0, -0.1, 1e-3).is_err());
        assert!(Substrate::copper_clad(3.0, 0.0, 0.0).is_err());
        assert!(Substrate::new(3.0, 0.0, 1e-3, 0.0, 35e-6).is_err());
    }
}
