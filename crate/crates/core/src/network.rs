//! Series-fed array as an ABCD cascade:
//! feed line, then for each patch `[slot, patch body, slot, interconnect]`,
//! the last interconnect omitted and the far slot left open.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::mstrip::{
    fringe_extension, line_params, patch_slot_admittance, LineParams, MicrostripLine, PatchElement,
    Substrate,
};

pub type C64 = Complex64;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Default reference impedance of the driving port (Ω).
pub const DEFAULT_Z_REF: f64 = 50.0;

/// Chain (transmission) matrix of a two-port: `[V1, I1] = [[a, b], [c, d]] [V2, I2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortAbcd {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl TwoPortAbcd {
    pub const IDENTITY: TwoPortAbcd = TwoPortAbcd {
        a: ONE,
        b: ZERO,
        c: ZERO,
        d: ONE,
    };

    pub fn determinant(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// `self` followed by `next` (toward the load).
    pub fn then(&self, next: &TwoPortAbcd) -> TwoPortAbcd {
        TwoPortAbcd {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Maps the input-port state `(v, i)` to the output-port state.
    pub fn propagate(&self, v: C64, i: C64) -> Option<(C64, C64)> {
        let det = self.determinant();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        Some((
            (self.d * v - self.b * i) / det,
            (-self.c * v + self.a * i) / det,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

/// Uniform lossy line section of `length` meters.
pub fn abcd_line(params: &LineParams, length: f64, freq: f64) -> Result<TwoPortAbcd> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::invalid(
            "length",
            format!("must be >= 0, got {length}"),
        ));
    }
    positive("z0", params.z0)?;
    let gl = C64::new(params.alpha(), params.beta(freq)) * length;
    let (ch, sh) = (gl.cosh(), gl.sinh());
    Ok(TwoPortAbcd {
        a: ch,
        b: sh * params.z0,
        c: sh / params.z0,
        d: ch,
    })
}

pub fn abcd_shunt(y: C64) -> TwoPortAbcd {
    TwoPortAbcd {
        a: ONE,
        b: ZERO,
        c: y,
        d: ONE,
    }
}

/// Ordered product of `chain`, source side first.
pub fn cascade(chain: &[TwoPortAbcd]) -> Result<TwoPortAbcd> {
    let (first, rest) = chain
        .split_first()
        .ok_or_else(|| Error::invalid("chain", "cannot cascade an empty list"))?;
    Ok(rest.iter().fold(*first, |acc, m| acc.then(m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Load {
    Open,
    Impedance(C64),
}

pub fn input_impedance(chain: &TwoPortAbcd, load: Load) -> Result<C64> {
    let (num, den) = match load {
        Load::Open => (chain.a, chain.c),
        Load::Impedance(zl) => (chain.a * zl + chain.b, chain.c * zl + chain.d),
    };
    let zin = num / den;
    if den.norm() == 0.0 || !zin.is_finite() {
        return Err(Error::ResonantSingularity);
    }
    Ok(zin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub gamma: C64,
    /// `-inf` for a perfect match.
    pub s11_db: f64,
    /// `+inf` once |Γ| reaches 1.
    pub vswr: f64,
}

pub fn reflection(zin: C64, z_ref: f64) -> Result<Reflection> {
    let den = zin + z_ref;
    if den.norm() == 0.0 {
        return Err(Error::invalid("zin", "zin + z_ref vanishes"));
    }
    let gamma = (zin - z_ref) / den;
    let mag = gamma.norm();
    Ok(Reflection {
        gamma,
        s11_db: 20.0 * mag.log10(),
        vswr: vswr_from_magnitude(mag),
    })
}

pub fn vswr_from_magnitude(mag: f64) -> f64 {
    if mag >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + mag) / (1.0 - mag)
    }
}

/// How the shunt susceptance of each radiating slot is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotSusceptance {
    /// `B = tan(β ΔL) / Z0_patch`: the open-end fringe extension ΔL of the
    /// patch expressed as an edge susceptance, so the synthesized length
    /// resonates where the synthesis says it does.
    #[default]
    FringeExtension,
    /// Narrow-slot closed form `B1 = W/(120 λ0) (1 - 0.636 ln(k0 h))`.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkOptions {
    pub z_ref: f64,
    pub slot_susceptance: SlotSusceptance,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions {
            z_ref: DEFAULT_Z_REF,
            slot_susceptance: SlotSusceptance::default(),
        }
    }
}

/// Feed line, N patches and N-1 interconnects on one substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub substrate: Substrate,
    pub feed: MicrostripLine,
    pub patches: Vec<PatchElement>,
    pub interconnects: Vec<MicrostripLine>,
    /// Edge-to-edge gap between adjacent patches, realized by the interconnects.
    pub gap: f64,
    /// Center-to-center element pitch used for the array factor instead of
    /// `patch length + gap`.
    pub center_spacing: Option<f64>,
}

impl ArrayLayout {
    /// `count` identical patches joined by interconnects of `interconnect_width`
    /// whose length equals `gap`.
    pub fn uniform(
        substrate: Substrate,
        feed: MicrostripLine,
        patch: PatchElement,
        count: usize,
        interconnect_width: f64,
        gap: f64,
    ) -> Result<Self> {
        let layout = ArrayLayout {
            substrate,
            feed,
            patches: vec![patch; count],
            interconnects: vec![
                MicrostripLine {
                    width: interconnect_width,
                    length: gap,
                };
                count.saturating_sub(1)
            ],
            gap,
            center_spacing: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        self.substrate.validate()?;
        self.feed.validate().map_err(|e| rename_field(e, "feed"))?;
        if self.patches.is_empty() {
            return Err(Error::invalid("patch.count", "at least one patch required"));
        }
        if self.interconnects.len() + 1 != self.patches.len() {
            return Err(Error::invalid(
                "interconnect",
                format!(
                    "{} patches need {} interconnects, got {}",
                    self.patches.len(),
                    self.patches.len() - 1,
                    self.interconnects.len()
                ),
            ));
        }
        for p in &self.patches {
            p.validate()?;
        }
        positive("gap", self.gap)?;
        for line in &self.interconnects {
            line.validate()
                .map_err(|e| rename_field(e, "interconnect"))?;
            if (line.length - self.gap).abs() > 1e-12 * self.gap {
                return Err(Error::invalid(
                    "interconnect.length",
                    format!("must equal the gap {} m, got {} m", self.gap, line.length),
                ));
            }
        }
        if let Some(pitch) = self.center_spacing {
            positive("center_spacing", pitch)?;
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.patches.len()
    }

    /// Element centers along the array axis, centered on the array midpoint.
    pub fn element_positions(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.patches.len());
        let mut cursor = 0.0;
        for (n, p) in self.patches.iter().enumerate() {
            match self.center_spacing {
                Some(pitch) => x.push(n as f64 * pitch),
                None => {
                    x.push(cursor + 0.5 * p.length);
                    cursor += p.length + self.gap;
                }
            }
        }
        let mid = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - mid).collect()
    }

    /// Every line segment with its physical length: feed, patch bodies and
    /// interconnects.
    pub fn line_segments(&self) -> impl Iterator<Item = MicrostripLine> + '_ {
        std::iter::once(self.feed)
            .chain(self.patches.iter().map(PatchElement::as_line))
            .chain(self.interconnects.iter().copied())
    }
}

fn rename_field(err: Error, section: &str) -> Error {
    match err {
        Error::InvalidInput { field, reason } => Error::InvalidInput {
            field: field.replacen("line", section, 1),
            reason,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    Feed,
    Slot { element: usize, far_edge: bool },
    PatchBody { element: usize },
    Interconnect { index: usize },
}

/// Cascaded network of one layout at one frequency.
#[derive(Debug, Clone)]
pub struct Chain {
    pub freq: f64,
    pub sections: Vec<(Section, TwoPortAbcd)>,
    pub total: TwoPortAbcd,
    /// Cumulative ABCD from the input port to each patch's near and far slot node.
    pub slot_nodes: Vec<[TwoPortAbcd; 2]>,
}

/// Admittance of one radiating slot: `(G1 + G12) + jB`.
pub fn slot_admittance(
    patch: &PatchElement,
    substrate: &Substrate,
    freq: f64,
    model: SlotSusceptance,
) -> Result<C64> {
    let y = patch_slot_admittance(patch, substrate, freq)?;
    let b = match model {
        SlotSusceptance::ClosedForm => y.b1,
        SlotSusceptance::FringeExtension => {
            let body = line_params(patch.width, substrate, freq)?;
            let dl = fringe_extension(patch.width, substrate)?;
            (body.beta(freq) * dl).tan() / body.z0
        }
    };
    Ok(C64::new(y.g1 + y.g12, b))
}

/// Ordered two-port sections of `layout` at `freq`.
pub fn chain_sections(
    layout: &ArrayLayout,
    freq: f64,
    options: &NetworkOptions,
) -> Result<Vec<(Section, TwoPortAbcd)>> {
    positive("freq", freq)?;
    let sub = &layout.substrate;
    let line = |l: &MicrostripLine| -> Result<TwoPortAbcd> {
        abcd_line(&line_params(l.width, sub, freq)?, l.length, freq)
    };
    let mut sections = Vec::with_capacity(1 + 4 * layout.count());
    sections.push((Section::Feed, line(&layout.feed)?));
    let mut cached: Option<(PatchElement, TwoPortAbcd)> = None;
    for (n, patch) in layout.patches.iter().enumerate() {
        let slot = match cached {
            Some((p, m)) if p == *patch => m,
            _ => {
                let m = abcd_shunt(slot_admittance(patch, sub, freq, options.slot_susceptance)?);
                cached = Some((*patch, m));
                m
            }
        };
        sections.push((
            Section::Slot {
                element: n,
                far_edge: false,
            },
            slot,
        ));
        sections.push((Section::PatchBody { element: n }, line(&patch.as_line())?));
        sections.push((
            Section::Slot {
                element: n,
                far_edge: true,
            },
            slot,
        ));
        if let Some(ic) = layout.interconnects.get(n) {
            sections.push((Section::Interconnect { index: n }, line(ic)?));
        }
    }
    Ok(sections)
}

pub fn build_chain(layout: &ArrayLayout, freq: f64, options: &NetworkOptions) -> Result<Chain> {
    layout.validate()?;
    let sections = chain_sections(layout, freq, options)?;
    let mut slot_nodes = vec![[TwoPortAbcd::IDENTITY; 2]; layout.count()];
    let mut acc = TwoPortAbcd::IDENTITY;
    for (section, m) in &sections {
        acc = acc.then(m);
        if let Section::Slot { element, far_edge } = *section {
            slot_nodes[element][usize::from(far_edge)] = acc;
        }
    }
    Ok(Chain {
        freq,
        sections,
        total: acc,
        slot_nodes,
    })
}

/// Complex S11 and input impedance at a single frequency.
pub fn analyze_point(
    layout: &ArrayLayout,
    freq: f64,
    options: &NetworkOptions,
) -> Result<(C64, Reflection)> {
    let run = || -> Result<(C64, Reflection)> {
        let chain = build_chain(layout, freq, options)?;
        let zin = input_impedance(&chain.total, Load::Open)?;
        Ok((zin, reflection(zin, options.z_ref)?))
    };
    run().map_err(|e| e.at_frequency(freq))
}

/// Inclusive, uniformly spaced frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    /// 25–35 GHz, 401 points.
    pub const DEFAULT: Sweep = Sweep {
        start: 25e9,
        stop: 35e9,
        points: 401,
    };

    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        let sweep = Sweep {
            start,
            stop,
            points,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sweep.f_start", self.start)?;
        if !(self.stop.is_finite() && self.stop > self.start) {
            return Err(Error::invalid(
                "sweep.f_stop",
                format!("must exceed f_start, got {} <= {}", self.stop, self.start),
            ));
        }
        if self.points < 2 {
            return Err(Error::invalid(
                "sweep.points",
                format!("must be >= 2, got {}", self.points),
            ));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + i as f64 * step
                }
            })
            .collect()
    }

    pub fn contains(&self, freq: f64) -> bool {
        freq >= self.start && freq <= self.stop
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    pub freqs: Vec<f64>,
    pub s11: Vec<C64>,
    pub zin: Vec<C64>,
    pub vswr: Vec<f64>,
    pub z_ref: f64,
}

impl NetworkResult {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn s11_db(&self) -> Vec<f64> {
        self.s11.iter().map(|g| 20.0 * g.norm().log10()).collect()
    }

    /// Index of the deepest |S11| sample (first one on ties).
    pub fn min_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.s11.iter().enumerate() {
            let m = g.norm();
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((i, m));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Frequency of the |S11| minimum.
    pub fn resonance(&self) -> Option<f64> {
        self.min_index().map(|i| self.freqs[i])
    }

    /// S11 linearly interpolated (real and imaginary parts) at `freq`.
    pub fn s11_at(&self, freq: f64) -> Option<C64> {
        interpolate(&self.freqs, &self.s11, freq)
    }

    pub fn vswr_min(&self) -> Option<f64> {
        self.vswr.iter().copied().reduce(f64::min)
    }
}

fn interpolate(xs: &[f64], ys: &[C64], x: f64) -> Option<C64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if !(x >= first && x <= last) {
        return None;
    }
    let hi = xs.partition_point(|&v| v < x).min(xs.len() - 1);
    if hi == 0 || xs[hi] == x {
        return Some(ys[hi]);
    }
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    Some(ys[lo] + (ys[hi] - ys[lo]) * t)
}

/// Evaluates every sweep point independently; results keep sweep order.
pub fn analyze_sweep(
    layout: &ArrayLayout,
    sweep: &Sweep,
    options: &NetworkOptions,
) -> Result<NetworkResult> {
    sweep.validate()?;
    layout.validate()?;
    let freqs = sweep.frequencies();
    let points = freqs
        .par_iter()
        .map(|&f| analyze_point(layout, f, options))
        .collect::<Result<Vec<_>>>()?;
    let (zin, refl): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    Ok(NetworkResult {
        freqs,
        s11: refl.iter().map(|r| r.gamma).collect(),
        vswr: refl.iter().map(|r| r.vswr).collect(),
        zin,
        z_ref: options.z_ref,
    })
}

/// A frequency band; `empty` means the threshold is not met at the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub f_low: f64,
    pub f_high: f64,
    pub empty: bool,
}

impl Band {
    pub fn empty() -> Self {
        Band {
            f_low: f64::NAN,
            f_high: f64::NAN,
            empty: true,
        }
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.f_high - self.f_low
        }
    }
}

/// Default matching threshold (dB).
pub const DEFAULT_BAND_THRESHOLD_DB: f64 = -10.0;

// keeps -inf samples (perfect matches) usable in linear interpolation
const DB_FLOOR: f64 = -400.0;

/// Maximal contiguous band around `f_center` where `s11_db <= threshold_db`,
/// with edges linearly interpolated in (frequency, dB).
pub fn extract_bandwidth(result: &NetworkResult, threshold_db: f64, f_center: f64) -> Result<Band> {
    let freqs = &result.freqs;
    let (Some(&first), Some(&last)) = (freqs.first(), freqs.last()) else {
        return Err(Error::invalid("result", "empty network result"));
    };
    if !(f_center >= first && f_center <= last) {
        return Err(Error::invalid(
            "f_center",
            format!("{f_center} Hz lies outside the sweep [{first}, {last}] Hz"),
        ));
    }
    let db: Vec<f64> = result
        .s11_db()
        .into_iter()
        .map(|v| v.max(DB_FLOOR))
        .collect();
    let hi = freqs
        .partition_point(|&f| f < f_center)
        .min(freqs.len() - 1);
    let center_db = if hi == 0 || freqs[hi] == f_center {
        db[hi]
    } else {
        let lo = hi - 1;
        let t = (f_center - freqs[lo]) / (freqs[hi] - freqs[lo]);
        db[lo] + (db[hi] - db[lo]) * t
    };
    if center_db > threshold_db {
        return Ok(Band::empty());
    }

    // samples with the center spliced in
    let below = freqs.partition_point(|&f| f < f_center);
    let above = freqs.partition_point(|&f| f <= f_center);
    let pts: Vec<(f64, f64)> = freqs[..below]
        .iter()
        .copied()
        .zip(db[..below].iter().copied())
        .chain(std::iter::once((f_center, center_db)))
        .chain(
            freqs[above..]
                .iter()
                .copied()
                .zip(db[above..].iter().copied()),
        )
        .collect();
    let k = below;
    let crossing = |(f0, d0): (f64, f64), (f1, d1): (f64, f64)| {
        f0 + (f1 - f0) * (threshold_db - d0) / (d1 - d0)
    };

    let mut i = k;
    while i > 0 && pts[i - 1].1 <= threshold_db {
        i -= 1;
    }
    let f_low = if i == 0 {
        pts[0].0
    } else {
        crossing(pts[i], pts[i - 1])
    };
    let mut j = k;
    while j + 1 < pts.len() && pts[j + 1].1 <= threshold_db {
        j += 1;
    }
    let f_high = if j + 1 == pts.len() {
        pts[j].0
    } else {
        crossing(pts[j], pts[j + 1])
    };
    Ok(Band {
        f_low,
        f_high,
        empty: false,
    })
}

/// Equivalent radiating voltage of each patch at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationVector {
    pub freq: f64,
    pub amplitudes: Vec<C64>,
}

impl ExcitationVector {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        ExcitationVector {
            freq: self.freq,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Node voltages at the near and far slot of every patch, for a 1 V source
/// behind `z_ref`.
pub fn slot_voltages(
    layout: &ArrayLayout,
    freq: f64,
    options: &NetworkOptions,
) -> Result<Vec<[C64; 2]>> {
    let chain = build_chain(layout, freq, options)?;
    let zin = input_impedance(&chain.total, Load::Open).map_err(|e| e.at_frequency(freq))?;
    let i_in = ONE / (zin + options.z_ref);
    let v_in = zin * i_in;
    chain
        .slot_nodes
        .iter()
        .enumerate()
        .map(|(element, nodes)| {
            let mut v = [ZERO; 2];
            for (k, node) in nodes.iter().enumerate() {
                let (vn, _) = node
                    .propagate(v_in, i_in)
                    .filter(|(a, b)| a.is_finite() && b.is_finite())
                    .ok_or(Error::SingularPropagation { element })?;
                v[k] = vn;
            }
            Ok(v)
        })
        .collect()
}

/// Per-element excitation: the mean of the patch's two slot aperture voltages.
///
/// Aperture voltages are taken along the outward edge normal, so the far
/// slot enters with the sign of its node voltage flipped. In the resonant
/// mode the node voltages at the two edges are in antiphase while the two
/// apertures radiate in phase.
pub fn element_excitations(
    layout: &ArrayLayout,
    freq: f64,
    options: &NetworkOptions,
) -> Result<ExcitationVector> {
    let v = slot_voltages(layout, freq, options)?;
    Ok(ExcitationVector {
        freq,
        amplitudes: v.iter().map(|[near, far]| (near - far) * 0.5).collect(),
    })
}
