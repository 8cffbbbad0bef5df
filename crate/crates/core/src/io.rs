//! File formats: geometry input, Touchstone and CSV exports, and the flat
//! metrics report.
//!
//! Geometry files use millimeters and GHz; everything past this module is SI.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farfield::{
    cut_metrics, directivity, realized_gain, total_pattern, CutMetrics, FarFieldPattern,
    PatternCut, SphericalGrid,
};
use crate::mstrip::{
    line_params, validity_warnings, MicrostripLine, PatchElement, PatchSynthesis, Substrate,
    ValidityWarning,
};
use crate::network::{
    analyze_sweep, element_excitations, extract_bandwidth, ArrayLayout, NetworkOptions,
    NetworkResult, Sweep, C64, DEFAULT_BAND_THRESHOLD_DB,
};
use crate::optimize::LayoutParam;

const MM: f64 = 1e-3;
const UM: f64 = 1e-6;
const GHZ: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateSection {
    pub eps_r: f64,
    pub tan_delta: f64,
    pub height_mm: f64,
    pub metal_conductivity: f64,
    pub metal_thickness_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedSection {
    pub width_mm: f64,
    pub length_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSection {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_mm: Option<f64>,
    /// Synthesize the patch for this frequency; explicit dimensions win.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_design_f0_ghz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectSection {
    pub width_mm: f64,
    /// Also the edge-to-edge gap between neighbouring patches.
    pub length_mm: f64,
    /// Overrides the element pitch used for the array factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_spacing_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub points: usize,
}

/// On-disk geometry description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub substrate: SubstrateSection,
    pub feed: FeedSection,
    pub patch: PatchSection,
    pub interconnect: InterconnectSection,
    pub sweep: SweepSection,
}

/// A loaded geometry: the file as written plus its SI model.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub file: GeometryFile,
    pub layout: ArrayLayout,
    pub sweep: Sweep,
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

impl GeometryFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: PathBuf::from("<geometry>"),
            message: e.to_string(),
        })
    }

    pub fn substrate(&self) -> Result<Substrate> {
        let s = &self.substrate;
        if !(s.eps_r.is_finite() && s.eps_r >= 1.0) {
            return Err(Error::invalid(
                "substrate.eps_r",
                format!("must be >= 1, got {}", s.eps_r),
            ));
        }
        if !(s.tan_delta.is_finite() && s.tan_delta >= 0.0) {
            return Err(Error::invalid(
                "substrate.tan_delta",
                format!("must be >= 0, got {}", s.tan_delta),
            ));
        }
        check_positive("substrate.height_mm", s.height_mm)?;
        if !(s.metal_conductivity > 0.0) {
            return Err(Error::invalid(
                "substrate.metal_conductivity",
                format!("must be positive, got {}", s.metal_conductivity),
            ));
        }
        if !(s.metal_thickness_um.is_finite() && s.metal_thickness_um >= 0.0) {
            return Err(Error::invalid(
                "substrate.metal_thickness_um",
                format!("must be >= 0, got {}", s.metal_thickness_um),
            ));
        }
        Substrate::new(
            s.eps_r,
            s.tan_delta,
            s.height_mm * MM,
            s.metal_conductivity,
            s.metal_thickness_um * UM,
        )
    }

    pub fn patch_element(&self, substrate: &Substrate) -> Result<PatchElement> {
        let p = &self.patch;
        let designed = match p.auto_design_f0_ghz {
            Some(f0) => {
                check_positive("patch.auto_design_f0_ghz", f0)?;
                Some(PatchSynthesis::compute(f0 * GHZ, substrate)?.patch())
            }
            None => None,
        };
        let dim = |field: &str, explicit: Option<f64>, auto: Option<f64>| -> Result<f64> {
            match (explicit, auto) {
                (Some(v), _) => {
                    check_positive(field, v)?;
                    Ok(v * MM)
                }
                (None, Some(v)) => Ok(v),
                (None, None) => Err(Error::invalid(
                    field,
                    "missing; give explicit patch dimensions or auto_design_f0_ghz",
                )),
            }
        };
        let width = dim("patch.width_mm", p.width_mm, designed.map(|d| d.width))?;
        let length = dim("patch.length_mm", p.length_mm, designed.map(|d| d.length))?;
        PatchElement::new(width, length)
    }

    pub fn to_layout(&self) -> Result<ArrayLayout> {
        let substrate = self.substrate()?;
        check_positive("feed.width_mm", self.feed.width_mm)?;
        check_positive("feed.length_mm", self.feed.length_mm)?;
        if self.patch.count == 0 {
            return Err(Error::invalid("patch.count", "must be at least 1"));
        }
        let patch = self.patch_element(&substrate)?;
        let ic = &self.interconnect;
        check_positive("interconnect.width_mm", ic.width_mm)?;
        check_positive("interconnect.length_mm", ic.length_mm)?;
        if let Some(pitch) = ic.center_spacing_mm {
            check_positive("interconnect.center_spacing_mm", pitch)?;
        }
        let mut layout = ArrayLayout::uniform(
            substrate,
            MicrostripLine::new(self.feed.width_mm * MM, self.feed.length_mm * MM)?,
            patch,
            self.patch.count,
            ic.width_mm * MM,
            ic.length_mm * MM,
        )?;
        layout.center_spacing = ic.center_spacing_mm.map(|v| v * MM);
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_sweep(&self) -> Result<Sweep> {
        let s = &self.sweep;
        check_positive("sweep.f_start_ghz", s.f_start_ghz)?;
        check_positive("sweep.f_stop_ghz", s.f_stop_ghz)?;
        if s.f_stop_ghz < s.f_start_ghz {
            return Err(Error::invalid(
                "sweep.f_stop_ghz",
                "must not be below sweep.f_start_ghz",
            ));
        }
        Sweep::new(s.f_start_ghz * GHZ, s.f_stop_ghz * GHZ, s.points).map_err(|e| match e {
            Error::InvalidInput { field, reason } => Error::InvalidInput {
                field: format!("sweep.{field}"),
                reason,
            },
            other => other,
        })
    }

    pub fn load(&self) -> Result<Geometry> {
        Ok(Geometry {
            layout: self.to_layout()?,
            sweep: self.to_sweep()?,
            file: self.clone(),
        })
    }

    /// Copy with the tunable fields taken from `tuned`. Only quantities that
    /// differ from `original` are rewritten, so an untouched layout re-emits
    /// the file unchanged.
    pub fn with_tuned(&self, original: &ArrayLayout, tuned: &ArrayLayout) -> GeometryFile {
        let mut out = self.clone();
        for p in LayoutParam::ALL {
            let (a, b) = (p.read(original), p.read(tuned));
            if a == b || b.is_nan() {
                continue;
            }
            match p {
                LayoutParam::PatchLength => out.patch.length_mm = Some(b / MM),
                LayoutParam::PatchWidth => out.patch.width_mm = Some(b / MM),
                LayoutParam::Gap => out.interconnect.length_mm = b / MM,
                LayoutParam::InterconnectWidth => out.interconnect.width_mm = b / MM,
            }
        }
        if out.patch.width_mm.is_some() && out.patch.length_mm.is_some() {
            out.patch.auto_design_f0_ghz = None;
        }
        out
    }
}

pub fn read_geometry_file(path: &Path) -> Result<GeometryFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GeometryFile::parse(&text, path)
}

/// Reads, validates and converts a geometry file.
pub fn load_geometry(path: &Path) -> Result<Geometry> {
    read_geometry_file(path)?.load()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One-port Touchstone v1, real/imaginary format.
pub fn write_touchstone_to<W: Write>(result: &NetworkResult, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# GHz S RI R {}", result.z_ref)?;
    for (f, s) in result.freqs.iter().zip(&result.s11) {
        writeln!(out, "{:?} {:?} {:?}", f / GHZ, s.re, s.im)?;
    }
    Ok(())
}

pub fn write_touchstone(result: &NetworkResult, path: &Path) -> Result<()> {
    if result.freqs.is_empty() {
        return Err(Error::invalid("result", "empty network result"));
    }
    let mut out = create(path)?;
    write_touchstone_to(result, &mut out)
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

/// Parsed one-port Touchstone data in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub z_ref: f64,
    pub freqs: Vec<f64>,
    pub s11: Vec<C64>,
}

/// Parses one-port Touchstone v1 with RI, MA or DB data.
pub fn parse_touchstone(text: &str, path: &Path) -> Result<Touchstone> {
    let fail = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let (mut scale, mut format, mut z_ref) = (GHZ, "MA".to_string(), 50.0);
    let mut seen_options = false;
    let (mut freqs, mut s11) = (Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_options {
                continue;
            }
            seen_options = true;
            let tokens: Vec<String> = opts.split_whitespace().map(str::to_uppercase).collect();
            let mut k = 0;
            while k < tokens.len() {
                match tokens[k].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = GHZ,
                    "S" => {}
                    "RI" | "MA" | "DB" => format = tokens[k].clone(),
                    "R" => {
                        k += 1;
                        z_ref = tokens
                            .get(k)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| fail(lineno, "missing reference impedance".into()))?;
                    }
                    other => return Err(fail(lineno, format!("unsupported option {other:?}"))),
                }
                k += 1;
            }
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fail(lineno, e.to_string()))?;
        let [f, a, b] = values[..] else {
            return Err(fail(
                lineno,
                format!("expected 3 columns, got {}", values.len()),
            ));
        };
        let s = match format.as_str() {
            "RI" => C64::new(a, b),
            "MA" => C64::from_polar(a, b.to_radians()),
            _ => C64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        };
        if let Some(&prev) = freqs.last() {
            if f * scale <= prev {
                return Err(fail(lineno, "frequencies must increase".into()));
            }
        }
        freqs.push(f * scale);
        s11.push(s);
    }
    if freqs.is_empty() {
        return Err(fail(0, "no data rows".into()));
    }
    Ok(Touchstone { z_ref, freqs, s11 })
}

pub fn read_touchstone(path: &Path) -> Result<Touchstone> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_touchstone(&text, path)
}

/// `freq_ghz,s11_db,vswr` rows for a sweep.
pub fn write_sweep_csv_to<W: Write>(result: &NetworkResult, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "freq_ghz,s11_db,vswr")?;
    for ((f, s), v) in result.freqs.iter().zip(result.s11_db()).zip(&result.vswr) {
        writeln!(out, "{:?},{:?},{:?}", f / GHZ, s, v)?;
    }
    Ok(())
}

pub fn write_sweep_csv(result: &NetworkResult, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_sweep_csv_to(result, &mut out)
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

/// `theta_deg,phi_deg,intensity_dbi` for every grid sample, theta-major.
pub fn write_pattern_csv_to<W: Write>(pattern: &FarFieldPattern, out: &mut W) -> Result<()> {
    let d = pattern.directivity_map()?;
    let write = |out: &mut W| -> std::io::Result<()> {
        writeln!(out, "theta_deg,phi_deg,intensity_dbi")?;
        let phis = pattern.grid.phis();
        for (i, theta) in pattern.grid.thetas().iter().enumerate() {
            for (j, phi) in phis.iter().enumerate() {
                let dbi = 10.0 * d[i * phis.len() + j].log10();
                writeln!(out, "{theta:?},{phi:?},{dbi:?}")?;
            }
        }
        Ok(())
    };
    write(out).map_err(|source| Error::Io {
        path: PathBuf::from("<pattern>"),
        source,
    })
}

pub fn write_pattern_csv(pattern: &FarFieldPattern, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_pattern_csv_to(pattern, &mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    out.flush().map_err(io_err(path))
}

/// `theta_deg,level_db` with the cut peak at exactly 0 dB.
pub fn write_cut_csv_to<W: Write>(cut: &PatternCut, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "theta_deg,level_db")?;
    for (t, level) in cut.angles.iter().zip(cut.normalized_db()) {
        writeln!(out, "{t:?},{level:?}")?;
    }
    Ok(())
}

pub fn write_cut_csv(cut: &PatternCut, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_cut_csv_to(cut, &mut out)
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub name: String,
    pub width_mm: f64,
    pub z0_ohm: f64,
    pub eps_eff: f64,
}

/// Output of the `design` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub f0_ghz: f64,
    pub patch_width_mm: f64,
    pub patch_length_mm: f64,
    pub patch_eps_eff: f64,
    pub delta_l_mm: f64,
    pub lines: Vec<LineReport>,
    pub warnings: Vec<ValidityWarning>,
}

pub fn design_report(f0: f64, layout: &ArrayLayout) -> Result<DesignReport> {
    let sub = &layout.substrate;
    let synth = PatchSynthesis::compute(f0, sub)?;
    let mut lines = vec![("feed", layout.feed.width), ("patch", synth.width)];
    if let Some(ic) = layout.interconnects.first() {
        lines.push(("interconnect", ic.width));
    }
    let lines = lines
        .into_iter()
        .map(|(name, width)| {
            let p = line_params(width, sub, f0)?;
            Ok(LineReport {
                name: name.to_string(),
                width_mm: width / MM,
                z0_ohm: p.z0,
                eps_eff: p.eps_eff,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignReport {
        f0_ghz: f0 / GHZ,
        patch_width_mm: synth.width / MM,
        patch_length_mm: synth.length / MM,
        patch_eps_eff: synth.eps_eff,
        delta_l_mm: synth.delta_l / MM,
        lines,
        warnings: validity_warnings(sub, f0),
    })
}

/// Flat summary of a full analysis. Quantities that cannot be given a finite
/// value are `null`, with the reason keyed by field name in `null_reasons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Frequency of the pattern and gain quantities.
    pub freq_ghz: f64,
    pub resonance_ghz: Option<f64>,
    pub s11_min_db: Option<f64>,
    pub vswr_min: Option<f64>,
    pub s11_at_freq_db: Option<f64>,
    pub vswr_at_freq: Option<f64>,
    pub band_ghz: Option<[f64; 2]>,
    pub bandwidth_ghz: Option<f64>,
    pub peak_gain_dbi: Option<f64>,
    pub directivity_dbi: Option<f64>,
    pub radiation_efficiency: f64,
    pub mismatch_factor: f64,
    pub phi0_peak_theta_deg: f64,
    pub phi0_hpbw_deg: f64,
    pub phi0_hpbw_truncated: bool,
    pub phi0_sll_db: Option<f64>,
    pub phi90_peak_theta_deg: f64,
    pub phi90_hpbw_deg: f64,
    pub phi90_hpbw_truncated: bool,
    pub phi90_sll_db: Option<f64>,
    pub warnings: Vec<ValidityWarning>,
    pub null_reasons: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Pattern frequency; `None` uses the sweep resonance.
    pub freq: Option<f64>,
    pub grid: SphericalGrid,
    pub network: NetworkOptions,
    pub band_threshold_db: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            freq: None,
            grid: SphericalGrid::default(),
            network: NetworkOptions::default(),
            band_threshold_db: DEFAULT_BAND_THRESHOLD_DB,
        }
    }
}

/// Everything behind a [`Report`], kept for callers that need more than the
/// summary.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub network: NetworkResult,
    pub pattern: FarFieldPattern,
    pub cuts: [CutMetrics; 2],
    pub report: Report,
}

struct Nulls(BTreeMap<String, String>);

impl Nulls {
    fn finite(&mut self, field: &str, v: f64, reason: &str) -> Option<f64> {
        if v.is_finite() {
            Some(v)
        } else {
            self.0.insert(field.to_string(), reason.to_string());
            None
        }
    }
}

pub fn analyze(layout: &ArrayLayout, sweep: &Sweep, options: &ReportOptions) -> Result<Analysis> {
    let network = analyze_sweep(layout, sweep, &options.network)?;
    let resonance = network
        .resonance()
        .ok_or_else(|| Error::invalid("sweep", "empty sweep"))?;
    let freq = options.freq.unwrap_or(resonance);
    if !sweep.contains(freq) {
        return Err(Error::invalid(
            "freq",
            format!("{:.4} GHz lies outside the sweep", freq / GHZ),
        ));
    }
    let band = extract_bandwidth(&network, options.band_threshold_db, resonance)?;

    let exc = element_excitations(layout, freq, &options.network)?;
    let pattern = total_pattern(layout, &exc, options.grid)?;
    let d = directivity(&pattern)?;
    let gain = realized_gain(d, layout, &network, freq)?;
    let cuts = [cut_metrics(&pattern, 0.0)?, cut_metrics(&pattern, 90.0)?];

    let mut nulls = Nulls(BTreeMap::new());
    let s11_min = network.s11_db()[network.min_index().unwrap_or(0)];
    let s11_f = network.s11_at(freq).unwrap_or_default();
    let s11_f_db = 20.0 * s11_f.norm().log10();
    let vswr_f = crate::network::vswr_from_magnitude(s11_f.norm());
    let no_sidelobe = "no sidelobe in this cut";
    let report = Report {
        freq_ghz: freq / GHZ,
        resonance_ghz: Some(resonance / GHZ),
        s11_min_db: nulls.finite("s11_min_db", s11_min, "perfect match at a sweep sample"),
        vswr_min: nulls.finite(
            "vswr_min",
            network.vswr_min().unwrap_or(f64::NAN),
            "total reflection",
        ),
        s11_at_freq_db: nulls.finite("s11_at_freq_db", s11_f_db, "perfect match at freq"),
        vswr_at_freq: nulls.finite("vswr_at_freq", vswr_f, "total reflection at freq"),
        band_ghz: if band.empty {
            nulls.0.insert(
                "band_ghz".into(),
                format!(
                    "S11 never drops below {} dB around the resonance",
                    options.band_threshold_db
                ),
            );
            None
        } else {
            Some([band.f_low / GHZ, band.f_high / GHZ])
        },
        bandwidth_ghz: (!band.empty).then(|| band.width() / GHZ),
        peak_gain_dbi: nulls.finite(
            "peak_gain_dbi",
            gain.realized_gain_dbi,
            "no power accepted at the port",
        ),
        directivity_dbi: nulls.finite("directivity_dbi", d, "pattern carries no power"),
        radiation_efficiency: gain.radiation_efficiency,
        mismatch_factor: gain.mismatch_factor,
        phi0_peak_theta_deg: cuts[0].peak_theta,
        phi0_hpbw_deg: cuts[0].hpbw,
        phi0_hpbw_truncated: cuts[0].hpbw_truncated,
        phi0_sll_db: nulls.finite("phi0_sll_db", cuts[0].sll_db, no_sidelobe),
        phi90_peak_theta_deg: cuts[1].peak_theta,
        phi90_hpbw_deg: cuts[1].hpbw,
        phi90_hpbw_truncated: cuts[1].hpbw_truncated,
        phi90_sll_db: nulls.finite("phi90_sll_db", cuts[1].sll_db, no_sidelobe),
        warnings: validity_warnings(&layout.substrate, freq),
        null_reasons: BTreeMap::new(),
    };
    if band.empty {
        nulls
            .0
            .insert("bandwidth_ghz".into(), "no band below the threshold".into());
    }
    let report = Report {
        null_reasons: nulls.0,
        ..report
    };
    Ok(Analysis {
        network,
        pattern,
        cuts,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"
[substrate]
eps_r = 3.0
tan_delta = 0.0013
height_mm = 1.574
metal_conductivity = 5.8e7
metal_thickness_um = 35.0

[feed]
width_mm = 0.5
length_mm = 1.5

[patch]
count = 6
auto_design_f0_ghz = 28.0

[interconnect]
width_mm = 0.5
length_mm = 1.9

[sweep]
f_start_ghz = 25.0
f_stop_ghz = 35.0
points = 401
"#;

    fn parse(text: &str) -> Result<GeometryFile> {
        GeometryFile::parse(text, Path::new("test.geom"))
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::InvalidInput { field, .. } => field,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn fixture_loads() {
        let g = parse(FIXTURE).unwrap().load().unwrap();
        assert_eq!(g.layout.count(), 6);
        assert_eq!(g.layout.interconnects.len(), 5);
        assert_eq!(g.layout.substrate.eps_r, 3.0);
        assert!((g.layout.substrate.height - 1.574e-3).abs() < 1e-15);
        assert_eq!(g.sweep.points, 401);
        let designed = PatchSynthesis::compute(28e9, &g.layout.substrate).unwrap();
        assert_eq!(g.layout.patches[0].length, designed.length);
    }

    #[test]
    fn explicit_dimension_overrides_design() {
        let text = FIXTURE.replace("count = 6", "count = 6\nlength_mm = 2.5");
        let g = parse(&text).unwrap().load().unwrap();
        assert!((g.layout.patches[0].length - 2.5e-3).abs() < 1e-15);
        let designed = PatchSynthesis::compute(28e9, &g.layout.substrate).unwrap();
        assert_eq!(g.layout.patches[0].width, designed.width);
    }

    #[test]
    fn missing_patch_dimensions_rejected() {
        let text = FIXTURE.replace("auto_design_f0_ghz = 28.0", "width_mm = 3.0");
        let e = parse(&text).unwrap().load().unwrap_err();
        assert_eq!(field_of(e), "patch.length_mm");
    }

    #[test]
    fn negative_height_names_field() {
        let text = FIXTURE.replace("height_mm = 1.574", "height_mm = -1.574");
        let e = parse(&text).unwrap().load().unwrap_err();
        assert_eq!(field_of(e), "substrate.height_mm");
    }

    #[test]
    fn zero_count_names_field() {
        let text = FIXTURE.replace("count = 6", "count = 0");
        assert_eq!(
            field_of(parse(&text).unwrap().load().unwrap_err()),
            "patch.count"
        );
    }

    #[test]
    fn unknown_field_is_parse_error() {
        let text = FIXTURE.replace("points = 401", "points = 401\nstep = 2");
        match parse(&text).unwrap_err() {
            Error::Parse { message, .. } => {
                assert!(message.contains("step"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn toml_round_trip_is_identical() {
        let file = parse(FIXTURE).unwrap();
        let again = parse(&file.to_toml_string().unwrap()).unwrap();
        assert_eq!(file, again);
        let layout = file.to_layout().unwrap();
        assert_eq!(file.with_tuned(&layout, &layout), file);
    }

    #[test]
    fn tuned_length_is_written_back() {
        let file = parse(FIXTURE).unwrap();
        let layout = file.to_layout().unwrap();
        let mut tuned = layout.clone();
        LayoutParam::PatchLength.apply(&mut tuned, 2.2e-3);
        let out = file.with_tuned(&layout, &tuned);
        assert_eq!(out.patch.length_mm, Some(2.2e-3 / MM));
        let back = out.to_layout().unwrap();
        assert!((back.patches[0].length - 2.2e-3).abs() < 1e-15);
        assert_eq!(back.patches[0].width, layout.patches[0].width);
    }

    fn single_point(s: C64) -> NetworkResult {
        NetworkResult {
            freqs: vec![28e9],
            s11: vec![s],
            zin: vec![C64::new(50.0, 0.0)],
            vswr: vec![1.0],
            z_ref: 50.0,
        }
    }

    #[test]
    fn touchstone_layout() {
        let mut buf = Vec::new();
        write_touchstone_to(&single_point(C64::new(0.0, 0.0)), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# GHz S RI R 50\n28.0 0.0 0.0\n");
    }

    #[test]
    fn touchstone_round_trip() {
        let s = C64::new(-0.123456789012345, 0.987654321098765);
        let mut buf = Vec::new();
        write_touchstone_to(&single_point(s), &mut buf).unwrap();
        let t = parse_touchstone(std::str::from_utf8(&buf).unwrap(), Path::new("x")).unwrap();
        assert_eq!(t.freqs, vec![28e9]);
        assert_eq!(t.s11, vec![s]);
        assert_eq!(t.z_ref, 50.0);
    }

    #[test]
    fn touchstone_other_formats() {
        let t = parse_touchstone("! c\n# MHz S DB R 75\n1000 -20 90\n", Path::new("x")).unwrap();
        assert_eq!(t.z_ref, 75.0);
        assert_eq!(t.freqs, vec![1e9]);
        assert!((t.s11[0] - C64::new(0.0, 0.1)).norm() < 1e-15);
        assert!(parse_touchstone("# GHz S RI R 50\n1 2\n", Path::new("x")).is_err());
        assert!(parse_touchstone("# GHz S RI R 50\n2 0 0\n1 0 0\n", Path::new("x")).is_err());
    }
}
