//! Derivative-free tuning of layout parameters.
//!
//! The analysis chain (sweep argmin, peak search, sidelobe detection) is
//! piecewise and non-smooth, so the search is a bounded Nelder–Mead simplex.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farfield::{cut_metrics, directivity, total_pattern, SphericalGrid};
use crate::network::{
    analyze_point, analyze_sweep, element_excitations, ArrayLayout, NetworkOptions, Sweep,
};

/// Objective value assigned when the analysis fails at a trial point.
pub const PENALTY: f64 = 1e6;

/// Relative half-width of the default box around an initial value.
pub const DEFAULT_BOUND_FRACTION: f64 = 0.25;

/// Acceptable distance between the tuned resonance and its target (Hz).
pub const RESONANCE_TOLERANCE: f64 = 0.15e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParam {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
}

impl DesignParam {
    /// Free parameter boxed to ±25 % of `value`.
    pub fn around(name: impl Into<String>, value: f64) -> Self {
        let span = DEFAULT_BOUND_FRACTION * value.abs();
        DesignParam {
            name: name.into(),
            value,
            lower: value - span,
            upper: value + span,
            fixed: false,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.fixed = true;
        self
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub params: Vec<DesignParam>,
}

impl DesignVector {
    pub fn new(params: Vec<DesignParam>) -> Result<Self> {
        let x = DesignVector { params };
        x.validate()?;
        Ok(x)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            if !(p.lower <= p.value && p.value <= p.upper) {
                return Err(Error::invalid(
                    &p.name,
                    format!("{} outside [{}, {}]", p.value, p.lower, p.upper),
                ));
            }
        }
        if self.free_indices().is_empty() {
            return Err(Error::invalid("design", "no free parameter"));
        }
        Ok(())
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.params.len())
            .filter(|&i| !self.params[i].fixed)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn within_bounds(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.lower <= p.value && p.value <= p.upper)
    }

    fn free_values(&self, free: &[usize]) -> Vec<f64> {
        free.iter().map(|&i| self.params[i].value).collect()
    }

    fn with_free_values(&self, free: &[usize], values: &[f64]) -> DesignVector {
        let mut x = self.clone();
        for (&i, &v) in free.iter().zip(values) {
            x.params[i].value = x.params[i].clip(v);
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best: DesignVector,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after the initial simplex and after every iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub tol_rel: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            tol_rel: 1e-4,
            max_evals: 500,
        }
    }
}

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 0.05;

struct Vertex {
    x: Vec<f64>,
    value: f64,
}

/// Bounded Nelder–Mead over the free parameters of `x0`. Every trial point is
/// clipped to the box before evaluation.
pub fn nelder_mead<F>(mut f: F, x0: &DesignVector, options: &NelderMeadOptions) -> Result<OptResult>
where
    F: FnMut(&DesignVector) -> f64,
{
    x0.validate()?;
    if options.max_evals == 0 {
        return Err(Error::invalid("max_evals", "must be positive"));
    }
    let free = x0.free_indices();
    let clip = |v: &[f64]| -> Vec<f64> {
        free.iter()
            .zip(v)
            .map(|(&i, &val)| x0.params[i].clip(val))
            .collect()
    };

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        let v = f(&x0.with_free_values(&free, x));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let start = x0.free_values(&free);
    let mut simplex = vec![Vertex {
        value: eval(&start, &mut evaluations),
        x: start.clone(),
    }];
    for (k, &i) in free.iter().enumerate() {
        if evaluations >= options.max_evals {
            break;
        }
        let p = &x0.params[i];
        let step = if p.value != 0.0 {
            INITIAL_STEP * p.value
        } else {
            INITIAL_STEP * (p.upper - p.lower)
        };
        let mut x = start.clone();
        x[k] = p.clip(p.value + step);
        if x[k] == p.value {
            x[k] = p.clip(p.value - step);
        }
        simplex.push(Vertex {
            value: eval(&x, &mut evaluations),
            x,
        });
    }
    // stable sort: on ties the earlier vertex (x0 first) stays best
    simplex.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut trace = vec![simplex[0].value];
    let mut converged = false;
    let n = free.len();

    while simplex.len() == n + 1 {
        let best = simplex[0].value;
        let worst = simplex[n].value;
        if (worst - best).abs() / (1.0 + best.abs()) < options.tol_rel {
            converged = true;
            break;
        }
        if evaluations >= options.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(&v.x) {
                *c += xi / n as f64;
            }
        }
        let toward = |from: &[f64], coef: f64| -> Vec<f64> {
            clip(
                &centroid
                    .iter()
                    .zip(from)
                    .map(|(c, x)| c + coef * (x - c))
                    .collect::<Vec<_>>(),
            )
        };

        let xr = toward(&simplex[n].x, -REFLECTION);
        let fr = eval(&xr, &mut evaluations);
        let replacement = if fr < best {
            if evaluations >= options.max_evals {
                Some(Vertex { x: xr, value: fr })
            } else {
                let xe = toward(&xr, EXPANSION);
                let fe = eval(&xe, &mut evaluations);
                if fe < fr {
                    Some(Vertex { x: xe, value: fe })
                } else {
                    Some(Vertex { x: xr, value: fr })
                }
            }
        } else if fr < simplex[n - 1].value {
            Some(Vertex { x: xr, value: fr })
        } else if evaluations >= options.max_evals {
            None
        } else {
            let (xc, bar) = if fr < worst {
                (toward(&xr, CONTRACTION), fr)
            } else {
                (toward(&simplex[n].x, CONTRACTION), worst)
            };
            let fc = eval(&xc, &mut evaluations);
            (fc < bar).then_some(Vertex { x: xc, value: fc })
        };

        match replacement {
            Some(v) => simplex[n] = v,
            None => {
                let anchor = simplex[0].x.clone();
                for v in simplex.iter_mut().skip(1) {
                    if evaluations >= options.max_evals {
                        break;
                    }
                    v.x = clip(
                        &anchor
                            .iter()
                            .zip(&v.x)
                            .map(|(a, x)| a + SHRINK * (x - a))
                            .collect::<Vec<_>>(),
                    );
                    v.value = eval(&v.x, &mut evaluations);
                }
            }
        }
        simplex.sort_by(|a, b| a.value.total_cmp(&b.value));
        trace.push(simplex[0].value);
    }

    let best = &simplex[0];
    Ok(OptResult {
        best: x0.with_free_values(&free, &best.x),
        best_value: best.value,
        evaluations,
        converged,
        trace,
    })
}

/// Layout quantities the tuner may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayoutParam {
    /// Patch length (all patches).
    PatchLength,
    /// Patch width (all patches).
    PatchWidth,
    /// Edge-to-edge gap, which is also the interconnect length.
    Gap,
    InterconnectWidth,
}

impl LayoutParam {
    pub const ALL: [LayoutParam; 4] = [
        LayoutParam::PatchLength,
        LayoutParam::PatchWidth,
        LayoutParam::Gap,
        LayoutParam::InterconnectWidth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayoutParam::PatchLength => "L",
            LayoutParam::PatchWidth => "W",
            LayoutParam::Gap => "gap",
            LayoutParam::InterconnectWidth => "iw",
        }
    }

    /// Current value, taken from the first patch / interconnect.
    pub fn read(self, layout: &ArrayLayout) -> f64 {
        match self {
            LayoutParam::PatchLength => layout.patches[0].length,
            LayoutParam::PatchWidth => layout.patches[0].width,
            LayoutParam::Gap => layout.gap,
            LayoutParam::InterconnectWidth => {
                layout.interconnects.first().map_or(f64::NAN, |l| l.width)
            }
        }
    }

    pub fn apply(self, layout: &mut ArrayLayout, value: f64) {
        match self {
            LayoutParam::PatchLength => layout.patches.iter_mut().for_each(|p| p.length = value),
            LayoutParam::PatchWidth => layout.patches.iter_mut().for_each(|p| p.width = value),
            LayoutParam::Gap => {
                layout.gap = value;
                layout
                    .interconnects
                    .iter_mut()
                    .for_each(|l| l.length = value);
            }
            LayoutParam::InterconnectWidth => layout
                .interconnects
                .iter_mut()
                .for_each(|l| l.width = value),
        }
    }
}

impl fmt::Display for LayoutParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayoutParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayoutParam::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                Error::invalid(
                    "free",
                    format!("unknown parameter {s:?}; expected one of L, W, gap, iw"),
                )
            })
    }
}

/// Design vector over every applicable layout parameter; those not in `free`
/// are frozen. Single-patch layouts have no interconnect parameter.
pub fn design_vector(layout: &ArrayLayout, free: &[LayoutParam]) -> Result<DesignVector> {
    let params = LayoutParam::ALL
        .into_iter()
        .filter(|p| *p != LayoutParam::InterconnectWidth || !layout.interconnects.is_empty())
        .map(|p| {
            let param = DesignParam::around(p.name(), p.read(layout));
            if free.contains(&p) {
                param
            } else {
                param.frozen()
            }
        })
        .collect();
    DesignVector::new(params)
}

/// Copy of `template` with every named parameter of `x` applied.
pub fn apply_design(template: &ArrayLayout, x: &DesignVector) -> Result<ArrayLayout> {
    let mut layout = template.clone();
    for p in &x.params {
        p.name.parse::<LayoutParam>()?.apply(&mut layout, p.value);
    }
    Ok(layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub target_f0: f64,
    pub w_match: f64,
    pub w_dir: f64,
    pub w_sll: f64,
    pub sll_ceiling_db: f64,
    /// Pattern grid used for the directivity and sidelobe terms.
    pub grid: SphericalGrid,
    pub network: NetworkOptions,
}

impl Objective {
    pub fn new(target_f0: f64, w_match: f64, w_dir: f64, w_sll: f64) -> Result<Self> {
        let obj = Objective {
            target_f0,
            w_match,
            w_dir,
            w_sll,
            sll_ceiling_db: -10.0,
            grid: SphericalGrid::uniform(1.0)?,
            network: NetworkOptions::default(),
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::positive("target_f0", self.target_f0)?;
        let w = [self.w_match, self.w_dir, self.w_sll];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("weights", "must be finite and >= 0"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid(
                "weights",
                "at least one weight must be positive",
            ));
        }
        Ok(())
    }

    fn needs_pattern(&self) -> bool {
        self.w_dir > 0.0 || self.w_sll > 0.0
    }

    /// `w_match·max(0, s11 + 10) - w_dir·D + w_sll·max(0, sll - ceiling)`.
    pub fn combine(&self, s11_db: f64, directivity_dbi: f64, sll_db: f64) -> f64 {
        let mut j = self.w_match * (s11_db + 10.0).max(0.0);
        if self.w_dir > 0.0 {
            j -= self.w_dir * directivity_dbi;
        }
        if self.w_sll > 0.0 && sll_db.is_finite() {
            j += self.w_sll * (sll_db - self.sll_ceiling_db).max(0.0);
        }
        j
    }
}

/// Composite objective at `x`; lower is better. Analysis failures score
/// [`PENALTY`].
pub fn objective_eval(x: &DesignVector, template: &ArrayLayout, obj: &Objective) -> f64 {
    let run = || -> Result<f64> {
        let layout = apply_design(template, x)?;
        layout.validate()?;
        let (_, refl) = analyze_point(&layout, obj.target_f0, &obj.network)?;
        let (mut dir, mut sll) = (0.0, f64::NEG_INFINITY);
        if obj.needs_pattern() {
            let exc = element_excitations(&layout, obj.target_f0, &obj.network)?;
            let pattern = total_pattern(&layout, &exc, obj.grid)?;
            dir = directivity(&pattern)?;
            sll = cut_metrics(&pattern, 0.0)?.sll_db;
        }
        Ok(obj.combine(refl.s11_db, dir, sll))
    };
    match run() {
        Ok(j) if j.is_finite() => j,
        Ok(j) if j == f64::NEG_INFINITY => -PENALTY,
        _ => PENALTY,
    }
}

/// Tunes the layout parameters in `free` against `obj`.
pub fn optimize_layout(
    layout: &ArrayLayout,
    free: &[LayoutParam],
    obj: &Objective,
    options: &NelderMeadOptions,
) -> Result<(ArrayLayout, OptResult)> {
    obj.validate()?;
    let x0 = design_vector(layout, free)?;
    let result = nelder_mead(|x| objective_eval(x, layout, obj), &x0, options)?;
    Ok((apply_design(layout, &result.best)?, result))
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub layout: ArrayLayout,
    pub resonance: f64,
    pub result: OptResult,
}

/// |S11| argmin of `layout` over `sweep`.
pub fn sweep_resonance(
    layout: &ArrayLayout,
    sweep: &Sweep,
    options: &NetworkOptions,
) -> Result<f64> {
    analyze_sweep(layout, sweep, options)?
        .resonance()
        .ok_or_else(|| Error::invalid("sweep", "empty sweep"))
}

/// Evaluation budget of [`tune_for_resonance`].
pub const TUNE_MAX_EVALS: usize = 200;

/// Adjusts the patch length alone until the sweep's |S11| minimum sits at `f0`.
pub fn tune_for_resonance(
    layout: &ArrayLayout,
    f0: f64,
    sweep: &Sweep,
    options: &NetworkOptions,
) -> Result<TuneOutcome> {
    sweep.validate()?;
    if !sweep.contains(f0) {
        return Err(Error::invalid(
            "f0",
            format!(
                "{:.4} GHz outside the sweep {:.4}-{:.4} GHz",
                f0 * 1e-9,
                sweep.start * 1e-9,
                sweep.stop * 1e-9
            ),
        ));
    }
    let offset_ghz = |l: &ArrayLayout| -> f64 {
        sweep_resonance(l, sweep, options).map_or(PENALTY, |f| (f - f0).abs() * 1e-9)
    };

    let x0 = design_vector(layout, &[LayoutParam::PatchLength])?;
    let start = offset_ghz(layout);
    if start <= 0.5 * sweep.step() * 1e-9 {
        // already on the sweep sample nearest f0
        return Ok(TuneOutcome {
            layout: layout.clone(),
            resonance: sweep_resonance(layout, sweep, options)?,
            result: OptResult {
                best: x0,
                best_value: start,
                evaluations: 1,
                converged: true,
                trace: vec![start],
            },
        });
    }

    let nm = NelderMeadOptions {
        tol_rel: NelderMeadOptions::default().tol_rel,
        max_evals: TUNE_MAX_EVALS,
    };
    let result = nelder_mead(
        |x| apply_design(layout, x).map_or(PENALTY, |l| offset_ghz(&l)),
        &x0,
        &nm,
    )?;
    if result.best_value * 1e9 > RESONANCE_TOLERANCE {
        return Err(Error::NotConverged {
            offset_ghz: result.best_value,
        });
    }
    let tuned = apply_design(layout, &result.best)?;
    Ok(TuneOutcome {
        resonance: sweep_resonance(&tuned, sweep, options)?,
        layout: tuned,
        result,
    })
}
