//! Parameter sweeps over the single-puncture families: axis definitions,
//! weight rules and the bounds table.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::positivity::{nc_bound, numeric_wmax, numeric_wmax_at, sc_bound};
use crate::statemodel::{Puncture, PuncturedStateSpec, SqueezedWidths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// Thermal base, one delta puncture.
    DeltaThermal,
    /// Squeezed thermal base given by its widths, one delta puncture.
    DeltaSqueezed,
    /// Thermal base, one Gaussian puncture.
    Gaussian,
}

impl SweepFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::DeltaThermal => "delta_thermal",
            SweepFamily::DeltaSqueezed => "delta_squeezed",
            SweepFamily::Gaussian => "gaussian",
        }
    }
}

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Nbar,
    NbarR,
    NbarI,
    B,
    /// `|alpha_1|`
    Alpha,
    /// `arg alpha_1`
    Phase,
    W,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::Nbar => "nbar",
            Param::NbarR => "nbar_r",
            Param::NbarI => "nbar_i",
            Param::B => "b",
            Param::Alpha => "alpha_abs",
            Param::Phase => "phase",
            Param::W => "w",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(param: Param, min: f64, max: f64, steps: usize) -> Self {
        Self {
            param,
            min,
            max,
            steps,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(param: Param, min: f64, max: f64, steps: usize) -> Self {
        Self {
            spacing: Spacing::Log,
            ..Self::linear(param, min, max, steps)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "axis {} needs at least 2 steps, got {}",
                self.param.name(),
                self.steps
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::InvalidParameter(format!(
                "axis {} range [{}, {}] is not a finite interval",
                self.param.name(),
                self.min,
                self.max
            )));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "log axis {} must start above 0",
                self.param.name()
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                let t = k as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

/// Fixed weight, or the family's closed-form NC/NSC bound at each point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Fixed(f64),
    Max,
}

/// Parameter values of one grid point. Fields a family does not use are
/// ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub nbar: f64,
    pub nbar_r: f64,
    pub nbar_i: f64,
    pub b: f64,
    pub alpha_abs: f64,
    pub phase: f64,
    pub w: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self {
            nbar: 1.0,
            nbar_r: 1.0,
            nbar_i: 1.0,
            b: 0.5,
            alpha_abs: 0.0,
            phase: 0.0,
            w: 0.0,
        }
    }
}

impl FamilyParams {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Nbar => self.nbar,
            Param::NbarR => self.nbar_r,
            Param::NbarI => self.nbar_i,
            Param::B => self.b,
            Param::Alpha => self.alpha_abs,
            Param::Phase => self.phase,
            Param::W => self.w,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Nbar => self.nbar = v,
            Param::NbarR => self.nbar_r = v,
            Param::NbarI => self.nbar_i = v,
            Param::B => self.b = v,
            Param::Alpha => self.alpha_abs = v,
            Param::Phase => self.phase = v,
            Param::W => self.w = v,
        }
    }

    pub fn alpha(&self) -> C64 {
        C64::from_polar(self.alpha_abs, self.phase)
    }

    /// The family's spec with puncture weight `w`.
    pub fn spec(&self, family: SweepFamily, w: f64) -> Result<PuncturedStateSpec> {
        let spec = match family {
            SweepFamily::DeltaThermal => {
                PuncturedStateSpec::thermal(self.nbar).with_puncture(Puncture::delta(self.alpha(), w))
            }
            SweepFamily::DeltaSqueezed => {
                let widths = SqueezedWidths::new(self.nbar_r, self.nbar_i)?;
                PuncturedStateSpec::squeezed_from_widths(widths)
                    .with_puncture(Puncture::delta(self.alpha(), w))
            }
            SweepFamily::Gaussian => PuncturedStateSpec::thermal(self.nbar)
                .with_puncture(Puncture::gaussian(self.b, self.alpha(), w)),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The spec at the weight selected by `rule`.
    pub fn spec_with_rule(&self, family: SweepFamily, rule: WeightRule) -> Result<PuncturedStateSpec> {
        let w = match rule {
            WeightRule::Fixed(w) => w,
            WeightRule::Max => {
                let template = self.spec(family, 0.0)?;
                nc_bound(&template)
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "no closed-form bound for {} at {self:?}",
                            family.name()
                        ))
                    })?
                    .value
            }
        };
        self.spec(family, w)
    }
}

/// One- or two-axis sweep over a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub axes: Vec<Axis>,
    #[serde(default = "default_rule")]
    pub weight: WeightRule,
    /// Values of the parameters not swept.
    #[serde(default)]
    pub fixed: FamilyParams,
}

fn default_rule() -> WeightRule {
    WeightRule::Max
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "a sweep takes 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidParameter("both axes sweep the same parameter".into()));
        }
        Ok(())
    }

    /// Values along the first and second axis (a single dummy entry when
    /// there is one axis).
    pub fn axis_values(&self) -> (Vec<f64>, Vec<f64>) {
        let xs = self.axes[0].values();
        let ys = self.axes.get(1).map(Axis::values).unwrap_or_else(|| vec![f64::NAN]);
        (xs, ys)
    }

    /// Spec at grid point `p`. A `w` axis overrides the weight rule.
    pub fn spec_at(&self, p: &FamilyParams) -> Result<PuncturedStateSpec> {
        let rule = if self.axes.iter().any(|a| a.param == Param::W) {
            WeightRule::Fixed(p.w)
        } else {
            self.weight
        };
        p.spec_with_rule(self.family, rule)
    }

    /// Grid points in row-major order: the first axis varies fastest.
    pub fn points(&self) -> Result<Vec<FamilyParams>> {
        self.validate()?;
        let (xs, ys) = self.axis_values();
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                let mut p = self.fixed;
                p.set(self.axes[0].param, x);
                if let Some(a) = self.axes.get(1) {
                    p.set(a.param, y);
                }
                out.push(p);
            }
        }
        Ok(out)
    }
}

/// One row of a bounds sweep. `None` marks a column that does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub params: FamilyParams,
    pub bound_nc: Option<f64>,
    pub bound_sc: Option<f64>,
    pub wmax_numeric: Option<f64>,
    pub n_max_used: Option<usize>,
    pub converged: Option<bool>,
    /// Why the row has no values, if it has none.
    pub error: Option<String>,
}

/// Closed-form bounds and the numerical maximal weight at every grid
/// point. With `n_max` set the numerical value is taken at that truncation
/// only, otherwise under the convergence policy.
pub fn bounds_sweep(config: &SweepConfig, n_max: Option<usize>, tol: f64) -> Result<Vec<BoundsRow>> {
    let points = config.points()?;
    Ok(points
        .par_iter()
        .map(|p| bounds_row(config.family, p, n_max, tol))
        .collect())
}

fn bounds_row(family: SweepFamily, p: &FamilyParams, n_max: Option<usize>, tol: f64) -> BoundsRow {
    let mut row = BoundsRow {
        params: *p,
        bound_nc: None,
        bound_sc: None,
        wmax_numeric: None,
        n_max_used: None,
        converged: None,
        error: None,
    };
    let template = match p.spec(family, 0.0) {
        Ok(t) => t,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.bound_nc = nc_bound(&template).map(|b| b.value);
    row.bound_sc = sc_bound(&template).map(|b| b.value);
    let numeric = match n_max {
        Some(n) => numeric_wmax_at(&template, n, tol).map(|v| (v, n, None)),
        None => numeric_wmax(&template, tol).map(|r| (r.value, r.n_max_used, Some(r.converged))),
    };
    match numeric {
        Ok((v, n, conv)) => {
            row.wmax_numeric = Some(v);
            row.n_max_used = Some(n);
            row.converged = conv;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}
