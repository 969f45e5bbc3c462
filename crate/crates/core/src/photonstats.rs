//! Second-order correlation `g2 = <a†a†aa> / <a†a>^2` and Mandel Q, from
//! P-function moments or from a truncated density matrix.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::zero_contour;
use crate::error::{Error, Result};
use crate::fockspace::{FockOperator, HERMITICITY_TOL};
use crate::phasespace::p_negativity_threshold;
use crate::positivity::{nc_bound, policy_start, Family, N_MAX_CAP};
use crate::statemodel::{build_density_unchecked, normalization, PuncturedStateSpec, Shape, SqueezedWidths};
use crate::sweep::{FamilyParams, SweepConfig};

/// Mean photon numbers below this leave `g2` undefined.
pub const MEAN_FLOOR: f64 = 1e-12;

/// Share of `sum n rho_nn` in the top tenth of the basis that triggers
/// [`G2Report::tail_warning`].
pub const TAIL_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Analytic,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Report {
    pub g2: f64,
    pub mandel_q: f64,
    pub mean_n: f64,
    pub second_factorial_moment: f64,
    pub route: Route,
    /// Trace route only: the basis edge carries a visible share of `<n>`.
    pub tail_warning: bool,
}

impl G2Report {
    fn new(mean_n: f64, fact2: f64, g2: f64, route: Route) -> Self {
        Self {
            g2,
            mandel_q: mean_n * (g2 - 1.0),
            mean_n,
            second_factorial_moment: fact2,
            route,
            tail_warning: false,
        }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if mean >= MEAN_FLOOR {
        Ok(())
    } else {
        Err(Error::UndefinedG2(mean))
    }
}

/// `(<a†a>, <a†a†aa>)` as normally ordered moments of the P function,
/// `N [ m_base - sum_i w_i m_i ]`.
pub fn normally_ordered_moments(spec: &PuncturedStateSpec) -> Result<(f64, f64)> {
    let n = normalization(spec)?;
    let (mut m1, mut m2) = spec.base.p_moments()?;
    for p in &spec.punctures {
        let (a, b) = p.p_moments();
        m1 -= p.weight * a;
        m2 -= p.weight * b;
    }
    Ok((n * m1, n * m2))
}

/// `(1 - w)(2 nbar^2 - w |alpha|^4) / (nbar - w |alpha|^2)^2`
pub fn g2_delta_thermal(nbar: f64, w: f64, alpha1: C64) -> Result<f64> {
    let a2 = alpha1.norm_sqr();
    let den = nbar - w * a2;
    check_mean(den / (1.0 - w))?;
    Ok((1.0 - w) * (2.0 * nbar * nbar - w * a2 * a2) / (den * den))
}

/// `(1 - w)((3R^2 + 2RI + 3I^2)/4 - w |alpha|^4) / ((R + I)/2 - w |alpha|^2)^2`
pub fn g2_delta_squeezed(widths: SqueezedWidths, w: f64, alpha1: C64) -> Result<f64> {
    let (r, i) = (widths.nbar_r, widths.nbar_i);
    let a2 = alpha1.norm_sqr();
    let den = 0.5 * (r + i) - w * a2;
    check_mean(den / (1.0 - w))?;
    let num = 0.25 * (3.0 * r * r + 2.0 * r * i + 3.0 * i * i) - w * a2 * a2;
    Ok((1.0 - w) * num / (den * den))
}

/// `(1 - w)(2 nbar^2 - 2 w b^2) / (nbar - w b)^2`
pub fn g2_gaussian_vacuum(nbar: f64, b: f64, w: f64) -> Result<f64> {
    let den = nbar - w * b;
    check_mean(den / (1.0 - w))?;
    Ok((1.0 - w) * (2.0 * nbar * nbar - 2.0 * w * b * b) / (den * den))
}

/// `(1 - w)(2 nbar^2 - w(|a|^4 + 4|a|^2 b + 2b^2)) / (nbar - w(|a|^2 + b))^2`
pub fn g2_gaussian(nbar: f64, b: f64, w: f64, alpha1: C64) -> Result<f64> {
    let a2 = alpha1.norm_sqr();
    let den = nbar - w * (a2 + b);
    check_mean(den / (1.0 - w))?;
    let num = 2.0 * nbar * nbar - w * (a2 * a2 + 4.0 * a2 * b + 2.0 * b * b);
    Ok((1.0 - w) * num / (den * den))
}

/// `g2` from the closed form of the spec's family, or from the composed
/// P moments for multi-puncture specs.
pub fn g2_analytic(spec: &PuncturedStateSpec) -> Result<G2Report> {
    spec.validate()?;
    let (mean, fact2) = normally_ordered_moments(spec)?;
    check_mean(mean)?;
    let nbar = spec.base.nbar();
    let g2 = match (Family::of(spec), spec.punctures.first()) {
        (Family::Unpunctured, _) if spec.base.r() == 0.0 => 2.0,
        (Family::Unpunctured, _) => g2_delta_squeezed(spec.base.widths()?, 0.0, C64::new(0.0, 0.0))?,
        (Family::DeltaThermal, Some(p)) => g2_delta_thermal(nbar, p.weight, p.center)?,
        (Family::DeltaSqueezed, Some(p)) => g2_delta_squeezed(spec.base.widths()?, p.weight, p.center)?,
        (Family::GaussianVacuum, Some(p)) => g2_gaussian_vacuum(nbar, p.shape.b(), p.weight)?,
        (Family::GaussianThermal, Some(p)) => g2_gaussian(nbar, p.shape.b(), p.weight, p.center)?,
        _ => fact2 / (mean * mean),
    };
    Ok(G2Report::new(mean, fact2, g2, Route::Analytic))
}

/// `g2` from the diagonal of a truncated density matrix.
pub fn g2_trace(rho: &FockOperator) -> Result<G2Report> {
    let residual = rho.hermiticity_residual();
    if residual > HERMITICITY_TOL * rho.max_abs().max(1.0) {
        return Err(Error::NotHermitian {
            residual,
            tolerance: HERMITICITY_TOL,
        });
    }
    let trace = rho.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(trace));
    }
    let diag = rho.diagonal();
    let dim = diag.len();
    let top = dim - dim.div_ceil(10);
    let (mut mean, mut fact2, mut tail) = (0.0, 0.0, 0.0);
    for (n, p) in diag.iter().enumerate() {
        let nf = n as f64;
        mean += nf * p;
        fact2 += nf * (nf - 1.0) * p;
        if n >= top {
            tail += nf * p;
        }
    }
    check_mean(mean)?;
    let mut report = G2Report::new(mean, fact2, fact2 / (mean * mean), Route::Trace);
    report.tail_warning = tail.abs() > TAIL_WARNING * mean;
    Ok(report)
}

/// [`g2_trace`] on the spec's density matrix with `n_max` doubled from
/// the positivity policy start until the trace deficit is below `1e-10`
/// and `g2` moves by less than `1e-10` relative. Returns the truncation
/// used.
pub fn g2_trace_converged(spec: &PuncturedStateSpec) -> Result<(G2Report, usize)> {
    spec.validate()?;
    let mut n = policy_start(spec);
    let mut prev: Option<f64> = None;
    loop {
        let rho = build_density_unchecked(spec, n)?;
        let settled = (1.0 - rho.trace()).abs() <= 1e-10;
        let report = g2_trace(&rho);
        if let Ok(r) = &report {
            if settled && !r.tail_warning && prev.is_some_and(|p| (r.g2 - p).abs() <= 1e-10 * r.g2.abs()) {
                return Ok((*r, n));
            }
            prev = Some(r.g2);
        }
        if n >= N_MAX_CAP {
            return report.map(|r| (r, n));
        }
        n = (2 * n).min(N_MAX_CAP);
    }
}

/// True when the smooth P function is a probability density: no delta
/// puncture carries weight and `sum_i w_i / t_i <= 1`, with `t_i` the
/// P-negativity threshold of puncture `i` alone on the base. The sum rule is
/// exact for a single puncture and sufficient for several, since
/// `P_base - sum w_i g_i` is then a nonnegative combination of the
/// single-puncture functions at their thresholds and of `P_base`.
///
/// On a true result the Jensen argument gives `g2 >= 1`.
pub fn jensen_classicality_check(spec: &PuncturedStateSpec) -> bool {
    if spec.validate().is_err() {
        return false;
    }
    let mut load = 0.0;
    for p in spec.punctures.iter().filter(|p| p.weight > 0.0) {
        if matches!(p.shape, Shape::Delta) {
            return false;
        }
        let single = PuncturedStateSpec {
            base: spec.base,
            punctures: vec![*p],
        };
        match p_negativity_threshold(&single) {
            Ok(t) if t > 0.0 => load += p.weight / t,
            _ => return false,
        }
    }
    load <= 1.0
}

/// One grid point of an antibunching scan. Masked points carry a reason
/// and no `g2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Cell {
    pub params: FamilyParams,
    pub w: Option<f64>,
    pub g2: Option<f64>,
    pub mask_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Scan {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, first axis fastest.
    pub cells: Vec<G2Cell>,
    /// `g2 = 1` polylines in (first axis, second axis) coordinates; empty
    /// for one-axis scans.
    pub contour: Vec<Vec<(f64, f64)>>,
}

/// [`g2_analytic`] over a sweep grid. Points where the spec is invalid, the
/// weight exceeds the family's necessary bound (no density operator), or
/// `g2` is undefined are masked.
pub fn antibunching_scan(config: &SweepConfig) -> Result<G2Scan> {
    let points = config.points()?;
    let cells: Vec<G2Cell> = points.par_iter().map(|p| scan_cell(config, p)).collect();
    let (xs, ys) = config.axis_values();
    let contour = if config.axes.len() == 2 {
        let vals: Vec<Option<f64>> = cells.iter().map(|c| c.g2.map(|g| g - 1.0)).collect();
        zero_contour(&xs, &ys, &vals)
    } else {
        Vec::new()
    };
    Ok(G2Scan { xs, ys, cells, contour })
}

fn scan_cell(config: &SweepConfig, p: &FamilyParams) -> G2Cell {
    let mut cell = G2Cell {
        params: *p,
        w: None,
        g2: None,
        mask_reason: None,
    };
    let spec = match config.spec_at(p) {
        Ok(s) => s,
        Err(e) => {
            cell.mask_reason = Some(format!("invalid spec: {e}"));
            return cell;
        }
    };
    let w = spec.weight_sum();
    cell.w = Some(w);
    if let Some(b) = nc_bound(&spec.with_weight(0.0)) {
        if w > b.value * (1.0 + 1e-12) {
            cell.mask_reason = Some(format!("weight {w:e} above necessary bound {:e}", b.value));
            return cell;
        }
    }
    match g2_analytic(&spec) {
        Ok(r) if r.g2.is_finite() => cell.g2 = Some(r.g2),
        Ok(r) => cell.mask_reason = Some(format!("non-finite g2 {}", r.g2)),
        Err(e) => cell.mask_reason = Some(e.to_string()),
    }
    cell
}
