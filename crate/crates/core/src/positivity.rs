//! Puncture-weight bounds and positivity certification.
//!
//! Analytic necessary (NC), sufficient (SC) and exact (NSC) bounds on the
//! weight of a single puncture, the numerical maximal weight from eigenvalue
//! bisection, zero-eigenvector witnesses of tightness, and a combined report
//! under an `n_max`-doubling convergence policy.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{
    coherent_vector, displacement_block, eigenvalues, gershgorin_margin, min_eigenvalue, FockOperator,
    FockVector,
};
use crate::statemodel::{
    base_block, build_density_unchecked, normalization, puncture_block, BaseState, Puncture,
    PuncturedStateSpec, Shape, SqueezedWidths,
};

/// Upper end of the `n_max` doubling sequence.
pub const N_MAX_CAP: usize = 512;

/// `min eig >= -PSD_TOL * trace` counts as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// Eigenvalue threshold of the bisection, relative to the largest
/// eigenvalue of the diagonally scaled operator. Close to roundoff: in
/// strongly squeezed cases the scaled spectrum crosses zero with a slope of
/// order 1e-12 per unit weight.
const BISECTION_EIG_TOL: f64 = 1e-14;

/// Base diagonal entries below this are treated as outside the support.
const SUPPORT_FLOOR: f64 = 1e-280;

const MAX_WEIGHT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Necessary,
    Sufficient,
    NecessaryAndSufficient,
}

/// State families with closed-form results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Unpunctured,
    DeltaThermal,
    DeltaSqueezed,
    GaussianVacuum,
    GaussianThermal,
    /// Multi-puncture specs and Gaussian punctures on a squeezed base.
    General,
}

impl Family {
    pub fn of(spec: &PuncturedStateSpec) -> Family {
        let squeezed = spec.base.r() != 0.0;
        match spec.punctures.as_slice() {
            [] => Family::Unpunctured,
            [p] => match (p.shape, squeezed) {
                (Shape::Delta, false) => Family::DeltaThermal,
                (Shape::Delta, true) => Family::DeltaSqueezed,
                (Shape::Gaussian { .. }, false) if p.center == C64::new(0.0, 0.0) => {
                    Family::GaussianVacuum
                }
                (Shape::Gaussian { .. }, false) => Family::GaussianThermal,
                (Shape::Gaussian { .. }, true) => Family::General,
            },
            _ => Family::General,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Unpunctured => "unpunctured",
            Family::DeltaThermal => "delta_thermal",
            Family::DeltaSqueezed => "delta_squeezed",
            Family::GaussianVacuum => "gaussian_vacuum",
            Family::GaussianThermal => "gaussian_thermal",
            Family::General => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub kind: BoundKind,
    pub family: Family,
    /// Set on the degenerate `b = nbar` Gaussian case.
    pub boundary: bool,
}

impl BoundResult {
    fn new(value: f64, kind: BoundKind, family: Family) -> Self {
        Self {
            value,
            kind,
            family,
            boundary: false,
        }
    }
}

fn require_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {x}")))
    }
}

/// `w <= e^{-|alpha_1|^2 / nbar} / (nbar + 1)`
pub fn nc_bound_delta_thermal(nbar: f64, alpha1: C64) -> Result<BoundResult> {
    require_positive("nbar", nbar)?;
    let value = (-alpha1.norm_sqr() / nbar).exp() / (nbar + 1.0);
    Ok(BoundResult::new(value, BoundKind::Necessary, Family::DeltaThermal))
}

/// Gershgorin bound
/// `e^{|a|^2} / ((nbar + 1) f(|a|)) * min_n (x / |a|)^n sqrt(n!)` with
/// `x = nbar / (nbar + 1)` and `f(a) = sum_m a^m / sqrt(m!)`.
pub fn sc_bound_delta_thermal(nbar: f64, alpha1: C64) -> Result<BoundResult> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("nbar must be >= 0, got {nbar}")));
    }
    let kind = BoundKind::Sufficient;
    if nbar == 0.0 {
        return Ok(BoundResult::new(0.0, kind, Family::DeltaThermal));
    }
    let a = alpha1.norm();
    if a == 0.0 {
        return Ok(BoundResult::new(1.0 / (nbar + 1.0), kind, Family::DeltaThermal));
    }
    let x = nbar / (nbar + 1.0);
    // log t_n with t_{n+1} / t_n = x sqrt(n + 1) / |a|; the ratio increases
    // with n, so the first n with ratio >= 1 is the global minimum
    let mut log_t = 0.0;
    let mut n = 0usize;
    loop {
        let ratio = x * ((n + 1) as f64).sqrt() / a;
        if ratio >= 1.0 {
            break;
        }
        log_t += ratio.ln();
        n += 1;
    }
    let value = (a * a - (nbar + 1.0).ln() - log_f(a) + log_t).exp();
    Ok(BoundResult::new(value, kind, Family::DeltaThermal))
}

/// `ln sum_m a^m / sqrt(m!)`, summed in scaled form past the peak term.
fn log_f(a: f64) -> f64 {
    let ln_a = a.ln();
    let mut terms = Vec::new();
    let mut log_term = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut m = 0usize;
    loop {
        if m > 0 {
            log_term += ln_a - 0.5 * (m as f64).ln();
        }
        terms.push(log_term);
        peak = peak.max(log_term);
        if (m as f64) > a * a && log_term < peak - 50.0 {
            break;
        }
        m += 1;
    }
    peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln()
}

/// `2 sqrt(R I) e^{-(a_R^2/R + a_I^2/I)} / (R + I + 2 R I)`
pub fn nc_bound_delta_squeezed(widths: SqueezedWidths, alpha1: C64) -> Result<BoundResult> {
    let (r, i) = (widths.nbar_r, widths.nbar_i);
    require_positive("nbar_R", r)?;
    require_positive("nbar_I", i)?;
    let expo = alpha1.re * alpha1.re / r + alpha1.im * alpha1.im / i;
    let value = 2.0 * (r * i).sqrt() * (-expo).exp() / (r + i + 2.0 * r * i);
    Ok(BoundResult::new(value, BoundKind::Necessary, Family::DeltaSqueezed))
}

/// Exact bound `(b + 1) / (nbar + 1)` for a vacuum-centred Gaussian
/// puncture; zero when the puncture is broader than the base (`b > nbar`).
pub fn nsc_bound_gaussian_vacuum(nbar: f64, b: f64) -> Result<BoundResult> {
    require_positive("nbar", nbar)?;
    require_positive("b", b)?;
    let mut out = BoundResult::new(
        if b <= nbar {
            (b + 1.0) / (nbar + 1.0)
        } else {
            0.0
        },
        BoundKind::NecessaryAndSufficient,
        Family::GaussianVacuum,
    );
    out.boundary = b == nbar;
    Ok(out)
}

/// `w <= (b + 1) / (nbar + 1) e^{-|alpha_1|^2 / (nbar - b)}` for `b < nbar`;
/// for `b >= nbar` the limit (1 at the boundary with `alpha_1 = 0`, else 0).
pub fn nc_bound_gaussian(nbar: f64, b: f64, alpha1: C64) -> Result<BoundResult> {
    require_positive("nbar", nbar)?;
    require_positive("b", b)?;
    let a2 = alpha1.norm_sqr();
    if a2 == 0.0 {
        return nsc_bound_gaussian_vacuum(nbar, b);
    }
    let mut out = BoundResult::new(0.0, BoundKind::Necessary, Family::GaussianThermal);
    if b < nbar {
        out.value = (b + 1.0) / (nbar + 1.0) * (-a2 / (nbar - b)).exp();
    } else {
        out.boundary = b == nbar;
    }
    Ok(out)
}

/// The closed-form NC (or NSC) bound for the spec's family, if one exists.
pub fn nc_bound(spec: &PuncturedStateSpec) -> Option<BoundResult> {
    let p = spec.punctures.first()?;
    let nbar = spec.base.nbar();
    match Family::of(spec) {
        Family::DeltaThermal => nc_bound_delta_thermal(nbar, p.center).ok(),
        Family::DeltaSqueezed => spec
            .base
            .widths()
            .and_then(|w| nc_bound_delta_squeezed(w, p.center))
            .ok(),
        Family::GaussianVacuum | Family::GaussianThermal => {
            nc_bound_gaussian(nbar, p.shape.b(), p.center).ok()
        }
        Family::Unpunctured | Family::General => None,
    }
}

/// The Gershgorin bound, defined only for delta-punctured thermal states.
pub fn sc_bound(spec: &PuncturedStateSpec) -> Option<BoundResult> {
    match Family::of(spec) {
        Family::DeltaThermal => sc_bound_delta_thermal(spec.base.nbar(), spec.punctures[0].center).ok(),
        _ => None,
    }
}

/// Starting truncation of the convergence policy,
/// `max(15, ceil(10 (nbar + |alpha_1|^2 + b)))`.
pub fn policy_start(spec: &PuncturedStateSpec) -> usize {
    let extra = spec
        .punctures
        .iter()
        .map(|p| p.center.norm_sqr() + p.shape.b())
        .fold(0.0, f64::max);
    let n = (10.0 * (spec.base.nbar() + extra)).ceil();
    (n as usize).clamp(15, N_MAX_CAP)
}

/// Outcome of [`numeric_wmax`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmaxResult {
    pub value: f64,
    pub n_max_used: usize,
    /// `(n_max, w_max)` at every level visited.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

fn single_puncture(spec: &PuncturedStateSpec) -> Result<Puncture> {
    match spec.punctures.as_slice() {
        [p] => Ok(*p),
        other => Err(Error::Unsupported(format!(
            "numeric w_max needs exactly one puncture, got {}",
            other.len()
        ))),
    }
}

/// Base and puncture operators congruence-scaled by the inverse square root
/// of the base diagonal. `None` when the puncture has weight where the base
/// has none.
fn scaled_pair(
    base: &BaseState,
    p: &Puncture,
    dim: usize,
) -> Result<Option<(DMatrix<C64>, DMatrix<C64>)>> {
    let a = base_block(base, dim)?;
    let b = puncture_block(p, dim);
    let keep: Vec<usize> = (0..dim).filter(|&i| a[(i, i)].re > SUPPORT_FLOOR).collect();
    let puncture_scale = (0..dim).map(|i| b[(i, i)].re).fold(0.0, f64::max);
    for i in 0..dim {
        if a[(i, i)].re <= SUPPORT_FLOOR && b[(i, i)].re > 1e-15 * puncture_scale {
            return Ok(None);
        }
    }
    let s: Vec<f64> = keep.iter().map(|&i| 1.0 / a[(i, i)].re.sqrt()).collect();
    let k = keep.len();
    let sa = DMatrix::from_fn(k, k, |i, j| a[(keep[i], keep[j])] * (s[i] * s[j]));
    let sb = DMatrix::from_fn(k, k, |i, j| b[(keep[i], keep[j])] * (s[i] * s[j]));
    Ok(Some((sa, sb)))
}

/// Largest weight keeping `M_base - w M_pi` positive semidefinite on the
/// basis truncated at `n_max`, to relative precision `tol / 10`.
///
/// The unnormalized operator is congruence-scaled to unit diagonal first;
/// this preserves the inertia (so the sign of the smallest eigenvalue) and
/// keeps the bisection meaningful when the bound is many orders of
/// magnitude below one.
pub fn numeric_wmax_at(template: &PuncturedStateSpec, n_max: usize, tol: f64) -> Result<f64> {
    let p = single_puncture(template)?;
    template.with_weight(0.0).validate()?;
    let Some((a, b)) = scaled_pair(&template.base, &p, n_max + 1)? else {
        return Ok(0.0);
    };
    let passes = |w: f64| -> Result<bool> {
        let m = &a - &b * C64::new(w, 0.0);
        let eig = eigenvalues(&FockOperator::general(m))?;
        let top = eig.last().copied().unwrap_or(0.0).abs().max(1.0);
        Ok(eig[0] >= -BISECTION_EIG_TOL * top)
    };
    let mut lo = 0.0;
    let mut hi = nc_bound(template)
        .map(|r| r.value)
        .filter(|&v| v > 0.0)
        .unwrap_or(MAX_WEIGHT)
        .min(MAX_WEIGHT);
    // the truncated maximum can only exceed the true one
    while passes(hi)? {
        lo = hi;
        if hi >= MAX_WEIGHT {
            return Ok(MAX_WEIGHT);
        }
        hi = (2.0 * hi).min(MAX_WEIGHT);
    }
    let rel = (0.1 * tol).max(1e-15);
    for _ in 0..400 {
        if hi - lo <= rel * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// [`numeric_wmax_at`] under the convergence policy: start at
/// [`policy_start`], double until successive values differ by less than
/// `tol / 2` relative, stop at [`N_MAX_CAP`].
pub fn numeric_wmax(template: &PuncturedStateSpec, tol: f64) -> Result<WmaxResult> {
    let mut n = policy_start(template);
    let mut history: Vec<(usize, f64)> = Vec::new();
    loop {
        let v = numeric_wmax_at(template, n, tol)?;
        let converged = history
            .last()
            .is_some_and(|&(_, prev)| (v - prev).abs() <= 0.5 * tol * v.abs() || (v - prev).abs() <= 1e-15);
        history.push((n, v));
        if converged || n >= N_MAX_CAP {
            return Ok(WmaxResult {
                value: v,
                n_max_used: n,
                history,
                converged,
            });
        }
        n = (2 * n).min(N_MAX_CAP);
    }
}

/// Squeezed coherent parameters `(gamma, r')` of the zero mode of a
/// delta-punctured squeezed thermal state at its NC bound.
pub fn squeezed_witness_params(widths: SqueezedWidths, alpha1: C64) -> Result<(C64, f64)> {
    let (r, i) = (widths.nbar_r, widths.nbar_i);
    let t = (r - i) / (2.0 * r * i);
    if !(t.abs() < 1.0) {
        return Err(Error::WitnessUndefined(format!(
            "tanh r' = (nbar_R - nbar_I) / (2 nbar_R nbar_I) = {t} lies outside (-1, 1)"
        )));
    }
    let s = r + i + 2.0 * r * i;
    let gamma = C64::new(
        s / (2.0 * r * i + r - i) * alpha1.re,
        s / (2.0 * r * i + i - r) * alpha1.im,
    );
    Ok((gamma, t.atanh()))
}

/// `S(r)|0>` on `len` Fock states.
fn squeezed_vacuum(r: f64, len: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); len];
    let t = -r.tanh();
    let mut c = 1.0 / r.cosh().sqrt();
    let mut k = 0usize;
    while 2 * k < len {
        v[2 * k] = C64::new(c, 0.0);
        c *= t * ((2 * k + 1) as f64 / (2 * k + 2) as f64).sqrt();
        k += 1;
    }
    v
}

/// Candidate zero-eigenvalue state of `spec` at its NC bound.
pub fn witness_state(spec: &PuncturedStateSpec, n_max: usize) -> Result<FockVector> {
    let p = single_puncture(spec)?;
    let nbar = spec.base.nbar();
    match Family::of(spec) {
        Family::DeltaThermal => {
            require_positive("nbar", nbar)?;
            Ok(coherent_vector(p.center * ((nbar + 1.0) / nbar), n_max))
        }
        Family::GaussianVacuum | Family::GaussianThermal => {
            let b = p.shape.b();
            if b >= nbar {
                return Err(Error::WitnessUndefined(format!(
                    "Gaussian width b = {b} is not below nbar = {nbar}"
                )));
            }
            Ok(coherent_vector(p.center * ((nbar + 1.0) / (nbar - b)), n_max))
        }
        Family::DeltaSqueezed => {
            let (gamma, rp) = squeezed_witness_params(spec.base.widths()?, p.center)?;
            let decay = rp.tanh().abs();
            let tail = if decay > 0.0 {
                (2.0 * (1e-20f64).ln() / decay.ln()).ceil() as usize
            } else {
                1
            };
            let len = (n_max + 1).max(tail.min(4096)) + gamma.norm_sqr().ceil() as usize + 40;
            let sv = nalgebra::DVector::from_vec(squeezed_vacuum(rp, len));
            let d = displacement_block(gamma, n_max + 1, len);
            Ok(FockVector::new((d * sv).as_slice().to_vec()))
        }
        Family::Unpunctured | Family::General => Err(Error::Unsupported(
            "no zero-mode witness for this family".into(),
        )),
    }
}

/// `||rho v|| / (||rho|| ||v||)` for the family's witness `v`; the weight
/// in `spec` is used as given (set it to the NC bound to test tightness).
pub fn zero_eigenvector_residual(spec: &PuncturedStateSpec, n_max: usize) -> Result<f64> {
    let v = witness_state(spec, n_max)?;
    let rho = build_density_unchecked(spec, n_max)?;
    let rv = rho.apply(&v);
    Ok(rv.norm() / (rho.spectral_norm()? * v.norm()))
}

/// Copy of a single-puncture spec with its weight set to the NC bound.
pub fn at_nc_bound(spec: &PuncturedStateSpec) -> Result<PuncturedStateSpec> {
    let bound = nc_bound(spec)
        .ok_or_else(|| Error::Unsupported("no closed-form bound for this family".into()))?;
    Ok(spec.with_weight(bound.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Positive,
    NotPositive,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub family: Family,
    pub nc_bound: Option<f64>,
    /// `None` when no closed-form bound applies.
    pub nc_pass: Option<bool>,
    pub gershgorin_margin: f64,
    pub min_eigenvalue: f64,
    pub n_max_used: usize,
    pub convergence_history: Vec<(usize, f64)>,
    pub verdict: Verdict,
    pub boundary_case: bool,
}

/// Positivity verdict for `spec`.
///
/// A negative smallest eigenvalue at any truncation certifies a negative
/// expectation value, hence not positive. Otherwise the smallest eigenvalue
/// is followed under `n_max` doubling until it changes by less than
/// `PSD_TOL * trace`; a nonnegative Gershgorin margin at the last truncation
/// also certifies positivity.
pub fn positivity_report(spec: &PuncturedStateSpec) -> Result<PositivityReport> {
    spec.validate()?;
    normalization(spec)?;
    let bound = nc_bound(spec);
    let w = spec.weight_sum();
    let nc_pass = bound.map(|b| w <= b.value * (1.0 + 1e-12) + 1e-300);

    let mut n = policy_start(spec);
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut verdict = Verdict::Indeterminate;
    let rho = loop {
        let rho = build_density_unchecked(spec, n)?;
        let tol = PSD_TOL * rho.trace().abs();
        let lam = min_eigenvalue(&rho)?;
        let prev = history.last().map(|h| h.1);
        history.push((n, lam));
        if lam < -tol {
            verdict = Verdict::NotPositive;
            break rho;
        }
        if prev.is_some_and(|p| (lam - p).abs() <= tol) {
            verdict = Verdict::Positive;
            break rho;
        }
        if n >= N_MAX_CAP {
            break rho;
        }
        n = (2 * n).min(N_MAX_CAP);
    };
    let margin = gershgorin_margin(&rho)?;
    if margin >= 0.0 {
        verdict = Verdict::Positive;
    }
    Ok(PositivityReport {
        family: Family::of(spec),
        nc_bound: bound.map(|b| b.value),
        nc_pass,
        gershgorin_margin: margin,
        min_eigenvalue: history.last().map(|h| h.1).unwrap_or(f64::NAN),
        n_max_used: n,
        convergence_history: history,
        verdict,
        boundary_case: bound.is_some_and(|b| b.boundary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statemodel::squeezed_widths;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn delta(nbar: f64, a: C64, w: f64) -> PuncturedStateSpec {
        PuncturedStateSpec::thermal(nbar).with_puncture(Puncture::delta(a, w))
    }

    #[test]
    fn nc_delta_examples() {
        assert_eq!(nc_bound_delta_thermal(1.0, c(0.0, 0.0)).unwrap().value, 0.5);
        let v = nc_bound_delta_thermal(0.5, c(1.0, 0.0)).unwrap().value;
        assert!((v - (-2.0f64).exp() / 1.5).abs() < 1e-16);
        assert!((v - 0.090224).abs() < 1e-6);
        assert!(nc_bound_delta_thermal(0.0, c(0.0, 0.0)).is_err());
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let b = nc_bound_delta_thermal(0.7, c(0.1 * k as f64, 0.0)).unwrap().value;
            assert!(b < last);
            last = b;
        }
    }

    /// Brute force: direct minimum over n and a long plain sum for f.
    fn sc_oracle(nbar: f64, a: f64) -> f64 {
        let x = nbar / (nbar + 1.0);
        let mut best = f64::INFINITY;
        let mut term = 1.0f64;
        for n in 0..200 {
            if n > 0 {
                term *= x / a * (n as f64).sqrt();
            }
            best = best.min(term);
        }
        let mut f = 0.0;
        let mut t = 1.0f64;
        for m in 0..400 {
            if m > 0 {
                t *= a / (m as f64).sqrt();
            }
            f += t;
        }
        (a * a).exp() / ((nbar + 1.0) * f) * best
    }

    #[test]
    fn sc_delta_examples() {
        let z = sc_bound_delta_thermal(0.5, c(0.0, 0.0)).unwrap().value;
        assert!((z - 1.0 / 1.5).abs() < 1e-15);
        let tiny = sc_bound_delta_thermal(0.5, c(1e-9, 0.0)).unwrap().value;
        assert!((tiny - nc_bound_delta_thermal(0.5, c(0.0, 0.0)).unwrap().value).abs() < 1e-8);
        assert_eq!(sc_bound_delta_thermal(0.0, c(0.5, 0.0)).unwrap().value, 0.0);
        let sc = sc_bound_delta_thermal(0.5, c(1.0, 0.0)).unwrap().value;
        assert!(sc <= nc_bound_delta_thermal(0.5, c(1.0, 0.0)).unwrap().value);
        for (nbar, a) in [(0.5, 1.0), (0.1, 0.3), (2.0, 1.5), (1.0, 3.0)] {
            let got = sc_bound_delta_thermal(nbar, c(a, 0.0)).unwrap().value;
            let want = sc_oracle(nbar, a);
            assert!((got - want).abs() <= 1e-12 * want, "{nbar} {a}: {got} vs {want}");
        }
    }

    #[test]
    fn squeezed_nc_examples() {
        let iso = nc_bound_delta_squeezed(SqueezedWidths::new(0.8, 0.8).unwrap(), c(0.3, -0.2))
            .unwrap()
            .value;
        let thermal = nc_bound_delta_thermal(0.8, c(0.3, -0.2)).unwrap().value;
        assert!((iso - thermal).abs() < 1e-15);
        let w = SqueezedWidths::new(1.0, 0.1).unwrap();
        let v = nc_bound_delta_squeezed(w, c(0.0, 0.0)).unwrap().value;
        assert!((v - 2.0 * 0.1f64.sqrt() / 1.3).abs() < 1e-15);
        assert!((v - 0.486504).abs() < 1e-6);
        let w = SqueezedWidths::new(0.2, 1.0).unwrap();
        let on_imag = nc_bound_delta_squeezed(w, c(0.0, 0.5)).unwrap().value;
        let on_real = nc_bound_delta_squeezed(w, c(0.5, 0.0)).unwrap().value;
        assert!(on_imag > on_real);
        assert!(SqueezedWidths::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_bound_examples() {
        let v = nsc_bound_gaussian_vacuum(1.0, 1e-12).unwrap().value;
        assert!((v - 0.5).abs() < 1e-11);
        let b = nsc_bound_gaussian_vacuum(1.3, 1.3).unwrap();
        assert_eq!(b.value, 1.0);
        assert!(b.boundary);
        assert_eq!(nsc_bound_gaussian_vacuum(1.0, 2.0).unwrap().value, 0.0);

        assert_eq!(
            nc_bound_gaussian(1.0, 0.5, c(0.0, 0.0)).unwrap().value,
            nsc_bound_gaussian_vacuum(1.0, 0.5).unwrap().value
        );
        let v = nc_bound_gaussian(1.5, 1.0, c(0.5, 0.0)).unwrap().value;
        assert!((v - 0.8 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.485225).abs() < 1e-6);
        for a in [c(0.3, 0.1), c(1.0, -1.0)] {
            let g = nc_bound_gaussian(0.9, 1e-8, a).unwrap().value;
            let d = nc_bound_delta_thermal(0.9, a).unwrap().value;
            assert!((g - d).abs() <= 1e-6);
        }
        assert_eq!(nc_bound_gaussian(1.0, 1.0, c(0.2, 0.0)).unwrap().value, 0.0);
    }

    #[test]
    fn numeric_wmax_delta_vacuum() {
        let r = numeric_wmax(&delta(0.5, c(0.0, 0.0), 0.0), 1e-6).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0 / 1.5).abs() <= 1e-6);
    }

    #[test]
    fn numeric_wmax_gaussian_vacuum() {
        let spec = PuncturedStateSpec::thermal(1.0).with_puncture(Puncture::gaussian(0.5, c(0.0, 0.0), 0.0));
        let r = numeric_wmax(&spec, 1e-6).unwrap();
        assert!((r.value - 0.75).abs() <= 1e-6, "{}", r.value);
    }

    #[test]
    fn numeric_wmax_squeezed_vacuum() {
        let w = SqueezedWidths::new(1.0, 0.1).unwrap();
        let spec = PuncturedStateSpec::squeezed_from_widths(w).with_puncture(Puncture::delta(c(0.0, 0.0), 0.0));
        let bound = nc_bound_delta_squeezed(w, c(0.0, 0.0)).unwrap().value;
        let got = numeric_wmax_at(&spec, 40, 1e-8).unwrap();
        assert!((got - bound).abs() <= 1e-3 * bound, "{got} vs {bound}");
    }

    #[test]
    fn numeric_wmax_tiny_bound() {
        let spec = delta(0.1, c(1.5, 0.0), 0.0);
        let r = numeric_wmax(&spec, 1e-6).unwrap();
        let bound = nc_bound_delta_thermal(0.1, c(1.5, 0.0)).unwrap().value;
        assert!(bound < 1e-9);
        assert!((r.value - bound).abs() <= 1e-3 * bound, "{} vs {bound}", r.value);
    }

    #[test]
    fn broad_gaussian_cannot_puncture() {
        let spec = PuncturedStateSpec::thermal(1.0).with_puncture(Puncture::gaussian(2.0, c(0.0, 0.0), 0.0));
        let r = numeric_wmax(&spec, 1e-6).unwrap();
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn witness_residuals() {
        let spec = at_nc_bound(&delta(1.0, c(0.3, 0.0), 0.0)).unwrap();
        assert!(zero_eigenvector_residual(&spec, 60).unwrap() <= 1e-6);

        let g = at_nc_bound(
            &PuncturedStateSpec::thermal(2.0).with_puncture(Puncture::gaussian(1.0, c(0.2, 0.0), 0.0)),
        )
        .unwrap();
        assert!(zero_eigenvector_residual(&g, 60).unwrap() <= 1e-6);

        let vac = at_nc_bound(&delta(0.7, c(0.0, 0.0), 0.0)).unwrap();
        let v = witness_state(&vac, 10).unwrap();
        assert_eq!(v, FockVector::number_state(0, 11));
        let rho = build_density_unchecked(&vac, 10).unwrap();
        assert_eq!(rho.get(0, 0).re, 0.0);
    }

    #[test]
    fn squeezed_witness_residual() {
        let w = SqueezedWidths::new(1.0, 0.5).unwrap();
        for a in [c(0.0, 0.0), c(0.3, 0.0), c(0.2, 0.15)] {
            let spec = at_nc_bound(
                &PuncturedStateSpec::squeezed_from_widths(w).with_puncture(Puncture::delta(a, 0.0)),
            )
            .unwrap();
            let res = zero_eigenvector_residual(&spec, 60).unwrap();
            assert!(res <= 1e-6, "alpha={a}: {res:e}");
        }
        let narrow = SqueezedWidths::new(1.0, 0.1).unwrap();
        assert!(matches!(
            squeezed_witness_params(narrow, c(0.0, 0.0)),
            Err(Error::WitnessUndefined(_))
        ));
        let spec = PuncturedStateSpec::squeezed(0.6, 0.2);
        assert!(squeezed_widths(spec.base.nbar(), spec.base.r()).is_ok());
    }

    #[test]
    fn weight_at_bound_has_zero_eigenvalue() {
        let spec = at_nc_bound(&delta(0.5, c(0.3, 0.0), 0.0)).unwrap();
        let rho = build_density_unchecked(&spec, 40).unwrap();
        assert!(min_eigenvalue(&rho).unwrap().abs() <= 1e-6);
    }

    #[test]
    fn gershgorin_below_sc_bound() {
        for (nbar, a) in [(0.5, 0.5), (1.0, 1.2), (2.0, 0.2)] {
            let sc = sc_bound_delta_thermal(nbar, c(a, 0.0)).unwrap().value;
            let rho = build_density_unchecked(&delta(nbar, c(a, 0.0), 0.99 * sc), 40).unwrap();
            assert!(gershgorin_margin(&rho).unwrap() > 0.0);
        }
    }

    #[test]
    fn report_examples() {
        let r = positivity_report(&delta(1.0, c(0.0, 0.0), 0.4)).unwrap();
        assert_eq!(r.verdict, Verdict::Positive);
        assert_eq!(r.nc_pass, Some(true));
        let r = positivity_report(&delta(1.0, c(0.0, 0.0), 0.6)).unwrap();
        assert_eq!(r.verdict, Verdict::NotPositive);
        assert_eq!(r.nc_pass, Some(false));
        let r = positivity_report(&PuncturedStateSpec::thermal(1.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Positive);
        assert_eq!(r.nc_pass, None);
        let n = r.n_max_used as i32;
        assert!((r.min_eigenvalue - 0.5f64.powi(n + 1)).abs() < 1e-15);
    }
}
