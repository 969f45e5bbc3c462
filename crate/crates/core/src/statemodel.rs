//! Punctured P-function states: symbolic specs, validity checks and density
//! matrices on the truncated Fock basis.
//!
//! A spec describes
//!
//! ```text
//! P(alpha) = N [ P_base(alpha) - sum_i w_i pi_i(alpha - alpha_i) ],   N = 1 / (1 - sum_i w_i)
//! ```
//!
//! with a thermal or squeezed thermal base and delta or Gaussian punctures.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fockspace::{coherent_vector, displacement_block, squeeze_block, FockOperator};
use crate::quadrature::Rule;

/// Default tolerance on `|1 - Tr rho|` accepted by [`build_density`].
pub const TRACE_DEFICIT_TOL: f64 = 1e-6;

/// Relative size of the thermal tail dropped when padding sums over Fock
/// columns beyond `n_max`.
const TAIL_CUTOFF: f64 = 1e-20;
const MAX_PAD_COLUMNS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseState {
    Thermal { nbar: f64 },
    SqueezedThermal { nbar: f64, r: f64 },
}

impl BaseState {
    pub fn nbar(&self) -> f64 {
        match *self {
            BaseState::Thermal { nbar } | BaseState::SqueezedThermal { nbar, .. } => nbar,
        }
    }

    /// Squeezing parameter, zero for the thermal base.
    pub fn r(&self) -> f64 {
        match *self {
            BaseState::Thermal { .. } => 0.0,
            BaseState::SqueezedThermal { r, .. } => r,
        }
    }

    /// P-function widths along the real and imaginary axes.
    pub fn widths(&self) -> Result<SqueezedWidths> {
        squeezed_widths(self.nbar(), self.r())
    }

    /// `(<|alpha|^2>, <|alpha|^4>)` under the base P function.
    pub fn p_moments(&self) -> Result<(f64, f64)> {
        match *self {
            BaseState::Thermal { nbar } => Ok((nbar, 2.0 * nbar * nbar)),
            BaseState::SqueezedThermal { .. } => {
                let w = self.widths()?;
                let (a, b) = (w.nbar_r, w.nbar_i);
                Ok((0.5 * (a + b), 0.25 * (3.0 * a * a + 2.0 * a * b + 3.0 * b * b)))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let nbar = self.nbar();
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "base nbar must be finite and >= 0, got {nbar}"
            )));
        }
        if let BaseState::SqueezedThermal { r, .. } = *self {
            if !r.is_finite() {
                return Err(Error::InvalidParameter(format!("squeezing r = {r}")));
            }
            if r != 0.0 {
                squeezed_widths(nbar, r)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Delta,
    Gaussian { b: f64 },
}

impl Shape {
    /// Gaussian width, zero for a delta peak.
    pub fn b(&self) -> f64 {
        match *self {
            Shape::Delta => 0.0,
            Shape::Gaussian { b } => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PunctureRepr", into = "PunctureRepr")]
pub struct Puncture {
    pub shape: Shape,
    pub center: C64,
    pub weight: f64,
}

impl Puncture {
    pub fn delta(center: C64, weight: f64) -> Self {
        Self {
            shape: Shape::Delta,
            center,
            weight,
        }
    }

    pub fn gaussian(b: f64, center: C64, weight: f64) -> Self {
        Self {
            shape: Shape::Gaussian { b },
            center,
            weight,
        }
    }

    /// `(<|alpha|^2>, <|alpha|^4>)` under the normalized puncture profile.
    pub fn p_moments(&self) -> (f64, f64) {
        let a2 = self.center.norm_sqr();
        let b = self.shape.b();
        (a2 + b, a2 * a2 + 4.0 * a2 * b + 2.0 * b * b)
    }

    fn validate(&self) -> Result<()> {
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "puncture weight must be finite and >= 0, got {}",
                self.weight
            )));
        }
        if !self.center.re.is_finite() || !self.center.im.is_finite() {
            return Err(Error::InvalidParameter("puncture center is not finite".into()));
        }
        if let Shape::Gaussian { b } = self.shape {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Gaussian puncture width b must be > 0, got {b}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ShapeTag {
    Delta,
    Gaussian,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PunctureRepr {
    shape: ShapeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    alpha: [f64; 2],
    weight: f64,
}

impl TryFrom<PunctureRepr> for Puncture {
    type Error = String;

    fn try_from(p: PunctureRepr) -> std::result::Result<Self, String> {
        let shape = match (p.shape, p.b) {
            (ShapeTag::Delta, None) => Shape::Delta,
            (ShapeTag::Delta, Some(_)) => return Err("delta puncture takes no width b".into()),
            (ShapeTag::Gaussian, Some(b)) => Shape::Gaussian { b },
            (ShapeTag::Gaussian, None) => return Err("gaussian puncture needs a width b".into()),
        };
        Ok(Puncture {
            shape,
            center: C64::new(p.alpha[0], p.alpha[1]),
            weight: p.weight,
        })
    }
}

impl From<Puncture> for PunctureRepr {
    fn from(p: Puncture) -> Self {
        let (shape, b) = match p.shape {
            Shape::Delta => (ShapeTag::Delta, None),
            Shape::Gaussian { b } => (ShapeTag::Gaussian, Some(b)),
        };
        PunctureRepr {
            shape,
            b,
            alpha: [p.center.re, p.center.im],
            weight: p.weight,
        }
    }
}

/// Base state plus punctures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuncturedStateSpec {
    pub base: BaseState,
    #[serde(default)]
    pub punctures: Vec<Puncture>,
}

impl PuncturedStateSpec {
    pub fn thermal(nbar: f64) -> Self {
        Self {
            base: BaseState::Thermal { nbar },
            punctures: Vec::new(),
        }
    }

    pub fn squeezed(nbar: f64, r: f64) -> Self {
        Self {
            base: BaseState::SqueezedThermal { nbar, r },
            punctures: Vec::new(),
        }
    }

    /// Squeezed thermal base with the given P-function widths.
    pub fn squeezed_from_widths(widths: SqueezedWidths) -> Self {
        let (nbar, r) = widths.to_base();
        Self::squeezed(nbar, r)
    }

    pub fn with_puncture(mut self, p: Puncture) -> Self {
        self.punctures.push(p);
        self
    }

    pub fn weight_sum(&self) -> f64 {
        self.punctures.iter().map(|p| p.weight).sum()
    }

    /// Checks every structural invariant, including `sum w < 1`.
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        for p in &self.punctures {
            p.validate()?;
        }
        normalization(self).map(|_| ())
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Copy with every puncture weight replaced by `w`.
    pub fn with_weight(&self, w: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.punctures {
            p.weight = w;
        }
        out
    }
}

/// P-function widths of a squeezed thermal state,
/// `P ∝ exp(-alpha_R^2 / nbar_r - alpha_I^2 / nbar_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedWidths {
    pub nbar_r: f64,
    pub nbar_i: f64,
}

impl SqueezedWidths {
    pub fn new(nbar_r: f64, nbar_i: f64) -> Result<Self> {
        if !(nbar_r > 0.0 && nbar_i > 0.0 && nbar_r.is_finite() && nbar_i.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "squeezed widths must be > 0, got ({nbar_r}, {nbar_i})"
            )));
        }
        Ok(Self { nbar_r, nbar_i })
    }

    /// The `(nbar, r)` pair that produces these widths.
    pub fn to_base(&self) -> (f64, f64) {
        let a = 1.0 + 2.0 * self.nbar_r;
        let b = 1.0 + 2.0 * self.nbar_i;
        let nbar = 0.5 * ((a * b).sqrt() - 1.0);
        let r = 0.25 * (b / a).ln();
        (nbar, r)
    }
}

/// `nbar_R = e^{-2r} nbar - e^{-r} sinh r`, `nbar_I = e^{2r} nbar + e^r sinh r`.
pub fn squeezed_widths(nbar: f64, r: f64) -> Result<SqueezedWidths> {
    let ra = r.abs();
    let margin = (-2.0 * ra).exp() * nbar - (-ra).exp() * ra.sinh();
    if !(margin > 0.0) && r != 0.0 {
        return Err(Error::InvalidSqueezing { nbar, r, margin });
    }
    if r == 0.0 {
        if nbar > 0.0 {
            return Ok(SqueezedWidths {
                nbar_r: nbar,
                nbar_i: nbar,
            });
        }
        return Err(Error::InvalidSqueezing { nbar, r, margin });
    }
    Ok(SqueezedWidths {
        nbar_r: (-2.0 * r).exp() * nbar - (-r).exp() * r.sinh(),
        nbar_i: (2.0 * r).exp() * nbar + r.exp() * r.sinh(),
    })
}

/// `N = (1 - sum w)^{-1}`
pub fn normalization(spec: &PuncturedStateSpec) -> Result<f64> {
    let s = spec.weight_sum();
    if !(s < 1.0) {
        return Err(Error::Unnormalizable(s));
    }
    Ok(1.0 / (1.0 - s))
}

/// Thermal populations `nbar^n / (nbar + 1)^{n + 1}` for `n < len`.
pub fn thermal_populations(nbar: f64, len: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(len);
    let x = nbar / (nbar + 1.0);
    let mut v = 1.0 / (nbar + 1.0);
    for _ in 0..len {
        p.push(v);
        v *= x;
    }
    p
}

/// Number of Fock columns beyond which a thermal distribution of mean
/// `nbar` has negligible weight.
pub(crate) fn thermal_support(nbar: f64) -> usize {
    if nbar <= 0.0 {
        return 1;
    }
    let x = nbar / (nbar + 1.0);
    let k = (TAIL_CUTOFF.ln() / x.ln()).ceil();
    if k.is_finite() {
        (k as usize).clamp(1, MAX_PAD_COLUMNS)
    } else {
        MAX_PAD_COLUMNS
    }
}

/// `A diag(p) A^H` for a `dim x cols` block `A`.
fn conjugate_diagonal(a: &DMatrix<C64>, p: &[f64]) -> DMatrix<C64> {
    let mut scaled = a.clone();
    for (j, &pj) in p.iter().enumerate() {
        scaled.column_mut(j).scale_mut(pj);
    }
    let mut m = scaled * a.adjoint();
    let adj = m.adjoint();
    m += adj;
    m *= C64::new(0.5, 0.0);
    m
}

/// Unnormalized base operator restricted to `n < dim`.
pub(crate) fn base_block(base: &BaseState, dim: usize) -> Result<DMatrix<C64>> {
    let nbar = base.nbar();
    match *base {
        BaseState::SqueezedThermal { r, .. } if r != 0.0 => {
            let cols = dim.max(thermal_support(nbar));
            let s = squeeze_block(r, dim, cols)?;
            Ok(conjugate_diagonal(&s, &thermal_populations(nbar, cols)))
        }
        _ => {
            let p = thermal_populations(nbar, dim);
            let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
            for (i, &pi) in p.iter().enumerate() {
                m[(i, i)] = C64::new(pi, 0.0);
            }
            Ok(m)
        }
    }
}

/// Normalized puncture operator (`|alpha><alpha|` or `D(alpha) rho_T(b) D^H`)
/// restricted to `n < dim`.
pub(crate) fn puncture_block(p: &Puncture, dim: usize) -> DMatrix<C64> {
    match p.shape {
        Shape::Delta => {
            let v = coherent_vector(p.center, dim - 1);
            let a = v.as_dvector();
            a * a.adjoint()
        }
        Shape::Gaussian { b } => {
            let cols = dim.max(thermal_support(b));
            let d = displacement_block(p.center, dim, cols);
            conjugate_diagonal(&d, &thermal_populations(b, cols))
        }
    }
}

/// `M_base - sum_i w_i M_i` without the normalization factor.
pub fn build_unnormalized(spec: &PuncturedStateSpec, n_max: usize) -> Result<FockOperator> {
    spec.validate()?;
    let dim = n_max + 1;
    let mut m = base_block(&spec.base, dim)?;
    for p in &spec.punctures {
        if p.weight != 0.0 {
            m -= puncture_block(p, dim) * C64::new(p.weight, 0.0);
        }
    }
    FockOperator::hermitian(m)
}

/// Density operator without the trace-deficit check.
pub(crate) fn build_density_unchecked(
    spec: &PuncturedStateSpec,
    n_max: usize,
) -> Result<FockOperator> {
    let n = normalization(spec)?;
    Ok(build_unnormalized(spec, n_max)?.scaled(n))
}

/// `rho = N (M_base - sum_i w_i M_i)` on `{|0>, ..., |n_max>}`, rejecting
/// truncations that lose more than [`TRACE_DEFICIT_TOL`] of the trace.
pub fn build_density(spec: &PuncturedStateSpec, n_max: usize) -> Result<FockOperator> {
    build_density_with_tolerance(spec, n_max, TRACE_DEFICIT_TOL)
}

pub fn build_density_with_tolerance(
    spec: &PuncturedStateSpec,
    n_max: usize,
    trace_tol: f64,
) -> Result<FockOperator> {
    let rho = build_density_unchecked(spec, n_max)?;
    let deficit = (1.0 - rho.trace()).abs();
    if deficit > trace_tol {
        return Err(Error::TraceDeficit {
            deficit,
            tolerance: trace_tol,
            suggested: suggest_n_max(spec, n_max, trace_tol),
        });
    }
    Ok(rho)
}

fn suggest_n_max(spec: &PuncturedStateSpec, from: usize, trace_tol: f64) -> usize {
    let mut n = from.max(1);
    for _ in 0..6 {
        n *= 2;
        match build_density_unchecked(spec, n) {
            Ok(rho) if (1.0 - rho.trace()).abs() <= trace_tol => return n,
            Ok(_) => {}
            Err(_) => break,
        }
    }
    n
}

/// A smooth Gaussian piece of the P function,
/// `coef * exp(-x^2/wr - y^2/wi) / (pi sqrt(wr wi))` around `center`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussianComponent {
    pub center: C64,
    pub wr: f64,
    pub wi: f64,
    pub coef: f64,
}

impl GaussianComponent {
    pub fn value(&self, alpha: C64) -> f64 {
        let d = alpha - self.center;
        self.coef * (-(d.re * d.re) / self.wr - (d.im * d.im) / self.wi).exp()
            / (PI * (self.wr * self.wi).sqrt())
    }
}

/// Smooth Gaussian components (with normalization folded into `coef`) and
/// the signed delta components of the spec's P function.
pub(crate) fn p_components(
    spec: &PuncturedStateSpec,
) -> Result<(Vec<GaussianComponent>, Vec<(C64, f64)>)> {
    let n = normalization(spec)?;
    let mut smooth = Vec::new();
    let mut deltas = Vec::new();
    let nbar = spec.base.nbar();
    if nbar == 0.0 {
        deltas.push((C64::new(0.0, 0.0), n));
    } else {
        let w = spec.base.widths()?;
        smooth.push(GaussianComponent {
            center: C64::new(0.0, 0.0),
            wr: w.nbar_r,
            wi: w.nbar_i,
            coef: n,
        });
    }
    for p in &spec.punctures {
        match p.shape {
            Shape::Delta => deltas.push((p.center, -n * p.weight)),
            Shape::Gaussian { b } => smooth.push(GaussianComponent {
                center: p.center,
                wr: b,
                wi: b,
                coef: -n * p.weight,
            }),
        }
    }
    Ok((smooth, deltas))
}

fn quadrature_component(c: &GaussianComponent, dim: usize, refine: usize) -> DMatrix<C64> {
    let n_max = dim - 1;
    let (sr, si) = (c.wr.sqrt(), c.wi.sqrt());
    let wide = sr.max(si);
    let s_max = 9.0;
    // radial panels no wider than ~0.5 in |alpha|
    let panel = (0.5 / wide).min(1.0) / refine as f64;
    let radial = Rule::composite(&[0.0, s_max], panel, 16);
    // angular bandwidth of |alpha|^2 and of the polynomial factors
    let reach = (s_max * wide).min(c.center.norm() + (2.0 * dim as f64).sqrt() + 8.0);
    let band = 4.0 * (n_max + 2) as f64 + 4.0 * reach * (c.center.norm() + reach);
    let m = ((band as usize + 32) * refine).next_multiple_of(4);
    let dphi = 2.0 * PI / m as f64;
    let trig: Vec<(f64, f64)> = (0..m).map(|k| (k as f64 * dphi).sin_cos()).collect();

    let parts: Vec<DMatrix<C64>> = radial
        .nodes
        .par_iter()
        .zip(radial.weights.par_iter())
        .map(|(&s, &ws)| {
            let mut acc = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
            // P dA = e^{-s^2} s ds dphi / pi in elliptic polar coordinates
            let radial_weight = ws * (-s * s).exp() * s / PI * dphi;
            if radial_weight == 0.0 {
                return acc;
            }
            for &(sin, cos) in &trig {
                let alpha = c.center + C64::new(sr * s * cos, si * s * sin);
                let v = coherent_vector(alpha, n_max);
                let a = v.amplitudes();
                for j in 0..dim {
                    let aj = a[j].conj() * radial_weight;
                    for i in 0..=j {
                        acc[(i, j)] += a[i] * aj;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for p in parts {
        total += p;
    }
    for j in 0..dim {
        for i in 0..j {
            total[(j, i)] = total[(i, j)].conj();
        }
    }
    total * C64::new(c.coef, 0.0)
}

fn quadrature_density(spec: &PuncturedStateSpec, n_max: usize, refine: usize) -> Result<DMatrix<C64>> {
    let dim = n_max + 1;
    let (smooth, deltas) = p_components(spec)?;
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for c in &smooth {
        m += quadrature_component(c, dim, refine);
    }
    for (center, coef) in deltas {
        let v = coherent_vector(center, n_max);
        let a = v.as_dvector();
        m += a * a.adjoint() * C64::new(coef, 0.0);
    }
    Ok(m)
}

/// Independent route to the density matrix: integrates
/// `rho = ∫ P(alpha) |alpha><alpha| d^2 alpha` on elliptic polar grids around
/// every Gaussian component (Gauss-Legendre in the radius, trapezoid in the
/// angle) and adds delta projectors exactly. The grid is refined until two
/// successive resolutions agree within `tol` on every entry.
pub fn density_from_p_quadrature_with(
    spec: &PuncturedStateSpec,
    n_max: usize,
    tol: f64,
) -> Result<FockOperator> {
    spec.validate()?;
    let mut prev = quadrature_density(spec, n_max, 1)?;
    let mut residual = f64::INFINITY;
    for refine in [2, 4] {
        let next = quadrature_density(spec, n_max, refine)?;
        residual = (&next - &prev).iter().map(|x| x.norm()).fold(0.0, f64::max);
        if residual <= tol {
            return FockOperator::hermitian(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        residual,
        tolerance: tol,
    })
}

/// [`density_from_p_quadrature_with`] at tolerance `1e-10`.
pub fn density_from_p_quadrature(spec: &PuncturedStateSpec, n_max: usize) -> Result<FockOperator> {
    density_from_p_quadrature_with(spec, n_max, 1e-10)
}
