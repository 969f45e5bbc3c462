//! P and Wigner functions of punctured states.
//!
//! Every smooth component is an axis-aligned Gaussian, so both
//! quasi-probabilities have closed forms. Delta punctures are never
//! rasterized; they travel as `(center, signed weight)` pairs.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::Rule;
use crate::statemodel::{normalization, p_components, PuncturedStateSpec, Shape};

/// Smooth value plus the delta components of the P function.
#[derive(Debug, Clone, PartialEq)]
pub struct PValue {
    pub smooth: f64,
    /// `(center, signed weight)`, normalization included.
    pub deltas: Vec<(C64, f64)>,
}

/// `N (P_base(alpha) - sum_gauss w_i pi_i(alpha - alpha_i))` and the delta list.
pub fn eval_p(spec: &PuncturedStateSpec, alpha: C64) -> Result<PValue> {
    spec.validate()?;
    let (smooth, deltas) = p_components(spec)?;
    Ok(PValue {
        smooth: smooth.iter().map(|c| c.value(alpha)).sum(),
        deltas,
    })
}

fn gaussian_w(center: C64, wr: f64, wi: f64, alpha: C64) -> f64 {
    // Wigner function of a P-Gaussian with widths (wr, wi)
    let (a, b) = (1.0 + 2.0 * wr, 1.0 + 2.0 * wi);
    let d = alpha - center;
    2.0 / PI * (-2.0 * (d.re * d.re / a + d.im * d.im / b)).exp() / (a * b).sqrt()
}

/// Closed-form Wigner function: every component becomes a Gaussian with
/// widths `1 + 2 b` (delta punctures have `b = 0`).
pub fn eval_w(spec: &PuncturedStateSpec, alpha: C64) -> Result<f64> {
    spec.validate()?;
    let n = normalization(spec)?;
    let w = if spec.base.nbar() == 0.0 {
        (0.0, 0.0)
    } else {
        let w = spec.base.widths()?;
        (w.nbar_r, w.nbar_i)
    };
    let mut total = gaussian_w(C64::new(0.0, 0.0), w.0, w.1, alpha);
    for p in &spec.punctures {
        let b = p.shape.b();
        total -= p.weight * gaussian_w(p.center, b, b, alpha);
    }
    Ok(n * total)
}

/// `chi(beta) = exp(-nbar_I beta_R^2 - nbar_R beta_I^2)`, the normally
/// ordered characteristic function of the squeezed thermal state.
pub fn eval_characteristic_squeezed(nbar: f64, r: f64, beta: C64) -> Result<f64> {
    let w = crate::statemodel::squeezed_widths(nbar, r)?;
    Ok((-w.nbar_i * beta.re * beta.re - w.nbar_r * beta.im * beta.im).exp())
}

struct OnePuncture {
    wr: f64,
    wi: f64,
    b: f64,
    center: C64,
}

fn one_puncture(spec: &PuncturedStateSpec) -> Result<OnePuncture> {
    // the axis-aligned minimisation separates, so any base and shape works
    if spec.punctures.len() != 1 {
        return Err(Error::Unsupported(format!(
            "closed-form thresholds need exactly one puncture, got {}",
            spec.punctures.len()
        )));
    }
    let w = spec.base.widths()?;
    let p = spec.punctures[0];
    Ok(OnePuncture {
        wr: w.nbar_r,
        wi: w.nbar_i,
        b: p.shape.b(),
        center: p.center,
    })
}

/// `exp(-(a_R^2 / (R - b) + a_I^2 / (I - b)))`, requiring `b < min(R, I)`.
fn threshold_exponential(p: &OnePuncture) -> Result<f64> {
    if !(p.b < p.wr.min(p.wi)) {
        return Err(Error::InvalidParameter(format!(
            "puncture width b = {} must be below the base width {}",
            p.b,
            p.wr.min(p.wi)
        )));
    }
    Ok((-(p.center.re * p.center.re / (p.wr - p.b) + p.center.im * p.center.im / (p.wi - p.b))).exp())
}

/// Infimum weight above which the smooth P function takes negative values:
/// 0 for delta punctures, `(b / nbar) e^{-|alpha_1|^2 / (nbar - b)}` for a
/// Gaussian puncture.
pub fn p_negativity_threshold(spec: &PuncturedStateSpec) -> Result<f64> {
    let p = one_puncture(spec)?;
    if matches!(spec.punctures[0].shape, Shape::Delta) {
        return Ok(0.0);
    }
    Ok(p.b / (p.wr * p.wi).sqrt() * threshold_exponential(&p)?)
}

/// Infimum weight above which the Wigner function takes negative values,
/// `(1 + 2b) / sqrt((1 + 2R)(1 + 2I)) exp(-(a_R^2/(R - b) + a_I^2/(I - b)))`.
pub fn wigner_negativity_threshold(spec: &PuncturedStateSpec) -> Result<f64> {
    let p = one_puncture(spec)?;
    let scale = (1.0 + 2.0 * p.b) / ((1.0 + 2.0 * p.wr) * (1.0 + 2.0 * p.wi)).sqrt();
    Ok(scale * threshold_exponential(&p)?)
}

/// Point where the Wigner ratio base/puncture is smallest, i.e. where the
/// Wigner function first turns negative as the weight grows.
pub fn wigner_critical_point(spec: &PuncturedStateSpec) -> Result<C64> {
    let p = one_puncture(spec)?;
    threshold_exponential(&p)?;
    Ok(C64::new(
        p.center.re * (1.0 + 2.0 * p.wr) / (2.0 * (p.wr - p.b)),
        p.center.im * (1.0 + 2.0 * p.wi) / (2.0 * (p.wi - p.b)),
    ))
}

/// Rectangular region of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn square(half_width: f64) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|x| x.is_finite())
            && self.re_min < self.re_max
            && self.im_min < self.im_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("degenerate region {self:?}")))
        }
    }

    /// Sample point `(i, j)` of an `n_re x n_im` grid including the edges.
    pub fn point(&self, i: usize, j: usize, n_re: usize, n_im: usize) -> C64 {
        let t = |k: usize, n: usize| if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
        C64::new(
            self.re_min + (self.re_max - self.re_min) * t(i, n_re),
            self.im_min + (self.im_max - self.im_min) * t(j, n_im),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    P,
    W,
}

/// Sampled P or W. `values` is row-major with the imaginary axis as the row
/// index: `values[j * n_re + i]` sits at `region.point(i, j, ..)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub quantity: Quantity,
    pub region: Region,
    pub resolution: (usize, usize),
    pub values: Vec<f64>,
    pub delta_components: Vec<(C64, f64)>,
}

impl PhaseSpaceGrid {
    pub fn point(&self, idx: usize) -> C64 {
        let (n_re, n_im) = self.resolution;
        self.region.point(idx % n_re, idx / n_re, n_re, n_im)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sample_grid(
    spec: &PuncturedStateSpec,
    region: Region,
    resolution: (usize, usize),
    quantity: Quantity,
) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    region.validate()?;
    let (n_re, n_im) = resolution;
    if n_re < 2 || n_im < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
    }
    let (smooth, deltas) = p_components(spec)?;
    let values: Vec<f64> = (0..n_re * n_im)
        .into_par_iter()
        .map(|k| {
            let z = region.point(k % n_re, k / n_re, n_re, n_im);
            match quantity {
                Quantity::P => Ok(smooth.iter().map(|c| c.value(z)).sum()),
                Quantity::W => eval_w(spec, z),
            }
        })
        .collect::<Result<_>>()?;
    Ok(PhaseSpaceGrid {
        quantity,
        region,
        resolution,
        values,
        delta_components: match quantity {
            Quantity::P => deltas,
            Quantity::W => Vec::new(),
        },
    })
}

/// Smooth part of P on a grid; delta components are carried separately.
pub fn p_grid(spec: &PuncturedStateSpec, region: Region, resolution: (usize, usize)) -> Result<PhaseSpaceGrid> {
    sample_grid(spec, region, resolution, Quantity::P)
}

pub fn w_grid(spec: &PuncturedStateSpec, region: Region, resolution: (usize, usize)) -> Result<PhaseSpaceGrid> {
    sample_grid(spec, region, resolution, Quantity::W)
}

/// Puncture centres lying outside `region`.
pub fn centers_outside(spec: &PuncturedStateSpec, region: &Region) -> Vec<C64> {
    spec.punctures
        .iter()
        .map(|p| p.center)
        .filter(|c| !region.contains(*c))
        .collect()
}

/// Nelder-Mead on a function of two variables.
fn nelder_mead(f: impl Fn(f64, f64) -> f64, start: (f64, f64), step: f64, ftol: f64) -> ((f64, f64), f64) {
    let mut pts = [start, (start.0 + step, start.1), (start.0, start.1 + step)];
    let mut vals = pts.map(|p| f(p.0, p.1));
    for _ in 0..2000 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        if (vals[2] - vals[0]).abs() <= ftol * (vals[0].abs() + vals[2].abs()).max(1e-300)
            || (vals[2] - vals[0]).abs() <= 1e-300
        {
            break;
        }
        let c = ((pts[0].0 + pts[1].0) / 2.0, (pts[0].1 + pts[1].1) / 2.0);
        let along = |t: f64| (c.0 + t * (pts[2].0 - c.0), c.1 + t * (pts[2].1 - c.1));
        let r = along(-1.0);
        let fr = f(r.0, r.1);
        if fr < vals[0] {
            let e = along(-2.0);
            let fe = f(e.0, e.1);
            (pts[2], vals[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (r, fr);
        } else {
            let k = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fk = f(k.0, k.1);
            if fk < vals[2].min(fr) {
                (pts[2], vals[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    pts[i] = ((pts[i].0 + pts[0].0) / 2.0, (pts[i].1 + pts[0].1) / 2.0);
                    vals[i] = f(pts[i].0, pts[i].1);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best], vals[best])
}

/// Minimum of the Wigner function over `region`: grid search, then
/// Nelder-Mead from the best grid point, the puncture centres and the
/// critical point.
pub fn min_wigner(spec: &PuncturedStateSpec, region: Region, resolution: (usize, usize)) -> Result<(f64, C64)> {
    spec.validate()?;
    region.validate()?;
    let base_width = if spec.base.nbar() > 0.0 {
        let w = spec.base.widths()?;
        (0.25 * (1.0 + 2.0 * w.nbar_r.max(w.nbar_i))).sqrt()
    } else {
        0.5
    };
    let reach = 3.0 * base_width;
    let need = Region::square(reach);
    if !(region.contains(C64::new(need.re_min, need.im_min)) && region.contains(C64::new(need.re_max, need.im_max))) {
        return Err(Error::RegionTooSmall(format!(
            "region must cover three Wigner widths of the base, |re|, |im| <= {reach}"
        )));
    }
    let outside = centers_outside(spec, &region);
    if !outside.is_empty() {
        return Err(Error::RegionTooSmall(format!("puncture centres outside region: {outside:?}")));
    }
    let grid = w_grid(spec, region, resolution)?;
    let (k, &gmin) = grid
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let start = grid.point(k);
    let f = |x: f64, y: f64| {
        let z = C64::new(x, y);
        if region.contains(z) {
            eval_w(spec, z).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        }
    };
    let step = ((region.re_max - region.re_min) / resolution.0 as f64).max(1e-3);
    // dips narrower than the grid sit next to a puncture centre or at the
    // critical point, so start there too
    let mut starts = vec![start];
    starts.extend(spec.punctures.iter().map(|p| p.center));
    starts.extend(wigner_critical_point(spec).ok().filter(|z| region.contains(*z)));
    let mut best = (gmin, start);
    for s in starts {
        let ((x, y), v) = nelder_mead(f, (s.re, s.im), step, 1e-10);
        let at = eval_w(spec, s)?;
        if at < best.0 {
            best = (at, s);
        }
        if v < best.0 {
            best = (v, C64::new(x, y));
        }
    }
    Ok(best)
}

fn gaussian_kernel_integral(center: f64, width: f64, at: f64) -> f64 {
    // ∫ e^{-(x - center)^2 / width} / sqrt(pi width) * e^{-2 (x - at)^2} dx
    let lo = center - 9.0 * width.sqrt();
    let hi = center + 9.0 * width.sqrt();
    let mut bp = vec![lo, hi];
    for k in -8..=8 {
        let x = center + k as f64 * width.sqrt();
        if x > lo && x < hi {
            bp.push(x);
        }
    }
    for k in -6..=6 {
        let x = at + 0.75 * k as f64;
        if x > lo && x < hi {
            bp.push(x);
        }
    }
    let panel = width.sqrt().min(0.5);
    let rule = Rule::composite(&bp, panel, 20);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            w * (-(x - center) * (x - center) / width - 2.0 * (x - at) * (x - at)).exp() / (PI * width).sqrt()
        })
        .sum()
}

/// `∫ P d^2 alpha` (smooth part by quadrature plus delta weights) or
/// `∫ W d^2 alpha`, both 1 for a valid spec. The rule is a tensor product of
/// composite Gauss-Legendre rules with breakpoints every standard deviation
/// around each component, evaluated on [`eval_p`] / [`eval_w`].
pub fn integrate_quasiprobability(spec: &PuncturedStateSpec, quantity: Quantity) -> Result<f64> {
    spec.validate()?;
    let (smooth, deltas) = p_components(spec)?;
    let spread = match quantity {
        Quantity::P => 0.0,
        Quantity::W => 0.25,
    };
    let mut pieces: Vec<(C64, f64, f64)> = smooth
        .iter()
        .map(|c| (c.center, c.wr / 2.0 + spread, c.wi / 2.0 + spread))
        .collect();
    if quantity == Quantity::W {
        pieces.extend(deltas.iter().map(|&(c, _)| (c, spread, spread)));
    }
    let axis = |coord: fn(&C64) -> f64, var: fn(&(C64, f64, f64)) -> f64| {
        let mut bp = Vec::new();
        for p in &pieces {
            let s = var(p).sqrt();
            bp.extend((-9..=9).map(|k| coord(&p.0) + k as f64 * s));
        }
        Rule::composite(&bp, 1.0, 12)
    };
    let xs = axis(|z| z.re, |p| p.1);
    let ys = axis(|z| z.im, |p| p.2);
    let mut total = 0.0;
    for (y, wy) in ys.nodes.iter().zip(&ys.weights) {
        for (x, wx) in xs.nodes.iter().zip(&xs.weights) {
            let z = C64::new(*x, *y);
            let v = match quantity {
                Quantity::P => smooth.iter().map(|c| c.value(z)).sum(),
                Quantity::W => eval_w(spec, z)?,
            };
            total += wx * wy * v;
        }
    }
    if quantity == Quantity::P {
        total += deltas.iter().map(|d| d.1).sum::<f64>();
    }
    Ok(total)
}

/// Wigner function from `W = (2/pi) ∫ P(beta) e^{-2|alpha - beta|^2} d^2 beta`
/// by tensor Gauss-Legendre quadrature over each smooth component, with
/// delta components added analytically. Independent of [`eval_w`].
pub fn wigner_by_convolution(spec: &PuncturedStateSpec, alpha: C64) -> Result<f64> {
    spec.validate()?;
    let (smooth, deltas) = p_components(spec)?;
    let mut total = 0.0;
    for c in &smooth {
        // components are axis aligned, so the tensor rule factorizes
        let x = gaussian_kernel_integral(c.center.re, c.wr, alpha.re);
        let y = gaussian_kernel_integral(c.center.im, c.wi, alpha.im);
        total += c.coef * x * y;
    }
    for (center, coef) in deltas {
        total += coef * (-2.0 * (alpha - center).norm_sqr()).exp();
    }
    Ok(2.0 / PI * total)
}
