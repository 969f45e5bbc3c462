//! Vacuum removal by a cascade of QND photon-number measurements.
//!
//! Stage `l` (with `q = 2^(l-1)`) imprints the phase `pi (n mod 2q) / q` on
//! an atom prepared in `|+>`; the atom is then found in `|+>` with
//! probability `cos^2(phi / 2)`. The first `-` outcome tags the shot as
//! accepted. Shots that return `+` at every stage up to `l_max` are
//! discarded, which removes every Fock index divisible by `2^l_max`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{diagonal_fidelity, eigendecompose, FockOperator, FockVector, HERMITICITY_TOL};
use crate::statemodel::thermal_populations;

/// Generator behind [`simulate_qnd`], recorded in every result.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), stream = shard index";

/// Shots per RNG stream.
pub const SHARD_SHOTS: u64 = 1 << 16;

/// Anomalies kept verbatim in a result; later ones are only counted.
const ANOMALY_LOG_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QndConfig {
    pub nbar: f64,
    pub l_max: u32,
    pub n_max: usize,
    #[serde(default)]
    pub shots: u64,
    pub seed: u64,
}

impl QndConfig {
    pub fn validate(&self) -> Result<()> {
        check_nbar(self.nbar)?;
        if self.l_max == 0 || self.l_max > 62 {
            return Err(Error::InvalidParameter(format!("l_max must lie in 1..=62, got {}", self.l_max)));
        }
        let m = 1u64 << self.l_max;
        if m > self.n_max as u64 {
            return Err(Error::Resolution(m, self.n_max));
        }
        Ok(())
    }
}

fn check_nbar(nbar: f64) -> Result<()> {
    if nbar > 0.0 && nbar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("nbar must be finite and > 0, got {nbar}")))
    }
}

/// A cascade stage where the imprinted phase is neither 0 nor pi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub n: u64,
    pub stage: u32,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QndResult {
    pub config: QndConfig,
    pub rng: &'static str,
    /// Renormalized cascade output on `{|0>, ..., |n_max>}`.
    pub realized: FockOperator,
    /// Vacuum-removed thermal state on the same basis.
    pub desired: FockOperator,
    pub fidelity_closed: f64,
    pub fidelity_direct: f64,
    pub acceptance_probability: f64,
    /// `None` when no shots were run.
    pub empirical_acceptance: Option<f64>,
    /// Accepted shots per photon number up to `n_max`.
    pub histogram: Vec<u64>,
    /// Accepted shots with `n > n_max`.
    pub overflow: u64,
    pub accepted: u64,
    pub anomaly_count: u64,
    pub anomalies: Vec<Anomaly>,
}

/// Serializable summary of a [`QndResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QndReport {
    pub config: QndConfig,
    pub rng: String,
    pub fidelity_closed: f64,
    pub fidelity_direct: f64,
    pub acceptance_exact: f64,
    pub acceptance_empirical: Option<f64>,
    pub histogram: Vec<u64>,
    pub overflow: u64,
    pub accepted: u64,
    pub anomaly_count: u64,
    pub anomalies: Vec<Anomaly>,
    pub realized_diagonal: Vec<f64>,
}

impl QndResult {
    pub fn report(&self) -> QndReport {
        QndReport {
            config: self.config,
            rng: self.rng.to_string(),
            fidelity_closed: self.fidelity_closed,
            fidelity_direct: self.fidelity_direct,
            acceptance_exact: self.acceptance_probability,
            acceptance_empirical: self.empirical_acceptance,
            histogram: self.histogram.clone(),
            overflow: self.overflow,
            accepted: self.accepted,
            anomaly_count: self.anomaly_count,
            anomalies: self.anomalies.clone(),
            realized_diagonal: self.realized.diagonal(),
        }
    }
}

/// `((nbar + 1) / nbar) [rho_T - |0><0| / (nbar + 1)]` on `n_max + 1` levels.
pub fn vacuum_removed_state(nbar: f64, n_max: usize) -> Result<FockOperator> {
    check_nbar(nbar)?;
    let norm = (nbar + 1.0) / nbar;
    let mut p = thermal_populations(nbar, n_max + 1);
    p[0] = 0.0;
    p.iter_mut().skip(1).for_each(|x| *x *= norm);
    Ok(FockOperator::from_diagonal(&p))
}

/// `1 - sum_k p_T(k M)` with `M = 2^l_max`.
pub fn acceptance_probability(nbar: f64, l_max: u32) -> Result<f64> {
    check_nbar(nbar)?;
    let m = 2f64.powi(l_max as i32);
    // 1 - x^M with x = nbar / (nbar + 1)
    let one_minus_xm = -(m * (-(1.0 + nbar).ln() + nbar.ln())).exp_m1();
    Ok(1.0 - 1.0 / ((nbar + 1.0) * one_minus_xm))
}

/// Thermal state with every Fock index divisible by `2^l_max` removed,
/// renormalized by the exact acceptance probability.
pub fn realized_state(nbar: f64, l_max: u32, n_max: usize) -> Result<FockOperator> {
    QndConfig {
        nbar,
        l_max,
        n_max,
        shots: 0,
        seed: 0,
    }
    .validate()?;
    let m = 1usize << l_max;
    let norm = 1.0 / acceptance_probability(nbar, l_max)?;
    let p: Vec<f64> = thermal_populations(nbar, n_max + 1)
        .into_iter()
        .enumerate()
        .map(|(n, x)| if n % m == 0 { 0.0 } else { norm * x })
        .collect();
    Ok(FockOperator::from_diagonal(&p))
}

/// `F = 1 - (1 / nbar) / (((nbar + 1) / nbar)^(2^l_max) - 1)`
pub fn fidelity_closed_form(nbar: f64, l_max: u32) -> f64 {
    1.0 - fidelity_deficit(nbar, l_max)
}

/// `1 - F` without the cancellation of [`fidelity_closed_form`].
pub fn fidelity_deficit(nbar: f64, l_max: u32) -> f64 {
    let m = 2f64.powi(l_max as i32);
    1.0 / (nbar * (m * (1.0 / nbar).ln_1p()).exp_m1())
}

/// Leading large-`l_max` behaviour of `1 - F`,
/// `exp(-log((nbar + 1) / nbar) 2^l_max) / nbar`.
pub fn fidelity_deficit_asymptote(nbar: f64, l_max: u32) -> f64 {
    let m = 2f64.powi(l_max as i32);
    (-m * (1.0 / nbar).ln_1p()).exp() / nbar
}

/// Truncation at which the thermal tail beyond `n` is below `1e-17`.
fn negligible_tail(nbar: f64) -> usize {
    let x = nbar / (nbar + 1.0);
    ((1e-17f64).ln() / x.ln()).ceil() as usize + 1
}

/// [`diagonal_fidelity`] of the desired and realized states on a basis
/// large enough that the dropped tail is negligible.
pub fn fidelity_direct(nbar: f64, l_max: u32) -> Result<f64> {
    let n = negligible_tail(nbar).max(1usize << l_max);
    diagonal_fidelity(&vacuum_removed_state(nbar, n)?, &realized_state(nbar, l_max, n)?)
}

/// Phase imprinted at stage `l` on photon number `n`, as the exact
/// fraction `(n mod 2q) / q` of pi.
fn stage_phase(n: u64, stage: u32) -> (u64, u64) {
    let q = 1u64 << (stage - 1);
    (n % (2 * q), q)
}

/// Probability of the `+` outcome at stage `l`, exact on the nominal
/// branches `phi = 0` and `phi = pi`.
pub fn plus_probability(n: u64, stage: u32) -> f64 {
    let (r, q) = stage_phase(n, stage);
    if r == 0 {
        1.0
    } else if r == q {
        0.0
    } else {
        let half = 0.5 * PI * r as f64 / q as f64;
        half.cos().powi(2)
    }
}

/// Exact acceptance probability of photon number `n` under the Born-rule
/// cascade, and whether every stage reached with nonzero probability had
/// `phi` in `{0, pi}`.
pub fn cascade_acceptance(n: u64, l_max: u32) -> (f64, bool) {
    let mut reach = 1.0;
    let mut accept = 0.0;
    let mut nominal = true;
    for stage in 1..=l_max {
        if reach == 0.0 {
            break;
        }
        let (r, q) = stage_phase(n, stage);
        nominal &= r == 0 || r == q;
        let plus = plus_probability(n, stage);
        accept += reach * (1.0 - plus);
        reach *= plus;
    }
    (accept, nominal)
}

/// Geometric sample by inversion, `n = floor(ln U / ln x)` with
/// `U` uniform on `(0, 1]`.
fn sample_thermal(rng: &mut ChaCha8Rng, log_x: f64) -> u64 {
    let u = 1.0 - rng.random::<f64>();
    let n = (u.ln() / log_x).floor();
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

#[derive(Default)]
struct Tally {
    histogram: Vec<u64>,
    overflow: u64,
    accepted: u64,
    anomaly_count: u64,
    anomalies: Vec<Anomaly>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.accepted += other.accepted;
        self.anomaly_count += other.anomaly_count;
        let room = ANOMALY_LOG_CAP.saturating_sub(self.anomalies.len());
        self.anomalies.extend(other.anomalies.into_iter().take(room));
        self
    }
}

fn run_shard(config: &QndConfig, shard: u64, shots: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(shard);
    let log_x = (config.nbar / (config.nbar + 1.0)).ln();
    let mut t = Tally {
        histogram: vec![0; config.n_max + 1],
        ..Default::default()
    };
    for _ in 0..shots {
        let n = sample_thermal(&mut rng, log_x);
        for stage in 1..=config.l_max {
            let (r, q) = stage_phase(n, stage);
            if r != 0 && r != q {
                t.anomaly_count += 1;
                if t.anomalies.len() < ANOMALY_LOG_CAP {
                    t.anomalies.push(Anomaly {
                        n,
                        stage,
                        phi: PI * r as f64 / q as f64,
                    });
                }
            }
            let plus = rng.random::<f64>() < plus_probability(n, stage);
            if !plus {
                t.accepted += 1;
                match t.histogram.get_mut(n as usize) {
                    Some(c) if n <= config.n_max as u64 => *c += 1,
                    _ => t.overflow += 1,
                }
                break;
            }
        }
    }
    t
}

/// Exact cascade output plus, for `shots > 0`, a Monte Carlo run. Shots
/// are split into shards of [`SHARD_SHOTS`]; shard `s` draws from ChaCha8
/// seeded with `seed` on stream `s`, so the result does not depend on the
/// number of threads.
pub fn simulate_qnd(config: &QndConfig) -> Result<QndResult> {
    config.validate()?;
    let (nbar, l_max, n_max) = (config.nbar, config.l_max, config.n_max);
    let shards = config.shots.div_ceil(SHARD_SHOTS);
    let tally = (0..shards)
        .into_par_iter()
        .map(|s| {
            let shots = SHARD_SHOTS.min(config.shots - s * SHARD_SHOTS);
            run_shard(config, s, shots)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            Tally {
                histogram: vec![0; n_max + 1],
                ..Default::default()
            },
            Tally::merge,
        );
    Ok(QndResult {
        config: *config,
        rng: RNG_ALGORITHM,
        realized: realized_state(nbar, l_max, n_max)?,
        desired: vacuum_removed_state(nbar, n_max)?,
        fidelity_closed: fidelity_closed_form(nbar, l_max),
        fidelity_direct: fidelity_direct(nbar, l_max)?,
        acceptance_probability: acceptance_probability(nbar, l_max)?,
        empirical_acceptance: (config.shots > 0).then(|| tally.accepted as f64 / config.shots as f64),
        histogram: tally.histogram,
        overflow: tally.overflow,
        accepted: tally.accepted,
        anomaly_count: tally.anomaly_count,
        anomalies: tally.anomalies,
    })
}

/// Keeps the non-vacuum outcome of the measurement
/// `A = a_0 |0><0| + a_1 sum_{n >= 1} |n><n|`: zeroes row and column 0 and
/// divides by `1 - rho_00`. Requires vanishing vacuum coherences.
pub fn vacuum_or_not_postselect(rho: &FockOperator) -> Result<FockOperator> {
    let dim = rho.dim();
    let scale = rho.max_abs();
    let coherence = (1..dim).map(|n| rho.get(0, n).norm().max(rho.get(n, 0).norm())).fold(0.0, f64::max);
    if coherence > 1e-10 * scale {
        return Err(Error::VacuumCoherence(coherence));
    }
    let keep = 1.0 - rho.get(0, 0).re;
    if keep <= 1e-15 {
        return Err(Error::NothingSurvives);
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i == 0 || j == 0 {
            C64::new(0.0, 0.0)
        } else {
            rho.get(i, j) / keep
        }
    });
    if rho.is_hermitian() {
        FockOperator::hermitian(m)
    } else {
        Ok(FockOperator::general(m))
    }
}

/// Pure-state ensemble for synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `(p_i, |psi_i>)` with the `p_i` summing to 1, largest first.
    pub components: Vec<(f64, FockVector)>,
    /// Fidelity of the renormalized ensemble with the input. The two
    /// commute, so this is the retained eigenvalue mass.
    pub reconstruction_fidelity: f64,
}

/// Eigen-ensemble of `rho` keeping eigenvalues `>= weight_floor`.
pub fn decompose_for_synthesis(rho: &FockOperator, weight_floor: f64) -> Result<Decomposition> {
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
    let pairs = eigendecompose(rho)?;
    let lam_min = pairs.last().map(|p| p.0).unwrap_or(0.0);
    if lam_min < -1e-10 {
        return Err(Error::Indefinite(lam_min));
    }
    let kept: Vec<(f64, FockVector)> = pairs.into_iter().filter(|(l, _)| *l >= weight_floor && *l > 0.0).collect();
    let mass: f64 = kept.iter().map(|p| p.0).sum();
    if mass <= 0.0 {
        return Err(Error::InvalidParameter(format!("no eigenvalue above the floor {weight_floor:e}")));
    }
    Ok(Decomposition {
        components: kept.into_iter().map(|(l, v)| (l / mass, v)).collect(),
        reconstruction_fidelity: mass / trace,
    })
}
