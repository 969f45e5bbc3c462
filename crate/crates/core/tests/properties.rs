use num_complex::Complex64 as C64;
use proptest::prelude::*;

use nalgebra::DMatrix;
use punctured::fockspace::{coherent_vector, gershgorin_margin, min_eigenvalue, FockOperator};
use punctured::phasespace::{
    eval_p, eval_w, integrate_quasiprobability, p_negativity_threshold, wigner_by_convolution,
    wigner_negativity_threshold, Quantity,
};
use punctured::photonstats::{
    g2_analytic, g2_delta_squeezed, g2_delta_thermal, g2_trace, g2_trace_converged,
    jensen_classicality_check,
};
use punctured::positivity::{
    nc_bound, nc_bound_delta_thermal, nc_bound_gaussian, numeric_wmax, numeric_wmax_at, sc_bound,
    squeezed_witness_params,
};
use punctured::statemodel::{
    build_density_with_tolerance, build_unnormalized, normalization, Puncture, PuncturedStateSpec,
    Shape, SqueezedWidths,
};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn alpha(max: f64) -> impl Strategy<Value = C64> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn widths() -> impl Strategy<Value = SqueezedWidths> {
    (0.1..2.0f64, 0.1..2.0f64).prop_map(|(r, i)| SqueezedWidths::new(r, i).unwrap())
}

/// Single delta puncture on a thermal or squeezed base, or a Gaussian
/// puncture on a thermal base, at a fraction of the closed-form bound.
fn single_puncture_spec() -> impl Strategy<Value = PuncturedStateSpec> {
    prop_oneof![
        (0.1..3.0f64, alpha(1.5), 0.0..1.0f64).prop_map(|(n, a, u)| {
            PuncturedStateSpec::thermal(n).with_puncture(Puncture::delta(a, 0.0))
        }.with_weight_fraction(u)),
        (widths(), alpha(1.2), 0.0..1.0f64).prop_map(|(w, a, u)| {
            PuncturedStateSpec::squeezed_from_widths(w).with_puncture(Puncture::delta(a, 0.0))
        }.with_weight_fraction(u)),
        (0.2..3.0f64, 0.05..1.0f64, alpha(1.2), 0.0..1.0f64).prop_map(|(n, f, a, u)| {
            PuncturedStateSpec::thermal(n).with_puncture(Puncture::gaussian(f * n, a, 0.0))
        }.with_weight_fraction(u)),
    ]
}

/// Two punctures on a thermal base, each at most half its own bound.
fn double_puncture_spec() -> impl Strategy<Value = PuncturedStateSpec> {
    (0.2..3.0f64, 0.05..0.9f64, alpha(1.2), alpha(1.2), 0.0..0.5f64, 0.0..0.5f64).prop_map(
        |(n, f, a1, a2, u1, u2)| {
            let g = Puncture::gaussian(f * n, a1, 0.0);
            let d = Puncture::delta(a2, 0.0);
            let wg = u1 * single_bound(n, g);
            let wd = u2 * single_bound(n, d);
            PuncturedStateSpec::thermal(n)
                .with_puncture(Puncture { weight: wg, ..g })
                .with_puncture(Puncture { weight: wd, ..d })
        },
    )
}

fn single_bound(nbar: f64, p: Puncture) -> f64 {
    nc_bound(&PuncturedStateSpec::thermal(nbar).with_puncture(p)).unwrap().value
}

trait WeightFraction {
    fn with_weight_fraction(self, u: f64) -> Self;
}

impl WeightFraction for PuncturedStateSpec {
    fn with_weight_fraction(self, u: f64) -> Self {
        let bound = nc_bound(&self).unwrap().value;
        self.with_weight(u * bound)
    }
}

/// `(nbar_R - nbar_I) / (2 nbar_R nbar_I)`, zero for thermal bases.
fn squeeze_parameter(spec: &PuncturedStateSpec) -> f64 {
    let w = spec.base.widths().unwrap();
    (w.nbar_r - w.nbar_i) / (2.0 * w.nbar_r * w.nbar_i)
}

/// Mean photon number of the coherent state minimising the Husimi ratio
/// (squeezed coherent state for squeezed bases).
fn witness_photons(spec: &PuncturedStateSpec) -> f64 {
    let p = spec.punctures[0];
    let a2 = p.center.norm_sqr();
    match (spec.base.widths().ok(), p.shape) {
        (Some(w), _) if w.nbar_r != w.nbar_i => {
            let (gamma, r) = squeezed_witness_params(w, p.center).unwrap();
            gamma.norm_sqr() + r.sinh().powi(2)
        }
        (_, Shape::Gaussian { b }) => {
            let n = spec.base.nbar();
            a2 * ((n + 1.0) / (n - b)).powi(2)
        }
        _ => {
            let n = spec.base.nbar();
            a2 * ((n + 1.0) / n).powi(2)
        }
    }
}

/// Parameters of the bound figures: delta thermal with nbar in [0.1, 2],
/// Gaussian with b = 1 and nbar in [1.5, 2], squeezed with widths (1, 0.5).
fn figure_range_spec() -> impl Strategy<Value = PuncturedStateSpec> {
    prop_oneof![
        (0.1..2.0f64, alpha(1.5)).prop_map(|(n, a)| PuncturedStateSpec::thermal(n).with_puncture(Puncture::delta(a, 0.0))),
        (1.5..2.0f64, alpha(1.5)).prop_map(|(n, a)| PuncturedStateSpec::thermal(n).with_puncture(Puncture::gaussian(1.0, a, 0.0))),
        alpha(1.5).prop_map(|a| PuncturedStateSpec::squeezed_from_widths(SqueezedWidths::new(1.0, 0.5).unwrap())
            .with_puncture(Puncture::delta(a, 0.0))),
    ]
}

fn valid_spec() -> impl Strategy<Value = PuncturedStateSpec> {
    prop_oneof![3 => single_puncture_spec(), 1 => double_puncture_spec()]
}

fn hermitian(dim: usize) -> impl Strategy<Value = FockOperator> {
    proptest::collection::vec(-1.0..1.0f64, 2 * dim * dim).prop_map(move |v| {
        let m = DMatrix::from_fn(dim, dim, |i, j| c(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1]));
        FockOperator::hermitian((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weyl_monotonicity(spec in single_puncture_spec(), w1 in 0.0..0.5f64, w2 in 0.0..0.5f64) {
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let a = min_eigenvalue(&build_unnormalized(&spec.with_weight(lo), 20).unwrap()).unwrap();
        let b = min_eigenvalue(&build_unnormalized(&spec.with_weight(hi), 20).unwrap()).unwrap();
        prop_assert!(b <= a + 1e-13);
    }

    #[test]
    fn gershgorin_below_spectrum(h in (2usize..12).prop_flat_map(hermitian)) {
        prop_assert!(gershgorin_margin(&h).unwrap() <= min_eigenvalue(&h).unwrap() + 1e-12);
    }

    #[test]
    fn coherent_overlap(a in alpha(2.0), g in alpha(2.0)) {
        let va = coherent_vector(a, 80);
        let vg = coherent_vector(g, 80);
        let got = vg.inner(&va).norm_sqr();
        prop_assert!((got - (-(a - g).norm_sqr()).exp()).abs() < 1e-10);
    }

    #[test]
    fn trace_grows_to_one(spec in valid_spec()) {
        let mut last = 0.0;
        for n in [5, 10, 20, 40, 80] {
            let t = build_density_with_tolerance(&spec, n, f64::INFINITY).unwrap().trace();
            prop_assert!(t >= last - 1e-14 && t <= 1.0 + 1e-12, "n {n}: {t} after {last}");
            last = t;
        }
        prop_assert!((last - 1.0).abs() < 1e-6);
    }

    #[test]
    fn build_is_linear_in_punctures(spec in double_puncture_spec()) {
        let n = 25;
        let both = build_unnormalized(&spec, n).unwrap();
        let base = build_unnormalized(&PuncturedStateSpec { punctures: vec![], ..spec.clone() }, n).unwrap();
        let mut sum = base.clone();
        for p in &spec.punctures {
            let single = build_unnormalized(&PuncturedStateSpec { punctures: vec![*p], ..spec.clone() }, n).unwrap();
            sum = sum.add_scaled(&single.add_scaled(&base, -1.0).unwrap(), 1.0).unwrap();
        }
        let diff = both.add_scaled(&sum, -1.0).unwrap().max_abs();
        prop_assert!(diff < 1e-14);
    }

    #[test]
    fn bound_ordering_delta_thermal(nbar in 0.1..2.0f64, a in alpha(1.5)) {
        let spec = PuncturedStateSpec::thermal(nbar).with_puncture(Puncture::delta(a, 0.0));
        let nc = nc_bound(&spec).unwrap().value;
        let sc = sc_bound(&spec).unwrap().value;
        let num = numeric_wmax(&spec, 1e-6).unwrap().value;
        prop_assert!(sc <= num * (1.0 + 1e-6));
        prop_assert!(num <= nc * (1.0 + 1e-6));
    }

    #[test]
    fn numeric_wmax_below_nc(spec in single_puncture_spec()) {
        // for |t| >= 1 the squeezed bound is an infimum approached only by
        // infinitely squeezed witnesses; finite truncations stay above it
        prop_assume!(squeeze_parameter(&spec).abs() < 1.0);
        // the truncation has to reach the coherent witness
        let n_max = (2.0 * witness_photons(&spec) + 30.0).ceil();
        prop_assume!(n_max <= 160.0);
        let nc = nc_bound(&spec).unwrap().value;
        let num = numeric_wmax_at(&spec, n_max as usize, 1e-6).unwrap();
        prop_assert!(num <= nc * (1.0 + 1e-6) + 1e-300, "{num} > {nc}");
    }

    #[test]
    fn numeric_wmax_nonincreasing_in_n_max(spec in single_puncture_spec()) {
        let mut last = f64::INFINITY;
        for n in [2, 4, 8, 16, 32] {
            let v = numeric_wmax_at(&spec, n, 1e-8).unwrap();
            prop_assert!(v <= last * (1.0 + 1e-7), "n {n}: {v} after {last}");
            last = v;
        }
    }

    #[test]
    fn gaussian_bound_tends_to_delta(nbar in 0.1..3.0f64, a in alpha(1.5)) {
        // first-order gap is b (1 + |a|^2 / nbar^2), at most 2.3e-8 here
        let g = nc_bound_gaussian(nbar, 1e-10, a).unwrap().value;
        let d = nc_bound_delta_thermal(nbar, a).unwrap().value;
        prop_assert!((g - d).abs() <= 1e-6 * d.max(1e-300) + 1e-300);
    }

    #[test]
    fn thermal_bounds_phase_invariant(nbar in 0.1..2.0f64, r in 0.0..1.5f64, t in 0.0..6.3f64, b in 0.01..0.09f64) {
        let a0 = c(r, 0.0);
        let a1 = C64::from_polar(r, t);
        let delta = |a| PuncturedStateSpec::thermal(nbar).with_puncture(Puncture::delta(a, 0.0));
        let gauss = |a| PuncturedStateSpec::thermal(nbar).with_puncture(Puncture::gaussian(b, a, 0.0));
        for make in [&delta as &dyn Fn(C64) -> PuncturedStateSpec, &gauss] {
            let (s0, s1) = (make(a0), make(a1));
            let (b0, b1) = (nc_bound(&s0).unwrap().value, nc_bound(&s1).unwrap().value);
            // rounding in |a|^2 is amplified by the exponent |a|^2 / (nbar - b)
            let gain = 1.0 + r * r / (nbar - b);
            prop_assert!((b0 - b1).abs() <= 1e-14 * gain * b0);
            let (n0, n1) = (numeric_wmax_at(&s0, 20, 1e-8).unwrap(), numeric_wmax_at(&s1, 20, 1e-8).unwrap());
            prop_assert!((n0 - n1).abs() <= 1e-7 * n0.max(1e-300), "{n0} vs {n1}");
        }
        let (s0, s1) = (delta(a0), delta(a1));
        prop_assert!((sc_bound(&s0).unwrap().value - sc_bound(&s1).unwrap().value).abs() < 1e-14);
    }

    #[test]
    fn quasiprobabilities_normalized(spec in valid_spec()) {
        let p = integrate_quasiprobability(&spec, Quantity::P).unwrap();
        let w = integrate_quasiprobability(&spec, Quantity::W).unwrap();
        prop_assert!((p - 1.0).abs() < 1e-8, "P mass {p}");
        prop_assert!((w - 1.0).abs() < 1e-8, "W mass {w}");
    }

    #[test]
    fn wigner_is_convolution_of_p(spec in valid_spec(), z in alpha(3.0)) {
        let a = eval_w(&spec, z).unwrap();
        let b = wigner_by_convolution(&spec, z).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn threshold_ordering(spec in single_puncture_spec()) {
        let p = p_negativity_threshold(&spec);
        let w = wigner_negativity_threshold(&spec);
        if let (Ok(p), Ok(w)) = (p, w) {
            prop_assert!(p <= w * (1.0 + 1e-12));
        }
    }

    #[test]
    fn wigner_threshold_below_bound_on_figure_ranges(spec in figure_range_spec()) {
        let w = wigner_negativity_threshold(&spec).unwrap();
        prop_assert!(w <= nc_bound(&spec).unwrap().value * (1.0 + 1e-12));
    }

    #[test]
    fn vacuum_centred_rotational_symmetry(nbar in 0.1..3.0f64, f in 0.05..1.0f64, r in 0.0..3.0f64, t in 0.0..6.3f64) {
        for p in [Puncture::delta(c(0.0, 0.0), 0.1 / (nbar + 1.0)), Puncture::gaussian(f * nbar, c(0.0, 0.0), 0.1)] {
            let spec = PuncturedStateSpec::thermal(nbar).with_puncture(p);
            let (z0, z1) = (c(r, 0.0), C64::from_polar(r, t));
            prop_assert!((eval_p(&spec, z0).unwrap().smooth - eval_p(&spec, z1).unwrap().smooth).abs() < 1e-12);
            prop_assert!((eval_w(&spec, z0).unwrap() - eval_w(&spec, z1).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn g2_closed_form_limits(nbar in 0.1..3.0f64, a in alpha(1.5), u in 0.0..1.0f64) {
        let w = u * nc_bound_delta_thermal(nbar, a).unwrap().value;
        let d = g2_delta_thermal(nbar, w, a).unwrap();
        let g = punctured::photonstats::g2_gaussian(nbar, 1e-9, w, a).unwrap();
        prop_assert!((d - g).abs() < 1e-8 * d.abs().max(1.0));
        let s = g2_delta_squeezed(SqueezedWidths::new(nbar, nbar).unwrap(), w, a).unwrap();
        prop_assert!((d - s).abs() < 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn g2_routes_agree(spec in valid_spec()) {
        let a = g2_analytic(&spec).unwrap();
        let (t, _) = g2_trace_converged(&spec).unwrap();
        prop_assert!(((a.g2 - t.g2) / a.g2).abs() < 1e-6, "{} vs {}", a.g2, t.g2);
        for r in [a, t] {
            prop_assert_eq!(r.mandel_q, r.mean_n * (r.g2 - 1.0));
        }
    }

    #[test]
    fn jensen_theorem(nbar in 0.1..3.0f64, f in 0.05..1.0f64, a in alpha(1.5), u in 0.0..1.0f64,
                      f2 in 0.05..1.0f64, a2 in alpha(1.5), u2 in 0.0..1.0f64) {
        let g1 = Puncture::gaussian(f * nbar, a, 0.0);
        let g2p = Puncture::gaussian(f2 * nbar, a2, 0.0);
        let t = |p: Puncture| p_negativity_threshold(&PuncturedStateSpec::thermal(nbar).with_puncture(p)).unwrap();
        let (t1, t2) = (t(g1), t(g2p));
        // split the classical budget between the two punctures
        let spec = PuncturedStateSpec::thermal(nbar)
            .with_puncture(Puncture { weight: u * t1 * u2, ..g1 })
            .with_puncture(Puncture { weight: u * t2 * (1.0 - u2), ..g2p });
        prop_assert!(jensen_classicality_check(&spec));
        prop_assert!(g2_analytic(&spec).unwrap().g2 >= 1.0 - 1e-9);
    }
}

#[test]
fn wigner_threshold_exceeds_bound_at_narrow_squeezing() {
    // widths (1, 0.1): Wigner negativity needs more weight than positivity allows
    let spec = PuncturedStateSpec::squeezed_from_widths(SqueezedWidths::new(1.0, 0.1).unwrap())
        .with_puncture(Puncture::delta(c(0.3, 0.2), 0.0));
    let w = wigner_negativity_threshold(&spec).unwrap();
    let nc = nc_bound(&spec).unwrap().value;
    assert!((w / nc - 1.3 / (2.0 * 0.1f64.sqrt() * 3.6f64.sqrt())).abs() < 1e-12);
    assert!(w > nc);
}

#[test]
fn truncated_wmax_stays_above_unattained_squeezed_bound() {
    let spec = PuncturedStateSpec::squeezed_from_widths(SqueezedWidths::new(2.0, 0.1).unwrap())
        .with_puncture(Puncture::delta(c(0.0, 0.5), 0.0));
    let nc = nc_bound(&spec).unwrap().value;
    let mut last = f64::INFINITY;
    for n in [20, 40, 80] {
        let v = numeric_wmax_at(&spec, n, 1e-8).unwrap();
        assert!(v > nc && v <= last);
        last = v;
    }
}

#[test]
fn normalization_matches_weight_sum() {
    let spec = PuncturedStateSpec::thermal(1.0)
        .with_puncture(Puncture::delta(c(0.1, 0.0), 0.2))
        .with_puncture(Puncture::gaussian(0.3, c(0.0, 0.5), 0.3));
    assert_eq!(normalization(&spec).unwrap(), 2.0);
}

#[test]
fn trace_route_on_normalized_state() {
    let rho = build_density_with_tolerance(&PuncturedStateSpec::thermal(0.3), 80, 1e-12).unwrap();
    assert!((g2_trace(&rho).unwrap().g2 - 2.0).abs() < 1e-10);
}
