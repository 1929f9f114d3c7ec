//! Parameter-selection theory for the heavy-tailed activation.
//!
//! For a tolerance `eps` in (0, 1/2), `htaf` approximates the Heaviside step
//! to within `eps` outside the dead zone `(-eps, eps)` exactly when the
//! saturation gain satisfies `alpha1 > log((1-eps)/eps)` and the frequency
//! gain satisfies
//!
//! ```text
//! alpha0 >= (1 / (2 eps)) * log((alpha1 + c) / (alpha1 - c)),
//! c = log((1-eps)/eps).
//! ```
//!
//! This module computes that lower bound, verifies the sup-norm claim on a
//! grid, fits the log-linear tail decay of the gradient (slope `-2*alpha0`),
//! compares the gradient tail against a scaled sigmoid with matching origin
//! slope, and checks the deep-Heaviside-network approximation bound
//! `E|f - g| <= n1 * ||w||_inf * (1 + C) * eps` on randomly sampled
//! single-hidden-layer networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{
    heaviside, htaf_forward, htaf_grad_checked, scaled_sigmoid_grad_checked, HtafParams,
};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Smallest admissible saturation gain for tolerance `eps`:
/// `log((1 - eps) / eps)`.
pub fn alpha1_threshold(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5) {
        return Err(CoreError::EpsilonOutOfRange { epsilon });
    }
    Ok(((1.0 - epsilon) / epsilon).ln())
}

/// Smallest frequency gain `alpha0` for which `htaf` with gain `alpha1`
/// stays within `eps` of the step outside `(-eps, eps)`.
pub fn alpha0_lower_bound(epsilon: f64, alpha1: f64) -> Result<f64> {
    let c = alpha1_threshold(epsilon)?;
    if !alpha1.is_finite() || alpha1 <= c {
        return Err(CoreError::Alpha1BelowThreshold {
            alpha1,
            threshold: c,
        });
    }
    Ok(((alpha1 + c) / (alpha1 - c)).ln() / (2.0 * epsilon))
}

/// Sampling grid for [`verify_heaviside_approx`]: `points_per_side` uniform
/// points on `[epsilon, x_max]` and their mirror images.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub x_max: f64,
    pub points_per_side: usize,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            x_max: 50.0,
            points_per_side: 100_000,
        }
    }
}

/// Measured sup-norm distances between `htaf` and the step on a grid.
#[derive(Clone, Copy, Debug)]
pub struct SupErrorReport {
    /// `max |1 - htaf(x)|` over the grid on `[epsilon, x_max]`.
    pub sup_right: f64,
    /// `max |htaf(x)|` over the mirrored grid on `[-x_max, -epsilon]`.
    pub sup_left: f64,
    /// Both sups at or below `epsilon`.
    pub satisfied: bool,
    /// Whether the right-side sup is attained at the first grid point
    /// `x = epsilon`, as monotonicity predicts.
    pub sup_attained_at_epsilon: bool,
}

/// Evaluates how well `htaf` approximates the Heaviside step outside the
/// dead zone, on a uniform grid.
pub fn verify_heaviside_approx(
    params: &HtafParams,
    epsilon: f64,
    grid: &GridSpec,
) -> Result<SupErrorReport> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5) {
        return Err(CoreError::EpsilonOutOfRange { epsilon });
    }
    if !(grid.x_max.is_finite() && grid.x_max > epsilon) {
        return Err(CoreError::InvalidInterval {
            reason: format!("x_max = {} must exceed epsilon = {}", grid.x_max, epsilon),
        });
    }
    if grid.points_per_side < 2 {
        return Err(CoreError::InvalidParameter {
            name: "points_per_side",
            value: grid.points_per_side as f64,
        });
    }

    let n = grid.points_per_side;
    let step = (grid.x_max - epsilon) / (n - 1) as f64;
    let mut sup_right = f64::NEG_INFINITY;
    let mut sup_right_idx = 0usize;
    let mut sup_left = f64::NEG_INFINITY;
    for i in 0..n {
        let x = epsilon + step * i as f64;
        let right_err = (1.0 - htaf_forward(x, params)).abs();
        if right_err > sup_right {
            sup_right = right_err;
            sup_right_idx = i;
        }
        let left_err = htaf_forward(-x, params).abs();
        if left_err > sup_left {
            sup_left = left_err;
        }
    }
    Ok(SupErrorReport {
        sup_right,
        sup_left,
        satisfied: sup_right <= epsilon && sup_left <= epsilon,
        sup_attained_at_epsilon: sup_right_idx == 0,
    })
}

/// Least-squares fit of `log htaf_grad` against `x` on a tail interval.
#[derive(Clone, Copy, Debug)]
pub struct TailFit {
    /// Fitted slope of `log g(x)`; the theory predicts `-2 * alpha0`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points that survived underflow filtering and entered the fit.
    pub points_used: usize,
}

/// Fits the exponential tail-decay rate of the gradient on
/// `[x_lo, x_hi]`. The interval must start at or beyond `2 / alpha0`,
/// where the saturation regime begins. Underflowed sample points are
/// skipped; the fit needs at least three survivors.
pub fn fit_tail_decay(
    params: &HtafParams,
    x_lo: f64,
    x_hi: f64,
    n_points: usize,
) -> Result<TailFit> {
    let gate = 2.0 / params.alpha0();
    if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
        return Err(CoreError::InvalidInterval {
            reason: format!("[{x_lo}, {x_hi}] is not a proper interval"),
        });
    }
    if x_lo < gate {
        return Err(CoreError::InvalidInterval {
            reason: format!(
                "x_lo = {x_lo} is below the tail regime boundary 2/alpha0 = {gate}"
            ),
        });
    }
    if n_points < 3 {
        return Err(CoreError::TooFewPoints {
            needed: 3,
            got: n_points,
        });
    }

    let step = (x_hi - x_lo) / (n_points - 1) as f64;
    let mut xs = Vec::with_capacity(n_points);
    let mut ys = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let x = x_lo + step * i as f64;
        let g = htaf_grad_checked(x, params);
        if g.underflowed {
            continue;
        }
        xs.push(x);
        ys.push(g.value.ln());
    }
    if xs.is_empty() {
        return Err(CoreError::AllPointsUnderflowed);
    }
    if xs.len() < 3 {
        return Err(CoreError::TooFewPoints {
            needed: 3,
            got: xs.len(),
        });
    }

    let n = xs.len() as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(TailFit {
        slope,
        intercept,
        r_squared,
        points_used: xs.len(),
    })
}

/// Pointwise ratio of the heavy-tailed gradient to a scaled-sigmoid gradient
/// with the same derivative at the origin.
#[derive(Clone, Debug)]
pub struct RatioCurve {
    /// `(x, htaf_grad(x) / scaled_sigmoid_grad(x))` at usable sample points.
    pub points: Vec<(f64, f64)>,
    /// Sample points skipped because one of the gradients underflowed.
    pub skipped: Vec<f64>,
}

/// Samples the gradient ratio curve on `[x_lo, x_hi]`. Requires
/// `beta0 = alpha0 * alpha1` (matched origin slopes), to within 1e-9
/// relative, so the ratio starts at exactly one.
pub fn gradient_ratio_curve(
    params: &HtafParams,
    beta0: f64,
    x_lo: f64,
    x_hi: f64,
    n_points: usize,
) -> Result<RatioCurve> {
    let product = params.alpha0() * params.alpha1();
    if !beta0.is_finite() || (beta0 - product).abs() > 1e-9 * product {
        return Err(CoreError::InvalidParameter {
            name: "beta0 (must equal alpha0*alpha1)",
            value: beta0,
        });
    }
    if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi || x_lo < 0.0 {
        return Err(CoreError::InvalidInterval {
            reason: format!("[{x_lo}, {x_hi}] is not a proper non-negative interval"),
        });
    }
    if n_points < 2 {
        return Err(CoreError::TooFewPoints {
            needed: 2,
            got: n_points,
        });
    }

    let step = (x_hi - x_lo) / (n_points - 1) as f64;
    let mut points = Vec::with_capacity(n_points);
    let mut skipped = Vec::new();
    for i in 0..n_points {
        let x = x_lo + step * i as f64;
        let ss = scaled_sigmoid_grad_checked(x, beta0);
        let ht = htaf_grad_checked(x, params);
        if ss.underflowed || ht.underflowed {
            skipped.push(x);
            continue;
        }
        points.push((x, ht.value / ss.value));
    }
    Ok(RatioCurve { points, skipped })
}

/// Outcome of one deep-Heaviside-network approximation check.
#[derive(Clone, Copy, Debug)]
pub struct DhnApproxReport {
    /// Sample mean of `|f(x) - g(x)|` over the drawn inputs.
    pub empirical_gap: f64,
    /// `n1 * ||w||_inf * (1 + C) * eps` with the empirical boundary-mass
    /// constant `C`.
    pub bound: f64,
    /// Largest per-unit boundary mass `P{|h_j| < eps} / eps` observed.
    pub boundary_constant: f64,
    pub holds: bool,
    /// Heavy-tail parameters chosen for the smooth twin.
    pub alpha0: f64,
    pub alpha1: f64,
    pub epsilon: f64,
}

/// Draws a random single-hidden-layer Heaviside network `f`, builds its
/// smooth twin `g` by replacing the step with an `htaf` whose parameters
/// meet the approximation bound at tolerance `eps`, and checks the
/// mean-gap inequality `E|f - g| <= n1 * ||w||_inf * (1 + C) * eps` on
/// `n_samples` uniform inputs.
///
/// Weights, biases, and head weights are drawn from U(-1, 1) and inputs
/// from U(0, 1)^dim, in that order, from a ChaCha8 stream seeded with
/// `seed`, so reports are reproducible.
pub fn dhn_approx_check(
    n1: usize,
    dim: usize,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DhnApproxReport> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5) {
        return Err(CoreError::EpsilonOutOfRange { epsilon });
    }
    for (name, v) in [("n1", n1), ("dim", dim), ("n_samples", n_samples)] {
        if v == 0 {
            return Err(CoreError::InvalidParameter {
                name,
                value: 0.0,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = Matrix::from_fn(n1, dim, |_, _| rng.gen_range(-1.0..1.0));
    let bias = Matrix::from_fn(1, n1, |_, _| rng.gen_range(-1.0..1.0));
    let head: Vec<f64> = (0..n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = Matrix::from_fn(n_samples, dim, |_, _| rng.gen_range(0.0..1.0));

    let h = x.matmul_nt(&w0)?.add_row_broadcast(&bias)?;
    for j in 0..n1 {
        let col = h.col(j);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            return Err(CoreError::DegenerateNetwork);
        }
    }

    let c = alpha1_threshold(epsilon)?;
    let alpha1 = f64::max(22.0, 2.0 * c);
    let alpha0 = alpha0_lower_bound(epsilon, alpha1)?;
    let params = HtafParams::new(alpha0, alpha1)?;

    let mut gap_sum = 0.0;
    let mut boundary_max = 0.0_f64;
    for j in 0..n1 {
        let mut near = 0usize;
        for i in 0..n_samples {
            if h.get(i, j).abs() < epsilon {
                near += 1;
            }
        }
        boundary_max = boundary_max.max(near as f64 / n_samples as f64 / epsilon);
    }
    for i in 0..n_samples {
        let mut f_val = 0.0;
        let mut g_val = 0.0;
        for j in 0..n1 {
            let hij = h.get(i, j);
            f_val += head[j] * heaviside(hij);
            g_val += head[j] * htaf_forward(hij, &params);
        }
        gap_sum += (f_val - g_val).abs();
    }
    let empirical_gap = gap_sum / n_samples as f64;
    let w_inf = head.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let bound = n1 as f64 * w_inf * (1.0 + boundary_max) * epsilon;

    Ok(DhnApproxReport {
        empirical_gap,
        bound,
        boundary_constant: boundary_max,
        holds: empirical_gap <= bound,
        alpha0,
        alpha1,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Lower bounds at eps = 0.1 computed independently with 30-digit
    // arithmetic and frozen here.
    const ORACLE_BOUNDS: &[(f64, f64)] = &[
        (5.0, 4.71542663856),
        (10.0, 2.23364469187),
        (20.0, 1.10306447129),
        (22.0, 1.0020791948),
        (30.0, 0.73372202262),
        (40.0, 0.549859633797),
        (50.0, 0.439728117055),
        (100.0, 0.219757827152),
        (500.0, 0.0439447744234),
        (1000.0, 0.0219722811326),
        (5000.0, 0.00439444943755),
    ];

    const PRODUCT_LIMIT: f64 = 21.9722457734;

    #[test]
    fn threshold_value_at_tenth() {
        let c = alpha1_threshold(0.1).unwrap();
        assert!((c - 9.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn threshold_rejects_bad_epsilon() {
        for eps in [0.0, 0.5, -0.2, 1.0, f64::NAN] {
            assert!(matches!(
                alpha1_threshold(eps),
                Err(CoreError::EpsilonOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn lower_bound_matches_frozen_oracle() {
        for &(a1, expected) in ORACLE_BOUNDS {
            let b = alpha0_lower_bound(0.1, a1).unwrap();
            assert!(
                (b - expected).abs() / expected < 1e-10,
                "alpha1 = {a1}: {b} vs {expected}"
            );
        }
    }

    #[test]
    fn lower_bound_rejects_gain_at_or_below_threshold() {
        let c = alpha1_threshold(0.1).unwrap();
        assert!(matches!(
            alpha0_lower_bound(0.1, c),
            Err(CoreError::Alpha1BelowThreshold { .. })
        ));
        assert!(matches!(
            alpha0_lower_bound(0.1, c - 0.1),
            Err(CoreError::Alpha1BelowThreshold { .. })
        ));
        assert!(alpha0_lower_bound(0.1, c + 0.01).is_ok());
    }

    #[test]
    fn lower_bound_is_strictly_decreasing_in_gain() {
        let mut prev = f64::INFINITY;
        for a1 in [3.0, 5.0, 10.0, 22.0, 100.0, 1000.0] {
            let b = alpha0_lower_bound(0.1, a1).unwrap();
            assert!(b < prev, "bound not decreasing at alpha1 = {a1}");
            prev = b;
        }
    }

    #[test]
    fn product_converges_to_limit() {
        for &(a1, tol) in &[(100.0, 0.5), (1000.0, 0.05), (5000.0, 0.01)] {
            let product = a1 * alpha0_lower_bound(0.1, a1).unwrap();
            assert!(
                (product - PRODUCT_LIMIT).abs() < tol,
                "alpha1 = {a1}: product {product}"
            );
        }
    }

    #[test]
    fn verify_succeeds_at_the_bound() {
        let eps = 0.1;
        let alpha1 = 22.0;
        let alpha0 = alpha0_lower_bound(eps, alpha1).unwrap() * (1.0 + 1e-9);
        let params = HtafParams::new(alpha0, alpha1).unwrap();
        let grid = GridSpec {
            x_max: 50.0,
            points_per_side: 10_000,
        };
        let report = verify_heaviside_approx(&params, eps, &grid).unwrap();
        assert!(report.satisfied, "{report:?}");
        assert!(report.sup_attained_at_epsilon);
        assert!((report.sup_right - eps).abs() < 1e-6);
        assert!((report.sup_left - eps).abs() < 1e-6);
    }

    #[test]
    fn verify_fails_below_the_bound() {
        let params = HtafParams::new(1.002, 22.0).unwrap();
        let report =
            verify_heaviside_approx(&params, 0.01, &GridSpec::default()).unwrap();
        assert!(!report.satisfied);
        assert!(report.sup_right > 0.4);
    }

    #[test]
    fn verify_rejects_degenerate_grid() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        let grid = GridSpec {
            x_max: 0.05,
            points_per_side: 100,
        };
        assert!(matches!(
            verify_heaviside_approx(&params, 0.1, &grid),
            Err(CoreError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn tail_fit_recovers_decay_rate() {
        for &(a0, a1) in &[(1.0, 22.0), (2.0, 11.0), (0.5, 44.0)] {
            let params = HtafParams::new(a0, a1).unwrap();
            let fit = fit_tail_decay(&params, 5.0 / a0, 10.0 / a0, 200).unwrap();
            let expected = -2.0 * a0;
            assert!(
                (fit.slope - expected).abs() / expected.abs() < 0.02,
                "params ({a0}, {a1}): slope {}",
                fit.slope
            );
            assert!(fit.r_squared > 0.999, "r^2 = {}", fit.r_squared);
            assert_eq!(fit.points_used, 200);
        }
    }

    #[test]
    fn tail_fit_rejects_interval_before_the_regime() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        assert!(matches!(
            fit_tail_decay(&params, 1.0, 10.0, 50),
            Err(CoreError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn tail_fit_reports_total_underflow() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        assert!(matches!(
            fit_tail_decay(&params, 400.0, 500.0, 50),
            Err(CoreError::AllPointsUnderflowed)
        ));
    }

    #[test]
    fn tail_fit_skips_partially_underflowed_points() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        let fit = fit_tail_decay(&params, 300.0, 400.0, 101).unwrap();
        assert!(fit.points_used > 3);
        assert!(fit.points_used < 101, "expected some underflow skips");
        assert!((fit.slope + 2.0).abs() < 0.04);
    }

    #[test]
    fn ratio_curve_matches_frozen_shape() {
        let params = HtafParams::new(1.5, 5.0).unwrap();
        let curve = gradient_ratio_curve(&params, 7.5, 0.0, 3.0, 31).unwrap();
        assert!(curve.skipped.is_empty());
        assert_eq!(curve.points.len(), 31);
        assert_eq!(curve.points[0].1, 1.0);

        // Frozen reference values (30-digit arithmetic): the curve dips
        // below one near x ~ 0.3 before growing without bound.
        let at = |x: f64| -> f64 {
            curve
                .points
                .iter()
                .find(|(px, _)| (px - x).abs() < 1e-9)
                .unwrap()
                .1
        };
        assert!((at(0.1) - 0.9797820579).abs() < 1e-8);
        assert!((at(0.3) - 0.9193656756).abs() < 1e-8);
        assert!((at(2.0) - 219.7090259).abs() < 1e-4);
        assert!(at(0.3) < 1.0);
    }

    #[test]
    fn ratio_curve_is_increasing_past_the_dip_and_large_in_the_tail() {
        let params = HtafParams::new(1.5, 5.0).unwrap();
        let curve = gradient_ratio_curve(&params, 7.5, 0.5, 3.0, 200).unwrap();
        for pair in curve.points.windows(2) {
            assert!(pair[1].1 > pair[0].1, "not increasing at x = {}", pair[0].0);
        }
        for &(x, r) in curve.points.iter().filter(|(x, _)| *x >= 2.0) {
            assert!(r >= 100.0, "ratio {r} at x = {x}");
        }
    }

    #[test]
    fn ratio_curve_skips_sigmoid_underflow() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        let curve = gradient_ratio_curve(&params, 22.0, 30.0, 40.0, 11).unwrap();
        assert!(!curve.skipped.is_empty());
        for &x in &curve.skipped {
            assert!(x >= 30.0);
        }
    }

    #[test]
    fn ratio_curve_rejects_mismatched_origin_slopes() {
        let params = HtafParams::new(1.5, 5.0).unwrap();
        assert!(matches!(
            gradient_ratio_curve(&params, 10.0, 0.0, 3.0, 10),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn dhn_bound_holds_on_sampled_networks() {
        for seed in 0..5 {
            let report = dhn_approx_check(8, 4, 0.05, 20_000, seed).unwrap();
            assert!(report.holds, "seed {seed}: {report:?}");
            assert!(report.empirical_gap <= report.bound);
            assert!(report.bound.is_finite());
        }
    }

    #[test]
    fn dhn_check_is_deterministic() {
        let a = dhn_approx_check(8, 4, 0.05, 5_000, 99).unwrap();
        let b = dhn_approx_check(8, 4, 0.05, 5_000, 99).unwrap();
        assert_eq!(a.empirical_gap, b.empirical_gap);
        assert_eq!(a.bound, b.bound);
    }

    #[test]
    fn dhn_check_rejects_degenerate_samples_and_bad_epsilon() {
        assert!(matches!(
            dhn_approx_check(4, 3, 0.05, 1, 0),
            Err(CoreError::DegenerateNetwork)
        ));
        assert!(matches!(
            dhn_approx_check(4, 3, 0.6, 100, 0),
            Err(CoreError::EpsilonOutOfRange { .. })
        ));
        assert!(matches!(
            dhn_approx_check(0, 3, 0.05, 100, 0),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    proptest! {
        // The defining identity of the bound: at alpha0 equal to the bound,
        // alpha1 * tanh(alpha0 * eps) equals the threshold c exactly.
        #[test]
        fn bound_is_tight_at_the_dead_zone_edge(
            eps in 0.01_f64..0.4,
            extra in 0.5_f64..500.0,
        ) {
            let c = alpha1_threshold(eps).unwrap();
            let alpha1 = c + extra;
            let alpha0 = alpha0_lower_bound(eps, alpha1).unwrap();
            let z = alpha1 * (alpha0 * eps).tanh();
            prop_assert!((z - c).abs() <= 1e-9 * c.max(1.0));
        }

        // Any alpha0 at or above the bound keeps the sup error within eps.
        #[test]
        fn sup_error_within_eps_above_the_bound(
            eps in 0.02_f64..0.3,
            extra in 0.5_f64..100.0,
            slack in 1.0_f64..4.0,
        ) {
            let c = alpha1_threshold(eps).unwrap();
            let alpha1 = c + extra;
            let alpha0 = alpha0_lower_bound(eps, alpha1).unwrap() * slack * (1.0 + 1e-12);
            let params = HtafParams::new(alpha0, alpha1).unwrap();
            let grid = GridSpec { x_max: 30.0, points_per_side: 500 };
            let report = verify_heaviside_approx(&params, eps, &grid).unwrap();
            prop_assert!(report.satisfied, "{:?}", report);
        }
    }
}
