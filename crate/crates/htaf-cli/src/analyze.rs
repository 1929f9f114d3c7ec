//! Analytic curve emitters behind the `analyze` subcommand: the
//! parameter-bound curve, the tail-decay fit, the gradient-ratio curve,
//! and the randomized step-vs-smooth mean-gap check.
//!
//! CSV cells carry 17 significant digits so every f64 round-trips
//! exactly; human-facing summaries round to 3 decimals.

use std::fmt;
use std::path::Path;

use htaf_core::activations::{htaf_grad_checked, HtafParams};
use htaf_core::bounds::{
    alpha0_lower_bound, dhn_approx_check, fit_tail_decay, gradient_ratio_curve, GridSpec,
    RatioCurve, TailFit,
};

use crate::error::{CliError, Result};

/// One row of the parameter-bound curve at a fixed tolerance.
#[derive(Clone, Copy, Debug)]
pub struct BoundsRow {
    pub alpha1: f64,
    /// Smallest admissible `alpha0` at this `alpha1`.
    pub alpha0_bound: f64,
    /// `alpha1 * alpha0_bound`; converges as `alpha1` grows.
    pub product: f64,
}

/// Evaluates the lower-bound curve over the given saturation gains.
pub fn bounds_curve(epsilon: f64, alpha1_values: &[f64]) -> Result<Vec<BoundsRow>> {
    let mut rows = Vec::with_capacity(alpha1_values.len());
    for &alpha1 in alpha1_values {
        let alpha0_bound = alpha0_lower_bound(epsilon, alpha1)?;
        rows.push(BoundsRow {
            alpha1,
            alpha0_bound,
            product: alpha1 * alpha0_bound,
        });
    }
    Ok(rows)
}

/// Geometric sweep of saturation gains, `n` points from `lo` to `hi`.
pub fn geometric_sweep(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(CliError::Config {
            reason: format!("sweep bounds [{lo}, {hi}] must be positive and increasing"),
        });
    }
    if n < 2 {
        return Err(CliError::Config {
            reason: "a sweep needs at least 2 points".to_string(),
        });
    }
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo * ratio.powi(i as i32)
            }
        })
        .collect())
}

/// Tail gradient samples plus the fitted exponential decay rate.
#[derive(Clone, Debug)]
pub struct TailAnalysis {
    /// `(x, d htaf / d x)` on the uniform sample grid.
    pub rows: Vec<(f64, f64)>,
    pub fit: TailFit,
    pub params: HtafParams,
}

/// Samples the gradient on `[x_lo, x_hi]` and fits its log-linear decay.
pub fn tail_analysis(
    params: HtafParams,
    x_lo: f64,
    x_hi: f64,
    n_points: usize,
) -> Result<TailAnalysis> {
    let fit = fit_tail_decay(&params, x_lo, x_hi, n_points)?;
    let step = (x_hi - x_lo) / (n_points - 1) as f64;
    let rows = (0..n_points)
        .map(|i| {
            let x = x_lo + step * i as f64;
            (x, htaf_grad_checked(x, &params).value)
        })
        .collect();
    Ok(TailAnalysis { rows, fit, params })
}

impl fmt::Display for TailAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tail fit for (alpha0, alpha1) = ({:.3}, {:.3}): slope {:.3} (theory {:.3}), r^2 {:.3}, {} points",
            self.params.alpha0(),
            self.params.alpha1(),
            self.fit.slope,
            -2.0 * self.params.alpha0(),
            self.fit.r_squared,
            self.fit.points_used
        )
    }
}

/// Gradient-ratio curve of the heavy-tailed surrogate against the scaled
/// sigmoid with matched origin slope.
#[derive(Clone, Debug)]
pub struct RatioAnalysis {
    pub curve: RatioCurve,
    pub params: HtafParams,
    pub beta0: f64,
}

pub fn ratio_analysis(
    params: HtafParams,
    beta0: f64,
    x_lo: f64,
    x_hi: f64,
    n_points: usize,
) -> Result<RatioAnalysis> {
    let curve = gradient_ratio_curve(&params, beta0, x_lo, x_hi, n_points)?;
    Ok(RatioAnalysis {
        curve,
        params,
        beta0,
    })
}

impl fmt::Display for RatioAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let min = self
            .curve
            .points
            .iter()
            .map(|&(_, r)| r)
            .fold(f64::INFINITY, f64::min);
        let max = self
            .curve
            .points
            .iter()
            .map(|&(_, r)| r)
            .fold(f64::NEG_INFINITY, f64::max);
        write!(
            f,
            "gradient ratio for (alpha0, alpha1) = ({:.3}, {:.3}) vs beta0 = {:.3}: {} points in [{:.3}, {:.3}], {} skipped for underflow",
            self.params.alpha0(),
            self.params.alpha1(),
            self.beta0,
            self.curve.points.len(),
            min,
            max,
            self.curve.skipped.len()
        )
    }
}

/// One seeded mean-gap check row.
#[derive(Clone, Copy, Debug)]
pub struct DhnRow {
    pub seed: u64,
    pub empirical_gap: f64,
    pub bound: f64,
    pub boundary_constant: f64,
    pub holds: bool,
}

/// Runs the randomized mean-gap check once per seed.
pub fn dhn_analysis(
    n1: usize,
    dim: usize,
    epsilon: f64,
    n_samples: usize,
    seeds: &[u64],
) -> Result<Vec<DhnRow>> {
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let report = dhn_approx_check(n1, dim, epsilon, n_samples, seed)?;
        rows.push(DhnRow {
            seed,
            empirical_gap: report.empirical_gap,
            bound: report.bound,
            boundary_constant: report.boundary_constant,
            holds: report.holds,
        });
    }
    Ok(rows)
}

/// Formats with 17 significant digits, enough to reproduce the f64 bit
/// pattern on parse.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn write_bounds_csv(rows: &[BoundsRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["alpha1", "alpha0_lower_bound", "product"])
        .map_err(csv_err(path))?;
    for row in rows {
        w.write_record([
            sig17(row.alpha1),
            sig17(row.alpha0_bound),
            sig17(row.product),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_tail_csv(analysis: &TailAnalysis, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "gradient"]).map_err(csv_err(path))?;
    for &(x, g) in &analysis.rows {
        w.write_record([sig17(x), sig17(g)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_ratio_csv(analysis: &RatioAnalysis, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "ratio"]).map_err(csv_err(path))?;
    for &(x, r) in &analysis.curve.points {
        w.write_record([sig17(x), sig17(r)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_dhn_csv(rows: &[DhnRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "seed",
        "empirical_gap",
        "bound",
        "boundary_constant",
        "holds",
    ])
    .map_err(csv_err(path))?;
    for row in rows {
        w.write_record([
            row.seed.to_string(),
            sig17(row.empirical_gap),
            sig17(row.bound),
            sig17(row.boundary_constant),
            row.holds.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Re-exported grid used by the bound-verification subcommand.
pub fn default_grid() -> GridSpec {
    GridSpec::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_curve_product_approaches_limit() {
        let rows = bounds_curve(0.1, &[100.0, 1000.0, 5000.0]).unwrap();
        assert!(rows.windows(2).all(|w| w[1].product < w[0].product));
        let last = rows.last().unwrap();
        assert!((last.product - 21.97).abs() < 0.1);
    }

    #[test]
    fn bounds_curve_rejects_gain_below_threshold() {
        assert!(bounds_curve(0.1, &[1.0]).is_err());
    }

    #[test]
    fn geometric_sweep_hits_both_endpoints() {
        let xs = geometric_sweep(3.0, 5000.0, 40).unwrap();
        assert_eq!(xs.len(), 40);
        assert_eq!(xs[0], 3.0);
        assert_eq!(*xs.last().unwrap(), 5000.0);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn geometric_sweep_rejects_bad_bounds() {
        assert!(geometric_sweep(0.0, 10.0, 5).is_err());
        assert!(geometric_sweep(10.0, 5.0, 5).is_err());
        assert!(geometric_sweep(1.0, 10.0, 1).is_err());
    }

    #[test]
    fn tail_analysis_matches_theory_slope() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        let a = tail_analysis(params, 5.0, 10.0, 200).unwrap();
        assert_eq!(a.rows.len(), 200);
        assert!((a.fit.slope - (-2.0)).abs() < 0.04);
        assert!(a.fit.r_squared > 0.999);
        let text = a.to_string();
        assert!(text.contains("slope"));
    }

    #[test]
    fn ratio_analysis_summary_reports_range() {
        let params = HtafParams::new(1.5, 5.0).unwrap();
        let a = ratio_analysis(params, 7.5, 0.0, 3.0, 31).unwrap();
        assert!(!a.curve.points.is_empty());
        assert!(a.to_string().contains("points in"));
    }

    #[test]
    fn dhn_analysis_rows_hold_per_seed() {
        let rows = dhn_analysis(8, 4, 0.05, 2_000, &[0, 1, 2]).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!(row.empirical_gap.is_finite());
            assert!(row.bound.is_finite());
        }
    }

    #[test]
    fn sig17_round_trips_f64() {
        for &x in &[
            1.0 / 3.0,
            std::f64::consts::PI,
            2.2250738585072014e-308,
            -9.87654321e17,
        ] {
            let parsed: f64 = sig17(x).parse().unwrap();
            assert_eq!(parsed, x);
        }
    }

    #[test]
    fn csv_emitters_write_expected_headers() {
        let dir = tempfile::tempdir().unwrap();
        let params = HtafParams::new(1.0, 22.0).unwrap();

        let bounds = bounds_curve(0.1, &[22.0, 100.0]).unwrap();
        let p = dir.path().join("bounds.csv");
        write_bounds_csv(&bounds, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("alpha1,alpha0_lower_bound,product\n"));
        assert_eq!(text.lines().count(), 3);

        let tail = tail_analysis(params, 5.0, 10.0, 10).unwrap();
        let p = dir.path().join("tail.csv");
        write_tail_csv(&tail, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x,gradient\n"));

        let ratio = ratio_analysis(HtafParams::new(1.5, 5.0).unwrap(), 7.5, 0.0, 3.0, 11).unwrap();
        let p = dir.path().join("ratio.csv");
        write_ratio_csv(&ratio, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x,ratio\n"));

        let dhn = dhn_analysis(4, 3, 0.05, 500, &[7]).unwrap();
        let p = dir.path().join("dhn.csv");
        write_dhn_csv(&dhn, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("seed,empirical_gap,bound,boundary_constant,holds\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("7,"));
    }

    #[test]
    fn csv_cells_parse_back_to_identical_floats() {
        let params = HtafParams::new(1.0, 22.0).unwrap();
        let tail = tail_analysis(params, 5.0, 10.0, 25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tail.csv");
        write_tail_csv(&tail, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        for (line, &(x, g)) in text.lines().skip(1).zip(&tail.rows) {
            let mut cells = line.split(',');
            let px: f64 = cells.next().unwrap().parse().unwrap();
            let pg: f64 = cells.next().unwrap().parse().unwrap();
            assert_eq!(px, x);
            assert_eq!(pg, g);
        }
    }
}
