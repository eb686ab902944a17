//! Weighted least-squares scaling fits and χ² tail probabilities.
//!
//! Both families are linear in `a`, so `a` is eliminated in closed form and
//! the fit reduces to a one-dimensional search over `b`: a coarse scan over
//! the bounds, Brent refinement around the best cell, then a Gauss-Newton
//! polish on `(a, b)`.

use std::io::{Read, Write};

use argmin::core::{CostFunction, Executor};
use argmin::solver::brent::BrentOpt;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{contract, Error, Result};
use crate::experiments::MedianEstimate;

/// Two-sided 95% normal quantile used to turn CI widths into sigmas.
pub const Z95: f64 = 1.96;

const SCAN_POINTS: usize = 241;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    /// `a N^b`
    PowerLaw,
    /// `a (e^{bN} - 1)`
    Exponential,
}

impl FitFamily {
    pub const ALL: [FitFamily; 2] = [FitFamily::PowerLaw, FitFamily::Exponential];

    pub fn label(self) -> &'static str {
        match self {
            FitFamily::PowerLaw => "power",
            FitFamily::Exponential => "exp",
        }
    }

    /// Search interval for `b`.
    pub fn b_bounds(self) -> (f64, f64) {
        match self {
            FitFamily::PowerLaw => (1e-6, 12.0),
            FitFamily::Exponential => (1e-6, 5.0),
        }
    }

    /// Model shape without the amplitude `a`.
    pub fn shape(self, n: f64, b: f64) -> f64 {
        match self {
            FitFamily::PowerLaw => n.powf(b),
            FitFamily::Exponential => (b * n).exp_m1(),
        }
    }

    fn shape_db(self, n: f64, b: f64) -> f64 {
        match self {
            FitFamily::PowerLaw => n.powf(b) * n.ln(),
            FitFamily::Exponential => n * (b * n).exp(),
        }
    }

    pub fn eval(self, a: f64, b: f64, n: f64) -> f64 {
        a * self.shape(n, b)
    }
}

impl std::str::FromStr for FitFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power" | "power_law" | "powerlaw" => Ok(FitFamily::PowerLaw),
            "exp" | "exponential" => Ok(FitFamily::Exponential),
            other => Err(Error::Parse(format!("unknown fit family {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: usize,
    pub value: f64,
    pub sigma: f64,
}

impl FitPoint {
    pub fn new(n: usize, value: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return contract(format!("sigma must be > 0 at N = {n}, got {sigma}"));
        }
        if !(value > 0.0 && value.is_finite()) {
            return contract(format!("value must be > 0 at N = {n}, got {value}"));
        }
        Ok(FitPoint { n, value, sigma })
    }

    /// Sigma from the 95% CI half-width.
    pub fn from_median(m: &MedianEstimate) -> Result<Self> {
        Self::new(m.n_bits, m.median, (m.ci_high - m.ci_low) / (2.0 * Z95))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub family: FitFamily,
    pub a: f64,
    pub b: f64,
    pub chi2: f64,
    pub dof: usize,
    pub tail_q: f64,
}

impl ScalingFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.family.eval(self.a, self.b, n)
    }
}

/// `P(χ² > chi2)` for `dof` degrees of freedom: `Q(dof/2, chi2/2)`.
pub fn chi2_tail(chi2: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return contract("chi2_tail needs dof >= 1");
    }
    if !(chi2 >= 0.0) {
        return contract(format!("chi2 must be >= 0, got {chi2}"));
    }
    if chi2 == 0.0 {
        return Ok(1.0);
    }
    if chi2.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(dof as f64 / 2.0, chi2 / 2.0))
}

struct Problem<'a> {
    family: FitFamily,
    points: &'a [FitPoint],
}

impl Problem<'_> {
    /// Closed-form weighted amplitude for fixed `b`.
    fn best_a(&self, b: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for p in self.points {
            let f = self.family.shape(p.n as f64, b);
            let w = p.sigma.powi(-2);
            num += w * p.value * f;
            den += w * f * f;
        }
        num / den
    }

    fn chi2(&self, a: f64, b: f64) -> f64 {
        self.points
            .iter()
            .map(|p| ((p.value - self.family.eval(a, b, p.n as f64)) / p.sigma).powi(2))
            .sum()
    }

    fn profile(&self, b: f64) -> f64 {
        let c = self.chi2(self.best_a(b), b);
        if c.is_finite() {
            c
        } else {
            f64::MAX
        }
    }

    /// Slope of `ln value` against `ln N` (power) or `N` (exponential).
    fn regression_seed(&self) -> f64 {
        let xs: Vec<f64> = self
            .points
            .iter()
            .map(|p| match self.family {
                FitFamily::PowerLaw => (p.n as f64).ln(),
                FitFamily::Exponential => p.n as f64,
            })
            .collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.value.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    fn gauss_newton(&self, mut a: f64, mut b: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.family.b_bounds();
        let mut best = self.chi2(a, b);
        for _ in 0..20 {
            let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for p in self.points {
                let n = p.n as f64;
                let w = p.sigma.powi(-2);
                let r = p.value - self.family.eval(a, b, n);
                let da = self.family.shape(n, b);
                let db = a * self.family.shape_db(n, b);
                jaa += w * da * da;
                jab += w * da * db;
                jbb += w * db * db;
                ga += w * da * r;
                gb += w * db * r;
            }
            let det = jaa * jbb - jab * jab;
            if !(det.abs() > 0.0) {
                break;
            }
            let step_a = (jbb * ga - jab * gb) / det;
            let step_b = (jaa * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, (b + step_b).clamp(lo, hi));
            let c = self.chi2(na, nb);
            if !(c < best) {
                break;
            }
            a = na;
            b = nb;
            best = c;
        }
        (a, b, best)
    }
}

impl CostFunction for Problem<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, b: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.profile(*b))
    }
}

/// Weighted least-squares fit of `family` to `points`; `dof = n - 2`.
pub fn fit(family: FitFamily, points: &[FitPoint]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return contract(format!(
            "a two-parameter fit needs >= 3 points, got {}",
            points.len()
        ));
    }
    for p in points {
        FitPoint::new(p.n, p.value, p.sigma)?;
        if p.n == 0 {
            return contract("N must be >= 1");
        }
    }
    let problem = Problem { family, points };
    let (lo, hi) = family.b_bounds();

    let mut grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let seed = problem.regression_seed();
    if seed.is_finite() && seed > lo && seed < hi {
        grid.push(seed);
        grid.sort_by(f64::total_cmp);
    }
    let values: Vec<f64> = grid.iter().map(|&b| problem.profile(b)).collect();
    let k = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .expect("non-empty grid");
    let (left, right) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);

    let solver = BrentOpt::new(left, right).set_tolerance(1e-12, 1e-14);
    let res = Executor::new(Problem { family, points }, solver)
        .configure(|s| s.max_iters(500))
        .run()
        .map_err(|e| {
            Error::Fit(format!(
                "{} fit: Brent search failed on [{left}, {right}]: {e}",
                family.label()
            ))
        })?;
    let state = res.state();
    let mut b = state.best_param.unwrap_or(grid[k]);
    if !(problem.profile(b) <= values[k]) {
        b = grid[k];
    }
    let (a, b, chi2) = problem.gauss_newton(problem.best_a(b), b);
    if !(chi2.is_finite() && a.is_finite() && a > 0.0) {
        let trace: Vec<String> = grid
            .iter()
            .zip(&values)
            .step_by(24)
            .map(|(b, c)| format!("b={b:.4}:chi2={c:.4e}"))
            .collect();
        return Err(Error::Fit(format!(
            "{} fit did not converge (a = {a}, b = {b}, chi2 = {chi2}); scan {}",
            family.label(),
            trace.join(" ")
        )));
    }
    let dof = points.len() - 2;
    Ok(ScalingFit {
        family,
        a,
        b,
        chi2,
        dof,
        tail_q: chi2_tail(chi2, dof)?,
    })
}

pub fn fit_power_law(points: &[FitPoint]) -> Result<ScalingFit> {
    fit(FitFamily::PowerLaw, points)
}

pub fn fit_exponential(points: &[FitPoint]) -> Result<ScalingFit> {
    fit(FitFamily::Exponential, points)
}

/// One row of the fit report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub noise_type: String,
    pub mean_power: f64,
    pub family: FitFamily,
    pub a: f64,
    pub b: f64,
    pub chi2_fit: f64,
    pub tail_q: f64,
}

impl FitRow {
    pub fn new(noise_type: &str, mean_power: f64, fit: &ScalingFit) -> Self {
        FitRow {
            noise_type: noise_type.to_string(),
            mean_power,
            family: fit.family,
            a: fit.a,
            b: fit.b,
            chi2_fit: fit.chi2,
            tail_q: fit.tail_q,
        }
    }
}

pub fn write_fit_csv<W: Write>(w: W, rows: &[FitRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fit_csv<R: Read>(r: R) -> Result<Vec<FitRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}

/// Fixed-width table with the columns of the fit report.
pub fn format_fit_table(rows: &[FitRow]) -> String {
    let mut s = format!(
        "{:<8} {:>10} {:<6} {:>12} {:>10} {:>10} {:>12}\n",
        "noise", "power", "family", "a", "b", "chi2_fit", "P(chi2>fit)"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<8} {:>10} {:<6} {:>12.6} {:>10.5} {:>10.4} {:>12.7}\n",
            r.noise_type,
            r.mean_power,
            r.family.label(),
            r.a,
            r.b,
            r.chi2_fit,
            r.tail_q
        ));
    }
    s
}
