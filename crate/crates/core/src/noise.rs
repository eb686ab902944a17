//! Square-pulse shot noise.
//!
//! A realization is a sum of square pulses of half-width `tau` whose centers
//! arrive as a Poisson process of rate `n̄` on `(0, T)` and whose heights are
//! Gaussian with variance `sigma²`. With mean power `P̄`, the rate follows
//! from `P̄ = 2 n̄ sigma² tau`. Pulses are clipped to `[0, T]` everywhere:
//! evaluation, power integrals and phase integrals agree on that support.
//!
//! Centers are drawn as exponential inter-arrival gaps, interleaved with the
//! pulse heights, from a single seeded stream. The pulse count is therefore
//! Poisson with mean `n̄ T` and the centers are uniform given the count, and
//! the train for a duration `T` is the prefix of the train for any longer
//! duration from the same seed.

use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::seed::Seed;

/// Resampling attempts before a zero-power realization is reported as an error.
pub const MAX_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Direction(s) along which the noise field fluctuates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
    Z,
    Three,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [
        Polarization::X,
        Polarization::Y,
        Polarization::Z,
        Polarization::Three,
    ];

    pub fn axes(self) -> &'static [Axis] {
        match self {
            Polarization::X => &[Axis::X],
            Polarization::Y => &[Axis::Y],
            Polarization::Z => &[Axis::Z],
            Polarization::Three => &[Axis::X, Axis::Y, Axis::Z],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::X => "x",
            Polarization::Y => "y",
            Polarization::Z => "z",
            Polarization::Three => "three",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Polarization::X),
            "y" => Ok(Polarization::Y),
            "z" => Ok(Polarization::Z),
            "three" | "3" => Ok(Polarization::Three),
            _ => Err(Error::Parse(format!("unknown polarization {s:?}"))),
        }
    }
}

/// How a three-axis realization is brought to the target power.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSplit {
    /// The power summed over the three axes equals `P̄`.
    #[default]
    Total,
    /// Each axis separately carries `P̄`.
    PerAxis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub mean_power: f64,
    pub amp_variance: f64,
    pub pulse_half_width: f64,
    pub polarization: Polarization,
    #[serde(default)]
    pub power_split: PowerSplit,
}

impl NoiseParams {
    pub fn new(
        mean_power: f64,
        amp_variance: f64,
        pulse_half_width: f64,
        polarization: Polarization,
    ) -> Result<Self> {
        let p = NoiseParams {
            mean_power,
            amp_variance,
            pulse_half_width,
            polarization,
            power_split: PowerSplit::Total,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with a given fluctuation rate instead of a mean power.
    pub fn from_rate(
        rate: f64,
        amp_variance: f64,
        pulse_half_width: f64,
        polarization: Polarization,
    ) -> Result<Self> {
        Self::new(
            2.0 * rate * amp_variance * pulse_half_width,
            amp_variance,
            pulse_half_width,
            polarization,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_variance > 0.0 && self.amp_variance.is_finite()) {
            return contract(format!(
                "amp_variance must be > 0, got {}",
                self.amp_variance
            ));
        }
        if !(self.pulse_half_width > 0.0 && self.pulse_half_width.is_finite()) {
            return contract(format!(
                "pulse_half_width must be > 0, got {}",
                self.pulse_half_width
            ));
        }
        if !(self.mean_power >= 0.0 && self.mean_power.is_finite()) {
            return contract(format!("mean_power must be >= 0, got {}", self.mean_power));
        }
        Ok(())
    }

    pub fn mean_rate(&self) -> Result<f64> {
        mean_rate(self)
    }
}

/// Fluctuation rate `n̄ = P̄ / (2 sigma² tau)`.
pub fn mean_rate(params: &NoiseParams) -> Result<f64> {
    params.validate()?;
    Ok(params.mean_power / (2.0 * params.amp_variance * params.pulse_half_width))
}

/// Pulse centers and heights for one axis over `[0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    centers: Vec<f64>,
    amplitudes: Vec<f64>,
    duration: f64,
    half_width: f64,
}

impl PulseTrain {
    pub fn new(
        centers: Vec<f64>,
        amplitudes: Vec<f64>,
        duration: f64,
        half_width: f64,
    ) -> Result<Self> {
        if centers.len() != amplitudes.len() {
            return contract("centers and amplitudes differ in length");
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return contract(format!("duration must be > 0, got {duration}"));
        }
        if !(half_width > 0.0) {
            return contract(format!("half width must be > 0, got {half_width}"));
        }
        if let Some(c) = centers.iter().find(|&&c| !(c > 0.0 && c < duration)) {
            return contract(format!("pulse center {c} outside (0, {duration})"));
        }
        Ok(PulseTrain {
            centers,
            amplitudes,
            duration,
            half_width,
        })
    }

    pub fn empty(duration: f64, half_width: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), duration, half_width)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Copy with every height multiplied by `k`.
    pub fn scaled(&self, k: f64) -> PulseTrain {
        PulseTrain {
            amplitudes: self.amplitudes.iter().map(|x| x * k).collect(),
            ..self.clone()
        }
    }

    fn support(&self, i: usize) -> (f64, f64) {
        let c = self.centers[i];
        (
            (c - self.half_width).max(0.0),
            (c + self.half_width).min(self.duration),
        )
    }

    /// Field value at `t`; pulse supports are open intervals.
    pub fn value(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for i in 0..self.len() {
            let (lo, hi) = self.support(i);
            if t > lo && t < hi {
                v += self.amplitudes[i];
            }
        }
        v
    }

    /// Clipped pulse edges lying strictly inside `(0, T)`.
    pub fn edges(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        for i in 0..self.len() {
            let (lo, hi) = self.support(i);
            for e in [lo, hi] {
                if e > 0.0 && e < self.duration {
                    out.push(e);
                }
            }
        }
        out
    }

    /// `∫₀ᵀ N(t) dt`, exact.
    pub fn integral(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (lo, hi) = self.support(i);
                self.amplitudes[i] * (hi - lo)
            })
            .sum()
    }

    /// Piecewise-constant form of the field on `[0, T]`.
    pub fn to_piecewise(&self) -> Piecewise {
        let mut knots = self.edges();
        knots.push(0.0);
        knots.push(self.duration);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        // Midpoint evaluation keeps each level exact (no running-sum drift).
        let values = knots
            .windows(2)
            .map(|w| self.value(0.5 * (w[0] + w[1])))
            .collect();
        Piecewise { knots, values }
    }

    /// `∫₀ᵀ N²(t) dt`, exact over the clipped breakpoints.
    pub fn power_integral(&self) -> f64 {
        self.to_piecewise().integral_of_square()
    }
}

/// A piecewise-constant function on `[knots[0], knots[last]]`.
#[derive(Clone, Debug)]
pub struct Piecewise {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Piecewise {
    pub fn integral_of_square(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| v * v * (w[1] - w[0]))
            .sum()
    }

    fn at(&self, t: f64) -> f64 {
        // Index of the interval containing t (right-continuous at knots).
        let k = self.knots.partition_point(|&x| x <= t);
        if k == 0 || k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// `∫_lo^hi f(t) g(t - lag) dt`, exact.
    pub fn lagged_product_integral(&self, other: &Piecewise, lag: f64, lo: f64, hi: f64) -> f64 {
        let mut cuts: Vec<f64> = self
            .knots
            .iter()
            .copied()
            .chain(other.knots.iter().map(|k| k + lag))
            .filter(|&t| t > lo && t < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                self.at(m) * other.at(m - lag) * (w[1] - w[0])
            })
            .sum()
    }
}

/// Draws one raw (un-normalized) pulse train over `(0, duration)`.
pub fn sample_train(params: &NoiseParams, duration: f64, seed: Seed) -> Result<PulseTrain> {
    let rate = mean_rate(params)?;
    if !(duration > 0.0 && duration.is_finite()) {
        return contract(format!("duration must be > 0, got {duration}"));
    }
    let mut centers = Vec::new();
    let mut amplitudes = Vec::new();
    if rate > 0.0 {
        let mut rng = seed.rng();
        let gap = Exp::new(rate).map_err(|e| Error::Contract(e.to_string()))?;
        let height = Normal::new(0.0, params.amp_variance.sqrt())
            .map_err(|e| Error::Contract(e.to_string()))?;
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            let x = height.sample(&mut rng);
            if t >= duration {
                break;
            }
            if t > 0.0 {
                centers.push(t);
                amplitudes.push(x);
            }
        }
    }
    PulseTrain::new(centers, amplitudes, duration, params.pulse_half_width)
}

/// Raw mean power `(1/T) Σ_axes ∫₀ᵀ N²(t) dt` of a set of trains.
pub fn raw_power(trains: &[PulseTrain], duration: f64) -> Result<f64> {
    if !(duration > 0.0) {
        return contract("duration must be > 0");
    }
    Ok(trains.iter().map(PulseTrain::power_integral).sum::<f64>() / duration)
}

/// One axis of a realization, with the power-normalization factor applied
/// on evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisTrain {
    pub axis: Axis,
    pub scale: f64,
    pub train: PulseTrain,
}

/// A power-normalized noise field on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub params: NoiseParams,
    pub duration: f64,
    pub trains: Vec<AxisTrain>,
    pub seed: Seed,
    /// Zero-power draws discarded before this one.
    pub resamples: usize,
}

impl NoiseRealization {
    /// Field vector `(N_x, N_y, N_z)` at `t`.
    pub fn evaluate(&self, t: f64) -> Result<[f64; 3]> {
        if !(0.0..=self.duration).contains(&t) {
            return contract(format!("t = {t} outside [0, {}]", self.duration));
        }
        Ok(self.field(t))
    }

    pub(crate) fn field(&self, t: f64) -> [f64; 3] {
        let mut f = [0.0; 3];
        for at in &self.trains {
            f[at.axis.index()] += at.scale * at.train.value(t);
        }
        f
    }

    /// Mean power of the scaled field over `[0, T]`.
    pub fn power(&self) -> f64 {
        self.trains
            .iter()
            .map(|at| at.scale * at.scale * at.train.power_integral())
            .sum::<f64>()
            / self.duration
    }

    /// Sorted breakpoints of the field, including `0` and `T`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.trains.iter().flat_map(|at| at.train.edges()).collect();
        b.push(0.0);
        b.push(self.duration);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Scaled copy of the raw trains, one per active axis.
    pub fn scaled_trains(&self) -> Vec<PulseTrain> {
        self.trains
            .iter()
            .map(|at| at.train.scaled(at.scale))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rescales raw trains to the target mean power.
///
/// Fails with [`Error::ZeroPower`] when the raw field (or, with
/// [`PowerSplit::PerAxis`], any axis) carries no power.
pub fn normalize(
    trains: Vec<(Axis, PulseTrain)>,
    params: &NoiseParams,
    duration: f64,
    seed: Seed,
) -> Result<NoiseRealization> {
    params.validate()?;
    if !(params.mean_power > 0.0) {
        return contract("normalization needs mean_power > 0");
    }
    if trains
        .iter()
        .any(|(_, t)| (t.duration() - duration).abs() > 1e-12 * duration)
    {
        return contract("train duration differs from the realization duration");
    }
    let per_axis: Vec<f64> = trains
        .iter()
        .map(|(_, t)| t.power_integral() / duration)
        .collect();
    let scales: Vec<f64> = match params.power_split {
        PowerSplit::Total => {
            let total: f64 = per_axis.iter().sum();
            if !(total > 0.0) {
                return Err(Error::ZeroPower { attempts: 0 });
            }
            vec![(params.mean_power / total).sqrt(); trains.len()]
        }
        PowerSplit::PerAxis => {
            if per_axis.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::ZeroPower { attempts: 0 });
            }
            per_axis
                .iter()
                .map(|p| (params.mean_power / p).sqrt())
                .collect()
        }
    };
    Ok(NoiseRealization {
        params: *params,
        duration,
        trains: trains
            .into_iter()
            .zip(scales)
            .map(|((axis, train), scale)| AxisTrain { axis, scale, train })
            .collect(),
        seed,
        resamples: 0,
    })
}

/// Raw trains for every active axis of a polarization. Single-axis
/// polarizations all use the first sub-stream, so x, y and z realizations
/// from one seed share their pulse sequence.
pub fn sample_axes(
    params: &NoiseParams,
    duration: f64,
    seed: Seed,
) -> Result<Vec<(Axis, PulseTrain)>> {
    params
        .polarization
        .axes()
        .iter()
        .enumerate()
        .map(|(k, &axis)| {
            Ok((
                axis,
                sample_train(params, duration, seed.derive("axis", k as u64))?,
            ))
        })
        .collect()
}

/// Samples and normalizes a realization, redrawing zero-power samples from
/// derived sub-seeds up to [`MAX_RESAMPLES`] times.
pub fn realize(params: &NoiseParams, duration: f64, seed: Seed) -> Result<NoiseRealization> {
    for attempt in 0..=MAX_RESAMPLES {
        let sub = if attempt == 0 {
            seed
        } else {
            seed.derive("resample", attempt as u64)
        };
        let trains = sample_axes(params, duration, sub)?;
        match normalize(trains, params, duration, seed) {
            Ok(mut r) => {
                r.resamples = attempt;
                return Ok(r);
            }
            Err(Error::ZeroPower { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroPower {
        attempts: MAX_RESAMPLES,
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_err
    }
}

/// Ensemble estimate of `⟨N(t) N(t - lag)⟩` from raw trains.
///
/// Each train is time-averaged over `[lag + tau, T - tau]`, where pulses
/// centered anywhere on the real line would contribute; the clipped
/// boundary layers are excluded so the estimate is unbiased for the
/// stationary process.
pub fn autocorrelation(trains: &[PulseTrain], lag: f64) -> Result<Estimate> {
    if trains.is_empty() {
        return contract("autocorrelation needs at least one train");
    }
    let lag = lag.abs();
    let per_train: Vec<f64> = trains
        .iter()
        .map(|t| {
            let lo = lag + t.half_width();
            let hi = t.duration() - t.half_width();
            if !(hi > lo) {
                return contract(format!(
                    "lag {lag} leaves no interior window in duration {}",
                    t.duration()
                ));
            }
            let pw = t.to_piecewise();
            Ok(pw.lagged_product_integral(&pw, lag, lo, hi) / (hi - lo))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&per_train))
}

/// Ensemble estimate of `⟨N_a(t) N_b(t)⟩` between paired trains.
pub fn cross_correlation(a: &[PulseTrain], b: &[PulseTrain]) -> Result<Estimate> {
    if a.len() != b.len() || a.is_empty() {
        return contract("cross correlation needs equal, non-empty ensembles");
    }
    let xs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let lo = x.half_width();
            let hi = x.duration() - x.half_width();
            x.to_piecewise()
                .lagged_product_integral(&y.to_piecewise(), 0.0, lo, hi)
                / (hi - lo)
        })
        .collect();
    Ok(Estimate::from_samples(&xs))
}

/// Expected raw power of one clipped train: `n̄ sigma² (2 tau - tau²/T)`
/// for `T >= 2 tau`.
pub fn expected_raw_power(params: &NoiseParams, duration: f64) -> Result<f64> {
    let rate = mean_rate(params)?;
    let tau = params.pulse_half_width;
    if duration < 2.0 * tau {
        return contract("expected_raw_power needs duration >= 2 tau");
    }
    Ok(rate * params.amp_variance * (2.0 * tau - tau * tau / duration))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, sigma: f64, tau: f64, pol: Polarization) -> NoiseParams {
        NoiseParams::new(p, sigma * sigma, tau, pol).unwrap()
    }

    #[test]
    fn mean_rate_examples() {
        let r = mean_rate(&params(0.005, 0.2, 1.0, Polarization::X)).unwrap();
        assert!((r - 0.0625).abs() < 1e-15);
        let r = mean_rate(&params(0.001, 0.2, 1.0, Polarization::X)).unwrap();
        assert!((r - 0.0125).abs() < 1e-15);
        assert_eq!(
            mean_rate(&params(0.0, 0.2, 1.0, Polarization::X)).unwrap(),
            0.0
        );
        assert!(NoiseParams::new(0.1, 0.0, 1.0, Polarization::X).is_err());
        assert!(NoiseParams::new(0.1, 0.04, -1.0, Polarization::X).is_err());
    }

    #[test]
    fn zero_power_gives_empty_train() {
        let t = sample_train(&params(0.0, 0.2, 1.0, Polarization::X), 50.0, Seed(3)).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_nested() {
        let p = params(0.05, 0.2, 1.0, Polarization::X);
        let a = sample_train(&p, 100.0, Seed(9)).unwrap();
        assert_eq!(a, sample_train(&p, 100.0, Seed(9)).unwrap());
        let short = sample_train(&p, 40.0, Seed(9)).unwrap();
        let k = short.len();
        assert_eq!(&a.centers()[..k], short.centers());
        assert_eq!(&a.amplitudes()[..k], short.amplitudes());
        assert!(a.centers().iter().all(|&c| c > 0.0 && c < 100.0));
    }

    #[test]
    fn square_pulse_geometry() {
        let t = PulseTrain::new(vec![5.0], vec![0.3], 10.0, 1.0).unwrap();
        assert_eq!(t.value(5.5), 0.3);
        assert_eq!(t.value(7.5), 0.0);
        let two = PulseTrain::new(vec![5.0, 5.5], vec![0.3, -0.1], 10.0, 1.0).unwrap();
        assert!((two.value(5.2) - 0.2).abs() < 1e-15);
        assert!((two.value(4.2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn power_closed_forms() {
        let (x, tau, big_t) = (0.7, 1.5, 20.0);
        let one = PulseTrain::new(vec![8.0], vec![x], big_t, tau).unwrap();
        let p = raw_power(std::slice::from_ref(&one), big_t).unwrap();
        assert!((p - 2.0 * tau * x * x / big_t).abs() < 1e-15);

        let two = PulseTrain::new(vec![4.0, 14.0], vec![x, -0.2], big_t, tau).unwrap();
        let expect = 2.0 * tau * (x * x + 0.04) / big_t;
        assert!((raw_power(&[two], big_t).unwrap() - expect).abs() < 1e-15);

        // Overlap [4, 5]: (0.7 + 0.2)^2 over width 1, single heights elsewhere.
        let lap = PulseTrain::new(vec![4.0, 5.0], vec![0.7, 0.2], big_t, 0.5 + 0.5).unwrap();
        let expect = (0.49 * 1.0 + 0.81 * 1.0 + 0.04 * 1.0) / big_t;
        assert!((raw_power(&[lap], big_t).unwrap() - expect).abs() < 1e-15);

        // Clipped at the left boundary: support [0, 0.5].
        let clip = PulseTrain::new(vec![0.2], vec![1.0], big_t, 0.3).unwrap();
        assert!((clip.power_integral() - 0.5).abs() < 1e-15);
        assert!((clip.integral() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_hits_target_power() {
        for pol in Polarization::ALL {
            let p = params(0.003, 0.2, 1.0, pol);
            for k in 0..20 {
                let r = realize(&p, 30.0, Seed(k)).unwrap();
                let rel = (r.power() - 0.003).abs() / 0.003;
                assert!(rel < 1e-12, "{pol:?} seed {k}: rel {rel:e}");
                let direct = raw_power(&r.scaled_trains(), 30.0).unwrap();
                assert!((direct - 0.003).abs() / 0.003 < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_already_at_power_has_unit_scale() {
        let (x, tau, big_t) = (0.5, 1.0, 10.0);
        let target = 2.0 * tau * x * x / big_t;
        let p = NoiseParams::new(target, 0.04, tau, Polarization::Z).unwrap();
        let t = PulseTrain::new(vec![5.0], vec![x], big_t, tau).unwrap();
        let r = normalize(vec![(Axis::Z, t)], &p, big_t, Seed(0)).unwrap();
        assert!((r.trains[0].scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_power_is_resampled_or_rejected() {
        let p = params(0.003, 0.2, 1.0, Polarization::X);
        let empty = PulseTrain::empty(5.0, 1.0).unwrap();
        assert!(matches!(
            normalize(vec![(Axis::X, empty)], &p, 5.0, Seed(0)),
            Err(Error::ZeroPower { .. })
        ));
        // n̄ T = 0.0375 * 2: most first draws are empty, resampling recovers.
        let r = realize(&p, 2.0, Seed(11)).unwrap();
        assert!(r.resamples > 0 || !r.trains[0].train.is_empty());
        assert!((r.power() - 0.003).abs() / 0.003 < 1e-12);
    }

    #[test]
    fn three_type_axes_and_split() {
        let mut p = params(0.005, 0.2, 1.0, Polarization::Three);
        let r = realize(&p, 200.0, Seed(4)).unwrap();
        assert_eq!(r.trains.len(), 3);
        assert_ne!(r.trains[0].train, r.trains[1].train);
        p.power_split = PowerSplit::PerAxis;
        let r = realize(&p, 200.0, Seed(4)).unwrap();
        for at in &r.trains {
            let ax = at.scale * at.scale * at.train.power_integral() / 200.0;
            assert!((ax - 0.005).abs() / 0.005 < 1e-12);
        }
    }

    #[test]
    fn single_axis_polarizations_share_pulses() {
        let x = realize(&params(0.005, 0.2, 1.0, Polarization::X), 50.0, Seed(8)).unwrap();
        let y = realize(&params(0.005, 0.2, 1.0, Polarization::Y), 50.0, Seed(8)).unwrap();
        assert_eq!(x.trains[0].train, y.trains[0].train);
        assert_eq!(x.trains[0].axis, Axis::X);
        assert_eq!(y.trains[0].axis, Axis::Y);
        let fx = x
            .evaluate(x.trains[0].train.centers().first().copied().unwrap_or(1.0))
            .unwrap();
        assert_eq!(fx[1], 0.0);
        assert_eq!(fx[2], 0.0);
    }

    #[test]
    fn evaluate_bounds() {
        let r = realize(&params(0.005, 0.2, 1.0, Polarization::X), 10.0, Seed(1)).unwrap();
        assert!(r.evaluate(-0.1).is_err());
        assert!(r.evaluate(10.1).is_err());
        assert!(r.evaluate(10.0).is_ok());
    }

    #[test]
    fn breakpoints_bracket_constant_segments() {
        let r = realize(&params(0.05, 0.2, 1.0, Polarization::Three), 40.0, Seed(2)).unwrap();
        let b = r.breakpoints();
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 40.0);
        for w in b.windows(2) {
            let a = r.field(w[0] + 0.25 * (w[1] - w[0]));
            let c = r.field(w[0] + 0.75 * (w[1] - w[0]));
            assert_eq!(a, c);
        }
    }

    #[test]
    fn lagged_product_of_single_pulse_is_overlap() {
        let t = PulseTrain::new(vec![10.0], vec![2.0], 20.0, 1.0).unwrap();
        let pw = t.to_piecewise();
        // Overlap of [9, 11] with its shift by 0.5 is 1.5.
        let v = pw.lagged_product_integral(&pw, 0.5, 0.0, 20.0);
        assert!((v - 4.0 * 1.5).abs() < 1e-14);
        assert_eq!(pw.lagged_product_integral(&pw, 3.0, 0.0, 20.0), 0.0);
    }
}
