//! Single attempts and the runtime hunt.
//!
//! A hunt searches for a run time `T*` whose success probability falls in
//! `[window_low, window_high]`. The search grows (or shrinks) `T`
//! geometrically until the window is bracketed, then interpolates inside
//! the bracket with a bisection fallback.
//!
//! Noisy `P_s(T)` is only piecewise continuous: a regenerated realization
//! gains a pulse, or switches resample draw, at isolated `T`. When the
//! bracket shrinks onto such a jump the hunt restarts from the far side of
//! it and keeps growing `T`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ec3::{Bitstring, Ec3Instance};
use crate::engine::{
    build_spec, evolve, DriverConvention, EvolveStats, HamiltonianSpec, StateVector, StepControl,
};
use crate::error::{contract, Error, Result};
use crate::noise::{realize, NoiseParams, NoiseRealization, Polarization};
use crate::seed::Seed;

/// `|⟨s|ψ⟩|²`.
pub fn success_probability(state: &StateVector, solution: &Bitstring) -> Result<f64> {
    if solution.len() != state.n_bits() {
        return contract(format!(
            "solution has {} bits, state has {}",
            solution.len(),
            state.n_bits()
        ));
    }
    Ok(state.probability(solution.index()).clamp(0.0, 1.0))
}

/// Engine parameters shared by every run in a hunt or campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    /// Zeeman coupling `γ`.
    pub coupling: f64,
    pub driver: DriverConvention,
    pub step: StepControl,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            coupling: 1.0,
            driver: DriverConvention::default(),
            step: StepControl::default(),
        }
    }
}

fn solution_of(instance: &Ec3Instance) -> Result<Bitstring> {
    instance
        .solution()
        .ok_or_else(|| Error::Contract("instance has no recorded solution".into()))
}

fn run_spec(
    spec: &HamiltonianSpec,
    solution: &Bitstring,
    noise: Option<&NoiseRealization>,
    step: &StepControl,
) -> Result<(f64, EvolveStats)> {
    let (psi, stats) = evolve(spec, noise, step)?;
    Ok((success_probability(&psi, solution)?, stats))
}

/// One attempt: evolve for time `t` and read off the solution probability.
pub fn run_once(
    instance: &Ec3Instance,
    noise: Option<&NoiseRealization>,
    t: f64,
    engine: &EngineSettings,
) -> Result<(f64, EvolveStats)> {
    let solution = solution_of(instance)?;
    let spec = build_spec(instance, engine.coupling, t)?.with_driver(engine.driver);
    run_spec(&spec, &solution, noise, &engine.step)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuntConfig {
    pub window_low: f64,
    pub window_high: f64,
    /// First probe. Campaigns replace it with a prediction from smaller N.
    pub initial_guess: f64,
    /// Factor applied to `T` while the window is not yet bracketed.
    pub growth: f64,
    pub max_integrations: usize,
    /// Until some probe has exceeded the window, probes never go past this
    /// multiple of `initial_guess`. Under noise `P_s` can stay below the
    /// window at every `T`, and unbounded growth would spend the remaining
    /// budget on ever longer integrations.
    #[serde(default = "default_max_time_factor")]
    pub max_time_factor: f64,
    pub engine: EngineSettings,
}

fn default_max_time_factor() -> f64 {
    64.0
}

impl Default for HuntConfig {
    fn default() -> Self {
        HuntConfig {
            window_low: 0.12,
            window_high: 0.13,
            initial_guess: 1.0,
            growth: 1.5,
            max_integrations: 40,
            max_time_factor: default_max_time_factor(),
            engine: EngineSettings::default(),
        }
    }
}

impl HuntConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.window_low && self.window_low < self.window_high && self.window_high < 1.0)
        {
            return contract(format!(
                "window [{}, {}] must satisfy 0 < low < high < 1",
                self.window_low, self.window_high
            ));
        }
        if !(self.initial_guess > 0.0 && self.initial_guess.is_finite()) {
            return contract(format!(
                "initial guess must be > 0, got {}",
                self.initial_guess
            ));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return contract(format!("growth factor must be > 1, got {}", self.growth));
        }
        if !(self.max_time_factor >= 1.0) {
            return contract(format!(
                "max_time_factor must be >= 1, got {}",
                self.max_time_factor
            ));
        }
        if self.max_integrations == 0 {
            return contract("max_integrations must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuntProbe {
    pub t: f64,
    pub p_success: f64,
}

/// Where a run's randomness came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: Seed,
    pub instance: Seed,
    /// Noise sub-seed; absent for noiseless runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<Seed>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDescriptor {
    Noiseless,
    Noisy {
        polarization: Polarization,
        mean_power: f64,
        amp_variance: f64,
        pulse_half_width: f64,
        realization: usize,
    },
}

impl NoiseDescriptor {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseDescriptor::Noiseless => "none",
            NoiseDescriptor::Noisy { polarization, .. } => polarization.label(),
        }
    }
}

/// Outcome of one successful hunt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n_bits: usize,
    pub instance: usize,
    pub noise: NoiseDescriptor,
    pub t_star: f64,
    pub p_success: f64,
    pub integrations: usize,
    pub trace: Vec<HuntProbe>,
    pub engine: EngineSettings,
    pub seeds: SeedLineage,
}

impl RunRecord {
    pub fn realization(&self) -> Option<usize> {
        match self.noise {
            NoiseDescriptor::Noiseless => None,
            NoiseDescriptor::Noisy { realization, .. } => Some(realization),
        }
    }
}

pub fn write_records_jsonl<W: Write>(mut w: W, records: &[RunRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records_jsonl<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Relative bracket width below which the bracket is taken to straddle a
/// jump of `P_s` rather than a crossing. Ends this close that span the whole
/// window would need `dP_s/dln T >= 10`; measured landscapes stay below ~3.
const JUMP_WIDTH: f64 = 1e-3;

/// Unbracketed step factors below this give up on local refinement.
const MIN_STEP: f64 = 1.01;

/// The hunt's next probe given the current bracket state.
///
/// `below` holds probes with `P_s < low`, `above` with `P_s > high`. Once
/// both exist the window is crossed somewhere between them if `P_s` is
/// continuous there, whatever their order.
///
/// Before that, steps of `step` move away from the probe closest to the
/// window. Noisy `P_s(T)` oscillates on scales shorter than one growth step,
/// so a step that lands further from the window is retried from the anchor
/// with the square root of the factor. When that is exhausted the search
/// turns round from the opposite end of the probed range, refining the same
/// way, and after that fills the gaps between probes, widest and most
/// promising first.
struct Bracket {
    /// Every probe since the bracket was created, with its side.
    probes: Vec<(HuntProbe, bool)>,
    below: Option<HuntProbe>,
    above: Option<HuntProbe>,
    last_side_below: Option<bool>,
    same_side_streak: usize,
    /// Set after escaping a jump: unbracketed probes only move up.
    upward: bool,
    growth: f64,
    step: f64,
    /// Searching against the expected direction of the crossing.
    reversed: bool,
    refine: bool,
    /// Reversed and gap-filling probes stay above this.
    floor: f64,
}

impl Bracket {
    fn new(growth: f64, floor: f64) -> Self {
        Bracket {
            probes: Vec::new(),
            below: None,
            above: None,
            last_side_below: None,
            same_side_streak: 0,
            upward: false,
            growth,
            step: growth,
            reversed: false,
            refine: true,
            floor,
        }
    }

    /// A fresh bracket holding only the upper end of a collapsed one.
    fn escape(&self) -> Option<Bracket> {
        let (b, a) = (self.below?, self.above?);
        let (lo, hi) = if b.t < a.t { (b, a) } else { (a, b) };
        if hi.t - lo.t > JUMP_WIDTH * hi.t {
            return None;
        }
        let hi_below = hi.t == b.t;
        Some(Bracket {
            probes: vec![(hi, hi_below)],
            below: hi_below.then_some(hi),
            above: (!hi_below).then_some(hi),
            last_side_below: Some(hi_below),
            upward: true,
            ..Bracket::new(self.growth, self.floor)
        })
    }

    /// Unbracketed search direction for an anchor on the given side.
    fn moves_up(&self, is_below: bool) -> bool {
        if self.upward && !is_below {
            true
        } else {
            is_below != self.reversed
        }
    }

    fn record(&mut self, probe: HuntProbe, is_below: bool) {
        self.probes.push((probe, is_below));
        let (anchor, other) = if is_below {
            (self.below, self.above)
        } else {
            (self.above, self.below)
        };
        let mut new_anchor = probe;
        match (anchor, other) {
            // Climbing from above after an escape moves away from the
            // crossing by design; only steps towards it are refined.
            (Some(a), None) if self.refine && !(self.upward && !is_below) => {
                let further = if is_below {
                    probe.p_success < a.p_success
                } else {
                    probe.p_success > a.p_success
                };
                if further {
                    self.step = self.step.sqrt();
                    new_anchor = a;
                    if self.step < MIN_STEP {
                        self.step = self.growth;
                        if self.reversed {
                            self.refine = false;
                        }
                        self.reversed = !self.reversed;
                        new_anchor = self.outermost(self.moves_up(is_below));
                    }
                }
            }
            // First crossing: pair with the nearest probe on the other side.
            (_, Some(_)) if self.below.is_none() || self.above.is_none() => {
                let nearest = self
                    .probes
                    .iter()
                    .filter(|(_, side)| *side != is_below)
                    .map(|(p, _)| *p)
                    .min_by(|x, y| (x.t - probe.t).abs().total_cmp(&(y.t - probe.t).abs()));
                if is_below {
                    self.above = nearest;
                } else {
                    self.below = nearest;
                }
            }
            _ => {}
        }
        if is_below {
            self.below = Some(new_anchor);
        } else {
            self.above = Some(new_anchor);
        }
        if self.refine
            && self.reversed
            && !self.moves_up(is_below)
            && new_anchor.t / self.step < self.floor
        {
            self.refine = false;
        }
        if self.last_side_below == Some(is_below) {
            self.same_side_streak += 1;
        } else {
            self.same_side_streak = 0;
        }
        self.last_side_below = Some(is_below);
    }

    /// The probe furthest along the given direction.
    fn outermost(&self, up: bool) -> HuntProbe {
        let key = |p: &HuntProbe| if up { p.t } else { -p.t };
        self.probes
            .iter()
            .map(|(p, _)| *p)
            .max_by(|x, y| key(x).total_cmp(&key(y)))
            .expect("at least one probe")
    }

    /// Unbracketed fallback: the geometric midpoint of the gap between
    /// neighbouring probes (or a growth step past either end) that scores
    /// highest on log-width times the larger `P_s` at its ends.
    fn fill_gap(&self, below_window: bool) -> f64 {
        let mut sorted: Vec<HuntProbe> = self.probes.iter().map(|(p, _)| *p).collect();
        sorted.sort_by(|x, y| x.t.total_cmp(&y.t));
        // Below the window higher P_s is closer; above it, lower is.
        let promise = |p: &HuntProbe| {
            if below_window {
                p.p_success
            } else {
                1.0 - p.p_success
            }
        };
        let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
        let ln_g = self.growth.ln();
        let mut best = (f64::NEG_INFINITY, first.t / self.growth);
        if first.t / self.growth >= self.floor {
            best.0 = ln_g * promise(&first);
        }
        let upper = (ln_g * promise(&last), last.t * self.growth);
        if upper.0 > best.0 {
            best = upper;
        }
        for w in sorted.windows(2) {
            let score = (w[1].t / w[0].t).ln() * promise(&w[0]).max(promise(&w[1]));
            if score > best.0 {
                best = (score, (w[0].t * w[1].t).sqrt());
            }
        }
        best.1
    }

    fn next(&self, target: f64) -> f64 {
        match (self.below, self.above) {
            (Some(b), None) | (None, Some(b)) => {
                let is_below = self.above.is_none();
                if !self.refine {
                    self.fill_gap(is_below)
                } else if self.moves_up(is_below) {
                    b.t * self.step
                } else {
                    b.t / self.step
                }
            }
            (Some(b), Some(a)) => {
                let (lo, hi) = if b.t < a.t { (b.t, a.t) } else { (a.t, b.t) };
                let mid = 0.5 * (lo + hi);
                if self.same_side_streak >= 1 {
                    return mid;
                }
                let frac = (target - b.p_success) / (a.p_success - b.p_success);
                let t = b.t + frac * (a.t - b.t);
                let margin = 0.05 * (hi - lo);
                if t.is_finite() {
                    t.clamp(lo + margin, hi - margin)
                } else {
                    mid
                }
            }
            (None, None) => unreachable!("bracket queried before the first probe"),
        }
    }
}

/// Hunts for `T*` on one instance, optionally under one noise realization.
///
/// Noisy probes regenerate the realization from `seeds.realization` with
/// duration equal to the probed `T`.
pub fn hunt_runtime(
    instance: &Ec3Instance,
    noise: Option<&NoiseParams>,
    instance_index: usize,
    realization_index: usize,
    config: &HuntConfig,
    seeds: &SeedLineage,
) -> Result<RunRecord> {
    config.validate()?;
    let solution = solution_of(instance)?;
    let noise_seed = match (noise, seeds.realization) {
        (Some(p), Some(s)) => {
            p.validate()?;
            Some(s)
        }
        (Some(_), None) => return contract("noisy hunt needs a realization seed"),
        (None, _) => None,
    };
    let base = build_spec(instance, config.engine.coupling, config.initial_guess)?
        .with_driver(config.engine.driver);

    let probe = |t: f64| -> Result<f64> {
        let spec = base.with_total_time(t)?;
        let realization = match (noise, noise_seed) {
            (Some(p), Some(s)) => Some(realize(p, t, s)?),
            _ => None,
        };
        Ok(run_spec(&spec, &solution, realization.as_ref(), &config.engine.step)?.0)
    };

    let target = 0.5 * (config.window_low + config.window_high);
    let mut trace = Vec::new();
    // Very short runs hold almost no pulses and realizations there may be
    // impossible to draw; exploration below the first probe is bounded.
    let mut bracket = Bracket::new(
        config.growth,
        config.initial_guess / (config.growth * config.growth),
    );
    let mut t = config.initial_guess;
    // Refinement can revisit a probed T; those cost no integration, and the
    // step count bounds the loop regardless.
    let mut steps = 0;
    while trace.len() < config.max_integrations && steps < 4 * config.max_integrations {
        steps += 1;
        if let Some(&hp) = trace
            .iter()
            .find(|q: &&HuntProbe| (q.t - t).abs() <= 1e-12 * t)
        {
            bracket.record(hp, hp.p_success < config.window_low);
            t = bracket.next(target);
            continue;
        }
        let p = probe(t)?;
        let hp = HuntProbe { t, p_success: p };
        trace.push(hp);
        if (config.window_low..=config.window_high).contains(&p) {
            return Ok(RunRecord {
                n_bits: instance.n_bits(),
                instance: instance_index,
                noise: match noise {
                    None => NoiseDescriptor::Noiseless,
                    Some(np) => NoiseDescriptor::Noisy {
                        polarization: np.polarization,
                        mean_power: np.mean_power,
                        amp_variance: np.amp_variance,
                        pulse_half_width: np.pulse_half_width,
                        realization: realization_index,
                    },
                },
                t_star: t,
                p_success: p,
                integrations: trace.len(),
                trace,
                engine: config.engine,
                seeds: *seeds,
            });
        }
        bracket.record(hp, p < config.window_low);
        if let Some(fresh) = bracket.escape() {
            bracket = fresh;
        }
        let next = bracket.next(target);
        if !(next > 0.0 && next.is_finite())
            || (next - t).abs() <= 1e-12 * t
            || (next > config.max_time_factor * config.initial_guess
                && trace.iter().all(|p| p.p_success < config.window_low))
        {
            break;
        }
        t = next;
    }
    Err(Error::HuntFailed {
        integrations: trace.len(),
        trace,
    })
}
