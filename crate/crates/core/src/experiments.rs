//! Campaigns: hunts over instance ensembles, pooled medians, archives.
//!
//! Seed lineage: `master -> ("n", N) -> ("instance", i) -> ("realization", j)`.
//! Instance seeds do not depend on the noise settings, so every campaign
//! with the same master seed sees the same instances, and realization `j`
//! of instance `i` uses the same pulse stream under every polarization.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::ec3::{generate_usa_instance, write_instances_jsonl, Ec3Instance};
use crate::error::{contract, Error, Result};
use crate::fits::csv_error;
use crate::noise::NoiseParams;
use crate::protocol::{hunt_runtime, write_records_jsonl, HuntConfig, RunRecord, SeedLineage};
use crate::seed::Seed;

/// Below this many samples the order-statistic CI cannot reach 95%.
pub const MIN_CI_SAMPLES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub n_bits: usize,
    pub n_samples: usize,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The CI is the full sample range because `n_samples < 6`.
    pub degenerate: bool,
}

/// 1-based rank `l` of the lower CI bound: the largest `l` with
/// `P(Bin(n, 1/2) <= l - 1) <= 0.025`.
pub fn ci_rank(n: usize) -> usize {
    if n < MIN_CI_SAMPLES {
        return 1;
    }
    let bin = Binomial::new(0.5, n as u64).expect("valid binomial");
    let mut l = 1;
    while bin.cdf(l as u64) <= 0.025 {
        l += 1;
    }
    l
}

/// Sample median with a distribution-free 95% interval from binomial order
/// statistics.
pub fn median_with_ci(n_bits: usize, samples: &[f64]) -> Result<MedianEstimate> {
    if samples.is_empty() {
        return contract("median of an empty sample");
    }
    if samples.iter().any(|x| x.is_nan()) {
        return contract("NaN in median sample");
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let median = if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    };
    let l = ci_rank(n);
    Ok(MedianEstimate {
        n_bits,
        n_samples: n,
        median,
        ci_low: x[l - 1],
        ci_high: x[n - l],
        degenerate: n < MIN_CI_SAMPLES,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub instances_per_n: usize,
    /// `0` for noiseless campaigns.
    pub realizations_per_instance: usize,
    pub noise: Option<NoiseParams>,
    pub master_seed: Seed,
    /// Worker threads; `0` lets the pool pick.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub hunt: HuntConfig,
    /// Campaign aborts when a larger fraction of hunts at one N fails.
    pub max_failure_fraction: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n_min: 7,
            n_max: 14,
            instances_per_n: 75,
            realizations_per_instance: 0,
            noise: None,
            master_seed: Seed(0),
            workers: 0,
            output_dir: None,
            hunt: HuntConfig::default(),
            max_failure_fraction: 0.05,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 4 || self.n_min > self.n_max {
            return contract(format!(
                "N range {}..{} invalid (need 4 <= lo <= hi)",
                self.n_min, self.n_max
            ));
        }
        if self.instances_per_n == 0 {
            return contract("instances_per_n must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return contract("max_failure_fraction must lie in [0, 1]");
        }
        if let Some(p) = &self.noise {
            p.validate()?;
        }
        self.hunt.validate()
    }

    /// Archive label: `none`, or polarization and power such as `x_p0.005`.
    pub fn label(&self) -> String {
        match &self.noise {
            None => "none".to_string(),
            Some(p) => format!("{}_p{}", p.polarization.label(), p.mean_power),
        }
    }

    fn noise_type(&self) -> &'static str {
        self.noise.map_or("none", |p| p.polarization.label())
    }

    fn mean_power(&self) -> f64 {
        self.noise.map_or(0.0, |p| p.mean_power)
    }
}

pub fn instance_seed(master: Seed, n_bits: usize, index: usize) -> Seed {
    master
        .derive("n", n_bits as u64)
        .derive("instance", index as u64)
}

pub fn realization_seed(instance: Seed, index: usize) -> Seed {
    instance.derive("realization", index as u64)
}

/// The campaign's instance set at one N; independent of noise settings.
pub fn campaign_instances(master: Seed, n_bits: usize, count: usize) -> Result<Vec<Ec3Instance>> {
    (0..count)
        .map(|i| generate_usa_instance(n_bits, instance_seed(master, n_bits, i)))
        .collect()
}

/// Initial hunt guess at `n_bits` from medians at smaller N: least squares
/// of `ln T` on `ln N` with two or more points, the single median with one.
pub fn predict_runtime(previous: &[MedianEstimate], n_bits: usize) -> Option<f64> {
    match previous {
        [] => None,
        [only] => Some(only.median),
        _ => {
            let xs: Vec<f64> = previous.iter().map(|m| (m.n_bits as f64).ln()).collect();
            let ys: Vec<f64> = previous.iter().map(|m| m.median.ln()).collect();
            let k = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            let t = (my + slope * ((n_bits as f64).ln() - mx)).exp();
            (t.is_finite() && t > 0.0).then_some(t)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureCount {
    pub n_bits: usize,
    pub failed: usize,
    pub total: usize,
    #[serde(default)]
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    pub label: String,
    pub noise_type: String,
    pub mean_power: f64,
    pub estimates: Vec<MedianEstimate>,
    /// Sorted by `(N, instance, realization)`.
    pub records: Vec<RunRecord>,
    pub failures: Vec<FailureCount>,
}

impl CampaignResult {
    pub fn mean_integrations(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records
            .iter()
            .map(|r| r.integrations as f64)
            .sum::<f64>()
            / self.records.len() as f64
    }
}

/// Noiseless campaign: one hunt per instance.
pub fn run_noiseless_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    if config.noise.is_some() || config.realizations_per_instance != 0 {
        return contract("a noiseless campaign takes no noise and zero realizations");
    }
    run_campaign(config)
}

/// Noisy campaign: `realizations_per_instance` hunts per instance, pooled.
pub fn run_noisy_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    if config.noise.is_none() || config.realizations_per_instance == 0 {
        return contract("a noisy campaign needs noise parameters and >= 1 realization");
    }
    run_campaign(config)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Capability(format!("thread pool: {e}")))
}

fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let pool = build_pool(config.workers)?;
    let mut result = CampaignResult {
        label: config.label(),
        noise_type: config.noise_type().to_string(),
        mean_power: config.mean_power(),
        estimates: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    let realizations = config.realizations_per_instance.max(1);

    for n in config.n_min..=config.n_max {
        let instances = campaign_instances(config.master_seed, n, config.instances_per_n)?;
        let mut hunt = config.hunt;
        if let Some(t) = predict_runtime(&result.estimates, n) {
            hunt.initial_guess = t;
        }
        let tasks: Vec<(usize, usize)> = (0..instances.len())
            .flat_map(|i| (0..realizations).map(move |j| (i, j)))
            .collect();
        let outcomes: Vec<Result<RunRecord>> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, j)| {
                    let inst = &instances[i];
                    let iseed = instance_seed(config.master_seed, n, i);
                    let seeds = SeedLineage {
                        master: config.master_seed,
                        instance: iseed,
                        realization: config.noise.map(|_| realization_seed(iseed, j)),
                    };
                    hunt_runtime(inst, config.noise.as_ref(), i, j, &hunt, &seeds)
                })
                .collect()
        });

        let mut records = Vec::with_capacity(outcomes.len());
        let mut fail = FailureCount {
            n_bits: n,
            failed: 0,
            total: tasks.len(),
            messages: Vec::new(),
        };
        for (outcome, &(i, j)) in outcomes.into_iter().zip(&tasks) {
            match outcome {
                Ok(r) => records.push(r),
                Err(
                    e
                    @ (Error::HuntFailed { .. } | Error::Integration(_) | Error::ZeroPower { .. }),
                ) => {
                    fail.failed += 1;
                    fail.messages
                        .push(format!("instance {i} realization {j}: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
        records.sort_by_key(|r| (r.n_bits, r.instance, r.realization()));
        let too_many = fail.failed as f64 > config.max_failure_fraction * fail.total as f64;
        let estimate = if records.is_empty() {
            None
        } else {
            let ts: Vec<f64> = records.iter().map(|r| r.t_star).collect();
            Some(median_with_ci(n, &ts)?)
        };

        if let Some(dir) = &config.output_dir {
            write_n_outputs(dir, &result.label, n, &instances, &records)?;
        }
        result.failures.push(fail.clone());
        if too_many {
            if let Some(dir) = &config.output_dir {
                write_summary_and_manifest(dir, config, &result, false)?;
            }
            return Err(Error::Campaign {
                n_bits: n,
                failed: fail.failed,
                total: fail.total,
            });
        }
        result.estimates.extend(estimate);
        result.records.extend(records);
    }

    if let Some(dir) = &config.output_dir {
        write_summary_and_manifest(dir, config, &result, true)?;
    }
    Ok(result)
}

pub fn instances_path(dir: &Path, n_bits: usize) -> PathBuf {
    dir.join("instances").join(format!("N{n_bits:02}.jsonl"))
}

pub fn records_path(dir: &Path, label: &str, n_bits: usize) -> PathBuf {
    dir.join("records")
        .join(format!("{label}_N{n_bits:02}.jsonl"))
}

fn write_n_outputs(
    dir: &Path,
    label: &str,
    n: usize,
    instances: &[Ec3Instance],
    records: &[RunRecord],
) -> Result<()> {
    fs::create_dir_all(dir.join("instances"))?;
    fs::create_dir_all(dir.join("records"))?;
    let mut w = BufWriter::new(File::create(instances_path(dir, n))?);
    write_instances_jsonl(&mut w, instances)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(records_path(dir, label, n))?);
    write_records_jsonl(&mut w, records)?;
    w.flush()?;
    Ok(())
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub noise_type: String,
    pub mean_power: f64,
    pub n_samples: usize,
    #[serde(rename = "median_T")]
    pub median_t: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SummaryRow {
    pub fn new(noise_type: &str, mean_power: f64, m: &MedianEstimate) -> Self {
        SummaryRow {
            n: m.n_bits,
            noise_type: noise_type.to_string(),
            mean_power,
            n_samples: m.n_samples,
            median_t: m.median,
            ci_low: m.ci_low,
            ci_high: m.ci_high,
        }
    }

    pub fn estimate(&self) -> MedianEstimate {
        MedianEstimate {
            n_bits: self.n,
            n_samples: self.n_samples,
            median: self.median_t,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            degenerate: self.n_samples < MIN_CI_SAMPLES,
        }
    }
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Rows grouped by `(noise_type, mean_power)`, each group sorted by N.
pub fn group_summary(rows: &[SummaryRow]) -> Vec<((String, f64), Vec<SummaryRow>)> {
    let mut groups: Vec<((String, f64), Vec<SummaryRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|((t, p), _)| *t == r.noise_type && *p == r.mean_power)
        {
            Some((_, g)) => g.push(r.clone()),
            None => groups.push(((r.noise_type.clone(), r.mean_power), vec![r.clone()])),
        }
    }
    for (_, g) in &mut groups {
        g.sort_by_key(|r| r.n);
    }
    groups
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CampaignManifest {
    config: CampaignConfig,
    complete: bool,
    hunts: usize,
    mean_integrations: f64,
    failures: Vec<FailureCount>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    campaigns: BTreeMap<String, CampaignManifest>,
}

/// Merges this campaign into `summary.csv` and `manifest.json`, replacing
/// earlier entries with the same label.
fn write_summary_and_manifest(
    dir: &Path,
    config: &CampaignConfig,
    result: &CampaignResult,
    complete: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("summary.csv");
    let mut rows: Vec<SummaryRow> = if summary.exists() {
        read_summary_csv(BufReader::new(File::open(&summary)?))?
    } else {
        Vec::new()
    };
    rows.retain(|r| !(r.noise_type == result.noise_type && r.mean_power == result.mean_power));
    rows.extend(
        result
            .estimates
            .iter()
            .map(|m| SummaryRow::new(&result.noise_type, result.mean_power, m)),
    );
    rows.sort_by(|a, b| {
        (a.noise_type.as_str(), a.mean_power, a.n)
            .partial_cmp(&(b.noise_type.as_str(), b.mean_power, b.n))
            .expect("finite powers")
    });
    write_summary_csv(BufWriter::new(File::create(&summary)?), &rows)?;

    let path = dir.join("manifest.json");
    let mut manifest: Manifest = if path.exists() {
        serde_json::from_reader(BufReader::new(File::open(&path)?))?
    } else {
        Manifest::default()
    };
    manifest.tool = "quads".into();
    manifest.version = env!("CARGO_PKG_VERSION").into();
    manifest.campaigns.insert(
        result.label.clone(),
        CampaignManifest {
            config: config.clone(),
            complete,
            hunts: result.records.len(),
            mean_integrations: result.mean_integrations(),
            failures: result.failures.clone(),
        },
    );
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
