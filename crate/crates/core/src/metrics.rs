//! Distances between result distributions.
//!
//! Both distances operate on normalised frequencies over the union of the
//! observed keys (missing keys count as zero) and land in `[0, 1]`.
//!
//! * Hellinger: `sqrt(1 - Σ sqrt(p·q))`, evaluated in the equivalent form
//!   `sqrt(½ Σ (√p − √q)²)` which is exactly zero for identical inputs.
//! * Wasserstein: keys are read as unsigned integers with the leftmost
//!   character (clbit 0) as the most significant bit, the 1-D earth mover
//!   distance `Σ_k |F_P(k) − F_Q(k)|` is taken over `[0, 2^n − 1]`, and the
//!   result is divided by `2^n − 1`.
//!
//! "Percentage" in a [`DistanceReport`] is the arithmetic mean of the
//! per-job distances times 100.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::counts::{CountsDistribution, Distribution};
use crate::queue::JobId;

/// How bitstrings are placed on the line for the Wasserstein distance.
pub const WASSERSTEIN_EMBEDDING: &str = "integer, clbit 0 most significant, W1/(2^n-1)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("distributions have different widths ({left} vs {right} bits)")]
    WidthMismatch { left: usize, right: usize },
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("Wasserstein distance is undefined for 0-bit outcomes")]
    ZeroWidth,
    #[error("Wasserstein distance supports at most 64-bit outcomes, got {0}")]
    TooWide(usize),
    #[error("job {job_id}: {source}")]
    Job {
        job_id: JobId,
        #[source]
        source: Box<MetricError>,
    },
}

/// Normalised frequencies of both inputs over their joint support.
fn aligned<P: Distribution, Q: Distribution>(p: &P, q: &Q) -> Result<Vec<(String, f64, f64)>, MetricError> {
    if p.num_bits() != q.num_bits() {
        return Err(MetricError::WidthMismatch {
            left: p.num_bits(),
            right: q.num_bits(),
        });
    }
    let (pw, qw) = (p.weights(), q.weights());
    let p_total: f64 = pw.iter().map(|(_, w)| w).sum();
    let q_total: f64 = qw.iter().map(|(_, w)| w).sum();
    if p_total <= 0.0 || q_total <= 0.0 {
        return Err(MetricError::EmptyDistribution);
    }
    let mut joint: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (k, w) in pw {
        joint.entry(k.to_string()).or_default().0 += w / p_total;
    }
    for (k, w) in qw {
        joint.entry(k.to_string()).or_default().1 += w / q_total;
    }
    Ok(joint.into_iter().map(|(k, (a, b))| (k, a, b)).collect())
}

pub fn hellinger<P: Distribution, Q: Distribution>(p: &P, q: &Q) -> Result<f64, MetricError> {
    let joint = aligned(p, q)?;
    let sq: f64 = joint
        .iter()
        .map(|(_, a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((0.5 * sq).sqrt().clamp(0.0, 1.0))
}

pub fn wasserstein_normalized<P: Distribution, Q: Distribution>(p: &P, q: &Q) -> Result<f64, MetricError> {
    let joint = aligned(p, q)?;
    let n = p.num_bits();
    if n == 0 {
        return Err(MetricError::ZeroWidth);
    }
    if n > 64 {
        return Err(MetricError::TooWide(n));
    }
    let mut points: Vec<(u64, f64, f64)> = joint
        .into_iter()
        .map(|(k, a, b)| (u64::from_str_radix(&k, 2).expect("binary key"), a, b))
        .collect();
    points.sort_by_key(|(x, _, _)| *x);
    // the CDF difference is constant between consecutive support points
    let mut w1 = 0.0;
    let (mut fp, mut fq) = (0.0, 0.0);
    for pair in points.windows(2) {
        fp += pair[0].1;
        fq += pair[0].2;
        w1 += (fp - fq).abs() * (pair[1].0 - pair[0].0) as f64;
    }
    let span = if n == 64 { u64::MAX as f64 } else { ((1u64 << n) - 1) as f64 };
    Ok((w1 / span).clamp(0.0, 1.0))
}

/// One job's individual and scheduled results.
#[derive(Debug, Clone)]
pub struct RunPair {
    pub job_id: JobId,
    pub name: String,
    pub width: usize,
    pub shots: u64,
    pub individual: CountsDistribution,
    pub scheduled: CountsDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobDistance {
    pub job_id: JobId,
    pub name: String,
    pub width: usize,
    pub shots: u64,
    pub hellinger: f64,
    pub wasserstein: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub per_job: Vec<JobDistance>,
    pub mean_hellinger_pct: f64,
    pub mean_wasserstein_pct: f64,
    pub wasserstein_embedding: &'static str,
}

pub fn compare_runs(pairs: &[RunPair]) -> Result<DistanceReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyDistribution);
    }
    let tag = |job_id: &JobId| {
        let job_id = job_id.clone();
        move |e: MetricError| MetricError::Job {
            job_id,
            source: Box::new(e),
        }
    };
    let mut per_job = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let h = hellinger(&pair.individual, &pair.scheduled).map_err(tag(&pair.job_id))?;
        let w = wasserstein_normalized(&pair.individual, &pair.scheduled).map_err(tag(&pair.job_id))?;
        per_job.push(JobDistance {
            job_id: pair.job_id.clone(),
            name: pair.name.clone(),
            width: pair.width,
            shots: pair.shots,
            hellinger: h,
            wasserstein: w,
        });
    }
    let n = per_job.len() as f64;
    let mean_hellinger_pct = per_job.iter().map(|d| d.hellinger).sum::<f64>() / n * 100.0;
    let mean_wasserstein_pct = per_job.iter().map(|d| d.wasserstein).sum::<f64>() / n * 100.0;
    Ok(DistanceReport {
        per_job,
        mean_hellinger_pct,
        mean_wasserstein_pct,
        wasserstein_embedding: WASSERSTEIN_EMBEDDING,
    })
}

impl DistanceReport {
    /// CSV with columns `job_id,name,width,shots,hellinger,wasserstein`, one
    /// row per job and a closing `summary` row holding the mean percentages.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["job_id", "name", "width", "shots", "hellinger", "wasserstein"])
            .expect("in-memory write");
        for d in &self.per_job {
            w.write_record([
                d.job_id.as_str(),
                &d.name,
                &d.width.to_string(),
                &d.shots.to_string(),
                &format!("{:.6}", d.hellinger),
                &format!("{:.6}", d.wasserstein),
            ])
            .expect("in-memory write");
        }
        let width: usize = self.per_job.iter().map(|d| d.width).sum();
        let shots = self.per_job.first().map_or(0, |d| d.shots);
        w.write_record([
            "summary",
            "mean_pct",
            &width.to_string(),
            &shots.to_string(),
            &format!("{:.4}", self.mean_hellinger_pct),
            &format!("{:.4}", self.mean_wasserstein_pct),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}
