//! Append-only JSON-lines journal of job state transitions.
//!
//! One event per line, flushed and fsync'ed before the corresponding change
//! is acknowledged. On startup the journal is replayed into job records and
//! rewritten as one `record` event per surviving job. A trailing line that
//! does not parse (a write torn by a crash) is ignored; a bad line anywhere
//! else is an error. The format is described in `docs/journal-format.md`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use qsched_core::{BatchId, CountsDistribution, JobId, JobRecord, JobStatus, QuantumJob, Timestamp};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Submitted {
        job: QuantumJob,
    },
    Scheduled {
        batch_id: BatchId,
        job_ids: Vec<JobId>,
        at: Timestamp,
    },
    Running {
        batch_id: BatchId,
        job_ids: Vec<JobId>,
        at: Timestamp,
    },
    Done {
        job_id: JobId,
        counts: CountsDistribution,
        at: Timestamp,
    },
    Failed {
        job_id: JobId,
        error: String,
        at: Timestamp,
    },
    Pruned {
        job_id: JobId,
    },
    /// Full state of one job, written by compaction.
    Record {
        record: JobRecord,
    },
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Replays `path` (if it exists), compacts it, and opens it for appends.
    /// Returns the surviving records in original submission order.
    pub fn open(path: &Path) -> Result<(Journal, Vec<JobRecord>), ServiceError> {
        let records = if path.exists() { replay(path)? } else { Vec::new() };
        compact(path, &records)?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| io_error(path, e))?;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event).map_err(|e| ServiceError::Journal(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| io_error(&self.path, e))?;
        self.file.sync_data().map_err(|e| io_error(&self.path, e))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Journal(format!("{}: {e}", path.display()))
}

/// Folds the journal into records, in the order jobs were first seen.
pub fn replay(path: &Path) -> Result<Vec<JobRecord>, ServiceError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| io_error(path, e))?;
    let mut order: Vec<JobId> = Vec::new();
    let mut records: HashMap<JobId, JobRecord> = HashMap::new();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(_) if Some(i) == last => break,
            Err(e) => {
                return Err(ServiceError::Journal(format!(
                    "{}:{}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        };
        apply(&mut order, &mut records, event);
    }
    Ok(order.into_iter().filter_map(|id| records.remove(&id)).collect())
}

fn apply(order: &mut Vec<JobId>, records: &mut HashMap<JobId, JobRecord>, event: Event) {
    match event {
        Event::Submitted { job } => {
            if !records.contains_key(&job.job_id) {
                order.push(job.job_id.clone());
            }
            records.insert(
                job.job_id.clone(),
                JobRecord {
                    job,
                    result: None,
                    dispatched_at: None,
                    completed_at: None,
                },
            );
        }
        Event::Record { record } => {
            if !records.contains_key(&record.job.job_id) {
                order.push(record.job.job_id.clone());
            }
            records.insert(record.job.job_id.clone(), record);
        }
        Event::Scheduled { batch_id, job_ids, at } => {
            for id in job_ids {
                if let Some(r) = records.get_mut(&id) {
                    r.job.status = JobStatus::Scheduled;
                    r.job.batch_id = Some(batch_id.clone());
                    r.dispatched_at = Some(at);
                }
            }
        }
        Event::Running { job_ids, .. } => {
            for id in job_ids {
                if let Some(r) = records.get_mut(&id) {
                    r.job.status = JobStatus::Running;
                }
            }
        }
        Event::Done { job_id, counts, at } => {
            if let Some(r) = records.get_mut(&job_id) {
                r.job.status = JobStatus::Done;
                r.result = Some(counts);
                r.completed_at = Some(at);
            }
        }
        Event::Failed { job_id, error, at } => {
            if let Some(r) = records.get_mut(&job_id) {
                r.job.status = JobStatus::Failed;
                r.job.error = Some(error);
                r.completed_at = Some(at);
            }
        }
        Event::Pruned { job_id } => {
            records.remove(&job_id);
            order.retain(|id| *id != job_id);
        }
    }
}

/// Atomically replaces the journal with one `record` line per job.
pub fn compact(path: &Path, records: &[JobRecord]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("compact.tmp");
    {
        let mut f = File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
        for record in records {
            let event = Event::Record { record: record.clone() };
            let mut line = serde_json::to_vec(&event).map_err(|e| ServiceError::Journal(e.to_string()))?;
            line.push(b'\n');
            f.write_all(&line).map_err(|e| io_error(&tmp, e))?;
        }
        f.sync_all().map_err(|e| io_error(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsched_core::parse_qasm;

    fn job(id: &str) -> QuantumJob {
        let c = parse_qasm("qreg q[1]; creg c[1]; x q[0]; measure q[0] -> c[0];").unwrap();
        QuantumJob::new(JobId::from(id), c, 10, Timestamp(1))
    }

    #[test]
    fn replays_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, records) = Journal::open(&path).unwrap();
        assert!(records.is_empty());
        for id in ["a", "b", "c"] {
            j.append(&Event::Submitted { job: job(id) }).unwrap();
        }
        let batch = BatchId::from("b1");
        let ids = vec![JobId::from("a"), JobId::from("b")];
        j.append(&Event::Scheduled { batch_id: batch.clone(), job_ids: ids.clone(), at: Timestamp(5) })
            .unwrap();
        j.append(&Event::Running { batch_id: batch, job_ids: ids, at: Timestamp(6) }).unwrap();
        let counts = CountsDistribution::from_pairs(1, [("1", 10)]).unwrap();
        j.append(&Event::Done { job_id: JobId::from("a"), counts: counts.clone(), at: Timestamp(7) })
            .unwrap();
        j.append(&Event::Failed { job_id: JobId::from("b"), error: "boom".into(), at: Timestamp(7) })
            .unwrap();
        drop(j);

        let records = replay(&path).unwrap();
        let ids: Vec<&str> = records.iter().map(|r| r.job.job_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert_eq!(records[0].job.status, JobStatus::Done);
        assert_eq!(records[0].result.as_ref(), Some(&counts));
        assert_eq!(records[1].job.error.as_deref(), Some("boom"));
        assert_eq!(records[2].job.status, JobStatus::Queued);

        // reopen compacts to one line per job, same content
        let (_j, again) = Journal::open(&path).unwrap();
        assert_eq!(again, records);
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
    }

    #[test]
    fn torn_tail_is_ignored_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, _) = Journal::open(&path).unwrap();
        j.append(&Event::Submitted { job: job("a") }).unwrap();
        j.append(&Event::Submitted { job: job("b") }).unwrap();
        drop(j);
        let full = fs::read_to_string(&path).unwrap();
        let cut = full.len() - 20;
        fs::write(&path, &full[..cut]).unwrap();
        let records = replay(&path).unwrap();
        assert_eq!(records.len(), 1);

        fs::write(&path, format!("garbage\n{full}")).unwrap();
        assert!(replay(&path).is_err());
    }

    #[test]
    fn pruned_jobs_disappear() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, _) = Journal::open(&path).unwrap();
        j.append(&Event::Submitted { job: job("a") }).unwrap();
        j.append(&Event::Pruned { job_id: JobId::from("a") }).unwrap();
        assert!(replay(&path).unwrap().is_empty());
    }
}
