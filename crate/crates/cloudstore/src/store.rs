//! Durable record storage: one canonical-JSON file per record plus an
//! append-only id index. Writes go through a temp file and rename, so
//! readers never observe a partial record.

use crate::records::{TraceRecord, TraceSummary};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

pub struct RecordStore {
    dir: PathBuf,
    records_dir: PathBuf,
    index_path: PathBuf,
    next_id: AtomicU64,
    write_lock: Mutex<()>,
}

impl RecordStore {
    /// Opens (or initializes) a store directory. The id counter resumes
    /// past every id ever allocated, deleted or not, so ids are never
    /// reused.
    pub fn open(dir: &Path) -> io::Result<Self> {
        let records_dir = dir.join("records");
        fs::create_dir_all(&records_dir)?;
        let index_path = dir.join("index.log");
        let mut max_id = 0u64;
        if index_path.exists() {
            for line in fs::read_to_string(&index_path)?.lines() {
                if let Ok(id) = line.trim().parse::<u64>() {
                    max_id = max_id.max(id);
                }
            }
        }
        Ok(RecordStore {
            dir: dir.to_path_buf(),
            records_dir,
            index_path,
            next_id: AtomicU64::new(max_id + 1),
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Allocates a fresh id (monotone even across deletions).
    pub fn allocate_id(&self) -> String {
        self.next_id.fetch_add(1, Ordering::SeqCst).to_string()
    }

    /// Persists a record durably under its id.
    pub fn persist(&self, record: &TraceRecord) -> io::Result<()> {
        let bytes = record.to_canonical_json();
        let _guard = self.write_lock.lock().unwrap();
        let tmp = self.records_dir.join(format!(".tmp-{}", record.id));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.record_path(&record.id))?;
        let mut index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.index_path)?;
        writeln!(index, "{}", record.id)?;
        index.sync_all()?;
        Ok(())
    }

    /// The stored bytes, verbatim; `None` when the id is unknown.
    pub fn fetch_bytes(&self, id: &str) -> io::Result<Option<Vec<u8>>> {
        if !Self::valid_id(id) {
            return Ok(None);
        }
        match fs::read(self.record_path(id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Summaries of every stored record, newest first (ties broken by id,
    /// newest allocation first); optional exact-match patient filter.
    pub fn list(&self, patient_ref: Option<&str>) -> io::Result<Vec<TraceSummary>> {
        let mut ids: Vec<u64> = if self.index_path.exists() {
            fs::read_to_string(&self.index_path)?
                .lines()
                .filter_map(|l| l.trim().parse().ok())
                .collect()
        } else {
            Vec::new()
        };
        ids.sort_unstable();
        ids.dedup();

        let mut summaries = Vec::new();
        for id in ids {
            let Some(bytes) = self.fetch_bytes(&id.to_string())? else {
                continue; // indexed but removed
            };
            let Ok(text) = String::from_utf8(bytes) else {
                continue;
            };
            let Ok(record) = TraceRecord::from_json(&text) else {
                continue;
            };
            if let Some(filter) = patient_ref {
                if record.patient_ref != filter {
                    continue;
                }
            }
            summaries.push(TraceSummary {
                id: record.id.clone(),
                patient_ref: record.patient_ref.clone(),
                lead_label: record.lead_label.clone(),
                created_at: record.created_at,
                heart_rate_bpm: record
                    .analysis
                    .as_ref()
                    .and_then(|a| a.heart_rate_bpm),
            });
        }
        summaries.sort_by(|a, b| {
            b.created_at.cmp(&a.created_at).then_with(|| {
                let bi: u64 = b.id.parse().unwrap_or(0);
                let ai: u64 = a.id.parse().unwrap_or(0);
                bi.cmp(&ai)
            })
        });
        Ok(summaries)
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.records_dir.join(format!("{id}.json"))
    }

    fn valid_id(id: &str) -> bool {
        !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit())
    }
}
