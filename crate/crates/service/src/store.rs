//! One append-only JSON-lines file per session: a header line, then one
//! line per accepted outcome.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::{OutcomeEvent, Session, SessionHeader};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Created(SessionHeader),
    Outcome { event: OutcomeEvent },
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: Option<PathBuf>,
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn memory() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir) })
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: &str, line: &LogLine) -> io::Result<()> {
        let Some(path) = self.path(id) else { return Ok(()) };
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut text = serde_json::to_string(line).map_err(io::Error::other)?;
        text.push('\n');
        f.write_all(text.as_bytes())?;
        f.sync_data()
    }

    pub fn create(&self, header: &SessionHeader) -> io::Result<()> {
        self.append(&header.session_id, &LogLine::Created(header.clone()))
    }

    pub fn record(&self, id: &str, event: &OutcomeEvent) -> io::Result<()> {
        self.append(id, &LogLine::Outcome { event: event.clone() })
    }

    /// Rebuilds every session found in the directory.
    pub fn load_all(&self) -> io::Result<Vec<Session>> {
        let Some(dir) = &self.dir else { return Ok(Vec::new()) };
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.iter().map(|p| load(p)).collect()
    }
}

/// Replays one session file.
pub fn load(path: &Path) -> io::Result<Session> {
    let bad = |line: usize, msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {msg}", path.display()));
    let mut header = None;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line).map_err(|e| bad(i + 1, e.to_string()))? {
            LogLine::Created(h) if header.is_none() => header = Some(h),
            LogLine::Created(_) => return Err(bad(i + 1, "second header line".into())),
            LogLine::Outcome { event } => events.push(event),
        }
    }
    let header = header.ok_or_else(|| bad(1, "missing header line".into()))?;
    Session::replay(header, &events).map_err(|e| bad(0, e.to_string()))
}
