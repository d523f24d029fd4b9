//! Append-only NDJSON journal.
//!
//! Each line is one event: `{"seq":N,"kind":"...",...payload}`. Line 0 is a
//! `run-config` header carrying the format version and the resolved run
//! configuration. Sequence numbers are contiguous from 0.
//!
//! On resume the engine is re-executed from the header. While recorded lines
//! remain, every emitted event must reproduce its recorded line byte for
//! byte, and recorded measurements are handed back instead of asking the
//! evaluator. Once the recording is exhausted new events are appended.

use std::collections::{BTreeSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::monitor::RunMonitor;
use super::SessionError;
use crate::coevolution::{Event, EventSink, SinkError};
use crate::fitness::Measurement;

pub const JOURNAL_FORMAT: u32 = 1;
pub const JOURNAL_FILE: &str = "journal.ndjson";

#[derive(Serialize)]
struct LineOut<'a> {
    seq: u64,
    #[serde(flatten)]
    event: &'a Event,
}

/// The journal line for `event` at `seq`, without the trailing newline.
pub fn encode_line(seq: u64, event: &Event) -> String {
    serde_json::to_string(&LineOut { seq, event }).expect("events serialize")
}

pub fn decode_line(line: &str) -> Result<(u64, Event), String> {
    let mut value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value.as_object_mut().ok_or("line is not an object")?;
    let seq = obj
        .remove("seq")
        .and_then(|v| v.as_u64())
        .ok_or("missing or invalid seq")?;
    let event: Event = serde_json::from_value(value).map_err(|e| e.to_string())?;
    Ok((seq, event))
}

#[derive(Clone, Debug)]
struct Recorded {
    seq: u64,
    line: String,
    event: Event,
}

/// Parsed contents of a journal file.
#[derive(Clone, Debug, Default)]
pub struct JournalContents {
    pub events: Vec<Event>,
    lines: Vec<String>,
    /// Bytes of complete, valid lines.
    valid_len: u64,
    /// Something after the last valid line was dropped.
    torn: bool,
}

impl JournalContents {
    pub fn header(&self) -> Option<&serde_json::Value> {
        match self.events.first() {
            Some(Event::RunConfig { config, .. }) => Some(config),
            _ => None,
        }
    }

    pub fn is_torn(&self) -> bool {
        self.torn
    }
}

/// Parses journal text. A torn or malformed final line is dropped; any
/// other defect is an error.
pub fn parse_journal(text: &str) -> Result<JournalContents, SessionError> {
    let mut out = JournalContents::default();
    let mut rest = text;
    let mut offset = 0u64;
    let mut lineno = 0usize;
    while !rest.is_empty() {
        let (line, complete, consumed) = match rest.find('\n') {
            Some(i) => (&rest[..i], true, i + 1),
            None => (rest, false, rest.len()),
        };
        rest = &rest[consumed..];
        let last = rest.is_empty();
        match decode_line(line) {
            Ok((seq, event)) if complete => {
                if seq != lineno as u64 {
                    return Err(SessionError::Corrupt {
                        line: lineno + 1,
                        reason: format!("sequence gap: expected seq {lineno}, found {seq}"),
                    });
                }
                out.events.push(event);
                out.lines.push(line.to_string());
                offset += consumed as u64;
                out.valid_len = offset;
            }
            Ok(_) => {
                out.torn = true;
            }
            Err(reason) if last => {
                log::warn!(
                    "discarding malformed final journal line {}: {reason}",
                    lineno + 1
                );
                out.torn = true;
            }
            Err(reason) => {
                return Err(SessionError::Corrupt {
                    line: lineno + 1,
                    reason,
                })
            }
        }
        lineno += 1;
    }
    validate_events(&out.events)?;
    Ok(out)
}

fn validate_events(events: &[Event]) -> Result<(), SessionError> {
    let corrupt = |i: usize, reason: String| SessionError::Corrupt {
        line: i + 1,
        reason,
    };
    let mut requested = BTreeSet::new();
    let mut measured = BTreeSet::new();
    for (i, e) in events.iter().enumerate() {
        match e {
            Event::RunConfig { format, .. } => {
                if i != 0 {
                    return Err(corrupt(i, "run-config header after line 1".into()));
                }
                if *format != JOURNAL_FORMAT {
                    return Err(corrupt(i, format!("unsupported journal format {format}")));
                }
            }
            _ if i == 0 => return Err(corrupt(i, "first line is not a run-config header".into())),
            Event::EvaluationRequest { request, .. } => {
                if !requested.insert(request.index) {
                    return Err(corrupt(
                        i,
                        format!("request {} journaled twice", request.index),
                    ));
                }
            }
            Event::Measurement { request, .. } => {
                if !requested.contains(request) {
                    return Err(corrupt(i, format!("measurement for unrequested {request}")));
                }
                if !measured.insert(*request) {
                    return Err(corrupt(i, format!("second measurement for {request}")));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Reads and parses a journal without modifying it.
pub fn read_journal(path: &Path) -> Result<JournalContents, SessionError> {
    let text = std::fs::read_to_string(path).map_err(|e| SessionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_journal(&text)
}

pub struct Journal {
    path: PathBuf,
    file: File,
    len: u64,
    replay: VecDeque<Recorded>,
    monitor: Option<Arc<Mutex<RunMonitor>>>,
}

impl Journal {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
        move |source| SessionError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Creates a new journal holding only the header. Fails if the file exists.
    pub fn create(path: &Path, config: serde_json::Value) -> Result<Self, SessionError> {
        if path.exists() {
            return Err(SessionError::JournalExists(path.to_path_buf()));
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(Self::io(path))?;
        }
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    SessionError::JournalExists(path.to_path_buf())
                }
                _ => Self::io(path)(e),
            })?;
        let mut j = Self {
            path: path.to_path_buf(),
            file,
            len: 0,
            replay: VecDeque::new(),
            monitor: None,
        };
        j.append(
            0,
            &Event::RunConfig {
                format: JOURNAL_FORMAT,
                config,
            },
        )
        .map_err(|e| SessionError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
        Ok(j)
    }

    /// Opens an existing journal for replay, truncating a torn final line.
    pub fn open(path: &Path) -> Result<(Self, JournalContents), SessionError> {
        let contents = read_journal(path)?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(Self::io(path))?;
        if contents.torn {
            log::warn!(
                "{}: dropping incomplete trailing event, keeping {} events",
                path.display(),
                contents.events.len()
            );
            file.set_len(contents.valid_len).map_err(Self::io(path))?;
        }
        let mut replay: VecDeque<Recorded> = contents
            .events
            .iter()
            .zip(&contents.lines)
            .enumerate()
            .map(|(i, (event, line))| Recorded {
                seq: i as u64,
                line: line.clone(),
                event: event.clone(),
            })
            .collect();
        // The header is not re-emitted by the engine.
        replay.pop_front();
        let j = Self {
            path: path.to_path_buf(),
            file,
            len: contents.events.len() as u64,
            replay,
            monitor: None,
        };
        Ok((j, contents))
    }

    /// Feeds every replayed and appended event to `monitor`.
    pub fn observe(&mut self, monitor: Arc<Mutex<RunMonitor>>) {
        self.monitor = Some(monitor);
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of events in the file.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Recorded events not yet reproduced.
    pub fn replay_remaining(&self) -> usize {
        self.replay.len()
    }

    fn notify(&self, event: &Event) {
        if let Some(m) = &self.monitor {
            m.lock().unwrap_or_else(|e| e.into_inner()).observe(event);
        }
    }

    /// Appends `event` as line `seq`, which must equal the current length,
    /// and syncs it to disk.
    pub fn append(&mut self, seq: u64, event: &Event) -> Result<(), SinkError> {
        if seq != self.len {
            return Err(SinkError::Format(format!(
                "sequence gap: journal has {} events, got seq {seq}",
                self.len
            )));
        }
        let mut line = encode_line(seq, event);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.len += 1;
        self.notify(event);
        Ok(())
    }
}

impl EventSink for Journal {
    fn emit(&mut self, event: Event) -> Result<(), SinkError> {
        match self.replay.pop_front() {
            Some(rec) => {
                let produced = encode_line(rec.seq, &event);
                if produced != rec.line {
                    return Err(SinkError::Divergence {
                        seq: rec.seq,
                        recorded: rec.line,
                        produced,
                    });
                }
                self.notify(&rec.event);
                Ok(())
            }
            None => self.append(self.len, &event),
        }
    }

    fn recorded_measurement(&mut self, request: u64) -> Result<Option<Measurement>, SinkError> {
        let Some(front) = self.replay.front() else {
            return Ok(None);
        };
        match front.event {
            Event::Measurement {
                request: r,
                rpm,
                ts,
            } if r == request => {
                let rec = self.replay.pop_front().expect("front exists");
                self.notify(&rec.event);
                Ok(Some(Measurement {
                    rpm,
                    timestamp_ms: ts,
                }))
            }
            _ => Err(SinkError::Divergence {
                seq: front.seq,
                recorded: front.line.clone(),
                produced: format!("measurement for request {request}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(text: &str) -> Event {
        Event::Note { text: text.into() }
    }

    fn header() -> serde_json::Value {
        serde_json::json!({"run_id": "t"})
    }

    #[test]
    fn line_layout() {
        let line = encode_line(3, &note("hi"));
        assert_eq!(line, r#"{"seq":3,"kind":"note","text":"hi"}"#);
        assert_eq!(decode_line(&line).unwrap(), (3, note("hi")));
        let m = Event::Measurement {
            request: 4,
            rpm: 2429.0,
            ts: None,
        };
        assert_eq!(
            encode_line(9, &m),
            r#"{"seq":9,"kind":"measurement","request":4,"rpm":2429.0}"#
        );
    }

    #[test]
    fn append_checks_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        let mut j = Journal::create(&path, header()).unwrap();
        assert_eq!(j.len(), 1);
        for seq in 1..4 {
            j.append(seq, &note("x")).unwrap();
        }
        assert!(matches!(
            j.append(5, &note("gap")),
            Err(SinkError::Format(_))
        ));
        assert_eq!(j.len(), 4);
        assert_eq!(read_journal(&path).unwrap().events.len(), 4);
    }

    #[test]
    fn create_refuses_existing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        Journal::create(&path, header()).unwrap();
        assert!(matches!(
            Journal::create(&path, header()),
            Err(SessionError::JournalExists(_))
        ));
    }

    #[test]
    fn torn_tail_is_dropped_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        let mut j = Journal::create(&path, header()).unwrap();
        j.append(1, &note("a")).unwrap();
        drop(j);
        let good = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, format!("{good}{{\"seq\":2,\"kind\":\"no")).unwrap();
        let (j, contents) = Journal::open(&path).unwrap();
        assert!(contents.is_torn());
        assert_eq!(j.len(), 2);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), good);
    }

    #[test]
    fn complete_but_unterminated_line_is_dropped() {
        let text = format!(
            "{}\n{}",
            encode_line(
                0,
                &Event::RunConfig {
                    format: 1,
                    config: header()
                }
            ),
            encode_line(1, &note("a"))
        );
        let c = parse_journal(&text).unwrap();
        assert_eq!(c.events.len(), 1);
        assert!(c.is_torn());
    }

    #[test]
    fn earlier_corruption_is_fatal() {
        let h = encode_line(
            0,
            &Event::RunConfig {
                format: 1,
                config: header(),
            },
        );
        let text = format!("{h}\ngarbage\n{}\n", encode_line(2, &note("b")));
        assert!(matches!(
            parse_journal(&text),
            Err(SessionError::Corrupt { line: 2, .. })
        ));
        let gap = format!("{h}\n{}\n", encode_line(2, &note("b")));
        assert!(matches!(
            parse_journal(&gap),
            Err(SessionError::Corrupt { .. })
        ));
        let headless = format!("{}\n", encode_line(0, &note("b")));
        assert!(parse_journal(&headless).is_err());
        let future = format!(
            "{}\n",
            encode_line(
                0,
                &Event::RunConfig {
                    format: 9,
                    config: header()
                }
            )
        );
        assert!(parse_journal(&future).is_err());
    }

    #[test]
    fn orphan_or_double_measurement_is_fatal() {
        let h = encode_line(
            0,
            &Event::RunConfig {
                format: 1,
                config: header(),
            },
        );
        let m = Event::Measurement {
            request: 0,
            rpm: 1.0,
            ts: None,
        };
        let text = format!("{h}\n{}\n", encode_line(1, &m));
        assert!(parse_journal(&text).is_err());
    }

    #[test]
    fn empty_file_parses_to_nothing() {
        let c = parse_journal("").unwrap();
        assert!(c.events.is_empty());
        assert!(c.header().is_none());
    }

    #[test]
    fn replay_detects_divergence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        let mut j = Journal::create(&path, header()).unwrap();
        j.emit(note("a")).unwrap();
        j.emit(note("b")).unwrap();
        drop(j);
        let (mut j, _) = Journal::open(&path).unwrap();
        assert_eq!(j.replay_remaining(), 2);
        j.emit(note("a")).unwrap();
        assert!(matches!(
            j.emit(note("c")),
            Err(SinkError::Divergence { seq: 2, .. })
        ));
    }

    #[test]
    fn replay_then_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(JOURNAL_FILE);
        let mut j = Journal::create(&path, header()).unwrap();
        j.emit(note("a")).unwrap();
        drop(j);
        let (mut j, _) = Journal::open(&path).unwrap();
        j.emit(note("a")).unwrap();
        j.emit(note("b")).unwrap();
        let events = read_journal(&path).unwrap().events;
        assert_eq!(events[1..], [note("a"), note("b")]);
    }
}
