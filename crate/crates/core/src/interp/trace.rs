//! Recorded executions: events, traces, and their JSON form.
//!
//! An event is the pair (object, primitive command) of one transition plus
//! the metadata the monitor and oracles need: field access with its concrete
//! key, the stack depth after the transition, and the argument or return
//! value on enter/return events.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::lang::{CodeContext, FieldName, ObjectId, ObjectName};

use super::store::Store;

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rw {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Access {
    pub field: FieldName,
    pub key: Option<i64>,
    pub rw: Rw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Assign,
    Read,
    Write,
    Assert,
    Skip,
    Enter,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// 1-based position in the trace this event was recorded in. Projection
    /// preserves the original index.
    pub index: u32,
    pub object: ObjectId,
    pub kind: EventKind,
    /// Rendered primitive command, e.g. `enter` or `credit[o] := zr;`.
    pub text: String,
    pub access: Option<Access>,
    pub depth_after: u32,
    /// Argument value on Enter, returned value on Return.
    pub value: Option<i64>,
    /// Selected entry point on Enter.
    pub selector: Option<u32>,
}

impl Event {
    /// Identity used by conflict-equivalence: the observable content of the
    /// event, excluding position and depth.
    pub fn identity(&self) -> (ObjectId, &str, &Option<Access>, Option<i64>) {
        (self.object, self.text.as_str(), &self.access, self.value)
    }

    pub fn location(&self) -> Option<(FieldName, Option<i64>)> {
        self.access.as_ref().map(|a| (a.field.clone(), a.key))
    }

    pub fn is_write(&self) -> bool {
        matches!(self.access, Some(Access { rw: Rw::Write, .. }))
    }
}

/// Two events conflict when they touch the same (field, key) location and at
/// least one of them writes it.
pub fn events_conflict(a: &Event, b: &Event) -> bool {
    match (&a.access, &b.access) {
        (Some(x), Some(y)) => {
            x.field == y.field && x.key == y.key && (x.rw == Rw::Write || y.rw == Rw::Write)
        }
        _ => false,
    }
}

/// One complete execution within a trace: the half-open event range and
/// whether it was rolled back by a failed assert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecSpan {
    pub start: usize,
    pub end: usize,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub initial_store: Store,
    pub final_store: Store,
    pub spans: Vec<ExecSpan>,
    /// Object names in interned-id order, snapshotted from the context.
    pub names: Vec<ObjectName>,
}

impl Trace {
    pub fn aborted(&self) -> bool {
        self.spans.iter().any(|s| s.aborted)
    }

    pub fn name_of(&self, id: ObjectId) -> &str {
        self.names
            .get(id.0 as usize)
            .map(|n| n.0.as_str())
            .unwrap_or("?")
    }

    pub fn id_of(&self, name: &str) -> Option<ObjectId> {
        self.names
            .iter()
            .position(|n| n.0 == name)
            .map(|i| ObjectId(i as u32))
    }

    /// Concatenates complete executions of a run into one trace. Events are
    /// re-indexed; spans record the execution boundaries.
    pub fn concat(traces: &[Trace]) -> Option<Trace> {
        let first = traces.first()?;
        let mut events = Vec::new();
        let mut spans = Vec::new();
        for t in traces {
            let start = events.len();
            for ev in &t.events {
                let mut ev = ev.clone();
                ev.index = (events.len() + 1) as u32;
                events.push(ev);
            }
            spans.push(ExecSpan {
                start,
                end: events.len(),
                aborted: t.aborted(),
            });
        }
        Some(Trace {
            events,
            initial_store: first.initial_store.clone(),
            final_store: traces.last()?.final_store.clone(),
            spans,
            names: first.names.clone(),
        })
    }
}

/// The maximal subsequence of events whose object is `o`, with original
/// indices preserved as annotations. Stores are restricted to `o`.
pub fn project_trace(t: &Trace, o: ObjectId) -> Trace {
    let events: Vec<Event> = t.events.iter().filter(|e| e.object == o).cloned().collect();
    let spans = t
        .spans
        .iter()
        .map(|s| {
            let start = t.events[..s.start].iter().filter(|e| e.object == o).count();
            let inside = t.events[s.start..s.end]
                .iter()
                .filter(|e| e.object == o)
                .count();
            ExecSpan {
                start,
                end: start + inside,
                aborted: s.aborted,
            }
        })
        .collect();
    Trace {
        events,
        initial_store: t.initial_store.restrict(o),
        final_store: t.final_store.restrict(o),
        spans,
        names: t.names.clone(),
    }
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Serialize, Deserialize)]
struct EventJson {
    i: u32,
    obj: String,
    cmd: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rw: Option<String>,
    depth: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    val: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sel: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct TraceJson {
    #[serde(rename = "formatVersion")]
    format_version: u32,
    objects: Vec<String>,
    #[serde(rename = "initialStore")]
    initial_store: Value,
    #[serde(rename = "finalStore")]
    final_store: Value,
    aborted: bool,
    spans: Vec<ExecSpan>,
    events: Vec<EventJson>,
}

pub fn trace_to_json(t: &Trace, ctx: &CodeContext) -> Value {
    let events = t
        .events
        .iter()
        .map(|e| EventJson {
            i: e.index,
            obj: t.name_of(e.object).to_string(),
            cmd: e.text.clone(),
            field: e.access.as_ref().map(|a| a.field.0.clone()),
            key: e.access.as_ref().and_then(|a| a.key),
            rw: e.access.as_ref().map(|a| {
                match a.rw {
                    Rw::Read => "r",
                    Rw::Write => "w",
                }
                .to_string()
            }),
            depth: e.depth_after,
            val: e.value,
            sel: e.selector,
        })
        .collect();
    let json = TraceJson {
        format_version: TRACE_FORMAT_VERSION,
        objects: t.names.iter().map(|n| n.0.clone()).collect(),
        initial_store: t.initial_store.to_json(ctx),
        final_store: t.final_store.to_json(ctx),
        aborted: t.aborted(),
        spans: t.spans.clone(),
        events,
    };
    serde_json::to_value(json).expect("trace serialization")
}

pub fn trace_from_json(value: &Value, ctx: &CodeContext) -> Result<Trace, String> {
    let json: TraceJson =
        serde_json::from_value(value.clone()).map_err(|e| format!("trace file: {e}"))?;
    if json.format_version != TRACE_FORMAT_VERSION {
        return Err(format!(
            "unsupported trace format version {}",
            json.format_version
        ));
    }
    let names: Vec<ObjectName> = json.objects.iter().map(|s| ObjectName(s.clone())).collect();
    let id_of = |name: &str| -> Result<ObjectId, String> {
        names
            .iter()
            .position(|n| n.0 == name)
            .map(|i| ObjectId(i as u32))
            .ok_or_else(|| format!("trace event names unknown object `{name}`"))
    };
    let mut events = Vec::with_capacity(json.events.len());
    for e in &json.events {
        let kind = match e.cmd.as_str() {
            "enter" => EventKind::Enter,
            "return" => EventKind::Return,
            "skip;" => EventKind::Skip,
            s if s.starts_with("assert") => EventKind::Assert,
            _ => match e.rw.as_deref() {
                Some("r") => EventKind::Read,
                Some("w") => EventKind::Write,
                _ => EventKind::Assign,
            },
        };
        let access = match (&e.field, &e.rw) {
            (Some(f), Some(rw)) => Some(Access {
                field: FieldName(f.clone()),
                key: e.key,
                rw: if rw == "r" { Rw::Read } else { Rw::Write },
            }),
            _ => None,
        };
        events.push(Event {
            index: e.i,
            object: id_of(&e.obj)?,
            kind,
            text: e.cmd.clone(),
            access,
            depth_after: e.depth,
            value: e.val,
            selector: e.sel,
        });
    }
    Ok(Trace {
        events,
        initial_store: Store::from_json(&json.initial_store, ctx)?,
        final_store: Store::from_json(&json.final_store, ctx)?,
        spans: json.spans,
        names,
    })
}
