//! Invocation structure of a recorded trace, rebuilt from events alone.
//! This is a second, independent implementation of the nesting rules the
//! monitor applies online (direct self-calls merge into the running
//! invocation; re-entry through another object is a callback).

use crate::interp::{EventKind, Trace};
use crate::lang::ObjectId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceInvocation {
    pub id: usize,
    pub obj: ObjectId,
    /// Nearest enclosing invocation of the same object; `Some` makes this a
    /// callback.
    pub parent: Option<usize>,
    /// Index of the complete execution (span) this invocation runs in.
    pub exec_index: usize,
    /// Positions into the trace's event vector, in order. Includes the
    /// invocation's enter and return and any direct self-call frames, but
    /// not the events of nested invocations.
    pub event_positions: Vec<usize>,
}

impl TraceInvocation {
    pub fn first_position(&self) -> usize {
        *self.event_positions.first().expect("invocations are nonempty")
    }
}

/// Extracts all invocations of `o` from a run trace. Aborted spans are
/// skipped.
pub fn trace_invocations(trace: &Trace, o: ObjectId) -> Vec<TraceInvocation> {
    let mut out: Vec<TraceInvocation> = Vec::new();
    for (exec_index, span) in trace.spans.iter().enumerate() {
        if span.aborted {
            continue;
        }
        // Stack entries: (object, Some(invocation id of `o`) when the frame
        // belongs to an o-invocation record, None for other objects).
        let mut stack: Vec<(ObjectId, Option<usize>)> = Vec::new();
        for pos in span.start..span.end {
            let ev = &trace.events[pos];
            match ev.kind {
                EventKind::Enter => {
                    let merged_into = match stack.last() {
                        Some(&(top_obj, inv)) if top_obj == ev.object => Some(inv),
                        _ => None,
                    };
                    let inv = match merged_into {
                        Some(inv) => inv,
                        None if ev.object == o => {
                            let parent = stack
                                .iter()
                                .rev()
                                .find(|(obj, _)| *obj == o)
                                .and_then(|(_, inv)| *inv);
                            let id = out.len();
                            out.push(TraceInvocation {
                                id,
                                obj: o,
                                parent,
                                exec_index,
                                event_positions: Vec::new(),
                            });
                            Some(id)
                        }
                        None => None,
                    };
                    stack.push((ev.object, inv));
                    if let Some(id) = inv {
                        out[id].event_positions.push(pos);
                    }
                }
                EventKind::Return => {
                    if let Some((_, Some(id))) = stack.last() {
                        out[*id].event_positions.push(pos);
                    }
                    stack.pop();
                }
                _ => {
                    if let Some((_, Some(id))) = stack.last() {
                        out[*id].event_positions.push(pos);
                    }
                }
            }
        }
    }
    out
}
