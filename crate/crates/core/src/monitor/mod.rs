//! Online conflict-ECF monitor.
//!
//! Instrumentation hooks carve each complete execution into segments:
//! maximal runs of transitions with the same active object. A call from an
//! object to itself does not break the current segment. Each segment carries
//! the read and write sets of (field, key) locations it touched, plus its
//! depth and index both globally and projected per object.
//!
//! When the execution returns to a quiescent state the analysis runs: a
//! commutativity matrix of callback segments against the prefix and suffix
//! of each enclosing invocation, an invocation-order-constraint graph per
//! object, and a cycle check. An acyclic graph certifies the projected
//! execution conflict-ECF and a topological order of the invocations is the
//! reordering witness; a cycle is reported as the culprit.

mod analysis;

pub use analysis::{
    calculate_commutativity_matrix, calculate_ioc, check_ecf, MatrixEntry, ObjectAnalysis,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{Event, EventKind, ExecObserver, Trace};
use crate::lang::{CodeContext, FieldName, ObjectId, ObjectName};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// A memory location: a scalar field, or one key of a map field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub field: FieldName,
    pub key: Option<i64>,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.key {
            Some(k) => write!(f, "{}[{}]", self.field, k),
            None => write!(f, "{}", self.field),
        }
    }
}

pub type LocSet = BTreeSet<Location>;

/// Read/write-set commutativity: no read/write or write/write overlap.
pub fn sets_commute(r1: &LocSet, w1: &LocSet, r2: &LocSet, w2: &LocSet) -> bool {
    r1.intersection(w2).next().is_none()
        && r2.intersection(w1).next().is_none()
        && w1.intersection(w2).next().is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InvId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub obj: ObjectId,
    pub inv: InvId,
    pub reads: LocSet,
    pub writes: LocSet,
    /// 1-based creation order across the whole execution.
    pub global_index: u32,
    /// Stack depth (0-based) of invocation records at creation.
    pub global_depth: u32,
    /// 1-based position among this object's segments.
    pub proj_index: u32,
    /// Nesting depth among invocations of the same object, 0-based.
    pub proj_depth: u32,
}

/// Segment commutativity.
pub fn commute(a: &Segment, b: &Segment) -> bool {
    sets_commute(&a.reads, &a.writes, &b.reads, &b.writes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub id: InvId,
    pub obj: ObjectId,
    /// Invocation record below this one on the stack, of any object.
    pub caller: Option<InvId>,
    /// Nearest enclosing invocation of the same object, when this is a
    /// callback.
    pub parent_same_obj: Option<InvId>,
    pub proj_depth: u32,
    /// Segments in creation order.
    pub segments: Vec<SegmentId>,
}

/// The instrumented form of one complete execution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionRecord {
    pub segments: Vec<Segment>,
    pub invocations: Vec<Invocation>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MonitorError {
    #[error("instrumentation fault: {0}")]
    InstrumentationFault(String),
    #[error("prefix/suffix precondition: invocation does not enclose the segment")]
    NotEnclosed,
}

impl ExecutionRecord {
    pub fn segment(&self, id: SegmentId) -> &Segment {
        &self.segments[id.0]
    }

    pub fn invocation(&self, id: InvId) -> &Invocation {
        &self.invocations[id.0]
    }

    fn first_last(&self, inv: &Invocation) -> (u32, u32) {
        let first = self.segment(*inv.segments.first().expect("nonempty")).proj_index;
        let last = self.segment(*inv.segments.last().expect("nonempty")).proj_index;
        (first, last)
    }

    /// Same object, and the segment's projected index lies strictly between
    /// the invocation's first and last segment. Segments of the invocation
    /// itself are not enclosed by it.
    pub fn encloses(&self, inv: InvId, seg: SegmentId) -> bool {
        let s = self.segment(seg);
        if s.inv == inv {
            return false;
        }
        let invocation = self.invocation(inv);
        if invocation.obj != s.obj {
            return false;
        }
        let (first, last) = self.first_last(invocation);
        first < s.proj_index && s.proj_index < last
    }

    /// The enclosing invocation's segments before `seg`, in order.
    pub fn prefix_set(&self, inv: InvId, seg: SegmentId) -> Result<Vec<SegmentId>, MonitorError> {
        if !self.encloses(inv, seg) {
            return Err(MonitorError::NotEnclosed);
        }
        let cut = self.segment(seg).proj_index;
        Ok(self
            .invocation(inv)
            .segments
            .iter()
            .copied()
            .filter(|s| self.segment(*s).proj_index < cut)
            .collect())
    }

    /// The enclosing invocation's segments after `seg`, in order.
    pub fn suffix_set(&self, inv: InvId, seg: SegmentId) -> Result<Vec<SegmentId>, MonitorError> {
        if !self.encloses(inv, seg) {
            return Err(MonitorError::NotEnclosed);
        }
        let cut = self.segment(seg).proj_index;
        Ok(self
            .invocation(inv)
            .segments
            .iter()
            .copied()
            .filter(|s| self.segment(*s).proj_index > cut)
            .collect())
    }

    pub fn objects(&self) -> Vec<ObjectId> {
        let mut seen = BTreeSet::new();
        for inv in &self.invocations {
            seen.insert(inv.obj);
        }
        seen.into_iter().collect()
    }

    pub fn union_rw(&self, segs: &[SegmentId]) -> (LocSet, LocSet) {
        let mut r = LocSet::new();
        let mut w = LocSet::new();
        for s in segs {
            let seg = self.segment(*s);
            r.extend(seg.reads.iter().cloned());
            w.extend(seg.writes.iter().cloned());
        }
        (r, w)
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Ecf,
    NotEcf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectVerdict {
    pub obj: String,
    pub verdict: Verdict,
    /// Topological witness order over this object's invocations (1-based
    /// per-object ordinals), present when the verdict is Ecf.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_order: Option<Vec<u32>>,
    /// A constraint cycle (per-object ordinals), present when NotEcf.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<u32>>,
    pub m: u32,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcfReport {
    #[serde(rename = "execId")]
    pub exec_id: usize,
    pub objects: Vec<ObjectVerdict>,
    pub aborted: bool,
}

impl EcfReport {
    pub fn verdict_for(&self, obj: &str) -> Option<Verdict> {
        self.objects.iter().find(|o| o.obj == obj).map(|o| o.verdict)
    }

    pub fn all_ecf(&self) -> bool {
        self.objects.iter().all(|o| o.verdict == Verdict::Ecf)
    }
}

/// Sizes of the data the analysis of one execution kept, as counted
/// elements. Used by the benchmark harness as the memory measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisStats {
    pub segments: usize,
    pub invocations: usize,
    pub matrix_entries: usize,
    pub set_elements: usize,
    pub ioc_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzedExecution {
    pub record: ExecutionRecord,
    pub report: EcfReport,
    pub analyses: Vec<ObjectAnalysis>,
    pub stats: AnalysisStats,
}

// ---------------------------------------------------------------------------
// The monitor state machine

#[derive(Debug)]
struct StackRec {
    inv: InvId,
    /// Direct self-call nesting on top of this record.
    nesting: u32,
}

/// Hook-driven monitor for one scenario run. Executions are analyzed as they
/// reach quiescence; aborted executions are skipped and counted.
pub struct Monitor {
    names: Vec<ObjectName>,
    record: ExecutionRecord,
    stack: Vec<StackRec>,
    open_per_obj: Vec<u32>,
    seg_count_per_obj: Vec<u32>,
    cur_segment: Option<SegmentId>,
    exec_counter: usize,
    pub finished: Vec<AnalyzedExecution>,
    pub aborted_executions: usize,
}

impl Monitor {
    pub fn new(ctx: &CodeContext) -> Self {
        let names = (0..ctx.len())
            .map(|i| ctx.name_of(ObjectId(i as u32)).expect("dense ids").clone())
            .collect();
        Self::with_names(names)
    }

    /// Monitor over explicit object names, for synthetic hook streams.
    pub fn with_names(names: Vec<ObjectName>) -> Self {
        let slots = names.len();
        Monitor {
            names,
            record: ExecutionRecord::default(),
            stack: Vec::new(),
            open_per_obj: vec![0; slots],
            seg_count_per_obj: vec![0; slots],
            cur_segment: None,
            exec_counter: 0,
            finished: Vec::new(),
            aborted_executions: 0,
        }
    }

    fn name_of(&self, obj: ObjectId) -> String {
        self.names
            .get(obj.0 as usize)
            .map(|n| n.0.clone())
            .unwrap_or_else(|| format!("#{}", obj.0))
    }

    fn reset_execution(&mut self) {
        self.record = ExecutionRecord::default();
        self.stack.clear();
        self.open_per_obj.fill(0);
        self.seg_count_per_obj.fill(0);
        self.cur_segment = None;
    }

    fn slot(&mut self, obj: ObjectId) -> usize {
        let i = obj.0 as usize;
        if i >= self.open_per_obj.len() {
            self.open_per_obj.resize(i + 1, 0);
            self.seg_count_per_obj.resize(i + 1, 0);
        }
        i
    }

    fn add_segment(&mut self, inv: InvId) {
        let obj = self.record.invocation(inv).obj;
        let proj_index = {
            let i = self.slot(obj);
            self.seg_count_per_obj[i] += 1;
            self.seg_count_per_obj[i]
        };
        let id = SegmentId(self.record.segments.len());
        let seg = Segment {
            obj,
            inv,
            reads: LocSet::new(),
            writes: LocSet::new(),
            global_index: (self.record.segments.len() + 1) as u32,
            global_depth: (self.stack.len().max(1) - 1) as u32,
            proj_index,
            proj_depth: self.record.invocation(inv).proj_depth,
        };
        self.record.segments.push(seg);
        self.record.invocations[inv.0].segments.push(id);
        self.cur_segment = Some(id);
    }

    /// A frame for `object` was pushed. Opens a new segment and invocation
    /// unless the active object is already `object` (a self-call).
    pub fn upon_invocation(&mut self, object: ObjectId) {
        if self.stack.is_empty() {
            self.reset_execution();
        } else if let Some(top) = self.stack.last_mut() {
            let top_obj = self.record.invocation(top.inv).obj;
            if top_obj == object {
                top.nesting += 1;
                return;
            }
        }
        let caller = self.stack.last().map(|r| r.inv);
        let parent_same_obj = self
            .stack
            .iter()
            .rev()
            .map(|r| r.inv)
            .find(|i| self.record.invocation(*i).obj == object);
        let proj_depth = {
            let i = self.slot(object);
            self.open_per_obj[i]
        };
        let id = InvId(self.record.invocations.len());
        self.record.invocations.push(Invocation {
            id,
            obj: object,
            caller,
            parent_same_obj,
            proj_depth,
            segments: Vec::new(),
        });
        self.stack.push(StackRec { inv: id, nesting: 0 });
        let i = self.slot(object);
        self.open_per_obj[i] += 1;
        self.add_segment(id);
    }

    /// A frame for `object` was popped. On return to quiescence the analysis
    /// fires and the execution's report is appended to `finished`.
    pub fn upon_return(&mut self, object: ObjectId) -> Result<(), MonitorError> {
        let Some(top) = self.stack.last_mut() else {
            return Err(MonitorError::InstrumentationFault(
                "return without a matching invocation".to_string(),
            ));
        };
        let top_obj = self.record.invocation(top.inv).obj;
        if top_obj != object {
            return Err(MonitorError::InstrumentationFault(format!(
                "return from {} while {} is active",
                self.name_of(object),
                self.name_of(top_obj)
            )));
        }
        if top.nesting > 0 {
            top.nesting -= 1;
            return Ok(());
        }
        self.stack.pop();
        let i = self.slot(object);
        self.open_per_obj[i] = self.open_per_obj[i].saturating_sub(1);
        match self.stack.last() {
            Some(resumed) => {
                let inv = resumed.inv;
                self.add_segment(inv);
            }
            None => self.analyze_completed(false),
        }
        Ok(())
    }

    pub fn upon_read(&mut self, object: ObjectId, field: &FieldName, key: Option<i64>) {
        if let Some(cur) = self.cur_segment {
            debug_assert_eq!(self.record.segment(cur).obj, object);
            self.record.segments[cur.0].reads.insert(Location {
                field: field.clone(),
                key,
            });
        }
    }

    pub fn upon_write(&mut self, object: ObjectId, field: &FieldName, key: Option<i64>) {
        if let Some(cur) = self.cur_segment {
            debug_assert_eq!(self.record.segment(cur).obj, object);
            self.record.segments[cur.0].writes.insert(Location {
                field: field.clone(),
                key,
            });
        }
    }

    /// Marks the in-flight execution aborted: its instrumentation is
    /// discarded and only a counter is kept.
    pub fn note_abort(&mut self) {
        self.analyze_completed(true);
    }

    fn analyze_completed(&mut self, aborted: bool) {
        let exec_id = self.exec_counter;
        self.exec_counter += 1;
        if aborted {
            self.aborted_executions += 1;
            self.finished.push(AnalyzedExecution {
                record: ExecutionRecord::default(),
                report: EcfReport {
                    exec_id,
                    objects: vec![],
                    aborted: true,
                },
                analyses: vec![],
                stats: AnalysisStats::default(),
            });
            self.reset_execution();
            return;
        }
        let record = std::mem::take(&mut self.record);
        let analyzed = analysis::check_ecf_all(record, exec_id, &self.names);
        self.finished.push(analyzed);
        self.reset_execution();
    }

    /// Replays a recorded trace through the hooks, skipping aborted spans.
    pub fn analyze_trace(&mut self, trace: &Trace) {
        for span in &trace.spans {
            if span.aborted {
                self.note_abort();
                continue;
            }
            for ev in &trace.events[span.start..span.end] {
                self.feed(ev);
            }
        }
    }

    fn feed(&mut self, ev: &Event) {
        match ev.kind {
            EventKind::Enter => self.upon_invocation(ev.object),
            EventKind::Return => {
                // Trace events are well-formed by construction.
                let _ = self.upon_return(ev.object);
            }
            EventKind::Read => {
                if let Some(a) = &ev.access {
                    let field = a.field.clone();
                    self.upon_read(ev.object, &field, a.key);
                }
            }
            EventKind::Write => {
                if let Some(a) = &ev.access {
                    let field = a.field.clone();
                    self.upon_write(ev.object, &field, a.key);
                }
            }
            _ => {}
        }
    }
}

impl ExecObserver for Monitor {
    fn on_event(&mut self, ev: &Event) {
        self.feed(ev);
    }

    fn on_execution_end(&mut self, aborted: bool) {
        if aborted {
            self.note_abort();
        }
    }
}

#[cfg(test)]
mod tests;
