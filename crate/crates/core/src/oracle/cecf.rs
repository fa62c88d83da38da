//! Conflict-equivalence checking by exhaustive reordering.
//!
//! Candidates extract every callback invocation of the object to a quiescent
//! slot of the run (before or after each complete execution), keeping the
//! original relative order inside each slot; the elided call sites are
//! justified by havoc transitions, which are not themselves trace events.
//! Restricting to slot assignments loses no completeness: inside a witness,
//! callbacks moved to the same side can keep their original mutual order.

use crate::interp::{events_conflict, Event, Trace};
use crate::lang::ObjectId;

use super::structure::{trace_invocations, TraceInvocation};
use super::{CecfConfig, OracleError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderCandidate {
    /// Invocation ids (into the extraction of the original trace) in the
    /// order the candidate runs them.
    pub ordering: Vec<usize>,
    /// The candidate's projected events, as positions into the original
    /// trace's event vector.
    pub event_positions: Vec<usize>,
    /// Callbacks that were extracted, with their original first position;
    /// each stands for a call site completed by a havoc.
    pub havoc_markers: Vec<(usize, usize)>,
}

/// All callback-free reorderings of `o`'s invocations in `t`.
pub fn enumerate_callback_free_reorderings(
    t: &Trace,
    o: ObjectId,
    cfg: &CecfConfig,
) -> Result<Vec<ReorderCandidate>, OracleError> {
    let invs = trace_invocations(t, o);
    if invs.len() > cfg.max_invocations {
        return Err(OracleError::TooManyInvocations(
            invs.len(),
            cfg.max_invocations,
        ));
    }
    let callbacks: Vec<usize> = invs
        .iter()
        .filter(|i| i.parent.is_some())
        .map(|i| i.id)
        .collect();
    let exec_count = t.spans.len();
    let slot_count = exec_count + 1; // before each execution, plus after the last
    let total = (slot_count as u64).saturating_pow(callbacks.len() as u32);
    if total > cfg.max_candidates as u64 {
        return Err(OracleError::TooManyCandidates(
            total as usize,
            cfg.max_candidates,
        ));
    }

    let mut out = Vec::with_capacity(total as usize);
    let mut assignment = vec![0usize; callbacks.len()];
    loop {
        out.push(build_candidate(t, &invs, &callbacks, &assignment, slot_count));
        // next assignment, lexicographic
        let mut i = callbacks.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            assignment[i] += 1;
            if assignment[i] < slot_count {
                break;
            }
            assignment[i] = 0;
        }
    }
}

fn build_candidate(
    t: &Trace,
    invs: &[TraceInvocation],
    callbacks: &[usize],
    assignment: &[usize],
    slot_count: usize,
) -> ReorderCandidate {
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); slot_count];
    for (cb_pos, &cb) in callbacks.iter().enumerate() {
        slots[assignment[cb_pos]].push(cb);
    }
    // Original relative order within a slot.
    for slot in &mut slots {
        slot.sort_by_key(|&id| invs[id].first_position());
    }

    let mut ordering = Vec::with_capacity(invs.len());
    let mut positions = Vec::new();
    let mut havoc_markers = Vec::new();
    for (exec_index, span) in t.spans.iter().enumerate() {
        for &cb in &slots[exec_index] {
            ordering.push(cb);
            positions.extend(invs[cb].event_positions.iter().copied());
        }
        // Root invocations of this execution, in original order.
        let mut roots: Vec<&TraceInvocation> = invs
            .iter()
            .filter(|i| i.exec_index == exec_index && i.parent.is_none())
            .collect();
        roots.sort_by_key(|i| i.first_position());
        for root in roots {
            ordering.push(root.id);
            positions.extend(root.event_positions.iter().copied());
        }
        let _ = span;
    }
    for &cb in &slots[slot_count - 1] {
        ordering.push(cb);
        positions.extend(invs[cb].event_positions.iter().copied());
    }
    for &cb in callbacks {
        havoc_markers.push((cb, invs[cb].first_position()));
    }
    ReorderCandidate {
        ordering,
        event_positions: positions,
        havoc_markers,
    }
}

/// Materializes the candidate as a trace (events re-indexed, stores copied
/// from the original).
pub fn candidate_trace(t: &Trace, cand: &ReorderCandidate) -> Trace {
    let events: Vec<Event> = cand
        .event_positions
        .iter()
        .enumerate()
        .map(|(i, &pos)| {
            let mut ev = t.events[pos].clone();
            ev.index = (i + 1) as u32;
            ev
        })
        .collect();
    let spans = vec![crate::interp::ExecSpan {
        start: 0,
        end: events.len(),
        aborted: false,
    }];
    Trace {
        events,
        initial_store: t.initial_store.clone(),
        final_store: t.final_store.clone(),
        spans,
        names: t.names.clone(),
    }
}

/// The trace induced by running `o`'s invocations whole, in the given order.
/// Used to validate the monitor's topological witness.
pub fn induced_trace_for_order(t: &Trace, o: ObjectId, order: &[usize]) -> Trace {
    let invs = trace_invocations(t, o);
    let mut positions = Vec::new();
    for &id in order {
        positions.extend(invs[id].event_positions.iter().copied());
    }
    let cand = ReorderCandidate {
        ordering: order.to_vec(),
        event_positions: positions,
        havoc_markers: Vec::new(),
    };
    candidate_trace(t, &cand)
}

/// Object conflict equivalence: the projections on `o` have equal length, a
/// permutation matches events pointwise, and every conflicting pair keeps
/// its relative order.
///
/// Events are occurrences, not just syntax: the permutation must respect
/// program order inside each invocation, so it maps whole invocations onto
/// whole invocations with identical event content. Without that, two
/// syntactically identical writes from different invocations could be
/// cross-matched even though they write different runtime values, and
/// final-state equivalence would no longer follow. Identical whole
/// invocations are matched in order of occurrence, which is as general as
/// any matching.
pub fn is_conflict_equivalent(t1: &Trace, t2: &Trace, o: ObjectId) -> bool {
    // Positions of o's events within the non-aborted spans, projected order.
    let proj =
        |t: &Trace| -> Vec<usize> {
            t.spans
                .iter()
                .filter(|s| !s.aborted)
                .flat_map(|s| s.start..s.end)
                .filter(|&pos| t.events[pos].object == o)
                .collect()
        };
    let pos1 = proj(t1);
    let pos2 = proj(t2);
    if pos1.len() != pos2.len() {
        return false;
    }
    let n = pos1.len();
    let proj_index_2: std::collections::HashMap<usize, usize> =
        pos2.iter().enumerate().map(|(pi, &p)| (p, pi)).collect();

    let invs1 = trace_invocations(t1, o);
    let invs2 = trace_invocations(t2, o);
    if invs1.len() != invs2.len() {
        return false;
    }
    let blocks_equal = |a: &TraceInvocation, b: &TraceInvocation| {
        a.event_positions.len() == b.event_positions.len()
            && a.event_positions
                .iter()
                .zip(&b.event_positions)
                .all(|(&x, &y)| t1.events[x].identity() == t2.events[y].identity())
    };

    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; invs2.len()];
    for inv1 in &invs1 {
        let Some(j) = invs2
            .iter()
            .position(|inv2| !used[inv2.id] && blocks_equal(inv1, inv2))
        else {
            return false;
        };
        used[j] = true;
        for (k, &p1_pos) in inv1.event_positions.iter().enumerate() {
            let pi1 = pos1.binary_search(&p1_pos).expect("o-event position");
            let p2_pos = invs2[j].event_positions[k];
            perm[pi1] = proj_index_2[&p2_pos];
        }
    }
    if perm.iter().any(|&p| p == usize::MAX) {
        return false;
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if events_conflict(&t1.events[pos1[i]], &t1.events[pos1[j]]) && perm[i] > perm[j] {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CecfOutcome {
    Ecf { witness: ReorderCandidate },
    NotEcf,
}

/// Conflict-ECF verdict for `o` in `t`: searches the candidate set in
/// canonical order and returns the first conflict-equivalent reordering.
pub fn decf_c_oracle(
    t: &Trace,
    o: ObjectId,
    cfg: &CecfConfig,
) -> Result<CecfOutcome, OracleError> {
    let candidates = enumerate_callback_free_reorderings(t, o, cfg)?;
    for cand in candidates {
        let ct = candidate_trace(t, &cand);
        if is_conflict_equivalent(t, &ct, o) {
            return Ok(CecfOutcome::Ecf { witness: cand });
        }
    }
    Ok(CecfOutcome::NotEcf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_complete_execution, CallMode, NoObserver, Store, TopCall, Trace};
    use crate::lang::{parse_contract, CodeContext, ObjectId};

    pub(crate) fn run_one(ctx: &CodeContext, target: u32, arg: i64, store: Store) -> Trace {
        let top = TopCall {
            target: ObjectId(target),
            selector: 0,
            arg,
        };
        run_complete_execution(
            ctx,
            store,
            &top,
            &mut CallMode::Concrete,
            100_000,
            &mut NoObserver,
        )
        .unwrap()
        .1
    }

    #[test]
    fn callback_free_input_yields_only_itself() {
        let ctx = CodeContext::from_contracts(vec![parse_contract(
            "contract o { field f; enter { var x; x := f; f := x; return; } }",
        )
        .unwrap()]);
        let t = run_one(&ctx, 0, 0, Store::new());
        let cands =
            enumerate_callback_free_reorderings(&t, ObjectId(0), &CecfConfig::default()).unwrap();
        assert_eq!(cands.len(), 1);
        let ct = candidate_trace(&t, &cands[0]);
        assert!(is_conflict_equivalent(&t, &ct, ObjectId(0)));
    }

    #[test]
    fn one_caller_one_callback_with_following_execution_yields_three() {
        // o calls x, x calls back o; then an unrelated execution of y runs.
        // The callback can land in any of the three quiescent slots.
        let ctx = CodeContext::from_contracts(vec![
            parse_contract(
                "contract o { field f; enter { var z, d; d := arg;
                   if d == 1 { z := call x(0); }
                   f := d;
                   return; } }",
            )
            .unwrap(),
            parse_contract("contract x { enter { var z; z := call o(0); return; } }").unwrap(),
            parse_contract("contract y { field g; enter { var v; v := 1; g := v; return; } }")
                .unwrap(),
        ]);
        let t1 = run_one(&ctx, 0, 1, Store::new());
        let t2 = run_one(&ctx, 2, 0, t1.final_store.clone());
        let run = Trace::concat(&[t1, t2]).unwrap();
        let cands =
            enumerate_callback_free_reorderings(&run, ObjectId(0), &CecfConfig::default())
                .unwrap();
        assert_eq!(cands.len(), 3);
    }

    #[test]
    fn identity_is_conflict_equivalent() {
        let ctx = CodeContext::from_contracts(vec![parse_contract(
            "contract o { field f; enter { var x; x := f; f := x; return; } }",
        )
        .unwrap()]);
        let t = run_one(&ctx, 0, 0, Store::new());
        assert!(is_conflict_equivalent(&t, &t, ObjectId(0)));
    }

    #[test]
    fn read_only_callback_is_ecf() {
        let ctx = CodeContext::from_contracts(vec![
            parse_contract(
                "contract o { field f; enter { var z, d, v; d := arg;
                   if d == 1 { v := 1; f := v; z := call x(0); v := f; }
                   if d == 0 { v := f; ret := v; }
                   return; } }",
            )
            .unwrap(),
            parse_contract("contract x { enter { var z; z := call o(0); return; } }").unwrap(),
        ]);
        let t = run_one(&ctx, 0, 1, Store::new());
        // Callback only reads f; caller writes before and reads after: the
        // callback commutes with the suffix, so it reorders after.
        match decf_c_oracle(&t, ObjectId(0), &CecfConfig::default()).unwrap() {
            CecfOutcome::Ecf { .. } => {}
            CecfOutcome::NotEcf => panic!("read-only callback must be conflict-ECF"),
        }
    }
}
