//! Post-quiescence analysis: commutativity matrix, invocation-order
//! constraints, and the per-object cycle check.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::lang::{ObjectId, ObjectName};

use super::{
    sets_commute, AnalysisStats, AnalyzedExecution, EcfReport, ExecutionRecord, InvId, LocSet,
    ObjectVerdict, SegmentId, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixEntry {
    pub inv: InvId,
    pub seg: SegmentId,
    pub prefix_commutes: bool,
    pub suffix_commutes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectAnalysis {
    pub obj: ObjectId,
    /// This object's invocations in creation order; position = ordinal - 1.
    pub invs: Vec<InvId>,
    pub matrix: Vec<MatrixEntry>,
    /// First (inv, seg) whose segment commutes with neither its prefix nor
    /// its suffix; the pseudo-code aborts here, we record it and go on.
    pub early_abort: Option<(InvId, SegmentId)>,
    pub edges: BTreeSet<(InvId, InvId)>,
    pub verdict: Verdict,
    pub witness_order: Option<Vec<InvId>>,
    pub cycle: Option<Vec<InvId>>,
}

/// For every segment enclosed by an invocation of the same object, whether
/// it commutes with the union of the invocation's segments before it
/// (prefix) and after it (suffix). Runs one incremental sweep per
/// invocation, so the whole matrix costs O(n * m * k) set work.
pub fn calculate_commutativity_matrix(
    record: &ExecutionRecord,
    invs: &[InvId],
    obj_segments: &[SegmentId],
) -> (Vec<MatrixEntry>, Option<(InvId, SegmentId)>) {
    let mut matrix = Vec::new();
    let mut early_abort = None;
    for &inv_id in invs {
        let inv = record.invocation(inv_id);
        if inv.segments.len() < 2 {
            continue; // nothing can be enclosed
        }
        let first = record.segment(inv.segments[0]).proj_index;
        let last = record.segment(*inv.segments.last().unwrap()).proj_index;

        // Suffix unions from the right: suffix_acc[j] covers own segments j..
        let own = &inv.segments;
        let mut suffix_acc: Vec<(LocSet, LocSet)> = vec![(LocSet::new(), LocSet::new()); own.len() + 1];
        for j in (0..own.len()).rev() {
            let seg = record.segment(own[j]);
            let mut r = suffix_acc[j + 1].0.clone();
            let mut w = suffix_acc[j + 1].1.clone();
            r.extend(seg.reads.iter().cloned());
            w.extend(seg.writes.iter().cloned());
            suffix_acc[j] = (r, w);
        }

        let mut prefix_r = LocSet::new();
        let mut prefix_w = LocSet::new();
        let mut own_ptr = 0usize;
        for &seg_id in obj_segments {
            let seg = record.segment(seg_id);
            if seg.proj_index < first {
                continue;
            }
            if seg.proj_index > last {
                break;
            }
            if seg.inv == inv_id {
                prefix_r.extend(seg.reads.iter().cloned());
                prefix_w.extend(seg.writes.iter().cloned());
                own_ptr += 1;
                continue;
            }
            let (suffix_r, suffix_w) = &suffix_acc[own_ptr];
            let prefix_commutes = sets_commute(&prefix_r, &prefix_w, &seg.reads, &seg.writes);
            let suffix_commutes = sets_commute(suffix_r, suffix_w, &seg.reads, &seg.writes);
            if !prefix_commutes && !suffix_commutes && early_abort.is_none() {
                early_abort = Some((inv_id, seg_id));
            }
            matrix.push(MatrixEntry {
                inv: inv_id,
                seg: seg_id,
                prefix_commutes,
                suffix_commutes,
            });
        }
    }
    (matrix, early_abort)
}

/// Builds the order constraints between invocations of one object.
///
/// A callback segment that does not commute with its prefix pins the
/// enclosing invocation before the callback's invocation; one that does not
/// commute with its suffix pins the callback before the encloser. Two
/// invocations where neither encloses the other additionally keep their
/// original order whenever they conflict at all: their whole event blocks
/// are reordered as units, so a conflict pins the original direction.
pub fn calculate_ioc(
    record: &ExecutionRecord,
    invs: &[InvId],
    matrix: &[MatrixEntry],
) -> BTreeSet<(InvId, InvId)> {
    let mut edges = BTreeSet::new();
    for e in matrix {
        let cb = record.segment(e.seg).inv;
        match (e.prefix_commutes, e.suffix_commutes) {
            (false, true) => {
                edges.insert((e.inv, cb));
            }
            (true, false) => {
                edges.insert((cb, e.inv));
            }
            (false, false) => {
                edges.insert((e.inv, cb));
                edges.insert((cb, e.inv));
            }
            (true, true) => {}
        }
    }

    if invs.len() < 2 {
        return edges;
    }
    // Non-nested pairs: pin original order on conflict.
    let ranges: Vec<(u32, u32)> = invs
        .iter()
        .map(|&i| {
            let inv = record.invocation(i);
            let first = record.segment(inv.segments[0]).proj_index;
            let last = record.segment(*inv.segments.last().unwrap()).proj_index;
            (first, last)
        })
        .collect();
    let unions: Vec<(LocSet, LocSet)> = invs
        .iter()
        .map(|&i| record.union_rw(&record.invocation(i).segments))
        .collect();
    // Invocations that touch nothing conflict with nothing.
    let nonempty: Vec<usize> = (0..invs.len())
        .filter(|&i| !unions[i].0.is_empty() || !unions[i].1.is_empty())
        .collect();
    for (ia, &a) in nonempty.iter().enumerate() {
        for &b in &nonempty[(ia + 1)..] {
            let (fa, la) = ranges[a];
            let (fb, lb) = ranges[b];
            let a_encloses_b = fa < fb && lb < la;
            let b_encloses_a = fb < fa && la < lb;
            if a_encloses_b || b_encloses_a {
                continue;
            }
            let (ra, wa) = &unions[a];
            let (rb, wb) = &unions[b];
            if !sets_commute(ra, wa, rb, wb) {
                // Invocations are indexed in creation order: a started first.
                edges.insert((invs[a], invs[b]));
            }
        }
    }
    edges
}

/// Cycle check. Acyclic yields the stable topological order (ties broken by
/// original invocation order) as the reordering witness; otherwise a cycle.
pub fn check_ecf(
    invs: &[InvId],
    edges: &BTreeSet<(InvId, InvId)>,
) -> (Verdict, Option<Vec<InvId>>, Option<Vec<InvId>>) {
    let index_of: BTreeMap<InvId, usize> = invs.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let n = invs.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (from, to) in edges {
        let (f, t) = (index_of[from], index_of[to]);
        out[f].push(t);
        indeg[t] += 1;
    }
    let mut heap: BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut emitted = vec![false; n];
    while let Some(std::cmp::Reverse(i)) = heap.pop() {
        emitted[i] = true;
        order.push(invs[i]);
        for &t in &out[i] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                heap.push(std::cmp::Reverse(t));
            }
        }
    }
    if order.len() == n {
        return (Verdict::Ecf, Some(order), None);
    }

    // Extract one cycle from the remaining subgraph. Every unemitted node
    // has an unemitted predecessor, so walking predecessors must revisit.
    let mut inn: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (from, to) in edges {
        inn[index_of[to]].push(index_of[from]);
    }
    let start = (0..n).find(|&i| !emitted[i]).expect("cycle exists");
    let mut path = Vec::new();
    let mut on_path = vec![false; n];
    let mut cur = start;
    let cycle = loop {
        if on_path[cur] {
            let pos = path.iter().position(|&p| p == cur).unwrap();
            let mut cyc: Vec<InvId> = path[pos..].iter().map(|&i| invs[i]).collect();
            cyc.reverse(); // predecessor walk runs against edge direction
            break cyc;
        }
        on_path[cur] = true;
        path.push(cur);
        cur = *inn[cur]
            .iter()
            .find(|&&p| !emitted[p])
            .expect("unemitted node keeps an unemitted predecessor");
    };
    (Verdict::NotEcf, None, Some(cycle))
}

/// Runs the per-object pipeline over a completed execution.
pub fn check_ecf_all(
    record: ExecutionRecord,
    exec_id: usize,
    names: &[ObjectName],
) -> AnalyzedExecution {
    let mut stats = AnalysisStats {
        segments: record.segments.len(),
        invocations: record.invocations.len(),
        ..AnalysisStats::default()
    };
    stats.set_elements = record
        .segments
        .iter()
        .map(|s| s.reads.len() + s.writes.len())
        .sum();

    let mut analyses = Vec::new();
    let mut verdicts = Vec::new();
    for obj in record.objects() {
        let invs: Vec<InvId> = record
            .invocations
            .iter()
            .filter(|i| i.obj == obj)
            .map(|i| i.id)
            .collect();
        let mut obj_segments: Vec<SegmentId> = record
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.obj == obj)
            .map(|(i, _)| SegmentId(i))
            .collect();
        obj_segments.sort_by_key(|s| record.segment(*s).proj_index);

        let (matrix, early_abort) =
            calculate_commutativity_matrix(&record, &invs, &obj_segments);
        let edges = calculate_ioc(&record, &invs, &matrix);
        let (verdict, witness, cycle) = check_ecf(&invs, &edges);
        debug_assert!(
            early_abort.is_none() || verdict == Verdict::NotEcf,
            "a doubly non-commuting segment always induces a cycle"
        );
        stats.matrix_entries += matrix.len();
        stats.ioc_edges += edges.len();

        let ordinal = |id: InvId| (invs.iter().position(|&i| i == id).unwrap() + 1) as u32;
        let name = names
            .get(obj.0 as usize)
            .map(|n| n.0.clone())
            .unwrap_or_else(|| format!("#{}", obj.0));
        verdicts.push(ObjectVerdict {
            obj: name,
            verdict,
            witness_order: witness.as_ref().map(|w| w.iter().map(|&i| ordinal(i)).collect()),
            cycle: cycle.as_ref().map(|c| c.iter().map(|&i| ordinal(i)).collect()),
            m: obj_segments.len() as u32,
            n: invs.len() as u32,
        });
        analyses.push(ObjectAnalysis {
            obj,
            invs,
            matrix,
            early_abort,
            edges,
            verdict,
            witness_order: witness,
            cycle,
        });
    }
    AnalyzedExecution {
        record,
        report: EcfReport {
            exec_id,
            objects: verdicts,
            aborted: false,
        },
        analyses,
        stats,
    }
}
