//! Bounded configuration-graph exploration of the environment-closed object
//! in product with the depth-2 acceptor.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::interp::Store;
use crate::lang::ObjectId;

use super::compile::{compile_object, eval_cexpr, CompiledObject, Op};
use super::machine::{MEvent, MState, MStep};
use super::{DeciderError, FiniteObjectSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutomatonVariant {
    /// Call sites run callbacks (up to depth 2), then a havoc return.
    Full,
    /// Callback-free restriction: call sites only havoc.
    NoCallbacks,
}

/// The compiled environment-closed transition system.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    pub compiled: CompiledObject,
    pub arg_domain: Vec<i64>,
    pub havoc_domain: Vec<i64>,
    pub selector_count: u32,
    pub variant: AutomatonVariant,
    pub cap: usize,
}

pub fn build_a_o(
    spec: &FiniteObjectSpec,
    variant: AutomatonVariant,
) -> Result<FiniteSystem, DeciderError> {
    let compiled = compile_object(&spec.contract, &spec.field_domains)?;
    Ok(FiniteSystem {
        compiled,
        arg_domain: spec.arg_domain.clone(),
        havoc_domain: spec.havoc_domain.clone(),
        selector_count: spec.contract.methods.len().max(1) as u32,
        variant,
        cap: spec.cap,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct FrameC {
    pc: usize,
    locals: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Config {
    store: Vec<i64>,
    frames: Vec<FrameC>,
    m: MState,
}

/// One choice along a counterexample path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexAction {
    /// Deterministic step (reads, writes, assigns, branches).
    Step,
    /// A call site completed with a havocked return value.
    Havoc(i64),
    /// A callback was entered with this argument and selector.
    EnterCallback(i64, u32),
    /// The active invocation returned.
    Return,
}

/// A configuration whose next command is a call, together with its store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallState {
    pub store: Vec<i64>,
    pub pc: usize,
    pub locals: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Field valuation (location-table order) the window starts from.
    pub initial_valuation: Vec<i64>,
    /// Argument and selector of the window's base invocation, when the
    /// window starts at an invocation entry (not mid-invocation).
    pub base_arg: i64,
    pub base_selector: u32,
    /// Windows seeded from a reachable call state start mid-invocation and
    /// cannot be replayed as one concrete execution from quiescence.
    pub from_call_state: bool,
    pub actions: Vec<CexAction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecfVerdict {
    Secf,
    NotSecf(Counterexample),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeciderReport {
    pub verdict: SecfVerdict,
    pub explored: usize,
    /// Accesses whose key or written value left the declared domains; those
    /// paths are pruned from the model.
    pub clipped_accesses: usize,
    /// Paths that ended in a failed assert (reverted, not analyzed).
    pub aborted_paths: usize,
    pub call_states: usize,
}

struct Explorer<'a> {
    sys: &'a FiniteSystem,
    visited: HashSet<Config>,
    parents: HashMap<Config, (Config, CexAction)>,
    roots: HashMap<Config, (Vec<i64>, i64, u32, bool)>,
    queue: VecDeque<Config>,
    call_states: BTreeSet<CallState>,
    rooted_calls: BTreeSet<CallState>,
    clipped_accesses: usize,
    aborted_paths: usize,
    explored: usize,
}

impl<'a> Explorer<'a> {
    fn new(sys: &'a FiniteSystem) -> Self {
        Explorer {
            sys,
            visited: HashSet::new(),
            parents: HashMap::new(),
            roots: HashMap::new(),
            queue: VecDeque::new(),
            call_states: BTreeSet::new(),
            rooted_calls: BTreeSet::new(),
            clipped_accesses: 0,
            aborted_paths: 0,
            explored: 0,
        }
    }

    fn push_root(&mut self, cfg: Config, arg: i64, selector: u32, from_call_state: bool) {
        if self.visited.insert(cfg.clone()) {
            self.roots
                .insert(cfg.clone(), (cfg.store.clone(), arg, selector, from_call_state));
            self.queue.push_back(cfg);
        }
    }

    fn push_succ(&mut self, from: &Config, action: CexAction, cfg: Config) {
        if self.visited.insert(cfg.clone()) {
            self.parents.insert(cfg.clone(), (from.clone(), action));
            self.queue.push_back(cfg);
        }
    }

    fn trace_back(&self, reject_from: &Config, last: CexAction) -> Counterexample {
        let mut actions = vec![last];
        let mut cur = reject_from.clone();
        while let Some((prev, act)) = self.parents.get(&cur) {
            actions.push(*act);
            cur = prev.clone();
        }
        actions.reverse();
        let (valuation, arg, selector, from_call_state) =
            self.roots.get(&cur).expect("path ends at a root").clone();
        Counterexample {
            initial_valuation: valuation,
            base_arg: arg,
            base_selector: selector,
            from_call_state,
            actions,
        }
    }

    fn seed_quiescent_roots(&mut self) {
        for valuation in all_valuations(&self.sys.compiled) {
            for selector in 0..self.sys.selector_count {
                for &arg in &self.sys.arg_domain.clone() {
                    let cfg = Config {
                        store: valuation.clone(),
                        frames: vec![FrameC {
                            pc: 0,
                            locals: fresh_locals(&self.sys.compiled, arg, selector),
                        }],
                        m: MState::at_main(),
                    };
                    self.push_root(cfg, arg, selector, false);
                }
            }
        }
    }

    /// Newly discovered call states become window roots of their own:
    /// mid-invocation windows where a callback may start immediately.
    fn root_new_call_states(&mut self) {
        let fresh: Vec<CallState> = self
            .call_states
            .difference(&self.rooted_calls)
            .cloned()
            .collect();
        for cs in fresh {
            self.rooted_calls.insert(cs.clone());
            let cfg = Config {
                store: cs.store.clone(),
                frames: vec![FrameC {
                    pc: cs.pc,
                    locals: cs.locals,
                }],
                m: MState::at_main(),
            };
            self.push_root(cfg, 0, 0, true);
        }
    }

    /// Runs the exploration to exhaustion or first reject.
    fn run(&mut self) -> Result<Option<Counterexample>, DeciderError> {
        loop {
            let Some(cfg) = self.queue.pop_front() else {
                self.root_new_call_states();
                if self.queue.is_empty() {
                    return Ok(None);
                }
                continue;
            };
            self.explored += 1;
            if self.explored > self.sys.cap {
                return Err(DeciderError::Bound(self.sys.cap));
            }
            if let Some(cex) = self.expand(&cfg) {
                return Ok(Some(cex));
            }
        }
    }

    /// Generates the successors of one configuration; returns a
    /// counterexample when a successor rejects.
    fn expand(&mut self, cfg: &Config) -> Option<Counterexample> {
        let compiled = &self.sys.compiled;
        let depth = cfg.frames.len();
        let frame = cfg.frames.last().expect("active config");
        match compiled.ops[frame.pc].clone() {
            Op::Assign { dst, expr } => {
                let v = eval_cexpr(&expr, &frame.locals);
                let mut next = cfg.clone();
                let f = next.frames.last_mut().unwrap();
                f.locals[dst] = v;
                f.pc += 1;
                self.push_succ(cfg, CexAction::Step, next);
            }
            Op::Jump(target) => {
                let mut next = cfg.clone();
                next.frames.last_mut().unwrap().pc = target;
                self.push_succ(cfg, CexAction::Step, next);
            }
            Op::BranchIfZero { cond, target } => {
                let v = eval_cexpr(&cond, &frame.locals);
                let mut next = cfg.clone();
                next.frames.last_mut().unwrap().pc =
                    if v == 0 { target } else { frame.pc + 1 };
                self.push_succ(cfg, CexAction::Step, next);
            }
            Op::Assert { expr } => {
                if eval_cexpr(&expr, &frame.locals) == 0 {
                    self.aborted_paths += 1; // reverted execution: skipped
                } else {
                    let mut next = cfg.clone();
                    next.frames.last_mut().unwrap().pc += 1;
                    self.push_succ(cfg, CexAction::Step, next);
                }
            }
            Op::Read { dst, field, key } => {
                let k = key.as_ref().map(|e| eval_cexpr(e, &frame.locals));
                match compiled.location_of(field, k) {
                    None => self.clipped_accesses += 1,
                    Some(loc) => {
                        let v = cfg.store[loc];
                        let mut next = cfg.clone();
                        {
                            let f = next.frames.last_mut().unwrap();
                            f.locals[dst] = v;
                            f.pc += 1;
                        }
                        let _ = next.m.on_event(MEvent::Read(loc));
                        self.push_succ(cfg, CexAction::Step, next);
                    }
                }
            }
            Op::Write { field, key, src } => {
                let k = key.as_ref().map(|e| eval_cexpr(e, &frame.locals));
                let v = frame.locals[src];
                match compiled.location_of(field, k) {
                    None => self.clipped_accesses += 1,
                    Some(loc) => {
                        if !compiled.fields[field].value_domain.contains(&v) {
                            self.clipped_accesses += 1;
                        } else {
                            let mut next = cfg.clone();
                            next.store[loc] = v;
                            next.frames.last_mut().unwrap().pc += 1;
                            let _ = next.m.on_event(MEvent::Write(loc));
                            self.push_succ(cfg, CexAction::Step, next);
                        }
                    }
                }
            }
            Op::Call { dst, site: _ } => {
                if depth == 1 {
                    self.call_states.insert(CallState {
                        store: cfg.store.clone(),
                        pc: frame.pc,
                        locals: frame.locals.clone(),
                    });
                }
                // (a) finish the environment loop: havoc the return value.
                for &v in &self.sys.havoc_domain.clone() {
                    let mut next = cfg.clone();
                    {
                        let f = next.frames.last_mut().unwrap();
                        f.locals[dst] = v;
                        f.pc += 1;
                    }
                    self.push_succ(cfg, CexAction::Havoc(v), next);
                }
                // (b) run one more callback, when depth and variant allow.
                if depth == 1 && self.sys.variant == AutomatonVariant::Full {
                    for selector in 0..self.sys.selector_count {
                        for &arg in &self.sys.arg_domain.clone() {
                            let mut next = cfg.clone();
                            if next.m.on_event(MEvent::Enter) == MStep::Reject {
                                return Some(
                                    self.trace_back(cfg, CexAction::EnterCallback(arg, selector)),
                                );
                            }
                            next.frames.push(FrameC {
                                pc: 0,
                                locals: fresh_locals(&self.sys.compiled, arg, selector),
                            });
                            self.push_succ(
                                cfg,
                                CexAction::EnterCallback(arg, selector),
                                next,
                            );
                        }
                    }
                }
            }
            Op::Return => {
                let mut next = cfg.clone();
                next.frames.pop();
                match next.m.on_event(MEvent::Return) {
                    MStep::Reject => {
                        return Some(self.trace_back(cfg, CexAction::Return));
                    }
                    MStep::Accept => {
                        // Quiescent: the window is done.
                    }
                    MStep::Continue => {
                        // Control returns to the caller's call site, which
                        // may loop further callbacks or havoc out.
                        self.push_succ(cfg, CexAction::Return, next);
                    }
                }
            }
        }
        None
    }
}

fn fresh_locals(compiled: &CompiledObject, arg: i64, selector: u32) -> Vec<i64> {
    let mut locals = vec![0i64; compiled.locals.len()];
    if let Some(i) = compiled.local_index("arg") {
        locals[i] = arg;
    }
    if let Some(i) = compiled.local_index("selector") {
        locals[i] = selector as i64;
    }
    // `this` stays 0: the window models a single object.
    locals
}

/// All valuations over the declared domains, in lexicographic order.
fn all_valuations(compiled: &CompiledObject) -> Vec<Vec<i64>> {
    let mut doms: Vec<&[i64]> = Vec::new();
    for f in &compiled.fields {
        let per_loc = match &f.key_domain {
            None => 1,
            Some(ks) => ks.len(),
        };
        for _ in 0..per_loc {
            doms.push(&f.value_domain);
        }
    }
    let mut out = vec![Vec::new()];
    for dom in doms {
        let mut next = Vec::with_capacity(out.len() * dom.len());
        for prefix in &out {
            for &v in dom {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Explores the product and decides conflict-SECF over the declared domains.
pub fn decide_secf_c(spec: &FiniteObjectSpec) -> Result<DeciderReport, DeciderError> {
    let sys = build_a_o(spec, AutomatonVariant::Full)?;
    let mut ex = Explorer::new(&sys);
    ex.seed_quiescent_roots();
    let found = ex.run()?;
    Ok(DeciderReport {
        explored: ex.explored,
        clipped_accesses: ex.clipped_accesses,
        aborted_paths: ex.aborted_paths,
        call_states: ex.call_states.len(),
        verdict: match found {
            Some(cex) => SecfVerdict::NotSecf(cex),
            None => SecfVerdict::Secf,
        },
    })
}

/// Reachable configurations of the full system whose next command is a
/// call, collected at window depth 1 across all windows.
pub fn reachable_call_states(spec: &FiniteObjectSpec) -> Result<Vec<CallState>, DeciderError> {
    let sys = build_a_o(spec, AutomatonVariant::Full)?;
    let mut ex = Explorer::new(&sys);
    ex.seed_quiescent_roots();
    // A reject only cuts the rejected branch; call-state collection goes on.
    loop {
        match ex.run()? {
            Some(_) => continue,
            None => break,
        }
    }
    Ok(ex.call_states.into_iter().collect())
}

/// Compares quiescent-to-quiescent reachability with and without callbacks
/// at depth <= 2. Pairs reachable only with callbacks witness a final-state
/// difference of the two bounded systems (a probe, not a decision).
pub fn secf_fs_probe(
    spec: &FiniteObjectSpec,
) -> Result<Vec<(Vec<i64>, Vec<i64>)>, DeciderError> {
    let full = quiescent_pairs(spec, AutomatonVariant::Full)?;
    let free = quiescent_pairs(spec, AutomatonVariant::NoCallbacks)?;
    Ok(full.difference(&free).cloned().collect())
}

fn quiescent_pairs(
    spec: &FiniteObjectSpec,
    variant: AutomatonVariant,
) -> Result<BTreeSet<(Vec<i64>, Vec<i64>)>, DeciderError> {
    let sys = build_a_o(spec, variant)?;
    let mut pairs = BTreeSet::new();
    for valuation in all_valuations(&sys.compiled) {
        for selector in 0..sys.selector_count {
            for &arg in &sys.arg_domain {
                let mut ex = Explorer::new(&sys);
                let root = Config {
                    store: valuation.clone(),
                    frames: vec![FrameC {
                        pc: 0,
                        locals: fresh_locals(&sys.compiled, arg, selector),
                    }],
                    m: MState::at_main(),
                };
                ex.push_root(root, arg, selector, false);
                while let Some(cfg) = ex.queue.pop_front() {
                    ex.explored += 1;
                    if ex.explored > sys.cap {
                        return Err(DeciderError::Bound(sys.cap));
                    }
                    if cfg.frames.len() == 1
                        && matches!(sys.compiled.ops[cfg.frames[0].pc], Op::Return)
                    {
                        pairs.insert((valuation.clone(), cfg.store.clone()));
                    }
                    let _ = ex.expand(&cfg);
                }
            }
        }
    }
    Ok(pairs)
}

/// Converts a location-table valuation into a `Store` for the object.
pub fn valuation_to_store(compiled: &CompiledObject, o: ObjectId, valuation: &[i64]) -> Store {
    let mut store = Store::new();
    for f in &compiled.fields {
        match &f.key_domain {
            None => store.write(o, &f.name, None, valuation[f.loc_base]),
            Some(keys) => {
                for (i, &k) in keys.iter().enumerate() {
                    store.write(o, &f.name, Some(k), valuation[f.loc_base + i]);
                }
            }
        }
    }
    store
}
