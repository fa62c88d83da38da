//! The finite acceptor for depth-2 executions: tracks the running read and
//! write sets of the current portion, the accumulated prefix of the main
//! invocation, and the sets of callbacks delayed to run after it. A callback
//! that fails to commute with the prefix or with the delayed callbacks is
//! delayed; a main-invocation portion that fails to commute with the delayed
//! callbacks rejects the execution.

/// Bitmask over the compiled location table.
pub type LocMask = u64;

pub fn masks_commute(r1: LocMask, w1: LocMask, r2: LocMask, w2: LocMask) -> bool {
    (r1 & w2) == 0 && (r2 & w1) == 0 && (w1 & w2) == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MState {
    pub d: u8,
    pub prefix_r: LocMask,
    pub prefix_w: LocMask,
    pub delayed_r: LocMask,
    pub delayed_w: LocMask,
    pub cur_r: LocMask,
    pub cur_w: LocMask,
}

/// One event of a depth-limited execution, in location-index form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MEvent {
    Read(usize),
    Write(usize),
    Enter,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MStep {
    Continue,
    /// d returned to 0: the execution was accepted.
    Accept,
    Reject,
}

impl MState {
    /// Starts inside the main invocation (after its enter).
    pub fn at_main() -> MState {
        MState {
            d: 1,
            ..MState::default()
        }
    }

    pub fn on_event(&mut self, ev: MEvent) -> MStep {
        match ev {
            MEvent::Read(loc) => {
                self.cur_r |= 1 << loc;
                MStep::Continue
            }
            MEvent::Write(loc) => {
                self.cur_w |= 1 << loc;
                MStep::Continue
            }
            MEvent::Enter => match self.d {
                0 => {
                    self.cur_r = 0;
                    self.cur_w = 0;
                    self.d = 1;
                    MStep::Continue
                }
                1 => {
                    if !masks_commute(self.cur_r, self.cur_w, self.delayed_r, self.delayed_w) {
                        return MStep::Reject;
                    }
                    self.prefix_r |= self.cur_r;
                    self.prefix_w |= self.cur_w;
                    self.cur_r = 0;
                    self.cur_w = 0;
                    self.d = 2;
                    MStep::Continue
                }
                _ => MStep::Reject, // beyond depth 2: not a valid input
            },
            MEvent::Return => match self.d {
                1 => {
                    if !masks_commute(self.cur_r, self.cur_w, self.delayed_r, self.delayed_w) {
                        return MStep::Reject;
                    }
                    self.cur_r = 0;
                    self.cur_w = 0;
                    self.d = 0;
                    MStep::Accept
                }
                2 => {
                    let commutes_prefix =
                        masks_commute(self.cur_r, self.cur_w, self.prefix_r, self.prefix_w);
                    let commutes_delayed =
                        masks_commute(self.cur_r, self.cur_w, self.delayed_r, self.delayed_w);
                    if !commutes_prefix || !commutes_delayed {
                        self.delayed_r |= self.cur_r;
                        self.delayed_w |= self.cur_w;
                    }
                    self.cur_r = 0;
                    self.cur_w = 0;
                    self.d = 1;
                    MStep::Continue
                }
                _ => MStep::Reject,
            },
        }
    }
}

/// Runs the acceptor over a complete event stream.
pub fn run_m(events: impl IntoIterator<Item = MEvent>) -> bool {
    let mut m = MState::default();
    let mut accepted = false;
    for ev in events {
        match m.on_event(ev) {
            MStep::Continue => accepted = false,
            MStep::Accept => accepted = true,
            MStep::Reject => return false,
        }
    }
    accepted || m.d == 0
}
