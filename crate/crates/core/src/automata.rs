//! Conversational automata.
//!
//! A command conversation is a set of explicit states. Each step a state may
//! emit a prompt, consume one user input, bind values into its scope and name
//! the next state to run. Machines are instantiated from immutable
//! [`MachineDef`] templates, so the same command can be nested inside itself:
//! every instance owns its transition table (which may be rewritten while it
//! runs) and its own stack of scope frames.
//!
//! Composition works through [`StepResult::Call`]: the running state hands
//! over a child instance plus the state the parent should resume at. The
//! parent records that return edge under [`CHILD_RETURN`], the
//! [`MachineStack`] runs the child to completion, then the child's value is
//! bound under [`RETURN_SLOT`] in the parent's innermost frame before the
//! parent follows the return edge.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::value::Value;

pub type StateId = String;

/// Default label for linear chains.
pub const NEXT: &str = "next";
/// Label of the edge a parent follows when a child machine finishes.
pub const CHILD_RETURN: &str = "child_return";
/// Scope slot that receives a finished child's value.
pub const RETURN_SLOT: &str = "$return";
pub const DEFAULT_DEPTH_CAP: usize = 64;
const STEP_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("state '{0}' does not take input")]
    InputUnexpected(StateId),
    #[error("state '{0}' is waiting for input")]
    InputRequired(StateId),
    #[error("transition from '{from}' points at unregistered target '{target}'")]
    DanglingTransition { from: StateId, target: String },
    #[error("unknown state '{0}'")]
    UnknownState(StateId),
    #[error("conversation nesting exceeded {0} levels")]
    DepthExceeded(usize),
    #[error("state '{0}' suspended but does not take input")]
    SuspendOutsideInput(StateId),
    #[error("machine has already finished")]
    AlreadyFinished,
    #[error("no machine is running")]
    Empty,
    #[error("step budget exhausted; the machine is probably looping")]
    StepBudget,
}

/// One binding environment. Lookups fall through to `parent`.
#[derive(Debug, Clone, Default)]
pub struct ScopeFrame {
    bindings: HashMap<String, Value>,
    parent: Option<Arc<ScopeFrame>>,
}

impl ScopeFrame {
    fn lookup(&self, name: &str) -> Option<&Value> {
        match self.bindings.get(name) {
            Some(v) => Some(v),
            None => self.parent.as_deref().and_then(|p| p.lookup(name)),
        }
    }
}

/// The frames owned by one machine instance, innermost last. Never empty.
#[derive(Debug, Clone)]
pub struct Scope {
    frames: Vec<ScopeFrame>,
}

impl Default for Scope {
    fn default() -> Self {
        Scope {
            frames: vec![ScopeFrame::default()],
        }
    }
}

impl Scope {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.frames.iter().rev().find_map(|f| f.lookup(name))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Looks in the innermost frame only, ignoring anything read through.
    pub fn get_local(&self, name: &str) -> Option<&Value> {
        self.frames.last().and_then(|f| f.bindings.get(name))
    }

    /// Writes into the innermost frame only.
    pub fn bind(&mut self, name: impl Into<String>, value: Value) {
        self.innermost_mut().bindings.insert(name.into(), value);
    }

    /// Removes a binding from the innermost frame.
    pub fn take(&mut self, name: &str) -> Option<Value> {
        self.innermost_mut().bindings.remove(name)
    }

    pub fn push_frame(&mut self) {
        self.frames.push(ScopeFrame::default());
    }

    /// Pops the innermost frame; the outermost frame is never popped.
    pub fn pop_frame(&mut self) -> Option<ScopeFrame> {
        if self.frames.len() > 1 {
            self.frames.pop()
        } else {
            None
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Names bound directly in the innermost frame.
    pub fn local_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.frames.last().unwrap().bindings.keys().cloned().collect();
        names.sort();
        names
    }

    /// A fresh scope whose single frame reads through to a frozen copy of
    /// this one.
    pub fn child(&self) -> Scope {
        let mut flat = ScopeFrame {
            bindings: HashMap::new(),
            parent: self.frames[0].parent.clone(),
        };
        for frame in &self.frames {
            for (k, v) in &frame.bindings {
                flat.bindings.insert(k.clone(), v.clone());
            }
        }
        Scope {
            frames: vec![ScopeFrame {
                bindings: HashMap::new(),
                parent: Some(Arc::new(flat)),
            }],
        }
    }

    fn innermost_mut(&mut self) -> &mut ScopeFrame {
        self.frames.last_mut().expect("scope stack is never empty")
    }
}

/// What a state's action sees: its machine's scope and the embedding host.
pub struct StepCtx<'a, H> {
    pub scope: &'a mut Scope,
    pub host: &'a mut H,
}

pub type StepFn<H> = Arc<dyn Fn(&mut StepCtx<'_, H>, Option<&str>) -> StepResult<H> + Send + Sync>;
pub type PromptFn<H> = Arc<dyn Fn(&mut StepCtx<'_, H>) -> String + Send + Sync>;

pub enum Prompt<H> {
    Silent,
    Text(String),
    Computed(PromptFn<H>),
}

impl<H> Clone for Prompt<H> {
    fn clone(&self) -> Self {
        match self {
            Prompt::Silent => Prompt::Silent,
            Prompt::Text(t) => Prompt::Text(t.clone()),
            Prompt::Computed(f) => Prompt::Computed(f.clone()),
        }
    }
}

pub struct StateNode<H> {
    pub id: StateId,
    pub prompt: Prompt<H>,
    pub expects_input: bool,
    pub step: StepFn<H>,
}

impl<H> Clone for StateNode<H> {
    fn clone(&self) -> Self {
        StateNode {
            id: self.id.clone(),
            prompt: self.prompt.clone(),
            expects_input: self.expects_input,
            step: self.step.clone(),
        }
    }
}

impl<H> StateNode<H> {
    /// A state that runs immediately without user input.
    pub fn action(
        id: impl Into<StateId>,
        f: impl Fn(&mut StepCtx<'_, H>) -> StepResult<H> + Send + Sync + 'static,
    ) -> Self {
        StateNode {
            id: id.into(),
            prompt: Prompt::Silent,
            expects_input: false,
            step: Arc::new(move |ctx, _| f(ctx)),
        }
    }

    /// A state that emits `prompt` and waits for one line of input.
    pub fn input(
        id: impl Into<StateId>,
        prompt: Prompt<H>,
        f: impl Fn(&mut StepCtx<'_, H>, &str) -> StepResult<H> + Send + Sync + 'static,
    ) -> Self {
        StateNode {
            id: id.into(),
            prompt,
            expects_input: true,
            step: Arc::new(move |ctx, input| f(ctx, input.unwrap_or_default())),
        }
    }
}

pub enum StepResult<H> {
    /// Jump straight to a state.
    Goto(StateId),
    /// Follow the labelled edge out of the current state.
    Follow(String),
    Done(Value),
    /// Stay in the current input state and ask again with this text.
    Suspend(String),
    /// Run `child` to completion, then resume at `resume_at`.
    Call {
        child: MachineInstance<H>,
        resume_at: StateId,
    },
    /// Abort the whole conversation with a user-facing message.
    Fail(String),
}

pub enum TurnOutcome<H> {
    EmitPrompt(String),
    Advanced,
    Finished(Value),
    Call(MachineInstance<H>),
    Failed(String),
}

impl<H> fmt::Debug for TurnOutcome<H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TurnOutcome::EmitPrompt(p) => f.debug_tuple("EmitPrompt").field(p).finish(),
            TurnOutcome::Advanced => f.write_str("Advanced"),
            TurnOutcome::Finished(v) => f.debug_tuple("Finished").field(v).finish(),
            TurnOutcome::Call(m) => f.debug_tuple("Call").field(m).finish(),
            TurnOutcome::Failed(m) => f.debug_tuple("Failed").field(m).finish(),
        }
    }
}

/// Immutable machine template.
pub struct MachineDef<H> {
    name: String,
    start: StateId,
    states: HashMap<StateId, StateNode<H>>,
    transitions: HashMap<(StateId, String), StateId>,
}

impl<H> MachineDef<H> {
    pub fn builder(name: impl Into<String>, start: impl Into<StateId>) -> MachineBuilder<H> {
        MachineBuilder {
            def: MachineDef {
                name: name.into(),
                start: start.into(),
                states: HashMap::new(),
                transitions: HashMap::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

pub struct MachineBuilder<H> {
    def: MachineDef<H>,
}

impl<H> MachineBuilder<H> {
    pub fn state(mut self, node: StateNode<H>) -> Self {
        self.def.states.insert(node.id.clone(), node);
        self
    }

    pub fn edge(mut self, from: &str, label: &str, to: &str) -> Self {
        self.def
            .transitions
            .insert((from.to_string(), label.to_string()), to.to_string());
        self
    }

    pub fn build(self) -> Result<Arc<MachineDef<H>>, MachineError> {
        let def = self.def;
        if !def.states.contains_key(&def.start) {
            return Err(MachineError::UnknownState(def.start));
        }
        for ((from, _), to) in &def.transitions {
            if !def.states.contains_key(from) {
                return Err(MachineError::UnknownState(from.clone()));
            }
            if !def.states.contains_key(to) {
                return Err(MachineError::DanglingTransition {
                    from: from.clone(),
                    target: to.clone(),
                });
            }
        }
        Ok(Arc::new(def))
    }
}

/// A running machine.
pub struct MachineInstance<H> {
    def: Arc<MachineDef<H>>,
    grafted: HashMap<StateId, StateNode<H>>,
    transitions: HashMap<(StateId, String), StateId>,
    current: StateId,
    scope: Scope,
    awaiting: bool,
    finished: bool,
}

impl<H> fmt::Debug for MachineInstance<H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MachineInstance")
            .field("machine", &self.def.name)
            .field("current", &self.current)
            .field("awaiting", &self.awaiting)
            .field("finished", &self.finished)
            .finish()
    }
}

impl<H> MachineInstance<H> {
    pub fn new(def: Arc<MachineDef<H>>) -> Self {
        Self::with_base_scope(def, Scope::default())
    }

    /// Instantiates `def` as a child of this machine: the child gets a fresh
    /// innermost frame that can read, but never write, this machine's
    /// bindings.
    pub fn with_scope(&self, def: Arc<MachineDef<H>>) -> Self {
        Self::nested(def, &self.scope)
    }

    /// Like [`MachineInstance::with_scope`] when only the parent's scope is
    /// at hand (inside a step action).
    pub fn nested(def: Arc<MachineDef<H>>, parent: &Scope) -> Self {
        Self::with_base_scope(def, parent.child())
    }

    fn with_base_scope(def: Arc<MachineDef<H>>, scope: Scope) -> Self {
        MachineInstance {
            transitions: def.transitions.clone(),
            current: def.start.clone(),
            grafted: HashMap::new(),
            def,
            scope,
            awaiting: false,
            finished: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn current(&self) -> &str {
        &self.current
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn scope_mut(&mut self) -> &mut Scope {
        &mut self.scope
    }

    pub fn is_awaiting(&self) -> bool {
        self.awaiting
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn has_state(&self, id: &str) -> bool {
        self.grafted.contains_key(id) || self.def.states.contains_key(id)
    }

    /// Adds a state to this instance only; the template is untouched.
    pub fn graft(&mut self, node: StateNode<H>) {
        self.grafted.insert(node.id.clone(), node);
    }

    pub fn set_transition(&mut self, from: &str, label: &str, to: &str) -> Result<(), MachineError> {
        if !self.has_state(from) {
            return Err(MachineError::UnknownState(from.to_string()));
        }
        if !self.has_state(to) {
            return Err(MachineError::UnknownState(to.to_string()));
        }
        self.transitions
            .insert((from.to_string(), label.to_string()), to.to_string());
        Ok(())
    }

    pub fn transition(&self, from: &str, label: &str) -> Option<&str> {
        self.transitions
            .get(&(from.to_string(), label.to_string()))
            .map(String::as_str)
    }

    fn node(&self, id: &str) -> Result<StateNode<H>, MachineError> {
        self.grafted
            .get(id)
            .or_else(|| self.def.states.get(id))
            .cloned()
            .ok_or_else(|| MachineError::UnknownState(id.to_string()))
    }

    /// Runs one state.
    ///
    /// An input state that has not yet prompted emits its prompt on a
    /// `None` step and then requires input; other states must be stepped
    /// with `None`.
    pub fn step(&mut self, host: &mut H, input: Option<&str>) -> Result<TurnOutcome<H>, MachineError> {
        if self.finished {
            return Err(MachineError::AlreadyFinished);
        }
        let node = self.node(&self.current)?;
        if node.expects_input {
            if !self.awaiting {
                if input.is_some() {
                    return Err(MachineError::InputUnexpected(self.current.clone()));
                }
                let mut ctx = StepCtx {
                    scope: &mut self.scope,
                    host,
                };
                let text = match &node.prompt {
                    Prompt::Silent => String::new(),
                    Prompt::Text(t) => t.clone(),
                    Prompt::Computed(f) => f(&mut ctx),
                };
                self.awaiting = true;
                return Ok(TurnOutcome::EmitPrompt(text));
            }
            if input.is_none() {
                return Err(MachineError::InputRequired(self.current.clone()));
            }
        } else if input.is_some() {
            return Err(MachineError::InputUnexpected(self.current.clone()));
        }
        let result = {
            let mut ctx = StepCtx {
                scope: &mut self.scope,
                host,
            };
            (node.step)(&mut ctx, input)
        };
        self.apply(result, node.expects_input)
    }

    fn move_to(&mut self, target: String) -> Result<TurnOutcome<H>, MachineError> {
        if !self.has_state(&target) {
            return Err(MachineError::DanglingTransition {
                from: self.current.clone(),
                target,
            });
        }
        self.current = target;
        self.awaiting = false;
        Ok(TurnOutcome::Advanced)
    }

    fn apply(&mut self, result: StepResult<H>, input_state: bool) -> Result<TurnOutcome<H>, MachineError> {
        match result {
            StepResult::Goto(target) => self.move_to(target),
            StepResult::Follow(label) => {
                let target = self.transition(&self.current, &label).map(str::to_string);
                match target {
                    Some(t) => self.move_to(t),
                    None => Err(MachineError::DanglingTransition {
                        from: self.current.clone(),
                        target: label,
                    }),
                }
            }
            StepResult::Done(value) => {
                self.finished = true;
                Ok(TurnOutcome::Finished(value))
            }
            StepResult::Suspend(text) => {
                if !input_state {
                    return Err(MachineError::SuspendOutsideInput(self.current.clone()));
                }
                self.awaiting = true;
                Ok(TurnOutcome::EmitPrompt(text))
            }
            StepResult::Call { child, resume_at } => {
                let from = self.current.clone();
                if !self.has_state(&resume_at) {
                    return Err(MachineError::DanglingTransition {
                        from,
                        target: resume_at,
                    });
                }
                self.set_transition(&from, CHILD_RETURN, &resume_at)?;
                self.awaiting = false;
                Ok(TurnOutcome::Call(child))
            }
            StepResult::Fail(message) => {
                self.finished = true;
                Ok(TurnOutcome::Failed(message))
            }
        }
    }

    /// Delivers a finished child's value and follows the return edge.
    pub fn resume(&mut self, value: Value) -> Result<(), MachineError> {
        self.scope.bind(RETURN_SLOT, value);
        let target = self
            .transition(&self.current, CHILD_RETURN)
            .map(str::to_string)
            .ok_or_else(|| MachineError::DanglingTransition {
                from: self.current.clone(),
                target: CHILD_RETURN.to_string(),
            })?;
        self.move_to(target).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StackOutcome {
    Waiting(String),
    Finished(Value),
    Failed(String),
}

/// Runs nested machines: the top of the stack is the innermost conversation.
pub struct MachineStack<H> {
    machines: Vec<MachineInstance<H>>,
    depth_cap: usize,
}

impl<H> Default for MachineStack<H> {
    fn default() -> Self {
        Self::new(DEFAULT_DEPTH_CAP)
    }
}

impl<H> MachineStack<H> {
    pub fn new(depth_cap: usize) -> Self {
        MachineStack {
            machines: Vec::new(),
            depth_cap,
        }
    }

    pub fn push(&mut self, machine: MachineInstance<H>) -> Result<(), MachineError> {
        if self.machines.len() >= self.depth_cap {
            return Err(MachineError::DepthExceeded(self.depth_cap));
        }
        self.machines.push(machine);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn top(&self) -> Option<&MachineInstance<H>> {
        self.machines.last()
    }

    pub fn clear(&mut self) {
        self.machines.clear();
    }

    /// Steps until the innermost machine waits for input or the outermost
    /// one finishes. `input` goes to the first step only.
    pub fn run(&mut self, host: &mut H, input: Option<&str>) -> Result<StackOutcome, MachineError> {
        let mut input = input;
        for _ in 0..STEP_BUDGET {
            let top = self.machines.last_mut().ok_or(MachineError::Empty)?;
            match top.step(host, input.take())? {
                TurnOutcome::EmitPrompt(p) => return Ok(StackOutcome::Waiting(p)),
                TurnOutcome::Advanced => {}
                TurnOutcome::Call(child) => self.push(child)?,
                TurnOutcome::Finished(v) => {
                    self.machines.pop();
                    match self.machines.last_mut() {
                        Some(parent) => parent.resume(v)?,
                        None => return Ok(StackOutcome::Finished(v)),
                    }
                }
                TurnOutcome::Failed(msg) => {
                    self.machines.clear();
                    return Ok(StackOutcome::Failed(msg));
                }
            }
        }
        Err(MachineError::StepBudget)
    }
}
