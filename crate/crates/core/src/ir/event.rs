use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MemoryOrder, ObjId, ThreadId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Write,
    Read,
    Rmw,
    Fence,
    ShadowWrite,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Write => "write",
            Action::Read => "read",
            Action::Rmw => "rmw",
            Action::Fence => "fence",
            Action::ShadowWrite => "shadow-write",
        }
    }
}

/// Who executes an event: a program thread, the shadow-thread that flushes
/// one program thread's writes to one object, or the virtual init thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Init,
    Thread(ThreadId),
    Shadow(ThreadId, ObjId),
}

impl Actor {
    /// Program thread an event belongs to; a shadow-thread belongs to the
    /// thread whose writes it flushes.
    pub fn owner(self) -> ThreadId {
        match self {
            Actor::Init => ThreadId::INIT,
            Actor::Thread(t) | Actor::Shadow(t, _) => t,
        }
    }

    pub fn is_shadow(self) -> bool {
        matches!(self, Actor::Shadow(..))
    }
}

/// One shared-memory action `⟨thr, act, obj, ord, idx⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub actor: Actor,
    pub act: Action,
    pub obj: Option<ObjId>,
    pub ord: MemoryOrder,
    pub idx: u32,
}

impl Event {
    pub fn is_write(&self) -> bool {
        matches!(self.act, Action::Write | Action::Rmw)
    }

    pub fn is_read(&self) -> bool {
        matches!(self.act, Action::Read | Action::Rmw)
    }

    pub fn is_shadow(&self) -> bool {
        self.act == Action::ShadowWrite
    }

    pub fn is_fence(&self) -> bool {
        self.act == Action::Fence
    }

    pub fn is_init(&self) -> bool {
        self.actor == Actor::Init || self.actor.owner().is_init()
    }

    /// Program (non-shadow, non-init) event.
    pub fn is_program(&self) -> bool {
        matches!(self.actor, Actor::Thread(_))
    }

    /// Acquire-class: a read/rmw with order ⊒ acq, or an acquire fence.
    pub fn is_acquire_class(&self) -> bool {
        (self.is_read() || self.is_fence()) && self.ord.is_acquire()
    }

    /// Release-class: a write/rmw with order ⊒ rel, or a release fence.
    pub fn is_release_class(&self) -> bool {
        (self.is_write() || self.is_fence()) && self.ord.is_release()
    }

    pub fn thread(&self) -> ThreadId {
        self.actor.owner()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.actor {
            Actor::Init => write!(f, "init")?,
            Actor::Thread(t) => write!(f, "t{}", t.0)?,
            Actor::Shadow(t, o) if t.is_init() => write!(f, "sh(init,o{})", o.0)?,
            Actor::Shadow(t, o) => write!(f, "sh(t{},o{})", t.0, o.0)?,
        }
        write!(f, ".{}:{}", self.idx, self.act.as_str())?;
        if let Some(o) = self.obj {
            write!(f, "(o{})", o.0)?;
        }
        write!(f, "[{}]", self.ord)
    }
}
