//! Happens-before and ordering relations over an executed sequence.
//!
//! `hb` is the transitive closure of program order (including the order of
//! each shadow-thread), synchronises-with (`sw`) and dependency-ordered-before
//! (`dob`). `mhb` drops the pairs that are themselves a direct `sw`/`dob`
//! edge. `mo` is the publication order of shadow-writes and `to` orders the
//! `sc` events, placing `sc` plain writes at their shadow-write.
//!
//! Relations are built incrementally: appending a step only computes the
//! predecessor row of the new event, so building over a prefix yields the
//! restriction of the relations of any extension.

pub mod dump;

use std::collections::HashSet;

use fixedbitset::FixedBitSet;

use crate::engine::Sequence;
use crate::ir::{Action, Actor, MemoryOrder, ObjId};

#[derive(Debug, Clone)]
pub struct RelationSet {
    hb_pred: Vec<FixedBitSet>,
    ithb_pred: Vec<FixedBitSet>,
    /// Previous event of the same actor.
    pub po_prev: Vec<Option<usize>>,
    pub sw: Vec<(usize, usize)>,
    pub dob: Vec<(usize, usize)>,
    sync_pairs: HashSet<(usize, usize)>,
    /// Writes of each object in modification order (init first).
    pub mo: Vec<Vec<usize>>,
    /// Object and position in its modification order.
    mo_pos: Vec<Option<(usize, usize)>>,
    /// `sc` events in total order.
    pub to: Vec<usize>,
    to_pos: Vec<Option<usize>>,
    pub rf: Vec<Option<usize>>,
    last_of_actor: std::collections::HashMap<Actor, usize>,
    init_len: usize,
}

impl RelationSet {
    fn empty(num_objects: usize) -> Self {
        RelationSet {
            hb_pred: Vec::new(),
            ithb_pred: Vec::new(),
            po_prev: Vec::new(),
            sw: Vec::new(),
            dob: Vec::new(),
            sync_pairs: HashSet::new(),
            mo: vec![Vec::new(); num_objects],
            mo_pos: Vec::new(),
            to: Vec::new(),
            to_pos: Vec::new(),
            rf: Vec::new(),
            last_of_actor: Default::default(),
            init_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.hb_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hb_pred.is_empty()
    }

    /// Extends the relations with every step of `seq` not yet covered.
    pub fn update(&mut self, seq: &Sequence) {
        self.init_len = seq.init_len;
        while self.len() < seq.len() {
            self.append(seq);
        }
    }

    fn append(&mut self, seq: &Sequence) {
        let i = self.len();
        let cap = seq.len().max(i + 1);
        let step = &seq.steps[i];
        let ev = step.event;
        let mut hb = FixedBitSet::with_capacity(cap);
        let mut ithb = FixedBitSet::with_capacity(cap);
        self.rf.push(step.rf);
        self.mo_pos.push(None);
        self.to_pos.push(None);

        let prev = self.last_of_actor.get(&ev.actor).copied();
        self.po_prev.push(prev);
        self.last_of_actor.insert(ev.actor, i);

        if i >= seq.init_len {
            hb.insert_range(0..seq.init_len);
            if let Some(p) = prev {
                union_into(&mut hb, &self.hb_pred[p]);
                hb.insert(p);
                union_into(&mut ithb, &self.ithb_pred[p]);
            }
            if ev.is_program() {
                for s in self.sync_sources(seq, i) {
                    union_into(&mut hb, &self.hb_pred[s]);
                    hb.insert(s);
                    union_into(&mut ithb, &self.hb_pred[s]);
                    ithb.insert(s);
                }
            }
        }
        self.hb_pred.push(hb);
        self.ithb_pred.push(ithb);

        if ev.is_shadow() {
            let w = step.shadow_of.expect("shadow-write without origin");
            let o = ev.obj.unwrap().0 as usize;
            self.mo_pos[w] = Some((o, self.mo[o].len()));
            self.mo[o].push(w);
            if seq.steps[w].event.act == Action::Write && ev.ord == MemoryOrder::Sc {
                self.to_pos[w] = Some(self.to.len());
                self.to.push(w);
            }
        } else if ev.is_program() && ev.ord == MemoryOrder::Sc && ev.act != Action::Write {
            self.to_pos[i] = Some(self.to.len());
            self.to.push(i);
        }
    }

    /// Sources of `sw` and `dob` edges into program event `i`, recording
    /// the edges as a side effect.
    fn sync_sources(&mut self, seq: &Sequence, i: usize) -> Vec<usize> {
        let ev = seq.steps[i].event;
        let me = ev.actor.owner();
        let mut out = Vec::new();
        let foreign = |w: usize| seq.steps[w].event.is_program() && seq.thread_of(w) != me;
        if ev.is_read() && ev.ord.is_acquire() {
            if let Some(w) = seq.steps[i].rf.filter(|&w| foreign(w)) {
                if is_release_write(seq, w) {
                    self.add_sw(w, i, &mut out);
                }
                for f in self.release_fences_before(seq, w) {
                    self.add_sw(f, i, &mut out);
                }
                let o = ev.obj.unwrap();
                for h in self.release_heads_covering(seq, o, w) {
                    if foreign(h) && self.sync_pairs.insert((h, i)) {
                        self.dob.push((h, i));
                        out.push(h);
                    }
                }
            }
        }
        if ev.is_fence() && ev.ord.is_acquire() {
            let mut r = self.po_prev[i];
            while let Some(ri) = r {
                let re = seq.steps[ri].event;
                if re.is_read() {
                    if let Some(w) = seq.steps[ri].rf.filter(|&w| foreign(w)) {
                        if is_release_write(seq, w) {
                            self.add_sw(w, i, &mut out);
                        }
                        for f in self.release_fences_before(seq, w) {
                            self.add_sw(f, i, &mut out);
                        }
                    }
                }
                r = self.po_prev[ri];
            }
        }
        out
    }

    fn add_sw(&mut self, from: usize, to: usize, out: &mut Vec<usize>) {
        if self.sync_pairs.insert((from, to)) {
            self.sw.push((from, to));
            out.push(from);
        } else if !out.contains(&from) {
            out.push(from);
        }
    }

    fn release_fences_before(&self, seq: &Sequence, w: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut p = self.po_prev[w];
        while let Some(f) = p {
            let e = seq.steps[f].event;
            if e.is_fence() && e.ord.is_release() {
                out.push(f);
            }
            p = self.po_prev[f];
        }
        out
    }

    /// Release writes `h` of `o` whose release sequence contains `w`.
    fn release_heads_covering(&self, seq: &Sequence, o: ObjId, w: usize) -> Vec<usize> {
        let Some((_, wpos)) = self.mo_pos[w] else {
            return Vec::new();
        };
        let chain = &self.mo[o.0 as usize];
        (0..=wpos)
            .map(|k| chain[k])
            .filter(|&h| is_release_write(seq, h))
            .filter(|&h| self.release_sequence(seq, h).contains(&w))
            .collect()
    }

    /// Release sequence headed by the release write `h`: `h` followed by the
    /// later writes of its object in `mo`, cut at the first write that is
    /// from another thread, not an rmw, and weaker than `rel`.
    pub fn release_sequence(&self, seq: &Sequence, h: usize) -> Vec<usize> {
        assert!(
            is_release_write(seq, h),
            "release sequence requested for a non-release event"
        );
        let Some((_, pos)) = self.mo_pos[h] else {
            return vec![h];
        };
        let o = seq.steps[h].event.obj.unwrap().0 as usize;
        let th = seq.thread_of(h);
        let mut out = vec![h];
        for &w in &self.mo[o][pos + 1..] {
            let e = seq.steps[w].event;
            let cut = seq.thread_of(w) != th
                && e.act != Action::Rmw
                && e.ord.strictly_weaker(MemoryOrder::Rel);
            if cut {
                break;
            }
            out.push(w);
        }
        out
    }

    pub fn hb(&self, a: usize, b: usize) -> bool {
        self.hb_pred[b].contains(a)
    }

    pub fn ithb(&self, a: usize, b: usize) -> bool {
        self.ithb_pred[b].contains(a)
    }

    pub fn is_sync_edge(&self, a: usize, b: usize) -> bool {
        self.sync_pairs.contains(&(a, b))
    }

    /// Non-racing happens-before: `hb` minus direct `sw`/`dob` pairs.
    pub fn mhb(&self, a: usize, b: usize) -> bool {
        self.hb(a, b) && !self.is_sync_edge(a, b)
    }

    /// Program order: same actor, `a` earlier (init events precede all).
    pub fn po(&self, a: usize, b: usize, seq: &Sequence) -> bool {
        if a >= b {
            return false;
        }
        let (ea, eb) = (seq.steps[a].event, seq.steps[b].event);
        ea.actor == eb.actor || (a < seq.init_len && b >= seq.init_len)
    }

    pub fn hb_preds(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.hb_pred[b].ones()
    }

    pub fn ithb_preds(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.ithb_pred[b].ones()
    }

    pub fn mo_position(&self, w: usize) -> Option<usize> {
        self.mo_pos.get(w).copied().flatten().map(|(_, k)| k)
    }

    /// `a` precedes `b` in the modification order of their common object.
    pub fn mo_before(&self, a: usize, b: usize) -> bool {
        match (self.mo_pos.get(a).copied().flatten(), self.mo_pos.get(b).copied().flatten()) {
            (Some((oa, x)), Some((ob, y))) => oa == ob && x < y,
            _ => false,
        }
    }

    pub fn to_position(&self, e: usize) -> Option<usize> {
        self.to_pos.get(e).copied().flatten()
    }
}

fn union_into(dst: &mut FixedBitSet, src: &FixedBitSet) {
    if dst.len() < src.len() {
        dst.grow(src.len());
    }
    dst.union_with(src);
}

fn is_release_write(seq: &Sequence, w: usize) -> bool {
    let e = seq.steps[w].event;
    e.is_program() && e.is_write() && e.ord.is_release()
}

/// Computes all relations of `seq` from scratch.
pub fn compute_relations(seq: &Sequence) -> RelationSet {
    let mut r = RelationSet::empty(seq.num_objects);
    r.update(seq);
    r
}

#[cfg(test)]
mod tests;
