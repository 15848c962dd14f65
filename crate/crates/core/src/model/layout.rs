use alloc::vec::Vec;
use core::ops::Range;

use super::config::{ModelConfig, CANDIDATE_CAP};
use super::prefix::prefix_order;
use crate::corpus::{CLS, SEP};
use crate::{Error, Result, Scenario};

/// What occupies one input position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// A vocabulary token (content or special).
    Token(u32),
    /// A prefix slot reading the given base row of the prefix bank.
    Prefix(usize),
    /// Padding; never attended to and never pooled.
    Pad,
}

/// A fully assembled encoder input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub scenario: Scenario,
    pub slots: Vec<Slot>,
    /// Number of leading non-pad positions; attention keys are limited to
    /// these.
    pub valid_len: usize,
    pub prefix: Range<usize>,
    pub candidate: Range<usize>,
    pub document: Option<Range<usize>>,
    pub reference: Option<Range<usize>>,
    pub special_positions: Vec<usize>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Positions averaged by pooling: everything except prefix and padding.
    pub fn pooled(&self, pos: usize) -> bool {
        pos < self.valid_len && !self.prefix.contains(&pos)
    }

    pub fn pooled_count(&self) -> usize {
        self.valid_len - self.prefix.len()
    }

    /// Content token ids (no specials, no prefix, no padding).
    pub fn content_tokens(&self) -> Vec<u32> {
        let mut ranges = alloc::vec![self.candidate.clone()];
        ranges.extend(self.document.clone());
        ranges.extend(self.reference.clone());
        ranges
            .into_iter()
            .flatten()
            .filter_map(|p| match self.slots[p] {
                Slot::Token(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    /// Appends `[PAD]` slots up to `len` positions.
    pub fn pad_to(&mut self, len: usize) {
        while self.slots.len() < len {
            self.slots.push(Slot::Pad);
        }
    }
}

/// Pads every layout to the longest one.
pub fn pad_batch(layouts: &mut [Layout]) {
    let len = layouts.iter().map(Layout::len).max().unwrap_or(0);
    for l in layouts {
        l.pad_to(len);
    }
}

/// Assembles `[CLS] P X [SEP] Y`, `[CLS] P X [SEP] D` or
/// `[CLS] P X [SEP] D [SEP] Y` according to `scenario`.
///
/// Truncation to `max_len`: the candidate is first capped at
/// [`CANDIDATE_CAP`] tokens, then the document loses tail tokens, then the
/// reference, and only if that is still not enough the candidate itself.
pub fn assemble_input(
    scenario: Scenario,
    candidate: &[u32],
    reference: Option<&[u32]>,
    document: Option<&[u32]>,
    config: &ModelConfig,
) -> Result<Layout> {
    let name = scenario.as_str();
    let reference = match (scenario.needs_reference(), reference) {
        (true, None) => {
            return Err(Error::MissingField {
                field: "reference",
                scenario: name,
            })
        }
        (true, Some(r)) => Some(r),
        (false, _) => None,
    };
    let document = match (scenario.needs_document(), document) {
        (true, None) => {
            return Err(Error::MissingField {
                field: "document",
                scenario: name,
            })
        }
        (true, Some(d)) => Some(d),
        (false, _) => None,
    };
    if candidate.is_empty() {
        return Err(Error::EmptyCandidate);
    }

    let prefix_len = config.active_prefix_len();
    let seps = 1 + usize::from(document.is_some() && reference.is_some());
    let fixed = 1 + prefix_len + seps;
    if fixed + 1 > config.max_len {
        return Err(Error::InvalidConfig("max_len leaves no room for content".into()));
    }
    let budget = config.max_len - fixed;
    let mut x_len = candidate.len().min(CANDIDATE_CAP);
    let mut d_len = document.map_or(0, <[u32]>::len);
    let mut y_len = reference.map_or(0, <[u32]>::len);
    let mut over = (x_len + d_len + y_len).saturating_sub(budget);
    let cut = over.min(d_len);
    d_len -= cut;
    over -= cut;
    let cut = over.min(y_len);
    y_len -= cut;
    over -= cut;
    x_len -= over;

    let mut slots = Vec::with_capacity(fixed + x_len + d_len + y_len);
    let mut special_positions = alloc::vec![0];
    slots.push(Slot::Token(CLS));
    let order = prefix_order(scenario, prefix_len, config.sr_prefix_order);
    let prefix = 1..1 + prefix_len;
    slots.extend(order.into_iter().map(Slot::Prefix));
    let cand_start = slots.len();
    slots.extend(candidate[..x_len].iter().map(|&t| Slot::Token(t)));
    let cand = cand_start..slots.len();

    let mut add_segment = |slots: &mut Vec<Slot>, toks: &[u32]| {
        special_positions.push(slots.len());
        slots.push(Slot::Token(SEP));
        let start = slots.len();
        slots.extend(toks.iter().map(|&t| Slot::Token(t)));
        start..slots.len()
    };
    let document_range = document.map(|d| add_segment(&mut slots, &d[..d_len]));
    let reference_range = reference.map(|r| add_segment(&mut slots, &r[..y_len]));

    debug_assert!(slots.len() <= config.max_len);
    Ok(Layout {
        scenario,
        valid_len: slots.len(),
        slots,
        prefix,
        candidate: cand,
        document: document_range,
        reference: reference_range,
        special_positions,
    })
}
