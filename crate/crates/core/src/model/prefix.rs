use alloc::vec::Vec;

use super::SrPrefixOrder;
use crate::Scenario;

/// Zero-based base-row order read by `scenario`. Sum-Doc reads the rows in
/// order; Sum-Doc-Ref reads the odd positions (p1, p3, ...) and then the
/// even ones (p2, p4, ...) of that order; Sum-Ref uses `sr_order`.
pub fn prefix_order(scenario: Scenario, prefix_len: usize, sr_order: SrPrefixOrder) -> Vec<usize> {
    let identity = 0..prefix_len;
    match scenario {
        Scenario::SumDoc => identity.collect(),
        Scenario::SumDocRef => odd_then_even(&identity.collect::<Vec<_>>()),
        Scenario::SumRef => match sr_order {
            SrPrefixOrder::Reversed => identity.rev().collect(),
            SrPrefixOrder::EvenThenOdd => {
                let mut out: Vec<usize> = (1..prefix_len).step_by(2).collect();
                out.extend((0..prefix_len).step_by(2));
                out
            }
        },
    }
}

/// One-based odd positions first, then even positions, each ascending.
fn odd_then_even(order: &[usize]) -> Vec<usize> {
    order
        .iter()
        .step_by(2)
        .chain(order.iter().skip(1).step_by(2))
        .copied()
        .collect()
}

/// Shared continuous prefix rows plus the fixed per-scenario orders.
#[derive(Debug, Clone, Copy)]
pub struct PrefixBank<'a> {
    base: &'a [f64],
    len: usize,
    dim: usize,
    sr_order: SrPrefixOrder,
}

impl<'a> PrefixBank<'a> {
    pub fn new(base: &'a [f64], len: usize, dim: usize, sr_order: SrPrefixOrder) -> Self {
        assert_eq!(base.len(), len * dim);
        PrefixBank {
            base,
            len,
            dim,
            sr_order,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.base[i * self.dim..(i + 1) * self.dim]
    }

    pub fn order(&self, scenario: Scenario) -> Vec<usize> {
        prefix_order(scenario, self.len, self.sr_order)
    }

    /// The prefix rows in the order `scenario` places them, borrowed from
    /// the shared base.
    pub fn permute_prefix(&self, scenario: Scenario) -> Vec<&'a [f64]> {
        self.order(scenario).into_iter().map(|i| self.row(i)).collect()
    }
}
