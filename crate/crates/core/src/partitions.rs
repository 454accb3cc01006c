//! Partitions of four groups of variables with sizes `(i, i, j, j)` whose
//! blocks have at least two elements, never hold two variables of one group,
//! and connect all four groups.
//!
//! Variables are ordered by group, then slot. Enumeration walks
//! restricted-growth strings over that order in lexicographic order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_GROUP_SIZE: usize = 4;
pub const GROUPS: usize = 4;

/// Variable `x^{(group)}_{slot}`, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionVariable {
    pub group: u8,
    pub slot: u8,
}

impl fmt::Display for PartitionVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<PartitionVariable>>,
}

impl Partition {
    /// Number of blocks `|π|`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block index of every variable, in canonical variable order.
    pub fn assignment(&self, i: usize, j: usize) -> Vec<usize> {
        let sizes = group_sizes(i, j);
        let mut out = vec![usize::MAX; 2 * i + 2 * j];
        for (b, block) in self.blocks.iter().enumerate() {
            for v in block {
                if let Some(pos) = position(&sizes, *v) {
                    out[pos] = b;
                }
            }
        }
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, block) in self.blocks.iter().enumerate() {
            if b > 0 {
                f.write_str(" ")?;
            }
            f.write_str("{")?;
            for (n, v) in block.iter().enumerate() {
                if n > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

fn group_sizes(i: usize, j: usize) -> [usize; GROUPS] {
    [i, i, j, j]
}

fn check_sizes(i: usize, j: usize) -> Result<()> {
    for (what, v) in [("partition size i", i), ("partition size j", j)] {
        if !(1..=MAX_GROUP_SIZE).contains(&v) {
            return Err(Error::OutOfRange {
                what,
                value: v,
                lo: 1,
                hi: MAX_GROUP_SIZE,
            });
        }
    }
    Ok(())
}

/// Variables in canonical order.
pub fn variables(i: usize, j: usize) -> Vec<PartitionVariable> {
    group_sizes(i, j)
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| {
            (1..=n).map(move |s| PartitionVariable {
                group: g as u8 + 1,
                slot: s as u8,
            })
        })
        .collect()
}

fn position(sizes: &[usize; GROUPS], v: PartitionVariable) -> Option<usize> {
    let g = usize::from(v.group);
    let s = usize::from(v.slot);
    if !(1..=GROUPS).contains(&g) || !(1..=sizes[g - 1]).contains(&s) {
        return None;
    }
    Some(sizes[..g - 1].iter().sum::<usize>() + s - 1)
}

/// True when no proper bipartition of the groups separates the blocks,
/// given each block's group set as a 4-bit mask.
fn connected(masks: &[u8]) -> bool {
    let mut reach = 1u8;
    loop {
        let next = masks
            .iter()
            .filter(|m| *m & reach != 0)
            .fold(reach, |acc, m| acc | m);
        if next == reach {
            return reach == 0b1111;
        }
        reach = next;
    }
}

struct Search<'a, F> {
    groups: &'a [u8],
    labels: Vec<usize>,
    masks: Vec<u8>,
    sizes: Vec<usize>,
    visit: F,
}

impl<F: FnMut(&[usize])> Search<'_, F> {
    fn run(&mut self, pos: usize) {
        let n = self.groups.len();
        if pos == n {
            if self.sizes.iter().all(|&s| s >= 2) && connected(&self.masks) {
                (self.visit)(&self.labels);
            }
            return;
        }
        // Every singleton block still needs another variable.
        let singles = self.sizes.iter().filter(|&&s| s == 1).count();
        if singles > n - pos {
            return;
        }
        let bit = 1u8 << self.groups[pos];
        for b in 0..=self.masks.len() {
            if b == self.masks.len() {
                // A new block needs a partner later on.
                if singles + 1 > n - pos - 1 {
                    continue;
                }
                self.masks.push(bit);
                self.sizes.push(1);
                self.labels[pos] = b;
                self.run(pos + 1);
                self.masks.pop();
                self.sizes.pop();
            } else if self.masks[b] & bit == 0 {
                self.masks[b] |= bit;
                self.sizes[b] += 1;
                self.labels[pos] = b;
                self.run(pos + 1);
                self.masks[b] &= !bit;
                self.sizes[b] -= 1;
            }
        }
    }
}

fn from_labels(vars: &[PartitionVariable], labels: &[usize]) -> Partition {
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); count];
    for (v, &b) in vars.iter().zip(labels) {
        blocks[b].push(*v);
    }
    Partition { blocks }
}

/// Calls `visit` with the block label of every variable (canonical order),
/// once per partition of the class, in lexicographic order.
pub fn for_each_partition<F: FnMut(&[usize])>(i: usize, j: usize, visit: F) -> Result<()> {
    check_sizes(i, j)?;
    let groups: Vec<u8> = variables(i, j).iter().map(|v| v.group - 1).collect();
    let mut search = Search {
        groups: &groups,
        labels: vec![0; groups.len()],
        masks: Vec::new(),
        sizes: Vec::new(),
        visit,
    };
    search.run(0);
    Ok(())
}

/// All partitions of the class for `(i, j)`, in lexicographic order of their
/// restricted-growth strings.
pub fn enumerate_partitions(i: usize, j: usize) -> Result<Vec<Partition>> {
    let vars = variables(i, j);
    let mut out = Vec::new();
    for_each_partition(i, j, |labels| out.push(from_labels(&vars, labels)))?;
    Ok(out)
}

/// `|enumerate_partitions(i, j)|` without materializing the partitions.
pub fn count_partitions(i: usize, j: usize) -> Result<usize> {
    let mut n = 0;
    for_each_partition(i, j, |_| n += 1)?;
    Ok(n)
}

/// Checks the three defining conditions. Errors if the blocks do not cover
/// each variable of `(i, j)` exactly once.
pub fn is_valid(partition: &Partition, i: usize, j: usize) -> Result<bool> {
    let sizes = group_sizes(i, j);
    let total = 2 * i + 2 * j;
    let mut seen = vec![false; total];
    for block in &partition.blocks {
        if block.is_empty() {
            return Err(Error::MalformedPartition("empty block".into()));
        }
        for v in block {
            let pos = position(&sizes, *v)
                .ok_or_else(|| Error::MalformedPartition(format!("variable {v} out of range for ({i}, {j})")))?;
            if std::mem::replace(&mut seen[pos], true) {
                return Err(Error::MalformedPartition(format!("variable {v} appears twice")));
            }
        }
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        let v = variables(i, j)[pos];
        return Err(Error::MalformedPartition(format!("variable {v} is missing")));
    }
    let mut masks = Vec::with_capacity(partition.blocks.len());
    for block in &partition.blocks {
        if block.len() < 2 {
            return Ok(false);
        }
        let mut mask = 0u8;
        for v in block {
            let bit = 1u8 << (v.group - 1);
            if mask & bit != 0 {
                return Ok(false);
            }
            mask |= bit;
        }
        masks.push(mask);
    }
    Ok(connected(&masks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(group: u8, slot: u8) -> PartitionVariable {
        PartitionVariable { group, slot }
    }

    #[test]
    fn smallest_class() {
        let all = enumerate_partitions(1, 1).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].blocks, vec![vec![v(1, 1), v(2, 1), v(3, 1), v(4, 1)]]);
        assert_eq!(all[0].to_string(), "{1:1, 2:1, 3:1, 4:1}");
    }

    #[test]
    fn validity_examples() {
        let single = Partition {
            blocks: vec![vec![v(1, 1), v(2, 1), v(3, 1), v(4, 1)]],
        };
        assert!(is_valid(&single, 1, 1).unwrap());
        let split = Partition {
            blocks: vec![vec![v(1, 1), v(2, 1)], vec![v(3, 1), v(4, 1)]],
        };
        assert!(!is_valid(&split, 1, 1).unwrap());
        let repeat = Partition {
            blocks: vec![
                vec![v(1, 1), v(3, 1), v(3, 2)],
                vec![v(2, 1), v(4, 1), v(4, 2)],
            ],
        };
        assert!(!is_valid(&repeat, 1, 2).unwrap());
        let gap = Partition {
            blocks: vec![vec![v(1, 1), v(2, 1), v(3, 1)]],
        };
        assert!(is_valid(&gap, 1, 1).is_err());
        let twice = Partition {
            blocks: vec![vec![v(1, 1), v(2, 1), v(3, 1), v(4, 1)], vec![v(1, 1)]],
        };
        assert!(is_valid(&twice, 1, 1).is_err());
    }

    #[test]
    fn known_counts() {
        assert_eq!(count_partitions(1, 2).unwrap(), 16);
        assert_eq!(count_partitions(2, 1).unwrap(), 16);
        assert_eq!(count_partitions(2, 2).unwrap(), 200);
        assert_eq!(count_partitions(1, 3).unwrap(), 90);
        assert_eq!(count_partitions(2, 3).unwrap(), 2160);
    }

    #[test]
    fn out_of_range() {
        assert!(enumerate_partitions(0, 1).is_err());
        assert!(enumerate_partitions(1, 5).is_err());
    }

    #[test]
    fn assignment_round_trip() {
        for p in enumerate_partitions(2, 1).unwrap() {
            let labels = p.assignment(2, 1);
            assert_eq!(from_labels(&variables(2, 1), &labels), p);
        }
    }
}
