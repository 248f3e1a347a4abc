//! Token-level diffing.

use std::hash::Hash;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Keep,
    Del,
    Add,
}

/// A run of same-kind edit operations. `old` is empty for `Add`, `new` is
/// empty for `Del`; for `Keep` both have equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffGroup {
    pub kind: GroupKind,
    pub old: Range<usize>,
    pub new: Range<usize>,
}

impl DiffGroup {
    pub fn tokens<'a, T>(&self, old: &'a [T], new: &'a [T]) -> &'a [T] {
        match self.kind {
            GroupKind::Keep | GroupKind::Del => &old[self.old.clone()],
            GroupKind::Add => &new[self.new.clone()],
        }
    }
}

/// Minimal token edit script (longest common subsequence), grouped into
/// maximal runs. Ties prefer matching early, then deletions before insertions.
pub fn word_diff<T: Hash + Ord>(old: &[T], new: &[T]) -> Vec<DiffGroup> {
    let mut pre = 0;
    while pre < old.len() && pre < new.len() && old[pre] == new[pre] {
        pre += 1;
    }
    let a = &old[pre..];
    let b = &new[pre..];
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) > MAX_TABLE {
        return myers_groups(old, new);
    }

    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let w = m + 1;
    let mut lcs = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * w + j] = if a[i] == b[j] {
                lcs[(i + 1) * w + j + 1] + 1
            } else {
                lcs[(i + 1) * w + j].max(lcs[i * w + j + 1])
            };
        }
    }

    let mut ops = Vec::with_capacity(n + m + pre);
    ops.extend(std::iter::repeat_n(GroupKind::Keep, pre));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] && lcs[i * w + j] == lcs[(i + 1) * w + j + 1] + 1 {
            ops.push(GroupKind::Keep);
            i += 1;
            j += 1;
        } else if i < n && (j == m || lcs[(i + 1) * w + j] >= lcs[i * w + j + 1]) {
            ops.push(GroupKind::Del);
            i += 1;
        } else {
            ops.push(GroupKind::Add);
            j += 1;
        }
    }
    group_ops(&ops)
}

const MAX_TABLE: usize = 16 << 20;

fn myers_groups<T: Hash + Ord>(old: &[T], new: &[T]) -> Vec<DiffGroup> {
    let mut ops = Vec::new();
    for op in similar::capture_diff_slices(similar::Algorithm::Myers, old, new) {
        let (tag, o, n) = op.as_tag_tuple();
        match tag {
            similar::DiffTag::Equal => ops.extend(std::iter::repeat_n(GroupKind::Keep, o.len())),
            _ => {
                ops.extend(std::iter::repeat_n(GroupKind::Del, o.len()));
                ops.extend(std::iter::repeat_n(GroupKind::Add, n.len()));
            }
        }
    }
    group_ops(&ops)
}

fn group_ops(ops: &[GroupKind]) -> Vec<DiffGroup> {
    let mut out: Vec<DiffGroup> = Vec::new();
    let (mut i, mut j) = (0, 0);
    for &op in ops {
        let (di, dj) = match op {
            GroupKind::Keep => (1, 1),
            GroupKind::Del => (1, 0),
            GroupKind::Add => (0, 1),
        };
        match out.last_mut() {
            Some(g) if g.kind == op => {
                g.old.end += di;
                g.new.end += dj;
            }
            _ => out.push(DiffGroup { kind: op, old: i..i + di, new: j..j + dj }),
        }
        i += di;
        j += dj;
    }
    out
}

/// Aligned (old, new) index pairs of all kept tokens.
pub fn kept_pairs(groups: &[DiffGroup]) -> Vec<(usize, usize)> {
    groups
        .iter()
        .filter(|g| g.kind == GroupKind::Keep)
        .flat_map(|g| g.old.clone().zip(g.new.clone()))
        .collect()
}
