//! Sparse parity-check codes.
//!
//! The built-in family is irregular repeat-accumulate: information columns
//! come in groups of `Z = j / 180` whose rows follow an address table,
//! `row = (x + c q) mod m` for the `c`-th column of a group with table entry
//! `x` and `q = m / Z`; the parity part is a dual-diagonal staircase. The
//! tables are generated here (degree profile per rate below) with all
//! 4-cycles excluded.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeRate {
    #[serde(rename = "2/3")]
    R2_3,
    #[serde(rename = "3/4")]
    R3_4,
    #[serde(rename = "4/5")]
    R4_5,
}

impl CodeRate {
    pub const ALL: [CodeRate; 3] = [CodeRate::R2_3, CodeRate::R3_4, CodeRate::R4_5];

    pub fn fraction(self) -> (usize, usize) {
        match self {
            CodeRate::R2_3 => (2, 3),
            CodeRate::R3_4 => (3, 4),
            CodeRate::R4_5 => (4, 5),
        }
    }

    pub fn value(self) -> f64 {
        let (a, b) = self.fraction();
        a as f64 / b as f64
    }

    /// `(high-degree groups, their degree)`; the remaining info groups have degree 3.
    fn profile(self) -> (usize, usize) {
        match self {
            CodeRate::R2_3 => (12, 13),
            CodeRate::R3_4 => (15, 12),
            CodeRate::R4_5 => (18, 11),
        }
    }
}

impl std::fmt::Display for CodeRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = self.fraction();
        write!(f, "{a}/{b}")
    }
}

impl std::str::FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2/3" => Ok(CodeRate::R2_3),
            "3/4" => Ok(CodeRate::R3_4),
            "4/5" => Ok(CodeRate::R4_5),
            other => Err(invalid(format!("unknown code rate {other:?}"))),
        }
    }
}

/// Block lengths with a built-in construction.
pub const DEFAULT_BLOCK: usize = 64_800;
pub const SHORT_BLOCK: usize = 6_480;

/// Binary parity-check matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    block_j: usize,
    k: usize,
    rate: Option<CodeRate>,
    construction_id: String,
    /// `row_ptr[r]..row_ptr[r + 1]` indexes `cols` for check `r`.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl LdpcCode {
    /// Build a code from explicit check rows (column indices per row).
    pub fn from_checks(block_j: usize, checks: &[Vec<usize>], construction_id: &str) -> Result<Self> {
        if checks.is_empty() || checks.len() >= block_j {
            return Err(invalid(format!("{} checks on {block_j} columns", checks.len())));
        }
        let mut row_ptr = Vec::with_capacity(checks.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in checks {
            let set: BTreeSet<usize> = row.iter().copied().collect();
            if set.len() != row.len() {
                return Err(invalid("duplicate column in a check row"));
            }
            for &c in &set {
                if c >= block_j {
                    return Err(Error::IndexOutOfRange { index: c, len: block_j });
                }
                cols.push(c as u32);
            }
            row_ptr.push(cols.len());
        }
        let k = block_j - checks.len();
        let rate = CodeRate::ALL.into_iter().find(|r| {
            let (a, b) = r.fraction();
            k * b == block_j * a
        });
        Ok(Self { block_j, k, rate, construction_id: construction_id.to_string(), row_ptr, cols })
    }

    /// Built-in repeat-accumulate code; `block_j` must be a multiple of 180.
    pub fn construct(rate: CodeRate, block_j: usize) -> Result<Self> {
        if block_j == 0 || block_j % 180 != 0 {
            return Err(invalid(format!("block length {block_j} is not a multiple of 180")));
        }
        let z = block_j / 180;
        let (hi_groups, hi_deg) = rate.profile();
        let (a, b) = rate.fraction();
        let groups = 180 * a / b;
        let q = 180 - groups;
        let m = q * z;
        let degrees: Vec<usize> =
            (0..groups).map(|g| if g < hi_groups { hi_deg } else { 3 }).collect();
        let per_class = degrees.iter().sum::<usize>() / q;
        for attempt in 0..64u64 {
            let seed = rng::derive_seed(block_j as u64 ^ (attempt << 32), &format!("ira-{rate}"));
            if let Some(table) = address_table(&degrees, q, z, per_class, seed) {
                let mut checks: Vec<Vec<usize>> = vec![Vec::new(); m];
                for (g, entries) in table.iter().enumerate() {
                    for c in 0..z {
                        for &(class, shift) in entries {
                            checks[class + q * ((shift + c) % z)].push(g * z + c);
                        }
                    }
                }
                let k = groups * z;
                for (t, row) in checks.iter_mut().enumerate() {
                    if t > 0 {
                        row.push(k + t - 1);
                    }
                    row.push(k + t);
                }
                let id = format!("ira-{}-{}-{block_j}-a{attempt}", a, b);
                return Self::from_checks(block_j, &checks, &id);
            }
        }
        Err(invalid(format!("no 4-cycle-free table for rate {rate} at block {block_j}")))
    }

    pub fn block_j(&self) -> usize {
        self.block_j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn rate(&self) -> Option<CodeRate> {
        self.rate
    }

    pub fn rate_value(&self) -> f64 {
        self.k as f64 / self.block_j as f64
    }

    pub fn construction_id(&self) -> &str {
        &self.construction_id
    }

    pub fn edges(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.cols[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|&c| c as usize)
    }

    pub(crate) fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub(crate) fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.block_j];
        for &c in &self.cols {
            d[c as usize] += 1;
        }
        d
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `H x` over GF(2).
    pub fn syndrome(&self, block: &BitString) -> Result<BitString> {
        if block.len() != self.block_j {
            return Err(Error::LengthMismatch { expected: self.block_j, actual: block.len() });
        }
        let mut s = BitString::zeros(self.checks());
        for r in 0..self.checks() {
            if self.row(r).fold(false, |acc, c| acc ^ block.get(c)) {
                s.set(r, true);
            }
        }
        Ok(s)
    }

    /// GF(2) rank of `H` by dense elimination. Quadratic memory; meant for
    /// short blocks.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<BitString> = (0..self.checks())
            .map(|r| {
                let mut b = BitString::zeros(self.block_j);
                for c in self.row(r) {
                    b.set(c, true);
                }
                b
            })
            .collect();
        gf2_rank(&mut rows)
    }

    /// Whether any two columns share two or more checks.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for r in 0..self.checks() {
            let row: Vec<usize> = self.row(r).collect();
            for (i, &a) in row.iter().enumerate() {
                for &b in &row[i + 1..] {
                    if !seen.insert((a, b)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// MacKay alist text. Indices are 1-based; short lists are zero-padded.
    pub fn to_alist(&self) -> String {
        let col_deg = self.column_degrees();
        let row_deg = self.row_degrees();
        let max_c = col_deg.iter().copied().max().unwrap_or(0);
        let max_r = row_deg.iter().copied().max().unwrap_or(0);
        let mut cols_of: Vec<Vec<usize>> = vec![Vec::new(); self.block_j];
        for r in 0..self.checks() {
            for c in self.row(r) {
                cols_of[c].push(r);
            }
        }
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{} {}", self.block_j, self.checks());
        let _ = writeln!(out, "{max_c} {max_r}");
        let _ = writeln!(out, "{}", join(&mut col_deg.iter().copied()));
        let _ = writeln!(out, "{}", join(&mut row_deg.iter().copied()));
        for rows in &cols_of {
            let mut it = rows.iter().map(|r| r + 1).chain(std::iter::repeat(0)).take(max_c);
            let _ = writeln!(out, "{}", join(&mut it));
        }
        for r in 0..self.checks() {
            let mut it = self.row(r).map(|c| c + 1).chain(std::iter::repeat(0)).take(max_r);
            let _ = writeln!(out, "{}", join(&mut it));
        }
        out
    }

    /// Parse alist text; the column and row sections must agree.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<usize>().map_err(|_| Error::Corrupt(format!("alist token {t:?} is not an integer")))
        });
        let mut next = || nums.next().unwrap_or_else(|| Err(Error::Corrupt("alist ends early".into())));
        let n = next()?;
        let m = next()?;
        let max_c = next()?;
        let max_r = next()?;
        let col_deg: Vec<usize> = (0..n).map(|_| next()).collect::<Result<_>>()?;
        let row_deg: Vec<usize> = (0..m).map(|_| next()).collect::<Result<_>>()?;
        let mut from_cols: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (c, &d) in col_deg.iter().enumerate() {
            for slot in 0..max_c {
                let r = next()?;
                if slot < d {
                    if r == 0 || r > m {
                        return Err(Error::Corrupt(format!("column {c} lists row {r}")));
                    }
                    from_cols.insert((r - 1, c));
                }
            }
        }
        let mut checks = vec![Vec::new(); m];
        let mut from_rows = BTreeSet::new();
        for (r, &d) in row_deg.iter().enumerate() {
            for slot in 0..max_r {
                let c = next()?;
                if slot < d {
                    if c == 0 || c > n {
                        return Err(Error::Corrupt(format!("row {r} lists column {c}")));
                    }
                    checks[r].push(c - 1);
                    from_rows.insert((r, c - 1));
                }
            }
        }
        if from_cols != from_rows {
            return Err(Error::Corrupt("alist column and row sections disagree".into()));
        }
        Self::from_checks(n, &checks, "alist")
    }
}

/// Rank of a set of GF(2) rows; the rows are consumed by elimination.
pub fn gf2_rank(rows: &mut [BitString]) -> usize {
    let Some(width) = rows.first().map(|r| r.len()) else { return 0 };
    let mut words: Vec<Vec<u64>> = rows.iter().map(|r| r.words().to_vec()).collect();
    let mut rank = 0;
    for col in 0..width {
        let (w, bit) = (col >> 6, 1u64 << (col & 63));
        let Some(pivot) = (rank..words.len()).find(|&r| words[r][w] & bit != 0) else { continue };
        words.swap(rank, pivot);
        let (head, tail) = words.split_at_mut(rank + 1);
        let p = &head[rank];
        for row in tail.iter_mut() {
            if row[w] & bit != 0 {
                for (a, b) in row[w..].iter_mut().zip(&p[w..]) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
        if rank == words.len() {
            break;
        }
    }
    rank
}

/// Base entries `(class, shift)` per group, or `None` if the greedy search
/// dead-ends.
fn address_table(degrees: &[usize], q: usize, z: usize, per_class: usize, seed: u64) -> Option<Vec<Vec<(usize, usize)>>> {
    let mut r = rng::from_seed(seed);
    // used[(a * q + b) * z + d]: some group has shift(a) - shift(b) = d (mod z).
    let mut used = vec![false; q * q * z];
    let mark = |used: &mut Vec<bool>, a: usize, b: usize, d: usize| {
        used[(a * q + b) * z + d] = true;
        used[(b * q + a) * z + (z - d) % z] = true;
    };
    // Adjacent rows in one column would close a 4-cycle with a staircase column.
    for a in 0..q - 1 {
        mark(&mut used, a + 1, a, 0);
    }
    mark(&mut used, 0, q - 1, 1 % z);

    let mut remaining = vec![per_class; q];
    let mut table = Vec::with_capacity(degrees.len());
    for &deg in degrees {
        let mut classes: Vec<usize> = (0..q).filter(|&a| remaining[a] > 0).collect();
        classes.shuffle(&mut r);
        classes.sort_by_key(|&a| std::cmp::Reverse(remaining[a]));
        if classes.len() < deg {
            return None;
        }
        // Take the fullest classes, breaking ties randomly.
        let cut = remaining[classes[deg - 1]];
        let mut chosen: Vec<usize> = classes.iter().copied().filter(|&a| remaining[a] > cut).collect();
        let mut ties: Vec<usize> = classes.iter().copied().filter(|&a| remaining[a] == cut).collect();
        ties.shuffle(&mut r);
        chosen.extend(ties.into_iter().take(deg - chosen.len()));

        let mut entries: Vec<(usize, usize)> = Vec::with_capacity(deg);
        for &a in &chosen {
            let start = r.random_range(0..z);
            let shift = (0..z).map(|o| (start + o) % z).find(|&s| {
                entries.iter().all(|&(b, t)| !used[(a * q + b) * z + (s + z - t) % z])
            })?;
            entries.push((a, shift));
        }
        for (i, &(a, s)) in entries.iter().enumerate() {
            for &(b, t) in &entries[i + 1..] {
                mark(&mut used, a, b, (s + z - t) % z);
            }
            remaining[a] -= 1;
        }
        table.push(entries);
    }
    Some(table)
}
