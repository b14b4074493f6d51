//! Segment trees over `[1, N]`, canonical partitions and the bitstring maps
//! relating interval data to the multivariate extension.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::value::{Tuple, Value};

/// Node identifier of a segment tree: at most 62 bits, `ε` is the root.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    len: u8,
    bits: u64,
}

pub const MAX_BITS: usize = 62;

impl Bitstring {
    pub const EMPTY: Bitstring = Bitstring { len: 0, bits: 0 };

    pub fn new(len: usize, bits: u64) -> Bitstring {
        assert!(len <= MAX_BITS, "bitstring longer than {MAX_BITS}");
        let mask = if len == 0 { 0 } else { u64::MAX >> (64 - len) };
        Bitstring {
            len: len as u8,
            bits: bits & mask,
        }
    }

    pub fn parse(s: &str) -> Option<Bitstring> {
        if s == "ε" || s.is_empty() {
            return Some(Bitstring::EMPTY);
        }
        if s.len() > MAX_BITS {
            return None;
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return None,
                };
        }
        Some(Bitstring::new(s.len(), bits))
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Bit `i` counted from the left.
    pub fn bit(&self, i: usize) -> u64 {
        (self.bits >> (self.len() - 1 - i)) & 1
    }

    pub fn push(&self, b: u64) -> Bitstring {
        Bitstring::new(self.len() + 1, (self.bits << 1) | (b & 1))
    }

    pub fn concat(&self, other: &Bitstring) -> Bitstring {
        if other.len == 0 {
            return *self;
        }
        Bitstring::new(self.len() + other.len(), (self.bits << other.len) | other.bits)
    }

    /// Substring `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Bitstring {
        debug_assert!(from <= to && to <= self.len());
        let n = to - from;
        if n == 0 {
            return Bitstring::EMPTY;
        }
        Bitstring::new(n, self.bits >> (self.len() - to))
    }

    pub fn prefix(&self, n: usize) -> Bitstring {
        self.slice(0, n)
    }

    pub fn is_prefix_of(&self, other: &Bitstring) -> bool {
        self.len <= other.len && other.prefix(self.len()) == *self
    }

    /// Compact code `1·bits`, unique across lengths.
    pub fn code(&self) -> u64 {
        (1u64 << self.len) | self.bits
    }

    pub fn from_code(code: u64) -> Bitstring {
        debug_assert!(code != 0);
        let len = 63 - code.leading_zeros() as usize;
        Bitstring::new(len, code)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("ε");
        }
        for i in 0..self.len() {
            f.write_str(if self.bit(i) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Closed interval of timestamps.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn contains(&self, t: u64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// End of a lifespan.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum End {
    At(u64),
    Open,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Lifespan {
    pub start: u64,
    pub end: End,
}

impl Lifespan {
    pub fn closed(start: u64, end: u64) -> Lifespan {
        Lifespan {
            start,
            end: End::At(end),
        }
    }

    pub fn open(start: u64) -> Lifespan {
        Lifespan {
            start,
            end: End::Open,
        }
    }

    /// The interval with an open end read as `n`.
    pub fn bounded(&self, n: u64) -> Interval {
        match self.end {
            End::At(e) => Interval::new(self.start, e),
            End::Open => Interval::new(self.start, n),
        }
    }
}

impl fmt::Display for Lifespan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            End::At(e) => write!(f, "[{}, {}]", self.start, e),
            End::Open => write!(f, "[{}, ∞]", self.start),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TimedTuple {
    pub span: Lifespan,
    pub data: Tuple,
}

fn log2_exact(n: u64) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() || n.trailing_zeros() as usize > MAX_BITS {
        return Err(Error::Invalid(format!("segment tree size {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Implicit complete binary tree over `[1, n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentTree {
    n: u64,
    depth: usize,
}

impl SegmentTree {
    pub fn new(n: u64) -> Result<SegmentTree> {
        let depth = log2_exact(n)?;
        Ok(SegmentTree { n, depth })
    }

    pub fn size(&self) -> u64 {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seg(&self, b: &Bitstring) -> Result<Interval> {
        if b.len() > self.depth {
            return Err(Error::Invalid(format!(
                "bitstring {b} deeper than segment tree of size {}",
                self.n
            )));
        }
        let width = 1u64 << (self.depth - b.len());
        let lo = b.bits() * width + 1;
        Ok(Interval::new(lo, lo + width - 1))
    }

    pub fn leaf(&self, t: u64) -> Result<Bitstring> {
        if t == 0 || t > self.n {
            return Err(Error::Invalid(format!("timestamp {t} outside [1, {}]", self.n)));
        }
        Ok(Bitstring::new(self.depth, t - 1))
    }

    pub fn cp(&self, iv: Interval) -> Result<Vec<Bitstring>> {
        if iv.lo == 0 || iv.lo > iv.hi || iv.hi > self.n {
            return Err(Error::Invalid(format!("interval {iv} outside [1, {}]", self.n)));
        }
        let mut out = Vec::new();
        self.cp_rec(Bitstring::EMPTY, 1, self.n, iv, &mut out);
        Ok(out)
    }

    fn cp_rec(&self, b: Bitstring, lo: u64, hi: u64, iv: Interval, out: &mut Vec<Bitstring>) {
        if iv.hi < lo || hi < iv.lo {
            return;
        }
        if iv.lo <= lo && hi <= iv.hi {
            out.push(b);
            return;
        }
        let mid = lo + (hi - lo) / 2;
        self.cp_rec(b.push(0), lo, mid, iv, out);
        self.cp_rec(b.push(1), mid + 1, hi, iv, out);
    }

    /// Root-to-leaf path of nodes containing `t`.
    pub fn stab(&self, t: u64) -> Result<Vec<Bitstring>> {
        let leaf = self.leaf(t)?;
        Ok((0..=self.depth).map(|i| leaf.prefix(i)).collect())
    }

    /// All `(k+1)`-part splits of the leaf of `t`.
    pub fn k_splits_of_leaf(&self, t: u64, k: usize) -> Result<Vec<Vec<Bitstring>>> {
        Ok(splits(&self.leaf(t)?, k + 1))
    }

    pub fn cp_tuple(&self, i: usize, span: Interval, data: &Tuple) -> Result<Vec<(Vec<Bitstring>, Tuple)>> {
        let mut out = Vec::new();
        for node in self.cp(span)? {
            for zs in splits(&node, i) {
                out.push((zs, data.clone()));
            }
        }
        Ok(out)
    }
}

/// All ordered splits of `b` into `parts` possibly empty pieces.
pub fn splits(b: &Bitstring, parts: usize) -> Vec<Vec<Bitstring>> {
    let mut out = Vec::new();
    for_each_split(b, parts, |zs| out.push(zs.to_vec()));
    out
}

pub fn for_each_split(b: &Bitstring, parts: usize, mut f: impl FnMut(&[Bitstring])) {
    if parts == 0 {
        if b.is_empty() {
            f(&[]);
        }
        return;
    }
    let mut cur: Vec<Bitstring> = Vec::with_capacity(parts);
    split_rec(b, 0, parts, &mut cur, &mut f);
}

fn split_rec(b: &Bitstring, from: usize, parts: usize, cur: &mut Vec<Bitstring>, f: &mut impl FnMut(&[Bitstring])) {
    if cur.len() + 1 == parts {
        cur.push(b.slice(from, b.len()));
        f(cur);
        cur.pop();
        return;
    }
    for cut in from..=b.len() {
        cur.push(b.slice(from, cut));
        split_rec(b, cut, parts, cur, f);
        cur.pop();
    }
}

/// Number of splits of a length-`len` string into `parts` pieces: C(len+parts−1, parts−1).
pub fn split_count(len: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(len == 0);
    }
    binom((len + parts - 1) as u128, (parts - 1) as u128)
}

fn binom(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1u128;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn seg(n: u64, b: &Bitstring) -> Result<Interval> {
    SegmentTree::new(n)?.seg(b)
}

pub fn cp(n: u64, iv: Interval) -> Result<Vec<Bitstring>> {
    SegmentTree::new(n)?.cp(iv)
}

pub fn stab(n: u64, t: u64) -> Result<Vec<Bitstring>> {
    SegmentTree::new(n)?.stab(t)
}

/// `G_k`: concatenate the first `k` bitstring values, keep the data values.
pub fn g_map(k: usize, row: &[Value]) -> Result<Tuple> {
    if row.len() < k {
        return Err(Error::Invalid("row shorter than k".into()));
    }
    let mut z = Bitstring::EMPTY;
    for v in &row[..k] {
        let b = v
            .as_bitstring()
            .ok_or_else(|| Error::Invalid(format!("{v} is not a bitstring")))?;
        if z.len() + b.len() > MAX_BITS {
            return Err(Error::Invalid("concatenation too long".into()));
        }
        z = z.concat(&b);
    }
    let mut out = Tuple::new();
    out.push(Value::bits(z));
    out.extend_from_slice(&row[k..]);
    Ok(out)
}

/// `H_k`: split each canonical-partition node of the interval into `k` equal parts.
pub fn h_map(k: usize, n: u64, iv: Interval, data: &[Value]) -> Result<Vec<Tuple>> {
    let mut out = Vec::new();
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    for node in cp(n, iv)? {
        if node.len() % k != 0 {
            continue;
        }
        let l = node.len() / k;
        let mut t = Tuple::new();
        for i in 0..k {
            t.push(Value::bits(node.slice(i * l, (i + 1) * l)));
        }
        t.extend_from_slice(data);
        out.push(t);
    }
    Ok(out)
}

/// Relation-level canonical partition: every tuple of `rel` split into `i` parts.
pub fn cp_relation(
    n: u64,
    i: usize,
    rel: &[(Interval, Tuple)],
) -> Result<BTreeSet<Tuple>> {
    let st = SegmentTree::new(n)?;
    let mut out = BTreeSet::new();
    for (span, data) in rel {
        for (zs, d) in st.cp_tuple(i, *span, data)? {
            let mut t: Tuple = zs.into_iter().map(Value::bits).collect();
            t.extend_from_slice(&d);
            out.insert(t);
        }
    }
    Ok(out)
}

/// Component instance for permutation `perm`: relation `perm[i]` gets `i+1` Z columns.
pub fn cp_database(
    n: u64,
    perm: &[usize],
    timed: &[Vec<(Interval, Tuple)>],
) -> Result<Vec<BTreeSet<Tuple>>> {
    let mut out = vec![BTreeSet::new(); timed.len()];
    for (pos, &j) in perm.iter().enumerate() {
        out[j] = cp_relation(n, pos + 1, &timed[j])?;
    }
    Ok(out)
}

/// Interval version of a component instance whose Z values all have length `ell`.
/// Returns the segment-tree size `2^(k·ell)` and the timed relations.
pub fn interval_version(
    perm: &[usize],
    ell: usize,
    inst: &[Vec<Tuple>],
) -> Result<(u64, Vec<Vec<(Interval, Tuple)>>)> {
    let k = perm.len();
    if k * ell > MAX_BITS {
        return Err(Error::Budget(format!("{k}·{ell} bits exceed {MAX_BITS}")));
    }
    let n = 1u64 << (k * ell);
    let st = SegmentTree::new(n)?;
    let mut out = vec![Vec::new(); inst.len()];
    for (pos, &j) in perm.iter().enumerate() {
        let zc = pos + 1;
        for row in &inst[j] {
            let mut z = Bitstring::EMPTY;
            for v in &row[..zc] {
                let b = v
                    .as_bitstring()
                    .ok_or_else(|| Error::Invalid(format!("{v} is not a bitstring")))?;
                if b.len() != ell {
                    return Err(Error::Invalid(format!("value {b} does not have length {ell}")));
                }
                z = z.concat(&b);
            }
            out[j].push((st.seg(&z)?, row[zc..].iter().copied().collect()));
        }
    }
    Ok((n, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> Bitstring {
        Bitstring::parse(s).unwrap()
    }

    fn set(v: &[&str]) -> BTreeSet<Bitstring> {
        v.iter().map(|s| bs(s)).collect()
    }

    fn cp_brute(n: u64, iv: Interval) -> BTreeSet<Bitstring> {
        let st = SegmentTree::new(n).unwrap();
        let mut all = Vec::new();
        for len in 0..=st.depth() {
            for bits in 0..(1u64 << len) {
                all.push(Bitstring::new(len, bits));
            }
        }
        let inside = |b: &Bitstring| {
            let s = st.seg(b).unwrap();
            iv.lo <= s.lo && s.hi <= iv.hi
        };
        all.iter()
            .filter(|b| inside(b) && (b.is_empty() || !inside(&b.prefix(b.len() - 1))))
            .copied()
            .collect()
    }

    #[test]
    fn seg_examples() {
        assert_eq!(seg(8, &bs("1")).unwrap(), Interval::new(5, 8));
        assert_eq!(seg(8, &Bitstring::EMPTY).unwrap(), Interval::new(1, 8));
        assert_eq!(seg(8, &bs("100")).unwrap(), Interval::new(5, 5));
        assert!(seg(8, &bs("0000")).is_err());
    }

    #[test]
    fn cp_fixtures() {
        let c = |lo, hi| cp(8, Interval::new(lo, hi)).unwrap().into_iter().collect::<BTreeSet<_>>();
        assert_eq!(c(2, 8), set(&["001", "01", "1"]));
        assert_eq!(c(2, 5), set(&["001", "01", "100"]));
        assert_eq!(c(1, 8), set(&["ε"]));
        assert!(cp(8, Interval { lo: 0, hi: 3 }).is_err());
        assert!(cp(8, Interval { lo: 3, hi: 9 }).is_err());
    }

    #[test]
    fn cp_matches_brute_force_and_partitions() {
        let mut n = 8;
        while n <= 64 {
            let st = SegmentTree::new(n).unwrap();
            for lo in 1..=n {
                for hi in lo..=n {
                    let iv = Interval::new(lo, hi);
                    let got = st.cp(iv).unwrap();
                    assert_eq!(got.iter().copied().collect::<BTreeSet<_>>(), cp_brute(n, iv));
                    let mut covered: Vec<u64> = got
                        .iter()
                        .flat_map(|b| {
                            let s = st.seg(b).unwrap();
                            s.lo..=s.hi
                        })
                        .collect();
                    covered.sort();
                    assert_eq!(covered, (lo..=hi).collect::<Vec<_>>());
                    assert!(got.len() <= 2 * st.depth().max(1));
                }
            }
            n *= 2;
        }
    }

    #[test]
    fn stab_examples() {
        assert_eq!(stab(8, 5).unwrap(), vec![bs("ε"), bs("1"), bs("10"), bs("100")]);
        assert_eq!(stab(8, 1).unwrap(), vec![bs("ε"), bs("0"), bs("00"), bs("000")]);
        assert!(stab(8, 9).is_err());
    }

    #[test]
    fn k_splits_count() {
        let st = SegmentTree::new(8).unwrap();
        // leaf of 3 is 010
        let s = st.k_splits_of_leaf(3, 2).unwrap();
        assert_eq!(s.len(), 10);
        let distinct: BTreeSet<_> = s.iter().cloned().collect();
        assert_eq!(distinct.len(), 10);
        for z in &s {
            let cat = z.iter().fold(Bitstring::EMPTY, |a, b| a.concat(b));
            assert_eq!(cat, bs("010"));
        }
        for len in 0..6 {
            for parts in 1..5 {
                let b = Bitstring::new(len, 0b101101);
                assert_eq!(splits(&b, parts).len() as u128, split_count(len, parts));
            }
        }
    }

    #[test]
    fn bitstring_codes_distinguish_lengths() {
        assert_ne!(bs("ε").code(), bs("0").code());
        assert_ne!(bs("0").code(), bs("00").code());
        for s in ["ε", "0", "1", "010", "1111"] {
            assert_eq!(Bitstring::from_code(bs(s).code()), bs(s));
            assert_eq!(bs(s).to_string(), s);
        }
        assert!(bs("01").is_prefix_of(&bs("010")));
        assert!(!bs("1").is_prefix_of(&bs("010")));
    }

    #[test]
    fn overlap_iff_prefix() {
        let st = SegmentTree::new(16).unwrap();
        let mut all = Vec::new();
        for len in 0..=4 {
            for bits in 0..(1u64 << len) {
                all.push(Bitstring::new(len, bits));
            }
        }
        for a in &all {
            for b in &all {
                let ov = st.seg(a).unwrap().intersect(&st.seg(b).unwrap()).is_some();
                assert_eq!(ov, a.is_prefix_of(b) || b.is_prefix_of(a));
            }
        }
    }

    #[test]
    fn singleton_nodes_are_endpoints() {
        let mut n = 2;
        while n <= 256 {
            let st = SegmentTree::new(n).unwrap();
            for lo in 1..=n {
                for hi in lo..=n {
                    for b in st.cp(Interval::new(lo, hi)).unwrap() {
                        if b.len() == st.depth() {
                            let x = st.seg(&b).unwrap().lo;
                            assert!(x == lo || x == hi);
                        }
                    }
                }
            }
            n *= 2;
        }
    }

    #[test]
    fn cp_tuple_examples() {
        let st = SegmentTree::new(8).unwrap();
        let d: Tuple = [Value::constant("b1"), Value::constant("c1")].into_iter().collect();
        let two = st.cp_tuple(2, Interval::new(2, 5), &d).unwrap();
        assert!(two.iter().any(|(z, _)| z == &vec![bs("ε"), bs("01")]));
        let one = st.cp_tuple(1, Interval::new(2, 5), &d).unwrap();
        assert_eq!(
            one.iter().map(|(z, _)| z[0]).collect::<BTreeSet<_>>(),
            set(&["001", "01", "100"])
        );
        let three = st.cp_tuple(3, Interval::new(3, 7), &d).unwrap();
        assert!(three.iter().any(|(z, _)| z == &vec![bs("ε"), bs("01"), bs("ε")]));
    }

    #[test]
    fn g_and_h_maps() {
        let row: Tuple = [bs("ε"), bs("01"), bs("ε")]
            .iter()
            .map(|b| Value::bits(*b))
            .chain(["a1", "b1", "c1"].iter().map(|s| Value::constant(s)))
            .collect();
        let g = g_map(3, &row).unwrap();
        assert_eq!(g[0].as_bitstring().unwrap(), bs("01"));
        assert_eq!(seg(8, &bs("01")).unwrap(), Interval::new(3, 4));
        let row2: Tuple = [bs("ε"), bs("10"), bs("0")].iter().map(|b| Value::bits(*b)).collect();
        let g2 = g_map(3, &row2).unwrap();
        assert_eq!(seg(8, &g2[0].as_bitstring().unwrap()).unwrap(), Interval::new(5, 5));
        assert_eq!(g_map(1, &row).unwrap(), row);
        // k = 1: H is the canonical partition itself
        let h = h_map(1, 8, Interval::new(2, 5), &[]).unwrap();
        assert_eq!(
            h.iter().map(|t| t[0].as_bitstring().unwrap()).collect::<BTreeSet<_>>(),
            set(&["001", "01", "100"])
        );
        // k = 3, ell = 1: node 101 splits into 1,0,1
        let h3 = h_map(3, 8, Interval::new(6, 6), &[]).unwrap();
        assert_eq!(h3.len(), 1);
        assert_eq!(
            h3[0].iter().map(|v| v.as_bitstring().unwrap()).collect::<Vec<_>>(),
            vec![bs("1"), bs("0"), bs("1")]
        );
    }

    #[test]
    fn interval_version_single_bits() {
        // k = 3 with ell = 2 gives N = 64
        let perm = [0usize, 1, 2];
        let v = |s: &str| Value::bits(bs(s));
        let inst = vec![
            vec![[v("01")].into_iter().collect::<Tuple>()],
            vec![[v("01"), v("10")].into_iter().collect::<Tuple>()],
            vec![[v("01"), v("10"), v("11")].into_iter().collect::<Tuple>()],
        ];
        let (n, iv) = interval_version(&perm, 2, &inst).unwrap();
        assert_eq!(n, 64);
        assert_eq!(iv[0][0].0, seg(64, &bs("01")).unwrap());
        assert_eq!(iv[2][0].0, seg(64, &bs("011011")).unwrap());
        // nested because of the shared prefixes
        let i = iv[0][0].0.intersect(&iv[1][0].0).unwrap().intersect(&iv[2][0].0).unwrap();
        assert_eq!(i, iv[2][0].0);
        assert!(interval_version(&perm, 3, &inst).is_err());
    }
}
