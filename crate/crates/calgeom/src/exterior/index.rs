//! Lexicographic multi-indices for Λᵖ(Rⁿ).

use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};

/// Largest supported ambient dimension. Every `C(n, p)` with `n ≤ 12` is at
/// most 924, so coefficient vectors stay dense.
pub const MAX_N: usize = 12;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub(crate) fn check_shape(n: usize, p: usize) -> Result<()> {
    if n > MAX_N || p > n {
        return Err(Error::Capacity { n, p });
    }
    Ok(())
}

/// A strictly increasing tuple of indices in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    len: u8,
    idx: [u8; MAX_N],
}

impl core::fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl MultiIndex {
    /// Builds an index from a strictly increasing slice.
    pub fn new(indices: &[usize], n: usize) -> Result<Self> {
        check_shape(n, indices.len())?;
        let mut idx = [0u8; MAX_N];
        for (t, &i) in indices.iter().enumerate() {
            if i >= n {
                return Err(shape_err!("index {i} out of range for n = {n}"));
            }
            if t > 0 && indices[t - 1] >= i {
                return Err(shape_err!("indices {indices:?} are not strictly increasing"));
            }
            idx[t] = i as u8;
        }
        Ok(Self { len: indices.len() as u8, idx })
    }

    pub(crate) fn from_raw(raw: &[u8]) -> Self {
        let mut idx = [0u8; MAX_N];
        idx[..raw.len()].copy_from_slice(raw);
        Self { len: raw.len() as u8, idx }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.idx[..self.len as usize]
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.as_slice().iter().map(|&i| i as usize).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.as_slice().iter().any(|&j| j as usize == i)
    }

    /// Lexicographic rank among the `len`-subsets of `[0, n)`.
    pub fn rank(&self, n: usize) -> usize {
        rank_raw(self.as_slice(), n)
    }

    /// Inverse of [`MultiIndex::rank`].
    pub fn unrank(mut r: usize, n: usize, p: usize) -> Result<Self> {
        check_shape(n, p)?;
        if r >= binomial(n, p) {
            return Err(shape_err!("rank {r} out of range for C({n},{p})"));
        }
        let mut idx = [0u8; MAX_N];
        let mut v = 0usize;
        for t in 0..p {
            loop {
                let c = binomial(n - 1 - v, p - 1 - t);
                if r < c {
                    break;
                }
                r -= c;
                v += 1;
            }
            idx[t] = v as u8;
            v += 1;
        }
        Ok(Self { len: p as u8, idx })
    }

    /// Complementary index in `[0, n)`.
    pub fn complement(&self, n: usize) -> Self {
        let mut idx = [0u8; MAX_N];
        let mut len = 0;
        for i in 0..n {
            if !self.contains(i) {
                idx[len] = i as u8;
                len += 1;
            }
        }
        Self { len: len as u8, idx }
    }
}

pub(crate) fn rank_raw(s: &[u8], n: usize) -> usize {
    let k = s.len();
    let mut r = 0;
    let mut prev = 0usize;
    for (t, &it) in s.iter().enumerate() {
        let it = it as usize;
        for v in prev..it {
            r += binomial(n - 1 - v, k - 1 - t);
        }
        prev = it + 1;
    }
    r
}

/// All `p`-subsets of `[0, n)` in lexicographic order.
pub fn subsets(n: usize, p: usize) -> Vec<MultiIndex> {
    let total = binomial(n, p);
    let mut out = Vec::with_capacity(total);
    if p > n {
        return out;
    }
    let mut cur: Vec<u8> = (0..p as u8).collect();
    loop {
        out.push(MultiIndex::from_raw(&cur));
        let mut t = p;
        while t > 0 && cur[t - 1] as usize == n - p + t - 1 {
            t -= 1;
        }
        if t == 0 {
            return out;
        }
        cur[t - 1] += 1;
        for u in t..p {
            cur[u] = cur[u - 1] + 1;
        }
    }
}

/// Sorts a short index list, returning the permutation sign, or `None` on a
/// repeated index.
pub(crate) fn sort_with_sign(v: &mut [u8]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for i in 1..v.len() {
        if v[i - 1] == v[i] {
            return None;
        }
    }
    Some(sign)
}
