//! Enumeration and counting of short complexes, admissible reversible steps,
//! and mechanisms (R-subsets of steps).
//!
//! Steps are generated from the seven admissible templates rather than by
//! filtering all complex pairs; each template is mass conserving on its own,
//! and per-template counts fall out for free.

use num::bigint::{BigInt, BigUint, Sign};
use num::{One, Zero};

use crate::analysis::DbClass;
use crate::linalg;
use crate::mechanism::{default_species_names, Complex, Mechanism, ReactionStep};
use crate::{Error, Result};

/// Number of complexes of order one or two over M species: M + M + C(M,2).
pub fn count_short_complexes(m: u64) -> u64 {
    assert!(m >= 1);
    m * (m + 3) / 2
}

/// Number of complexes of order exactly three: C(M+2,3).
pub fn count_order3_complexes(m: u64) -> u64 {
    assert!(m >= 1);
    m * (m + 1) * (m + 2) / 6
}

/// Number of admissible reversible steps over at most M species.
pub fn count_steps(m: u64) -> u64 {
    assert!(m >= 1);
    (m - 1) * m * (m * m + 7 * m + 2) / 8
}

/// Per-template step counts, in template order:
/// X<=>Y, X<=>2Y, 2X<=>X+Y, X+Y<=>Z, X+Y<=>2Z, X+Y<=>X+Z, X+Y<=>Z+A.
pub fn step_type_census(m: u64) -> [u64; 7] {
    assert!(m >= 1);
    let pairs = m * (m - 1) / 2;
    [
        pairs,
        m * (m - 1),
        m * (m - 1),
        pairs * m.saturating_sub(2),
        pairs * m.saturating_sub(2),
        pairs * m.saturating_sub(2),
        if m >= 4 { 3 * binom_u64(m, 4) } else { 0 },
    ]
}

fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 1..=k {
        acc = acc * (n - k + i) / i;
    }
    acc
}

/// Exact binomial coefficient as a big integer, with C(n,k) = 0 for k > n.
pub fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc = acc * BigUint::from(n - k + i) / BigUint::from(i);
    }
    acc
}

/// C(n,k) as u128 if it fits; None means larger than u128 can hold.
fn binom_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Number of R-subsets of the admissible steps. With `exact_species` the
/// count keeps only mechanisms in which all M species occur, by
/// inclusion-exclusion over the species left unused.
pub fn count_mechanisms(m: u64, r: u64, exact_species: bool) -> BigUint {
    assert!(m >= 1);
    if !exact_species {
        return binom(count_steps(m), r);
    }
    let mut total = BigInt::zero();
    for j in 0..=m {
        let steps_left = if m - j >= 1 { count_steps(m - j) } else { 0 };
        let term = BigInt::from(binom(m, j) * binom(steps_left, r));
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    let (sign, mag) = total.into_parts();
    assert!(sign != Sign::Minus, "inclusion-exclusion went negative");
    mag
}

fn species_complex(terms: &[(usize, u32)]) -> Complex {
    Complex::new(terms.to_vec()).expect("template complex is valid")
}

fn template_step(reactant: &[(usize, u32)], product: &[(usize, u32)]) -> ReactionStep {
    ReactionStep::new(species_complex(reactant), species_complex(product), true)
        .expect("template sides differ")
}

/// All admissible reversible steps over M species, canonically oriented
/// (lexicographically smaller rendered side first) and sorted by rendering.
pub fn enumerate_steps(m: usize) -> Vec<ReactionStep> {
    assert!(m >= 1);
    let names = default_species_names(m);
    let mut steps = Vec::with_capacity(count_steps(m as u64) as usize);
    // X <=> Y
    for i in 0..m {
        for j in i + 1..m {
            steps.push(template_step(&[(i, 1)], &[(j, 1)]));
        }
    }
    // X <=> 2Y and 2X <=> X + Y, over ordered pairs
    for i in 0..m {
        for j in 0..m {
            if i != j {
                steps.push(template_step(&[(i, 1)], &[(j, 2)]));
                steps.push(template_step(&[(i, 2)], &[(i, 1), (j, 1)]));
            }
        }
    }
    // X + Y <=> Z, X + Y <=> 2Z, X + Y <=> X + Z
    for i in 0..m {
        for j in i + 1..m {
            for k in 0..m {
                if k != i && k != j {
                    steps.push(template_step(&[(i, 1), (j, 1)], &[(k, 1)]));
                    steps.push(template_step(&[(i, 1), (j, 1)], &[(k, 2)]));
                }
            }
            // common species i, the other side pairs i with k > j skipped:
            // {j, k} ranges over unordered pairs of non-i species
        }
    }
    for i in 0..m {
        let others: Vec<usize> = (0..m).filter(|&s| s != i).collect();
        for a in 0..others.len() {
            for b in a + 1..others.len() {
                steps.push(template_step(
                    &[(i, 1), (others[a], 1)],
                    &[(i, 1), (others[b], 1)],
                ));
            }
        }
    }
    // X + Y <=> Z + A over disjoint unordered pairs, each split once
    for i in 0..m {
        for j in i + 1..m {
            for k in i + 1..m {
                for l in k + 1..m {
                    if k != j && l != j && k > i {
                        // pairs {i,j} and {k,l} disjoint; i < j, i < k < l
                        // dedup unordered pair-of-pairs by requiring i = min
                        steps.push(template_step(&[(i, 1), (j, 1)], &[(k, 1), (l, 1)]));
                    }
                }
            }
        }
    }
    debug_assert_eq!(steps.len(), count_steps(m as u64) as usize);
    for step in &mut steps {
        let r = step.reactant.render(&names);
        let p = step.product.render(&names);
        if p < r {
            std::mem::swap(&mut step.reactant, &mut step.product);
        }
    }
    steps.sort_by(|a, b| a.render(&names).cmp(&b.render(&names)));
    steps
}

/// Mechanism-level filters applied during enumeration. Flags combine
/// conjunctively and each is decided independently of the others.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnumerationFilter {
    pub exact_species: bool,
    pub mass_conserving: bool,
    pub db_class: Option<DbClass>,
}

impl EnumerationFilter {
    pub fn matches(&self, mech: &Mechanism) -> bool {
        if self.exact_species && mech.used_species().len() != mech.m() {
            return false;
        }
        if self.mass_conserving || self.db_class.is_some() {
            let gamma = mech.gamma_columns();
            if self.mass_conserving && linalg::mass_vector(&gamma, mech.m()).is_none() {
                return false;
            }
            if let Some(class) = self.db_class {
                let udb = linalg::integer_kernel_basis(&gamma).is_empty();
                if (class == DbClass::Udb) != udb {
                    return false;
                }
            }
        }
        true
    }
}

/// Lexicographic R-subsets of 0..n. O(R) state; `next` yields a fresh index
/// vector per subset.
pub struct SubsetIter {
    n: usize,
    current: Option<Vec<usize>>,
}

impl SubsetIter {
    pub fn new(n: usize, r: usize) -> Self {
        let current = if r <= n { Some((0..r).collect()) } else { None };
        SubsetIter { n, current }
    }

    /// Start at the subset with the given lexicographic rank.
    pub fn from_rank(n: usize, r: usize, rank: u128) -> Self {
        SubsetIter {
            n,
            current: unrank_subset(n, r, rank),
        }
    }
}

impl Iterator for SubsetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let r = cur.len();
        // advance: bump the rightmost index with room, reset the tail
        let mut i = r;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] + (r - i) <= self.n {
                // cur[i] can move up to n - (r - i); strict check above
                if cur[i] < self.n - (r - i) {
                    cur[i] += 1;
                    for j in i + 1..r {
                        cur[j] = cur[j - 1] + 1;
                    }
                    break;
                }
            }
        }
        Some(out)
    }
}

/// Subset of 0..n with the given lexicographic rank, or None if rank is out
/// of range. Exact for ranks far below u128::MAX (binomials that overflow
/// u128 are treated as larger than any representable rank).
pub fn unrank_subset(n: usize, r: usize, rank: u128) -> Option<Vec<usize>> {
    if r > n {
        return None;
    }
    let mut rank = rank;
    let mut subset = Vec::with_capacity(r);
    let mut x = 0usize;
    for i in 0..r {
        loop {
            if x > n - (r - i) {
                return None;
            }
            let with_x = binom_u128((n - 1 - x) as u64, (r - 1 - i) as u64);
            match with_x {
                Some(c) if rank >= c => {
                    rank -= c;
                    x += 1;
                }
                _ => break,
            }
        }
        subset.push(x);
        x += 1;
    }
    if rank == 0 {
        Some(subset)
    } else {
        None
    }
}

/// Streaming mechanism enumeration in lexicographic subset order.
pub struct MechanismIter {
    steps: Vec<ReactionStep>,
    species: Vec<String>,
    subsets: SubsetIter,
    filter: EnumerationFilter,
}

impl Iterator for MechanismIter {
    type Item = Mechanism;

    fn next(&mut self) -> Option<Mechanism> {
        loop {
            let subset = self.subsets.next()?;
            let steps: Vec<ReactionStep> =
                subset.iter().map(|&i| self.steps[i].clone()).collect();
            let mech = Mechanism::new(self.species.clone(), steps)
                .expect("enumerated steps are distinct and valid");
            if self.filter.matches(&mech) {
                return Some(mech);
            }
        }
    }
}

/// Every mechanism of R steps over M species passing `filter`, one R-subset
/// of `enumerate_steps(M)` at a time.
pub fn enumerate_mechanisms(
    m: usize,
    r: usize,
    filter: EnumerationFilter,
) -> Result<MechanismIter> {
    let steps = enumerate_steps(m);
    if r < 1 || r > steps.len() {
        return Err(Error::Mechanism(format!(
            "R = {} out of range: M = {} admits 1..={} steps",
            r,
            m,
            steps.len()
        )));
    }
    Ok(MechanismIter {
        subsets: SubsetIter::new(steps.len(), r),
        steps,
        species: default_species_names(m),
        filter,
    })
}

/// As `enumerate_mechanisms`, but restricted to `count` subsets starting at
/// lexicographic rank `start`. Used to partition work across threads.
pub fn enumerate_mechanisms_range(
    m: usize,
    r: usize,
    filter: EnumerationFilter,
    start: u128,
    count: u128,
) -> Result<impl Iterator<Item = Mechanism>> {
    let steps = enumerate_steps(m);
    if r < 1 || r > steps.len() {
        return Err(Error::Mechanism(format!(
            "R = {} out of range: M = {} admits 1..={} steps",
            r,
            m,
            steps.len()
        )));
    }
    let subsets = SubsetIter::from_rank(steps.len(), r, start);
    let iter = MechanismIter {
        subsets,
        steps,
        species: default_species_names(m),
        filter,
    };
    // the range is over raw subsets, so count before filtering
    let mut remaining = count;
    let mut raw = iter;
    Ok(std::iter::from_fn(move || loop {
        if remaining == 0 {
            return None;
        }
        let subset = raw.subsets.next()?;
        remaining -= 1;
        let steps: Vec<ReactionStep> = subset.iter().map(|&i| raw.steps[i].clone()).collect();
        let mech = Mechanism::new(raw.species.clone(), steps).expect("valid enumerated steps");
        if raw.filter.matches(&mech) {
            return Some(mech);
        }
    }))
}
