//! Jersey-number identification by Dempster-Shafer evidence fusion.
//!
//! Each thumbnail's digit detections become a mass function over the frame of
//! discernment `{1, ..., 99}`:
//!
//! * no usable digit gives the vacuous mass `m(Θ) = 1` (missing prediction);
//! * one digit `d` puts `α·c` on `S_d`, the numbers whose decimal form
//!   contains `d` (partial prediction);
//! * two digits ordered left to right put `α·c₁·c₂` on the single number they
//!   spell.
//!
//! Digits outside the central player's box are ignored so that bystanders'
//! shirts do not leak into the evidence. Masses are fused with Dempster's rule
//! and the verdict is the pignistic argmax, with abstention below a threshold.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DigitDetection, ImageBox};
use crate::quant::{q9, ser_q9};

pub const MIN_NUMBER: u8 = 1;
pub const MAX_NUMBER: u8 = 99;
/// Tolerance on the total mass of a mass function.
pub const MASS_TOL: f64 = 1e-9;
/// Conflict at or above `1 - TOTAL_CONFLICT_EPS` is treated as irreconcilable.
pub const TOTAL_CONFLICT_EPS: f64 = 1e-9;

/// A subset of `{1, ..., 99}` as a bitset; bit `n` stands for number `n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NumberSet(u128);

impl NumberSet {
    pub const EMPTY: NumberSet = NumberSet(0);
    /// The full frame of discernment Θ.
    pub const THETA: NumberSet = NumberSet(((1u128 << 100) - 1) & !1);

    pub fn singleton(n: u8) -> NumberSet {
        assert!((MIN_NUMBER..=MAX_NUMBER).contains(&n), "number {n} outside 1..=99");
        NumberSet(1u128 << n)
    }

    /// Numbers whose decimal form contains `digit`.
    pub fn containing_digit(digit: u8) -> NumberSet {
        assert!(digit <= 9);
        let mut bits = 0u128;
        for n in MIN_NUMBER..=MAX_NUMBER {
            if n % 10 == digit || (n >= 10 && n / 10 == digit) {
                bits |= 1 << n;
            }
        }
        NumberSet(bits)
    }

    pub fn from_numbers<I: IntoIterator<Item = u8>>(numbers: I) -> Option<NumberSet> {
        let mut bits = 0u128;
        for n in numbers {
            if !(MIN_NUMBER..=MAX_NUMBER).contains(&n) {
                return None;
            }
            bits |= 1 << n;
        }
        Some(NumberSet(bits))
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(self, n: u8) -> bool {
        n < 128 && self.0 & (1 << n) != 0
    }

    pub fn intersect(self, other: NumberSet) -> NumberSet {
        NumberSet(self.0 & other.0)
    }

    pub fn union(self, other: NumberSet) -> NumberSet {
        NumberSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: NumberSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn numbers(self) -> impl Iterator<Item = u8> {
        let bits = self.0;
        (MIN_NUMBER..=MAX_NUMBER).filter(move |n| bits & (1 << n) != 0)
    }
}

impl fmt::Debug for NumberSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == NumberSet::THETA {
            return f.write_str("Θ");
        }
        f.debug_set().entries(self.numbers()).finish()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("invalid mass function: {0}")]
    InvalidMass(String),
    #[error("total conflict between bodies of evidence (K = {conflict})")]
    TotalConflict { conflict: f64 },
}

/// Dempster's rule on raw focal lists, generic over the mass scalar so it can
/// be run in exact arithmetic. Returns the normalized focal elements, the
/// conflict `K` and the agreement `1 - K` (computed directly, not by
/// subtraction). When the agreement is zero the focal list is empty.
pub fn dempster_rule<T>(a: &[(NumberSet, T)], b: &[(NumberSet, T)]) -> (Vec<(NumberSet, T)>, T, T)
where
    T: Copy + Zero + One + PartialEq + Add<Output = T> + Mul<Output = T> + Div<Output = T> + Sub<Output = T>,
{
    let mut joint: BTreeMap<NumberSet, T> = BTreeMap::new();
    let mut conflict = T::zero();
    let mut agreement = T::zero();
    for &(sa, ma) in a {
        for &(sb, mb) in b {
            let product = ma * mb;
            let inter = sa.intersect(sb);
            if inter.is_empty() {
                conflict = conflict + product;
            } else {
                agreement = agreement + product;
                let slot = joint.entry(inter).or_insert_with(T::zero);
                *slot = *slot + product;
            }
        }
    }
    if agreement == T::zero() {
        return (Vec::new(), conflict, agreement);
    }
    let focal = joint
        .into_iter()
        .map(|(s, m)| (s, m / agreement))
        .filter(|(_, m)| *m != T::zero())
        .collect();
    (focal, conflict, agreement)
}

/// Evidence over jersey numbers: nonempty focal sets with positive masses
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    focal: BTreeMap<NumberSet, f64>,
}

impl MassFunction {
    pub fn vacuous() -> MassFunction {
        MassFunction {
            focal: BTreeMap::from([(NumberSet::THETA, 1.0)]),
        }
    }

    /// Builds a mass function, merging repeated focal sets and dropping zero
    /// masses.
    pub fn new<I: IntoIterator<Item = (NumberSet, f64)>>(focal: I) -> Result<MassFunction, FusionError> {
        let mut map: BTreeMap<NumberSet, f64> = BTreeMap::new();
        for (s, m) in focal {
            if s.is_empty() {
                return Err(FusionError::InvalidMass("mass on the empty set".into()));
            }
            if !s.is_subset(NumberSet::THETA) {
                return Err(FusionError::InvalidMass(format!("{s:?} not within 1..=99")));
            }
            if !(m.is_finite() && (0.0..=1.0).contains(&m)) {
                return Err(FusionError::InvalidMass(format!("mass {m} outside [0, 1]")));
            }
            if m > 0.0 {
                *map.entry(s).or_insert(0.0) += m;
            }
        }
        let total: f64 = map.values().sum();
        if map.is_empty() || (total - 1.0).abs() > MASS_TOL {
            return Err(FusionError::InvalidMass(format!("masses sum to {total}")));
        }
        Ok(MassFunction { focal: map })
    }

    /// `m(set) = mass`, remainder on Θ.
    pub fn simple(set: NumberSet, mass: f64) -> Result<MassFunction, FusionError> {
        MassFunction::new([(set, mass), (NumberSet::THETA, 1.0 - mass)])
    }

    pub fn focal(&self) -> impl Iterator<Item = (NumberSet, f64)> + '_ {
        self.focal.iter().map(|(s, m)| (*s, *m))
    }

    pub fn focal_count(&self) -> usize {
        self.focal.len()
    }

    pub fn mass(&self, set: NumberSet) -> f64 {
        self.focal.get(&set).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.focal.values().sum()
    }

    pub fn is_vacuous(&self) -> bool {
        self.focal.len() == 1 && self.focal.contains_key(&NumberSet::THETA)
    }

    fn as_list(&self) -> Vec<(NumberSet, f64)> {
        self.focal().collect()
    }
}

/// Unnormalized conflict `K` between two bodies of evidence.
pub fn conflict(m1: &MassFunction, m2: &MassFunction) -> f64 {
    let mut k = 0.0;
    for (sa, ma) in m1.focal() {
        for (sb, mb) in m2.focal() {
            if sa.intersect(sb).is_empty() {
                k += ma * mb;
            }
        }
    }
    k
}

/// Dempster's rule of combination. Fails with `TotalConflict` when
/// `K >= 1 - 1e-9`.
pub fn dempster_combine(m1: &MassFunction, m2: &MassFunction) -> Result<(MassFunction, f64), FusionError> {
    // exact identity; the general path would divide by a float sum near 1
    if m2.is_vacuous() {
        return Ok((m1.clone(), 0.0));
    }
    if m1.is_vacuous() {
        return Ok((m2.clone(), 0.0));
    }
    let (focal, k, agreement) = dempster_rule(&m1.as_list(), &m2.as_list());
    if k >= 1.0 - TOTAL_CONFLICT_EPS || agreement <= 0.0 || focal.is_empty() {
        return Err(FusionError::TotalConflict { conflict: k });
    }
    Ok((
        MassFunction {
            focal: focal.into_iter().collect(),
        },
        k,
    ))
}

/// Left fold of `dempster_combine`. The returned conflict is
/// `1 - Π(1 - K_step)`.
pub fn combine_all(masses: &[MassFunction]) -> Result<(MassFunction, f64), FusionError> {
    let (first, rest) = masses
        .split_first()
        .ok_or_else(|| FusionError::InvalidMass("nothing to combine".into()))?;
    let mut acc = first.clone();
    let mut kept = 1.0;
    for m in rest {
        if m.is_vacuous() {
            continue;
        }
        let (next, k) = dempster_combine(&acc, m)?;
        acc = next;
        kept *= 1.0 - k;
    }
    Ok((acc, 1.0 - kept))
}

/// `Bel(A) = Σ_{B ⊆ A} m(B)`.
pub fn belief(m: &MassFunction, a: NumberSet) -> f64 {
    m.focal().filter(|(b, _)| b.is_subset(a)).map(|(_, v)| v).sum()
}

/// `Pl(A) = Σ_{B ∩ A ≠ ∅} m(B)`.
pub fn plausibility(m: &MassFunction, a: NumberSet) -> f64 {
    m.focal()
        .filter(|(b, _)| !b.intersect(a).is_empty())
        .map(|(_, v)| v)
        .sum()
}

/// Pignistic probability over jersey numbers, indexed by number.
#[derive(Debug, Clone, PartialEq)]
pub struct Pignistic([f64; 100]);

impl Pignistic {
    pub fn get(&self, n: u8) -> f64 {
        if (MIN_NUMBER..=MAX_NUMBER).contains(&n) {
            self.0[n as usize]
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        (MIN_NUMBER..=MAX_NUMBER).map(|n| (n, self.0[n as usize]))
    }
}

/// `BetP(x) = Σ_{A ∋ x} m(A) / |A|`.
pub fn pignistic(m: &MassFunction) -> Pignistic {
    let mut p = [0.0; 100];
    for (set, mass) in m.focal() {
        let share = mass / set.len() as f64;
        for n in set.numbers() {
            p[n as usize] += share;
        }
    }
    Pignistic(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumberVerdict {
    /// Decided jersey number; `None` means abstain.
    pub outcome: Option<u8>,
    #[serde(serialize_with = "ser_q9")]
    pub confidence: f64,
    #[serde(serialize_with = "ser_q9")]
    pub total_conflict: f64,
}

impl NumberVerdict {
    pub fn abstain(confidence: f64, total_conflict: f64) -> Self {
        NumberVerdict {
            outcome: None,
            confidence,
            total_conflict,
        }
    }
}

/// Pignistic values closer than this are treated as a tie.
const TIE_EPS: f64 = 1e-12;

/// Pignistic argmax with abstention on ties or when below `threshold`.
pub fn decide_number(m: &MassFunction, threshold: f64) -> NumberVerdict {
    let betp = pignistic(m);
    let mut best: Option<(u8, f64)> = None;
    let mut tied = false;
    for (n, p) in betp.iter() {
        match best {
            Some((_, bp)) if p > bp + TIE_EPS => {
                best = Some((n, p));
                tied = false;
            }
            Some((_, bp)) if (p - bp).abs() <= TIE_EPS => tied = true,
            Some(_) => {}
            None => best = Some((n, p)),
        }
    }
    let (n, p) = best.expect("frame of discernment is nonempty");
    if tied || p < threshold {
        NumberVerdict::abstain(p, 0.0)
    } else {
        NumberVerdict {
            outcome: Some(n),
            confidence: p,
            total_conflict: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionParams {
    /// Source reliability `α` applied to every thumbnail.
    pub discount: f64,
    /// Minimum pignistic probability for a decision.
    pub threshold: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            discount: 0.9,
            threshold: 0.5,
        }
    }
}

/// The two most confident digits, in x order. Among pairs with equal
/// confidences the one centered closest to `cx` wins, since a shirt's two
/// digits straddle its center; remaining ties go to the leftmost pair.
fn top_pair<'a>(sorted_by_x: &[&'a DigitDetection], cx: f64) -> Vec<&'a DigitDetection> {
    let mut best: Option<((f64, f64), f64, (usize, usize))> = None;
    for i in 0..sorted_by_x.len() {
        for j in (i + 1)..sorted_by_x.len() {
            let (a, b) = (sorted_by_x[i], sorted_by_x[j]);
            let conf = (a.conf.max(b.conf), a.conf.min(b.conf));
            let off = ((a.x + b.x) / 2.0 - cx).abs();
            let better = match best {
                None => true,
                Some((bc, bo, _)) => match conf.0.total_cmp(&bc.0).then(conf.1.total_cmp(&bc.1)) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => off < bo,
                },
            };
            if better {
                best = Some((conf, off, (i, j)));
            }
        }
    }
    let (_, _, (i, j)) = best.expect("at least two digits");
    vec![sorted_by_x[i], sorted_by_x[j]]
}

/// Mass function from one thumbnail's digit detections.
pub fn evidence_from_thumbnail(digits: &[DigitDetection], central_box: &ImageBox, discount: f64) -> MassFunction {
    let mut used: Vec<&DigitDetection> = digits
        .iter()
        .filter(|d| d.digit <= 9 && central_box.spans_x(d.x))
        .collect();
    used.sort_by(|a, b| a.x.total_cmp(&b.x));
    if used.len() > 2 {
        used = top_pair(&used, central_box.cx);
    }

    let (set, weight) = match used.as_slice() {
        [] => return MassFunction::vacuous(),
        [d] => (NumberSet::containing_digit(d.digit), d.conf),
        [lead, d] if lead.digit == 0 => (NumberSet::containing_digit(d.digit), d.conf),
        [tens, units] => (
            NumberSet::singleton(10 * tens.digit + units.digit),
            tens.conf * units.conf,
        ),
        _ => unreachable!(),
    };
    let mass = (discount * weight).clamp(0.0, 1.0);
    if mass <= 0.0 {
        return MassFunction::vacuous();
    }
    MassFunction::simple(set, mass).expect("simple support mass is valid")
}

/// Combines per-thumbnail evidence and decides, carrying the total conflict
/// into the verdict.
pub fn identify(evidence: &[MassFunction], params: &FusionParams) -> Result<(MassFunction, NumberVerdict), FusionError> {
    if evidence.is_empty() {
        let m = MassFunction::vacuous();
        let v = decide_number(&m, params.threshold);
        return Ok((m, v));
    }
    let (m, k) = combine_all(evidence)?;
    let mut v = decide_number(&m, params.threshold);
    // verdicts are persisted at 9 digits; keep the in-memory copy identical
    v.confidence = q9(v.confidence);
    v.total_conflict = q9(k);
    Ok((m, v))
}

impl Serialize for MassFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.focal.len()))?;
        for (set, m) in self.focal() {
            seq.serialize_element(&(set.numbers().collect::<Vec<u8>>(), q9(m)))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for MassFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: Vec<(Vec<u8>, f64)> = Vec::deserialize(d)?;
        let mut focal = Vec::with_capacity(raw.len());
        for (members, m) in raw {
            let set = NumberSet::from_numbers(members)
                .ok_or_else(|| serde::de::Error::custom("focal member outside 1..=99"))?;
            focal.push((set, m));
        }
        MassFunction::new(focal).map_err(serde::de::Error::custom)
    }
}
