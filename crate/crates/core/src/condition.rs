//! Ternary conditions over a fixed term vocabulary.
//!
//! A [`Condition`] assigns each term of a [`TermSchema`] one of `0`, `1` or
//! `*`. Observations of concrete states are wildcard-free; learned models
//! generalize them with [`combine`] and are tested with [`matches`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Hard upper bound on the number of terms in a schema.
pub const MAX_TERMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("condition length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("condition has {0} slots; at most {MAX_TERMS} are supported")]
    TooLong(usize),
    #[error("invalid condition character {ch:?} at slot {slot}")]
    BadSlot { ch: char, slot: usize },
    #[error("duplicate term {0}")]
    DuplicateTerm(String),
    #[error("schema must contain at least one term")]
    EmptySchema,
    #[error("cannot parse term {0:?}")]
    BadTerm(String),
}

/// One term of the condition vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// A binary relation between two object classes, e.g. `touch_N(agent,wall)`.
    Relation { name: String, args: [String; 2] },
    /// A boolean attribute of an object class, e.g. `box.in_bot`.
    Predicate { class: String, attribute: String },
}

impl Term {
    pub fn relation(name: &str, a: &str, b: &str) -> Self {
        Term::Relation {
            name: name.to_owned(),
            args: [a.to_owned(), b.to_owned()],
        }
    }

    pub fn predicate(class: &str, attribute: &str) -> Self {
        Term::Predicate {
            class: class.to_owned(),
            attribute: attribute.to_owned(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Relation { name, args } => write!(f, "{}({},{})", name, args[0], args[1]),
            Term::Predicate { class, attribute } => write!(f, "{class}.{attribute}"),
        }
    }
}

impl FromStr for Term {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConditionError::BadTerm(s.to_owned());
        let s = s.trim();
        if let Some(open) = s.find('(') {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let name = &s[..open];
            if name.is_empty() || a.trim().is_empty() || b.trim().is_empty() {
                return Err(bad());
            }
            Ok(Term::relation(name, a.trim(), b.trim()))
        } else {
            let (class, attribute) = s.split_once('.').ok_or_else(bad)?;
            if class.is_empty() || attribute.is_empty() {
                return Err(bad());
            }
            Ok(Term::predicate(class, attribute))
        }
    }
}

/// Ordered, duplicate-free list of terms. Negation is carried by slot value
/// `0`, so a schema of `n` terms spans `2n` literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermSchema {
    terms: Vec<Term>,
}

impl TermSchema {
    pub fn new(terms: Vec<Term>) -> Result<Self, ConditionError> {
        if terms.is_empty() {
            return Err(ConditionError::EmptySchema);
        }
        if terms.len() > MAX_TERMS {
            return Err(ConditionError::TooLong(terms.len()));
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) {
                return Err(ConditionError::DuplicateTerm(t.to_string()));
            }
        }
        Ok(Self { terms })
    }

    /// The seven-term warehouse vocabulary: four wall contacts, the two
    /// `on` relations and the carried flag of the target box.
    pub fn warehouse() -> Self {
        Self::new(vec![
            Term::relation("touch_N", "agent", "wall"),
            Term::relation("touch_S", "agent", "wall"),
            Term::relation("touch_E", "agent", "wall"),
            Term::relation("touch_W", "agent", "wall"),
            Term::relation("on", "agent", "box"),
            Term::relation("on", "agent", "destination"),
            Term::predicate("box", "in_bot"),
        ])
        .expect("warehouse schema is well formed")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn position(&self, term: &Term) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Builds an observation condition from per-term truth values.
    pub fn observe(&self, truth: &[bool]) -> Result<Condition, ConditionError> {
        if truth.len() != self.len() {
            return Err(ConditionError::LengthMismatch {
                left: truth.len(),
                right: self.len(),
            });
        }
        Ok(Condition::from_bools(truth))
    }
}

/// Value of one condition slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trit {
    Zero,
    One,
    Any,
}

impl Trit {
    pub fn as_char(self) -> char {
        match self {
            Trit::Zero => '0',
            Trit::One => '1',
            Trit::Any => '*',
        }
    }
}

/// Fixed-length ternary vector, stored as a care mask plus value bits.
///
/// Slot 0 is the first schema term and renders leftmost. Bits outside the
/// care mask are always zero so structural equality is slot equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    len: u8,
    care: u64,
    bits: u64,
}

impl Condition {
    /// All-wildcard condition of the given length.
    pub fn any(len: usize) -> Result<Self, ConditionError> {
        if len > MAX_TERMS {
            return Err(ConditionError::TooLong(len));
        }
        Ok(Self {
            len: len as u8,
            care: 0,
            bits: 0,
        })
    }

    pub fn from_bools(truth: &[bool]) -> Self {
        assert!(truth.len() <= MAX_TERMS);
        let mut bits = 0u64;
        for (i, &b) in truth.iter().enumerate() {
            if b {
                bits |= 1 << i;
            }
        }
        Self {
            len: truth.len() as u8,
            care: mask(truth.len()),
            bits,
        }
    }

    pub fn from_trits(slots: &[Trit]) -> Result<Self, ConditionError> {
        let mut c = Self::any(slots.len())?;
        for (i, &t) in slots.iter().enumerate() {
            c.set(i, t);
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, slot: usize) -> Trit {
        assert!(slot < self.len(), "slot {slot} out of range");
        if self.care & (1 << slot) == 0 {
            Trit::Any
        } else if self.bits & (1 << slot) != 0 {
            Trit::One
        } else {
            Trit::Zero
        }
    }

    pub fn set(&mut self, slot: usize, value: Trit) {
        assert!(slot < self.len(), "slot {slot} out of range");
        let b = 1u64 << slot;
        match value {
            Trit::Any => {
                self.care &= !b;
                self.bits &= !b;
            }
            Trit::Zero => {
                self.care |= b;
                self.bits &= !b;
            }
            Trit::One => {
                self.care |= b;
                self.bits |= b;
            }
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = Trit> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// True when no slot is `*`.
    pub fn is_ground(&self) -> bool {
        self.care == mask(self.len())
    }

    pub fn wildcards(&self) -> u32 {
        self.len as u32 - self.care.count_ones()
    }

    fn check_len(&self, other: &Self) -> Result<(), ConditionError> {
        if self.len != other.len {
            Err(ConditionError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            })
        } else {
            Ok(())
        }
    }
}

fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Slot-wise generalization: equal constrained values survive, anything
/// else becomes `*`.
pub fn combine(a: &Condition, b: &Condition) -> Result<Condition, ConditionError> {
    a.check_len(b)?;
    let care = a.care & b.care & !(a.bits ^ b.bits);
    Ok(Condition {
        len: a.len,
        care,
        bits: a.bits & care,
    })
}

/// `obs ⊨ model`: every constrained slot of `model` is equal in `obs`.
pub fn matches(obs: &Condition, model: &Condition) -> Result<bool, ConditionError> {
    obs.check_len(model)?;
    Ok(model.care & !obs.care == 0 && (obs.bits ^ model.bits) & model.care == 0)
}

/// True when every observation matching `specific` also matches `general`.
pub fn is_more_general(general: &Condition, specific: &Condition) -> Result<bool, ConditionError> {
    general.check_len(specific)?;
    Ok(general.care & !specific.care == 0 && (general.bits ^ specific.bits) & general.care == 0)
}

/// True when at least one ground observation matches both conditions.
pub fn overlaps(a: &Condition, b: &Condition) -> Result<bool, ConditionError> {
    a.check_len(b)?;
    Ok((a.bits ^ b.bits) & a.care & b.care == 0)
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in self.slots() {
            write!(f, "{}", t.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Condition({self})")
    }
}

impl FromStr for Condition {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let slots = s
            .chars()
            .enumerate()
            .map(|(slot, ch)| match ch {
                '0' => Ok(Trit::Zero),
                '1' => Ok(Trit::One),
                '*' => Ok(Trit::Any),
                _ => Err(ConditionError::BadSlot { ch, slot }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Condition::from_trits(&slots)
    }
}

impl serde::Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &str) -> Condition {
        s.parse().unwrap()
    }

    /// Every wildcard-free completion of `model`.
    fn completions(model: &Condition) -> Vec<Condition> {
        let free: Vec<usize> = (0..model.len())
            .filter(|&i| model.get(i) == Trit::Any)
            .collect();
        (0u32..1 << free.len())
            .map(|fill| {
                let mut out = *model;
                for (j, &slot) in free.iter().enumerate() {
                    let t = if fill & (1 << j) != 0 { Trit::One } else { Trit::Zero };
                    out.set(slot, t);
                }
                out
            })
            .collect()
    }

    #[test]
    fn combine_table() {
        assert_eq!(combine(&c("1001001"), &c("1001001")).unwrap(), c("1001001"));
        assert_eq!(combine(&c("1001001"), &c("0001001")).unwrap(), c("*001001"));
        assert_eq!(combine(&c("*001001"), &c("1101001")).unwrap(), c("**01001"));
    }

    #[test]
    fn matches_examples() {
        assert!(matches(&c("1001001"), &c("1001001")).unwrap());
        assert!(matches(&c("1001001"), &c("1*0****")).unwrap());
        assert!(!matches(&c("1001001"), &c("0******")).unwrap());
    }

    #[test]
    fn generality_examples() {
        assert!(is_more_general(&c("*001001"), &c("1001001")).unwrap());
        assert!(!is_more_general(&c("1001001"), &c("*001001")).unwrap());
        assert!(is_more_general(&c("**01001"), &c("*001001")).unwrap());
        // enumeration cross-check for the last case
        let general = c("**01001");
        assert!(completions(&c("*001001"))
            .iter()
            .all(|o| matches(o, &general).unwrap()));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let e = combine(&c("10"), &c("100")).unwrap_err();
        assert_eq!(e, ConditionError::LengthMismatch { left: 2, right: 3 });
        assert!(matches(&c("1"), &c("11")).is_err());
        assert!(is_more_general(&c("1"), &c("11")).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(
            "10x".parse::<Condition>(),
            Err(ConditionError::BadSlot { ch: 'x', slot: 2 })
        ));
        assert_eq!(c("*0*1001").to_string(), "*0*1001");
    }

    #[test]
    fn schema_rejects_duplicates() {
        let t = Term::relation("touch_N", "agent", "wall");
        assert!(matches!(
            TermSchema::new(vec![t.clone(), t]),
            Err(ConditionError::DuplicateTerm(_))
        ));
        assert_eq!(TermSchema::new(vec![]), Err(ConditionError::EmptySchema));
    }

    #[test]
    fn terms_round_trip_through_text() {
        for t in TermSchema::warehouse().terms() {
            assert_eq!(&t.to_string().parse::<Term>().unwrap(), t);
        }
        assert!("touch_N(agent)".parse::<Term>().is_err());
        assert!("in_bot".parse::<Term>().is_err());
    }

    fn arb_condition(n: usize) -> impl Strategy<Value = Condition> {
        prop::collection::vec(prop_oneof![Just(Trit::Zero), Just(Trit::One), Just(Trit::Any)], n)
            .prop_map(|v| Condition::from_trits(&v).unwrap())
    }

    fn arb_ground(n: usize) -> impl Strategy<Value = Condition> {
        prop::collection::vec(any::<bool>(), n).prop_map(|v| Condition::from_bools(&v))
    }

    proptest! {
        #[test]
        fn combine_commutes_and_is_idempotent(a in arb_condition(9), b in arb_condition(9)) {
            prop_assert_eq!(combine(&a, &b).unwrap(), combine(&b, &a).unwrap());
            prop_assert_eq!(combine(&a, &a).unwrap(), a);
        }

        #[test]
        fn combine_generalizes_ground_inputs(a in arb_ground(7), b in arb_ground(7)) {
            let g = combine(&a, &b).unwrap();
            prop_assert!(matches(&a, &g).unwrap());
            prop_assert!(matches(&b, &g).unwrap());
            prop_assert!(is_more_general(&g, &a).unwrap());
        }

        #[test]
        fn matches_agrees_with_enumeration(model in arb_condition(8)) {
            let completions = completions(&model);
            for bits in 0u32..1 << 8 {
                let obs = Condition::from_bools(&(0..8).map(|i| bits & (1 << i) != 0).collect::<Vec<_>>());
                prop_assert_eq!(matches(&obs, &model).unwrap(), completions.contains(&obs));
            }
        }

        #[test]
        fn generality_agrees_with_enumeration(a in arb_condition(6), b in arb_condition(6)) {
            let brute = completions(&b).iter().all(|o| matches(o, &a).unwrap());
            prop_assert_eq!(is_more_general(&a, &b).unwrap(), brute);
            let shared = completions(&a).iter().any(|o| matches(o, &b).unwrap());
            prop_assert_eq!(overlaps(&a, &b).unwrap(), shared);
        }

        #[test]
        fn text_round_trip(a in arb_condition(12)) {
            prop_assert_eq!(a.to_string().parse::<Condition>().unwrap(), a);
        }
    }
}
