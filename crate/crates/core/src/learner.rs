//! Deterministic condition/effect transition learning.
//!
//! The learner keeps, per action, the ground conditions under which the
//! action was observed to do nothing (failure conditions), and per
//! `(action, attribute, effect type)` key at most `k` predictions pairing a
//! (possibly generalized) condition with the effect it causes. A key whose
//! observations contradict the one-effect-per-condition assumption is
//! blacklisted for good.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{combine, is_more_general, matches, overlaps, Condition, ConditionError, TermSchema};
use crate::domain::{Action, GridMap};
use crate::model::{apply_effects, cond_of_state, eff_att, effects_compatible, Attribute, Effect, EffectType, ModelError, OOState, Value};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("malformed model dump: {0}")]
    BadDump(String),
}

/// `(action, attribute, effect type)`.
pub type Key = (Action, Attribute, EffectType);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub model: Condition,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionStore {
    pred: BTreeMap<Key, Vec<Prediction>>,
    blacklist: BTreeSet<Key>,
    k: usize,
}

impl PredictionStore {
    pub fn new(k: usize) -> Self {
        Self {
            pred: BTreeMap::new(),
            blacklist: BTreeSet::new(),
            k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn predictions(&self, key: &Key) -> &[Prediction] {
        self.pred.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn is_blacklisted(&self, key: &Key) -> bool {
        self.blacklist.contains(key)
    }

    /// Every key that holds predictions or has been blacklisted, in order.
    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        let mut keys: BTreeSet<Key> = self.pred.keys().copied().collect();
        keys.extend(self.blacklist.iter().copied());
        keys.into_iter()
    }

    fn remove(&mut self, key: Key) {
        self.pred.remove(&key);
        self.blacklist.insert(key);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureConditions {
    by_action: BTreeMap<Action, BTreeSet<Condition>>,
}

impl FailureConditions {
    pub fn get(&self, a: Action) -> impl Iterator<Item = &Condition> {
        self.by_action.get(&a).into_iter().flatten()
    }

    pub fn matches(&self, a: Action, obs: &Condition) -> bool {
        self.get(a).any(|c| matches(obs, c).unwrap_or(false))
    }

    /// Adds `obs` unless a stored condition already covers it, dropping the
    /// stored conditions `obs` covers. Returns whether the set changed.
    fn record(&mut self, a: Action, obs: Condition) -> bool {
        let set = self.by_action.entry(a).or_default();
        if set.iter().any(|c| matches(&obs, c).unwrap_or(false)) {
            return false;
        }
        set.retain(|c| !matches(c, &obs).unwrap_or(false));
        set.insert(obs)
    }

    pub fn len(&self) -> usize {
        self.by_action.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of asking the model about `(s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionPrediction {
    Known(OOState),
    /// A known failure condition holds: the state does not change.
    Failure(OOState),
    /// The model cannot vouch for the outcome.
    Unknown,
}

impl TransitionPrediction {
    pub fn label(&self) -> &'static str {
        match self {
            TransitionPrediction::Known(_) => "known",
            TransitionPrediction::Failure(_) => "failure",
            TransitionPrediction::Unknown => "unknown",
        }
    }

    /// The predicted next state, if any.
    pub fn state(&self) -> Option<&OOState> {
        match self {
            TransitionPrediction::Known(s) | TransitionPrediction::Failure(s) => Some(s),
            TransitionPrediction::Unknown => None,
        }
    }
}

/// The transition-model learner.
#[derive(Debug, Clone)]
pub struct Doormax {
    schema: TermSchema,
    store: PredictionStore,
    failures: FailureConditions,
    unknown_counts: BTreeMap<Key, u64>,
    failure_unknowns: BTreeMap<Action, u64>,
    unattributed: u64,
    revision: u64,
}

impl Doormax {
    pub fn new(schema: TermSchema, k: usize) -> Result<Self, LearnError> {
        if k == 0 {
            return Err(LearnError::ZeroK);
        }
        Ok(Self {
            schema,
            store: PredictionStore::new(k),
            failures: FailureConditions::default(),
            unknown_counts: BTreeMap::new(),
            failure_unknowns: BTreeMap::new(),
            unattributed: 0,
            revision: 0,
        })
    }

    /// Learner over the seven-term warehouse schema.
    pub fn warehouse(k: usize) -> Result<Self, LearnError> {
        Self::new(TermSchema::warehouse(), k)
    }

    pub fn schema(&self) -> &TermSchema {
        &self.schema
    }

    pub fn store(&self) -> &PredictionStore {
        &self.store
    }

    pub fn failures(&self) -> &FailureConditions {
        &self.failures
    }

    pub fn k(&self) -> usize {
        self.store.k
    }

    /// Bumped whenever the store or the failure sets change.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// `n*k + k + 1`, the per-key limit on "don't know" answers.
    pub fn kwik_bound(&self) -> u64 {
        let (n, k) = (self.schema.len() as u64, self.store.k as u64);
        n * k + k + 1
    }

    pub fn condition(&self, s: &OOState, map: &GridMap) -> Result<Condition, LearnError> {
        Ok(cond_of_state(s, map, &self.schema)?)
    }

    pub fn predict_transition(
        &self,
        s: &OOState,
        a: Action,
        map: &GridMap,
    ) -> Result<TransitionPrediction, LearnError> {
        let obs = self.condition(s, map)?;
        if self.failures.matches(a, &obs) {
            return Ok(TransitionPrediction::Failure(s.clone()));
        }
        let mut effects: Vec<Effect> = Vec::new();
        for att in Attribute::LEARNED {
            let before = effects.len();
            for kind in [EffectType::Assignment, EffectType::Increment] {
                let key = (a, att, kind);
                if self.store.is_blacklisted(&key) {
                    continue;
                }
                for p in self.store.predictions(&key) {
                    if matches(&obs, &p.model)? && !effects.contains(&p.effect) {
                        effects.push(p.effect);
                    }
                }
            }
            if effects.len() == before {
                return Ok(TransitionPrediction::Unknown);
            }
        }
        for (i, e1) in effects.iter().enumerate() {
            if effects[i + 1..].iter().any(|e2| !effects_compatible(e1, e2, s)) {
                return Ok(TransitionPrediction::Unknown);
            }
        }
        Ok(TransitionPrediction::Known(apply_effects(s, &effects)?))
    }

    pub fn add_experience(
        &mut self,
        s: &OOState,
        a: Action,
        next: &OOState,
        map: &GridMap,
    ) -> Result<(), LearnError> {
        let obs = self.condition(s, map)?;
        if s == next {
            if self.failures.record(a, obs) {
                self.revision += 1;
            }
            return Ok(());
        }
        let mut changed = false;
        for att in Attribute::LEARNED {
            for e in eff_att(s, next, att)? {
                let key = (a, att, e.kind);
                if !self.store.is_blacklisted(&key) {
                    changed |= self.update_key(key, obs, e)?;
                }
            }
        }
        if changed {
            self.revision += 1;
        }
        Ok(())
    }

    fn update_key(&mut self, key: Key, obs: Condition, e: Effect) -> Result<bool, LearnError> {
        let k = self.store.k;
        let preds = self.store.pred.entry(key).or_default();
        if let Some(i) = preds.iter().position(|p| p.effect == e) {
            let model = combine(&preds[i].model, &obs)?;
            let changed = model != preds[i].model;
            preds[i].model = model;
            let mut clash = false;
            for (j, q) in preds.iter().enumerate() {
                if j != i && overlaps(&model, &q.model)? {
                    clash = true;
                }
            }
            if clash {
                self.store.remove(key);
                return Ok(true);
            }
            return Ok(changed);
        }
        for q in preds.iter() {
            if matches(&obs, &q.model)? || is_more_general(&obs, &q.model)? {
                self.store.remove(key);
                return Ok(true);
            }
        }
        preds.push(Prediction { model: obs, effect: e });
        if preds.len() > k {
            self.store.remove(key);
        }
        Ok(true)
    }

    /// Charges an "unknown" answer for `(s, a)` once the true outcome `next`
    /// is known, before it is learned from.
    ///
    /// A no-op outcome is charged to the action's failure tally. Otherwise
    /// every live key of `a` that either had no matching prediction or
    /// matched one with the wrong effect is charged: those are exactly the
    /// keys the following [`Doormax::add_experience`] makes progress on.
    /// Returns `false` when nothing could be charged.
    pub fn charge_unknown(
        &mut self,
        s: &OOState,
        a: Action,
        next: &OOState,
        map: &GridMap,
    ) -> Result<bool, LearnError> {
        if s == next {
            *self.failure_unknowns.entry(a).or_default() += 1;
            return Ok(true);
        }
        let obs = self.condition(s, map)?;
        let mut charged = false;
        for att in Attribute::LEARNED {
            for e in eff_att(s, next, att)? {
                let key = (a, att, e.kind);
                if self.store.is_blacklisted(&key) {
                    continue;
                }
                let mut any = false;
                let mut wrong = false;
                for p in self.store.predictions(&key) {
                    if matches(&obs, &p.model)? {
                        any = true;
                        wrong |= p.effect != e;
                    }
                }
                if !any || wrong {
                    *self.unknown_counts.entry(key).or_default() += 1;
                    charged = true;
                }
            }
        }
        if !charged {
            self.unattributed += 1;
        }
        Ok(charged)
    }

    /// Unknown answers per key; keys never charged are absent.
    pub fn unknown_counts(&self) -> &BTreeMap<Key, u64> {
        &self.unknown_counts
    }

    /// Unknown answers whose true outcome was a failure, per action.
    pub fn failure_unknowns(&self) -> &BTreeMap<Action, u64> {
        &self.failure_unknowns
    }

    /// Unknown answers that could not be pinned on any live key.
    pub fn unattributed_unknowns(&self) -> u64 {
        self.unattributed
    }

    /// Keys whose unknown count exceeds the KWIK bound.
    pub fn kwik_violations(&self) -> Vec<(Key, u64)> {
        let bound = self.kwik_bound();
        self.unknown_counts
            .iter()
            .filter(|&(_, &n)| n > bound)
            .map(|(&k, &n)| (k, n))
            .collect()
    }

    pub fn dump(&self) -> ModelDump {
        let keys = self
            .store
            .keys()
            .map(|key| KeyDump {
                action: key.0,
                attribute: key.1.name().to_owned(),
                kind: key.2,
                predictions: self
                    .store
                    .predictions(&key)
                    .iter()
                    .map(|p| PredictionDump {
                        model: p.model,
                        effect: EffectDump {
                            kind: p.effect.kind,
                            operand: p.effect.operand,
                        },
                    })
                    .collect(),
                blacklisted: self.store.is_blacklisted(&key),
            })
            .collect();
        let failures = self
            .failures
            .by_action
            .iter()
            .filter(|(_, set)| !set.is_empty())
            .map(|(a, set)| {
                let mut v: Vec<String> = set.iter().map(ToString::to_string).collect();
                v.sort();
                (a.name().to_owned(), v)
            })
            .collect();
        ModelDump {
            schema: self.schema.terms().iter().map(ToString::to_string).collect(),
            k: self.store.k,
            keys,
            failures,
        }
    }

    pub fn from_dump(dump: &ModelDump) -> Result<Self, LearnError> {
        let bad = |m: String| LearnError::BadDump(m);
        let terms = dump
            .schema
            .iter()
            .map(|t| t.parse())
            .collect::<Result<Vec<_>, _>>()?;
        let mut learner = Self::new(TermSchema::new(terms)?, dump.k)?;
        let n = learner.schema.len();
        for kd in &dump.keys {
            let att: Attribute = kd.attribute.parse().map_err(bad)?;
            let key = (kd.action, att, kd.kind);
            if kd.blacklisted {
                learner.store.remove(key);
                continue;
            }
            let mut preds = Vec::new();
            for p in &kd.predictions {
                if p.model.len() != n {
                    return Err(bad(format!("model {} has the wrong length", p.model)));
                }
                if p.effect.kind != kd.kind {
                    return Err(bad(format!("effect type mismatch under {}", kd.attribute)));
                }
                preds.push(Prediction {
                    model: p.model,
                    effect: Effect {
                        attribute: att,
                        kind: p.effect.kind,
                        operand: p.effect.operand,
                    },
                });
            }
            if preds.len() > dump.k {
                return Err(bad(format!("more than k predictions under {}", kd.attribute)));
            }
            learner.store.pred.insert(key, preds);
        }
        for (name, conds) in &dump.failures {
            let a: Action = name.parse().map_err(bad)?;
            for c in conds {
                let c: Condition = c.parse()?;
                if c.len() != n || !c.is_ground() {
                    return Err(bad(format!("failure condition {c} is malformed")));
                }
                learner.failures.record(a, c);
            }
        }
        Ok(learner)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.dump()).expect("model dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let dump: ModelDump = serde_json::from_str(text).map_err(|e| LearnError::BadDump(e.to_string()))?;
        Self::from_dump(&dump)
    }
}

/// Serialized form of the learned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub schema: Vec<String>,
    pub k: usize,
    pub keys: Vec<KeyDump>,
    pub failures: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyDump {
    pub action: Action,
    pub attribute: String,
    #[serde(rename = "type")]
    pub kind: EffectType,
    pub predictions: Vec<PredictionDump>,
    pub blacklisted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDump {
    pub model: Condition,
    pub effect: EffectDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDump {
    #[serde(rename = "type")]
    pub kind: EffectType,
    pub operand: Value,
}
