//! Object-oriented state, attributes, effects and relational term evaluation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{Condition, Term, TermSchema};
use crate::domain::{Cell, Direction, GridMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("schema term {0} cannot be evaluated in the warehouse domain")]
    UnsupportedTerm(String),
    #[error("attribute {0} is absent from the state")]
    MissingAttribute(Attribute),
    #[error("effect {effect} cannot be applied to value {value}")]
    KindMismatch { effect: Effect, value: Value },
    #[error("incompatible effects on {attribute}: {first} vs {second}")]
    Incompatible {
        attribute: Attribute,
        first: Value,
        second: Value,
    },
    #[error("map has no box spawn with index {0}")]
    NoSuchBox(usize),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Coordinate,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributeDecl {
    pub name: &'static str,
    pub kind: AttributeKind,
}

/// An object class and the attributes its instances carry.
#[derive(Debug, PartialEq, Eq)]
pub struct ObjectClass {
    pub name: &'static str,
    pub attributes: &'static [AttributeDecl],
}

const XY: [AttributeDecl; 2] = [
    AttributeDecl {
        name: "x",
        kind: AttributeKind::Coordinate,
    },
    AttributeDecl {
        name: "y",
        kind: AttributeKind::Coordinate,
    },
];

pub static AGENT: ObjectClass = ObjectClass {
    name: "agent",
    attributes: &XY,
};

pub static BOX: ObjectClass = ObjectClass {
    name: "box",
    attributes: &[
        XY[0],
        XY[1],
        AttributeDecl {
            name: "in_bot",
            kind: AttributeKind::Boolean,
        },
    ],
};

pub static WALL: ObjectClass = ObjectClass {
    name: "wall",
    attributes: &XY,
};

pub static DESTINATION: ObjectClass = ObjectClass {
    name: "destination",
    attributes: &XY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
        }
    }
}

/// Generic view of one object, mostly for inspection and dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: String,
    pub class: &'static ObjectClass,
    pub values: BTreeMap<&'static str, Value>,
}

/// The attributes the transition learner models. Box coordinates follow the
/// agent while carried and are never learned on their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    AgentX,
    AgentY,
    BoxInBot,
}

impl Attribute {
    pub const LEARNED: [Attribute; 3] = [Attribute::AgentX, Attribute::AgentY, Attribute::BoxInBot];

    pub fn kind(self) -> AttributeKind {
        match self {
            Attribute::AgentX | Attribute::AgentY => AttributeKind::Coordinate,
            Attribute::BoxInBot => AttributeKind::Boolean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::AgentX => "agent.x",
            Attribute::AgentY => "agent.y",
            Attribute::BoxInBot => "box.in_bot",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::LEARNED
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown attribute {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectType {
    Assignment,
    Increment,
}

impl EffectType {
    pub fn name(self) -> &'static str {
        match self {
            EffectType::Assignment => "assignment",
            EffectType::Increment => "increment",
        }
    }
}

impl fmt::Display for EffectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A typed change to one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Effect {
    pub attribute: Attribute,
    pub kind: EffectType,
    pub operand: Value,
}

impl Effect {
    pub fn assign(attribute: Attribute, operand: Value) -> Self {
        Self {
            attribute,
            kind: EffectType::Assignment,
            operand,
        }
    }

    pub fn increment(attribute: Attribute, delta: i64) -> Self {
        Self {
            attribute,
            kind: EffectType::Increment,
            operand: Value::Int(delta),
        }
    }

    /// Value of the attribute after the effect, given its current value.
    pub fn apply_to(&self, current: Value) -> Result<Value, ModelError> {
        let mismatch = || ModelError::KindMismatch {
            effect: *self,
            value: current,
        };
        match (self.kind, current, self.operand) {
            (EffectType::Assignment, Value::Int(_), Value::Int(v)) => Ok(Value::Int(v)),
            (EffectType::Assignment, Value::Bool(_), Value::Bool(v)) => Ok(Value::Bool(v)),
            (EffectType::Increment, Value::Int(v), Value::Int(d)) => Ok(Value::Int(v + d)),
            _ => Err(mismatch()),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.operand) {
            (EffectType::Increment, Value::Int(d)) => write!(f, "{}+={d}", self.attribute),
            _ => write!(f, "{}:={}", self.attribute, self.operand),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxObject {
    pub id: u32,
    pub x: i32,
    pub y: i32,
    pub in_bot: bool,
}

impl BoxObject {
    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

/// Agent pose, boxes, destination and which box the task is about.
///
/// Walls live in the [`GridMap`]; they never change.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OOState {
    pub agent: Cell,
    pub boxes: Vec<BoxObject>,
    pub destination: Cell,
    pub target_box: u32,
}

impl OOState {
    /// Start-of-episode state: agent at its start cell, every box resting on
    /// its spawn, box `target` selected for delivery.
    pub fn initial(map: &GridMap, target: usize) -> Result<Self, ModelError> {
        if target >= map.box_spawns().len() {
            return Err(ModelError::NoSuchBox(target));
        }
        Ok(Self {
            agent: map.agent_start(),
            boxes: map
                .box_spawns()
                .iter()
                .enumerate()
                .map(|(i, c)| BoxObject {
                    id: i as u32,
                    x: c.x,
                    y: c.y,
                    in_bot: false,
                })
                .collect(),
            destination: map.destination(),
            target_box: target as u32,
        })
    }

    pub fn target(&self) -> Option<&BoxObject> {
        self.boxes.iter().find(|b| b.id == self.target_box)
    }

    pub fn target_mut(&mut self) -> Option<&mut BoxObject> {
        let id = self.target_box;
        self.boxes.iter_mut().find(|b| b.id == id)
    }

    pub fn carrying(&self) -> bool {
        self.boxes.iter().any(|b| b.in_bot)
    }

    pub fn get(&self, att: Attribute) -> Result<Value, ModelError> {
        match att {
            Attribute::AgentX => Ok(Value::Int(self.agent.x as i64)),
            Attribute::AgentY => Ok(Value::Int(self.agent.y as i64)),
            Attribute::BoxInBot => self
                .target()
                .map(|b| Value::Bool(b.in_bot))
                .ok_or(ModelError::MissingAttribute(att)),
        }
    }

    fn set(&mut self, att: Attribute, v: Value) -> Result<(), ModelError> {
        match (att, v) {
            (Attribute::AgentX, Value::Int(x)) => self.agent.x = x as i32,
            (Attribute::AgentY, Value::Int(y)) => self.agent.y = y as i32,
            (Attribute::BoxInBot, Value::Bool(b)) => {
                self.target_mut()
                    .ok_or(ModelError::MissingAttribute(att))?
                    .in_bot = b
            }
            _ => {
                return Err(ModelError::InvalidState(format!(
                    "value {v} does not fit attribute {att}"
                )))
            }
        }
        Ok(())
    }

    /// Checks the structural invariants against a map.
    pub fn validate(&self, map: &GridMap) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidState(m));
        if map.is_blocked(self.agent) {
            return bad(format!("agent at blocked cell {}", self.agent));
        }
        if self.target().is_none() && !self.boxes.is_empty() {
            return bad(format!("target box {} does not exist", self.target_box));
        }
        let carried: Vec<_> = self.boxes.iter().filter(|b| b.in_bot).collect();
        if carried.len() > 1 {
            return bad("more than one box carried".into());
        }
        if let Some(b) = carried.first() {
            if b.cell() != self.agent {
                return bad(format!("carried box {} is not with the agent", b.id));
            }
        }
        Ok(())
    }

    /// Every object of the state, walls included, as generic instances.
    pub fn objects(&self, map: &GridMap) -> Vec<ObjectInstance> {
        let xy = |c: Cell| BTreeMap::from([("x", Value::Int(c.x as i64)), ("y", Value::Int(c.y as i64))]);
        let mut out = vec![ObjectInstance {
            id: "agent".into(),
            class: &AGENT,
            values: xy(self.agent),
        }];
        for b in &self.boxes {
            let mut values = xy(b.cell());
            values.insert("in_bot", Value::Bool(b.in_bot));
            out.push(ObjectInstance {
                id: format!("box{}", b.id),
                class: &BOX,
                values,
            });
        }
        out.push(ObjectInstance {
            id: "destination".into(),
            class: &DESTINATION,
            values: xy(self.destination),
        });
        out.extend(map.walls().iter().map(|&w| ObjectInstance {
            id: format!("wall{}_{}", w.x, w.y),
            class: &WALL,
            values: xy(w),
        }));
        out
    }
}

fn eval_term(term: &Term, s: &OOState, map: &GridMap) -> Result<bool, ModelError> {
    let unsupported = || ModelError::UnsupportedTerm(term.to_string());
    match term {
        Term::Relation { name, args } => {
            if args[0] != AGENT.name {
                return Err(unsupported());
            }
            let dir = match name.as_str() {
                "touch_N" => Some(Direction::North),
                "touch_S" => Some(Direction::South),
                "touch_E" => Some(Direction::East),
                "touch_W" => Some(Direction::West),
                "on" => None,
                _ => return Err(unsupported()),
            };
            match (dir, args[1].as_str()) {
                (Some(d), "wall") => Ok(map.is_blocked(s.agent.offset(d))),
                // a carried box is in the bot, not under it
                (None, "box") => Ok(s.target().is_some_and(|b| !b.in_bot && b.cell() == s.agent)),
                (None, "destination") => Ok(s.agent == s.destination),
                _ => Err(unsupported()),
            }
        }
        Term::Predicate { class, attribute } if class == BOX.name && attribute == "in_bot" => {
            Ok(s.target().is_some_and(|b| b.in_bot))
        }
        Term::Predicate { .. } => Err(unsupported()),
    }
}

/// `cond(s)`: the ground condition of a state under a schema.
pub fn cond_of_state(s: &OOState, map: &GridMap, schema: &TermSchema) -> Result<Condition, ModelError> {
    let truth = schema
        .terms()
        .iter()
        .map(|t| eval_term(t, s, map))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Condition::from_bools(&truth))
}

/// One effect of each type that turns `att` in `s` into its value in `next`.
/// Identity effects are included.
pub fn eff_att(s: &OOState, next: &OOState, att: Attribute) -> Result<Vec<Effect>, ModelError> {
    let before = s.get(att)?;
    let after = next.get(att)?;
    Ok(match (before, after) {
        (Value::Int(a), Value::Int(b)) => vec![Effect::assign(att, after), Effect::increment(att, b - a)],
        (Value::Bool(_), Value::Bool(_)) => vec![Effect::assign(att, after)],
        _ => {
            return Err(ModelError::InvalidState(format!(
                "attribute {att} changed kind between states"
            )))
        }
    })
}

/// True when both effects can be applied together to `s`.
pub fn effects_compatible(e1: &Effect, e2: &Effect, s: &OOState) -> bool {
    if e1.attribute != e2.attribute {
        return true;
    }
    let Ok(current) = s.get(e1.attribute) else {
        return false;
    };
    match (e1.apply_to(current), e2.apply_to(current)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Applies a conflict-free effect set, returning a new state. A carried box
/// is moved along with the agent.
pub fn apply_effects(s: &OOState, effects: &[Effect]) -> Result<OOState, ModelError> {
    let mut resolved: BTreeMap<Attribute, Value> = BTreeMap::new();
    for e in effects {
        let v = e.apply_to(s.get(e.attribute)?)?;
        if let Some(&prev) = resolved.get(&e.attribute) {
            if prev != v {
                return Err(ModelError::Incompatible {
                    attribute: e.attribute,
                    first: prev,
                    second: v,
                });
            }
        }
        resolved.insert(e.attribute, v);
    }
    let mut next = s.clone();
    for (att, v) in resolved {
        next.set(att, v)?;
    }
    let agent = next.agent;
    for b in next.boxes.iter_mut().filter(|b| b.in_bot) {
        b.x = agent.x;
        b.y = agent.y;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{step, Action, Rewards};
    use crate::io::parse_map;
    use proptest::prelude::*;

    /// 5x5 map where cell (2,4) has the north edge above it and a wall to
    /// the west.
    const EXAMPLE: &str = "\
.#...
.....
..B..
.....
A...D
";

    #[test]
    fn carrying_under_the_north_edge_beside_a_wall() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(2, 4);
        let b = s.target_mut().unwrap();
        b.in_bot = true;
        b.x = 2;
        b.y = 4;
        s.validate(&map).unwrap();
        let c = cond_of_state(&s, &map, &TermSchema::warehouse()).unwrap();
        assert_eq!(c.to_string(), "1001001");
    }

    #[test]
    fn open_interior_is_all_false() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(3, 1);
        let c = cond_of_state(&s, &map, &TermSchema::warehouse()).unwrap();
        assert_eq!(c.to_string(), "0000000");
    }

    #[test]
    fn standing_on_the_box() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(2, 2);
        // brute-force oracle: evaluate each relation directly on the map
        let expect: String = [
            map.is_blocked(Cell::new(2, 3)),
            map.is_blocked(Cell::new(2, 1)),
            map.is_blocked(Cell::new(3, 2)),
            map.is_blocked(Cell::new(1, 2)),
            true,
            false,
            false,
        ]
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
        let c = cond_of_state(&s, &map, &TermSchema::warehouse()).unwrap();
        assert_eq!(c.to_string(), expect);
        assert_eq!(expect, "0000100");
    }

    #[test]
    fn unsupported_terms_are_rejected() {
        let map = parse_map(EXAMPLE).unwrap();
        let s = OOState::initial(&map, 0).unwrap();
        let schema = TermSchema::new(vec![Term::relation("near", "agent", "wall")]).unwrap();
        assert!(matches!(
            cond_of_state(&s, &map, &schema),
            Err(ModelError::UnsupportedTerm(_))
        ));
    }

    #[test]
    fn eff_att_examples() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(2, 4);
        let mut n = s.clone();
        n.agent.x = 3;
        assert_eq!(
            eff_att(&s, &n, Attribute::AgentX).unwrap(),
            vec![Effect::assign(Attribute::AgentX, Value::Int(3)), Effect::increment(Attribute::AgentX, 1)]
        );
        assert_eq!(
            eff_att(&s, &n, Attribute::AgentY).unwrap(),
            vec![Effect::assign(Attribute::AgentY, Value::Int(4)), Effect::increment(Attribute::AgentY, 0)]
        );
        n.target_mut().unwrap().in_bot = true;
        assert_eq!(
            eff_att(&s, &n, Attribute::BoxInBot).unwrap(),
            vec![Effect::assign(Attribute::BoxInBot, Value::Bool(true))]
        );
        let mut empty = s.clone();
        empty.boxes.clear();
        assert!(matches!(
            eff_att(&s, &empty, Attribute::BoxInBot),
            Err(ModelError::MissingAttribute(_))
        ));
    }

    #[test]
    fn apply_effects_examples() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(1, 1);
        assert_eq!(apply_effects(&s, &[]).unwrap(), s);
        let n = apply_effects(&s, &[Effect::increment(Attribute::AgentX, 1)]).unwrap();
        assert_eq!(n.agent, Cell::new(2, 1));
        let both = [
            Effect::assign(Attribute::AgentX, Value::Int(2)),
            Effect::increment(Attribute::AgentX, 1),
        ];
        assert_eq!(apply_effects(&s, &both).unwrap().agent, Cell::new(2, 1));
        let clash = [
            Effect::assign(Attribute::AgentX, Value::Int(3)),
            Effect::increment(Attribute::AgentX, 1),
        ];
        assert!(matches!(apply_effects(&s, &clash), Err(ModelError::Incompatible { .. })));
    }

    #[test]
    fn carried_box_follows_agent() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(2, 2);
        let s = apply_effects(&s, &[Effect::assign(Attribute::BoxInBot, Value::Bool(true))]).unwrap();
        let n = apply_effects(&s, &[Effect::increment(Attribute::AgentY, -1)]).unwrap();
        assert_eq!(n.target().unwrap().cell(), Cell::new(2, 1));
    }

    #[test]
    fn compatibility_examples() {
        let map = parse_map(EXAMPLE).unwrap();
        let mut s = OOState::initial(&map, 0).unwrap();
        s.agent = Cell::new(2, 0);
        let x3 = Effect::assign(Attribute::AgentX, Value::Int(3));
        assert!(effects_compatible(&x3, &Effect::increment(Attribute::AgentX, 1), &s));
        assert!(!effects_compatible(&x3, &Effect::increment(Attribute::AgentX, -1), &s));
        assert!(effects_compatible(&x3, &Effect::increment(Attribute::AgentY, 5), &s));
    }

    #[test]
    fn objects_view_matches_class_table() {
        let map = parse_map(EXAMPLE).unwrap();
        let s = OOState::initial(&map, 0).unwrap();
        let objs = s.objects(&map);
        for o in &objs {
            let declared: Vec<_> = o.class.attributes.iter().map(|a| a.name).collect();
            let present: Vec<_> = o.values.keys().copied().collect();
            let mut declared_sorted = declared.clone();
            declared_sorted.sort();
            assert_eq!(present, declared_sorted, "{}", o.id);
        }
        assert_eq!(objs.iter().filter(|o| o.class == &AGENT).count(), 1);
        assert_eq!(objs.iter().filter(|o| o.class == &WALL).count(), 1);
    }

    #[test]
    fn json_shape() {
        let map = parse_map("AB.D\n").unwrap();
        let s = OOState::initial(&map, 0).unwrap();
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"agent":{"x":0,"y":0},"boxes":[{"id":0,"x":1,"y":0,"in_bot":false}],"destination":{"x":3,"y":0},"target_box":0}"#
        );
    }

    proptest! {
        /// Effects extracted from a simulator transition reproduce it.
        #[test]
        fn effects_round_trip(cell in 0usize..25, carry in any::<bool>(), ai in 0usize..6) {
            let map = parse_map(EXAMPLE).unwrap();
            let free: Vec<Cell> = map.free_cells().collect();
            let mut s = OOState::initial(&map, 0).unwrap();
            s.agent = free[cell % free.len()];
            if carry {
                let agent = s.agent;
                let b = s.target_mut().unwrap();
                b.in_bot = true;
                b.x = agent.x;
                b.y = agent.y;
            }
            let before = s.clone();
            let (next, _) = step(&s, Action::ALL[ai], &map, &Rewards::default());
            let mut effects = Vec::new();
            for att in Attribute::LEARNED {
                if s.get(att).unwrap() != next.get(att).unwrap() {
                    effects.extend(eff_att(&s, &next, att).unwrap());
                }
            }
            prop_assert_eq!(apply_effects(&s, &effects).unwrap(), next);
            prop_assert_eq!(s, before);
        }
    }
}
