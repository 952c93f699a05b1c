//! Join-semilattice value algebra for merging agent outputs without
//! coordination.
//!
//! Five kinds are inflationary semilattices (`SetUnion`, `MaxRegister`,
//! `MinRegister`, `MapOfJoins` over a semilattice inner kind, `GrowCounter`).
//! `CausalAppend` joins as a union of causally stamped entries, so the join
//! itself is well defined but the concatenation order is only meaningful when
//! the stamps come from causal delivery. `ExclusiveAssign` is not a
//! semilattice and every attempt to join it is an error.
//!
//! These kinds are modelling stand-ins for agent outputs; nothing here claims
//! they describe how any particular generated artifact would merge.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rational::{self, Rational};

/// Deepest `MapOfJoins` nesting accepted by validation.
pub const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinKind {
    SetUnion,
    MaxRegister,
    MinRegister,
    MapOfJoins(Box<JoinKind>),
    GrowCounter,
    CausalAppend,
    ExclusiveAssign,
}

impl JoinKind {
    pub fn map_of(inner: JoinKind) -> Self {
        JoinKind::MapOfJoins(Box::new(inner))
    }

    /// True when `join` is defined for every pair of values of this kind.
    pub fn is_semilattice(&self) -> bool {
        match self {
            JoinKind::ExclusiveAssign => false,
            JoinKind::MapOfJoins(inner) => inner.is_semilattice(),
            _ => true,
        }
    }

    /// True when the kind (or a nested kind) is a causally stamped sequence.
    pub fn is_order_sensitive(&self) -> bool {
        match self {
            JoinKind::CausalAppend => true,
            JoinKind::MapOfJoins(inner) => inner.is_order_sensitive(),
            _ => false,
        }
    }

    /// Nesting depth: 1 for scalar kinds, 1 + inner depth for maps.
    pub fn depth(&self) -> usize {
        match self {
            JoinKind::MapOfJoins(inner) => 1 + inner.depth(),
            _ => 1,
        }
    }

    /// Least element of the kind, where one exists.
    pub fn bottom(&self) -> Option<LatticeValue> {
        match self {
            JoinKind::SetUnion => Some(LatticeValue::SetUnion(BTreeSet::new())),
            JoinKind::MapOfJoins(inner) => Some(LatticeValue::MapOfJoins {
                inner: (**inner).clone(),
                entries: BTreeMap::new(),
            }),
            JoinKind::GrowCounter => Some(LatticeValue::GrowCounter(0)),
            JoinKind::CausalAppend => Some(LatticeValue::CausalAppend(BTreeSet::new())),
            JoinKind::MaxRegister | JoinKind::MinRegister | JoinKind::ExclusiveAssign => None,
        }
    }
}

impl fmt::Display for JoinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JoinKind::SetUnion => f.write_str("set_union"),
            JoinKind::MaxRegister => f.write_str("max_register"),
            JoinKind::MinRegister => f.write_str("min_register"),
            JoinKind::MapOfJoins(inner) => write!(f, "map_of_joins({inner})"),
            JoinKind::GrowCounter => f.write_str("grow_counter"),
            JoinKind::CausalAppend => f.write_str("causal_append"),
            JoinKind::ExclusiveAssign => f.write_str("exclusive_assign"),
        }
    }
}

/// One element of a causally stamped sequence. Entries order by stamp, then
/// origin, then item, which is the concatenation order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampedEntry {
    pub stamp: u64,
    pub origin: String,
    pub item: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LatticeValue {
    SetUnion(BTreeSet<String>),
    MaxRegister(Rational),
    MinRegister(Rational),
    MapOfJoins {
        inner: JoinKind,
        entries: BTreeMap<String, LatticeValue>,
    },
    GrowCounter(u64),
    CausalAppend(BTreeSet<StampedEntry>),
    ExclusiveAssign(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("kind mismatch: cannot combine {left} with {right}")]
    KindMismatch { left: JoinKind, right: JoinKind },
    #[error("{0} is not a join-semilattice")]
    NotASemilattice(JoinKind),
    #[error("merge_all requires at least one value")]
    EmptyInput,
    #[error("map entry '{key}' has kind {found}, expected {expected}")]
    InnerKindMismatch {
        key: String,
        expected: JoinKind,
        found: JoinKind,
    },
    #[error("nesting depth {0} exceeds the limit of {MAX_DEPTH}")]
    DepthExceeded(usize),
}

impl LatticeValue {
    pub fn set<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LatticeValue::SetUnion(items.into_iter().map(Into::into).collect())
    }

    pub fn kind(&self) -> JoinKind {
        match self {
            LatticeValue::SetUnion(_) => JoinKind::SetUnion,
            LatticeValue::MaxRegister(_) => JoinKind::MaxRegister,
            LatticeValue::MinRegister(_) => JoinKind::MinRegister,
            LatticeValue::MapOfJoins { inner, .. } => JoinKind::map_of(inner.clone()),
            LatticeValue::GrowCounter(_) => JoinKind::GrowCounter,
            LatticeValue::CausalAppend(_) => JoinKind::CausalAppend,
            LatticeValue::ExclusiveAssign(_) => JoinKind::ExclusiveAssign,
        }
    }

    /// Checks that nested map entries carry the declared inner kind and that
    /// nesting stays within [`MAX_DEPTH`].
    pub fn check(&self) -> Result<(), LatticeError> {
        let depth = self.kind().depth();
        if depth > MAX_DEPTH {
            return Err(LatticeError::DepthExceeded(depth));
        }
        if let LatticeValue::MapOfJoins { inner, entries } = self {
            for (key, value) in entries {
                let found = value.kind();
                if &found != inner {
                    return Err(LatticeError::InnerKindMismatch {
                        key: key.clone(),
                        expected: inner.clone(),
                        found,
                    });
                }
                value.check()?;
            }
        }
        Ok(())
    }

    /// Least upper bound of `self` and `other`.
    pub fn join(&self, other: &LatticeValue) -> Result<LatticeValue, LatticeError> {
        let (left, right) = (self.kind(), other.kind());
        if left != right {
            return Err(LatticeError::KindMismatch { left, right });
        }
        if !left.is_semilattice() {
            return Err(LatticeError::NotASemilattice(left));
        }
        Ok(match (self, other) {
            (LatticeValue::SetUnion(a), LatticeValue::SetUnion(b)) => {
                LatticeValue::SetUnion(a.union(b).cloned().collect())
            }
            (LatticeValue::MaxRegister(a), LatticeValue::MaxRegister(b)) => {
                LatticeValue::MaxRegister(*a.max(b))
            }
            (LatticeValue::MinRegister(a), LatticeValue::MinRegister(b)) => {
                LatticeValue::MinRegister(*a.min(b))
            }
            (LatticeValue::GrowCounter(a), LatticeValue::GrowCounter(b)) => {
                LatticeValue::GrowCounter(*a.max(b))
            }
            (LatticeValue::CausalAppend(a), LatticeValue::CausalAppend(b)) => {
                LatticeValue::CausalAppend(a.union(b).cloned().collect())
            }
            (
                LatticeValue::MapOfJoins { inner, entries: a },
                LatticeValue::MapOfJoins { entries: b, .. },
            ) => {
                let mut entries = a.clone();
                for (key, value) in b {
                    let merged = match entries.get(key) {
                        Some(existing) => existing.join(value)?,
                        None => value.clone(),
                    };
                    entries.insert(key.clone(), merged);
                }
                LatticeValue::MapOfJoins {
                    inner: inner.clone(),
                    entries,
                }
            }
            _ => unreachable!("kinds already checked equal"),
        })
    }

    /// Lattice order: `self ⊑ other` iff `join(self, other) == other`.
    pub fn leq(&self, other: &LatticeValue) -> Result<bool, LatticeError> {
        Ok(&self.join(other)? == other)
    }

    /// Concatenation order of a causally stamped sequence.
    pub fn sequence(&self) -> Option<Vec<&str>> {
        match self {
            LatticeValue::CausalAppend(entries) => {
                Some(entries.iter().map(|e| e.item.as_str()).collect())
            }
            _ => None,
        }
    }
}

/// Folds `join` over a non-empty list of values of one semilattice kind. The
/// result does not depend on the order of `values`.
pub fn merge_all<'a, I>(values: I) -> Result<LatticeValue, LatticeError>
where
    I: IntoIterator<Item = &'a LatticeValue>,
{
    let mut iter = values.into_iter();
    let first = iter.next().ok_or(LatticeError::EmptyInput)?;
    let kind = first.kind();
    if !kind.is_semilattice() {
        return Err(LatticeError::NotASemilattice(kind));
    }
    iter.try_fold(first.clone(), |acc, v| acc.join(v))
}

pub fn join(a: &LatticeValue, b: &LatticeValue) -> Result<LatticeValue, LatticeError> {
    a.join(b)
}

pub fn leq(a: &LatticeValue, b: &LatticeValue) -> Result<bool, LatticeError> {
    a.leq(b)
}

// Wire form: {"kind": <JoinKind>, "payload": <kind-specific>}.

#[derive(Serialize)]
struct WireOut<'a, P: Serialize> {
    kind: JoinKind,
    payload: &'a P,
}

#[derive(Serialize)]
struct RationalOut<'a>(#[serde(serialize_with = "rational::serialize")] &'a Rational);

#[derive(Deserialize)]
struct RationalIn(#[serde(deserialize_with = "rational::deserialize")] Rational);

/// The kind-specific payload alone; nested map entries carry no tag of
/// their own because the map's kind already names them.
struct Payload<'a>(&'a LatticeValue);

impl Serialize for Payload<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            LatticeValue::SetUnion(items) => items.serialize(serializer),
            LatticeValue::MaxRegister(v) | LatticeValue::MinRegister(v) => {
                RationalOut(v).serialize(serializer)
            }
            LatticeValue::MapOfJoins { entries, .. } => {
                serializer.collect_map(entries.iter().map(|(k, v)| (k, Payload(v))))
            }
            LatticeValue::GrowCounter(n) => n.serialize(serializer),
            LatticeValue::CausalAppend(entries) => entries.serialize(serializer),
            LatticeValue::ExclusiveAssign(v) => v.serialize(serializer),
        }
    }
}

impl Serialize for LatticeValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WireOut {
            kind: self.kind(),
            payload: &Payload(self),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatticeValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct WireIn {
            kind: JoinKind,
            payload: serde_json::Value,
        }
        let wire = WireIn::deserialize(deserializer)?;
        let value = from_payload(&wire.kind, wire.payload).map_err(D::Error::custom)?;
        value.check().map_err(D::Error::custom)?;
        Ok(value)
    }
}

fn from_payload(kind: &JoinKind, payload: serde_json::Value) -> Result<LatticeValue, String> {
    let err = |e: serde_json::Error| format!("invalid {kind} payload: {e}");
    Ok(match kind {
        JoinKind::SetUnion => LatticeValue::SetUnion(serde_json::from_value(payload).map_err(err)?),
        JoinKind::MaxRegister => {
            LatticeValue::MaxRegister(serde_json::from_value::<RationalIn>(payload).map_err(err)?.0)
        }
        JoinKind::MinRegister => {
            LatticeValue::MinRegister(serde_json::from_value::<RationalIn>(payload).map_err(err)?.0)
        }
        JoinKind::GrowCounter => {
            LatticeValue::GrowCounter(serde_json::from_value(payload).map_err(err)?)
        }
        JoinKind::CausalAppend => {
            LatticeValue::CausalAppend(serde_json::from_value(payload).map_err(err)?)
        }
        JoinKind::ExclusiveAssign => {
            LatticeValue::ExclusiveAssign(serde_json::from_value(payload).map_err(err)?)
        }
        JoinKind::MapOfJoins(inner) => {
            let raw: BTreeMap<String, serde_json::Value> =
                serde_json::from_value(payload).map_err(err)?;
            let mut entries = BTreeMap::new();
            for (key, value) in raw {
                entries.insert(key, from_payload(inner, value)?);
            }
            LatticeValue::MapOfJoins {
                inner: (**inner).clone(),
                entries,
            }
        }
    })
}
