use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A value a fluent instance can hold: a boolean or a data object.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Object(String),
}

impl Value {
    pub fn object(name: impl Into<String>) -> Self {
        Value::Object(name.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Object(o) => f.write_str(o),
        }
    }
}

/// A ground fluent instance such as `at(rbt1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundFluent {
    pub fluent: String,
    pub args: Vec<String>,
}

impl GroundFluent {
    pub fn new<S: Into<String>>(fluent: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        GroundFluent {
            fluent: fluent.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for GroundFluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.fluent, self.args.join(", "))
    }
}

impl FromStr for GroundFluent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| format!("missing '(' in {s:?}"))?;
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| format!("missing ')' in {s:?}"))?;
        let args = inner
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect();
        Ok(GroundFluent {
            fluent: s[..open].trim().to_string(),
            args,
        })
    }
}

/// A ground assignment `f(args) := value`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAssignment {
    pub fluent: String,
    pub args: Vec<String>,
    pub value: Value,
}

impl GroundAssignment {
    pub fn new(target: GroundFluent, value: Value) -> Self {
        GroundAssignment {
            fluent: target.fluent,
            args: target.args,
            value,
        }
    }

    pub fn target(&self) -> GroundFluent {
        GroundFluent {
            fluent: self.fluent.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for GroundAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) := {}", self.fluent, self.args.join(", "), self.value)
    }
}

/// Total assignment of ground fluent instances to values.
///
/// Two realities are equal iff every entry is equal. Serialized as a JSON
/// object keyed by the printed instance, which keeps keys sorted and stable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Reality {
    entries: BTreeMap<GroundFluent, Value>,
}

impl Reality {
    pub fn new() -> Self {
        Reality::default()
    }

    pub fn get(&self, instance: &GroundFluent) -> Option<&Value> {
        self.entries.get(instance)
    }

    pub fn set(&mut self, instance: GroundFluent, value: Value) -> Option<Value> {
        self.entries.insert(instance, value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundFluent, &Value)> {
        self.entries.iter()
    }

    /// Instances whose values differ between `self` and `other`, in sorted order.
    /// Instances present in only one of the two also count as differing.
    pub fn diff(&self, other: &Reality) -> Vec<GroundFluent> {
        let mut out: Vec<GroundFluent> = self
            .entries
            .iter()
            .filter(|(k, v)| other.entries.get(*k) != Some(*v))
            .map(|(k, _)| k.clone())
            .collect();
        out.extend(
            other
                .entries
                .keys()
                .filter(|k| !self.entries.contains_key(*k))
                .cloned(),
        );
        out.sort();
        out
    }
}

impl FromIterator<(GroundFluent, Value)> for Reality {
    fn from_iter<T: IntoIterator<Item = (GroundFluent, Value)>>(iter: T) -> Self {
        Reality {
            entries: iter.into_iter().collect(),
        }
    }
}

impl Serialize for Reality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &Value> =
            self.entries.iter().map(|(k, v)| (k.to_string(), v)).collect();
        keyed.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Reality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let keyed = BTreeMap::<String, Value>::deserialize(deserializer)?;
        keyed
            .into_iter()
            .map(|(k, v)| Ok((k.parse().map_err(D::Error::custom)?, v)))
            .collect()
    }
}
