//! Stores map objects to their field valuations. Uninitialized fields and
//! map entries read as zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map as JsonMap, Value};

use crate::lang::{CodeContext, FieldName, ObjectId, ObjectName};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldVal {
    Scalar(i64),
    Map(BTreeMap<i64, i64>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectState(pub BTreeMap<FieldName, FieldVal>);

impl ObjectState {
    pub fn read(&self, field: &FieldName, key: Option<i64>) -> i64 {
        match (self.0.get(field), key) {
            (None, _) => 0,
            (Some(FieldVal::Scalar(v)), None) => *v,
            (Some(FieldVal::Map(m)), Some(k)) => m.get(&k).copied().unwrap_or(0),
            // Shape mismatches are prevented by parsing and validation.
            _ => 0,
        }
    }

    pub fn write(&mut self, field: &FieldName, key: Option<i64>, val: i64) {
        match key {
            None => {
                self.0.insert(field.clone(), FieldVal::Scalar(val));
            }
            Some(k) => {
                let entry = self
                    .0
                    .entry(field.clone())
                    .or_insert_with(|| FieldVal::Map(BTreeMap::new()));
                if let FieldVal::Map(m) = entry {
                    m.insert(k, val);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Store(pub BTreeMap<ObjectId, ObjectState>);

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonical form for store comparison: unset fields read as zero, so
    /// zero-valued scalars, zero map entries, and empty objects are dropped.
    pub fn normalized(&self) -> Store {
        let mut out = Store::new();
        for (id, state) in &self.0 {
            let mut fields = BTreeMap::new();
            for (fname, val) in &state.0 {
                match val {
                    FieldVal::Scalar(0) => {}
                    FieldVal::Scalar(v) => {
                        fields.insert(fname.clone(), FieldVal::Scalar(*v));
                    }
                    FieldVal::Map(m) => {
                        let kept: BTreeMap<i64, i64> = m
                            .iter()
                            .filter(|(_, v)| **v != 0)
                            .map(|(k, v)| (*k, *v))
                            .collect();
                        if !kept.is_empty() {
                            fields.insert(fname.clone(), FieldVal::Map(kept));
                        }
                    }
                }
            }
            if !fields.is_empty() {
                out.0.insert(*id, ObjectState(fields));
            }
        }
        out
    }

    pub fn read(&self, obj: ObjectId, field: &FieldName, key: Option<i64>) -> i64 {
        self.0.get(&obj).map(|o| o.read(field, key)).unwrap_or(0)
    }

    pub fn write(&mut self, obj: ObjectId, field: &FieldName, key: Option<i64>, val: i64) {
        self.0.entry(obj).or_default().write(field, key, val);
    }

    pub fn object(&self, obj: ObjectId) -> Option<&ObjectState> {
        self.0.get(&obj)
    }

    /// The store restricted to a single object.
    pub fn restrict(&self, obj: ObjectId) -> Store {
        let mut s = Store::new();
        if let Some(os) = self.0.get(&obj) {
            s.0.insert(obj, os.clone());
        }
        s
    }

    /// Sum over all entries of a map field, for invariant checks.
    pub fn map_sum(&self, obj: ObjectId, field: &FieldName) -> i64 {
        match self.0.get(&obj).and_then(|o| o.0.get(field)) {
            Some(FieldVal::Map(m)) => m.values().sum(),
            Some(FieldVal::Scalar(v)) => *v,
            None => 0,
        }
    }

    /// Renders the store with object names, as used in scenario files and
    /// trace headers. Map keys that are interned object ids are still
    /// rendered as integers.
    pub fn to_json(&self, ctx: &CodeContext) -> Value {
        let mut objects = JsonMap::new();
        for (id, state) in &self.0 {
            let name = ctx
                .name_of(*id)
                .map(|n| n.0.clone())
                .unwrap_or_else(|| format!("#{}", id.0));
            let mut fields = JsonMap::new();
            for (fname, val) in &state.0 {
                let v = match val {
                    FieldVal::Scalar(n) => Value::from(*n),
                    FieldVal::Map(m) => {
                        let mut entries = JsonMap::new();
                        for (k, v) in m {
                            entries.insert(k.to_string(), Value::from(*v));
                        }
                        Value::Object(entries)
                    }
                };
                fields.insert(fname.0.clone(), v);
            }
            objects.insert(name, Value::Object(fields));
        }
        Value::Object(objects)
    }

    /// Parses the scenario-file store form. Object names must exist in the
    /// context; map keys may be integers or contract names.
    pub fn from_json(value: &Value, ctx: &CodeContext) -> Result<Store, String> {
        let mut store = Store::new();
        let objects = value
            .as_object()
            .ok_or_else(|| "store must be an object".to_string())?;
        for (name, fields) in objects {
            let id = ctx
                .id_of(&ObjectName(name.clone()))
                .ok_or_else(|| format!("store names unknown contract `{name}`"))?;
            let fields = fields
                .as_object()
                .ok_or_else(|| format!("store entry `{name}` must be an object"))?;
            let contract = ctx.get(id).expect("id resolved above");
            for (fname, fval) in fields {
                let field = FieldName(fname.clone());
                let decl = contract
                    .field(&field)
                    .ok_or_else(|| format!("`{name}` has no field `{fname}`"))?;
                match fval {
                    Value::Number(n) if !decl.is_map => {
                        let v = n
                            .as_i64()
                            .ok_or_else(|| format!("field `{fname}`: non-integer value"))?;
                        store.write(id, &field, None, v);
                    }
                    Value::Object(entries) if decl.is_map => {
                        for (k, v) in entries {
                            let key = parse_key(k, ctx)?;
                            let v = v
                                .as_i64()
                                .ok_or_else(|| format!("field `{fname}`: non-integer value"))?;
                            store.write(id, &field, Some(key), v);
                        }
                    }
                    _ => {
                        return Err(format!(
                            "field `{fname}` of `{name}`: value shape does not match declaration"
                        ))
                    }
                }
            }
        }
        Ok(store)
    }
}

fn parse_key(k: &str, ctx: &CodeContext) -> Result<i64, String> {
    if let Ok(n) = k.parse::<i64>() {
        return Ok(n);
    }
    ctx.id_of(&ObjectName(k.to_string()))
        .map(|id| id.as_value())
        .ok_or_else(|| format!("map key `{k}` is neither an integer nor a contract name"))
}
