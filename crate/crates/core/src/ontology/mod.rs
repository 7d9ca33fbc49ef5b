//! Domains, slots, value sets and the per-domain synthetic databases.
//!
//! The ontology fixes every dimension downstream: slot order defines graph
//! node indexing and vector layout, and the intent catalogues define the
//! one-hot widths of the act histories.

mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use synth::generate_bundled;

/// Reserved value: the user has no preference.
pub const DONTCARE: &str = "dontcare";
/// Reserved value: the slot has not been specified yet.
pub const NONE: &str = "none";
/// Domain tag carried by domain-less acts.
pub const GENERAL: &str = "general";

const FORMAT_TAG: &str = "structdm-ontology";
const FORMAT_VERSION: u32 = 1;

static BUNDLED_JSON: &str = include_str!("../../data/ontology.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    #[serde(rename = "constraint-find")]
    Find,
    #[serde(rename = "constraint-book")]
    Book,
    #[serde(rename = "requestable")]
    Request,
}

impl SlotKind {
    pub fn is_constraint(self) -> bool {
        matches!(self, SlotKind::Find | SlotKind::Book)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub kind: SlotKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

impl SlotDef {
    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// One database record. Values are keyed by slot name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub values: BTreeMap<String, String>,
}

impl Entity {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(String::as_str)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    pub slots: Vec<SlotDef>,
    pub database: Vec<Entity>,
    /// Per entity, per slot: value index for constraint-find slots.
    #[serde(skip)]
    codes: Vec<Vec<Option<u16>>>,
    #[serde(skip)]
    slot_index: HashMap<String, usize>,
}

impl PartialEq for DomainSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.slots == other.slots && self.database == other.database
    }
}

/// A constraint on one find slot, as an index into that slot's value set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    Dontcare,
    Value(u16),
}

impl DomainSchema {
    pub fn new(name: impl Into<String>, slots: Vec<SlotDef>, database: Vec<Entity>) -> Self {
        DomainSchema {
            name: name.into(),
            slots,
            database,
            codes: Vec::new(),
            slot_index: HashMap::new(),
        }
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slot_index.get(name).copied()
    }

    pub fn slot(&self, name: &str) -> Result<&SlotDef> {
        self.slot_index(name)
            .map(|i| &self.slots[i])
            .ok_or_else(|| Error::UnknownSlot {
                domain: self.name.clone(),
                slot: name.to_string(),
            })
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots_of(&self, kind: SlotKind) -> impl Iterator<Item = (usize, &SlotDef)> {
        self.slots
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.kind == kind)
    }

    pub fn count_of(&self, kind: SlotKind) -> usize {
        self.slots_of(kind).count()
    }

    pub fn has_book_task(&self) -> bool {
        self.count_of(SlotKind::Book) > 0
    }

    /// Entities matching every `(slot index, constraint)` pair, in database order.
    pub fn matching_indices(&self, constraints: &[(usize, Constraint)]) -> Vec<usize> {
        (0..self.database.len())
            .filter(|&e| self.entity_matches(e, constraints))
            .collect()
    }

    pub fn count_matching(&self, constraints: &[(usize, Constraint)]) -> usize {
        (0..self.database.len())
            .filter(|&e| self.entity_matches(e, constraints))
            .count()
    }

    pub fn entity_matches(&self, entity: usize, constraints: &[(usize, Constraint)]) -> bool {
        let codes = &self.codes[entity];
        constraints.iter().all(|&(slot, c)| match c {
            Constraint::Dontcare => true,
            Constraint::Value(v) => codes[slot] == Some(v),
        })
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.database.iter().position(|e| e.name == name)
    }

    fn build_index(&mut self) -> Result<()> {
        if self.name.is_empty() || self.name == GENERAL {
            return Err(Error::Validation(format!(
                "invalid domain name `{}`",
                self.name
            )));
        }
        self.slot_index.clear();
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.name.is_empty() {
                return Err(Error::Validation(format!(
                    "domain `{}` has a slot with an empty name",
                    self.name
                )));
            }
            if self.slot_index.insert(slot.name.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate slot `{}` in domain `{}`",
                    slot.name, self.name
                )));
            }
            if slot.kind.is_constraint() {
                if slot.values.is_empty() {
                    return Err(Error::Validation(format!(
                        "constraint slot `{}.{}` has an empty value set",
                        self.name, slot.name
                    )));
                }
                if slot.values.len() > u16::MAX as usize {
                    return Err(Error::Validation(format!(
                        "slot `{}.{}` has too many values",
                        self.name, slot.name
                    )));
                }
                let mut seen = HashSet::new();
                for v in &slot.values {
                    if v == DONTCARE || v == NONE {
                        return Err(Error::Validation(format!(
                            "slot `{}.{}` lists reserved value `{}`",
                            self.name, slot.name, v
                        )));
                    }
                    if !seen.insert(v.as_str()) {
                        return Err(Error::Validation(format!(
                            "duplicate value `{}` in slot `{}.{}`",
                            v, self.name, slot.name
                        )));
                    }
                }
            } else if !slot.values.is_empty() {
                return Err(Error::Validation(format!(
                    "requestable slot `{}.{}` must not declare a value set",
                    self.name, slot.name
                )));
            }
        }
        if self.database.is_empty() {
            return Err(Error::Validation(format!(
                "domain `{}` has an empty database",
                self.name
            )));
        }
        let mut names = HashSet::new();
        self.codes = Vec::with_capacity(self.database.len());
        for entity in &self.database {
            if !names.insert(entity.name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate entity `{}` in domain `{}`",
                    entity.name, self.name
                )));
            }
            for key in entity.values.keys() {
                if !self.slot_index.contains_key(key) {
                    return Err(Error::Validation(format!(
                        "entity `{}` in domain `{}` references unknown slot `{}`",
                        entity.name, self.name, key
                    )));
                }
            }
            let mut row = Vec::with_capacity(self.slots.len());
            for slot in &self.slots {
                let value = entity.values.get(&slot.name);
                match slot.kind {
                    SlotKind::Find => {
                        let value = value.ok_or_else(|| {
                            Error::Validation(format!(
                                "entity `{}` lacks find slot `{}.{}`",
                                entity.name, self.name, slot.name
                            ))
                        })?;
                        let code = slot.value_index(value).ok_or_else(|| {
                            Error::Validation(format!(
                                "entity `{}` uses value `{}` outside slot `{}.{}`",
                                entity.name, value, self.name, slot.name
                            ))
                        })?;
                        row.push(Some(code as u16));
                    }
                    SlotKind::Request => {
                        if value.is_none() {
                            return Err(Error::Validation(format!(
                                "entity `{}` lacks requestable slot `{}.{}`",
                                entity.name, self.name, slot.name
                            )));
                        }
                        row.push(None);
                    }
                    SlotKind::Book => row.push(None),
                }
            }
            self.codes.push(row);
        }
        Ok(())
    }
}

/// The fixed intent catalogues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intent {
    Inform,
    Request,
    Hello,
    Bye,
    Thank,
    ReqmoreAnswer,
    Dontcare,
    Offer,
    Book,
    Nooffer,
    Nobook,
    Reqmore,
}

pub const SLOT_INTENTS: [Intent; 2] = [Intent::Inform, Intent::Request];
pub const USER_GENERAL_INTENTS: [Intent; 5] = [
    Intent::Hello,
    Intent::Bye,
    Intent::Thank,
    Intent::ReqmoreAnswer,
    Intent::Dontcare,
];
pub const SYSTEM_GENERAL_INTENTS: [Intent; 6] = [
    Intent::Offer,
    Intent::Book,
    Intent::Nooffer,
    Intent::Nobook,
    Intent::Reqmore,
    Intent::Bye,
];

impl Intent {
    pub const ALL: [Intent; 12] = [
        Intent::Inform,
        Intent::Request,
        Intent::Hello,
        Intent::Bye,
        Intent::Thank,
        Intent::ReqmoreAnswer,
        Intent::Dontcare,
        Intent::Offer,
        Intent::Book,
        Intent::Nooffer,
        Intent::Nobook,
        Intent::Reqmore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Inform => "inform",
            Intent::Request => "request",
            Intent::Hello => "hello",
            Intent::Bye => "bye",
            Intent::Thank => "thank",
            Intent::ReqmoreAnswer => "reqmore-answer",
            Intent::Dontcare => "dontcare",
            Intent::Offer => "offer",
            Intent::Book => "book",
            Intent::Nooffer => "nooffer",
            Intent::Nobook => "nobook",
            Intent::Reqmore => "reqmore",
        }
    }

    pub fn parse(s: &str) -> Option<Intent> {
        Intent::ALL.into_iter().find(|i| i.as_str() == s)
    }

    pub fn is_slot_intent(self) -> bool {
        matches!(self, Intent::Inform | Intent::Request)
    }

    /// System intents that act on a domain's entity without naming a slot.
    pub fn is_domain_scoped(self) -> bool {
        matches!(
            self,
            Intent::Offer | Intent::Book | Intent::Nooffer | Intent::Nobook
        )
    }

    /// Intents carrying the `general` domain tag.
    pub fn is_general(self) -> bool {
        !self.is_slot_intent() && !self.is_domain_scoped()
    }

    pub fn user_general_index(self) -> Option<usize> {
        USER_GENERAL_INTENTS.iter().position(|&i| i == self)
    }

    pub fn system_general_index(self) -> Option<usize> {
        SYSTEM_GENERAL_INTENTS.iter().position(|&i| i == self)
    }

    pub fn slot_index(self) -> Option<usize> {
        SLOT_INTENTS.iter().position(|&i| i == self)
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Serialize, Deserialize)]
struct OntologyFile {
    format: String,
    version: u32,
    domains: Vec<DomainSchema>,
}

/// Validated, immutable ontology.
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    domains: Vec<DomainSchema>,
}

impl Ontology {
    pub fn new(domains: Vec<DomainSchema>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::Validation("ontology has no domains".into()));
        }
        let mut names = HashSet::new();
        let mut domains = domains;
        for d in &mut domains {
            if !names.insert(d.name.clone()) {
                return Err(Error::Validation(format!("duplicate domain `{}`", d.name)));
            }
            d.build_index()?;
        }
        Ok(Ontology { domains })
    }

    /// The 7-domain ontology shipped with the crate.
    pub fn bundled() -> Self {
        Ontology::from_json_str(BUNDLED_JSON, "bundled ontology")
            .expect("bundled ontology is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ontology::from_json_str(&text, &path.display().to_string())
    }

    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        let file: OntologyFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("{context} (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if file.format != FORMAT_TAG {
            return Err(Error::Parse {
                context: context.to_string(),
                message: format!("field `format` must be `{FORMAT_TAG}`, got `{}`", file.format),
            });
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Parse {
                context: context.to_string(),
                message: format!("unsupported ontology version {}", file.version),
            });
        }
        Ontology::new(file.domains)
    }

    pub fn to_json_string(&self) -> String {
        let file = OntologyFile {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            domains: self.domains.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("ontology serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn domains(&self) -> &[DomainSchema] {
        &self.domains
    }

    pub fn domain(&self, index: usize) -> &DomainSchema {
        &self.domains[index]
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn domain_by_name(&self, name: &str) -> Result<&DomainSchema> {
        self.domain_index(name)
            .map(|i| &self.domains[i])
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Largest slot count over all domains.
    pub fn max_slots(&self) -> usize {
        self.domains.iter().map(|d| d.slots.len()).max().unwrap_or(0)
    }

    /// A new ontology keeping only the named domains, in the given order.
    pub fn restrict<S: AsRef<str>>(&self, names: &[S]) -> Result<Ontology> {
        let domains = names
            .iter()
            .map(|n| self.domain_by_name(n.as_ref()).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ontology::new(domains)
    }

    pub fn user_general_intents(&self) -> &'static [Intent] {
        &USER_GENERAL_INTENTS
    }

    pub fn system_general_intents(&self) -> &'static [Intent] {
        &SYSTEM_GENERAL_INTENTS
    }

    pub fn slot_user_intents(&self) -> &'static [Intent] {
        &SLOT_INTENTS
    }

    pub fn slot_system_intents(&self) -> &'static [Intent] {
        &SLOT_INTENTS
    }
}

/// Entities matching every constraint exactly; `dontcare` matches anything.
pub fn query<'a>(
    db: &'a DomainSchema,
    constraints: &BTreeMap<String, String>,
) -> Result<Vec<&'a Entity>> {
    let mut coded = Vec::with_capacity(constraints.len());
    let mut literal = Vec::new();
    for (slot, value) in constraints {
        let index = db.slot_index(slot).ok_or_else(|| Error::UnknownSlot {
            domain: db.name.clone(),
            slot: slot.clone(),
        })?;
        if value == DONTCARE {
            continue;
        }
        let def = &db.slots[index];
        match def.kind {
            SlotKind::Find => match def.value_index(value) {
                Some(v) => coded.push((index, Constraint::Value(v as u16))),
                None => return Ok(Vec::new()),
            },
            SlotKind::Request => literal.push((slot.as_str(), value.as_str())),
            // Booking details are not database attributes.
            SlotKind::Book => {}
        }
    }
    Ok(db
        .database
        .iter()
        .enumerate()
        .filter(|(e, entity)| {
            db.entity_matches(*e, &coded)
                && literal.iter().all(|(slot, value)| entity.get(slot) == Some(*value))
        })
        .map(|(_, entity)| entity)
        .collect())
}

/// Match-count bins `[==0, ==1, ==2, ==3, ==4, >=5]`.
pub fn degree_pointer(count: usize) -> [f64; 6] {
    let mut v = [0.0; 6];
    v[count.min(5)] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_domain() -> DomainSchema {
        let slots = vec![
            SlotDef {
                name: "food".into(),
                kind: SlotKind::Find,
                values: vec!["italian".into(), "thai".into()],
            },
            SlotDef {
                name: "area".into(),
                kind: SlotKind::Find,
                values: vec!["north".into(), "south".into()],
            },
            SlotDef {
                name: "phone".into(),
                kind: SlotKind::Request,
                values: vec![],
            },
        ];
        let db = vec![
            Entity {
                name: "a".into(),
                values: [("food", "italian"), ("area", "north"), ("phone", "1")]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            },
            Entity {
                name: "b".into(),
                values: [("food", "thai"), ("area", "north"), ("phone", "2")]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            },
        ];
        let mut d = DomainSchema::new("toy", slots, db);
        d.build_index().unwrap();
        d
    }

    fn constraints(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn bundled_slot_counts() {
        let ont = Ontology::bundled();
        let expected = [
            ("restaurant", 4, 3, 5),
            ("attraction", 3, 0, 7),
            ("hotel", 7, 3, 5),
            ("taxi", 4, 0, 2),
            ("train", 5, 1, 5),
            ("hospital", 1, 0, 3),
            ("police", 0, 0, 3),
        ];
        assert_eq!(ont.len(), 7);
        for (d, (name, find, book, req)) in ont.domains().iter().zip(expected) {
            assert_eq!(d.name, name);
            assert_eq!(d.count_of(SlotKind::Find), find, "{name}");
            assert_eq!(d.count_of(SlotKind::Book), book, "{name}");
            assert_eq!(d.count_of(SlotKind::Request), req, "{name}");
        }
    }

    #[test]
    fn bundled_file_matches_generator() {
        assert_eq!(generate_bundled().to_json_string(), BUNDLED_JSON);
    }

    #[test]
    fn empty_domain_list_rejected() {
        assert!(matches!(Ontology::new(vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_slot_rejected_with_name() {
        let mut d = toy_domain();
        d.slots.push(d.slots[0].clone());
        let err = Ontology::new(vec![d]).unwrap_err().to_string();
        assert!(err.contains("duplicate slot `food`"), "{err}");
    }

    #[test]
    fn reserved_values_rejected() {
        let mut d = toy_domain();
        d.slots[1].values.push(DONTCARE.into());
        let err = Ontology::new(vec![d]).unwrap_err().to_string();
        assert!(err.contains("reserved"), "{err}");
    }

    #[test]
    fn entity_missing_slot_rejected() {
        let mut d = toy_domain();
        d.database[0].values.remove("phone");
        let err = Ontology::new(vec![d]).unwrap_err().to_string();
        assert!(err.contains("phone"), "{err}");
    }

    #[test]
    fn parse_error_has_line_context() {
        let err = Ontology::from_json_str("{\n  \"format\": 3,\n}", "x.json").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn query_empty_and_dontcare_return_all() {
        let d = toy_domain();
        assert_eq!(query(&d, &constraints(&[])).unwrap().len(), 2);
        assert_eq!(query(&d, &constraints(&[("food", DONTCARE)])).unwrap().len(), 2);
    }

    #[test]
    fn query_single_match_agrees_with_brute_force() {
        let d = toy_domain();
        let c = constraints(&[("food", "thai")]);
        let brute: Vec<&Entity> = d
            .database
            .iter()
            .filter(|e| c.iter().all(|(k, v)| e.get(k) == Some(v)))
            .collect();
        let got = query(&d, &c).unwrap();
        assert_eq!(got, brute);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].name, "b");
    }

    #[test]
    fn query_unknown_slot_errors() {
        let d = toy_domain();
        assert!(matches!(
            query(&d, &constraints(&[("colour", "red")])),
            Err(Error::UnknownSlot { .. })
        ));
    }

    #[test]
    fn degree_pointer_bins() {
        assert_eq!(degree_pointer(0), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(degree_pointer(4), [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(degree_pointer(17), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn round_trip_is_identical() {
        let ont = Ontology::bundled();
        let text = ont.to_json_string();
        let again = Ontology::from_json_str(&text, "rt").unwrap();
        assert_eq!(again, ont);
        assert_eq!(again.to_json_string(), text);
    }

    #[test]
    fn bundled_queries_hit_zero_one_and_many() {
        let ont = Ontology::bundled();
        let hotel = ont.domain_by_name("hotel").unwrap();
        let full: Vec<(usize, Constraint)> = hotel
            .slots_of(SlotKind::Find)
            .map(|(i, _)| (i, Constraint::Value(0)))
            .collect();
        let mut counts = HashSet::new();
        counts.insert(hotel.count_matching(&[]).min(6));
        counts.insert(hotel.count_matching(&full[..1]).min(6));
        // Every entity's full conjunction matches at least that entity.
        for e in 0..hotel.database.len() {
            let own: Vec<(usize, Constraint)> = hotel
                .slots_of(SlotKind::Find)
                .map(|(i, _)| (i, Constraint::Value(hotel.codes[e][i].unwrap())))
                .collect();
            counts.insert(hotel.count_matching(&own).min(6));
        }
        counts.insert(hotel.count_matching(&full).min(6));
        assert!(counts.contains(&1));
        assert!(counts.contains(&6));
        let zero_exists = (0..2u16).any(|a| {
            (0..5u16).any(|b| {
                hotel.count_matching(&[(0, Constraint::Value(a)), (1, Constraint::Value(b)),
                    (2, Constraint::Value(2)), (3, Constraint::Value(4))]) == 0
            })
        });
        assert!(zero_exists);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn degree_pointer_is_one_hot(n in 0usize..10_000) {
                prop_assert_eq!(degree_pointer(n).iter().sum::<f64>(), 1.0);
            }

            #[test]
            fn adding_a_constraint_never_enlarges(slot in 0usize..7, value in 0u16..5, extra in 0usize..7, extra_value in 0u16..5) {
                let ont = Ontology::bundled();
                let hotel = ont.domain_by_name("hotel").unwrap();
                let clamp = |s: usize, v: u16| (s, Constraint::Value(v % hotel.slots[s].values.len() as u16));
                let base = vec![clamp(slot, value)];
                let mut more = base.clone();
                more.push(clamp(extra, extra_value));
                prop_assert!(hotel.count_matching(&more) <= hotel.count_matching(&base));
                prop_assert!(hotel.count_matching(&base) <= hotel.count_matching(&[]));
            }
        }
    }
}
