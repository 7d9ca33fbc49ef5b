use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Intent, Ontology, SlotKind, GENERAL};

/// Who produced an act; the two sides draw from different catalogues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Speaker {
    User,
    System,
}

/// `(intent, domain, slot, value)`: the unit exchanged between user, tracker and policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub intent: Intent,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl DialogueAct {
    pub fn inform(domain: &str, slot: &str, value: &str) -> Self {
        DialogueAct {
            intent: Intent::Inform,
            domain: domain.to_string(),
            slot: Some(slot.to_string()),
            value: Some(value.to_string()),
        }
    }

    pub fn request(domain: &str, slot: &str) -> Self {
        DialogueAct {
            intent: Intent::Request,
            domain: domain.to_string(),
            slot: Some(slot.to_string()),
            value: None,
        }
    }

    /// A domain-less act such as `bye` or `reqmore`.
    pub fn general(intent: Intent) -> Self {
        DialogueAct {
            intent,
            domain: GENERAL.to_string(),
            slot: None,
            value: None,
        }
    }

    /// `offer`, `book`, `nooffer` or `nobook` on a domain, optionally naming an entity or reference.
    pub fn scoped(intent: Intent, domain: &str, value: Option<String>) -> Self {
        DialogueAct {
            intent,
            domain: domain.to_string(),
            slot: None,
            value,
        }
    }

    pub fn is_general(&self) -> bool {
        self.domain == GENERAL
    }

    /// Checks the act against the ontology and the speaker's catalogue.
    pub fn validate(&self, ontology: &Ontology, speaker: Speaker) -> Result<()> {
        let allowed = match speaker {
            Speaker::User => {
                self.intent.is_slot_intent() || self.intent.user_general_index().is_some()
            }
            Speaker::System => {
                self.intent.is_slot_intent() || self.intent.system_general_index().is_some()
            }
        };
        if !allowed {
            return Err(Error::InvalidAct(format!(
                "`{}` is not a {:?} intent",
                self.intent, speaker
            )));
        }
        if self.intent.is_general() {
            if self.domain != GENERAL || self.slot.is_some() {
                return Err(Error::InvalidAct(format!(
                    "general act `{self}` must carry domain `general` and no slot"
                )));
            }
            return Ok(());
        }
        let domain = ontology.domain_by_name(&self.domain)?;
        if self.intent.is_domain_scoped() {
            if self.slot.is_some() {
                return Err(Error::InvalidAct(format!("`{self}` must not carry a slot")));
            }
            return Ok(());
        }
        let slot = self
            .slot
            .as_deref()
            .ok_or_else(|| Error::InvalidAct(format!("`{self}` needs a slot")))?;
        let def = domain.slot(slot)?;
        match (self.intent, speaker) {
            (Intent::Inform, Speaker::User) if !def.kind.is_constraint() => Err(
                Error::InvalidAct(format!("user cannot inform requestable slot in `{self}`")),
            ),
            (Intent::Request, Speaker::User) if def.kind != SlotKind::Request => Err(
                Error::InvalidAct(format!("user can only request requestable slots: `{self}`")),
            ),
            (Intent::Request, Speaker::System) if !def.kind.is_constraint() => Err(
                Error::InvalidAct(format!("system can only request constraint slots: `{self}`")),
            ),
            (Intent::Inform, Speaker::System) if def.kind != SlotKind::Request => Err(
                Error::InvalidAct(format!("system can only inform requestable slots: `{self}`")),
            ),
            (Intent::Inform, _) if self.value.is_none() => {
                Err(Error::InvalidAct(format!("`{self}` needs a value")))
            }
            _ => Ok(()),
        }
    }

    /// Parses the one-line syntax `intent[domain.slot=value]`, `intent[domain=value]` or `intent`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = |why: &str| Error::Parse {
            context: format!("act `{text}`"),
            message: why.to_string(),
        };
        let (head, body) = match text.find('[') {
            Some(open) => {
                if !text.ends_with(']') {
                    return Err(bad("missing closing `]`"));
                }
                (&text[..open], Some(&text[open + 1..text.len() - 1]))
            }
            None => (text, None),
        };
        let intent = Intent::parse(head.trim()).ok_or_else(|| bad("unknown intent"))?;
        let Some(body) = body else {
            if !intent.is_general() {
                return Err(bad("this intent needs `[domain...]`"));
            }
            return Ok(DialogueAct::general(intent));
        };
        let (target, value) = match body.split_once('=') {
            Some((t, v)) => (t.trim(), Some(v.trim().to_string())),
            None => (body.trim(), None),
        };
        let (domain, slot) = match target.split_once('.') {
            Some((d, s)) => (d.trim(), Some(s.trim().to_string())),
            None => (target, None),
        };
        if domain.is_empty() || slot.as_deref() == Some("") {
            return Err(bad("empty domain or slot"));
        }
        Ok(DialogueAct {
            intent,
            domain: domain.to_string(),
            slot,
            value,
        })
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_general() && self.slot.is_none() && self.value.is_none() {
            return write!(f, "{}", self.intent);
        }
        write!(f, "{}[{}", self.intent, self.domain)?;
        if let Some(slot) = &self.slot {
            write!(f, ".{slot}")?;
        }
        if let Some(value) = &self.value {
            write!(f, "={value}")?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "inform[restaurant.food=italian]",
            "request[hotel.phone]",
            "offer[hotel=hotel-003]",
            "bye",
            "reqmore-answer",
        ] {
            let act = DialogueAct::parse(text).unwrap();
            assert_eq!(act.to_string(), text);
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(DialogueAct::parse("garbage(").is_err());
        assert!(DialogueAct::parse("inform[restaurant.food=x").is_err());
        assert!(DialogueAct::parse("inform").is_err());
    }

    #[test]
    fn validation_follows_catalogues() {
        let ont = Ontology::bundled();
        let ok = DialogueAct::inform("restaurant", "food", "italian");
        ok.validate(&ont, Speaker::User).unwrap();
        assert!(DialogueAct::general(Intent::Offer)
            .validate(&ont, Speaker::System)
            .is_err());
        assert!(DialogueAct::general(Intent::Hello)
            .validate(&ont, Speaker::System)
            .is_err());
        assert!(DialogueAct::request("restaurant", "food")
            .validate(&ont, Speaker::User)
            .is_err());
        assert!(DialogueAct::request("restaurant", "food")
            .validate(&ont, Speaker::System)
            .is_ok());
        assert!(DialogueAct::request("spaceport", "food")
            .validate(&ont, Speaker::System)
            .is_err());
    }
}
