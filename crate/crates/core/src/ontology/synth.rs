//! Generator for the bundled synthetic ontology (`data/ontology.json`).
//!
//! The committed file is the output of [`generate_bundled`]; a unit test keeps
//! the two in sync.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DomainSchema, Entity, Ontology, SlotDef, SlotKind};

const SEED: u64 = 20_230_615;

struct Recipe {
    name: &'static str,
    entities: usize,
    find: &'static [(&'static str, &'static [&'static str])],
    book: &'static [(&'static str, &'static [&'static str])],
    request: &'static [&'static str],
}

const AREAS: &[&str] = &["north", "south", "east", "west", "centre"];
const PRICES: &[&str] = &["cheap", "moderate", "expensive"];
const YES_NO: &[&str] = &["yes", "no"];
const DAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const PEOPLE: &[&str] = &["1", "2", "3", "4", "5", "6", "7", "8"];
const PLACES: &[&str] = &[
    "museum of botany",
    "grand arcade",
    "city station",
    "riverside pub",
    "st john college",
    "old mill hotel",
    "market square",
    "airport",
];
const STATIONS: &[&str] = &[
    "cambridge",
    "london kings cross",
    "ely",
    "norwich",
    "peterborough",
    "stevenage",
];
const TIMES: &[&str] = &[
    "07:15", "08:30", "09:45", "11:00", "13:15", "15:30", "17:45", "20:00",
];
const TRAIN_TIMES: &[&str] = &["06:00", "08:00", "10:00", "12:00", "15:00", "18:00"];

const RECIPES: &[Recipe] = &[
    Recipe {
        name: "restaurant",
        entities: 60,
        find: &[
            (
                "food",
                &[
                    "italian", "chinese", "indian", "british", "french", "thai", "mexican",
                    "japanese",
                ],
            ),
            ("pricerange", PRICES),
            ("area", AREAS),
            ("parking", YES_NO),
        ],
        book: &[
            (
                "time",
                &["12:00", "12:30", "13:00", "18:00", "18:30", "19:00", "19:30", "20:00"],
            ),
            ("day", DAYS),
            ("people", PEOPLE),
        ],
        request: &["address", "phone", "postcode", "signature", "rating"],
    },
    Recipe {
        name: "attraction",
        entities: 50,
        find: &[
            (
                "type",
                &[
                    "museum", "park", "theatre", "college", "gallery", "cinema", "nightclub",
                    "pool",
                ],
            ),
            ("area", AREAS),
            ("entrance", &["free", "paid"]),
        ],
        book: &[],
        request: &[
            "address",
            "phone",
            "postcode",
            "fee",
            "openhours",
            "website",
            "description",
        ],
    },
    Recipe {
        name: "hotel",
        entities: 80,
        find: &[
            ("type", &["hotel", "guesthouse"]),
            ("area", AREAS),
            ("pricerange", PRICES),
            ("stars", &["1", "2", "3", "4", "5"]),
            ("internet", YES_NO),
            ("parking", YES_NO),
            ("breakfast", YES_NO),
        ],
        book: &[
            ("day", DAYS),
            ("people", PEOPLE),
            ("stay", &["1", "2", "3", "4", "5"]),
        ],
        request: &["address", "phone", "postcode", "checkin", "website"],
    },
    Recipe {
        name: "taxi",
        entities: 60,
        find: &[
            ("departure", PLACES),
            ("destination", PLACES),
            ("leaveat", TIMES),
            ("arriveby", TIMES),
        ],
        book: &[],
        request: &["cartype", "phone"],
    },
    Recipe {
        name: "train",
        entities: 100,
        find: &[
            ("departure", STATIONS),
            ("destination", STATIONS),
            ("day", DAYS),
            ("leaveat", TRAIN_TIMES),
            ("arriveby", TRAIN_TIMES),
        ],
        book: &[("people", PEOPLE)],
        request: &["trainid", "price", "duration", "departtime", "arrivetime"],
    },
    Recipe {
        name: "hospital",
        entities: 20,
        find: &[(
            "department",
            &[
                "cardiology",
                "neurology",
                "oncology",
                "paediatrics",
                "emergency",
                "maternity",
                "urology",
                "haematology",
                "dermatology",
                "radiology",
            ],
        )],
        book: &[],
        request: &["address", "phone", "postcode"],
    },
    Recipe {
        name: "police",
        entities: 20,
        find: &[],
        book: &[],
        request: &["address", "phone", "postcode"],
    },
];

const STREETS: &[&str] = &[
    "regent", "mill", "trumpington", "hills", "chesterton", "newmarket", "king", "bridge",
];
const CARS: &[&str] = &["toyota", "skoda", "ford", "tesla", "audi", "volvo"];
const HOURS: &[&str] = &["09:00-17:00", "10:00-18:00", "10:00-22:00", "always open"];
const DISHES: &[&str] = &["noodles", "curry", "pie", "risotto", "tacos", "sushi"];
const BLURBS: &[&str] = &["historic", "modern", "family friendly", "quiet", "lively"];

fn free_value(slot: &str, domain: &str, index: usize, rng: &mut ChaCha8Rng) -> String {
    match slot {
        "address" => format!(
            "{} {} street",
            rng.gen_range(1..200),
            STREETS.choose(rng).unwrap()
        ),
        "phone" => format!("01223{:06}", rng.gen_range(0..1_000_000)),
        "postcode" => format!("cb{}{}", rng.gen_range(1..5), rng.gen_range(10..99)),
        "signature" => DISHES.choose(rng).unwrap().to_string(),
        "rating" => format!("{}", rng.gen_range(1..=5)),
        "fee" => format!("{} pounds", rng.gen_range(0..20)),
        "openhours" => HOURS.choose(rng).unwrap().to_string(),
        "website" => format!("www.{domain}{index}.example"),
        "description" => BLURBS.choose(rng).unwrap().to_string(),
        "checkin" => format!("{}:00", rng.gen_range(12..17)),
        "cartype" => CARS.choose(rng).unwrap().to_string(),
        "trainid" => format!("TR{:04}", rng.gen_range(1000..10_000)),
        "price" => format!("{}.{:02} pounds", rng.gen_range(4..40), rng.gen_range(0..100)),
        "duration" => format!("{} minutes", rng.gen_range(15..120)),
        "departtime" | "arrivetime" => {
            format!("{:02}:{:02}", rng.gen_range(5..23), rng.gen_range(0..60))
        }
        other => format!("{other}-{index}"),
    }
}

/// Regenerate the bundled 7-domain ontology deterministically.
pub fn generate_bundled() -> Ontology {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let domains = RECIPES
        .iter()
        .map(|recipe| {
            let mut slots = Vec::new();
            for (name, values) in recipe.find {
                slots.push(SlotDef {
                    name: name.to_string(),
                    kind: SlotKind::Find,
                    values: values.iter().map(|v| v.to_string()).collect(),
                });
            }
            for (name, values) in recipe.book {
                slots.push(SlotDef {
                    name: name.to_string(),
                    kind: SlotKind::Book,
                    values: values.iter().map(|v| v.to_string()).collect(),
                });
            }
            for name in recipe.request {
                slots.push(SlotDef {
                    name: name.to_string(),
                    kind: SlotKind::Request,
                    values: Vec::new(),
                });
            }
            let database = (0..recipe.entities)
                .map(|i| {
                    let mut values = BTreeMap::new();
                    for (name, set) in recipe.find {
                        values.insert(name.to_string(), set.choose(&mut rng).unwrap().to_string());
                    }
                    for name in recipe.request {
                        values.insert(name.to_string(), free_value(name, recipe.name, i, &mut rng));
                    }
                    Entity {
                        name: format!("{}-{:03}", recipe.name, i),
                        values,
                    }
                })
                .collect();
            DomainSchema::new(recipe.name, slots, database)
        })
        .collect();
    Ontology::new(domains).expect("generated ontology is valid")
}
