use std::sync::Arc;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/fnnref_catalogue.json".into());
    let ontology = Arc::new(structdm::ontology::Ontology::bundled());
    let catalogue = structdm::policy::Catalogue::generate(&ontology).expect("self-play");
    let mut text = serde_json::to_string_pretty(&catalogue).expect("serialise");
    text.push('\n');
    std::fs::write(&path, text).expect("write catalogue");
    println!("{} entries", catalogue.len());
}
