fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ontology.json".into());
    structdm::ontology::generate_bundled().save(&path).expect("write ontology");
}
