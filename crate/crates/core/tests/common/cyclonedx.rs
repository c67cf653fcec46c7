//! CycloneDX 1.5 schema validation against the vendored schema files.

use std::collections::BTreeMap;

use serde_json::Value;

/// Serves the vendored schemas referenced from the CycloneDX 1.5 schema.
struct Vendored(BTreeMap<String, Value>);

impl jsonschema::Retrieve for Vendored {
    fn retrieve(
        &self,
        uri: &jsonschema::Uri<String>,
    ) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        self.0
            .get(uri.as_str())
            .cloned()
            .ok_or_else(|| format!("schema {uri} is not vendored").into())
    }
}

pub fn cyclonedx_validator() -> jsonschema::Validator {
    let load = |s: &str| -> Value { serde_json::from_str(s).unwrap() };
    let bom = load(include_str!(
        "../data/cyclonedx/bom-1.5.SNAPSHOT.schema.json"
    ));
    let mut refs = BTreeMap::new();
    refs.insert(
        "http://cyclonedx.org/schema/spdx.SNAPSHOT.schema.json".to_string(),
        load(include_str!("../data/cyclonedx/spdx.SNAPSHOT.schema.json")),
    );
    refs.insert(
        "http://cyclonedx.org/schema/jsf-0.82.SNAPSHOT.schema.json".to_string(),
        load(include_str!(
            "../data/cyclonedx/jsf-0.82.SNAPSHOT.schema.json"
        )),
    );
    jsonschema::options()
        .with_retriever(Vendored(refs))
        .build(&bom)
        .expect("CycloneDX schema compiles")
}
