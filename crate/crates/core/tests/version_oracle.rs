//! PyPI ordering checked against an order frozen from the `packaging` library.

use std::cmp::Ordering;

use scabench_core::model::EcosystemId;
use scabench_core::version::compare_raw;

#[test]
fn pep440_matches_packaging_order() {
    let data: serde_json::Value =
        serde_json::from_str(include_str!("data/pep440_order.json")).unwrap();
    let groups: Vec<Vec<String>> =
        serde_json::from_value(data["ascending_groups"].clone()).unwrap();
    let flat: Vec<(usize, &str)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, vs)| vs.iter().map(move |v| (g, v.as_str())))
        .collect();
    for &(ga, a) in &flat {
        for &(gb, b) in &flat {
            let got = compare_raw(EcosystemId::PyPI, a, b).unwrap();
            assert_eq!(got, ga.cmp(&gb), "{a} vs {b}");
        }
    }
}

#[test]
fn npm_and_maven_prerelease_chains() {
    let npm = ["1.4.0-alpha", "1.4.0-beta", "1.4.0-rc.1", "1.4.0"];
    for w in npm.windows(2) {
        assert_eq!(
            compare_raw(EcosystemId::Npm, w[0], w[1]).unwrap(),
            Ordering::Less
        );
    }
    let maven = [
        "2.0-alpha-1",
        "2.0-beta-1",
        "2.0-RC1",
        "2.0-SNAPSHOT",
        "2.0",
        "2.0-sp1",
    ];
    for w in maven.windows(2) {
        assert_eq!(
            compare_raw(EcosystemId::Maven, w[0], w[1]).unwrap(),
            Ordering::Less
        );
    }
}
