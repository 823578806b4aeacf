use std::path::PathBuf;

use dyadsim::dataset::{export_csv, infer_profile, parse_csv, parse_reader, ColumnMapping, DatasetError};
use dyadsim::memory::MemoryConfig;
use dyadsim::types::TableKey;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn valid_fixture_parses_cleanly() {
    let report = parse_csv(&fixture("participants_valid.csv"), &ColumnMapping::default()).unwrap();
    assert_eq!(report.records.len(), 6);
    assert!(report.rejections.is_empty());
    assert!(report.records[0].importance_t2.is_some());
    assert!(report.records[1].importance_t2.is_none());
    assert!(report.records[1].decisions["12"]);
}

#[test]
fn bad_importance_row_is_rejected() {
    let report = parse_csv(&fixture("bad_importance.csv"), &ColumnMapping::default()).unwrap();
    assert_eq!(report.records.len(), 2);
    assert_eq!(report.rejections.len(), 1);
    let r = &report.rejections[0];
    assert_eq!(r.row, 3);
    assert_eq!(r.participant_id.as_deref(), Some("2"));
    assert_eq!(r.reason, "importance sum 90 ≠ 100");
}

#[test]
fn export_round_trip_is_identity() {
    let mapping = ColumnMapping::default();
    for name in ["participants_valid.csv", "pool8.csv"] {
        let first = parse_csv(&fixture(name), &mapping).unwrap().records;
        let mut buf = Vec::new();
        export_csv(&first, &mapping, &mut buf).unwrap();
        let second = parse_reader(buf.as_slice(), &mapping).unwrap();
        assert!(second.rejections.is_empty());
        assert_eq!(first, second.records);
    }
}

#[test]
fn pool_fixture_groups_dates() {
    let report = parse_csv(&fixture("pool8.csv"), &ColumnMapping::default()).unwrap();
    assert_eq!(report.rows_read, 32);
    assert_eq!(report.records.len(), 8);
    for r in &report.records {
        assert_eq!(r.post_ratings.len(), 4);
        assert_eq!(r.decisions.len(), 4);
        let agent = r.to_agent(MemoryConfig::default());
        agent.attributes.validate().unwrap();
        agent.profile.validate().unwrap();
    }
}

#[test]
fn inferred_traits_stay_in_range() {
    let mapping = ColumnMapping::default();
    for name in ["participants_valid.csv", "pool8.csv", "bad_importance.csv"] {
        for r in parse_csv(&fixture(name), &mapping).unwrap().records {
            let p = infer_profile(&r);
            assert_eq!(p, infer_profile(&r));
            assert!(p.traits().values().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn mapping_file_renames_columns() {
    let mut mapping = ColumnMapping::default();
    mapping.participant_id = "person".into();
    let json = serde_json::to_string(&mapping).unwrap();
    let loaded = ColumnMapping::from_json(&json).unwrap();
    assert_eq!(loaded, mapping);
    let text = std::fs::read_to_string(fixture("participants_valid.csv")).unwrap().replacen("iid", "person", 1);
    let report = parse_reader(text.as_bytes(), &loaded).unwrap();
    assert_eq!(report.records.len(), 6);
    let partial = ColumnMapping::from_json(r#"{"gender": "sex"}"#).unwrap();
    assert_eq!(partial.participant_id, "iid");
    assert!(matches!(
        parse_csv(&fixture("participants_valid.csv"), &partial),
        Err(DatasetError::MissingColumn(c)) if c == "sex"
    ));
    assert_eq!(dyadsim::types::Attribute::ALL.len(), mapping.self_ratings.len());
}

#[test]
fn unreadable_file_is_io_error() {
    let err = parse_csv(&fixture("nope.csv"), &ColumnMapping::default()).unwrap_err();
    assert!(matches!(err, DatasetError::Io { .. }));
}
