//! Partition persistence: a small JSON record of gamma, boundaries and
//! representative depths. JSON floats print in shortest round-trip form,
//! so saved partitions reload bit-exactly; validation runs on load.

use std::path::Path;

use super::IoError;
use crate::d4::LevelPartition;

pub fn save_partition(part: &LevelPartition, path: &Path) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(part).expect("partition serializes");
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_partition(path: &Path) -> Result<LevelPartition, IoError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::d4::fit_partition;

    #[test]
    fn roundtrip_is_bit_exact() {
        let depths: Vec<f64> = (1..=50).map(|i| 1.0 + (i as f64).sqrt()).collect();
        let part = fit_partition(&depths, 1.0, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.json");
        save_partition(&part, &path).unwrap();
        assert_eq!(load_partition(&path).unwrap(), part);
    }

    #[test]
    fn invalid_records_are_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.json");
        std::fs::write(
            &path,
            r#"{"gamma":1.0,"boundaries":[2.0,1.0],"rep_depths":[1.5]}"#,
        )
        .unwrap();
        assert!(matches!(load_partition(&path), Err(IoError::Parse { .. })));
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(load_partition(&path), Err(IoError::Parse { .. })));
    }
}
