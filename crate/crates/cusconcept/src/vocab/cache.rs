//! On-disk vocabulary cache: one JSON file per (kind, key, provider, prompt)
//! tuple, written with atomic replace.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Fingerprint;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyCache {
    pub kind: String,
    pub key: String,
    pub provider: String,
    pub prompt: String,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    pub created_at: String,
}

pub struct VocabCacheStore {
    dir: PathBuf,
}

impl VocabCacheStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        VocabCacheStore { dir: dir.into() }
    }

    /// `CUSCONCEPT_CACHE_DIR` when set, else `.cusconcept-cache`.
    pub fn default_dir() -> PathBuf {
        std::env::var_os("CUSCONCEPT_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".cusconcept-cache"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, kind: &str, key: &str, provider: &str, prompt: &str) -> PathBuf {
        let mut fp = Fingerprint::new();
        fp.add_str(kind).add_str(key).add_str(provider).add_str(prompt);
        let digest = fp.finish();
        self.dir.join(format!("{kind}-{}.json", &digest[..16]))
    }

    /// Ok(None) on a miss; CacheCorrupt when the file exists but is
    /// unreadable or keyed differently than its name claims.
    pub fn load(
        &self,
        kind: &str,
        key: &str,
        provider: &str,
        prompt: &str,
    ) -> Result<Option<VocabularyCache>> {
        let path = self.path_for(kind, key, provider, prompt);
        if !path.is_file() {
            return Ok(None);
        }
        let corrupt = |reason: String| Error::CacheCorrupt {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(&path)?;
        let entry: VocabularyCache =
            serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if entry.kind != kind || entry.key != key || entry.provider != provider
            || entry.prompt != prompt
        {
            return Err(corrupt("entry does not match its cache key".into()));
        }
        Ok(Some(entry))
    }

    pub fn save(&self, entry: &VocabularyCache) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&entry.kind, &entry.key, &entry.provider, &entry.prompt);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(entry)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// ISO-8601 UTC timestamp for cache provenance.
pub fn now_iso8601() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    epoch_to_iso8601(secs)
}

fn epoch_to_iso8601(secs: u64) -> String {
    let days = secs / 86_400;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // civil-from-days (Howard Hinnant's algorithm)
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mo = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mo <= 2 { y + 1 } else { y };
    format!("{y:04}-{mo:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_conversion_matches_known_date() {
        assert_eq!(epoch_to_iso8601(0), "1970-01-01T00:00:00Z");
        assert_eq!(epoch_to_iso8601(951_782_400), "2000-02-29T00:00:00Z");
    }
}
