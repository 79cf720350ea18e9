//! CLI configuration: one JSON document describing paths plus the full
//! run configuration. Unknown keys are rejected; relative paths resolve
//! against the config file's directory so configs are self-describing.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use drp_core::gateway::{ProviderKind, ProviderSpec};
use drp_core::pipeline::{PromptSet, RunConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub corpus_path: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub prompt_dir: Option<PathBuf>,
    /// Root for per-role mock fixture dirs; used by `--mock` and `mockgen`
    /// to fill in any role without an explicit fixture_dir.
    #[serde(default)]
    pub fixture_root: Option<PathBuf>,
    pub run: RunConfig,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<CliConfig, String> {
        let bytes = std::fs::read(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut config: CliConfig = serde_json::from_slice(&bytes)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.fill_mock_fixture_dirs();
        if let Some(dir) = &config.prompt_dir {
            config.run.prompts = PromptSet::from_dir(dir)
                .map_err(|e| format!("prompt dir {}: {e}", dir.display()))?;
        }
        Ok(config)
    }

    /// Roles already configured as mock get `fixture_root/<role>` when no
    /// explicit fixture_dir is set.
    fn fill_mock_fixture_dirs(&mut self) {
        let Some(root) = self.fixture_root.clone() else {
            return;
        };
        for (name, spec) in [
            ("extractor", &mut self.run.roles.extractor),
            ("validator", &mut self.run.roles.validator),
            ("summarizer", &mut self.run.roles.summarizer),
            ("generator", &mut self.run.roles.generator),
            ("judge", &mut self.run.roles.judge),
        ] {
            if spec.kind == ProviderKind::Mock && spec.fixture_dir.is_none() {
                spec.fixture_dir = Some(root.join(name));
            }
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(p.as_path());
            }
        };
        resolve(&mut self.corpus_path);
        resolve(&mut self.cache_dir);
        resolve(&mut self.output_dir);
        if let Some(p) = self.prompt_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.fixture_root.as_mut() {
            resolve(p);
        }
        for spec in self.role_specs_mut() {
            if let Some(p) = spec.fixture_dir.as_mut() {
                resolve(p);
            }
        }
    }

    fn role_specs_mut(&mut self) -> [&mut ProviderSpec; 5] {
        [
            &mut self.run.roles.extractor,
            &mut self.run.roles.validator,
            &mut self.run.roles.summarizer,
            &mut self.run.roles.generator,
            &mut self.run.roles.judge,
        ]
    }

    /// Force every role onto its mock provider, deriving missing fixture
    /// dirs from `fixture_root/<role>`.
    pub fn force_mock(&mut self) -> Result<(), String> {
        let fixture_root = self.fixture_root.clone();
        for (name, spec) in [
            ("extractor", &mut self.run.roles.extractor),
            ("validator", &mut self.run.roles.validator),
            ("summarizer", &mut self.run.roles.summarizer),
            ("generator", &mut self.run.roles.generator),
            ("judge", &mut self.run.roles.judge),
        ] {
            spec.kind = ProviderKind::Mock;
            if spec.fixture_dir.is_none() {
                match &fixture_root {
                    Some(root) => spec.fixture_dir = Some(root.join(name)),
                    None => {
                        return Err(format!(
                            "--mock: role {name} has no fixture_dir and config has no fixture_root"
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config_json() -> String {
        r#"{
  "corpus_path": "corpus.jsonl",
  "cache_dir": "cache",
  "output_dir": "/absolute/runs",
  "fixture_root": "mock",
  "run": {
    "mode": "drp",
    "m_representatives": 2,
    "cluster_k": 3,
    "retrieval_k": 2,
    "seed": 1,
    "embedding": { "kind": "hash", "dim": 8, "seed": 1 },
    "roles": {
      "extractor": { "kind": "mock", "model_id": "e" },
      "validator": { "kind": "mock", "model_id": "v" },
      "summarizer": { "kind": "mock", "model_id": "s" },
      "generator": { "kind": "remote", "model_id": "g", "base_url": "http://example" },
      "judge": { "kind": "mock", "model_id": "j" }
    }
  }
}"#
        .to_string()
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, minimal_config_json()).unwrap();
        let config = CliConfig::load(&path).unwrap();
        assert_eq!(config.corpus_path, dir.path().join("corpus.jsonl"));
        assert_eq!(config.cache_dir, dir.path().join("cache"));
        assert_eq!(config.output_dir, Path::new("/absolute/runs"));
        // Mock roles pick up fixture_root/<role>; remote roles do not.
        assert_eq!(
            config.run.roles.extractor.fixture_dir.as_deref(),
            Some(dir.path().join("mock/extractor").as_path())
        );
        assert!(config.run.roles.generator.fixture_dir.is_none());
    }

    #[test]
    fn force_mock_fills_every_role() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, minimal_config_json()).unwrap();
        let mut config = CliConfig::load(&path).unwrap();
        config.force_mock().unwrap();
        use drp_core::gateway::ProviderKind;
        for spec in [
            &config.run.roles.extractor,
            &config.run.roles.validator,
            &config.run.roles.summarizer,
            &config.run.roles.generator,
            &config.run.roles.judge,
        ] {
            assert_eq!(spec.kind, ProviderKind::Mock);
            assert!(spec.fixture_dir.is_some());
        }
    }

    #[test]
    fn force_mock_without_fixture_root_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            minimal_config_json().replace(r#""fixture_root": "mock","#, ""),
        )
        .unwrap();
        let mut config = CliConfig::load(&path).unwrap();
        assert!(config.force_mock().is_err());
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            minimal_config_json().replace("\"fixture_root\"", "\"fixture_rutt\""),
        )
        .unwrap();
        let err = CliConfig::load(&path).unwrap_err();
        assert!(err.contains("unknown field"), "{err}");
    }
}
