use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::SplitRule;
use super::IngestError;
use crate::records::{builtin_scheme, record_id, validate_record, DatasetKey, Split, StanceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawFormat {
    Csv,
    Tsv,
    Jsonl,
    /// One sub-directory per topic holding `<name>.data` text files with a
    /// sibling `<name>.meta` of `key=value` lines. Fields: `group` (directory
    /// name), `text` (data file) and every meta key.
    MetaDirectory,
}

/// Raw field names for each record field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
    pub label: String,
    /// Grouping key used by topic-based split rules when `topic` is absent.
    #[serde(default)]
    pub group: Option<String>,
    /// Per-row published split.
    #[serde(default)]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFile {
    pub path: String,
    #[serde(default)]
    pub split: Option<Split>,
    /// Side file joined on [`JoinSpec::key`].
    #[serde(default)]
    pub join: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinTarget {
    Topic,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub key: String,
    pub value: String,
    pub target: JoinTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub dataset: DatasetKey,
    pub format: RawFormat,
    #[serde(default = "yes")]
    pub has_header: bool,
    /// Decode raw bytes as ISO-8859-1 instead of UTF-8.
    #[serde(default)]
    pub latin1: bool,
    #[serde(default)]
    pub lowercase_labels: bool,
    pub columns: ColumnMap,
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
    #[serde(default)]
    pub drop_labels: Vec<String>,
    #[serde(default)]
    pub join: Option<JoinSpec>,
    pub files: Vec<RawFile>,
    pub split: SplitRule,
}

fn yes() -> bool {
    true
}

macro_rules! adapter_sources {
    ($($key:ident => $file:literal),* $(,)?) => {
        fn adapter_source(dataset: DatasetKey) -> &'static str {
            match dataset {
                $(DatasetKey::$key => include_str!(concat!("../../config/adapters/", $file)),)*
            }
        }
    };
}

adapter_sources! {
    Arc => "arc.toml",
    Argmin => "argmin.toml",
    Fnc1 => "fnc1.toml",
    Iac1 => "iac1.toml",
    Ibmcs => "ibmcs.toml",
    Perspectrum => "perspectrum.toml",
    Scd => "scd.toml",
    Semeval2016t6 => "semeval2016t6.toml",
    Semeval2019t7 => "semeval2019t7.toml",
    Snopes => "snopes.toml",
}

/// The bundled adapter for `dataset`.
pub fn builtin_adapter(dataset: DatasetKey) -> AdapterConfig {
    AdapterConfig::from_toml(adapter_source(dataset)).expect("bundled adapters are valid")
}

impl AdapterConfig {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let config: AdapterConfig = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), IngestError> {
        let join_target = self.join.as_ref().map(|j| j.target);
        if self.columns.comment.is_none() && join_target != Some(JoinTarget::Comment) {
            return Err(IngestError::Config("no source for the comment field".into()));
        }
        if self.files.is_empty() {
            return Err(IngestError::Config("no raw files listed".into()));
        }
        if self.join.is_some() && self.files.iter().any(|f| f.join.is_none()) {
            return Err(IngestError::Config(
                "every file needs a `join` path when [join] is set".into(),
            ));
        }
        let scheme = builtin_scheme(self.dataset);
        for target in self.label_map.values() {
            if !scheme.contains(target) {
                return Err(IngestError::Config(format!(
                    "label_map target `{target}` not in scheme"
                )));
            }
        }
        Ok(())
    }
}

struct Row {
    line: usize,
    fields: HashMap<String, String>,
}

fn decode(bytes: Vec<u8>, latin1: bool, path: &Path) -> Result<String, IngestError> {
    if latin1 {
        return Ok(bytes.into_iter().map(char::from).collect());
    }
    String::from_utf8(bytes).map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })
}

fn read_delimited(path: &Path, text: &str, delimiter: u8, has_header: bool) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .quoting(delimiter == b',')
        .from_reader(text.as_bytes());
    let headers: Vec<String> = if has_header {
        reader.headers()?.iter().map(|h| h.trim().to_string()).collect()
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields = record
            .iter()
            .enumerate()
            .map(|(i, v)| (headers.get(i).cloned().unwrap_or_else(|| i.to_string()), v.to_string()))
            .collect();
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn read_jsonl_rows(path: &Path, text: &str) -> Result<Vec<Row>, IngestError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| IngestError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;
        let fields = object
            .iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, v)| (k.clone(), v.as_str().map_or_else(|| v.to_string(), str::to_string)))
            .collect();
        rows.push(Row { line: i + 1, fields });
    }
    Ok(rows)
}

fn read_meta_directory(dir: &Path, latin1: bool) -> Result<Vec<Row>, IngestError> {
    let mut groups: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    groups.sort();
    let mut rows = Vec::new();
    for group in groups {
        let mut data: Vec<_> = std::fs::read_dir(&group)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "data"))
            .collect();
        data.sort();
        for path in data {
            let mut fields = HashMap::new();
            let name = group.file_name().unwrap_or_default().to_string_lossy().into_owned();
            fields.insert("group".to_string(), name);
            fields.insert(
                "text".to_string(),
                decode(std::fs::read(&path)?, latin1, &path)?.trim().to_string(),
            );
            let meta = path.with_extension("meta");
            if meta.exists() {
                for line in decode(std::fs::read(&meta)?, latin1, &meta)?.lines() {
                    if let Some((k, v)) = line.split_once('=') {
                        fields.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
            }
            rows.push(Row {
                line: rows.len() + 1,
                fields,
            });
        }
    }
    Ok(rows)
}

fn read_rows(config: &AdapterConfig, path: &Path) -> Result<Vec<Row>, IngestError> {
    if config.format == RawFormat::MetaDirectory {
        return read_meta_directory(path, config.latin1);
    }
    let text = decode(std::fs::read(path)?, config.latin1, path)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    match config.format {
        RawFormat::Csv => read_delimited(path, text, b',', config.has_header),
        RawFormat::Tsv => read_delimited(path, text, b'\t', config.has_header),
        RawFormat::Jsonl => read_jsonl_rows(path, text),
        RawFormat::MetaDirectory => unreachable!(),
    }
}

fn field<'a>(row: &'a Row, column: &str, path: &Path, delimited: bool) -> Result<&'a str, IngestError> {
    match row.fields.get(column) {
        Some(v) => Ok(v.trim()),
        None if delimited => Err(IngestError::MissingColumn {
            path: path.display().to_string(),
            column: column.to_string(),
        }),
        None => Err(IngestError::Malformed {
            path: path.display().to_string(),
            line: row.line,
            message: format!("missing field `{column}`"),
        }),
    }
}

/// Reads every raw file listed in `config` from `raw_dir` into validated
/// records. Rows whose label is in `drop_labels` are skipped. Ids are derived
/// from the file path and row position, so they survive re-splitting.
pub fn normalize(config: &AdapterConfig, raw_dir: &Path) -> Result<Vec<StanceRecord>, IngestError> {
    let scheme = builtin_scheme(config.dataset);
    let delimited = matches!(config.format, RawFormat::Csv | RawFormat::Tsv);
    let mut out = Vec::new();
    for file in &config.files {
        let path = raw_dir.join(&file.path);
        let rows = read_rows(config, &path)?;
        if rows.is_empty() {
            log::warn!("{}: no rows", path.display());
            continue;
        }
        let joined: Option<(HashMap<String, String>, &JoinSpec)> = match (&config.join, &file.join) {
            (Some(spec), Some(join_path)) => {
                let jpath = raw_dir.join(join_path);
                let mut map = HashMap::new();
                for row in read_rows(config, &jpath)? {
                    let key = field(&row, &spec.key, &jpath, delimited)?.to_string();
                    map.insert(key, field(&row, &spec.value, &jpath, delimited)?.to_string());
                }
                Some((map, spec))
            }
            _ => None,
        };

        for (index, row) in rows.iter().enumerate() {
            let malformed = |message: String| IngestError::Malformed {
                path: path.display().to_string(),
                line: row.line,
                message,
            };
            let mut label = field(row, &config.columns.label, &path, delimited)?.to_string();
            if config.lowercase_labels {
                label = label.to_lowercase();
            }
            if config.drop_labels.contains(&label) {
                continue;
            }
            if let Some(mapped) = config.label_map.get(&label) {
                label = mapped.clone();
            }
            if config.drop_labels.contains(&label) {
                continue;
            }

            let mut topic = match &config.columns.topic {
                Some(c) => Some(field(row, c, &path, delimited)?.to_string()),
                None => None,
            };
            let mut comment = match &config.columns.comment {
                Some(c) => Some(field(row, c, &path, delimited)?.to_string()),
                None => None,
            };
            if let Some((map, spec)) = &joined {
                let key = field(row, &spec.key, &path, delimited)?;
                let value = map
                    .get(key)
                    .ok_or_else(|| malformed(format!("no joined row for key `{key}`")))?;
                match spec.target {
                    JoinTarget::Topic => topic = Some(value.clone()),
                    JoinTarget::Comment => comment = Some(value.clone()),
                }
            }

            let published = match (&file.split, &config.columns.split) {
                (Some(s), _) => Some(*s),
                (None, Some(c)) => Some(
                    field(row, c, &path, delimited)?
                        .to_lowercase()
                        .parse::<Split>()
                        .map_err(|e| malformed(e.to_string()))?,
                ),
                (None, None) => None,
            };

            let mut record = StanceRecord {
                id: record_id(config.dataset, &file.path, index),
                dataset: config.dataset,
                split: published.unwrap_or(Split::Train),
                topic,
                comment: comment.unwrap_or_default(),
                gold: label,
                meta: BTreeMap::new(),
            };
            record.meta.insert("origin".into(), file.path.clone());
            record.meta.insert("line".into(), row.line.to_string());
            if let Some(s) = published {
                record.meta.insert("published_split".into(), s.as_str().into());
            }
            if let Some(g) = &config.columns.group {
                record
                    .meta
                    .insert("group".into(), field(row, g, &path, delimited)?.to_string());
            }
            let violations = validate_record(&record, &scheme)?;
            if let Some(v) = violations.first() {
                return Err(IngestError::Invalid {
                    path: path.display().to_string(),
                    line: row.line,
                    message: v.to_string(),
                });
            }
            out.push(record);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_adapters_parse() {
        for d in DatasetKey::ALL {
            assert_eq!(builtin_adapter(d).dataset, d);
        }
    }

    #[test]
    fn fnc1_join_and_argmin_drop() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(
            p.join("train_stances.csv"),
            "Headline,Body ID,Stance\nPope dies,1,agree\nPope lives,2,unrelated\n",
        )
        .unwrap();
        std::fs::write(
            p.join("train_bodies.csv"),
            "Body ID,articleBody\n1,\"The pope, sadly, died.\"\n2,Cats are nice.\n",
        )
        .unwrap();
        let config = AdapterConfig::from_toml(
            r#"
dataset = "fnc1"
format = "csv"
columns = { topic = "Headline", label = "Stance" }
join = { key = "Body ID", value = "articleBody", target = "comment" }
files = [{ path = "train_stances.csv", split = "train", join = "train_bodies.csv" }]
split = { rule = "published" }
"#,
        )
        .unwrap();
        let records = normalize(&config, p).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].topic.as_deref(), Some("Pope dies"));
        assert_eq!(records[0].comment, "The pope, sadly, died.");
        assert_eq!(records[0].meta["published_split"], "train");

        std::fs::write(
            p.join("a.tsv"),
            "topic\tsentence\tannotation\nabortion\tIt is wrong.\tArgument_against\nabortion\tThe sky.\tNoArgument\n",
        )
        .unwrap();
        let config = AdapterConfig::from_toml(
            r#"
dataset = "argmin"
format = "tsv"
columns = { topic = "topic", comment = "sentence", label = "annotation" }
label_map = { Argument_against = "argument_against", Argument_for = "argument_for" }
drop_labels = ["NoArgument"]
files = [{ path = "a.tsv" }]
split = { rule = "published" }
"#,
        )
        .unwrap();
        let records = normalize(&config, p).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].gold, "argument_against");
    }

    #[test]
    fn errors_carry_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        std::fs::write(p.join("s.csv"), "claim,text,stance\nc,ok,PRO\nc,,PRO\n").unwrap();
        let base = r#"
dataset = "ibmcs"
format = "csv"
lowercase_labels = true
label_map = { pro = "pro", con = "con" }
files = [{ path = "s.csv", split = "train" }]
split = { rule = "published" }
"#;
        let config = AdapterConfig::from_toml(&format!(
            "{base}columns = {{ topic = \"claim\", comment = \"text\", label = \"stance\" }}"
        ))
        .unwrap();
        let err = normalize(&config, p).unwrap_err();
        assert!(matches!(err, IngestError::Invalid { line: 3, .. }), "{err}");

        let config = AdapterConfig::from_toml(&format!(
            "{base}columns = {{ topic = \"claim\", comment = \"body\", label = \"stance\" }}"
        ))
        .unwrap();
        assert!(matches!(normalize(&config, p), Err(IngestError::MissingColumn { .. })));

        std::fs::write(p.join("s.csv"), "").unwrap();
        let config = AdapterConfig::from_toml(&format!(
            "{base}columns = {{ topic = \"claim\", comment = \"text\", label = \"stance\" }}"
        ))
        .unwrap();
        assert!(normalize(&config, p).unwrap().is_empty());
    }

    #[test]
    fn meta_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let topic = dir.path().join("raw").join("obama");
        std::fs::create_dir_all(&topic).unwrap();
        std::fs::write(topic.join("A1.data"), "He did well.\n").unwrap();
        std::fs::write(topic.join("A1.meta"), "ID=1\nStance=+1\n").unwrap();
        std::fs::write(topic.join("A2.data"), "He did not.\n").unwrap();
        std::fs::write(topic.join("A2.meta"), "ID=2\nStance=-1\n").unwrap();
        let config = builtin_adapter(DatasetKey::Scd);
        let config = AdapterConfig {
            files: vec![RawFile {
                path: "raw".into(),
                split: None,
                join: None,
            }],
            ..config
        };
        let records = normalize(&config, dir.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].gold, "for");
        assert_eq!(records[1].gold, "against");
        assert_eq!(records[0].meta["group"], "obama");
        assert_eq!(records[0].topic, None);
    }
}
