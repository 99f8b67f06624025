//! Readers and writers for the canonical delimited file formats.
//!
//! | file        | header                                   |
//! |-------------|------------------------------------------|
//! | scores      | `identity_a,identity_b,score,is_genuine` |
//! | embeddings  | `identity_id,d0,d1,...`                  |
//! | group map   | `identity_id,group`                      |
//! | plot series | `tau,metric,scope,value`                 |
//!
//! Floats are written in shortest round-trip form, so a score file read back
//! reproduces the original values bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grouping::GroupPartition;
use crate::verification::{Embedding, LabeledScore};

pub const SCORE_HEADER: [&str; 4] = ["identity_a", "identity_b", "score", "is_genuine"];
pub const GROUP_MAP_HEADER: [&str; 2] = ["identity_id", "group"];
pub const PLOT_HEADER: [&str; 4] = ["tau", "metric", "scope", "value"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: format!("cannot write: {e}"),
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn csv(&self, e: csv::Error) -> Error {
        let line = e.position().map_or(0, |p| p.line());
        self.err(line, e.to_string())
    }

    fn header<R: Read>(&self, rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
        Ok(rdr
            .headers()
            .map_err(|e| self.csv(e))?
            .iter()
            .map(str::to_string)
            .collect())
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<LabeledScore>> {
    let path = path.as_ref();
    parse_scores(open(path)?, path)
}

/// Parses score-file content; `path` only labels error messages.
pub fn parse_scores<R: Read>(input: R, path: &Path) -> Result<Vec<LabeledScore>> {
    let ctx = Ctx { path };
    let mut rdr = reader(input);
    let header = ctx.header(&mut rdr)?;
    if header != SCORE_HEADER {
        return Err(ctx.err(
            1,
            format!(
                "unknown header {header:?}, expected `{}`",
                SCORE_HEADER.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        if rec.len() != 4 {
            return Err(ctx.err(line, format!("expected 4 fields, found {}", rec.len())));
        }
        let score: f64 = rec[2]
            .parse()
            .map_err(|_| ctx.err(line, format!("score `{}` is not a number", &rec[2])))?;
        if !score.is_finite() || !(-1.0..=1.0).contains(&score) {
            return Err(ctx.err(line, format!("score {} is outside [-1, 1]", &rec[2])));
        }
        let is_genuine = match &rec[3] {
            "1" => true,
            "0" => false,
            other => return Err(ctx.err(line, format!("is_genuine must be 0 or 1, got `{other}`"))),
        };
        let s = LabeledScore::new(&rec[0], &rec[1], score, is_genuine)
            .map_err(|e| ctx.err(line, e.to_string()))?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(ctx.err(1, "no records"));
    }
    Ok(out)
}

pub fn write_scores(path: impl AsRef<Path>, scores: &[LabeledScore]) -> Result<()> {
    let path = path.as_ref();
    let mut f = create(path)?;
    f.write_all(scores_to_string(scores).as_bytes())?;
    Ok(())
}

pub fn scores_to_string(scores: &[LabeledScore]) -> String {
    let mut out = SCORE_HEADER.join(",");
    out.push('\n');
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&s.identity_a),
            csv_field(&s.identity_b),
            s.score,
            u8::from(s.is_genuine)
        ));
    }
    out
}

/// Quotes a field when it contains a delimiter, quote or line break.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s != s.trim() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    let path = path.as_ref();
    parse_embeddings(open(path)?, path)
}

pub fn parse_embeddings<R: Read>(input: R, path: &Path) -> Result<Vec<Embedding>> {
    let ctx = Ctx { path };
    let mut rdr = reader(input);
    let header = ctx.header(&mut rdr)?;
    if header.first().map(String::as_str) != Some("identity_id") || header.len() < 2 {
        return Err(ctx.err(1, "expected header `identity_id,d0,d1,...`"));
    }
    let dim = header.len() - 1;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        let id = rec.get(0).unwrap_or_default().to_string();
        if rec.len() != dim + 1 {
            return Err(ctx.err(
                line,
                format!(
                    "record `{id}` has dimension {}, expected {dim}",
                    rec.len().saturating_sub(1)
                ),
            ));
        }
        let vector = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, v)| {
                let x: f64 = v.parse().map_err(|_| {
                    ctx.err(
                        line,
                        format!("record `{id}`: component d{j} `{v}` is not a number"),
                    )
                })?;
                if !x.is_finite() {
                    return Err(
                        ctx.err(line, format!("record `{id}`: component d{j} is non-finite"))
                    );
                }
                Ok(x)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(Embedding::new(id, vector).map_err(|e| ctx.err(line, e.to_string()))?);
    }
    if out.is_empty() {
        return Err(ctx.err(1, "no records"));
    }
    Ok(out)
}

pub fn read_group_map(path: impl AsRef<Path>) -> Result<GroupPartition> {
    let path = path.as_ref();
    let name = format!(
        "map:{}",
        path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned()
        )
    );
    parse_group_map(open(path)?, path, &name)
}

pub fn parse_group_map<R: Read>(input: R, path: &Path, name: &str) -> Result<GroupPartition> {
    let ctx = Ctx { path };
    let mut rdr = reader(input);
    let header = ctx.header(&mut rdr)?;
    if header != GROUP_MAP_HEADER {
        return Err(ctx.err(
            1,
            format!(
                "unknown header {header:?}, expected `{}`",
                GROUP_MAP_HEADER.join(",")
            ),
        ));
    }
    let mut assigned: BTreeMap<String, (String, u64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        if rec.len() != 2 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(ctx.err(
                line,
                "expected `identity_id,group` with both fields non-empty",
            ));
        }
        let (id, group) = (rec[0].to_string(), rec[1].to_string());
        if let Some((prev, prev_line)) = assigned.get(&id) {
            if *prev != group {
                return Err(ctx.err(
                    line,
                    format!("identity `{id}` mapped to `{group}` but line {prev_line} maps it to `{prev}`"),
                ));
            }
            continue;
        }
        assigned.insert(id, (group, line));
    }
    if assigned.is_empty() {
        return Err(ctx.err(1, "empty mapping"));
    }
    let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (id, (g, _)) in assigned {
        groups.entry(g).or_default().insert(id);
    }
    GroupPartition::new(name, groups)
}

pub fn write_group_map(path: impl AsRef<Path>, partition: &GroupPartition) -> Result<()> {
    let mut out = GROUP_MAP_HEADER.join(",");
    out.push('\n');
    for g in partition.groups() {
        for id in &g.members {
            out.push_str(&format!("{},{}\n", csv_field(id), csv_field(&g.label)));
        }
    }
    create(path.as_ref())?.write_all(out.as_bytes())?;
    Ok(())
}
