//! JSON Lines dataset files: one conversation tree per line.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{ConversationTree, Label, Tweet};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawTree {
    tree_id: String,
    event: String,
    label: String,
    tweets: Vec<Tweet>,
}

#[derive(Serialize)]
struct TreeOut<'a> {
    tree_id: &'a str,
    event: &'a str,
    label: Label,
    tweets: &'a [Tweet],
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ConversationTree>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file)
}

pub fn read_dataset(reader: impl Read) -> Result<Vec<ConversationTree>> {
    let mut trees = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        trees.push(parse_line(&line, n + 1)?);
    }
    Ok(trees)
}

pub fn parse_dataset(text: &str) -> Result<Vec<ConversationTree>> {
    read_dataset(text.as_bytes())
}

fn parse_line(line: &str, line_no: usize) -> Result<ConversationTree> {
    let raw: RawTree = serde_json::from_str(line).map_err(|e| {
        // Name the tree if the id is recoverable from a partially valid line.
        let tree_id = serde_json::from_str::<serde_json::Value>(line)
            .ok()
            .and_then(|v| v.get("tree_id").and_then(|t| t.as_str()).map(str::to_owned))
            .unwrap_or_else(|| format!("<line {line_no}>"));
        Error::Parse { tree_id, message: e.to_string() }
    })?;
    let label: Label = raw.label.parse().map_err(|_| Error::Parse {
        tree_id: raw.tree_id.clone(),
        message: format!("unknown label {:?}", raw.label),
    })?;
    ConversationTree::new(raw.tree_id, raw.event, label, raw.tweets)
}

pub fn write_dataset(trees: &[ConversationTree], mut writer: impl Write) -> Result<()> {
    for t in trees {
        let out = TreeOut { tree_id: &t.tree_id, event: &t.event, label: t.label, tweets: &t.tweets };
        serde_json::to_writer(&mut writer, &out)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(trees: &[ConversationTree]) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset(trees, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
