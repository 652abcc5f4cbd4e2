//! Workspaces of block definitions and extension-chain resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::check::{check_block, check_block_against, DefinitionIssue};
use crate::meta::{
    BuildingBlock, ConstraintSpec, DocEntry, ElementKind, MethodSpec, MethodStep, NuanceSpec,
};
use crate::syntax::parse_block;

pub const BLOCK_EXTENSION: &str = "dslbb";

/// A building block with its ancestors merged in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveBlock {
    pub name: String,
    /// Root ancestor first, this block last.
    pub lineage: Vec<String>,
    pub elements: Vec<ElementKind>,
    pub constraints: Vec<ConstraintSpec>,
    pub method: MethodSpec,
    pub nuances: Vec<NuanceSpec>,
    pub docs: Vec<DocEntry>,
}

impl EffectiveBlock {
    /// The effective view of a block without a parent.
    pub fn standalone(block: &BuildingBlock) -> Self {
        EffectiveBlock {
            name: block.name.clone(),
            lineage: vec![block.name.clone()],
            elements: block.elements.clone(),
            constraints: block.constraints.clone(),
            method: block.method.clone(),
            nuances: block.nuances.clone(),
            docs: block.docs.clone(),
        }
    }

    pub fn parent(&self) -> Option<&str> {
        self.lineage.iter().rev().nth(1).map(String::as_str)
    }

    pub fn kind(&self, name: &str) -> Option<&ElementKind> {
        self.elements.iter().find(|k| k.name == name)
    }

    pub fn constraint(&self, id: &str) -> Option<&ConstraintSpec> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn nuance(&self, id: &str) -> Option<&NuanceSpec> {
        self.nuances.iter().find(|n| n.id == id)
    }

    pub fn step(&self, id: &str) -> Option<&MethodStep> {
        self.method.steps.iter().find(|s| s.id == id)
    }

    /// Layers `child` over this block: entries with a known id are replaced
    /// in place, new ones are appended.
    fn overlay(mut self, child: &BuildingBlock) -> Self {
        merge_by(&mut self.elements, &child.elements, |e| e.name.clone());
        merge_by(&mut self.constraints, &child.constraints, |c| c.id.clone());
        merge_by(&mut self.method.steps, &child.method.steps, |s| s.id.clone());
        merge_by(&mut self.nuances, &child.nuances, |n| n.id.clone());
        merge_by(&mut self.docs, &child.docs, DocEntry::key);
        self.name = child.name.clone();
        self.lineage.push(child.name.clone());
        self
    }
}

fn merge_by<T: Clone, K: PartialEq>(base: &mut Vec<T>, overrides: &[T], key: impl Fn(&T) -> K) {
    for item in overrides {
        let k = key(item);
        match base.iter_mut().find(|b| key(b) == k) {
            Some(slot) => *slot = item.clone(),
            None => base.push(item.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown block '{0}'")]
    UnknownBlock(String),
    #[error("block '{block}' extends unknown block '{parent}'")]
    UnknownParent { block: String, parent: String },
    #[error("extension cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

#[derive(Debug, Error)]
#[error("cannot read workspace {path}: {source}")]
pub struct WorkspaceError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub root_dir: PathBuf,
    pub blocks: BTreeMap<String, BuildingBlock>,
    pub load_issues: Vec<DefinitionIssue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockSummary {
    pub name: String,
    pub parent: Option<String>,
    pub elements: usize,
    pub constraints: usize,
    pub nuances: usize,
}

impl Workspace {
    pub fn from_blocks(blocks: impl IntoIterator<Item = BuildingBlock>) -> Self {
        let mut ws = Workspace::default();
        for b in blocks {
            ws.blocks.entry(b.name.clone()).or_insert(b);
        }
        ws
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root_dir.join("models")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root_dir.join("sessions")
    }

    pub fn resolve(&self, name: &str) -> Result<EffectiveBlock, ResolveError> {
        let mut chain: Vec<&BuildingBlock> = Vec::new();
        let mut current = self.blocks.get(name).ok_or_else(|| ResolveError::UnknownBlock(name.to_string()))?;
        loop {
            if let Some(pos) = chain.iter().position(|b| b.name == current.name) {
                let mut cycle: Vec<String> = chain[pos..].iter().map(|b| b.name.clone()).collect();
                cycle.push(current.name.clone());
                return Err(ResolveError::Cycle(cycle));
            }
            chain.push(current);
            match &current.extends {
                None => break,
                Some(parent) => {
                    current = self.blocks.get(parent).ok_or_else(|| ResolveError::UnknownParent {
                        block: current.name.clone(),
                        parent: parent.clone(),
                    })?;
                }
            }
        }
        let mut blocks = chain.into_iter().rev();
        let root = blocks.next().expect("chain holds at least the requested block");
        Ok(blocks.fold(EffectiveBlock::standalone(root), |eff, child| eff.overlay(child)))
    }

    /// Sorted by name; blocks that fail to resolve are listed with zero
    /// counts.
    pub fn list_blocks(&self) -> Vec<BlockSummary> {
        self.blocks
            .values()
            .map(|b| {
                let eff = self.resolve(&b.name).ok();
                BlockSummary {
                    name: b.name.clone(),
                    parent: b.extends.clone(),
                    elements: eff.as_ref().map_or(0, |e| e.elements.len()),
                    constraints: eff.as_ref().map_or(0, |e| e.constraints.len()),
                    nuances: eff.as_ref().map_or(0, |e| e.nuances.len()),
                }
            })
            .collect()
    }
}

/// Loads every `*.dslbb` file directly inside `root` (or below it, when
/// `recursive`). Only a failure to read `root` itself is fatal; per-file
/// problems become load issues.
pub fn load_workspace(root: &Path, recursive: bool) -> Result<Workspace, WorkspaceError> {
    let mut files = Vec::new();
    collect_block_files(root, recursive, &mut files)
        .map_err(|source| WorkspaceError { path: root.to_path_buf(), source })?;
    files.sort();

    let mut ws = Workspace { root_dir: root.to_path_buf(), ..Default::default() };
    let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
    for file in files {
        let bytes = match std::fs::read(&file) {
            Ok(b) => b,
            Err(e) => {
                ws.load_issues.push(DefinitionIssue::in_file(&file, format!("cannot read file: {e}")));
                continue;
            }
        };
        let text = match std::str::from_utf8(&bytes) {
            Ok(t) => t,
            Err(_) => {
                ws.load_issues.push(DefinitionIssue::in_file(&file, "input is not valid UTF-8"));
                continue;
            }
        };
        let block = match parse_block(text) {
            Ok(b) => b,
            Err(errors) => {
                ws.load_issues.extend(errors.into_iter().map(|e| DefinitionIssue::parse(e.with_file(&file))));
                continue;
            }
        };
        if let Some(first) = origin.get(&block.name) {
            ws.load_issues.push(DefinitionIssue::in_file(
                &file,
                format!("block '{}' is already defined in {}", block.name, first.display()),
            ));
            continue;
        }
        origin.insert(block.name.clone(), file);
        ws.blocks.insert(block.name.clone(), block);
    }

    for (name, block) in &ws.blocks {
        let file = &origin[name];
        let issues = match (&block.extends, ws.resolve(name)) {
            (None, _) => check_block(block),
            (Some(_), Ok(eff)) => {
                let mut issues = check_block_against(block, Some(&eff.elements));
                if eff.method.steps.is_empty() {
                    issues.push(
                        DefinitionIssue::in_file(file, "the method needs at least one step").for_block(name),
                    );
                }
                issues
            }
            (Some(_), Err(e)) => {
                let mut issues = check_block(block);
                issues.push(DefinitionIssue::in_file(file, e.to_string()).for_block(name));
                issues
            }
        };
        ws.load_issues.extend(issues.into_iter().map(|i| i.with_file(file)));
    }
    Ok(ws)
}

fn collect_block_files(dir: &Path, recursive: bool, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            if recursive {
                collect_block_files(&path, true, out)?;
            }
        } else if path.extension().is_some_and(|e| e == BLOCK_EXTENSION) {
            out.push(path);
        }
    }
    Ok(())
}
