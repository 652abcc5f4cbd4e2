//! Core of the building-block workbench.
//!
//! A building block bundles a DSL's language (element kinds, attributes,
//! documentation), its method (constraints and guided steps) and its
//! nucleus (nuances: styling, auto-creation, violation markers). Blocks may
//! extend one parent, overriding entries by id. Models are graphs of typed
//! elements validated against the effective block and rendered to SVG.

pub mod catalog;
pub mod check;
pub mod docgen;
pub mod meta;
pub mod method;
pub mod model;
pub mod registry;
pub mod render;
pub mod store;
pub mod syntax;
pub mod validate;

pub use check::{check_block, check_block_against, DefinitionIssue};
pub use docgen::{doc_table, generate_docs, generate_method_doc, DocRow, DocTable};
pub use meta::{
    AttributeSpec, BuildingBlock, Clause, ConstraintKind, ConstraintSpec, DocEntry, ElementKind, Endpoints,
    Literal, MethodSpec, MethodStep, NuanceEffect, NuanceSpec, Params, PredicateKind, Role, Severity, ValueType,
};
pub use method::{advance, session_status, start_session, Advance, PredicateReport, Session, SessionError, SessionStatus};
pub use model::{apply, bind, conform_model, instantiate, ApplyError, BindError, ChangeOp, ChangeSet, Model, ModelElement};
pub use registry::{load_workspace, BlockSummary, EffectiveBlock, ResolveError, Workspace, WorkspaceError};
pub use render::{layout, render_model, render_svg, resolve_styles, Scene, StyleResolution};
pub use store::{ModelStore, SessionStore};
pub use syntax::{parse_block, parse_model, serialize_block, serialize_model, ParseError, SourceSpan};
pub use validate::{explain, reachable_set, validate, Diagnostic};
