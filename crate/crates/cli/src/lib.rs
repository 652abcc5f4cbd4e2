//! The `blockbench` command line. [`run`] does the work against explicit
//! output streams so it can be driven from tests.

use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockbench_core::store::{self, LoadError};
use blockbench_core::validate::format_lines;
use blockbench_core::{
    explain, generate_docs, generate_method_doc, instantiate, load_workspace, render_model, validate, EffectiveBlock,
    Model, Workspace,
};
use clap::{Parser, Subcommand};

pub const WORKSPACE_ENV: &str = "BLOCKBENCH_WORKSPACE";

#[derive(Debug, Parser)]
#[command(name = "blockbench", version, about = "Define, validate, render and document DSL building blocks")]
pub struct Cli {
    /// Workspace directory holding *.dslbb blocks and models/.
    #[arg(long, short = 'w', global = true, env = WORKSPACE_ENV, default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model and print its diagnostics.
    Check {
        model: PathBuf,
        /// Follow each marked diagnostic with the nuance's reasoning.
        #[arg(long)]
        explain: bool,
    },
    /// Render a model to SVG.
    Render {
        model: PathBuf,
        /// Output file; `-` for stdout.
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Print a block's documentation as markdown.
    Docs {
        block: String,
        /// The method guide instead of the syntax table.
        #[arg(long)]
        method: bool,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Work with the workspace's blocks.
    Blocks {
        #[command(subcommand)]
        action: BlocksAction,
    },
    /// Create a model from a block's auto-create nuances.
    New {
        block: String,
        name: String,
        /// Where to write; defaults to the workspace's models/<name>.dslm.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Serve the HTTP API over the workspace.
    Serve {
        #[arg(long, short, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Origin allowed by CORS (repeatable; `*` for any).
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BlocksAction {
    /// One line per block with its effective counts.
    List,
}

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    /// The model has error-severity diagnostics.
    Diagnostics = 1,
    /// Parse errors, binding failures, unknown blocks.
    Input = 2,
    Io = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

/// A failure with its exit status; the message goes to stderr.
struct Failure(Status, String);

type Outcome = Result<Status, Failure>;

fn io_failure(what: &str, path: &Path, e: io::Error) -> Failure {
    Failure(Status::Io, format!("cannot {what} {}: {e}", path.display()))
}

fn open_workspace(dir: &Path, err: &mut dyn Write) -> Result<Workspace, Failure> {
    let ws = load_workspace(dir, false).map_err(|e| Failure(Status::Io, e.to_string()))?;
    for issue in &ws.load_issues {
        let _ = writeln!(err, "warning: {issue}");
    }
    Ok(ws)
}

fn resolve(ws: &Workspace, name: &str) -> Result<EffectiveBlock, Failure> {
    ws.resolve(name).map_err(|e| Failure(Status::Input, format!("{e} (workspace {})", ws.root_dir.display())))
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    store::load(path).map_err(|e| match e {
        LoadError::Io { path, source } => io_failure("read", &path, source),
        LoadError::Parse { errors, .. } => {
            Failure(Status::Input, errors.iter().map(|e| format!("error: {e}")).collect::<Vec<_>>().join("\n"))
        }
    })
}

fn emit(output: &Path, bytes: &[u8], out: &mut dyn Write) -> Result<(), Failure> {
    if output == Path::new("-") {
        out.write_all(bytes).map_err(|e| io_failure("write", Path::new("stdout"), e))
    } else {
        std::fs::write(output, bytes).map_err(|e| io_failure("write", output, e))
    }
}

fn check(ws: &Workspace, model: &Path, with_reasons: bool, out: &mut dyn Write) -> Outcome {
    let model = load_model(model)?;
    let block = resolve(ws, &model.block_name)?;
    let diagnostics = validate(&model, &block);
    let text = if with_reasons {
        diagnostics
            .iter()
            .map(|d| match explain(d, &block).split_once('\n') {
                Some((_, reason)) => format!("{d}\n  {reason}\n"),
                None => format!("{d}\n"),
            })
            .collect()
    } else {
        format_lines(&diagnostics)
    };
    emit(Path::new("-"), text.as_bytes(), out)?;
    Ok(if diagnostics.iter().any(|d| d.is_binding_failure()) {
        Status::Input
    } else if blockbench_core::validate::any_at_least(&diagnostics, blockbench_core::meta::Severity::Error) {
        Status::Diagnostics
    } else {
        Status::Ok
    })
}

fn render(ws: &Workspace, model: &Path, output: &Path, out: &mut dyn Write) -> Outcome {
    let model = load_model(model)?;
    let block = resolve(ws, &model.block_name)?;
    let svg = render_model(&model, &block).map_err(|e| Failure(Status::Input, format!("binding: {e}")))?;
    emit(output, svg.as_bytes(), out)?;
    Ok(Status::Ok)
}

fn docs(ws: &Workspace, name: &str, method: bool, output: &Path, out: &mut dyn Write) -> Outcome {
    let block = resolve(ws, name)?;
    let text = if method { generate_method_doc(&block) } else { generate_docs(&block) };
    emit(output, text.as_bytes(), out)?;
    Ok(Status::Ok)
}

fn list(ws: &Workspace, out: &mut dyn Write) -> Outcome {
    let mut text = String::from("NAME\tPARENT\tELEMENTS\tCONSTRAINTS\tNUANCES\n");
    for b in ws.list_blocks() {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            b.name,
            b.parent.as_deref().unwrap_or("-"),
            b.elements,
            b.constraints,
            b.nuances
        ));
    }
    emit(Path::new("-"), text.as_bytes(), out)?;
    Ok(Status::Ok)
}

fn new_model(ws: &Workspace, block: &str, name: &str, output: Option<&Path>, force: bool, out: &mut dyn Write) -> Outcome {
    if !store::is_valid_id(name) {
        return Err(Failure(Status::Input, format!("invalid model name '{name}'")));
    }
    let eff = resolve(ws, block)?;
    let model = instantiate(&eff, name).map_err(|e| Failure(Status::Input, e.to_string()))?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => ws.models_dir().join(format!("{name}.{}", store::MODEL_EXTENSION)),
    };
    if path.exists() && !force {
        return Err(Failure(Status::Io, format!("{} already exists (use --force to replace it)", path.display())));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_failure("create", parent, e))?;
    }
    std::fs::write(&path, blockbench_core::serialize_model(&model)).map_err(|e| io_failure("write", &path, e))?;
    emit(Path::new("-"), format!("{}\n", path.display()).as_bytes(), out)?;
    Ok(Status::Ok)
}

fn serve(dir: &Path, host: IpAddr, port: u16, cors_origins: Vec<String>, err: &mut dyn Write) -> Outcome {
    let config = blockbench_service::ServeConfig {
        workspace: dir.to_path_buf(),
        addr: SocketAddr::new(host, port),
        cors_origins,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure(Status::Io, format!("cannot start runtime: {e}")))?;
    let result = runtime.block_on(blockbench_service::serve(config, |addr| {
        eprintln!("listening on http://{addr}");
    }));
    match result {
        Ok(()) => {
            let _ = writeln!(err, "shut down");
            Ok(Status::Ok)
        }
        Err(blockbench_service::ServeError::Origin(o)) => Err(Failure(Status::Input, format!("invalid CORS origin '{o}'"))),
        Err(e) => Err(Failure(Status::Io, e.to_string())),
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Status {
    let outcome = (|| {
        if let Command::Serve { port, host, cors_origins } = cli.command {
            return serve(&cli.workspace, host, port, cors_origins, err);
        }
        let ws = open_workspace(&cli.workspace, err)?;
        match cli.command {
            Command::Check { model, explain } => check(&ws, &model, explain, out),
            Command::Render { model, output } => render(&ws, &model, &output, out),
            Command::Docs { block, method, output } => docs(&ws, &block, method, &output, out),
            Command::Blocks { action: BlocksAction::List } => list(&ws, out),
            Command::New { block, name, output, force } => new_model(&ws, &block, &name, output.as_deref(), force, out),
            Command::Serve { .. } => unreachable!("handled above"),
        }
    })();
    let _ = out.flush();
    match outcome {
        Ok(s) => s,
        Err(Failure(status, message)) => {
            let _ = writeln!(err, "{message}");
            status
        }
    }
}

/// Parses `args` (program name first) and runs them. Usage errors exit
/// with status 2, like other input errors.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Status
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            if help {
                let _ = write!(out, "{}", e.render());
                Status::Ok
            } else {
                let _ = write!(err, "{}", e.render());
                Status::Input
            }
        }
    }
}
