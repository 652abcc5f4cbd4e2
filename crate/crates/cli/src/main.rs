use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    blockbench_cli::run_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock()).into()
}
