use std::io::Write;
use std::panic::{self, AssertUnwindSafe};

use targetscope_cli::{run, EXIT_INTERNAL};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut out = stdout.lock();
        let mut err = stderr.lock();
        let code = run(std::env::args_os(), &mut out, &mut err);
        let _ = out.flush();
        code
    }))
    .unwrap_or(EXIT_INTERNAL);
    std::process::exit(code);
}
