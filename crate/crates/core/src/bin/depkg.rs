use std::io::{stderr, stdin, stdout};

fn main() {
    let env = |key: &str| std::env::var(key).ok();
    let code = depkg::cli::run(
        std::env::args_os(),
        &env,
        depkg::cli::Io {
            stdin: &mut stdin().lock(),
            stdout: &mut stdout().lock(),
            stderr: &mut stderr().lock(),
        },
    );
    std::process::exit(code);
}
