use std::io::Write;

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("PAIRSOLVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() {
    configure_threads();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = pairsolve::cli::run_from(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
