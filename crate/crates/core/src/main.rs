use std::io::Write;

fn main() {
    let (code, out, err) = twistlab::cli::run(std::env::args().skip(1));
    let _ = std::io::stdout().write_all(out.as_bytes());
    let _ = std::io::stderr().write_all(err.as_bytes());
    std::process::exit(code);
}
