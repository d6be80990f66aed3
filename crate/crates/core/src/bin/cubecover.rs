use std::io::Read;

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let needs_stdin = !argv.iter().any(|a| a == "--input" || a.starts_with("--input="))
        && !argv.iter().any(|a| matches!(a.as_str(), "construct-lr" | "bounds" | "--help" | "-h" | "help" | "--version" | "-V"));
    let mut stdin = String::new();
    if needs_stdin {
        if let Err(e) = std::io::stdin().read_to_string(&mut stdin) {
            eprintln!("error: cannot read standard input: {e}");
            std::process::exit(3);
        }
    }
    let out = cubecover::cli::run_command(&argv, &stdin);
    print!("{}", out.stdout);
    if !out.stdout.is_empty() && !out.stdout.ends_with('\n') {
        println!();
    }
    eprint!("{}", out.stderr);
    std::process::exit(out.exit_code);
}
