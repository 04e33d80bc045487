use std::io;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let code = equipart::cli::main_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
