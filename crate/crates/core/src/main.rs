use clap::Parser;
use floquet_msf::cli;

fn main() {
    let parsed = match cli::Cli::try_parse() {
        Ok(p) => p,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = cli::run(&parsed) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
