use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = smic_cli::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let stdout = std::io::stdout();
    match smic_cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast::<clap::Error>() {
            Ok(clap_err) => clap_err.exit(),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
