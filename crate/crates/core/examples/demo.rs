//! Run the whole offline pipeline on the bundled fixture. Outputs go to `target/florafill-demo/`.

use std::path::Path;

use florafill::pipeline::{run_command, Command};

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/demo.json");
    match run_command(Command::Demo, &config, None, true) {
        Ok(summary) => print!("{summary}"),
        Err(e) => {
            eprintln!("demo failed: {e}");
            std::process::exit(1);
        }
    }
}
