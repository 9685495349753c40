// The command-line front end, driven in-process.

use polypick::cli::run;

pub fn run_example() -> polypick::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data");
    for args in [
        vec!["pick", "classify", "degenerate.json"],
        vec!["pick", "solve", "schwarz_violation.json"],
        vec!["vn", "ratio", "diagonal_tuple.json", "poly_2var.json"],
    ] {
        let mut argv = vec!["polypick".to_string()];
        argv.extend(args.iter().map(|a| if a.ends_with(".json") { format!("{data}/{a}") } else { a.to_string() }));
        let out = run(argv);
        println!("{} → exit {}", args.join(" "), out.code);
        println!("{}", out.stdout.chars().take(120).collect::<String>());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
