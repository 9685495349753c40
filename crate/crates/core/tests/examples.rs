mod disc_automorphisms {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/disc_automorphisms.rs"));
}

#[test]
fn disc_automorphisms_runs() {
    disc_automorphisms::run_example().expect("disc_automorphisms example should run");
}

mod joint_spectrum {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/joint_spectrum.rs"));
}

#[test]
fn joint_spectrum_runs() {
    joint_spectrum::run_example().expect("joint_spectrum example should run");
}

mod torus_supremum {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/torus_supremum.rs"));
}

#[test]
fn torus_supremum_runs() {
    torus_supremum::run_example().expect("torus_supremum example should run");
}

mod classify_and_solve {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/classify_and_solve.rs"));
}

#[test]
fn classify_and_solve_runs() {
    classify_and_solve::run_example().expect("classify_and_solve example should run");
}

mod agler_certificate {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/agler_certificate.rs"));
}

#[test]
fn agler_certificate_runs() {
    agler_certificate::run_example().expect("agler_certificate example should run");
}

mod realize_solution {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/realize_solution.rs"));
}

#[test]
fn realize_solution_runs() {
    realize_solution::run_example().expect("realize_solution example should run");
}

mod certify_von_neumann {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/certify_von_neumann.rs"));
}

#[test]
fn certify_von_neumann_runs() {
    certify_von_neumann::run_example().expect("certify_von_neumann example should run");
}

mod random_search {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/random_search.rs"));
}

#[test]
fn random_search_runs() {
    random_search::run_example().expect("random_search example should run");
}

mod command_line {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/command_line.rs"));
}

#[test]
fn command_line_runs() {
    command_line::run_example().expect("command_line example should run");
}
