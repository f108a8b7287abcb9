fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(bernoulli_phase::cli::run(&args));
}
