fn main() {
    std::process::exit(freqsynth::cli::run(std::env::args()));
}
