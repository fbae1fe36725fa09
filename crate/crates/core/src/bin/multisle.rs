fn main() {
    // placeholder until the CLI module lands
    eprintln!("multisle: CLI not yet wired up");
    std::process::exit(2);
}
