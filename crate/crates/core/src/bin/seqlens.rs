fn main() {
    seqlens::cli::main();
}
