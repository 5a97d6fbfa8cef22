fn main() {
    relu_forge::cli::main()
}
