fn main() {
    println!("hyp3f2 CLI placeholder");
}
