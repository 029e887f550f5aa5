fn main() {
    println!("relband");
}
