fn main() {
    let count: usize = -1i32;
    println!("{}", count);
}
