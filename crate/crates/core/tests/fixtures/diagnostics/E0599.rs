fn main() {
    let n: i32 = 42;
    println!("{}", n.length());
}
