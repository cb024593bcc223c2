fn main() {
    let n = "42".trim().parse().unwrap();
    println!("{}", n);
}
