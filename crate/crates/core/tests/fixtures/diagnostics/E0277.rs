fn main() {
    let a: i32 = 3;
    let b: f64 = 2.5;
    println!("{}", a * b);
}
