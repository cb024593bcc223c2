fn main() {
    let mut value = 5;
    let r = &value;
    value = 6;
    println!("{}", r);
}
