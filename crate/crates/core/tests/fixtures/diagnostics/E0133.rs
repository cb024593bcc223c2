fn main() {
    let v = 5;
    let p = &v as *const i32;
    println!("{}", *p);
}
