fn main() {
    let limit = 10;
    fn below(x: i32) -> bool {
        x < limit
    }
    println!("{}", below(3));
}
