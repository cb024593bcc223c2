struct Pair {
    a: i32,
}

fn main() {
    let p = Pair { a: 1 };
    println!("{}", p.b);
}
