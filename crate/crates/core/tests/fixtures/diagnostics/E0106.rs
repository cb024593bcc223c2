struct Reader {
    buf: &str,
}

fn main() {
    let r = Reader { buf: "x" };
    println!("{}", r.buf);
}
