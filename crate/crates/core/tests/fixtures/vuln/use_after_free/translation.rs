use std::io::Read;
use std::process;

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let mode: i32 = input.trim().parse().unwrap();
    let mut buf: Option<Vec<i32>> = Some((0..4).collect());
    if mode < 0 {
        buf = None;
    }
    match &buf {
        Some(b) => println!("{}", b[2]),
        None => {
            eprintln!("error: buffer already released");
            process::exit(1);
        }
    }
}
