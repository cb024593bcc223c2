use std::io::Read;
use std::process;

struct Node {
    key: i32,
    value: i32,
}

fn find(list: &[Node], key: i32) -> Option<&Node> {
    list.iter().find(|n| n.key == key)
}

fn main() {
    let list = [
        Node { key: 1, value: 10 },
        Node { key: 2, value: 20 },
        Node { key: 3, value: 30 },
    ];
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let key: i32 = input.trim().parse().unwrap();
    match find(&list, key) {
        Some(n) => println!("{}", n.value),
        None => {
            eprintln!("error: no entry with key {}", key);
            process::exit(1);
        }
    }
}
