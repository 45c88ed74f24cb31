//! Basic multiset usage from one process: inserts accumulate counts,
//! deletes remove exact bundles or refuse, and the underlying chain stays
//! sorted with strictly positive counts.
//!
//! Run with: cargo run --release --example multiset_ops

use llxscx::{Domain, Multiset};

fn main() {
    let domain = Domain::new();
    let ms = Multiset::new(domain.clone());
    let mut p = domain.process();

    ms.insert(&mut p, 5, 2);
    ms.insert(&mut p, 3, 1);
    ms.insert(&mut p, 5, 1);
    assert_eq!(ms.get(&mut p, 5), 3);
    assert_eq!(ms.get(&mut p, 3), 1);
    assert_eq!(ms.get(&mut p, 4), 0);
    println!("after inserts: {:?}", ms.items(&mut p));

    assert!(ms.delete(&mut p, 5, 1));
    assert!(!ms.delete(&mut p, 5, 9));
    assert!(ms.delete(&mut p, 5, 2));
    assert_eq!(ms.get(&mut p, 5), 0);
    assert!(!ms.delete(&mut p, 5, 1));
    println!("after deletes: {:?}", ms.items(&mut p));

    ms.insert(&mut p, 8, 4);
    let items = ms.items(&mut p);
    assert_eq!(items, vec![(3, 1), (8, 4)]);
    let chain = ms.check_sorted_chain(&mut p).expect("chain invariant");
    assert_eq!(chain, items);
    println!("sorted chain verified: {:?}", chain);
}
