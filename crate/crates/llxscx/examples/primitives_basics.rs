//! The three primitives on bare records: snapshots, conditional stores,
//! validation, conflicts, and finalization.
//!
//! Run with: cargo run --release --example primitives_basics

use std::sync::Arc;

use llxscx::{Domain, Field, FieldKind, FieldRef, LlxResult, RecordSchema, Word};

fn main() {
    let domain = Domain::new();
    let schema = Arc::new(RecordSchema::new(vec![FieldKind::Value], vec![]));
    let rec = domain.new_record(&schema, &[Word::Value(10)], &[]);
    let fld = FieldRef {
        record: rec,
        field: 0,
    };

    let mut p1 = domain.process();
    let mut p2 = domain.process();

    // An llx snapshot links the record to a later scx by the same process.
    let snap = p1.llx(rec).snapshot().expect("fresh record snapshots");
    assert_eq!(snap.value(0), 10);
    assert!(p1.scx(&[rec], &[], fld, Word::Value(11)));
    assert_eq!(p1.read_field(rec, Field::Mutable(0)), Word::Value(11));
    println!("scx after clean llx: applied, field now 11");

    // Two processes race from the same snapshot; the loser's scx returns
    // false because the record changed after its linked llx.
    let s1 = p1.llx(rec).snapshot().expect("snapshot");
    let s2 = p2.llx(rec).snapshot().expect("snapshot");
    assert_eq!((s1.value(0), s2.value(0)), (11, 11));
    assert!(p1.scx(&[rec], &[], fld, Word::Value(12)));
    assert!(!p2.scx(&[rec], &[], fld, Word::Value(13)));
    assert_eq!(p1.read_field(rec, Field::Mutable(0)), Word::Value(12));
    println!("racing scx: first applied, second refused, field now 12");

    // vlx revalidates a set of linked llx results without writing anything.
    let other = domain.new_record(&schema, &[Word::Value(0)], &[]);
    let other_fld = FieldRef {
        record: other,
        field: 0,
    };
    assert!(p1.llx(rec).is_snapshot());
    assert!(p1.llx(other).is_snapshot());
    assert!(p1.vlx(&[rec, other]));
    assert!(p1.llx(rec).is_snapshot());
    assert!(p1.llx(other).is_snapshot());
    assert!(p2.llx(other).is_snapshot());
    assert!(p2.scx(&[other], &[], other_fld, Word::Value(1)));
    assert!(!p1.vlx(&[rec, other]));
    println!("vlx: true while untouched, false once a record changed");

    // An scx can finalize records: they are permanently retired and every
    // later llx reports it.
    assert!(p1.llx(rec).is_snapshot());
    assert!(p1.scx(&[rec], &[rec], fld, Word::Value(99)));
    assert!(matches!(p1.llx(rec), LlxResult::Finalized));
    assert!(matches!(p2.llx(rec), LlxResult::Finalized));
    println!("finalizing scx: record retired, llx reports finalized");
}
