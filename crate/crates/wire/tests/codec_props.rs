use std::io::Cursor;

use dalia_wire::codec::{decode, encode, Framing, Message, Request, Response};
use dalia_wire::ErrorObject;
use proptest::prelude::*;
use serde_json::{Map, Value};

fn json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(Value::from),
        ".{0,12}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (any::<i64>(), "[a-z]{1,8}/[a-z_]{1,12}", json())
            .prop_map(|(id, m, p)| Message::Request(Request::new(id, m, p))),
        (any::<i64>(), json()).prop_map(|(id, v)| Message::Response(Response::ok(id, v))),
        (proptest::option::of(any::<i64>()), any::<i64>(), ".{0,20}").prop_map(|(id, code, m)| {
            Message::Response(Response::err(id, ErrorObject::new(code, m)))
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn encode_decode_round_trip(m in message()) {
        prop_assert_eq!(decode(&encode(&m)).unwrap(), m);
    }

    #[test]
    fn both_framings_round_trip(ms in prop::collection::vec(message(), 1..6)) {
        for framing in [Framing::Lines, Framing::LengthPrefixed] {
            let mut buf = Vec::new();
            for m in &ms {
                framing.write(&mut buf, &encode(m)).unwrap();
            }
            let mut r = Cursor::new(buf);
            let mut back = Vec::new();
            while let Some(body) = framing.read(&mut r).unwrap() {
                back.push(decode(&body).unwrap());
            }
            prop_assert_eq!(&back, &ms);
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }
}
