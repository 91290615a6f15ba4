//! The bundled example specs, one file each under `corpus/`.

pub const COUNT: &str = include_str!("../../../corpus/count.lt");
pub const SEQ_NAT: &str = include_str!("../../../corpus/seq-nat.lt");
pub const BIN2BIN: &str = include_str!("../../../corpus/bin2bin.lt");
pub const COUNT_LIST: &str = include_str!("../../../corpus/count-list.lt");
pub const COUNT_TWT: &str = include_str!("../../../corpus/count.twt");
pub const SEQ_NAT_TWT: &str = include_str!("../../../corpus/seq-nat.twt");
pub const BIN2UNARY_IPTT: &str = include_str!("../../../corpus/bin2unary.iptt");
pub const MIRROR_GLS: &str = include_str!("../../../corpus/mirror.gls");

/// λ-transducer specs by file stem.
pub const TRANSDUCERS: [(&str, &str); 4] =
    [("count", COUNT), ("seq-nat", SEQ_NAT), ("bin2bin", BIN2BIN), ("count-list", COUNT_LIST)];
