pub mod agreement;
pub mod corpus;
pub mod corruption;
pub mod gec;
pub mod hashing;
pub mod irc;
pub mod lm;
pub mod metric;
pub mod pairs;
pub mod text;
