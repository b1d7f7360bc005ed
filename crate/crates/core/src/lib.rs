pub mod crypto;
pub mod trips;
pub mod zksm;
pub mod contracts;
pub mod ledger;
pub mod matching;
pub mod agents;
pub mod scenario;
pub mod report;
pub mod bench;
