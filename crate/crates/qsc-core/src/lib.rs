pub mod criteria;
pub mod dutchbook;
pub mod linalg;
pub mod oracle;
pub mod povm;
pub mod pp3;
pub mod states;
pub mod verdict;
