pub mod oracle;
pub mod vcce_fixture;
