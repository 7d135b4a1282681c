pub mod oracle;
pub mod sphere;
