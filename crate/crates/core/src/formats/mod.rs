//! On-disk formats: the binary model bundle and `.cube` text LUTs.

mod bundle;
mod cube;

pub use bundle::{decode_bundle, encode_bundle, load_bundle, save_bundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use cube::{parse_cube, read_cube, to_cube_string, write_cube};
