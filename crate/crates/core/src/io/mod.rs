//! On-disk formats: WAV input, RFE1 weight archives, CSV matrices and
//! RFM1 binary features.

mod archive;
mod matrix;
mod wav;

pub use archive::{
    decode_archive, encode_archive, load_weights, save_weights, ArchiveHeader, TensorEntry, ARCHIVE_MAGIC,
    FORMAT_VERSION,
};
pub use matrix::{
    decode_feature_binary, encode_feature_binary, read_feature_binary, read_matrix_csv, write_feature_binary,
    write_matrix_csv, CsvMatrix, FEATURE_MAGIC,
};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};
