#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "prodmed/product.hpp"

namespace prodmed {

/// Observation files are CSV with one row per observation. An optional directive line
///   # geometry M=euclidean:2 N=spd:3
/// declares the factors; the header names the columns m_1..m_k, n_1..n_l. SPD factors
/// are stored as their upper triangle in row-major order. Without a directive every
/// factor is Euclidean with the dimension given by its column count; a file without
/// n_ columns describes single-factor data and gets a constant one-dimensional N factor.
/// Malformed input raises InputError with the file name and line number.
[[nodiscard]] ProductSample read_sample_csv(std::istream& in, const std::string& source = "<input>");
[[nodiscard]] ProductSample read_sample_csv(const std::filesystem::path& path);

void write_sample_csv(std::ostream& out, const ProductSample& sample);

/// Flat "key = value" configuration; '#' starts a comment. Duplicate keys are errors.
[[nodiscard]] std::map<std::string, std::string> read_key_value_config(std::istream& in,
                                                                       const std::string& source = "<config>");
[[nodiscard]] std::map<std::string, std::string> read_key_value_config(const std::filesystem::path& path);

/// Flattened coordinates of a factor point (vector entries or SPD upper triangle).
[[nodiscard]] std::vector<double> flatten(const FactorPoint& x);

}  // namespace prodmed
