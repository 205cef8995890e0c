#pragma once

#include <string>
#include <string_view>

#include "roboplat/dataset/records.hpp"

namespace roboplat::dataset {

/// Decodes one non-header CSV row of the given schema. Fields may be padded
/// with spaces around the commas. Throws DatasetError on malformed input.
SensorRecord parse_line(std::string_view line, Schema schema);

/// Encodes a record as a comma-only row without trailing newline.
/// Reals use the shortest decimal form that parses back to the same value.
std::string write_line(const SensorRecord& record);

/// True for blank lines and '#' comment lines.
bool is_comment_or_blank(std::string_view line);

std::string format_real(double v);

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace roboplat::dataset
